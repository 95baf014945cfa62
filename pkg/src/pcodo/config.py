"""Run configuration: defaults, INI files, and CLI overrides.

Precedence is CLI flag > config file > built-in default.  The CLI layer
collects only the flags the user actually passed and applies them with
``with_overrides``; everything else keeps the file or default value.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .features import FeatureConfig
from .matching import RansacConfig
from .sampling import SamplingConfig, SamplingStrategy

# flat dataclass field -> INI section
_SECTIONS = {
    "seed": "run",
    "points": "run",
    "sampling": "run",
    "use_views": "run",
    "use_eigen_features": "run",
    "train_scans": "run",
    "single_thread": "run",
    "k_neighbors": "sampling",
    "linearity_max": "sampling",
    "planarity_max": "sampling",
    "entropy_min": "sampling",
    "hop1_k": "features",
    "hop2_k": "features",
    "energy_threshold": "features",
    "mutual": "matching",
    "ransac_iterations": "matching",
    "inlier_threshold": "matching",
}


@dataclass(frozen=True)
class RunConfig:
    """Every tunable of the odometry pipeline, flat for easy overriding."""

    seed: int = 0
    points: int = 2048
    sampling: SamplingStrategy = SamplingStrategy.GEOMETRY_AWARE
    use_views: bool = True
    use_eigen_features: bool = True
    train_scans: int = 5
    single_thread: bool = False

    k_neighbors: int = 48
    linearity_max: float = 0.7
    planarity_max: float = 0.7
    entropy_min: float = 0.8

    hop1_k: int = 32
    hop2_k: int = 32
    energy_threshold: float = 1e-4

    mutual: bool = False
    ransac_iterations: int = 512
    inlier_threshold: float = 0.5

    def __post_init__(self):
        if self.points < 1:
            raise ValueError("points must be positive")
        if self.train_scans < 1:
            raise ValueError("train_scans must be positive")
        object.__setattr__(self, "sampling", SamplingStrategy(self.sampling))

    def sampling_config(self, seed: int | None = None) -> SamplingConfig:
        return SamplingConfig(
            k_neighbors=self.k_neighbors,
            linearity_max=self.linearity_max,
            planarity_max=self.planarity_max,
            entropy_min=self.entropy_min,
            target_count=self.points,
            strategy=self.sampling,
            rng_seed=self.seed if seed is None else seed,
        )

    def feature_config(self) -> FeatureConfig:
        return FeatureConfig(
            hop1_k=self.hop1_k,
            hop2_k=self.hop2_k,
            energy_threshold=self.energy_threshold,
        )

    def ransac_config(self, seed: int | None = None) -> RansacConfig:
        return RansacConfig(
            max_iterations=self.ransac_iterations,
            inlier_threshold=self.inlier_threshold,
            seed=self.seed if seed is None else seed,
        )

    def with_overrides(self, overrides: dict) -> "RunConfig":
        """Apply explicitly-set values (e.g. parsed CLI flags) on top."""
        unknown = set(overrides) - {f.name for f in fields(self)}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return replace(self, **overrides)

    def to_file(self, path, extra: dict | None = None) -> None:
        """Write the resolved configuration as INI.

        ``extra`` adds informational sections (e.g. model digest) that
        ``from_file`` ignores.
        """
        parser = configparser.ConfigParser()
        for f in fields(self):
            section = _SECTIONS[f.name]
            if not parser.has_section(section):
                parser.add_section(section)
            value = getattr(self, f.name)
            if isinstance(value, SamplingStrategy):
                value = value.value
            elif isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = repr(value)
            parser.set(section, f.name, str(value))
        for section, entries in (extra or {}).items():
            parser.add_section(section)
            for key, value in entries.items():
                parser.set(section, key, str(value))
        with open(path, "w") as fh:
            parser.write(fh)


def load_config(path) -> RunConfig:
    """Read an INI config; unknown keys in known sections are errors."""
    parser = configparser.ConfigParser()
    read = parser.read(Path(path))
    if not read:
        raise FileNotFoundError(path)

    known = {f.name: f for f in fields(RunConfig)}
    values = {}
    for section in ("run", "sampling", "features", "matching"):
        if not parser.has_section(section):
            continue
        for key in parser.options(section):
            if key not in known or _SECTIONS[key] != section:
                raise ValueError(f"unknown config key [{section}] {key}")
            f = known[key]
            if f.type in ("int", int):
                values[key] = parser.getint(section, key)
            elif f.type in ("float", float):
                values[key] = parser.getfloat(section, key)
            elif f.type in ("bool", bool):
                values[key] = parser.getboolean(section, key)
            else:
                values[key] = parser.get(section, key)
    return RunConfig(**values)

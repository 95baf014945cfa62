"""Command-line interface: train, odometry, eval, ablate, synth.

Every output directory is self-describing: the resolved configuration,
seed, and model digest are written next to the results, and rerunning
from the same inputs reproduces the science outputs bit-exactly (only
timings.csv varies run to run).
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .evaluate import evaluate_trajectories, relative_pose_errors
from .features import load_model, save_model
from .geometry import Trajectory
from .kitti_io import (
    load_sequence,
    read_pose_file,
    write_trajectory,
    write_trajectory_csv,
)
from .pipeline import OdometryResult, run_odometry, train_model
from .plots import ablation_figure, error_curve_figure, trajectory_figure
from .sampling import SamplingStrategy
from .synth import generate_sequence

_STRATEGIES = tuple(s.value for s in SamplingStrategy)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="INI config file")
    parser.add_argument("--seed", type=int, help="master RNG seed")
    parser.add_argument("--points", type=int, help="points kept per scan")
    parser.add_argument("--sampling", choices=_STRATEGIES, help="sampling strategy")
    parser.add_argument(
        "--no-views", action="store_true",
        help="match in one global view instead of four azimuthal views",
    )
    parser.add_argument(
        "--no-eigen-features", action="store_true",
        help="drop the eigen-feature triple from the descriptors",
    )
    parser.add_argument("--train-scans", type=int, help="training scan count")
    parser.add_argument(
        "--single-thread", action="store_true",
        help="reference sequential mode (also the default)",
    )


def _add_data(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--data-root", type=Path, required=True,
        help="KITTI root (with sequences/) or a flat sequence directory",
    )
    parser.add_argument(
        "--sequences", default="",
        help="comma-separated KITTI sequence ids; empty for a flat directory",
    )


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """CLI flag > config file > default."""
    config = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {}
    for flag, key in (
        ("seed", "seed"),
        ("points", "points"),
        ("train_scans", "train_scans"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "sampling", None) is not None:
        overrides["sampling"] = SamplingStrategy(args.sampling)
    if getattr(args, "no_views", False):
        overrides["use_views"] = False
    if getattr(args, "no_eigen_features", False):
        overrides["use_eigen_features"] = False
    if getattr(args, "single_thread", False):
        overrides["single_thread"] = True
    return config.with_overrides(overrides)


def _sequence_ids(args: argparse.Namespace) -> list[str | None]:
    ids = [s.strip() for s in args.sequences.split(",") if s.strip()]
    return ids or [None]


def _load_sequences(args: argparse.Namespace) -> list:
    return [load_sequence(args.data_root, sid) for sid in _sequence_ids(args)]


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_frames_csv(result: OdometryResult, path: Path) -> None:
    with open(path, "w") as fh:
        fh.write(type(result.frames[0]).HEADER + "\n")
        for diag in result.frames:
            fh.write(diag.row() + "\n")


def _write_timings_csv(result: OdometryResult, path: Path) -> None:
    with open(path, "w") as fh:
        fh.write(type(result.frames[0].timings).HEADER + "\n")
        for diag in result.frames:
            fh.write(diag.timings.row(diag.frame) + "\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_train(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    sequences = _load_sequences(args)
    model = train_model(sequences, config)
    args.model.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, args.model)
    config.to_file(
        args.model.with_suffix(".cfg"),
        extra={"provenance": {"model_sha256": _sha256(args.model)}},
    )
    size = args.model.stat().st_size
    print(f"model written: {args.model} ({size} bytes, {model.feature_dim} feature dims)")
    return 0


def cmd_odometry(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    model = load_model(args.model)
    model_hash = _sha256(args.model)

    for sid, sequence in zip(_sequence_ids(args), _load_sequences(args)):
        out = args.out / (sid if sid else sequence.name)
        out.mkdir(parents=True, exist_ok=True)
        result = run_odometry(sequence, model, config)

        write_trajectory(result.trajectory, out / "trajectory.txt")
        write_trajectory_csv(result.trajectory, out / "trajectory.csv")
        _write_frames_csv(result, out / "frames.csv")
        _write_timings_csv(result, out / "timings.csv")
        config.to_file(
            out / "run.cfg",
            extra={
                "provenance": {
                    "command": "odometry",
                    "sequence": sequence.name,
                    "frames": str(len(sequence)),
                    "model_sha256": model_hash,
                }
            },
        )
        trajectory_figure(result.trajectory, out / "trajectory.png", sequence.ground_truth)
        if sequence.ground_truth is not None:
            t_err, r_err = relative_pose_errors(result.trajectory, sequence.ground_truth)
            error_curve_figure(t_err, np.degrees(r_err), out / "errors.png")

        inliers = [d.inliers for d in result.frames[1:] if not d.fallback]
        mean_inliers = float(np.mean(inliers)) if inliers else float("nan")
        print(
            f"{sequence.name}: {len(sequence)} frames, "
            f"{result.fallback_count} fallbacks, mean inliers {mean_inliers:.1f} "
            f"-> {out}"
        )
    return 0


_METRIC_COLUMNS = (
    ("kitti_translation_pct", "KITTI t [%]"),
    ("kitti_rotation_deg_per_m", "KITTI r [deg/m]"),
    ("rel_translation_rmse_m", "rel t RMSE [m]"),
    ("rel_rotation_rmse_deg", "rel r RMSE [deg]"),
    ("drift_fraction", "final drift"),
)


def _metric_values(errors) -> list[float]:
    return [getattr(errors, key) for key, _ in _METRIC_COLUMNS]


def _format_table(rows: list[tuple[str, list[float]]], label: str) -> str:
    header = [label] + [title for _, title in _METRIC_COLUMNS]
    widths = [max(len(header[0]), *(len(r[0]) for r in rows))]
    widths += [max(len(h), 12) for h in header[1:]]
    lines = ["  ".join(h.rjust(w) for h, w in zip(header, widths))]
    for name, values in rows:
        cells = [name.rjust(widths[0])]
        cells += [f"{v:.6g}".rjust(w) for v, w in zip(values, widths[1:])]
        lines.append("  ".join(cells))
    return "\n".join(lines)


def _prediction_path(pred: Path, sid: str | None, name: str) -> Path:
    if pred.is_file():
        return pred
    for candidate in (
        pred / (sid or name) / "trajectory.txt",
        pred / "trajectory.txt",
    ):
        if candidate.exists():
            return candidate
    raise FileNotFoundError(f"no trajectory.txt for {sid or name} under {pred}")


def cmd_eval(args: argparse.Namespace) -> int:
    args.out.mkdir(parents=True, exist_ok=True)
    rows: list[tuple[str, list[float]]] = []
    for sid, sequence in zip(_sequence_ids(args), _load_sequences(args)):
        if sequence.ground_truth is None:
            raise FileNotFoundError(f"sequence {sequence.name} has no ground truth")
        pred = read_pose_file(_prediction_path(args.pred, sid, sequence.name))
        errors = evaluate_trajectories(pred, sequence.ground_truth)
        rows.append((sequence.name, _metric_values(errors)))

        trajectory_figure(
            pred,
            args.out / f"{sequence.name}_trajectory.png",
            sequence.ground_truth,
            title=f"{sequence.name}: estimated vs ground truth",
        )
        t_err, r_err = relative_pose_errors(pred, sequence.ground_truth)
        error_curve_figure(
            t_err, np.degrees(r_err), args.out / f"{sequence.name}_errors.png"
        )

    if len(rows) > 1:
        stacked = np.array([values for _, values in rows])
        rows.append(("mean", np.nanmean(stacked, axis=0).tolist()))

    table = _format_table(rows, "sequence")
    print(table)
    (args.out / "metrics.txt").write_text(table + "\n")
    with open(args.out / "metrics.csv", "w") as fh:
        fh.write("sequence," + ",".join(key for key, _ in _METRIC_COLUMNS) + "\n")
        for name, values in rows:
            fh.write(name + "," + ",".join(f"{v:.17g}" for v in values) + "\n")
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    sequences = _load_sequences(args)
    if len(sequences) != 1:
        raise ValueError("ablate expects exactly one sequence")
    sequence = sequences[0]
    if sequence.ground_truth is None:
        raise FileNotFoundError(f"sequence {sequence.name} has no ground truth")

    counts = [int(c) for c in str(args.counts).split(",") if c.strip()]
    if not counts or any(c < 1 for c in counts):
        raise ValueError(f"invalid --counts: {args.counts!r}")

    variants: list[tuple[str, RunConfig]] = []
    for strategy in SamplingStrategy:
        for count in counts:
            variants.append(
                (
                    f"{strategy.value}-{count}",
                    config.with_overrides({"sampling": strategy, "points": count}),
                )
            )
    variants.append(("no-views", config.with_overrides({"use_views": False})))
    variants.append(
        ("no-eigen", config.with_overrides({"use_eigen_features": False}))
    )

    args.out.mkdir(parents=True, exist_ok=True)
    models: dict[tuple, object] = {}
    rows: list[tuple[str, list[float]]] = []
    labels: list[str] = []
    drifts: list[float] = []
    with open(args.out / "ablation.csv", "w") as fh:
        fh.write(
            "variant,sampling,points,views,eigen_features,"
            + ",".join(key for key, _ in _METRIC_COLUMNS)
            + ",fallbacks\n"
        )
        for label, variant in variants:
            key = (variant.sampling, variant.points, variant.train_scans)
            if key not in models:
                models[key] = train_model(sequence, variant)
            result = run_odometry(sequence, models[key], variant)
            errors = evaluate_trajectories(result.trajectory, sequence.ground_truth)
            values = _metric_values(errors)
            rows.append((label, values))
            labels.append(label)
            drifts.append(errors.drift_fraction)
            fh.write(
                f"{label},{variant.sampling.value},{variant.points},"
                f"{int(variant.use_views)},{int(variant.use_eigen_features)},"
                + ",".join(f"{v:.17g}" for v in values)
                + f",{result.fallback_count}\n"
            )
            print(f"{label}: drift {errors.drift_fraction:.4f}, "
                  f"rel t RMSE {errors.rel_translation_rmse_m:.4f} m")

    table = _format_table(rows, "variant")
    (args.out / "ablation.txt").write_text(table + "\n")
    ablation_figure(labels, drifts, args.out / "ablation.png")
    print(f"ablation results -> {args.out}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    out = generate_sequence(
        args.out,
        frames=args.frames,
        points=args.points,
        noise=args.noise,
        seed=args.seed,
        step=args.step,
    )
    print(f"synthetic sequence ({args.frames} frames) -> {out}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pcodo",
        description="Unsupervised LiDAR point-cloud odometry",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a feature model from scans")
    _add_data(p)
    _add_common(p)
    p.add_argument("--model", type=Path, required=True, help="output model file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("odometry", help="estimate a trajectory")
    _add_data(p)
    _add_common(p)
    p.add_argument("--model", type=Path, required=True, help="trained model file")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.set_defaults(func=cmd_odometry)

    p = sub.add_parser("eval", help="score trajectories against ground truth")
    _add_data(p)
    p.add_argument("--pred", type=Path, required=True,
                   help="trajectory file or odometry output directory")
    p.add_argument("--out", type=Path, required=True, help="report directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="factor grid over sampling choices")
    _add_data(p)
    _add_common(p)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--counts", default="1024,2048",
                   help="comma-separated point budgets for the grid")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("synth", help="generate a synthetic sequence")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--frames", type=int, default=50)
    p.add_argument("--points", type=int, default=20000, help="points per scan")
    p.add_argument("--noise", type=float, default=0.02, help="noise sigma [m]")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--step", type=float, default=0.4, help="meters per frame")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

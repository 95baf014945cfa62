"""Learned point descriptors: two hops of octant pooling + Saab transforms.

Per hop, every point summarizes its k nearest neighbors as one 8-vector
per input channel: neighbors fall into the eight octants around the point
(split by coordinate sign relative to it) and each octant contributes the
mean channel value, zero when empty.  A channel-wise Saab transform turns
those 8-vectors into decorrelated coefficients: the first kernel is the
constant DC vector, the remaining kernels are principal components of the
DC-removed vectors.  Hop 1 reads the three relative coordinates, so its
output is translation-invariant; hop 2 reads the energetic hop-1
coefficients of the neighborhood.

The final per-point descriptor is the concatenation of all hop-1 and
hop-2 coefficients, the point's 3D coordinates, and its three local
eigen-features.
"""

from __future__ import annotations

import json
import logging
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateTraining,
    InsufficientPoints,
    ModelMismatch,
    WriteError,
)
from .geometry import PointCloud
from .neighbors import exclude_self_knn
from .sampling import EigenFeatures

logger = logging.getLogger(__name__)

DC_KERNEL = np.full(8, 1.0 / np.sqrt(8.0))
DC_KERNEL.flags.writeable = False

# Channels whose total variance falls at or below this train as DC-only.
VARIANCE_FLOOR = 1e-12

MODEL_MAGIC = b"PCODSAAB"
MODEL_VERSION = 1


@dataclass(frozen=True)
class FeatureConfig:
    """Feature-extraction knobs: per-hop neighborhood sizes and the energy
    cutoff deciding which hop-1 channels feed hop 2."""

    hop1_k: int = 32
    hop2_k: int = 32
    energy_threshold: float = 1e-4

    def __post_init__(self) -> None:
        if self.hop1_k < 1 or self.hop2_k < 1:
            raise ValueError("hop neighborhood sizes must be >= 1")
        if not 0.0 <= self.energy_threshold < 1.0:
            raise ValueError("energy_threshold must lie in [0, 1)")


@dataclass(frozen=True)
class SaabChannelFilter:
    """Trained transform of one input channel.

    ``kernels`` is (8, m) with the DC vector as column 0 and principal
    AC directions after it, orthonormal as a set.  ``bias`` is the largest
    training-vector magnitude: adding it to every component of an input
    vector makes the vector nonnegative, and because that shift lies along
    the DC direction it never touches the learned kernels or energies.
    ``energies`` assigns each output coefficient its share of the parent
    channel's energy (index 0 = DC share).
    """

    kernels: np.ndarray
    bias: float
    energies: np.ndarray

    def __post_init__(self) -> None:
        kernels = np.ascontiguousarray(self.kernels, dtype=np.float64)
        energies = np.ascontiguousarray(self.energies, dtype=np.float64)
        if kernels.ndim != 2 or kernels.shape[0] != 8 or kernels.shape[1] < 1:
            raise ValueError(f"kernels must be (8, m>=1), got {kernels.shape}")
        if not np.array_equal(kernels[:, 0], DC_KERNEL):
            raise ValueError("kernel column 0 must be the DC vector")
        gram_err = np.abs(kernels.T @ kernels - np.eye(kernels.shape[1])).max()
        if gram_err > 1e-6:
            raise ValueError(f"kernels are not orthonormal (err {gram_err:.3e})")
        if energies.shape != (kernels.shape[1],):
            raise ValueError("energies must have one entry per kernel")
        if (energies < 0.0).any():
            raise ValueError("energies must be nonnegative")
        if energies.size > 2 and (np.diff(energies[1:]) > 1e-12).any():
            raise ValueError("AC energies must be non-increasing")
        if not (np.isfinite(self.bias) and self.bias >= 0.0):
            raise ValueError("bias must be finite and nonnegative")
        kernels.flags.writeable = False
        energies.flags.writeable = False
        object.__setattr__(self, "kernels", kernels)
        object.__setattr__(self, "energies", energies)

    @property
    def n_outputs(self) -> int:
        return self.kernels.shape[1]

    def transform(self, vectors: np.ndarray) -> np.ndarray:
        """Project (..., 8) octant vectors onto the kernels."""
        return np.asarray(vectors, dtype=np.float64) @ self.kernels


@dataclass(frozen=True)
class HopModel:
    """All channel filters of one hop plus its neighborhood size."""

    k_neighbors: int
    filters: tuple[SaabChannelFilter, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "filters", tuple(self.filters))
        if not self.filters:
            raise ValueError("a hop needs at least one channel filter")
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")

    @property
    def n_channels(self) -> int:
        return len(self.filters)

    @property
    def n_outputs(self) -> int:
        return sum(f.n_outputs for f in self.filters)


@dataclass(frozen=True)
class SaabModel:
    """Two trained hops plus the energy bookkeeping wiring them together.

    ``forwarded`` lists the hop-1 output coefficients (channel, component)
    whose energy reached the threshold; they are, in order, the input
    channels of hop 2.
    """

    hop1: HopModel
    hop2: HopModel
    forwarded: tuple[tuple[int, int], ...]
    energy_threshold: float
    metadata: dict

    def __post_init__(self) -> None:
        if self.hop1.n_channels != 3:
            raise ModelMismatch(
                f"hop 1 must have 3 coordinate channels, found {self.hop1.n_channels}"
            )
        forwarded = tuple((int(c), int(j)) for c, j in self.forwarded)
        if not forwarded:
            raise ModelMismatch("no hop-1 channels were forwarded to hop 2")
        for c, j in forwarded:
            if not (0 <= c < self.hop1.n_channels):
                raise ModelMismatch(f"forwarded channel {c} out of range")
            if not (0 <= j < self.hop1.filters[c].n_outputs):
                raise ModelMismatch(f"forwarded component {j} out of range for channel {c}")
        if self.hop2.n_channels != len(forwarded):
            raise ModelMismatch(
                f"hop 2 has {self.hop2.n_channels} filters for {len(forwarded)} forwarded channels"
            )
        object.__setattr__(self, "forwarded", forwarded)
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def hop1_dim(self) -> int:
        return self.hop1.n_outputs

    @property
    def hop2_dim(self) -> int:
        return self.hop2.n_outputs

    @property
    def feature_dim(self) -> int:
        # hops + 3 coordinates + 3 eigen-features
        return self.hop1_dim + self.hop2_dim + 6


def _octant_onehot(rel: np.ndarray) -> np.ndarray:
    """(N, k, 8) one-hot octant membership; sign >= 0 counts as positive."""
    oct_id = (
        (rel[..., 0] >= 0.0).astype(np.int64) * 4
        + (rel[..., 1] >= 0.0).astype(np.int64) * 2
        + (rel[..., 2] >= 0.0).astype(np.int64)
    )
    return (oct_id[..., None] == np.arange(8)).astype(np.float64)


def _octant_means(onehot: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Mean value per octant, zero where an octant is empty.

    ``onehot`` is (N, k, 8), ``values`` (N, k, C); result is (N, 8, C).
    """
    sums = np.einsum("nko,nkc->noc", onehot, values)
    counts = onehot.sum(axis=1)
    return sums / np.where(counts > 0.0, counts, 1.0)[:, :, None]


def relative_octant_attributes(xyz: np.ndarray, neighbor_idx: np.ndarray) -> np.ndarray:
    """Hop-1 attributes: octant means of neighbors' relative coordinates.

    Returns (N, 8, 3), one 8-vector per coordinate channel.  Built purely
    from neighbor minus center, hence translation-invariant.
    """
    rel = xyz[neighbor_idx] - xyz[:, None, :]
    return _octant_means(_octant_onehot(rel), rel)


def scalar_octant_attributes(
    xyz: np.ndarray, neighbor_idx: np.ndarray, values: np.ndarray
) -> np.ndarray:
    """Octant means of per-point scalar channels; returns (N, 8, C)."""
    rel = xyz[neighbor_idx] - xyz[:, None, :]
    vals = np.asarray(values, dtype=np.float64)
    if vals.ndim == 1:
        vals = vals[:, None]
    return _octant_means(_octant_onehot(rel), vals[neighbor_idx])


def octant_attributes(cloud: PointCloud, center: int, k: int, channel_values: np.ndarray) -> np.ndarray:
    """Octant attribute vectors of one point.

    ``channel_values`` holds per-point scalars over the whole cloud, shape
    (N,) or (N, C).  Returns (8,) or (8, C).  The center itself is not a
    member of its neighbor set.
    """
    vals = np.asarray(channel_values, dtype=np.float64)
    squeeze = vals.ndim == 1
    v = vals[:, None] if squeeze else vals
    nbr = exclude_self_knn(cloud.xyz, k)[center]
    rel = cloud.xyz[nbr] - cloud.xyz[center]
    onehot = _octant_onehot(rel[None, :, :])
    out = _octant_means(onehot, v[nbr][None, :, :])[0]
    return out[:, 0] if squeeze else out


def _canonical_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    out = vectors.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        if col[np.argmax(np.abs(col))] < 0.0:
            out[:, j] = -col
    return out


def train_channel_filter(vectors: np.ndarray, parent_energy: float) -> SaabChannelFilter:
    """Fit one channel's Saab filter from (S, 8) training octant vectors.

    The DC kernel is fixed; AC kernels are principal components of the
    DC-removed vectors in decreasing eigenvalue order (near-null
    directions dropped).  Output energies split ``parent_energy`` in
    proportion to variance and therefore sum back to it.  A channel with
    ~zero total variance keeps only DC and inherits the full parent
    energy.
    """
    vecs = np.asarray(vectors, dtype=np.float64)
    if vecs.ndim != 2 or vecs.shape[1] != 8 or vecs.shape[0] < 1:
        raise ValueError(f"training vectors must be (S>=1, 8), got {vecs.shape}")
    bias = float(np.linalg.norm(vecs, axis=1).max())

    total_var = float(vecs.var(axis=0).sum())
    if total_var <= VARIANCE_FLOOR:
        return SaabChannelFilter(
            kernels=DC_KERNEL[:, None].copy(),
            bias=bias,
            energies=np.array([parent_energy]),
        )

    dc_coeff = vecs @ DC_KERNEL
    resid = vecs - dc_coeff[:, None] * DC_KERNEL[None, :]
    centered = resid - resid.mean(axis=0)
    cov = centered.T @ centered / vecs.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    keep = evals > VARIANCE_FLOOR
    ac = _canonical_signs(evecs[:, keep])

    var_dc = float(dc_coeff.var())
    total = var_dc + float(evals.sum())
    energies = parent_energy * np.concatenate([[var_dc], evals[keep]]) / total
    kernels = np.column_stack([DC_KERNEL, ac])
    return SaabChannelFilter(kernels=kernels, bias=bias, energies=energies)


def _hop1_coefficients(model_hop: HopModel, xyz: np.ndarray) -> list[np.ndarray]:
    nbr = exclude_self_knn(xyz, model_hop.k_neighbors)
    attrs = relative_octant_attributes(xyz, nbr)
    return [f.transform(attrs[:, :, c]) for c, f in enumerate(model_hop.filters)]


def train_saab(clouds, config: FeatureConfig, seed: int = 0) -> SaabModel:
    """Train both hops from already-sampled clouds.

    Octant vectors are gathered across all clouds per channel; hop-1 root
    channels (the three coordinates) start with energy 1/3 each, and a
    hop-1 output feeds hop 2 when its energy reaches the configured
    threshold.
    """
    clouds = list(clouds)
    if not clouds:
        raise ValueError("training requires at least one cloud")
    need = max(config.hop1_k, config.hop2_k) + 1
    for i, c in enumerate(clouds):
        if len(c) < need:
            raise InsufficientPoints(f"training cloud {i} has {len(c)} < {need} points")

    per_cloud_nbr1 = [exclude_self_knn(c.xyz, config.hop1_k) for c in clouds]
    per_cloud_attrs1 = [
        relative_octant_attributes(c.xyz, nbr) for c, nbr in zip(clouds, per_cloud_nbr1)
    ]

    filters1 = []
    for channel in range(3):
        vectors = np.concatenate([a[:, :, channel] for a in per_cloud_attrs1])
        filters1.append(train_channel_filter(vectors, parent_energy=1.0 / 3.0))
    hop1 = HopModel(config.hop1_k, tuple(filters1))

    if all(f.n_outputs == 1 for f in filters1) and all(
        np.concatenate([a[:, :, c] for a in per_cloud_attrs1]).var(axis=0).sum()
        <= VARIANCE_FLOOR
        for c in range(3)
    ):
        raise DegenerateTraining("every hop-1 channel has zero variance")

    forwarded = []
    for c, f in enumerate(filters1):
        for j, energy in enumerate(f.energies):
            if energy >= config.energy_threshold:
                forwarded.append((c, j))
    if not forwarded:
        raise ValueError(
            "energy_threshold leaves no hop-1 channel for hop 2; lower it"
        )
    logger.info("hop 1 forwards %d of %d output channels", len(forwarded), hop1.n_outputs)

    parent_energies = [filters1[c].energies[j] for c, j in forwarded]
    per_channel_vectors: list[list[np.ndarray]] = [[] for _ in forwarded]
    for cloud, attrs1 in zip(clouds, per_cloud_attrs1):
        coeffs1 = [f.transform(attrs1[:, :, c]) for c, f in enumerate(filters1)]
        values = np.column_stack([coeffs1[c][:, j] for c, j in forwarded])
        nbr2 = exclude_self_knn(cloud.xyz, config.hop2_k)
        attrs2 = scalar_octant_attributes(cloud.xyz, nbr2, values)
        for ci in range(len(forwarded)):
            per_channel_vectors[ci].append(attrs2[:, :, ci])

    filters2 = tuple(
        train_channel_filter(np.concatenate(vs), parent_energy=pe)
        for vs, pe in zip(per_channel_vectors, parent_energies)
    )
    hop2 = HopModel(config.hop2_k, filters2)

    return SaabModel(
        hop1=hop1,
        hop2=hop2,
        forwarded=tuple(forwarded),
        energy_threshold=config.energy_threshold,
        metadata={"training_clouds": len(clouds), "seed": int(seed)},
    )


def extract_features(cloud: PointCloud, model: SaabModel, eigen: EigenFeatures) -> np.ndarray:
    """Per-point descriptor matrix (N, model.feature_dim).

    Layout: [hop-1 coefficients | hop-2 coefficients | x y z | linearity,
    planarity, eigen-entropy].  ``eigen`` must align with ``cloud``.
    """
    if len(eigen) != len(cloud):
        raise ValueError(f"eigen features cover {len(eigen)} points, cloud has {len(cloud)}")
    need = max(model.hop1.k_neighbors, model.hop2.k_neighbors) + 1
    if len(cloud) < need:
        raise InsufficientPoints(f"cloud has {len(cloud)} < {need} points")

    xyz = cloud.xyz
    coeffs1 = _hop1_coefficients(model.hop1, xyz)
    hop1_cat = np.concatenate(coeffs1, axis=1)

    values = np.column_stack([coeffs1[c][:, j] for c, j in model.forwarded])
    nbr2 = exclude_self_knn(xyz, model.hop2.k_neighbors)
    attrs2 = scalar_octant_attributes(xyz, nbr2, values)
    hop2_cat = np.concatenate(
        [f.transform(attrs2[:, :, ci]) for ci, f in enumerate(model.hop2.filters)], axis=1
    )

    feats = np.hstack([hop1_cat, hop2_cat, xyz, eigen.triple()])
    if feats.shape[1] != model.feature_dim:
        raise ModelMismatch(
            f"assembled dimension {feats.shape[1]} != model feature_dim {model.feature_dim}"
        )
    return feats


# ---------------------------------------------------------------------------
# Serialization: little-endian binary container, text (JSON) header.
# Layout documented in README.md; round-trips are bit-exact.
# ---------------------------------------------------------------------------


def _filter_payload(f: SaabChannelFilter) -> bytes:
    return (
        np.ascontiguousarray(f.kernels, dtype="<f8").tobytes()
        + struct.pack("<d", f.bias)
        + np.ascontiguousarray(f.energies, dtype="<f8").tobytes()
    )


def save_model(model: SaabModel, path) -> None:
    """Write a model file atomically (temp file + rename)."""
    header = {
        "version": MODEL_VERSION,
        "energy_threshold": model.energy_threshold,
        "hop1": {"k": model.hop1.k_neighbors, "channels": [f.n_outputs for f in model.hop1.filters]},
        "hop2": {"k": model.hop2.k_neighbors, "channels": [f.n_outputs for f in model.hop2.filters]},
        "forwarded": [list(pair) for pair in model.forwarded],
        "metadata": model.metadata,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    blob = bytearray()
    blob += MODEL_MAGIC
    blob += struct.pack("<I", MODEL_VERSION)
    blob += struct.pack("<I", len(header_bytes))
    blob += header_bytes
    for hop in (model.hop1, model.hop2):
        for f in hop.filters:
            blob += _filter_payload(f)

    path = os.fspath(path)
    tmp = path + ".tmp"
    try:
        with open(tmp, "wb") as fh:
            fh.write(bytes(blob))
        os.replace(tmp, path)
    except OSError as exc:
        try:
            if os.path.exists(tmp):
                os.unlink(tmp)
        except OSError:
            pass
        raise WriteError(f"cannot write model file {path}: {exc}") from exc


def _read_filter(buf: memoryview, offset: int, m: int) -> tuple[SaabChannelFilter, int]:
    k_bytes = 8 * m * 8
    kernels = np.frombuffer(buf, dtype="<f8", count=8 * m, offset=offset).reshape(8, m)
    offset += k_bytes
    (bias,) = struct.unpack_from("<d", buf, offset)
    offset += 8
    energies = np.frombuffer(buf, dtype="<f8", count=m, offset=offset)
    offset += m * 8
    return SaabChannelFilter(kernels.copy(), bias, energies.copy()), offset


def load_model(path) -> SaabModel:
    """Read a model file; raises ModelMismatch on any layout violation."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 16 or data[:8] != MODEL_MAGIC:
        raise ModelMismatch(f"{path}: not a feature-model file")
    (version,) = struct.unpack_from("<I", data, 8)
    if version != MODEL_VERSION:
        raise ModelMismatch(f"{path}: unsupported model version {version}")
    (header_len,) = struct.unpack_from("<I", data, 12)
    try:
        header = json.loads(data[16 : 16 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelMismatch(f"{path}: corrupt header: {exc}") from exc

    buf = memoryview(data)
    offset = 16 + header_len
    hops = []
    try:
        for key in ("hop1", "hop2"):
            filters = []
            for m in header[key]["channels"]:
                f, offset = _read_filter(buf, offset, int(m))
                filters.append(f)
            hops.append(HopModel(int(header[key]["k"]), tuple(filters)))
    except (KeyError, ValueError, struct.error) as exc:
        raise ModelMismatch(f"{path}: corrupt payload: {exc}") from exc
    if offset != len(data):
        raise ModelMismatch(f"{path}: trailing bytes ({len(data) - offset})")

    return SaabModel(
        hop1=hops[0],
        hop2=hops[1],
        forwarded=tuple(tuple(p) for p in header["forwarded"]),
        energy_threshold=float(header["energy_threshold"]),
        metadata=dict(header.get("metadata", {})),
    )

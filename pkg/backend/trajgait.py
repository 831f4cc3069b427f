"""
TrajGait encoding
Normalized 3D displacement descriptors, a restarted k-means codebook, and hard-assignment
histograms per RGBD sample
"""
import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.spatial.distance import pdist

from config import (
    CODEBOOK_SIZE, DESCRIPTOR_POOL, DESCRIPTORS_PER_SAMPLE, KMEANS_MAX_ITER, KMEANS_RESTARTS, THREADS,
    TRAJECTORY_LENGTH
)
from models import DimensionError, FormatError, ValidationError
from numerics import kmeans_lloyd, nearest_center
from rgbd_pipeline import Trajectory3D

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

CODEBOOK_MAGIC = b"TGC1"
CHANNELS = ("rgbd", "depth", "rgb")
MAX_EXACT_SEED = 2 ** 53


@dataclass(frozen=True, eq=False)
class TrajDescriptor:
    """Δx_1..Δx_L, Δy_1..Δy_L, Δz_1..Δz_L after block-wise normalization"""
    values: np.ndarray
    source_id: str = ""

    @property
    def length(self) -> int:
        return len(self.values) // 3


@dataclass(frozen=True, eq=False)
class Codebook:
    centers: np.ndarray
    seed: int = 0
    kmeans_cost: float = float('nan')
    restart_costs: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        centers = np.array(self.centers, dtype=np.float64)
        if centers.ndim != 2 or len(centers) < 2:
            raise ValidationError(f"a codebook needs K >= 2 centers, got shape {centers.shape}")
        if np.any(pdist(centers) == 0):
            raise ValidationError("codebook centers must be pairwise distinct")
        if not 0 <= self.seed < MAX_EXACT_SEED:
            raise ValidationError(f"codebook seed must be in [0, 2^53), got {self.seed}")
        centers.setflags(write=False)
        object.__setattr__(self, 'centers', centers)

    @property
    def K(self) -> int:
        return len(self.centers)

    @property
    def dimension(self) -> int:
        return self.centers.shape[1]

    @cached_property
    def codebook_id(self) -> str:
        return hashlib.sha256(to_bytes(self)).hexdigest()


@dataclass(frozen=True, eq=False)
class TrajHistogram:
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def is_empty(self) -> bool:
        return self.total == 0


# ============================================================================
# describe
# ============================================================================

def describe_points(points: np.ndarray) -> np.ndarray:
    """Descriptor values of one (L+1) x 3 track"""
    deltas = np.diff(np.asarray(points, dtype=np.float64), axis=0)
    dx, dy, dz = deltas[:, 0], deltas[:, 1], deltas[:, 2]

    spatial_sum = float(np.hypot(dx, dy).sum())
    depth_sum = float(np.abs(dz).sum())
    spatial = np.concatenate([dx, dy])
    if spatial_sum > 0:
        spatial = spatial / spatial_sum
    else:
        spatial = np.zeros_like(spatial)
    depth = dz / depth_sum if depth_sum > 0 else np.zeros_like(dz)
    return np.concatenate([spatial, depth])


def describe(traj: Trajectory3D, L: int = TRAJECTORY_LENGTH, source_id: str = "") -> TrajDescriptor:
    """
    Shape descriptor of a track from its raw displacements

    The spatial block is divided by the summed 2D step lengths and the depth block by the
    summed absolute depth steps; a block with zero sum stays all-zero.
    """
    if len(traj.points) != L + 1:
        raise DimensionError(f"trajectory has {len(traj.points)} points, expected {L + 1}")
    return TrajDescriptor(values=describe_points(traj.points), source_id=source_id)


def describe_many(trajectories: Sequence[Trajectory3D], L: int = TRAJECTORY_LENGTH) -> np.ndarray:
    """Descriptors of a whole sample as an (n, 3L) matrix"""
    if not trajectories:
        return np.empty((0, 3 * L))
    stacked = np.stack([t.points for t in trajectories])
    if stacked.shape[1] != L + 1:
        raise DimensionError(f"trajectories have {stacked.shape[1]} points, expected {L + 1}")

    deltas = np.diff(stacked, axis=1)
    dx, dy, dz = deltas[..., 0], deltas[..., 1], deltas[..., 2]
    spatial_sum = np.hypot(dx, dy).sum(axis=1, keepdims=True)
    depth_sum = np.abs(dz).sum(axis=1, keepdims=True)
    spatial = np.divide(np.hstack([dx, dy]), spatial_sum, out=np.zeros((len(stacked), 2 * L)),
                        where=spatial_sum > 0)
    depth = np.divide(dz, depth_sum, out=np.zeros((len(stacked), L)), where=depth_sum > 0)
    return np.hstack([spatial, depth])


def restrict(descriptors: np.ndarray, channel: str) -> np.ndarray:
    """Zero the complementary block: `depth` keeps Δz only, `rgb` keeps Δx/Δy only"""
    if channel not in CHANNELS:
        raise ValidationError(f"channel must be one of {CHANNELS}, got {channel!r}")
    descriptors = np.array(descriptors, dtype=np.float64)
    if channel == "rgbd" or descriptors.size == 0:
        return descriptors
    if descriptors.shape[-1] % 3:
        raise DimensionError(f"descriptor length {descriptors.shape[-1]} is not a multiple of 3")
    L = descriptors.shape[-1] // 3
    if channel == "depth":
        descriptors[..., :2 * L] = 0.0
    else:
        descriptors[..., 2 * L:] = 0.0
    return descriptors


# ============================================================================
# fit_codebook
# ============================================================================

def pool_descriptors(
    training: Mapping[str, np.ndarray],
    rng: np.random.Generator,
    per_sample: int = DESCRIPTORS_PER_SAMPLE,
    pool_cap: int = DESCRIPTOR_POOL
) -> np.ndarray:
    """Uniformly sample up to `per_sample` descriptors per sample, then cap the pool"""
    chunks = []
    for sample_id in training:
        descriptors = np.asarray(training[sample_id], dtype=np.float64)
        if descriptors.size == 0:
            continue
        if len(descriptors) > per_sample:
            chosen = np.sort(rng.choice(len(descriptors), per_sample, replace=False))
            descriptors = descriptors[chosen]
        chunks.append(descriptors)
    if not chunks:
        return np.empty((0, 0))

    dims = {c.shape[1] for c in chunks}
    if len(dims) != 1:
        raise DimensionError(f"descriptors of different lengths {sorted(dims)}")
    pooled = np.vstack(chunks)
    if len(pooled) > pool_cap:
        pooled = pooled[np.sort(rng.choice(len(pooled), pool_cap, replace=False))]
    return pooled


def fit_codebook(
    training: Mapping[str, np.ndarray],
    K: int = CODEBOOK_SIZE,
    seed: int = 0,
    restarts: int = KMEANS_RESTARTS,
    per_sample: int = DESCRIPTORS_PER_SAMPLE,
    pool_cap: int = DESCRIPTOR_POOL,
    max_iter: int = KMEANS_MAX_ITER,
    threads: int = THREADS
) -> Codebook:
    """
    Learn K centers from training descriptors

    Runs Lloyd k-means `restarts` times from independently seeded k-means++ starts and keeps
    the lowest-cost run (the earliest on equal cost).
    """
    if K < 2:
        raise ValidationError(f"K must be at least 2, got {K}")
    if restarts < 1:
        raise ValidationError(f"restarts must be positive, got {restarts}")

    sampling_seq, *restart_seqs = np.random.SeedSequence(seed).spawn(restarts + 1)
    pooled = pool_descriptors(training, np.random.default_rng(sampling_seq), per_sample, pool_cap)
    if len(pooled) < K:
        raise ValidationError(f"pooled {len(pooled)} descriptors, need at least K={K}")
    logger.info(f"📊 Fitting codebook K={K} on {len(pooled)} descriptors from {len(training)} samples "
                f"({restarts} restarts)")

    def run(sequence):
        return kmeans_lloyd(pooled, K, np.random.default_rng(sequence), max_iter=max_iter)

    with ThreadPoolExecutor(max_workers=max(1, min(threads, restarts))) as pool:
        results = list(pool.map(run, restart_seqs))

    costs = np.array([r.cost for r in results])
    best = int(np.argmin(costs))
    logger.info(f"✅ Codebook fit: best restart {best} cost {costs[best]:.6g} "
                f"(worst {costs.max():.6g})")
    return Codebook(
        centers=results[best].centers,
        seed=seed,
        kmeans_cost=float(costs[best]),
        restart_costs=costs,
    )


# ============================================================================
# encode
# ============================================================================

def _as_matrix(descriptors) -> np.ndarray:
    if isinstance(descriptors, np.ndarray):
        return descriptors.reshape(len(descriptors), -1) if descriptors.size else np.empty((0, 0))
    rows = [d.values if isinstance(d, TrajDescriptor) else np.asarray(d, dtype=np.float64)
            for d in descriptors]
    return np.vstack(rows) if rows else np.empty((0, 0))


def encode(descriptors, codebook: Codebook) -> TrajHistogram:
    """Hard-assignment histogram; each descriptor counts toward its nearest center (lowest index on ties)"""
    matrix = _as_matrix(descriptors)
    if len(matrix) == 0:
        logger.debug("Encoding an empty descriptor list: all-zero histogram")
        return TrajHistogram(counts=np.zeros(codebook.K, dtype=np.int64))
    if matrix.shape[1] != codebook.dimension:
        raise DimensionError(f"descriptors have length {matrix.shape[1]}, codebook expects {codebook.dimension}")
    labels, _ = nearest_center(matrix, codebook.centers)
    return TrajHistogram(counts=np.bincount(labels, minlength=codebook.K).astype(np.int64))


# ============================================================================
# TGC1 codec
# ============================================================================

def to_bytes(codebook: Codebook) -> bytes:
    """TGC1 magic, then little-endian f64: K, dim, seed, centers row-major"""
    header = np.array([codebook.K, codebook.dimension, codebook.seed], dtype='<f8')
    return CODEBOOK_MAGIC + header.tobytes() + codebook.centers.astype('<f8').tobytes()


def from_bytes(blob: bytes) -> Codebook:
    if blob[:4] != CODEBOOK_MAGIC:
        raise FormatError("missing TGC1 magic")
    if (len(blob) - 4) % 8:
        raise FormatError("TGC1 payload is not a whole number of doubles")
    payload = np.frombuffer(blob, dtype='<f8', offset=4)
    if len(payload) < 3:
        raise FormatError("truncated TGC1 header")
    K, dimension, seed = (int(x) for x in payload[:3])
    if len(payload) != 3 + K * dimension:
        raise FormatError(f"TGC1 payload size does not match K={K}, dim={dimension}")
    return Codebook(centers=payload[3:].reshape(K, dimension), seed=seed)


def save_codebook(codebook: Codebook, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(to_bytes(codebook))
    logger.info(f"💾 Saved codebook (K={codebook.K}, dim={codebook.dimension}) to {path}")
    return path


def load_codebook(path) -> Codebook:
    return from_bytes(Path(path).read_bytes())

"""
EigenGait features
Learns the eigenspace of gait-curve differences from training step windows and projects
any window into it
"""
import hashlib
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Dict, Sequence

import numpy as np

from config import ENERGY_FRACTION, STEP_SAMPLES
from models import DimensionError, FormatError, StepWindow, ValidationError
from numerics import SymmetricMatrix, clamp_eigenvalues, sym_eigen

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

MODEL_MAGIC = b"EGM1"


@dataclass(frozen=True, eq=False)
class EigenGaitModel:
    """Overall mean curve plus the retained eigenvectors (rows) and eigenvalues"""
    overall_mean: np.ndarray
    eigenvectors: np.ndarray
    eigenvalues: np.ndarray
    energy_fraction: float = ENERGY_FRACTION
    steps: int = 0

    def __post_init__(self):
        mean = np.array(self.overall_mean, dtype=np.float64)
        vectors = np.atleast_2d(np.array(self.eigenvectors, dtype=np.float64))
        values = np.array(self.eigenvalues, dtype=np.float64)
        if vectors.shape != (len(values), len(mean)):
            raise DimensionError(f"eigenvectors {vectors.shape} do not match r={len(values)}, D={len(mean)}")
        if len(values) < 1:
            raise ValidationError("an eigen model retains at least one eigenvector")
        for array in (mean, vectors, values):
            array.setflags(write=False)
        object.__setattr__(self, 'overall_mean', mean)
        object.__setattr__(self, 'eigenvectors', vectors)
        object.__setattr__(self, 'eigenvalues', values)
        if not self.steps:
            object.__setattr__(self, 'steps', len(mean) // STEP_SAMPLES)

    @property
    def dimension(self) -> int:
        return len(self.overall_mean)

    @property
    def r(self) -> int:
        return len(self.eigenvalues)

    @cached_property
    def model_id(self) -> str:
        return hashlib.sha256(to_bytes(self)).hexdigest()


@dataclass(frozen=True, eq=False)
class EigenGaitFeature:
    coeffs: np.ndarray
    model_id: str = ""


def _as_matrix(windows: Sequence) -> np.ndarray:
    rows = [w.samples if isinstance(w, StepWindow) else np.asarray(w, dtype=np.float64) for w in windows]
    if not rows:
        raise ValidationError("no windows given")
    lengths = {len(r) for r in rows}
    if len(lengths) != 1:
        raise DimensionError(f"windows have mixed lengths {sorted(lengths)}")
    return np.vstack(rows)


def subject_mean(windows: Sequence) -> np.ndarray:
    """Elementwise mean gait curve of one subject's windows"""
    return _as_matrix(windows).mean(axis=0)


def retained_count(eigenvalues: np.ndarray, energy_fraction: float) -> int:
    """Smallest r whose leading eigenvalues hold `energy_fraction` of the total"""
    total = float(eigenvalues.sum())
    if total <= 0:
        return 1
    cumulative = np.cumsum(eigenvalues)
    # relative slack keeps a fraction of exactly 1.0 reachable despite round-off
    return int(np.searchsorted(cumulative, energy_fraction * total * (1 - 1e-12))) + 1


def fit(per_subject_windows: Dict[str, Sequence], energy_fraction: float = ENERGY_FRACTION) -> EigenGaitModel:
    """
    Fit the EigenGait eigenspace

    The overall mean is the mean of the subject means; the covariance is accumulated over the
    differences of every individual training window from that overall mean.
    """
    if not 0 < energy_fraction <= 1:
        raise ValidationError(f"energy fraction must be in (0, 1], got {energy_fraction}")
    if len(per_subject_windows) < 2:
        raise ValidationError(f"need at least 2 subjects, got {len(per_subject_windows)}")

    matrices = {subject: _as_matrix(windows) for subject, windows in per_subject_windows.items()}
    dims = {m.shape[1] for m in matrices.values()}
    if len(dims) != 1:
        raise DimensionError(f"subjects have windows of different lengths {sorted(dims)}")

    subject_means = np.vstack([m.mean(axis=0) for m in matrices.values()])
    overall_mean = subject_means.mean(axis=0)

    differences = np.vstack(list(matrices.values())) - overall_mean
    covariance = differences.T @ differences / len(differences)

    eigenvalues, eigenvectors = sym_eigen(SymmetricMatrix.from_dense(covariance))
    eigenvalues = clamp_eigenvalues(eigenvalues)
    r = min(retained_count(eigenvalues, energy_fraction), len(eigenvalues))

    model = EigenGaitModel(
        overall_mean=overall_mean,
        eigenvectors=eigenvectors[:, :r].T,
        eigenvalues=eigenvalues[:r],
        energy_fraction=energy_fraction,
    )
    logger.info(f"✅ EigenGait fit: {len(matrices)} subjects, {len(differences)} windows, "
                f"D={model.dimension}, r={r}")
    return model


def covariance_from_windows(per_subject_windows: Dict[str, Sequence]) -> np.ndarray:
    """The covariance matrix `fit` decomposes"""
    matrices = [_as_matrix(w) for w in per_subject_windows.values()]
    overall_mean = np.vstack([m.mean(axis=0) for m in matrices]).mean(axis=0)
    differences = np.vstack(matrices) - overall_mean
    return differences.T @ differences / len(differences)


def project(model: EigenGaitModel, window) -> EigenGaitFeature:
    """coeffs[i] = u_i . (window - overall_mean)"""
    samples = window.samples if isinstance(window, StepWindow) else np.asarray(window, dtype=np.float64)
    if samples.shape != (model.dimension,):
        raise DimensionError(f"model expects windows of length {model.dimension}, got {samples.shape}")
    return EigenGaitFeature(coeffs=model.eigenvectors @ (samples - model.overall_mean), model_id=model.model_id)


def project_many(model: EigenGaitModel, windows: Sequence) -> np.ndarray:
    """Row-wise projection of several windows"""
    matrix = _as_matrix(windows)
    if matrix.shape[1] != model.dimension:
        raise DimensionError(f"model expects windows of length {model.dimension}, got {matrix.shape[1]}")
    return (matrix - model.overall_mean) @ model.eigenvectors.T


def reconstruct(model: EigenGaitModel, feature: EigenGaitFeature) -> np.ndarray:
    return model.overall_mean + feature.coeffs @ model.eigenvectors


# ============================================================================
# EGM1 codec
# ============================================================================

def to_bytes(model: EigenGaitModel) -> bytes:
    """EGM1 magic, then little-endian f64: D, r, mean, eigenvalues, eigenvectors row-major"""
    payload = np.concatenate([
        [model.dimension, model.r],
        model.overall_mean,
        model.eigenvalues,
        model.eigenvectors.ravel(),
    ]).astype('<f8')
    return MODEL_MAGIC + payload.tobytes()


def from_bytes(blob: bytes, energy_fraction: float = ENERGY_FRACTION) -> EigenGaitModel:
    if blob[:4] != MODEL_MAGIC:
        raise FormatError("missing EGM1 magic")
    if (len(blob) - 4) % 8:
        raise FormatError("EGM1 payload is not a whole number of doubles")
    payload = np.frombuffer(blob, dtype='<f8', offset=4)
    dimension, r = int(payload[0]), int(payload[1])
    if len(payload) != 2 + dimension + r + r * dimension:
        raise FormatError(f"EGM1 payload size does not match D={dimension}, r={r}")
    mean = payload[2:2 + dimension]
    values = payload[2 + dimension:2 + dimension + r]
    vectors = payload[2 + dimension + r:].reshape(r, dimension)
    return EigenGaitModel(mean, vectors, values, energy_fraction=energy_fraction)


def save_model(model: EigenGaitModel, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(to_bytes(model))
    logger.info(f"💾 Saved EigenGait model (D={model.dimension}, r={model.r}) to {path}")
    return path


def load_model(path, energy_fraction: float = ENERGY_FRACTION) -> EigenGaitModel:
    return from_bytes(Path(path).read_bytes(), energy_fraction=energy_fraction)

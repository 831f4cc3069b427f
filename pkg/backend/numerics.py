"""
Deterministic numerical kernels shared by the feature and recognition stages:
symmetric eigendecomposition, Lloyd k-means with k-means++ seeding, and a
dual coordinate descent solver for the L1-hinge linear SVM
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist

from config import EIGEN_NEGATIVE_TOLERANCE, KMEANS_MAX_ITER, SVM_C, SVM_MAX_EPOCHS, SVM_TOL
from models import DimensionError, ValidationError

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

# rows per distance block; keeps a block of the distance matrix around 32MB at K=1024
ASSIGN_CHUNK = 4096


# ============================================================================
# Symmetric eigendecomposition
# ============================================================================

@dataclass(frozen=True, eq=False)
class SymmetricMatrix:
    """Dense symmetric matrix stored as its packed upper triangle (row-major)"""
    dimension: int
    packed: np.ndarray

    def __post_init__(self):
        packed = np.array(self.packed, dtype=np.float64)
        expected = self.dimension * (self.dimension + 1) // 2
        if packed.shape != (expected,):
            raise DimensionError(f"packed triangle of a {self.dimension}x{self.dimension} matrix "
                                 f"holds {expected} values, got {packed.shape}")
        if not np.all(np.isfinite(packed)):
            raise ValidationError("symmetric matrix entries must be finite")
        packed.setflags(write=False)
        object.__setattr__(self, 'packed', packed)

    @classmethod
    def from_dense(cls, matrix: np.ndarray, atol: float = 1e-10) -> "SymmetricMatrix":
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionError(f"expected a square matrix, got {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise ValidationError("symmetric matrix entries must be finite")
        scale = max(1.0, float(np.max(np.abs(matrix)))) if matrix.size else 1.0
        if not np.allclose(matrix, matrix.T, rtol=0.0, atol=atol * scale):
            raise ValidationError("matrix is not symmetric")
        rows, cols = np.triu_indices(matrix.shape[0])
        return cls(matrix.shape[0], matrix[rows, cols])

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.dimension, self.dimension))
        rows, cols = np.triu_indices(self.dimension)
        dense[rows, cols] = self.packed
        dense[cols, rows] = self.packed
        return dense


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude component is positive"""
    vectors = np.array(vectors, dtype=np.float64)
    if vectors.size == 0:
        return vectors
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def sym_eigen(m: Union[SymmetricMatrix, np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigendecomposition of a symmetric matrix

    Uses LAPACK's tridiagonal reduction + implicit QL/QR path. Eigenvalues come back in
    descending order; eigenvectors are the columns of the second result, sign-normalized.
    """
    dense = m.to_dense() if isinstance(m, SymmetricMatrix) else SymmetricMatrix.from_dense(m).to_dense()
    if dense.shape[0] == 0:
        return np.empty(0), np.empty((0, 0))

    eigenvalues, eigenvectors = linalg.eigh(dense, driver='ev', check_finite=True)
    order = np.argsort(-eigenvalues, kind='stable')
    return eigenvalues[order], fix_signs(eigenvectors[:, order])


def clamp_eigenvalues(eigenvalues: np.ndarray, tolerance: float = EIGEN_NEGATIVE_TOLERANCE) -> np.ndarray:
    """Zero round-off negatives; anything more negative than the tolerance is a real error"""
    eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
    scale = max(1.0, float(np.max(np.abs(eigenvalues)))) if eigenvalues.size else 1.0
    if np.any(eigenvalues < -tolerance * scale):
        raise ValidationError(f"matrix is not positive semi-definite (min eigenvalue {eigenvalues.min():.3e})")
    return np.maximum(eigenvalues, 0.0)


# ============================================================================
# k-means
# ============================================================================

def squared_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Exact squared Euclidean distances (point-wise differences, no norm expansion)"""
    return cdist(points, centers, metric='sqeuclidean')


def nearest_center(points: np.ndarray, centers: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Index of and squared distance to the nearest center for every point

    Ties resolve to the lowest center index.
    """
    points = np.asarray(points, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.float64)
    if points.ndim != 2 or centers.ndim != 2 or points.shape[1] != centers.shape[1]:
        raise DimensionError(f"points {points.shape} and centers {centers.shape} disagree in dimension")

    labels = np.empty(len(points), dtype=np.int64)
    distances = np.empty(len(points))
    for start in range(0, len(points), ASSIGN_CHUNK):
        block = squared_distances(points[start:start + ASSIGN_CHUNK], centers)
        nearest = np.argmin(block, axis=1)
        labels[start:start + ASSIGN_CHUNK] = nearest
        distances[start:start + ASSIGN_CHUNK] = block[np.arange(len(block)), nearest]
    return labels, distances


def kmeans_plus_plus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: each new center drawn proportionally to squared distance"""
    n = len(points)
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    closest = squared_distances(points, centers[:1])[:, 0]
    for j in range(1, k):
        total = closest.sum()
        if total <= 0:
            raise ValidationError(f"fewer than {k} distinct points to seed {k} clusters")
        choice = rng.choice(n, p=closest / total)
        centers[j] = points[choice]
        closest = np.minimum(closest, squared_distances(points, centers[j:j + 1])[:, 0])
    return centers


@dataclass(frozen=True, eq=False)
class KMeansResult:
    centers: np.ndarray
    labels: np.ndarray
    cost: float
    iterations: int
    cost_trace: np.ndarray = field(default_factory=lambda: np.empty(0))


def kmeans_lloyd(
    points: np.ndarray,
    k: int,
    rng: np.random.Generator,
    max_iter: int = KMEANS_MAX_ITER,
    initial_centers: Optional[np.ndarray] = None
) -> KMeansResult:
    """
    Lloyd iterations until assignments stop changing (or max_iter)

    Empty clusters are re-seeded with the point farthest from its current center.
    cost_trace[t] is the within-cluster sum of squares after assignment step t.
    """
    points = np.asarray(points, dtype=np.float64)
    if len(points) < k:
        raise ValidationError(f"need at least {k} points for {k} clusters, got {len(points)}")

    centers = kmeans_plus_plus(points, k, rng) if initial_centers is None \
        else np.array(initial_centers, dtype=np.float64)
    if centers.shape != (k, points.shape[1]):
        raise DimensionError(f"initial centers must be {k} x {points.shape[1]}")

    labels = None
    trace = []
    iteration = 0
    for iteration in range(1, max_iter + 1):
        new_labels, distances = nearest_center(points, centers)
        cost = float(distances.sum())
        if trace and cost > trace[-1] * (1 + 1e-9) + 1e-12:
            raise ValidationError(f"k-means cost increased at iteration {iteration}: {trace[-1]} -> {cost}")
        trace.append(cost)
        logger.debug(f"k-means iteration {iteration}: cost {cost:.6g}")
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels

        counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(centers)
        np.add.at(sums, labels, points)
        occupied = counts > 0
        centers[occupied] = sums[occupied] / counts[occupied, None]

        for empty in np.flatnonzero(~occupied):
            residual = np.sum((points - centers[labels]) ** 2, axis=1)
            farthest = int(np.argmax(residual))
            centers[empty] = points[farthest]
            labels[farthest] = empty

    labels, distances = nearest_center(points, centers)
    return KMeansResult(
        centers=centers,
        labels=labels,
        cost=float(distances.sum()),
        iterations=iteration,
        cost_trace=np.asarray(trace),
    )


# ============================================================================
# Linear SVM
# ============================================================================

@dataclass(frozen=True, eq=False)
class LinearModel:
    """Linear decision function w.x + b"""
    weights: np.ndarray
    bias: float
    C: float = SVM_C
    dual: Optional[np.ndarray] = None
    epochs: int = 0
    dual_trace: np.ndarray = field(default_factory=lambda: np.empty(0))
    primal_trace: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        weights = np.array(self.weights, dtype=np.float64)
        if not (np.all(np.isfinite(weights)) and np.isfinite(self.bias)):
            raise ValidationError("linear model parameters must be finite")
        if self.C <= 0:
            raise ValidationError(f"C must be positive, got {self.C}")
        weights.setflags(write=False)
        object.__setattr__(self, 'weights', weights)
        object.__setattr__(self, 'bias', float(self.bias))

    @property
    def dimension(self) -> int:
        return len(self.weights)


def _primal_objective(w: np.ndarray, Xy: np.ndarray, C: float) -> float:
    margins = Xy @ w
    return 0.5 * float(w @ w) + C * float(np.maximum(0.0, 1.0 - margins).sum())


def train_linear_svm(
    X: np.ndarray,
    y: np.ndarray,
    C: float = SVM_C,
    seed: int = 0,
    tol: float = SVM_TOL,
    max_epochs: int = SVM_MAX_EPOCHS
) -> LinearModel:
    """
    L1-hinge linear SVM by dual coordinate descent

    Minimizes 1/2 ||w||^2 + C sum max(0, 1 - y_i (w.x_i + b)); the bias is learned as the
    weight of an appended constant feature 1. Coordinates are visited in a seeded
    permutation each epoch; training stops when the projected-gradient spread falls
    below `tol` or after `max_epochs`.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y):
        raise DimensionError(f"features {X.shape} and labels {y.shape} disagree")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValidationError("labels must be +1 or -1")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise ValidationError("training needs at least one sample of each class")
    if C <= 0:
        raise ValidationError(f"C must be positive, got {C}")

    n = len(X)
    augmented = np.hstack([X, np.ones((n, 1))])
    Xy = augmented * y[:, None]
    diag = np.einsum('ij,ij->i', augmented, augmented)

    rng = np.random.default_rng(seed)
    alpha = np.zeros(n)
    w = np.zeros(augmented.shape[1])
    dual_trace = []
    primal_trace = []

    epoch = 0
    for epoch in range(1, max_epochs + 1):
        # spread is measured against 0 so a pass of uniformly violated coordinates never stops early
        pg_max = 0.0
        pg_min = 0.0
        for i in rng.permutation(n):
            gradient = float(Xy[i] @ w) - 1.0
            a = alpha[i]
            if a <= 0.0:
                projected = min(gradient, 0.0)
            elif a >= C:
                projected = max(gradient, 0.0)
            else:
                projected = gradient
            pg_max = max(pg_max, projected)
            pg_min = min(pg_min, projected)
            if projected != 0.0:
                updated = min(max(a - gradient / diag[i], 0.0), C)
                w += (updated - a) * Xy[i]
                alpha[i] = updated

        dual_trace.append(float(alpha.sum() - 0.5 * w @ w))
        primal_trace.append(_primal_objective(w, Xy, C))
        if pg_max - pg_min < tol:
            break
    else:
        logger.debug(f"SVM stopped at max_epochs={max_epochs} (gap {pg_max - pg_min:.2e})")

    return LinearModel(
        weights=w[:-1].copy(),
        bias=float(w[-1]),
        C=C,
        dual=alpha,
        epochs=epoch,
        dual_trace=np.asarray(dual_trace),
        primal_trace=np.asarray(primal_trace),
    )


def decision_value(model: LinearModel, x: np.ndarray) -> float:
    """w.x + b"""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.dimension,):
        raise DimensionError(f"model expects {model.dimension} features, got {x.shape}")
    return float(model.weights @ x) + model.bias


def decision_values(model: LinearModel, X: np.ndarray) -> np.ndarray:
    """Row-wise decision values of an (n, d) matrix"""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.dimension:
        raise DimensionError(f"model expects {model.dimension} features, got {X.shape}")
    return X @ model.weights + model.bias

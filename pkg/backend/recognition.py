"""
Recognition
Feature fusion, one-vs-all subject models, classification, and the per-mode recognition
pipeline fitted on training samples only
"""
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        def __str__(self):
            return str.__str__(self)

        def __format__(self, format_spec):
            return str.__format__(str(self), format_spec)

        @staticmethod
        def _generate_next_value_(name, start, count, last_values):
            return name.lower()
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

import eigengait
import trajgait
from accel_pipeline import PartitionPoint, extract_windows, gait_curve, partition_steps
from config import (
    CODEBOOK_SIZE, DEFAULT_SEED, DEFAULT_STEPS, DEPTH_THRESHOLD, DESCRIPTOR_POOL, DESCRIPTORS_PER_SAMPLE,
    EIGEN_MODEL_FILE, CODEBOOK_FILE, ENERGY_FRACTION, KMEANS_RESTARTS, MAX_STEPS, MIN_COMPONENT_PX,
    MIN_STEPS, PIPELINE_FILE, SUBJECT_MODEL_FILE, SVM_C, THREADS, TRACK_STRIDE_PX, TRAJECTORY_LENGTH
)
from eigengait import EigenGaitFeature, EigenGaitModel
from models import (
    Covariate, DimensionError, FormatError, GaitCurve, LabeledSample, Pace, StepWindow, ValidationError
)
from numerics import LinearModel, decision_values, train_linear_svm
from rgbd_pipeline import PrecomputedFlowEstimator, PyramidalFlowEstimator, extract_trajectories
from trajgait import Codebook, TrajHistogram

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

SUBJECT_MODEL_MAGIC = b"SGM1"
NO_HASH = bytes(32)


class Mode(StrEnum):
    EIGENGAIT = "eigengait"
    TRAJGAIT = "trajgait"
    TRAJGAIT_DEPTH = "trajgait-depth"
    TRAJGAIT_RGB = "trajgait-rgb"
    FUSED = "fused"

    @property
    def uses_accel(self) -> bool:
        return self in (Mode.EIGENGAIT, Mode.FUSED)

    @property
    def uses_rgbd(self) -> bool:
        return self is not Mode.EIGENGAIT

    @property
    def channel(self) -> str:
        return {Mode.TRAJGAIT_DEPTH: "depth", Mode.TRAJGAIT_RGB: "rgb"}.get(self, "rgbd")


class PipelineConfig(BaseModel):
    """Run-time pipeline settings; defaults are the config constants"""
    mode: Mode = Mode.FUSED
    steps: int = Field(DEFAULT_STEPS, ge=MIN_STEPS, le=MAX_STEPS)
    K: int = Field(CODEBOOK_SIZE, ge=2)
    L: int = Field(TRAJECTORY_LENGTH, ge=1)
    C: float = Field(SVM_C, gt=0)
    energy_fraction: float = Field(ENERGY_FRACTION, gt=0, le=1)
    restarts: int = Field(KMEANS_RESTARTS, ge=1)
    descriptors_per_sample: int = Field(DESCRIPTORS_PER_SAMPLE, ge=1)
    descriptor_pool: int = Field(DESCRIPTOR_POOL, ge=1)
    depth_threshold: float = Field(DEPTH_THRESHOLD, ge=0)
    min_component_px: int = Field(MIN_COMPONENT_PX, ge=1)
    track_stride: int = Field(TRACK_STRIDE_PX, ge=1)
    seed: int = Field(DEFAULT_SEED, ge=0)


# ============================================================================
# fuse / train / classify
# ============================================================================

@dataclass(frozen=True, eq=False)
class FusedFeature:
    values: np.ndarray
    block_dims: Tuple[int, int]


@dataclass(frozen=True, eq=False)
class SubjectModel:
    """One linear model per subject, all over the same feature space"""
    subject_ids: List[str]
    models: List[LinearModel]
    block_dims: Tuple[int, int] = (0, 0)
    eigen_model_id: str = ""
    codebook_id: str = ""
    mode: Mode = Mode.FUSED
    C: float = SVM_C

    def __post_init__(self):
        if len(self.subject_ids) < 2:
            raise ValidationError(f"a subject model needs n >= 2 subjects, got {len(self.subject_ids)}")
        if len(self.models) != len(self.subject_ids):
            raise DimensionError(f"{len(self.subject_ids)} subjects but {len(self.models)} models")
        if len({m.dimension for m in self.models}) != 1:
            raise DimensionError("member models disagree in feature dimension")

    @property
    def dimension(self) -> int:
        return self.models[0].dimension

    @property
    def weights(self) -> np.ndarray:
        return np.vstack([m.weights for m in self.models])

    @property
    def biases(self) -> np.ndarray:
        return np.array([m.bias for m in self.models])


@dataclass(frozen=True, eq=False)
class ScoreVector:
    scores: np.ndarray
    subject_ids: List[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.scores)


def _block(x) -> Optional[np.ndarray]:
    if x is None:
        return None
    if isinstance(x, EigenGaitFeature):
        return np.asarray(x.coeffs, dtype=np.float64)
    if isinstance(x, TrajHistogram):
        return np.asarray(x.counts, dtype=np.float64)
    return np.asarray(x, dtype=np.float64)


def l1_normalize(x: np.ndarray) -> np.ndarray:
    """x / sum|x_i|, signs preserved; a zero vector passes through"""
    total = float(np.abs(x).sum())
    return x / total if total > 0 else np.zeros_like(x)


def fuse(eg=None, tg=None) -> FusedFeature:
    """
    Per-block L1 normalization, concatenation, then whole-vector L1 normalization

    Either block may be omitted for single-modality modes. A zero block passes through as
    zeros; an all-zero result is rejected.
    """
    eg_block = _block(eg)
    tg_block = _block(tg)
    if eg_block is None and tg_block is None:
        raise ValidationError("fuse needs at least one feature block")
    blocks = [l1_normalize(b) if b is not None else np.empty(0) for b in (eg_block, tg_block)]
    combined = np.concatenate(blocks)
    if not np.any(combined):
        raise ValidationError("both feature blocks are all-zero: uninformative sample")
    return FusedFeature(values=l1_normalize(combined), block_dims=(len(blocks[0]), len(blocks[1])))


def _feature_matrix(features) -> np.ndarray:
    if isinstance(features, np.ndarray):
        return np.atleast_2d(features.astype(np.float64))
    return np.vstack([f.values if isinstance(f, FusedFeature) else np.asarray(f, dtype=np.float64)
                      for f in features])


def train(
    features,
    labels: Sequence[str],
    C: float = SVM_C,
    seed: int = 0,
    subject_ids: Optional[Sequence[str]] = None,
    threads: int = THREADS,
    **metadata
) -> SubjectModel:
    """
    One-vs-all training: model i separates subject i (+1) from everyone else (-1)

    Subjects are indexed in `subject_ids` order (sorted labels by default).
    """
    X = _feature_matrix(features)
    labels = np.asarray(list(labels))
    if len(X) != len(labels):
        raise DimensionError(f"{len(X)} features but {len(labels)} labels")
    subject_ids = list(subject_ids) if subject_ids is not None else sorted(set(labels.tolist()))
    if len(subject_ids) < 2:
        raise ValidationError(f"training needs n >= 2 subjects, got {len(subject_ids)}")
    for subject in subject_ids:
        if not np.any(labels == subject):
            raise ValidationError(f"subject {subject} has no training samples")

    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(len(subject_ids))]

    def fit_one(job):
        subject, subject_seed = job
        y = np.where(labels == subject, 1.0, -1.0)
        return train_linear_svm(X, y, C=C, seed=subject_seed)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        models = list(pool.map(fit_one, zip(subject_ids, seeds)))

    epochs = [m.epochs for m in models]
    logger.info(f"✅ Trained {len(models)} one-vs-all models on {len(X)} samples "
                f"(dim={X.shape[1]}, epochs {min(epochs)}-{max(epochs)})")
    return SubjectModel(subject_ids=subject_ids, models=models, C=C, **metadata)


def score(model: SubjectModel, feature) -> ScoreVector:
    values = feature.values if isinstance(feature, FusedFeature) else np.asarray(feature, dtype=np.float64)
    if values.shape != (model.dimension,):
        raise DimensionError(f"model expects {model.dimension} features, got {values.shape}")
    return ScoreVector(scores=model.weights @ values + model.biases, subject_ids=model.subject_ids)


def classify(model: SubjectModel, feature) -> Tuple[str, ScoreVector]:
    """Argmax of the score vector; the lowest subject index wins ties"""
    scores = score(model, feature)
    return model.subject_ids[int(np.argmax(scores.scores))], scores


def score_matrix(model: SubjectModel, features) -> np.ndarray:
    """(n_samples, n_subjects) decision values"""
    X = _feature_matrix(features)
    return np.column_stack([decision_values(m, X) for m in model.models])


# ============================================================================
# SGM1 codec
# ============================================================================

def _hash_bytes(hex_id: str) -> bytes:
    return bytes.fromhex(hex_id) if hex_id else NO_HASH


def subject_model_to_bytes(model: SubjectModel) -> bytes:
    """
    SGM1 magic, little-endian f64 header [n, dim, r, K], n rows of weights+bias,
    32-byte eigen-model hash, 32-byte codebook hash, u32 length + JSON trailer
    """
    r, K = model.block_dims
    header = np.array([len(model.subject_ids), model.dimension, r, K], dtype='<f8')
    params = np.hstack([model.weights, model.biases[:, None]]).astype('<f8')
    trailer = json.dumps({
        "subject_ids": list(model.subject_ids),
        "mode": str(model.mode),
        "C": model.C,
    }).encode()
    return b"".join([
        SUBJECT_MODEL_MAGIC,
        header.tobytes(),
        params.tobytes(),
        _hash_bytes(model.eigen_model_id),
        _hash_bytes(model.codebook_id),
        np.array([len(trailer)], dtype='<u4').tobytes(),
        trailer,
    ])


def subject_model_from_bytes(blob: bytes) -> SubjectModel:
    if blob[:4] != SUBJECT_MODEL_MAGIC:
        raise FormatError("missing SGM1 magic")
    try:
        n, dim, r, K = (int(x) for x in np.frombuffer(blob, dtype='<f8', count=4, offset=4))
        offset = 4 + 32
        params = np.frombuffer(blob, dtype='<f8', count=n * (dim + 1), offset=offset).reshape(n, dim + 1)
        offset += params.nbytes
        eigen_hash, codebook_hash = blob[offset:offset + 32], blob[offset + 32:offset + 64]
        offset += 64
        length = int(np.frombuffer(blob, dtype='<u4', count=1, offset=offset)[0])
        trailer = json.loads(blob[offset + 4:offset + 4 + length].decode())
    except (ValueError, json.JSONDecodeError) as e:
        raise FormatError(f"corrupt SGM1 blob: {e}") from e
    if len(trailer.get("subject_ids", [])) != n:
        raise FormatError(f"SGM1 trailer names {len(trailer.get('subject_ids', []))} subjects, header says {n}")

    C = float(trailer.get("C", SVM_C))
    models = [LinearModel(weights=row[:-1], bias=row[-1], C=C) for row in params]
    return SubjectModel(
        subject_ids=trailer["subject_ids"],
        models=models,
        block_dims=(r, K),
        eigen_model_id=eigen_hash.hex() if eigen_hash != NO_HASH else "",
        codebook_id=codebook_hash.hex() if codebook_hash != NO_HASH else "",
        mode=Mode(trailer.get("mode", Mode.FUSED)),
        C=C,
    )


def save_subject_model(model: SubjectModel, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(subject_model_to_bytes(model))
    logger.info(f"💾 Saved subject model ({len(model.subject_ids)} subjects, dim={model.dimension}) to {path}")
    return path


def load_subject_model(
    path,
    eigen_model: Optional[EigenGaitModel] = None,
    codebook: Optional[Codebook] = None
) -> SubjectModel:
    """Load an SGM1 file; the referenced eigen model and codebook must match by hash"""
    model = subject_model_from_bytes(Path(path).read_bytes())
    if eigen_model is not None and model.eigen_model_id != eigen_model.model_id:
        raise ValidationError(f"{path}: subject model was trained against a different eigen model")
    if codebook is not None and model.codebook_id != codebook.codebook_id:
        raise ValidationError(f"{path}: subject model was trained against a different codebook")
    return model


# ============================================================================
# Per-sample features and the recognition pipeline
# ============================================================================

@dataclass
class SampleFeatures:
    """Model-independent extraction results of one sample"""
    sample_id: str
    subject_id: str
    pace: Pace = Pace.UNKNOWN
    covariate: Covariate = Covariate.NONE
    curve: Optional[GaitCurve] = None
    points: List[PartitionPoint] = field(default_factory=list)
    descriptors: Optional[np.ndarray] = None
    _windows: Dict[int, List[StepWindow]] = field(default_factory=dict, repr=False)

    def windows(self, steps: int) -> List[StepWindow]:
        if self.curve is None:
            return []
        if steps not in self._windows:
            self._windows[steps] = extract_windows(self.curve, self.points, steps)
        return self._windows[steps]


def extract_sample_features(sample: LabeledSample, config: PipelineConfig) -> SampleFeatures:
    """Gait curve + partition points and/or trajectory descriptors of one sample"""
    features = SampleFeatures(
        sample_id=sample.sample_id,
        subject_id=sample.subject_id,
        pace=sample.pace,
        covariate=sample.covariate,
    )
    if config.mode.uses_accel and sample.accel:
        features.curve = gait_curve(sample.accel, subject_id=sample.subject_id, pace=sample.pace,
                                    covariate=sample.covariate, curve_id=sample.sample_id)
        features.points = partition_steps(features.curve)
    if config.mode.uses_rgbd and sample.frames:
        estimator = PrecomputedFlowEstimator(sample.flows) if sample.flows else PyramidalFlowEstimator()
        trajectories = extract_trajectories(
            sample.frames,
            estimator=estimator,
            L=config.L,
            threshold=config.depth_threshold,
            min_component_px=config.min_component_px,
            stride=config.track_stride,
        )
        features.descriptors = trajgait.describe_many(trajectories, config.L)
    return features


def extract_features(
    samples: Sequence[LabeledSample],
    config: PipelineConfig,
    threads: int = THREADS
) -> List[SampleFeatures]:
    """Per-sample extraction, in input order"""
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        features = list(pool.map(lambda s: extract_sample_features(s, config), samples))
    if config.mode.uses_rgbd:
        counts = [len(f.descriptors) for f in features if f.descriptors is not None]
        if counts:
            logger.info(f"📊 Trajectories per sample: min {min(counts)}, median {int(np.median(counts))}, "
                        f"max {max(counts)}")
    logger.info(f"✅ Extracted features for {len(features)} samples (mode={config.mode})")
    return features


class GaitRecognizer:
    """Eigen model, codebook and subject models of one mode, fitted on training samples only"""

    def __init__(self, config: Optional[PipelineConfig] = None, threads: int = THREADS):
        self.config = config or PipelineConfig()
        self.threads = threads
        self.eigen_model: Optional[EigenGaitModel] = None
        self.codebook: Optional[Codebook] = None
        self.subject_model: Optional[SubjectModel] = None
        self.training_ids: List[str] = []

    @property
    def mode(self) -> Mode:
        return self.config.mode

    def _descriptors(self, features: SampleFeatures) -> np.ndarray:
        if features.descriptors is None:
            return np.empty((0, 3 * self.config.L))
        return trajgait.restrict(features.descriptors, self.mode.channel)

    def feature_vector(self, features: SampleFeatures) -> Optional[np.ndarray]:
        """Fused feature of one sample, or None if it carries no usable data for this mode"""
        eg = tg = None
        if self.mode.uses_accel:
            windows = features.windows(self.config.steps)
            eg = eigengait.project(self.eigen_model, windows[0]) if windows else np.zeros(self.eigen_model.r)
        if self.mode.uses_rgbd:
            tg = trajgait.encode(self._descriptors(features), self.codebook)
        try:
            return fuse(eg, tg).values
        except ValidationError:
            logger.warning(f"⚠️ {features.sample_id}: no usable {self.mode} feature")
            return None

    def fit(self, train_features: Sequence[SampleFeatures], labels: Optional[Sequence[str]] = None) -> "GaitRecognizer":
        """
        Fit every stage on the given training samples

        `labels` overrides the subject ids used for training (label-shuffled controls).
        """
        labels = list(labels) if labels is not None else [f.subject_id for f in train_features]
        if len(labels) != len(train_features):
            raise DimensionError(f"{len(train_features)} samples but {len(labels)} labels")
        self.training_ids = [f.sample_id for f in train_features]
        seeds = np.random.SeedSequence(self.config.seed).spawn(2)

        if self.mode.uses_accel:
            per_subject: Dict[str, List[StepWindow]] = {}
            for f, label in zip(train_features, labels):
                windows = f.windows(self.config.steps)
                if windows:
                    per_subject.setdefault(label, []).extend(windows)
            self.eigen_model = eigengait.fit(per_subject, self.config.energy_fraction)

        if self.mode.uses_rgbd:
            training = {f.sample_id: self._descriptors(f) for f in train_features}
            self.codebook = trajgait.fit_codebook(
                training,
                K=self.config.K,
                seed=int(seeds[0].generate_state(1)[0]),
                restarts=self.config.restarts,
                per_sample=self.config.descriptors_per_sample,
                pool_cap=self.config.descriptor_pool,
                threads=self.threads,
            )

        rows, row_labels = [], []
        for f, label in zip(train_features, labels):
            vector = self.feature_vector(f)
            if vector is not None:
                rows.append(vector)
                row_labels.append(label)
        if not rows:
            raise ValidationError("no training sample produced a feature")

        self.subject_model = train(
            np.vstack(rows),
            row_labels,
            C=self.config.C,
            seed=int(seeds[1].generate_state(1)[0]),
            subject_ids=sorted(set(labels)),
            threads=self.threads,
            block_dims=(self.eigen_model.r if self.eigen_model else 0, self.codebook.K if self.codebook else 0),
            eigen_model_id=self.eigen_model.model_id if self.eigen_model else "",
            codebook_id=self.codebook.codebook_id if self.codebook else "",
            mode=self.mode,
        )
        return self

    def _require_fitted(self):
        if self.subject_model is None:
            raise ValidationError("recognizer is not fitted")

    def predict(self, features: SampleFeatures) -> Tuple[Optional[str], Optional[ScoreVector]]:
        """(subject id, score vector), or (None, None) for a sample with no usable feature"""
        self._require_fitted()
        vector = self.feature_vector(features)
        if vector is None:
            return None, None
        return classify(self.subject_model, vector)

    def predict_many(self, features: Sequence[SampleFeatures]) -> List[Tuple[Optional[str], Optional[ScoreVector]]]:
        return [self.predict(f) for f in features]

    # ------------------------------------------------------------------
    # Persistence
    # ------------------------------------------------------------------

    def save(self, directory) -> Dict[str, str]:
        self._require_fitted()
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = {}
        if self.eigen_model is not None:
            written["eigen_model"] = str(eigengait.save_model(self.eigen_model, directory / EIGEN_MODEL_FILE))
        if self.codebook is not None:
            written["codebook"] = str(trajgait.save_codebook(self.codebook, directory / CODEBOOK_FILE))
        written["subject_model"] = str(save_subject_model(self.subject_model, directory / SUBJECT_MODEL_FILE))
        pipeline = {"config": self.config.model_dump(mode='json'), "training_ids": self.training_ids}
        (directory / PIPELINE_FILE).write_text(json.dumps(pipeline, indent=2))
        written["pipeline"] = str(directory / PIPELINE_FILE)
        return written

    @classmethod
    def load(cls, directory, threads: int = THREADS) -> "GaitRecognizer":
        directory = Path(directory)
        pipeline_file = directory / PIPELINE_FILE
        if not pipeline_file.exists():
            raise FileNotFoundError(f"no {PIPELINE_FILE} in {directory}")
        pipeline = json.loads(pipeline_file.read_text())
        recognizer = cls(PipelineConfig(**pipeline["config"]), threads=threads)
        recognizer.training_ids = pipeline.get("training_ids", [])
        if recognizer.mode.uses_accel:
            recognizer.eigen_model = eigengait.load_model(directory / EIGEN_MODEL_FILE,
                                                          energy_fraction=recognizer.config.energy_fraction)
        if recognizer.mode.uses_rgbd:
            recognizer.codebook = trajgait.load_codebook(directory / CODEBOOK_FILE)
        recognizer.subject_model = load_subject_model(
            directory / SUBJECT_MODEL_FILE,
            eigen_model=recognizer.eigen_model,
            codebook=recognizer.codebook,
        )
        logger.info(f"✅ Loaded {recognizer.mode} recognizer for {len(recognizer.subject_model.subject_ids)} "
                    f"subjects from {directory}")
        return recognizer


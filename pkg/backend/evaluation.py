"""
Evaluation protocol
Stratified splits, closed-set accuracy, per-subject one-vs-all ROC with vertical averaging,
per-covariate breakdown and the training-fraction / step-length / codebook-size sweeps
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np
import pandas as pd
from pydantic import BaseModel, Field
from scipy.integrate import trapezoid

from config import DEFAULT_REPEATS, DEFAULT_SEED, DEFAULT_TRAIN_FRACTION, MAX_STEPS, MIN_STEPS, ROC_GRID_POINTS, THREADS
from models import LabeledSample, Pace, ValidationError
from query_engine import PredictionQueryEngine
from recognition import GaitRecognizer, Mode, PipelineConfig, SampleFeatures, extract_features, score_matrix

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

DEFAULT_FRACTIONS = [round(0.1 * i, 1) for i in range(1, 10)]
DEFAULT_CODEBOOK_SIZES = [256, 512, 1024]
PACE_SUBSETS = {
    "normal": [Pace.NORMAL],
    "fast": [Pace.FAST],
    "normal+fast": [Pace.NORMAL, Pace.FAST],
}

Classifier = Callable[[SampleFeatures], Optional[str]]


class SplitSpec(BaseModel):
    """Stratified train/test split: every subject keeps >= 1 training and >= 1 test sample"""
    train_fraction: float = Field(DEFAULT_TRAIN_FRACTION, gt=0, lt=1)
    seed: int = Field(DEFAULT_SEED, ge=0)
    stratified: bool = True


@dataclass(frozen=True, eq=False)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float
    subject_id: str = ""


@dataclass
class EvaluationResult:
    accuracy: float
    predictions: pd.DataFrame
    recognizer: Optional[GaitRecognizer] = None
    train_ids: List[str] = field(default_factory=list)
    test_ids: List[str] = field(default_factory=list)

    @property
    def n_test(self) -> int:
        return len(self.predictions)


# ============================================================================
# Splits
# ============================================================================

def make_split(samples: Sequence, spec: SplitSpec) -> Tuple[List[int], List[int]]:
    """
    Seeded per-subject split of sample indices

    Each subject with n samples gets round(f * n) training samples, clamped to [1, n - 1].

    Raises:
        ValidationError: a subject has fewer than 2 samples
    """
    by_subject: Dict[str, List[int]] = {}
    for index, sample in enumerate(samples):
        by_subject.setdefault(sample.subject_id, []).append(index)

    rng = np.random.default_rng(spec.seed)
    train, test = [], []
    for subject in sorted(by_subject):
        indices = by_subject[subject]
        if len(indices) < 2:
            raise ValidationError(f"subject {subject} has {len(indices)} sample(s); a split needs at least 2")
        n_train = int(np.floor(spec.train_fraction * len(indices) + 0.5))
        n_train = min(max(n_train, 1), len(indices) - 1)
        order = rng.permutation(len(indices))
        train.extend(indices[i] for i in order[:n_train])
        test.extend(indices[i] for i in order[n_train:])
    return sorted(train), sorted(test)


def _ensure_features(samples: Sequence, config: PipelineConfig, threads: int) -> List[SampleFeatures]:
    if samples and isinstance(samples[0], LabeledSample):
        return extract_features(samples, config, threads=threads)
    return list(samples)


# ============================================================================
# Accuracy
# ============================================================================

def _prediction_rows(features: Sequence[SampleFeatures], predicted: Sequence[Optional[str]]) -> pd.DataFrame:
    return pd.DataFrame({
        'sample_id': [f.sample_id for f in features],
        'subject_id': [f.subject_id for f in features],
        'predicted': list(predicted),
        'correct': [p == f.subject_id for f, p in zip(features, predicted)],
        'pace': [str(f.pace) for f in features],
        'covariate': [str(f.covariate) for f in features],
    })


def evaluate_accuracy(
    config: PipelineConfig,
    samples: Sequence[Union[LabeledSample, SampleFeatures]],
    split: SplitSpec,
    classifier: Optional[Classifier] = None,
    shuffle_labels: bool = False,
    threads: int = THREADS
) -> EvaluationResult:
    """
    Train on the training partition only and score correct / total on the test partition

    `classifier` replaces the trained pipeline (oracle and chance controls);
    `shuffle_labels` permutes the training labels before fitting.
    """
    features = _ensure_features(samples, config, threads)
    train_idx, test_idx = make_split(features, split)
    train_set = [features[i] for i in train_idx]
    test_set = [features[i] for i in test_idx]
    train_ids = [f.sample_id for f in train_set]
    test_ids = [f.sample_id for f in test_set]
    if set(train_ids) & set(test_ids):
        raise ValidationError("train and test partitions overlap")

    recognizer = None
    if classifier is None:
        labels = [f.subject_id for f in train_set]
        if shuffle_labels:
            labels = [str(x) for x in np.random.default_rng(split.seed + 1).permutation(labels)]
        recognizer = GaitRecognizer(config, threads=threads).fit(train_set, labels)
        if set(recognizer.training_ids) & set(test_ids):
            raise ValidationError("recognizer consumed test samples")
        predicted = [subject for subject, _ in recognizer.predict_many(test_set)]
    else:
        predicted = [classifier(f) for f in test_set]

    predictions = _prediction_rows(test_set, predicted)
    accuracy = float(predictions['correct'].sum()) / len(predictions)
    logger.info(f"📊 {config.mode} accuracy {accuracy:.4f} on {len(predictions)} test samples "
                f"(train fraction {split.train_fraction}, seed {split.seed})")
    return EvaluationResult(
        accuracy=accuracy,
        predictions=predictions,
        recognizer=recognizer,
        train_ids=train_ids,
        test_ids=test_ids,
    )


def chance_band(n_subjects: int, n_outcomes: int, sigmas: float = 3.0) -> Tuple[float, float]:
    """
    1/n +- `sigmas` binomial standard deviations over `n_outcomes` independent outcomes

    Under label shuffling the test samples of one subject share their fate, so the
    independent outcomes are subjects (times repeats), not test samples.
    """
    if n_subjects < 2 or n_outcomes < 1:
        raise ValidationError(f"need >= 2 subjects and >= 1 outcome, got {n_subjects} and {n_outcomes}")
    chance = 1.0 / n_subjects
    half = sigmas * float(np.sqrt(chance * (1.0 - chance) / n_outcomes))
    return max(0.0, chance - half), min(1.0, chance + half)


def covariate_breakdown(
    config: PipelineConfig,
    samples: Sequence[Union[LabeledSample, SampleFeatures]],
    split: SplitSpec,
    classifier: Optional[Classifier] = None,
    threads: int = THREADS
) -> pd.DataFrame:
    """Accuracy per covariate from one jointly trained model (columns: covariate, accuracy, count)"""
    features = _ensure_features(samples, config, threads)
    result = evaluate_accuracy(config, features, split, classifier=classifier, threads=threads)

    engine = PredictionQueryEngine()
    try:
        engine.register_predictions(result.predictions)
        table = engine.accuracy_by(['covariate'])
    finally:
        engine.close()

    present = set(table['covariate'])
    for covariate in sorted({str(f.covariate) for f in features} - present):
        logger.warning(f"⚠️ Covariate {covariate} has no test samples; omitted")
    return table


# ============================================================================
# ROC
# ============================================================================

def roc_curve(scores: np.ndarray, positives: np.ndarray, subject_id: str = "") -> RocCurve:
    """Threshold sweep from +inf down; tied scores move together"""
    scores = np.asarray(scores, dtype=np.float64)
    positives = np.asarray(positives, dtype=bool)
    n_pos = int(positives.sum())
    n_neg = len(positives) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("ROC needs both positive and negative samples")

    order = np.argsort(-scores, kind='stable')
    sorted_scores = scores[order]
    tp = np.cumsum(positives[order])
    fp = np.cumsum(~positives[order])
    # last index of every run of equal scores
    ends = np.flatnonzero(np.diff(sorted_scores) != 0)
    ends = np.append(ends, len(sorted_scores) - 1)
    tpr = np.concatenate([[0.0], tp[ends] / n_pos])
    fpr = np.concatenate([[0.0], fp[ends] / n_neg])
    return RocCurve(fpr=fpr, tpr=tpr, auc=float(trapezoid(tpr, fpr)), subject_id=subject_id)


def vertical_average(curves: Sequence[RocCurve], grid_points: int = ROC_GRID_POINTS) -> RocCurve:
    """Mean TPR at fixed FPR values; each curve is read as the best TPR reached at or below that FPR"""
    if not curves:
        raise ValidationError("no ROC curves to average")
    grid = np.linspace(0.0, 1.0, grid_points)
    tprs = []
    for curve in curves:
        index = np.searchsorted(curve.fpr, grid, side='right') - 1
        tprs.append(curve.tpr[index])
    mean_tpr = np.mean(tprs, axis=0)
    fpr = np.concatenate([[0.0], grid])
    tpr = np.concatenate([[0.0], mean_tpr])
    return RocCurve(fpr=fpr, tpr=tpr, auc=float(trapezoid(tpr, fpr)), subject_id="average")


def evaluate_roc(
    scores: np.ndarray,
    labels: Sequence[str],
    subject_ids: Sequence[str],
    grid_points: int = ROC_GRID_POINTS
) -> Tuple[List[RocCurve], RocCurve]:
    """
    One-vs-all ROC per subject from an (n_samples, n_subjects) score matrix, plus the averaged curve

    Subjects absent from `labels` are skipped with a warning.
    """
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    labels = np.asarray(list(labels))
    if scores.shape != (len(labels), len(subject_ids)):
        raise ValidationError(f"score matrix {scores.shape} does not match {len(labels)} samples x "
                              f"{len(subject_ids)} subjects")
    if len(set(labels.tolist())) < 2:
        raise ValidationError("ROC evaluation needs at least 2 subjects in the test labels")

    curves = []
    for column, subject in enumerate(subject_ids):
        positives = labels == subject
        if not positives.any() or positives.all():
            logger.warning(f"⚠️ Subject {subject} absent from the test set; skipped")
            continue
        curves.append(roc_curve(scores[:, column], positives, subject_id=subject))
    average = vertical_average(curves, grid_points)
    logger.info(f"📊 ROC over {len(curves)} subjects, average AUC {average.auc:.4f}")
    return curves, average


def recognizer_roc(recognizer: GaitRecognizer, test_features: Sequence[SampleFeatures]) -> Tuple[List[RocCurve], RocCurve]:
    """Score every test sample with every one-vs-all model and build the ROC set"""
    rows, labels = [], []
    for f in test_features:
        vector = recognizer.feature_vector(f)
        if vector is not None:
            rows.append(vector)
            labels.append(f.subject_id)
    scores = score_matrix(recognizer.subject_model, np.vstack(rows))
    return evaluate_roc(scores, labels, recognizer.subject_model.subject_ids)


# ============================================================================
# Sweeps
# ============================================================================

def _split_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


def fraction_sweep(
    config: PipelineConfig,
    samples: Sequence[Union[LabeledSample, SampleFeatures]],
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    repeats: int = DEFAULT_REPEATS,
    seed: int = DEFAULT_SEED,
    threads: int = THREADS
) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """
    Accuracy versus training fraction, `repeats` seeded splits per fraction

    Returns:
        (summary with fraction, accuracy_mean, accuracy_std, repeats; full prediction log)
    """
    if repeats < 1:
        raise ValidationError(f"repeats must be positive, got {repeats}")
    features = _ensure_features(samples, config, threads)
    logs = []
    for f_index, fraction in enumerate(fractions):
        for repeat in range(repeats):
            split = SplitSpec(train_fraction=fraction, seed=_split_seed(seed, f_index, repeat))
            result = evaluate_accuracy(config, features, split, threads=threads)
            log = result.predictions.assign(mode=str(config.mode), fraction=float(fraction), repeat=repeat)
            logs.append(log)
    log = pd.concat(logs, ignore_index=True)

    engine = PredictionQueryEngine()
    try:
        engine.register_predictions(log)
        summary = engine.fraction_summary()
    finally:
        engine.close()
    logger.info(f"✅ Fraction sweep: {len(fractions)} fractions x {repeats} repeats ({config.mode})")
    return summary, log


def step_sweep(
    config: PipelineConfig,
    samples: Sequence[Union[LabeledSample, SampleFeatures]],
    steps: Sequence[int] = tuple(range(MIN_STEPS, MAX_STEPS + 1)),
    pace_subsets: Optional[Dict[str, List[Pace]]] = None,
    split: Optional[SplitSpec] = None,
    threads: int = THREADS
) -> pd.DataFrame:
    """EigenGait accuracy per window length and pace subset (columns: pace, steps, accuracy, count)"""
    split = split or SplitSpec(seed=config.seed)
    pace_subsets = pace_subsets or PACE_SUBSETS
    eigen_config = config.model_copy(update={"mode": Mode.EIGENGAIT})
    features = _ensure_features(samples, eigen_config, threads)

    rows = []
    for name, paces in pace_subsets.items():
        subset = [f for f in features if f.pace in paces]
        if len({f.subject_id for f in subset}) < 2:
            logger.warning(f"⚠️ Pace subset {name}: fewer than 2 subjects; skipped")
            continue
        for n_steps in steps:
            step_config = eigen_config.model_copy(update={"steps": n_steps})
            try:
                result = evaluate_accuracy(step_config, subset, split, threads=threads)
            except ValidationError as e:
                logger.warning(f"⚠️ Pace subset {name}, {n_steps} steps: {e}")
                continue
            rows.append({"pace": name, "steps": n_steps, "accuracy": result.accuracy, "count": result.n_test})
    return pd.DataFrame(rows, columns=["pace", "steps", "accuracy", "count"])


def codebook_sweep(
    config: PipelineConfig,
    samples: Sequence[Union[LabeledSample, SampleFeatures]],
    sizes: Sequence[int] = DEFAULT_CODEBOOK_SIZES,
    split: Optional[SplitSpec] = None,
    threads: int = THREADS
) -> pd.DataFrame:
    """TrajGait accuracy per codebook size (columns: K, accuracy, count)"""
    split = split or SplitSpec(seed=config.seed)
    mode = config.mode if config.mode.uses_rgbd else Mode.TRAJGAIT
    traj_config = config.model_copy(update={"mode": mode})
    features = _ensure_features(samples, traj_config, threads)

    rows = []
    for K in sizes:
        result = evaluate_accuracy(traj_config.model_copy(update={"K": K}), features, split, threads=threads)
        rows.append({"K": K, "accuracy": result.accuracy, "count": result.n_test})
    return pd.DataFrame(rows, columns=["K", "accuracy", "count"])


# ============================================================================
# Outputs
# ============================================================================

def write_csv(df: pd.DataFrame, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, lineterminator='\n')
    logger.info(f"💾 Wrote {len(df)} rows to {path}")
    return path


def roc_table(curve: RocCurve) -> pd.DataFrame:
    return pd.DataFrame({"fpr": curve.fpr, "tpr": curve.tpr})


def plot_roc(curves: Sequence[RocCurve], average: RocCurve, path) -> Path:
    """Per-subject curves in light gray, the averaged curve on top"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5, 5))
    for curve in curves:
        ax.plot(curve.fpr, curve.tpr, color='0.8', linewidth=0.8)
    ax.plot(average.fpr, average.tpr, color='C0', linewidth=2, label=f"average (AUC {average.auc:.3f})")
    ax.plot([0, 1], [0, 1], linestyle='--', color='0.5', linewidth=0.8)
    ax.set_xlabel("False positive rate")
    ax.set_ylabel("True positive rate")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.01)
    ax.legend(loc='lower right')
    fig.tight_layout()
    fig.savefig(path, format='svg')
    plt.close(fig)
    return path


def plot_sweep(df: pd.DataFrame, x: str, y: str, path, group: Optional[str] = None,
               error: Optional[str] = None) -> Path:
    """Line plot of a sweep table, one line per `group` value"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    groups = df.groupby(group) if group else [(y, df)]
    for name, part in groups:
        if error:
            ax.errorbar(part[x], part[y], yerr=part[error], marker='o', capsize=3, label=str(name))
        else:
            ax.plot(part[x], part[y], marker='o', label=str(name))
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    ax.set_ylim(0, 1.02)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format='svg')
    plt.close(fig)
    return path

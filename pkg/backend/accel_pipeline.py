"""
Acceleration pipeline
Tri-axial readings -> compound gait curve -> step partition points -> fixed-length step windows
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from config import MAX_STEPS, MIN_STEPS, PEAK_MIN_GAP_MS, PEAK_MIN_VALUE, SAMPLING_RATE_HZ, STEP_SAMPLES
from models import AccelSample, Covariate, GaitCurve, Pace, StepWindow, ValidationError

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PartitionPoint:
    """An accepted step boundary on a gait curve"""
    index: int
    t_ms: float
    value: float


def compound(ax: float, ay: float, az: float) -> float:
    """Orientation-invariant magnitude sqrt(ax^2 + ay^2 + az^2)"""
    if not all(math.isfinite(v) for v in (ax, ay, az)):
        raise ValidationError(f"non-finite acceleration ({ax}, {ay}, {az})")
    return math.hypot(ax, ay, az)


def compound_array(xyz: np.ndarray) -> np.ndarray:
    """Row-wise compound acceleration of an (n, 3) array"""
    xyz = np.asarray(xyz, dtype=np.float64)
    if not np.all(np.isfinite(xyz)):
        raise ValidationError("non-finite acceleration values")
    return np.sqrt(np.sum(xyz * xyz, axis=1))


def gait_curve(
    samples: List[AccelSample],
    subject_id: Optional[str] = None,
    pace: Pace = Pace.UNKNOWN,
    covariate: Covariate = Covariate.NONE,
    curve_id: str = "",
    rate_hz: float = SAMPLING_RATE_HZ
) -> GaitCurve:
    """Build the compound gait curve of one walk, keeping sample timestamps"""
    if samples:
        xyz = np.array([(s.ax, s.ay, s.az) for s in samples], dtype=np.float64)
        values = compound_array(xyz)
        t_ms = np.array([s.t_ms for s in samples], dtype=np.float64)
    else:
        values = np.empty(0)
        t_ms = np.empty(0)
    return GaitCurve(
        values=values,
        rate_hz=rate_hz,
        subject_id=subject_id,
        pace=pace,
        covariate=covariate,
        t_ms=t_ms,
        curve_id=curve_id,
    )


def local_maxima(values: np.ndarray) -> np.ndarray:
    """
    Indices of local maxima in index order

    A sample is a peak when it is strictly above its left neighbor and strictly above the
    next differing sample to its right; a flat-topped peak reports its leftmost sample.
    """
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    if n < 3:
        return np.empty(0, dtype=np.int64)

    peaks = []
    i = 1
    while i < n - 1:
        if values[i] > values[i - 1]:
            j = i
            while j + 1 < n and values[j + 1] == values[i]:
                j += 1
            if j + 1 < n and values[j + 1] < values[i]:
                peaks.append(i)
            i = j + 1
        else:
            i += 1
    return np.asarray(peaks, dtype=np.int64)


def partition_steps(
    curve: GaitCurve,
    min_gap_ms: float = PEAK_MIN_GAP_MS,
    min_value: float = PEAK_MIN_VALUE
) -> List[PartitionPoint]:
    """
    Greedy left-to-right step partitioning

    A point is accepted when it is a local maximum, lies at least `min_gap_ms` after the
    previously accepted point, and exceeds `min_value`.
    """
    if len(curve) < 3:
        return []

    points = []
    last_t = -math.inf
    for index in local_maxima(curve.values):
        value = float(curve.values[index])
        t_ms = float(curve.t_ms[index])
        if value <= min_value or t_ms - last_t < min_gap_ms:
            continue
        points.append(PartitionPoint(index=int(index), t_ms=t_ms, value=value))
        last_t = t_ms

    logger.debug(f"Partitioned curve {curve.curve_id or '?'} into {max(len(points) - 1, 0)} steps")
    return points


def resample_segment(curve: GaitCurve, start: int, end: int, length: int = STEP_SAMPLES) -> np.ndarray:
    """Linearly interpolate the closed segment [start, end] onto `length` evenly spaced instants"""
    times = curve.t_ms[start:end + 1]
    values = curve.values[start:end + 1]
    targets = np.linspace(times[0], times[-1], length)
    return np.interp(targets, times, values)


def extract_windows(curve: GaitCurve, points: List[PartitionPoint], steps: int) -> List[StepWindow]:
    """
    Cut non-overlapping `steps`-step windows

    Window k spans partition points [k*steps, (k+1)*steps]; each one-step segment is
    resampled to 50 values and the segments are concatenated.
    """
    if not MIN_STEPS <= steps <= MAX_STEPS:
        raise ValidationError(f"steps must be in [{MIN_STEPS}, {MAX_STEPS}], got {steps}")
    if len(points) < steps + 1:
        return []

    windows = []
    for first in range(0, len(points) - steps, steps):
        group = points[first:first + steps + 1]
        segments = [
            resample_segment(curve, a.index, b.index)
            for a, b in zip(group[:-1], group[1:])
        ]
        windows.append(StepWindow(
            steps=steps,
            samples=np.concatenate(segments),
            source_curve_id=curve.curve_id,
            point_range=(first, first + steps),
        ))
    return windows


def extract_sample_windows(
    samples: List[AccelSample],
    steps: int,
    curve_id: str = "",
    subject_id: Optional[str] = None
) -> List[StepWindow]:
    """compound -> partition_steps -> extract_windows for one acceleration sequence"""
    curve = gait_curve(samples, subject_id=subject_id, curve_id=curve_id)
    points = partition_steps(curve)
    windows = extract_windows(curve, points, steps)
    if not windows:
        logger.warning(f"⚠️ {curve_id or 'curve'}: {len(points)} partition points, "
                       f"no {steps}-step window")
    return windows

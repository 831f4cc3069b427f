"""
Core domain types shared by every gaitforge stage
Acceleration samples, gait curves, step windows, RGBD frames and the dataset manifest schema
"""
from __future__ import annotations

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
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from config import DEPTH_MAX, MAX_STEPS, MIN_STEPS, STEP_SAMPLES


# ============================================================================
# Errors
# ============================================================================

class GaitForgeError(Exception):
    """Base class for all gaitforge errors"""


class ValidationError(GaitForgeError, ValueError):
    """An invariant, range or ordering rule was violated"""


class FormatError(ValidationError):
    """A file does not follow its on-disk format"""

    def __init__(self, message: str, path=None, line: Optional[int] = None,
                 frame_index: Optional[int] = None):
        location = []
        if path is not None:
            location.append(str(path))
        if line is not None:
            location.append(f"line {line}")
        if frame_index is not None:
            location.append(f"frame {frame_index}")
        prefix = f"{': '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")
        self.path = path
        self.line = line
        self.frame_index = frame_index


class DimensionError(ValidationError):
    """Vector or grid dimensions do not match"""


class DatasetError(GaitForgeError, OSError):
    """A referenced file is missing or unreadable"""


# ============================================================================
# Enums
# ============================================================================

class Pace(StrEnum):
    NORMAL = "normal"
    FAST = "fast"
    UNKNOWN = "unknown"


class Covariate(StrEnum):
    """Walking conditions; NONE means the sample carries no covariate tag"""
    NATURAL = "natural"
    LEFT_HAND_IN_POCKET = "left_hand_in_pocket"
    RIGHT_HAND_IN_POCKET = "right_hand_in_pocket"
    BOTH_HANDS_IN_POCKET = "both_hands_in_pocket"
    LEFT_HAND_HOLDING_BOOK = "left_hand_holding_book"
    RIGHT_HAND_HOLDING_BOOK = "right_hand_holding_book"
    LEFT_HAND_WITH_LOADINGS = "left_hand_with_loadings"
    RIGHT_HAND_WITH_LOADINGS = "right_hand_with_loadings"
    NONE = "none"


HARD_COVARIATES = [c for c in Covariate if c is not Covariate.NONE]


def _frozen(array: np.ndarray, dtype=np.float64) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


# ============================================================================
# Acceleration
# ============================================================================

@dataclass(frozen=True)
class AccelSample:
    """One tri-axial accelerometer reading (m/s^2)"""
    t_ms: int
    ax: float
    ay: float
    az: float


@dataclass(frozen=True, eq=False)
class GaitCurve:
    """Compound-acceleration time series for one walk"""
    values: np.ndarray
    rate_hz: float
    subject_id: Optional[str] = None
    pace: Pace = Pace.UNKNOWN
    covariate: Covariate = Covariate.NONE
    t_ms: Optional[np.ndarray] = None
    curve_id: str = ""

    def __post_init__(self):
        values = _frozen(self.values)
        if values.ndim != 1:
            raise DimensionError("gait curve values must be one-dimensional")
        if not np.all(np.isfinite(values)):
            raise ValidationError("gait curve values must be finite")
        if np.any(values < 0):
            raise ValidationError("compound accelerations are norms and cannot be negative")
        if self.rate_hz <= 0:
            raise ValidationError(f"sampling rate must be positive, got {self.rate_hz}")
        object.__setattr__(self, 'values', values)

        if self.t_ms is None:
            times = np.arange(len(values)) * (1000.0 / self.rate_hz)
        else:
            times = np.asarray(self.t_ms, dtype=np.float64)
            if times.shape != values.shape:
                raise DimensionError("timestamps and values differ in length")
            if np.any(np.diff(times) <= 0):
                raise ValidationError("gait curve timestamps must be strictly increasing")
        object.__setattr__(self, 't_ms', _frozen(times))
        object.__setattr__(self, 'pace', Pace(self.pace))
        object.__setattr__(self, 'covariate', Covariate(self.covariate))

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True, eq=False)
class StepWindow:
    """Fixed-length window of `steps` step cycles, 50 values per cycle"""
    steps: int
    samples: np.ndarray
    source_curve_id: str = ""
    point_range: tuple = (0, 0)

    def __post_init__(self):
        if not MIN_STEPS <= self.steps <= MAX_STEPS:
            raise ValidationError(f"steps must be in [{MIN_STEPS}, {MAX_STEPS}], got {self.steps}")
        samples = _frozen(self.samples)
        if samples.shape != (STEP_SAMPLES * self.steps,):
            raise DimensionError(
                f"a {self.steps}-step window holds {STEP_SAMPLES * self.steps} values, got {samples.shape}"
            )
        object.__setattr__(self, 'samples', samples)

    def __len__(self) -> int:
        return len(self.samples)


# ============================================================================
# RGBD
# ============================================================================

@dataclass(frozen=True, eq=False)
class RgbdFrame:
    """Synchronized color + 13-bit depth frame"""
    color: np.ndarray
    depth: np.ndarray
    t_ms: int

    def __post_init__(self):
        color = _frozen(self.color, dtype=np.uint8)
        depth = np.asarray(self.depth)
        if color.ndim != 3 or color.shape[2] != 3:
            raise DimensionError(f"color frame must be H x W x 3, got {color.shape}")
        if depth.ndim != 2:
            raise DimensionError(f"depth frame must be H x W, got {depth.shape}")
        if depth.size and (depth.min() < 0 or depth.max() > DEPTH_MAX):
            raise ValidationError(f"depth values must lie in [0, {DEPTH_MAX}]")
        object.__setattr__(self, 'color', color)
        object.__setattr__(self, 'depth', _frozen(depth, dtype=np.uint16))

    @property
    def color_dims(self) -> tuple:
        return self.color.shape[:2]

    def gray(self) -> np.ndarray:
        """Luma plane as float64 in [0, 255]"""
        return self.color.astype(np.float64) @ np.array([0.299, 0.587, 0.114])


# ============================================================================
# Dataset manifest schema
# ============================================================================

class FrameRecord(BaseModel):
    """One color/depth file pair"""
    color: str
    depth: str
    color_t_ms: int = Field(..., ge=0)
    depth_t_ms: int = Field(..., ge=0)


class RgbdRecord(BaseModel):
    frames: List[FrameRecord] = Field(default_factory=list)
    flow: Optional[List[str]] = Field(
        None, description="Optional precomputed FLO1 files, one per consecutive frame pair"
    )


class SampleRecord(BaseModel):
    """One walk: an acceleration sequence and/or an RGBD sequence"""
    sample_id: str
    accel: Optional[str] = None
    rgbd: Optional[RgbdRecord] = None
    pace: Pace = Pace.UNKNOWN
    covariate: Covariate = Covariate.NONE

    @model_validator(mode='after')
    def _has_data(self):
        if self.accel is None and self.rgbd is None:
            raise ValueError(f"sample {self.sample_id} references neither accel nor rgbd data")
        return self


class SubjectRecord(BaseModel):
    subject_id: str
    samples: List[SampleRecord] = Field(default_factory=list)


class DatasetManifest(BaseModel):
    """Top-level manifest: JSON with a `subjects` array, paths relative to the manifest"""
    name: str = "gaitforge-dataset"
    seed: Optional[int] = None
    subjects: List[SubjectRecord]
    split: Optional[Dict[str, str]] = Field(
        None, description="Optional sample_id -> 'train' | 'test' annotations"
    )

    @field_validator('subjects')
    @classmethod
    def _unique_ids(cls, subjects):
        subject_ids = [s.subject_id for s in subjects]
        if len(set(subject_ids)) != len(subject_ids):
            raise ValueError("subject ids must be unique")
        sample_ids = [x.sample_id for s in subjects for x in s.samples]
        if len(set(sample_ids)) != len(sample_ids):
            raise ValueError("sample ids must be unique")
        return subjects

    def iter_samples(self):
        """Yield (subject_id, SampleRecord) in manifest order"""
        for subject in self.subjects:
            for sample in subject.samples:
                yield subject.subject_id, sample


@dataclass
class LabeledSample:
    """In-memory unit of work for the pipelines: one subject's walk"""
    sample_id: str
    subject_id: str
    pace: Pace = Pace.UNKNOWN
    covariate: Covariate = Covariate.NONE
    accel: Optional[List[AccelSample]] = None
    frames: Optional[List[RgbdFrame]] = None
    flows: Optional[list] = None
    extras: dict = field(default_factory=dict)

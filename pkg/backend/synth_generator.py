"""
Synthetic gait data generator for gaitforge
Seeded multi-sensor walks: tri-axial acceleration from a per-subject step waveform and RGBD
sequences of an articulated figure walking toward the camera
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from config import DEPTH_MAX, FRAME_RATE_FPS, MANIFEST_NAME, SAMPLING_RATE_HZ, THREADS
from ingestion import write_accel_csv, write_manifest, write_rgbd_sequence
from models import (
    AccelSample, Covariate, DatasetManifest, LabeledSample, Pace, RgbdFrame, SampleRecord, SubjectRecord,
    ValidationError
)

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

GRAVITY = 9.81
FAST_PERIOD_SCALE = 0.8
FAST_AMPLITUDE_SCALE = 1.3
# the rise into each main peak is noise-free and monotone from this phase on
RISE_PHASE = 0.58
TEXTURE_SPAN = (0.05, 0.5)
CAMERA_HEIGHT_MM = 1000.0
MIN_SEPARATION = 0.12
MAX_PROFILE_ATTEMPTS = 2000

# (name, low, high) of the parameters that must differ between subjects
SEPARATED_PARAMETERS = [
    ("period_ms", 950.0, 1150.0),
    ("main_amp", 6.0, 10.0),
    ("sec_amp", 2.5, 5.0),
    ("sec_phase", 0.38, 0.48),
    ("rise_width", 0.11, 0.15),
    ("fall_width", 0.05, 0.08),
    ("trough_amp", 1.5, 3.0),
    ("leg_amp", 0.30, 0.50),
    ("arm_amp", 0.25, 0.60),
]


@dataclass(frozen=True)
class SubjectProfile:
    """Gait and body parameters of one synthetic subject"""
    subject_id: str
    period_ms: float
    main_amp: float
    sec_amp: float
    sec_phase: float
    rise_width: float
    fall_width: float
    trough_amp: float
    trough_phase: float
    harmonics: Tuple[Tuple[float, float], ...]
    noise_scale: float
    tilt: float
    height_mm: float
    shoulder_mm: float
    hip_mm: float
    leg_amp: float
    knee_amp: float
    arm_amp: float
    elbow_flex: float
    sway_mm: float
    bob_mm: float
    start_depth_mm: float
    end_depth_mm: float
    texture_mm: float
    colors: Tuple[Tuple[int, int, int], ...] = field(default=((180, 60, 60), (50, 60, 140), (220, 180, 150)))

    def separation_vector(self) -> np.ndarray:
        return np.array([(getattr(self, name) - low) / (high - low) for name, low, high in SEPARATED_PARAMETERS])


@dataclass(frozen=True)
class CovariateEffect:
    """How a walking condition perturbs the waveform and the figure"""
    main: float = 1.0
    sec: float = 1.0
    texture: float = 1.0
    load_amp: float = 0.0
    load_phase: float = 0.25
    arm_left: float = 1.0
    arm_right: float = 1.0
    prop: Optional[str] = None
    prop_side: int = 0


COVARIATE_EFFECTS: Dict[Covariate, CovariateEffect] = {
    Covariate.NONE: CovariateEffect(),
    Covariate.NATURAL: CovariateEffect(),
    Covariate.LEFT_HAND_IN_POCKET: CovariateEffect(sec=0.88, texture=0.9, arm_left=0.1),
    Covariate.RIGHT_HAND_IN_POCKET: CovariateEffect(main=0.92, texture=0.9, arm_right=0.1),
    Covariate.BOTH_HANDS_IN_POCKET: CovariateEffect(main=0.75, sec=0.85, arm_left=0.1, arm_right=0.1),
    Covariate.LEFT_HAND_HOLDING_BOOK: CovariateEffect(sec=1.1, texture=0.7, arm_left=0.15, prop="book", prop_side=-1),
    Covariate.RIGHT_HAND_HOLDING_BOOK: CovariateEffect(main=0.9, texture=0.7, arm_right=0.15, prop="book", prop_side=1),
    Covariate.LEFT_HAND_WITH_LOADINGS: CovariateEffect(main=1.05, load_amp=0.8, load_phase=0.25, arm_left=0.4,
                                                       prop="bag", prop_side=-1),
    Covariate.RIGHT_HAND_WITH_LOADINGS: CovariateEffect(sec=1.1, load_amp=0.8, load_phase=0.3, arm_right=0.4,
                                                        prop="bag", prop_side=1),
}


def _bump(phase: np.ndarray, center: float, half_width: float) -> np.ndarray:
    """Compact cos^2 bump, zero outside center +- half_width"""
    u = (phase - center) / half_width
    return np.where(np.abs(u) < 1.0, np.cos(0.5 * np.pi * u) ** 2, 0.0)


class SyntheticGaitGenerator:
    """Generate seeded gait walks for a set of distinct synthetic subjects"""

    def __init__(
        self,
        seed: int = 7,
        accel_duration_s: float = 10.0,
        n_frames: int = 45,
        frame_size: Tuple[int, int] = (240, 320),
        depth_stride: int = 2,
        focal_px: float = 250.0,
        fps: float = FRAME_RATE_FPS,
        min_separation: float = MIN_SEPARATION
    ):
        if depth_stride < 1 or n_frames < 2:
            raise ValidationError("depth_stride >= 1 and n_frames >= 2 are required")
        self.seed = seed
        self.accel_duration_s = accel_duration_s
        self.n_frames = n_frames
        self.frame_size = frame_size
        self.depth_stride = depth_stride
        # focal length scales with the frame width (250 px at 320 wide)
        self.focal_px = focal_px * frame_size[1] / 320.0
        self.fps = fps
        self.min_separation = min_separation

    # ------------------------------------------------------------------
    # Subjects
    # ------------------------------------------------------------------

    def _draw_profile(self, rng: np.random.Generator, subject_id: str) -> SubjectProfile:
        drawn = {name: float(rng.uniform(low, high)) for name, low, high in SEPARATED_PARAMETERS}
        n_harmonics = int(rng.integers(3, 6))
        harmonics = tuple(
            (float(rng.uniform(0.3, 1.0)), float(rng.uniform(0, 2 * np.pi))) for _ in range(n_harmonics)
        )
        colors = tuple(tuple(int(c) for c in rng.integers(40, 230, size=3)) for _ in range(3))
        return SubjectProfile(
            subject_id=subject_id,
            trough_phase=float(rng.uniform(0.5, 0.55)),
            harmonics=harmonics,
            noise_scale=float(rng.uniform(0.02, 0.05)),
            tilt=float(rng.uniform(0.2, 0.6)),
            height_mm=float(rng.uniform(1550, 1900)),
            shoulder_mm=float(rng.uniform(360, 460)),
            hip_mm=float(rng.uniform(260, 340)),
            knee_amp=float(rng.uniform(0.4, 0.8)),
            elbow_flex=float(rng.uniform(0.15, 0.5)),
            sway_mm=float(rng.uniform(15, 40)),
            bob_mm=float(rng.uniform(10, 30)),
            start_depth_mm=float(rng.uniform(4800, 5200)),
            end_depth_mm=float(rng.uniform(950, 1100)),
            texture_mm=float(rng.uniform(70, 130)),
            colors=colors,
            **drawn,
        )

    def make_profiles(self, n_subjects: int) -> List[SubjectProfile]:
        """
        Draw subjects whose key parameters are pairwise separated

        Raises:
            ValidationError: the parameter space cannot hold n_subjects at the required separation
        """
        if n_subjects < 2:
            raise ValidationError(f"n_subjects must be at least 2, got {n_subjects}")
        profile_seq, _ = np.random.SeedSequence(self.seed).spawn(2)
        rng = np.random.default_rng(profile_seq)
        profiles: List[SubjectProfile] = []
        vectors: List[np.ndarray] = []
        for i in range(n_subjects):
            for _ in range(MAX_PROFILE_ATTEMPTS):
                profile = self._draw_profile(rng, f"subject_{i:03d}")
                vector = profile.separation_vector()
                if all(np.linalg.norm(vector - other) >= self.min_separation for other in vectors):
                    break
            else:
                raise ValidationError(
                    f"cannot separate {n_subjects} subjects by {self.min_separation} in the "
                    f"{len(SEPARATED_PARAMETERS)}-parameter space; lower min_separation or widen the ranges"
                )
            profiles.append(profile)
            vectors.append(vector)
        logger.info(f"✅ Drew {n_subjects} subject profiles (min separation {self.min_separation})")
        return profiles

    # ------------------------------------------------------------------
    # Acceleration
    # ------------------------------------------------------------------

    def waveform(self, phase: np.ndarray, profile: SubjectProfile, effect: CovariateEffect,
                 main_amp: np.ndarray, period_scale: float) -> np.ndarray:
        """Compound acceleration over one step cycle; the main peak sits at phase 0"""
        amp_scale = FAST_AMPLITUDE_SCALE if period_scale < 1 else 1.0
        fall = np.exp(-phase ** 2 / (2 * profile.fall_width ** 2))
        rise = np.exp(-(1.0 - phase) ** 2 / (2 * profile.rise_width ** 2))
        values = GRAVITY + main_amp * effect.main * amp_scale * (fall + rise)
        values += profile.sec_amp * effect.sec * amp_scale * _bump(phase, profile.sec_phase, 0.1)
        values -= profile.trough_amp * amp_scale * _bump(phase, profile.trough_phase, 0.08)

        start, end = TEXTURE_SPAN
        u = np.clip((phase - start) / (end - start), 0.0, 1.0)
        texture = sum(a * np.sin(2 * np.pi * (h + 1) * u + p) for h, (a, p) in enumerate(profile.harmonics))
        values += 0.6 * effect.texture * np.sin(np.pi * u) ** 2 * texture
        if effect.load_amp:
            values += effect.load_amp * _bump(phase, effect.load_phase, 0.1)
        return np.maximum(values, 0.0)

    def accel_walk(self, profile: SubjectProfile, pace: Pace, covariate: Covariate,
                   rng: np.random.Generator) -> List[AccelSample]:
        """One walk of tri-axial readings at 50 Hz with +-2 ms timestamp jitter"""
        effect = COVARIATE_EFFECTS[covariate]
        period_scale = FAST_PERIOD_SCALE if pace == Pace.FAST else 1.0
        period = profile.period_ms * period_scale * (1 + 0.01 * rng.standard_normal())
        walk_amp = profile.main_amp * (1 + 0.03 * rng.standard_normal())

        n = int(self.accel_duration_s * SAMPLING_RATE_HZ)
        step_ms = 1000.0 / SAMPLING_RATE_HZ
        t_ms = np.round(np.arange(n) * step_ms + rng.uniform(-2, 2, size=n)).astype(np.int64)
        t_ms -= t_ms[0]

        # cycle boundaries; the walk starts on the rise into a main peak
        n_cycles = int(np.ceil(t_ms[-1] / (0.9 * period))) + 3
        periods = period * (1 + 0.01 * rng.standard_normal(n_cycles))
        amplitudes = walk_amp * (1 + 0.02 * rng.standard_normal(n_cycles))
        start_phase = rng.uniform(0.7, 0.85)
        bounds = np.concatenate([[-start_phase * periods[0]], -start_phase * periods[0] + np.cumsum(periods)])
        cycle = np.searchsorted(bounds, t_ms, side='right') - 1
        phase = (t_ms - bounds[cycle]) / periods[cycle]

        compound = self.waveform(phase, profile, effect, amplitudes[cycle], period_scale)
        envelope = np.clip((RISE_PHASE - 0.02 - phase) / 0.06, 0.0, 1.0)
        smooth = ndimage.gaussian_filter1d(rng.standard_normal(n), 1.5)
        compound = np.maximum(compound + profile.noise_scale * envelope * smooth, 0.0)

        # sensor orientation wobbles; the magnitude is untouched
        wobble = 2 * np.pi * t_ms / (2 * period)
        theta = profile.tilt + 0.15 * np.sin(wobble + rng.uniform(0, 2 * np.pi))
        psi = rng.uniform(0, 2 * np.pi) + 0.1 * np.sin(0.5 * wobble)
        direction = np.column_stack([np.sin(theta) * np.cos(psi), np.sin(theta) * np.sin(psi), np.cos(theta)])
        xyz = compound[:, None] * direction
        return [AccelSample(int(t), float(x), float(y), float(z)) for t, (x, y, z) in zip(t_ms, xyz)]

    # ------------------------------------------------------------------
    # RGBD
    # ------------------------------------------------------------------

    def _pose(self, profile: SubjectProfile, effect: CovariateEffect, gait_phase: float,
              depth_mm: float, x_offset: float) -> List[Tuple[np.ndarray, np.ndarray, float, int]]:
        """Capsules (start, end, radius_mm, color index) in camera coordinates (mm, y down)"""
        H = profile.height_mm
        psi = gait_phase
        pelvis = np.array([
            x_offset + profile.sway_mm * np.sin(psi),
            CAMERA_HEIGHT_MM - 0.53 * H + profile.bob_mm * np.cos(2 * psi),
            depth_mm,
        ])

        def limb(origin, angle, length):
            return origin + length * np.array([0.0, np.cos(angle), -np.sin(angle)])

        capsules = []
        neck = pelvis + np.array([0.0, -0.30 * H, 0.0])
        capsules.append((pelvis, neck, 0.36 * profile.shoulder_mm, 0))
        head = neck + np.array([0.0, -0.08 * H, 0.0])
        capsules.append((head, head + np.array([0.0, -0.01, 0.0]), 0.065 * H, 2))

        for side in (-1, 1):
            offset = 0.0 if side < 0 else np.pi
            hip = pelvis + np.array([side * profile.hip_mm / 2, 0.0, 0.0])
            thigh = profile.leg_amp * np.sin(psi + offset)
            knee_flex = profile.knee_amp * max(0.0, np.sin(psi + offset + 1.2))
            knee = limb(hip, thigh, 0.245 * H)
            ankle = limb(knee, thigh - knee_flex, 0.246 * H)
            capsules.append((hip, knee, 0.04 * H, 1))
            capsules.append((knee, ankle, 0.03 * H, 1))

            arm_scale = effect.arm_left if side < 0 else effect.arm_right
            shoulder = pelvis + np.array([side * profile.shoulder_mm / 2, -0.28 * H, 0.0])
            swing = profile.arm_amp * arm_scale * np.sin(psi + np.pi - offset)
            flex = profile.elbow_flex
            holds_prop = effect.prop is not None and effect.prop_side == side
            if holds_prop and effect.prop == "book":
                swing, flex = 0.2 + swing, 1.4
            elif arm_scale <= 0.1:
                flex = 0.6
            elbow = limb(shoulder, swing, 0.186 * H)
            wrist = limb(elbow, swing + flex, 0.146 * H)
            capsules.append((shoulder, elbow, 0.026 * H, 0))
            capsules.append((elbow, wrist, 0.022 * H, 2))

            if holds_prop and effect.prop == "book":
                front = wrist + np.array([0.0, 0.0, -50.0])
                capsules.append((front - [100.0, 0, 0], front + [100.0, 0, 0], 100.0, 1))
            elif holds_prop and effect.prop == "bag":
                bag_swing = 0.25 * np.sin(psi - 0.8)
                capsules.append((wrist, limb(wrist, bag_swing, 350.0), 100.0, 1))
        return capsules

    def _draw_capsule(self, color, zbuf, start, end, radius_mm, base_color, profile):
        height, width = zbuf.shape
        f = self.focal_px
        cx, cy = width / 2.0, height / 2.0
        (x1, y1, z1), (x2, y2, z2) = start, end
        a = np.array([cx + f * x1 / z1, cy + f * y1 / z1])
        b = np.array([cx + f * x2 / z2, cy + f * y2 / z2])
        r1, r2 = f * radius_mm / z1, f * radius_mm / z2
        r_max = max(r1, r2)

        x0, x_end = int(max(0, np.floor(min(a[0], b[0]) - r_max))), int(min(width, np.ceil(max(a[0], b[0]) + r_max) + 1))
        y0, y_end = int(max(0, np.floor(min(a[1], b[1]) - r_max))), int(min(height, np.ceil(max(a[1], b[1]) + r_max) + 1))
        if x0 >= x_end or y0 >= y_end:
            return

        ys, xs = np.mgrid[y0:y_end, x0:x_end].astype(np.float64)
        axis = b - a
        length2 = float(axis @ axis)
        t = np.clip(((xs - a[0]) * axis[0] + (ys - a[1]) * axis[1]) / length2, 0.0, 1.0) if length2 > 0 \
            else np.zeros_like(xs)
        px = xs - (a[0] + t * axis[0])
        py = ys - (a[1] + t * axis[1])
        dist = np.hypot(px, py)
        radius = r1 + t * (r2 - r1)
        inside = dist <= radius

        bulge = np.sqrt(np.clip(1.0 - (dist / np.maximum(radius, 1e-9)) ** 2, 0.0, 1.0))
        depth = z1 + t * (z2 - z1) - 0.5 * radius_mm * bulge
        region = zbuf[y0:y_end, x0:x_end]
        visible = inside & (depth < region)
        if not visible.any():
            return

        # texture is fixed in limb coordinates so it moves with the limb
        along_mm = t * np.linalg.norm(np.asarray(end) - np.asarray(start))
        norm = np.sqrt(length2) if length2 > 0 else 1.0
        across_mm = (px * -axis[1] + py * axis[0]) / norm * depth / f
        lam = profile.texture_mm
        pattern = 0.5 + 0.25 * np.sin(2 * np.pi * along_mm / lam) + 0.25 * np.cos(2 * np.pi * across_mm / (0.6 * lam))
        shade = 0.55 + 0.45 * pattern
        region[visible] = depth[visible]
        patch = color[y0:y_end, x0:x_end]
        patch[visible] = np.asarray(base_color, dtype=np.float64) * shade[visible, None]

    def rgbd_walk(self, profile: SubjectProfile, pace: Pace, covariate: Covariate,
                  rng: np.random.Generator) -> List[RgbdFrame]:
        """
        Frames of the figure approaching the camera over a static textured background

        The pelvis moves at constant speed from about 5 m to about 1 m over the whole sequence,
        so the frame count sets the walking speed (45 frames at 15 fps is about 1.3 m/s).
        """
        effect = COVARIATE_EFFECTS[covariate]
        height, width = self.frame_size
        period_scale = FAST_PERIOD_SCALE if pace == Pace.FAST else 1.0
        period_s = profile.period_ms * period_scale * (1 + 0.01 * rng.standard_normal()) / 1000.0
        start_depth = profile.start_depth_mm + rng.uniform(-150, 150)
        end_depth = profile.end_depth_mm + rng.uniform(-30, 30)
        speed = (start_depth - end_depth) / ((self.n_frames - 1) / self.fps)
        x_offset = rng.uniform(-150, 150)
        phase0 = rng.uniform(0, 2 * np.pi)

        background = ndimage.gaussian_filter(rng.standard_normal((height, width, 3)), sigma=(3, 3, 0))
        background = 120 + 60 * background / max(float(np.abs(background).max()), 1e-9)

        frames = []
        for index in range(self.n_frames):
            t_s = index / self.fps
            color = background.copy()
            zbuf = np.full((height, width), np.inf)
            capsules = self._pose(profile, effect, phase0 + 2 * np.pi * t_s / period_s,
                                  start_depth - speed * t_s, x_offset)
            for start, end, radius_mm, color_index in capsules:
                self._draw_capsule(color, zbuf, start, end, radius_mm, profile.colors[color_index], profile)

            color = np.clip(np.round(color + rng.normal(0, 1.0, size=color.shape)), 0, 255).astype(np.uint8)
            depth = np.where(np.isfinite(zbuf), np.clip(np.round(zbuf), 1, DEPTH_MAX), 0).astype(np.uint16)
            depth = depth[::self.depth_stride, ::self.depth_stride]
            frames.append(RgbdFrame(color=color, depth=depth, t_ms=int(round(1000 * t_s))))
        return frames

    # ------------------------------------------------------------------
    # Batches
    # ------------------------------------------------------------------

    def plan(self, n_subjects: int, samples_per_subject: int, paces: Sequence[Pace],
             covariates: Sequence[Covariate]) -> List[Tuple[int, int, Pace, Covariate]]:
        """(subject index, sample index, pace, covariate) for every sample, conditions cycled"""
        if samples_per_subject < 1:
            raise ValidationError(f"samples_per_subject must be positive, got {samples_per_subject}")
        paces = list(paces) or [Pace.NORMAL]
        covariates = list(covariates) or [Covariate.NONE]
        return [
            (i, j, paces[j % len(paces)], covariates[(j // len(paces)) % len(covariates)])
            for i in range(n_subjects)
            for j in range(samples_per_subject)
        ]

    def generate_samples(
        self,
        n_subjects: int,
        samples_per_subject: int,
        paces: Sequence[Pace] = (Pace.NORMAL,),
        covariates: Sequence[Covariate] = (Covariate.NONE,),
        accel: bool = True,
        rgbd: bool = True,
        threads: int = THREADS
    ) -> List[LabeledSample]:
        """
        Generate a dataset in memory

        Args:
            n_subjects: Number of distinct subjects (>= 2)
            samples_per_subject: Walks per subject
            paces: Paces cycled over each subject's walks
            covariates: Covariates cycled over each subject's walks
            accel: Generate acceleration sequences
            rgbd: Generate RGBD frame sequences

        Returns:
            LabeledSample list in subject-major order
        """
        profiles = self.make_profiles(n_subjects)
        jobs = self.plan(n_subjects, samples_per_subject, paces, covariates)
        _, sample_root = np.random.SeedSequence(self.seed).spawn(2)
        subject_seqs = sample_root.spawn(n_subjects)
        sample_seqs = [seq.spawn(samples_per_subject) for seq in subject_seqs]

        def make(job):
            i, j, pace, covariate = job
            accel_seq, rgbd_seq = sample_seqs[i][j].spawn(2)
            profile = profiles[i]
            return LabeledSample(
                sample_id=f"{profile.subject_id}_s{j:03d}",
                subject_id=profile.subject_id,
                pace=pace,
                covariate=covariate,
                accel=self.accel_walk(profile, pace, covariate, np.random.default_rng(accel_seq)) if accel else None,
                frames=self.rgbd_walk(profile, pace, covariate, np.random.default_rng(rgbd_seq)) if rgbd else None,
            )

        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            samples = list(pool.map(make, jobs))
        logger.info(f"📊 Generated {len(samples)} samples for {n_subjects} subjects (seed {self.seed})")
        return samples

    def save_dataset(self, samples: Sequence[LabeledSample], out_dir) -> DatasetManifest:
        """Write accel CSVs, PPM/PGM frames and the manifest under `out_dir`"""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        subjects: Dict[str, List[SampleRecord]] = {}
        for sample in samples:
            accel_path = None
            if sample.accel is not None:
                accel_path = f"accel/{sample.sample_id}.csv"
                write_accel_csv(out_dir / accel_path, sample.accel)
            rgbd_record = None
            if sample.frames is not None:
                rgbd_record = write_rgbd_sequence(sample.frames, out_dir / "rgbd" / sample.sample_id, "frame",
                                                  root=out_dir)
            subjects.setdefault(sample.subject_id, []).append(SampleRecord(
                sample_id=sample.sample_id,
                accel=accel_path,
                rgbd=rgbd_record,
                pace=sample.pace,
                covariate=sample.covariate,
            ))

        manifest = DatasetManifest(
            name=f"synthetic-{self.seed}",
            seed=self.seed,
            subjects=[SubjectRecord(subject_id=s, samples=records) for s, records in subjects.items()],
        )
        path = write_manifest(out_dir / MANIFEST_NAME, manifest)
        logger.info(f"💾 Wrote {len(samples)} samples to {out_dir} (manifest {path.name})")
        return manifest


def generate_samples(
    n_subjects: int,
    samples_per_subject: int,
    paces: Sequence[Pace] = (Pace.NORMAL,),
    covariates: Sequence[Covariate] = (Covariate.NONE,),
    seed: int = 7,
    accel: bool = True,
    rgbd: bool = True,
    threads: int = THREADS,
    **options
) -> List[LabeledSample]:
    """In-memory synthetic dataset; `options` go to SyntheticGaitGenerator"""
    generator = SyntheticGaitGenerator(seed=seed, **options)
    return generator.generate_samples(n_subjects, samples_per_subject, paces, covariates,
                                      accel=accel, rgbd=rgbd, threads=threads)


def generate_dataset(
    n_subjects: int,
    samples_per_subject: int,
    paces: Sequence[Pace] = (Pace.NORMAL,),
    covariates: Sequence[Covariate] = (Covariate.NONE,),
    seed: int = 7,
    out_dir=None,
    accel: bool = True,
    rgbd: bool = True,
    threads: int = THREADS,
    **options
) -> DatasetManifest:
    """Generate a synthetic dataset and write it to `out_dir`"""
    if out_dir is None:
        raise ValidationError("generate_dataset needs an output directory")
    generator = SyntheticGaitGenerator(seed=seed, **options)
    samples = generator.generate_samples(n_subjects, samples_per_subject, paces, covariates,
                                         accel=accel, rgbd=rgbd, threads=threads)
    return generator.save_dataset(samples, out_dir)

"""
RGBD pipeline
Person masks from depth, dense motion on color frames, and mask-constrained 3D point tracks
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Protocol, Sequence, Tuple

import numpy as np
from scipy import ndimage

from config import (
    DEPTH_MAX, DEPTH_THRESHOLD, FLOW_ITERATIONS, FLOW_LEVELS, FLOW_WINDOW, MAX_STEP_PX,
    MIN_COMPONENT_PX, STATIC_MIN_TRAVEL_PX, TRACK_STRIDE_PX, TRAJECTORY_LENGTH
)
from models import DimensionError, RgbdFrame, ValidationError

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True, eq=False)
class PersonMask:
    """Foreground grid at color resolution, with the resized depth it was cut from"""
    grid: np.ndarray
    frame_index: int = 0
    depth: Optional[np.ndarray] = None

    @property
    def area(self) -> int:
        return int(self.grid.sum())

    @property
    def is_empty(self) -> bool:
        return not self.grid.any()


@dataclass(frozen=True, eq=False)
class MotionField:
    """Per-pixel displacement (pixels) from frame t to frame t+1"""
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        if np.shape(self.u) != np.shape(self.v) or np.ndim(self.u) != 2:
            raise DimensionError("u and v planes must be equal-sized grids")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.u.shape


@dataclass(frozen=True, eq=False)
class Trajectory3D:
    """L+1 tracked points (x, y, depth) starting at `start_frame`"""
    points: np.ndarray
    start_frame: int = 0

    def __post_init__(self):
        points = np.array(self.points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 3 or len(points) < 2:
            raise DimensionError(f"trajectory points must be (L+1) x 3, got {points.shape}")
        points.setflags(write=False)
        object.__setattr__(self, 'points', points)

    @property
    def length(self) -> int:
        return len(self.points) - 1


# ============================================================================
# segmentMask
# ============================================================================

def resize_depth(depth: np.ndarray, color_dims: Tuple[int, int]) -> np.ndarray:
    """Bicubic resize of a depth grid onto the color grid (pixel-center aligned)"""
    depth = np.asarray(depth, dtype=np.float64)
    out_h, out_w = color_dims
    in_h, in_w = depth.shape
    if (in_h, in_w) == (out_h, out_w):
        return depth.copy()
    rows = (np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5
    cols = (np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5
    grid_r, grid_c = np.meshgrid(rows, cols, indexing='ij')
    resized = ndimage.map_coordinates(depth, [grid_r, grid_c], order=3, mode='nearest')
    return np.clip(resized, 0, DEPTH_MAX)


def remove_small_components(mask: np.ndarray, min_pixels: int) -> np.ndarray:
    """Drop 8-connected components smaller than `min_pixels`"""
    labels, count = ndimage.label(mask, structure=EIGHT_CONNECTED)
    if count == 0:
        return mask.copy()
    sizes = np.bincount(labels.ravel())
    keep = sizes >= min_pixels
    keep[0] = False
    return keep[labels]


def segment_mask(
    depth: np.ndarray,
    color_dims: Tuple[int, int],
    threshold: float = DEPTH_THRESHOLD,
    min_component_px: int = MIN_COMPONENT_PX,
    frame_index: int = 0
) -> PersonMask:
    """
    Person mask from a person-oriented depth grid

    Resize to the color grid (bicubic), binarize at `threshold`, fill holes,
    remove components smaller than `min_component_px`. An empty mask tells the
    caller to skip the frame.
    """
    depth = np.asarray(depth)
    if depth.ndim != 2:
        raise DimensionError(f"depth must be a 2D grid, got {depth.shape}")
    if depth.size and (depth.min() < 0 or depth.max() > DEPTH_MAX):
        raise ValidationError(f"depth values must lie in [0, {DEPTH_MAX}]")

    resized = resize_depth(depth, color_dims)
    grid = resized > threshold
    grid = ndimage.binary_fill_holes(grid)
    grid = remove_small_components(grid, min_component_px)

    if not grid.any():
        logger.debug(f"Frame {frame_index}: empty person mask")
    return PersonMask(grid=grid, frame_index=frame_index, depth=resized)


# ============================================================================
# computMotion
# ============================================================================

class MotionEstimator(Protocol):
    """Dense motion between consecutive color frames"""

    def estimate(self, prev: RgbdFrame, next: RgbdFrame, index: int) -> MotionField:
        ...


def _gray(image) -> np.ndarray:
    if isinstance(image, RgbdFrame):
        return image.gray()
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 3:
        return image @ np.array([0.299, 0.587, 0.114])
    return image


def _downsample(image: np.ndarray) -> np.ndarray:
    return ndimage.gaussian_filter(image, 1.0, mode='nearest')[::2, ::2]


def _upsample_flow(flow: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    """Bilinear upsampling of a coarse flow plane, values doubled to the finer pixel scale"""
    rows = (np.arange(shape[0]) + 0.5) / 2.0 - 0.5
    cols = (np.arange(shape[1]) + 0.5) / 2.0 - 0.5
    grid_r, grid_c = np.meshgrid(rows, cols, indexing='ij')
    return 2.0 * ndimage.map_coordinates(flow, [grid_r, grid_c], order=1, mode='nearest')


class PyramidalFlowEstimator:
    """
    Coarse-to-fine dense Lucas-Kanade flow

    Each level warps the second image by the current estimate and solves the 2x2
    brightness-constancy system over a window around every pixel.
    """

    def __init__(self, levels: int = FLOW_LEVELS, window: int = FLOW_WINDOW, iterations: int = FLOW_ITERATIONS):
        if levels < 1 or window < 3 or iterations < 1:
            raise ValidationError("levels >= 1, window >= 3 and iterations >= 1 are required")
        self.levels = levels
        self.window = window
        self.iterations = iterations

    def _refine(self, first: np.ndarray, second: np.ndarray, u: np.ndarray, v: np.ndarray):
        rows, cols = np.indices(first.shape, dtype=np.float64)
        for _ in range(self.iterations):
            warped = ndimage.map_coordinates(second, [rows + v, cols + u], order=1, mode='nearest')
            average = 0.5 * (first + warped)
            ix = ndimage.sobel(average, axis=1, mode='nearest') / 8.0
            iy = ndimage.sobel(average, axis=0, mode='nearest') / 8.0
            it = warped - first

            sxx = ndimage.uniform_filter(ix * ix, self.window, mode='nearest')
            sxy = ndimage.uniform_filter(ix * iy, self.window, mode='nearest')
            syy = ndimage.uniform_filter(iy * iy, self.window, mode='nearest')
            sxt = ndimage.uniform_filter(ix * it, self.window, mode='nearest')
            syt = ndimage.uniform_filter(iy * it, self.window, mode='nearest')

            det = sxx * syy - sxy * sxy
            trace = sxx + syy
            solvable = det > 1e-6 * (trace * trace + 1e-12)
            safe = np.where(solvable, det, 1.0)
            du = np.where(solvable, (-syy * sxt + sxy * syt) / safe, 0.0)
            dv = np.where(solvable, (sxy * sxt - sxx * syt) / safe, 0.0)
            u = u + du
            v = v + dv
        return u, v

    def flow(self, prev, next) -> MotionField:
        first = _gray(prev)
        second = _gray(next)
        if first.shape != second.shape:
            raise DimensionError(f"frames differ in size: {first.shape} vs {second.shape}")

        pyramid = [(first, second)]
        for _ in range(self.levels - 1):
            a, b = pyramid[-1]
            if min(a.shape) < 2 * self.window:
                break
            pyramid.append((_downsample(a), _downsample(b)))

        u = np.zeros(pyramid[-1][0].shape)
        v = np.zeros_like(u)
        for level in range(len(pyramid) - 1, -1, -1):
            a, b = pyramid[level]
            if u.shape != a.shape:
                u = _upsample_flow(u, a.shape)
                v = _upsample_flow(v, a.shape)
            u, v = self._refine(a, b, u, v)
        return MotionField(u=u, v=v)

    def estimate(self, prev: RgbdFrame, next: RgbdFrame, index: int) -> MotionField:
        return self.flow(prev, next)


class PrecomputedFlowEstimator:
    """Serves flow planes ingested from FLO1 files, one per consecutive frame pair"""

    def __init__(self, flows: Sequence[Tuple[np.ndarray, np.ndarray]]):
        self.flows = list(flows)

    def estimate(self, prev: RgbdFrame, next: RgbdFrame, index: int) -> MotionField:
        if index >= len(self.flows):
            raise ValidationError(f"no precomputed flow for frame pair {index}")
        u, v = self.flows[index]
        field = MotionField(u=np.asarray(u, dtype=np.float64), v=np.asarray(v, dtype=np.float64))
        if field.shape != prev.color_dims:
            raise DimensionError(f"flow {field.shape} does not match color frame {prev.color_dims}")
        return field


def estimate_motion(prev, next, estimator: Optional[PyramidalFlowEstimator] = None) -> MotionField:
    """Dense displacement field from `prev` to `next` (reference estimator by default)"""
    return (estimator or PyramidalFlowEstimator()).flow(prev, next)


# ============================================================================
# calcTrajectories
# ============================================================================

def _seed_points(mask: PersonMask, occupied: set, stride: int) -> np.ndarray:
    """Grid points inside the mask whose stride cell holds no live track"""
    height, width = mask.grid.shape
    offset = stride // 2
    ys, xs = np.meshgrid(np.arange(offset, height, stride), np.arange(offset, width, stride), indexing='ij')
    ys = ys.ravel()
    xs = xs.ravel()
    inside = mask.grid[ys, xs] & (mask.depth[ys, xs] > 0)
    free = np.array([(y // stride, x // stride) not in occupied for y, x in zip(ys, xs)], dtype=bool) \
        if occupied else np.ones(len(ys), dtype=bool)
    keep = inside & free
    return np.column_stack([xs[keep], ys[keep]]).astype(np.float64)


def calc_trajectories(
    frames: Sequence[RgbdFrame],
    masks: Sequence[PersonMask],
    fields: Sequence[MotionField],
    L: int = TRAJECTORY_LENGTH,
    stride: int = TRACK_STRIDE_PX,
    max_step: float = MAX_STEP_PX,
    min_travel: float = STATIC_MIN_TRAVEL_PX,
    prune_static: bool = True
) -> List[Trajectory3D]:
    """
    Track densely seeded mask points through the motion fields

    Tracks advance by bilinear sampling of the 3x3-median-filtered field and read depth at
    the nearest pixel. A track dies when it leaves the mask, lands on invalid depth or moves
    more than `max_step` pixels in one frame; it is emitted once it holds L+1 points.
    """
    if len(masks) != len(frames) or len(fields) != max(len(frames) - 1, 0):
        raise DimensionError(f"{len(frames)} frames need {len(frames)} masks and "
                             f"{max(len(frames) - 1, 0)} motion fields")
    if L < 1:
        raise ValidationError(f"trajectory length must be positive, got {L}")

    emitted: List[Trajectory3D] = []
    positions = np.empty((0, 2))
    histories: List[list] = []
    starts: List[int] = []
    static_pruned = 0

    for t, mask in enumerate(masks):
        height, width = mask.grid.shape
        # seed only where a new track can still reach L+1 points
        if len(frames) - t >= L + 1 and not mask.is_empty:
            occupied = {(int(y) // stride, int(x) // stride) for x, y in positions}
            seeds = _seed_points(mask, occupied, stride)
            if len(seeds):
                depths = mask.depth[seeds[:, 1].astype(int), seeds[:, 0].astype(int)]
                positions = np.vstack([positions, seeds])
                histories.extend([[(x, y, z)] for (x, y), z in zip(seeds, depths)])
                starts.extend([t] * len(seeds))

        if t == len(masks) - 1 or not len(positions):
            continue

        field = fields[t]
        if field.shape != (height, width):
            raise DimensionError(f"motion field {field.shape} does not match frame {(height, width)}")
        u = ndimage.median_filter(field.u, size=3, mode='nearest')
        v = ndimage.median_filter(field.v, size=3, mode='nearest')
        coords = [positions[:, 1], positions[:, 0]]
        step = np.column_stack([
            ndimage.map_coordinates(u, coords, order=1, mode='nearest'),
            ndimage.map_coordinates(v, coords, order=1, mode='nearest'),
        ])
        moved = positions + step

        nxt = masks[t + 1]
        cols = np.rint(moved[:, 0]).astype(np.int64)
        rows = np.rint(moved[:, 1]).astype(np.int64)
        alive = (np.hypot(step[:, 0], step[:, 1]) <= max_step) \
            & (cols >= 0) & (cols < width) & (rows >= 0) & (rows < height)
        alive[alive] &= nxt.grid[rows[alive], cols[alive]]
        depth_next = np.zeros(len(moved))
        depth_next[alive] = nxt.depth[rows[alive], cols[alive]]
        alive &= depth_next > 0

        kept_positions = []
        kept_histories = []
        kept_starts = []
        for i in np.flatnonzero(alive):
            history = histories[i]
            history.append((moved[i, 0], moved[i, 1], depth_next[i]))
            if len(history) < L + 1:
                kept_positions.append(moved[i])
                kept_histories.append(history)
                kept_starts.append(starts[i])
                continue
            points = np.asarray(history)
            travel = np.hypot(*np.diff(points[:, :2], axis=0).T).sum()
            if prune_static and travel < min_travel:
                static_pruned += 1
                continue
            emitted.append(Trajectory3D(points=points, start_frame=starts[i]))

        positions = np.asarray(kept_positions).reshape(-1, 2)
        histories = kept_histories
        starts = kept_starts

    logger.debug(f"Tracked {len(emitted)} trajectories ({static_pruned} static pruned)")
    return emitted


def extract_trajectories(
    frames: Sequence[RgbdFrame],
    estimator: Optional[MotionEstimator] = None,
    L: int = TRAJECTORY_LENGTH,
    threshold: float = DEPTH_THRESHOLD,
    min_component_px: int = MIN_COMPONENT_PX,
    stride: int = TRACK_STRIDE_PX
) -> List[Trajectory3D]:
    """segmentMask + computMotion + calcTrajectories over one RGBD sequence"""
    frames = list(frames)
    if len(frames) < L + 1:
        logger.warning(f"⚠️ {len(frames)} frames cannot hold a {L}-step trajectory")
        return []
    estimator = estimator or PyramidalFlowEstimator()
    masks = [
        segment_mask(f.depth, f.color_dims, threshold=threshold, min_component_px=min_component_px, frame_index=i)
        for i, f in enumerate(frames)
    ]
    fields = [estimator.estimate(a, b, i) for i, (a, b) in enumerate(zip(frames[:-1], frames[1:]))]
    trajectories = calc_trajectories(frames, masks, fields, L=L, stride=stride)
    empty = sum(m.is_empty for m in masks)
    logger.debug(f"📊 {len(trajectories)} trajectories from {len(frames)} frames ({empty} empty masks)")
    return trajectories

"""
Dataset ingestion for gaitforge
Reads and writes acceleration CSVs, PPM/PGM frame pairs, FLO1 flow files and JSON manifests,
and exports per-sample extraction results to Parquet
"""
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Tuple

import numpy as np
import pandas as pd
import pyarrow as pa
import pyarrow.parquet as pq
from PIL import Image
from pydantic import ValidationError as SchemaError

from config import (
    ACCEL_CSV_HEADER, COMPRESSION, DEPTH_MAX, MANIFEST_NAME, RATE_JITTER_TOLERANCE,
    ROW_GROUP_SIZE, SAMPLING_RATE_HZ, THREADS
)
from models import (
    AccelSample, DatasetError, DatasetManifest, DimensionError, FormatError, FrameRecord,
    LabeledSample, RgbdFrame, RgbdRecord, SampleRecord, ValidationError
)

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

FLOW_MAGIC = b"FLO1"


# ============================================================================
# Acceleration CSV
# ============================================================================

def load_accel_csv(path) -> List[AccelSample]:
    """
    Load a `t_ms,ax,ay,az` acceleration file

    Raises:
        FormatError: bad header or malformed row (with its line number)
        ValidationError: timestamps not strictly increasing
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"acceleration file not found: {path}")

    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise FormatError("missing header row", path=path, line=1)
    except pd.errors.ParserError as e:
        raise FormatError(f"malformed row ({e})", path=path)

    if [c.strip() for c in df.columns] != ACCEL_CSV_HEADER:
        raise FormatError(f"expected header {','.join(ACCEL_CSV_HEADER)}", path=path, line=1)

    if df.empty:
        return []

    numeric = df.apply(lambda col: pd.to_numeric(col.str.strip(), errors='coerce'))
    bad_rows = numeric.isna().any(axis=1) | ~np.isfinite(numeric.to_numpy(dtype=np.float64)).all(axis=1)
    if bad_rows.any():
        # header is line 1, first data row is line 2
        raise FormatError("malformed row", path=path, line=int(np.flatnonzero(bad_rows.to_numpy())[0]) + 2)

    t_ms = numeric['t_ms'].to_numpy(dtype=np.float64)
    non_integral = t_ms != np.round(t_ms)
    if non_integral.any():
        raise FormatError("t_ms must be an integer", path=path, line=int(np.flatnonzero(non_integral)[0]) + 2)

    steps = np.diff(t_ms)
    if np.any(steps <= 0):
        row = int(np.flatnonzero(steps <= 0)[0]) + 3
        raise ValidationError(f"{path}: line {row}: timestamps must be strictly increasing")

    values = numeric[['ax', 'ay', 'az']].to_numpy(dtype=np.float64)
    return [
        AccelSample(int(t), float(x), float(y), float(z))
        for t, (x, y, z) in zip(t_ms, values)
    ]


def write_accel_csv(path, samples: List[AccelSample]) -> Path:
    """Write samples with round-trip float precision and LF line endings"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame(
        {
            't_ms': [s.t_ms for s in samples],
            'ax': [s.ax for s in samples],
            'ay': [s.ay for s in samples],
            'az': [s.az for s in samples],
        },
        columns=ACCEL_CSV_HEADER
    )
    df = df.astype({'t_ms': np.int64, 'ax': np.float64, 'ay': np.float64, 'az': np.float64})
    df.to_csv(path, index=False, lineterminator='\n')
    return path


def accel_array(samples: List[AccelSample]) -> np.ndarray:
    """(n, 4) array of t_ms, ax, ay, az"""
    if not samples:
        return np.empty((0, 4))
    return np.array([(s.t_ms, s.ax, s.ay, s.az) for s in samples], dtype=np.float64)


def infer_rate_hz(samples: List[AccelSample], nominal_hz: float = SAMPLING_RATE_HZ) -> float:
    """
    Infer the sampling rate from the median period

    Raises:
        ValidationError: any period deviates more than the jitter tolerance from nominal
    """
    if len(samples) < 2:
        return float(nominal_hz)
    periods = np.diff([s.t_ms for s in samples]).astype(np.float64)
    nominal = 1000.0 / nominal_hz
    worst = np.max(np.abs(periods - nominal)) / nominal
    if worst > RATE_JITTER_TOLERANCE + 1e-12:
        raise ValidationError(
            f"sampling jitter {worst:.0%} exceeds ±{RATE_JITTER_TOLERANCE:.0%} of the {nominal_hz:g} Hz period"
        )
    return 1000.0 / float(np.median(periods))


# ============================================================================
# PPM / PGM frames
# ============================================================================

_PNM_HEADER = re.compile(rb'(P[1-7])(?:(?:\s|#[^\r\n]*[\r\n])+(\d+)){3}')


def _pnm_maxval(path: Path) -> Tuple[bytes, int]:
    """Magic number and maxval; Pillow decodes the raster but does not report maxval"""
    with open(path, 'rb') as f:
        head = f.read(1024)
    match = _PNM_HEADER.match(head)
    if match is None:
        raise FormatError("unreadable PNM header", path=path)
    return match.group(1), int(match.group(2))


def _open_pnm(path: Path, magic: bytes) -> Tuple[Image.Image, int]:
    found, maxval = _pnm_maxval(path)
    if found != magic:
        raise FormatError(f"expected {magic.decode()} image, got {found!r}", path=path)
    try:
        image = Image.open(path, formats=['PPM'])
        image.load()
    except (OSError, ValueError, SyntaxError) as e:
        raise FormatError(f"unreadable raster: {e}", path=path)
    return image, maxval


def read_ppm(path) -> np.ndarray:
    """Binary P6 color image, maxval 255 -> (H, W, 3) uint8"""
    path = Path(path)
    image, maxval = _open_pnm(path, b'P6')
    if maxval != 255:
        raise FormatError(f"color maxval must be 255, got {maxval}", path=path)
    return np.asarray(image.convert('RGB'), dtype=np.uint8).copy()


def read_pgm(path) -> np.ndarray:
    """Binary P5 depth image, maxval <= 8191, big-endian 16-bit -> (H, W) uint16"""
    path = Path(path)
    image, maxval = _open_pnm(path, b'P5')
    if maxval > DEPTH_MAX:
        raise FormatError(f"depth maxval {maxval} exceeds {DEPTH_MAX}", path=path)
    # Pillow stretches samples to 255 (mode L) or 65535 (mode I)
    full_scale = 65535 if image.mode == 'I' else 255
    raster = np.asarray(image, dtype=np.float64)
    return np.rint(raster * maxval / full_scale).astype(np.uint16)


def write_ppm(path, color: np.ndarray) -> Path:
    path = Path(path)
    Image.fromarray(np.asarray(color, dtype=np.uint8)).save(path, format='PPM')
    return path


def write_pgm(path, depth: np.ndarray) -> Path:
    """16-bit P5 at maxval 8191; Pillow's own writer always declares 65535"""
    path = Path(path)
    depth = np.asarray(depth)
    if depth.size and (depth.min() < 0 or depth.max() > DEPTH_MAX):
        raise ValidationError(f"depth values must lie in [0, {DEPTH_MAX}]")
    height, width = depth.shape
    raster = Image.fromarray(depth.astype(np.int32)).tobytes('raw', 'I;16B')
    path.write_bytes(f"P5\n{width} {height}\n{DEPTH_MAX}\n".encode('ascii') + raster)
    return path


def load_rgbd_sequence(entry: RgbdRecord, root: Path = Path('.')) -> List[RgbdFrame]:
    """
    Load the frame pairs of one manifest entry

    Raises:
        DatasetError: a color or depth file of some frame is missing
        ValidationError: color/depth timestamps disagree at some frame
        FormatError: malformed or out-of-range frame file
    """
    root = Path(root)
    frames = []
    for index, record in enumerate(entry.frames):
        color_path = root / record.color
        depth_path = root / record.depth
        for member, member_path in (('color', color_path), ('depth', depth_path)):
            if not member_path.exists():
                raise DatasetError(f"frame {index}: missing {member} file {member_path}")
        if record.color_t_ms != record.depth_t_ms:
            raise ValidationError(
                f"frame {index}: color timestamp {record.color_t_ms} != depth timestamp {record.depth_t_ms}"
            )
        try:
            frames.append(RgbdFrame(read_ppm(color_path), read_pgm(depth_path), record.color_t_ms))
        except FormatError as e:
            raise FormatError(str(e), frame_index=index)

    frames.sort(key=lambda f: f.t_ms)
    if frames:
        dims = {(f.color.shape, f.depth.shape) for f in frames}
        if len(dims) > 1:
            raise DimensionError("frames of one sequence must share color and depth dimensions")
    return frames


def write_rgbd_sequence(frames: List[RgbdFrame], directory, prefix: str, root=None) -> RgbdRecord:
    """Write frame pairs as PPM/PGM files; returned paths are relative to `root` (default: `directory`'s parent)"""
    directory = Path(directory)
    root = Path(root) if root is not None else directory.parent
    relative = directory.resolve().relative_to(root.resolve()).as_posix()
    directory.mkdir(parents=True, exist_ok=True)
    records = []
    for index, frame in enumerate(frames):
        color_name = f"{prefix}_{index:04d}.ppm"
        depth_name = f"{prefix}_{index:04d}.pgm"
        write_ppm(directory / color_name, frame.color)
        write_pgm(directory / depth_name, frame.depth)
        records.append(FrameRecord(
            color=f"{relative}/{color_name}",
            depth=f"{relative}/{depth_name}",
            color_t_ms=frame.t_ms,
            depth_t_ms=frame.t_ms,
        ))
    return RgbdRecord(frames=records)


# ============================================================================
# Precomputed flow (FLO1)
# ============================================================================

def write_flow(path, u: np.ndarray, v: np.ndarray) -> Path:
    """FLO1 magic, uint32 width and height, then float32 u-plane and v-plane (little-endian)"""
    u = np.asarray(u, dtype='<f4')
    v = np.asarray(v, dtype='<f4')
    if u.shape != v.shape or u.ndim != 2:
        raise DimensionError("u and v planes must be equal-sized grids")
    height, width = u.shape
    path = Path(path)
    path.write_bytes(FLOW_MAGIC + np.array([width, height], dtype='<u4').tobytes() + u.tobytes() + v.tobytes())
    return path


def load_flow(path) -> Tuple[np.ndarray, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"flow file not found: {path}")
    data = path.read_bytes()
    if data[:4] != FLOW_MAGIC:
        raise FormatError("missing FLO1 magic", path=path)
    width, height = np.frombuffer(data, dtype='<u4', count=2, offset=4)
    count = int(width) * int(height)
    if len(data) != 12 + 8 * count:
        raise FormatError("flow payload size does not match header", path=path)
    planes = np.frombuffer(data, dtype='<f4', count=2 * count, offset=12).astype(np.float64)
    return planes[:count].reshape(height, width), planes[count:].reshape(height, width)


# ============================================================================
# Manifest
# ============================================================================

def _referenced_paths(manifest: DatasetManifest) -> List[str]:
    paths = []
    for _, sample in manifest.iter_samples():
        if sample.accel:
            paths.append(sample.accel)
        if sample.rgbd:
            for frame in sample.rgbd.frames:
                paths.extend([frame.color, frame.depth])
            paths.extend(sample.rgbd.flow or [])
    return paths


def load_manifest(path) -> DatasetManifest:
    """
    Load and validate a dataset manifest

    Rejects duplicate ids and any dangling path before pipeline stages run.
    """
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    if not path.exists():
        raise DatasetError(f"manifest not found: {path}")
    try:
        manifest = DatasetManifest.model_validate_json(path.read_text())
    except SchemaError as e:
        raise ValidationError(f"{path}: invalid manifest: {e}")

    missing = [p for p in _referenced_paths(manifest) if not (path.parent / p).exists()]
    if missing:
        raise DatasetError(f"{path}: {len(missing)} dangling path(s), first: {missing[0]}")

    logger.info(f"📋 Manifest {manifest.name}: {len(manifest.subjects)} subjects, "
                f"{sum(1 for _ in manifest.iter_samples())} samples")
    return manifest


def write_manifest(path, manifest: DatasetManifest) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(manifest.model_dump_json(indent=2))
    return path


def load_sample(record: SampleRecord, subject_id: str, root: Path) -> LabeledSample:
    """Load every file one sample references"""
    accel = load_accel_csv(root / record.accel) if record.accel else None
    if accel is not None:
        infer_rate_hz(accel)
    frames = load_rgbd_sequence(record.rgbd, root) if record.rgbd else None
    flows = None
    if record.rgbd and record.rgbd.flow:
        flows = [load_flow(root / p) for p in record.rgbd.flow]
    return LabeledSample(
        sample_id=record.sample_id,
        subject_id=subject_id,
        pace=record.pace,
        covariate=record.covariate,
        accel=accel,
        frames=frames,
        flows=flows,
    )


def load_dataset(path, threads: int = THREADS) -> Tuple[DatasetManifest, List[LabeledSample]]:
    """Validate the manifest, then load all samples in manifest order"""
    path = Path(path)
    manifest = load_manifest(path)
    root = (path if path.is_dir() else path.parent)
    jobs = list(manifest.iter_samples())
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        samples = list(pool.map(lambda job: load_sample(job[1], job[0], root), jobs))
    logger.info(f"✅ Loaded {len(samples)} samples from {root}")
    return manifest, samples


# ============================================================================
# Feature export
# ============================================================================

class FeatureStore:
    """Exports per-sample extraction results (step windows, trajectory descriptors) as Parquet"""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _write(self, table_name: str, df: pd.DataFrame) -> Dict[str, Any]:
        try:
            start_time = datetime.now(timezone.utc)
            if df.empty:
                return {
                    "status": "error",
                    "message": "No rows to write",
                    "records_processed": 0
                }
            target_file = self.directory / f"{table_name}.parquet"
            table = pa.Table.from_pandas(df, preserve_index=False)
            pq.write_table(table, target_file, compression=COMPRESSION, row_group_size=ROW_GROUP_SIZE)

            duration = (datetime.now(timezone.utc) - start_time).total_seconds()
            file_size = target_file.stat().st_size / (1024 * 1024)
            logger.info(f"💾 Wrote {len(df)} {table_name} rows to {target_file.name} "
                        f"({file_size:.2f}MB) in {duration:.2f}s")
            return {
                "status": "success",
                "records_processed": len(df),
                "file": str(target_file),
                "file_size_mb": round(file_size, 2),
                "duration_seconds": round(duration, 2),
            }
        except Exception as e:
            logger.error(f"❌ Writing {table_name} failed: {e}")
            return {
                "status": "error",
                "message": str(e),
                "records_processed": 0
            }

    def write_windows(self, rows: List[Dict[str, Any]]) -> Dict[str, Any]:
        """rows: sample_id, subject_id, pace, covariate, window_index, steps, samples (list of floats)"""
        return self._write("windows", pd.DataFrame(rows))

    def write_descriptors(self, rows: List[Dict[str, Any]]) -> Dict[str, Any]:
        """rows: sample_id, subject_id, pace, covariate, descriptor_index, values (list of floats)"""
        return self._write("descriptors", pd.DataFrame(rows))

    def read(self, table_name: str) -> pd.DataFrame:
        target_file = self.directory / f"{table_name}.parquet"
        if not target_file.exists():
            raise DatasetError(f"feature table not found: {target_file}")
        return pq.read_table(target_file).to_pandas()

    def get_file_stats(self) -> List[Dict[str, Any]]:
        """Statistics for all exported tables"""
        stats = []
        for file_path in sorted(self.directory.glob("*.parquet")):
            try:
                metadata = pq.read_metadata(file_path)
                stats.append({
                    "filename": file_path.name,
                    "row_count": metadata.num_rows,
                    "file_size_mb": round(file_path.stat().st_size / (1024 * 1024), 2),
                })
            except Exception as e:
                logger.error(f"Error reading {file_path}: {e}")
        return stats

"""
Configuration settings for gaitforge
"""
import os
from pathlib import Path

# Base paths
BASE_DIR = Path(__file__).parent.parent
RESULTS_DIR = BASE_DIR / "data" / "results"

# Ensure directories exist
RESULTS_DIR.mkdir(parents=True, exist_ok=True)

# Acceleration data (phone accelerometer, 50 Hz on each axis)
SAMPLING_RATE_HZ = 50
RATE_JITTER_TOLERANCE = 0.20  # ±20% of the nominal period
ACCEL_CSV_HEADER = ['t_ms', 'ax', 'ay', 'az']

# Step partitioning
PEAK_MIN_GAP_MS = 700  # accepted peaks at least 700ms apart
PEAK_MIN_VALUE = 4.0  # m/s^2
STEP_SAMPLES = 50  # one step cycle resampled to 50 values
MIN_STEPS = 1
MAX_STEPS = 8
DEFAULT_STEPS = 2  # 2-step windows used throughout the experiments

# EigenGait
ENERGY_FRACTION = 0.85  # keep eigenvectors holding 85% of eigenvalue energy
EIGEN_NEGATIVE_TOLERANCE = 1e-9

# RGBD data (Kinect-like: color twice the depth resolution)
DEPTH_MAX = 8191  # 13-bit depth
DEPTH_THRESHOLD = 113  # binarization threshold on the person-oriented depth
MIN_COMPONENT_PX = 1000  # mask components smaller than this are removed
FRAME_RATE_FPS = 15

# Dense motion and trajectories
FLOW_LEVELS = 3
FLOW_WINDOW = 5
FLOW_ITERATIONS = 3
TRAJECTORY_LENGTH = 15  # L
TRACK_STRIDE_PX = 5
MAX_STEP_PX = 15.0
STATIC_MIN_TRAVEL_PX = 1.0

# TrajGait codebook
CODEBOOK_SIZE = 1024  # K; 256 and 512 also evaluated
KMEANS_RESTARTS = 10
KMEANS_MAX_ITER = 100
DESCRIPTORS_PER_SAMPLE = 1000
DESCRIPTOR_POOL = 1_000_000

# Recognition
SVM_C = 1000.0
SVM_TOL = 1e-4
SVM_MAX_EPOCHS = 1000

# Evaluation protocol
DEFAULT_TRAIN_FRACTION = 0.3
BREAKDOWN_TRAIN_FRACTION = 0.2  # per-covariate table uses 20% training
ROC_TRAIN_FRACTION = 0.5  # identification scenario: half for training
ROC_GRID_POINTS = 101
DEFAULT_REPEATS = 5
DEFAULT_SEED = 7

# Storage settings (feature exports and prediction logs)
COMPRESSION = 'zstd'  # Options: snappy, gzip, zstd, lz4
ROW_GROUP_SIZE = 100000
MANIFEST_NAME = 'manifest.json'

# Model blobs
EIGEN_MODEL_FILE = 'eigengait.egm'
CODEBOOK_FILE = 'codebook.tgc'
SUBJECT_MODEL_FILE = 'subjects.sgm'
PIPELINE_FILE = 'pipeline.json'

# Performance tuning
THREADS = int(os.environ.get('GAITFORGE_THREADS', os.cpu_count() or 1))

# DuckDB settings (prediction-log aggregation)
DUCKDB_FILE = ':memory:'
DUCKDB_MEMORY_LIMIT = '2GB'
DUCKDB_THREADS = 4
PREDICTIONS_TABLE = 'predictions'

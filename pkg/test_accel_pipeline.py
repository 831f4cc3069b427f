"""
Test the acceleration pipeline: compound value, step partitioning and step windows
"""
import sys
import math
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

# Add backend to path
backend_dir = Path(__file__).parent / 'backend'
sys.path.insert(0, str(backend_dir))

from accel_pipeline import (
    compound, compound_array, extract_sample_windows, extract_windows, gait_curve, local_maxima,
    partition_steps, PartitionPoint
)
from models import AccelSample, GaitCurve, ValidationError


def scan_partition(values, t_ms, min_gap_ms=700.0, min_value=4.0):
    """Reference scanner: tests every condition at every index"""
    accepted = []
    for i in range(1, len(values) - 1):
        if not values[i] > values[i - 1]:
            continue
        right = [v for v in values[i + 1:] if v != values[i]]
        if not right or not right[0] < values[i]:
            continue
        if values[i] <= min_value:
            continue
        if accepted and t_ms[i] - t_ms[accepted[-1]] < min_gap_ms:
            continue
        accepted.append(i)
    return accepted


def _curve(values, period_ms=20.0):
    values = np.asarray(values, dtype=np.float64)
    return GaitCurve(values=values, rate_hz=1000.0 / period_ms, t_ms=np.arange(len(values)) * period_ms)


def test_1_compound_values():
    """Known norms and non-finite input"""
    print("\n📊 Test 1: compound acceleration")
    assert compound(3, 4, 0) == 5.0
    assert compound(0, 0, 0) == 0.0
    assert compound(1, 2, 2) == 3.0
    for bad in ((math.nan, 0, 0), (0, math.inf, 0)):
        try:
            compound(*bad)
            assert False, f"{bad} accepted"
        except ValidationError:
            pass
    print("✅ Norms correct, non-finite rejected")


def test_2_rotation_invariance():
    """compound(R v) == compound(v) for random rotations"""
    print("\n📊 Test 2: rotation invariance")
    rng = np.random.default_rng(11)
    vectors = rng.normal(0, 10, size=(100, 3))
    rotations = Rotation.random(100, random_state=12)
    rotated = rotations.apply(vectors)
    original = compound_array(vectors)
    turned = compound_array(rotated)
    assert np.allclose(turned, original, rtol=1e-9, atol=0)
    for v, r in zip(vectors[:10], rotated[:10]):
        assert abs(compound(*r) - compound(*v)) <= 1e-9 * compound(*v)
    print("✅ 100 random rotations preserve the compound value")


def test_3_partition_examples():
    """Flat curve, sine curve and the 700 ms rule"""
    print("\n📊 Test 3: partition examples")
    assert partition_steps(_curve(np.full(200, 9.8))) == []
    assert partition_steps(_curve([9.0, 10.0])) == []

    t = np.arange(500) * 0.02
    sine = _curve(9.8 + 6 * np.sin(2 * np.pi * 1.0 * t))
    points = partition_steps(sine)
    assert len(points) == 10, f"expected one point per period, got {len(points)}"
    assert [p.index for p in points] == scan_partition(sine.values, sine.t_ms)
    gaps = np.diff([p.t_ms for p in points])
    assert np.all(np.abs(gaps - 1000) <= 20)

    # peaks at 200 ms, 700 ms, 1500 ms
    values = np.ones(100)
    values[[10, 35, 75]] = 10.0
    points = partition_steps(_curve(values))
    assert [p.index for p in points] == [10, 75]
    assert [p.t_ms for p in points] == [200.0, 1500.0]
    print("✅ Partition examples verified")


def test_4_partition_oracle():
    """Greedy partitioning equals the reference scanner on random curves"""
    print("\n📊 Test 4: partition oracle over 1,000 random curves")
    rng = np.random.default_rng(2024)
    for trial in range(1000):
        n = int(rng.integers(3, 120))
        # coarse rounding creates plateaus and ties
        values = np.round(np.abs(rng.normal(6, 4, n)), 0)
        period = float(rng.choice([10.0, 20.0, 40.0]))
        jitter = rng.integers(0, 3, n) if period > 10 else np.zeros(n, dtype=int)
        t_ms = np.arange(n) * period + jitter
        curve = GaitCurve(values=values, rate_hz=1000.0 / period, t_ms=t_ms)
        got = [p.index for p in partition_steps(curve)]
        expected = scan_partition(values, t_ms)
        assert got == expected, f"trial {trial}: {got} != {expected}"
        for p in partition_steps(curve):
            assert p.value > 4.0
    print("✅ 1,000 curves match the scanner")


def test_5_plateau_leftmost():
    """A flat-topped peak reports its leftmost sample; a rising plateau is no peak"""
    print("\n📊 Test 5: plateaus")
    assert list(local_maxima(np.array([1, 5, 5, 5, 2, 1.0]))) == [1]
    assert list(local_maxima(np.array([1, 5, 5, 6, 2.0]))) == [3]
    assert list(local_maxima(np.array([1, 5, 5.0]))) == []
    print("✅ Plateau handling verified")


def test_6_window_counts():
    """5 points and 2 steps give windows over points [0..2] and [2..4]"""
    print("\n📊 Test 6: window extraction")
    t = np.arange(500) * 0.02
    curve = _curve(9.8 + 6 * np.sin(2 * np.pi * t))
    points = partition_steps(curve)[:5]
    windows = extract_windows(curve, points, 2)
    assert len(windows) == 2
    assert [w.point_range for w in windows] == [(0, 2), (2, 4)]
    assert all(len(w) == 100 for w in windows)

    for steps in range(1, 9):
        for w in extract_windows(curve, partition_steps(curve), steps):
            assert len(w.samples) == 50 * steps
    assert extract_windows(curve, points[:2], 2) == []
    try:
        extract_windows(curve, points, 9)
        assert False, "steps=9 accepted"
    except ValidationError:
        pass
    print("✅ Window counts and lengths verified")


def test_7_window_interpolation():
    """Endpoints preserved; a uniformly spaced 50-sample segment is unchanged"""
    print("\n📊 Test 7: window interpolation")
    rng = np.random.default_rng(8)
    values = rng.uniform(5, 15, 50)
    curve = _curve(values)
    points = [PartitionPoint(index=i, t_ms=float(curve.t_ms[i]), value=float(values[i])) for i in (0, 49)]
    window = extract_windows(curve, points, 1)[0]
    assert window.samples[0] == values[0] and window.samples[-1] == values[49]
    assert np.allclose(window.samples, values, atol=1e-12)

    short = _curve([5.0, 9.0, 7.0])
    ends = [PartitionPoint(index=0, t_ms=0.0, value=5.0), PartitionPoint(index=2, t_ms=40.0, value=7.0)]
    resampled = extract_windows(short, ends, 1)[0].samples
    assert resampled[0] == 5.0 and resampled[-1] == 7.0
    print("✅ Interpolation identity holds")


def test_8_sample_windows():
    """compound -> partition -> windows on raw acceleration samples"""
    print("\n📊 Test 8: end-to-end windows from samples")
    samples = []
    for i in range(600):
        t = i * 0.02
        magnitude = 9.8 + 6 * math.sin(2 * math.pi * 1.1 * t)
        # split the magnitude across axes with a slowly turning direction
        angle = 0.3 * t
        samples.append(AccelSample(i * 20, magnitude * math.cos(angle), magnitude * math.sin(angle), 0.0))
    curve = gait_curve(samples)
    assert np.allclose(curve.values, 9.8 + 6 * np.sin(2 * np.pi * 1.1 * np.arange(600) * 0.02))
    windows = extract_sample_windows(samples, steps=2, curve_id="walk")
    assert len(windows) >= 4
    assert all(w.source_curve_id == "walk" for w in windows)
    ranges = [w.point_range for w in windows]
    for a, b in zip(ranges[:-1], ranges[1:]):
        assert a[1] == b[0], "windows must share only boundary points"
    assert extract_sample_windows(samples[:40], steps=2) == []
    print(f"✅ {len(windows)} two-step windows extracted")


def run_all_tests():
    print("=" * 60)
    print("Testing acceleration pipeline")
    print("=" * 60)
    try:
        test_1_compound_values()
        test_2_rotation_invariance()
        test_3_partition_examples()
        test_4_partition_oracle()
        test_5_plateau_leftmost()
        test_6_window_counts()
        test_7_window_interpolation()
        test_8_sample_windows()
        print("\n" + "=" * 60)
        print("ALL TESTS PASSED!")
        print("=" * 60)
    except AssertionError as e:
        print(f"\n❌ TEST FAILED: {e}")
        sys.exit(1)


if __name__ == "__main__":
    run_all_tests()

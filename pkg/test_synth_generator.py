"""
Test the synthetic gait data generator
"""
import sys
import tempfile
from pathlib import Path

import numpy as np

# Add backend to path
backend_dir = Path(__file__).parent / 'backend'
sys.path.insert(0, str(backend_dir))

from accel_pipeline import extract_sample_windows, gait_curve, partition_steps
from config import DEPTH_MAX, MANIFEST_NAME
from ingestion import accel_array, infer_rate_hz, load_dataset
from models import Covariate, Pace, ValidationError
from rgbd_pipeline import segment_mask
from synth_generator import SyntheticGaitGenerator, generate_dataset, generate_samples

TINY_RGBD = {"n_frames": 3, "frame_size": (60, 80)}


def test_1_subject_profiles():
    """Subjects are pairwise separated; impossible separations are refused"""
    print("\n🧬 Test 1: subject profiles")
    generator = SyntheticGaitGenerator(seed=7)
    profiles = generator.make_profiles(10)
    assert [p.subject_id for p in profiles] == [f"subject_{i:03d}" for i in range(10)]
    vectors = [p.separation_vector() for p in profiles]
    for i in range(10):
        for j in range(i + 1, 10):
            assert np.linalg.norm(vectors[i] - vectors[j]) >= generator.min_separation
    assert [p.period_ms for p in SyntheticGaitGenerator(seed=7).make_profiles(10)] == [p.period_ms for p in profiles]

    for bad in (lambda: SyntheticGaitGenerator(min_separation=5.0).make_profiles(3),
                lambda: generator.make_profiles(1),
                lambda: SyntheticGaitGenerator(n_frames=1)):
        try:
            bad()
            assert False, "invalid generator request accepted"
        except ValidationError:
            pass
    print("✅ 10 subjects pairwise separated")


def test_2_determinism():
    """Same seed gives identical samples regardless of thread count"""
    print("\n🧬 Test 2: determinism")
    first = generate_samples(2, 3, seed=5, threads=1, **TINY_RGBD)
    second = generate_samples(2, 3, seed=5, threads=3, **TINY_RGBD)
    other = generate_samples(2, 3, seed=6, threads=1, **TINY_RGBD)
    assert [s.sample_id for s in first] == [s.sample_id for s in second]
    for a, b in zip(first, second):
        assert np.array_equal(accel_array(a.accel), accel_array(b.accel))
        assert all(np.array_equal(fa.color, fb.color) and np.array_equal(fa.depth, fb.depth)
                   for fa, fb in zip(a.frames, b.frames))
    assert not np.array_equal(accel_array(first[0].accel), accel_array(other[0].accel))
    print("✅ Seeded generation is reproducible")


def test_3_accel_walks():
    """50 Hz readings, several detectable steps, faster steps at fast pace"""
    print("\n🧬 Test 3: acceleration walks")
    samples = generate_samples(3, 4, paces=(Pace.NORMAL, Pace.FAST), seed=8, rgbd=False)
    assert all(s.frames is None for s in samples)
    assert [s.pace for s in samples[:4]] == [Pace.NORMAL, Pace.FAST, Pace.NORMAL, Pace.FAST]

    gaps = {Pace.NORMAL: [], Pace.FAST: []}
    for sample in samples:
        assert len(sample.accel) == 500
        assert abs(infer_rate_hz(sample.accel) - 50.0) < 1.0
        curve = gait_curve(sample.accel)
        points = partition_steps(curve)
        assert len(points) >= 3, f"{sample.sample_id}: only {len(points)} partition points"
        gaps[sample.pace].extend(np.diff([p.t_ms for p in points]))
        assert len(extract_sample_windows(sample.accel, steps=2)) >= 1
    assert np.median(gaps[Pace.FAST]) < np.median(gaps[Pace.NORMAL])
    print(f"✅ Median step gap normal {np.median(gaps[Pace.NORMAL]):.0f} ms, "
          f"fast {np.median(gaps[Pace.FAST]):.0f} ms")


def test_4_covariates_perturb_walks():
    """Covariates change a subject's waveform; conditions are cycled per subject"""
    print("\n🧬 Test 4: covariate effects")
    covariates = [Covariate.NONE, Covariate.BOTH_HANDS_IN_POCKET]
    samples = generate_samples(2, 4, covariates=covariates, seed=9, rgbd=False)
    assert [s.covariate for s in samples[:4]] == [Covariate.NONE, Covariate.BOTH_HANDS_IN_POCKET] * 2

    def mean_window(sample):
        return np.mean([w.samples for w in extract_sample_windows(sample.accel, steps=1)], axis=0)

    plain = mean_window(samples[0])
    pocket = mean_window(samples[1])
    assert np.linalg.norm(plain - pocket) > 0.1
    # both hands in pocket damps the main peak
    assert pocket.max() < plain.max()
    print("✅ Covariate walks differ from plain walks")


def test_5_rgbd_frames():
    """Color at full size, depth at half resolution, person-oriented depth yields a mask"""
    print("\n🧬 Test 5: RGBD frames")
    generator = SyntheticGaitGenerator(seed=3, n_frames=3)
    profile = generator.make_profiles(2)[0]
    frames = generator.rgbd_walk(profile, Pace.NORMAL, Covariate.NONE, np.random.default_rng(0))
    assert len(frames) == 3
    assert [f.t_ms for f in frames] == [0, 67, 133]
    for frame in frames:
        assert frame.color.shape == (240, 320, 3) and frame.color.dtype == np.uint8
        assert frame.depth.shape == (120, 160)
        assert frame.depth.max() <= DEPTH_MAX and frame.depth.min() == 0
        mask = segment_mask(frame.depth, frame.color_dims, min_component_px=200)
        assert mask.area > 500, f"figure mask only {mask.area} px"

    bag = generator.rgbd_walk(profile, Pace.NORMAL, Covariate.LEFT_HAND_WITH_LOADINGS, np.random.default_rng(0))
    assert np.count_nonzero(bag[0].depth) > np.count_nonzero(frames[0].depth)
    print(f"✅ Figure mask {mask.area} px")


def test_6_save_and_load():
    """Written datasets load back sample for sample"""
    print("\n💾 Test 6: dataset round trip")
    with tempfile.TemporaryDirectory() as tmp:
        manifest = generate_dataset(2, 2, seed=4, out_dir=tmp, threads=2, **TINY_RGBD)
        assert (Path(tmp) / MANIFEST_NAME).exists()
        assert manifest.seed == 4 and len(manifest.subjects) == 2

        loaded_manifest, loaded = load_dataset(Path(tmp) / MANIFEST_NAME, threads=2)
        original = generate_samples(2, 2, seed=4, **TINY_RGBD)
        assert [s.sample_id for s in loaded] == [s.sample_id for s in original]
        for a, b in zip(loaded, original):
            assert a.subject_id == b.subject_id and a.pace == b.pace and a.covariate == b.covariate
            assert np.array_equal(accel_array(a.accel), accel_array(b.accel))
            assert np.array_equal(a.frames[-1].color, b.frames[-1].color)
            assert np.array_equal(a.frames[-1].depth, b.frames[-1].depth)

    try:
        generate_dataset(2, 2)
        assert False, "missing output directory accepted"
    except ValidationError:
        pass
    print(f"✅ {len(loaded)} samples round-tripped")


def test_7_approach_depth_range():
    """Default walks start about 5 m from the camera and end about 1 m away"""
    print("\n🧬 Test 7: approach depth range")
    generator = SyntheticGaitGenerator(seed=7)
    assert generator.n_frames == 45
    for k, profile in enumerate(generator.make_profiles(3)):
        for pace in (Pace.NORMAL, Pace.FAST):
            frames = generator.rgbd_walk(profile, pace, Covariate.NONE, np.random.default_rng(k))
            assert len(frames) == 45 and frames[-1].t_ms == 2933
            medians = [float(np.median(f.depth[f.depth > 0])) for f in frames]
            assert 4400 <= medians[0] <= 5500, f"{profile.subject_id} starts at {medians[0]:.0f} mm"
            assert 700 <= medians[-1] <= 1300, f"{profile.subject_id} ends at {medians[-1]:.0f} mm"
            # steady approach: the figure is never further away than 300 mm behind an earlier frame
            assert all(later <= earlier + 300 for earlier, later in zip(medians, medians[1:]))
    print(f"✅ Median figure depth {medians[0]:.0f} mm -> {medians[-1]:.0f} mm")


def run_all_tests():
    print("=" * 60)
    print("Testing synthetic generator")
    print("=" * 60)
    try:
        test_1_subject_profiles()
        test_2_determinism()
        test_3_accel_walks()
        test_4_covariates_perturb_walks()
        test_5_rgbd_frames()
        test_6_save_and_load()
        test_7_approach_depth_range()
        print("\n" + "=" * 60)
        print("ALL TESTS PASSED!")
        print("=" * 60)
    except AssertionError as e:
        print(f"\n❌ TEST FAILED: {e}")
        sys.exit(1)


if __name__ == "__main__":
    run_all_tests()

"""
Test the evaluation protocol: splits, accuracy controls, ROC, breakdowns, sweeps and prediction logs
"""
import sys
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd

# Add backend to path
backend_dir = Path(__file__).parent / 'backend'
sys.path.insert(0, str(backend_dir))

from evaluation import (
    SplitSpec, chance_band, codebook_sweep, covariate_breakdown, evaluate_accuracy, evaluate_roc, fraction_sweep,
    make_split, plot_roc, plot_sweep, recognizer_roc, roc_curve, roc_table, step_sweep, vertical_average,
    write_csv
)
from models import Covariate, Pace, ValidationError
from query_engine import PredictionQueryEngine, summarize_prediction_logs, write_prediction_log
from recognition import Mode, PipelineConfig, SampleFeatures
from synth_generator import generate_samples

SMALL = PipelineConfig(mode=Mode.TRAJGAIT, K=4, restarts=1, descriptors_per_sample=60, seed=5)


def _mixture_features(n_subjects=4, per_subject=10, n_descriptors=60, seed=0):
    """Subjects drawing descriptors from shared blobs with subject-specific mixture weights"""
    rng = np.random.default_rng(seed)
    blobs = rng.normal(0, 1, size=(n_subjects, 45))
    features = []
    for s in range(n_subjects):
        weights = np.full(n_subjects, 0.3 / (n_subjects - 1))
        weights[s] = 0.7
        for j in range(per_subject):
            which = rng.choice(n_subjects, size=n_descriptors, p=weights)
            features.append(SampleFeatures(
                sample_id=f"m{s}_{j:02d}",
                subject_id=f"m{s}",
                pace=Pace.NORMAL,
                covariate=Covariate.NONE if j % 2 == 0 else Covariate.NATURAL,
                descriptors=blobs[which] + rng.normal(0, 0.02, size=(n_descriptors, 45)),
            ))
    return features


def pairwise_auc(scores, positives):
    """Fraction of (positive, negative) pairs ranked correctly, ties counting half"""
    pos = [s for s, p in zip(scores, positives) if p]
    neg = [s for s, p in zip(scores, positives) if not p]
    total = sum(1.0 if a > b else 0.5 if a == b else 0.0 for a in pos for b in neg)
    return total / (len(pos) * len(neg))


def test_1_make_split():
    """Per-subject split sizes, partition identity, disjointness, determinism"""
    print("\n🔀 Test 1: stratified splits")
    features = _mixture_features()
    train, test = make_split(features, SplitSpec(train_fraction=0.3, seed=1))
    assert sorted(train + test) == list(range(40))
    assert not set(train) & set(test)
    for s in range(4):
        assert sum(features[i].subject_id == f"m{s}" for i in train) == 3

    assert make_split(features, SplitSpec(train_fraction=0.3, seed=1)) == (train, test)
    assert make_split(features, SplitSpec(train_fraction=0.3, seed=2)) != (train, test)

    low, _ = make_split(features, SplitSpec(train_fraction=0.01, seed=1))
    high, high_test = make_split(features, SplitSpec(train_fraction=0.99, seed=1))
    assert len(low) == 4 and len(high) == 36 and len(high_test) == 4

    try:
        make_split(features[:11], SplitSpec())
        assert False, "single-sample subject accepted"
    except ValidationError:
        pass
    print("✅ Splits verified")


def test_2_accuracy_controls():
    """Oracle scores 1.0, a constant guess scores 1/n, the trained pipeline separates subjects"""
    print("\n🎯 Test 2: accuracy controls")
    features = _mixture_features()
    split = SplitSpec(train_fraction=0.3, seed=3)

    oracle = evaluate_accuracy(SMALL, features, split, classifier=lambda f: f.subject_id)
    assert oracle.accuracy == 1.0 and oracle.n_test == 28 and oracle.recognizer is None

    constant = evaluate_accuracy(SMALL, features, split, classifier=lambda f: "m0")
    assert constant.accuracy == 7 / 28

    trained = evaluate_accuracy(SMALL, features, split, threads=2)
    assert trained.accuracy >= 0.9, f"trained accuracy {trained.accuracy}"
    assert not set(trained.train_ids) & set(trained.test_ids)
    assert set(trained.recognizer.training_ids) == set(trained.train_ids)
    assert list(trained.predictions.columns) == ['sample_id', 'subject_id', 'predicted', 'correct', 'pace',
                                                 'covariate']

    shuffled = evaluate_accuracy(SMALL, features, split, shuffle_labels=True, threads=2)
    assert shuffled.n_test == 28 and set(shuffled.recognizer.training_ids) == set(shuffled.train_ids)
    print(f"✅ oracle 1.0, constant {constant.accuracy:.2f}, trained {trained.accuracy:.2f}")


def test_3_chance_controls():
    """Uniform guessing and label-shuffled training both land inside the 3-sigma band around 1/n"""
    print("\n🎲 Test 3: chance-level controls")
    assert np.allclose(chance_band(10, 1000), (0.1 - 3 * np.sqrt(0.09 / 1000), 0.1 + 3 * np.sqrt(0.09 / 1000)))
    assert chance_band(2, 1) == (0.0, 1.0)
    try:
        chance_band(1, 10)
        assert False, "single subject accepted"
    except ValidationError:
        pass

    # uniform-random classifier over 10 subjects and 1000 test samples: 0.1 +- 0.03
    guesses = [SampleFeatures(sample_id=f"g{s}_{j:03d}", subject_id=f"g{s}") for s in range(10) for j in range(200)]
    rng = np.random.default_rng(2024)
    uniform = evaluate_accuracy(SMALL, guesses, SplitSpec(train_fraction=0.5, seed=4),
                                classifier=lambda f: f"g{rng.integers(10)}")
    assert uniform.n_test == 1000
    assert abs(uniform.accuracy - 0.1) <= 0.03, f"uniform guessing scored {uniform.accuracy}"
    low, high = chance_band(10, uniform.n_test)
    assert abs(high - low - 0.0569) < 1e-3

    # label shuffling: outcomes are independent per subject and repeat, not per test sample
    features = _mixture_features()
    per_subject = []
    for repeat in range(12):
        result = evaluate_accuracy(SMALL, features, SplitSpec(train_fraction=0.3, seed=100 + repeat),
                                   shuffle_labels=True, threads=2)
        per_subject.extend(result.predictions.groupby('subject_id')['correct'].mean())
    low, high = chance_band(4, len(per_subject))
    shuffled_accuracy = float(np.mean(per_subject))
    assert low <= shuffled_accuracy <= high, f"shuffled accuracy {shuffled_accuracy:.3f} outside [{low:.3f}, {high:.3f}]"
    print(f"✅ uniform {uniform.accuracy:.3f}, shuffled {shuffled_accuracy:.3f} (band {low:.3f}-{high:.3f})")


def test_4_roc_curves():
    """Hand example, pairwise oracle with ties, monotonicity, averaging"""
    print("\n📈 Test 4: ROC curves")
    curve = roc_curve(np.array([0.9, 0.8, 0.7, 0.6]), np.array([True, False, True, False]))
    assert abs(curve.auc - 0.75) < 1e-12
    assert curve.fpr[0] == 0 and curve.tpr[0] == 0 and curve.fpr[-1] == 1 and curve.tpr[-1] == 1

    rng = np.random.default_rng(12)
    for trial in range(200):
        n = int(rng.integers(4, 60))
        positives = rng.random(n) < 0.4
        positives[0], positives[1] = True, False
        scores = rng.integers(0, 8, n).astype(float) if trial % 2 else rng.normal(size=n)
        curve = roc_curve(scores, positives)
        assert abs(curve.auc - pairwise_auc(scores, positives)) < 1e-9, f"trial {trial}"
        assert np.all(np.diff(curve.fpr) >= 0) and np.all(np.diff(curve.tpr) >= 0)

    perfect = roc_curve(np.array([3.0, 2.0, 1.0]), np.array([True, False, False]))
    average = vertical_average([perfect, perfect])
    assert abs(average.auc - 1.0) < 1e-12 and len(average.fpr) == 102

    try:
        roc_curve(np.array([1.0, 2.0]), np.array([True, True]))
        assert False, "all-positive ROC accepted"
    except ValidationError:
        pass

    scores = rng.normal(size=(12, 3))
    labels = ["a"] * 6 + ["b"] * 6
    curves, average = evaluate_roc(scores, labels, ["a", "b", "c"])
    assert [c.subject_id for c in curves] == ["a", "b"]
    assert np.all(np.diff(average.tpr) >= 0) and 0 <= average.auc <= 1
    print("✅ 200 random score sets match the pairwise oracle")


def test_5_recognizer_roc_and_breakdown():
    """ROC from a fitted recognizer; per-covariate counts weight back to overall accuracy"""
    print("\n📈 Test 5: recognizer ROC and covariate breakdown")
    features = _mixture_features()
    split = SplitSpec(train_fraction=0.5, seed=4)
    result = evaluate_accuracy(SMALL, features, split, threads=2)
    test_features = [f for f in features if f.sample_id in set(result.test_ids)]
    curves, average = recognizer_roc(result.recognizer, test_features)
    assert len(curves) == 4
    assert average.auc >= 0.9

    table = covariate_breakdown(SMALL, features, split, threads=2)
    assert list(table.columns) == ['covariate', 'accuracy', 'count']
    assert set(table['covariate']) == {'none', 'natural'}
    assert int(table['count'].sum()) == result.n_test
    weighted = float((table['accuracy'] * table['count']).sum() / table['count'].sum())
    assert abs(weighted - result.accuracy) < 1e-12
    print(f"✅ average AUC {average.auc:.3f}; breakdown over {len(table)} covariates")


def test_6_fraction_sweep():
    """9 fractions x 5 repeats, deterministic under a fixed seed"""
    print("\n🔁 Test 6: fraction sweep")
    features = _mixture_features(n_subjects=3, per_subject=10)
    fractions = [round(0.1 * i, 1) for i in range(1, 10)]
    summary, log = fraction_sweep(SMALL, features, fractions=fractions, repeats=5, seed=9, threads=2)
    assert len(summary) == 9
    assert list(summary['fraction']) == fractions
    assert set(summary['repeats']) == {5}
    assert np.all((summary['accuracy_mean'] >= 0) & (summary['accuracy_mean'] <= 1))
    assert np.all(summary['accuracy_std'] >= 0)
    assert len(log) == 5 * sum(30 - 3 * min(max(int(np.floor(f * 10 + 0.5)), 1), 9) for f in fractions)

    again, _ = fraction_sweep(SMALL, features, fractions=fractions, repeats=5, seed=9, threads=1)
    pd.testing.assert_frame_equal(summary, again)

    try:
        fraction_sweep(SMALL, features, fractions=[0.5], repeats=0)
        assert False, "zero repeats accepted"
    except ValidationError:
        pass
    print(f"✅ Sweep summary:\n{summary[['fraction', 'accuracy_mean', 'accuracy_std']].to_string(index=False)}")


def test_7_step_and_codebook_sweeps():
    """Accuracy per window length and pace subset; accuracy per codebook size"""
    print("\n🔁 Test 7: step and codebook sweeps")
    samples = generate_samples(3, 6, paces=(Pace.NORMAL, Pace.FAST), seed=11, rgbd=False, threads=2)
    table = step_sweep(PipelineConfig(seed=1), samples, steps=(1, 2), split=SplitSpec(train_fraction=0.5, seed=2),
                       threads=2)
    assert list(table.columns) == ['pace', 'steps', 'accuracy', 'count']
    assert set(table['pace']) <= {'normal', 'fast', 'normal+fast'}
    assert set(table['steps']) <= {1, 2} and len(table) >= 2
    assert np.all((table['accuracy'] >= 0) & (table['accuracy'] <= 1))

    sizes = codebook_sweep(SMALL, _mixture_features(n_subjects=3, per_subject=6), sizes=(4, 8),
                           split=SplitSpec(train_fraction=0.5, seed=2), threads=2)
    assert list(sizes['K']) == [4, 8] and list(sizes['count']) == [9, 9]
    print(f"✅ {len(table)} step rows, {len(sizes)} codebook rows")


def test_8_prediction_queries():
    """DuckDB aggregation over in-memory and Parquet prediction logs"""
    print("\n🦆 Test 8: prediction log queries")
    log = pd.DataFrame({
        'sample_id': [f"x{i}" for i in range(8)],
        'subject_id': ['a', 'a', 'b', 'b', 'a', 'a', 'b', 'b'],
        'predicted': ['a', 'b', 'b', 'b', 'a', 'a', 'a', 'b'],
        'correct': [True, False, True, True, True, True, False, True],
        'pace': ['normal'] * 8,
        'covariate': ['none', 'natural'] * 4,
        'mode': ['fused'] * 8,
        'fraction': [0.5] * 8,
        'repeat': [0, 0, 0, 0, 1, 1, 1, 1],
    })
    engine = PredictionQueryEngine()
    try:
        engine.register_predictions(log)
        assert engine.overall_accuracy() == 0.75
        by_subject = engine.accuracy_by(['subject_id'])
        assert list(by_subject['accuracy']) == [0.75, 0.75] and list(by_subject['count']) == [4, 4]

        summary = engine.fraction_summary()
        assert len(summary) == 1 and summary['accuracy_mean'].iloc[0] == 0.75
        assert summary['repeats'].iloc[0] == 2 and summary['accuracy_std'].iloc[0] == 0.0

        stats = engine.get_statistics()
        assert stats["status"] == "success" and stats["statistics"]["total_predictions"] == 8
        assert engine.execute_sql("SELECT nope FROM predictions")["status"] == "error"
        try:
            engine.register_predictions(log.drop(columns=['covariate']))
            assert False, "incomplete log accepted"
        except ValueError:
            pass

        with tempfile.TemporaryDirectory() as tmp:
            path = write_prediction_log(log, Path(tmp) / "log.parquet")
            engine.register_parquet([path])
            assert engine.overall_accuracy() == 0.75
            assert list(engine.accuracy_by(['covariate'])['covariate']) == ['natural', 'none']

            summary = summarize_prediction_logs([path], ['covariate', 'subject_id'])
            assert summary['total_predictions'] == 8 and summary['accuracy'] == 0.75
            assert summary['fractions'] == [{'fraction': 0.5, 'accuracy_mean': 0.75, 'accuracy_std': 0.0, 'repeats': 2}]
            assert len(summary['groups']) == 4 and sum(g['count'] for g in summary['groups']) == 8
            assert 'fractions' not in summarize_prediction_logs(
                [write_prediction_log(log.drop(columns=['repeat']), Path(tmp) / 'single.parquet')])
            try:
                summarize_prediction_logs([path], ['nope'])
                assert False, 'unknown column accepted'
            except ValueError:
                pass
    finally:
        engine.close()
    print("✅ Prediction queries verified")


def test_9_outputs():
    """CSV tables and SVG plots"""
    print("\n💾 Test 9: result files")
    perfect = roc_curve(np.array([3.0, 2.0, 1.0, 0.5]), np.array([True, True, False, False]), subject_id="a")
    average = vertical_average([perfect])
    sweep = pd.DataFrame({'fraction': [0.1, 0.2], 'accuracy_mean': [0.5, 0.7], 'accuracy_std': [0.1, 0.05]})
    with tempfile.TemporaryDirectory() as tmp:
        csv_path = write_csv(roc_table(average), Path(tmp) / "roc.csv")
        loaded = pd.read_csv(csv_path)
        assert list(loaded.columns) == ['fpr', 'tpr'] and len(loaded) == 102
        roc_svg = plot_roc([perfect], average, Path(tmp) / "plots" / "roc.svg")
        sweep_svg = plot_sweep(sweep, 'fraction', 'accuracy_mean', Path(tmp) / "sweep.svg", error='accuracy_std')
        for path in (roc_svg, sweep_svg):
            assert "<svg" in path.read_text()
    print("✅ Result files written")


def run_all_tests():
    print("=" * 60)
    print("Testing evaluation protocol")
    print("=" * 60)
    try:
        test_1_make_split()
        test_2_accuracy_controls()
        test_3_chance_controls()
        test_4_roc_curves()
        test_5_recognizer_roc_and_breakdown()
        test_6_fraction_sweep()
        test_7_step_and_codebook_sweeps()
        test_8_prediction_queries()
        test_9_outputs()
        print("\n" + "=" * 60)
        print("ALL TESTS PASSED!")
        print("=" * 60)
    except AssertionError as e:
        print(f"\n❌ TEST FAILED: {e}")
        sys.exit(1)


if __name__ == "__main__":
    run_all_tests()

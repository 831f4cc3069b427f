"""
Test recognition: fusion, one-vs-all subject models, SGM1 files and the recognition pipeline
"""
import sys
import tempfile
from pathlib import Path

import numpy as np

# Add backend to path
backend_dir = Path(__file__).parent / 'backend'
sys.path.insert(0, str(backend_dir))

import eigengait
from models import FormatError, ValidationError
from numerics import LinearModel
from recognition import (
    GaitRecognizer, Mode, PipelineConfig, SampleFeatures, SubjectModel, classify, extract_features, fuse,
    load_subject_model, save_subject_model, score, score_matrix, subject_model_from_bytes,
    subject_model_to_bytes, train
)
from synth_generator import generate_samples
from trajgait import Codebook, TrajHistogram


def _mixture_features(seed=0, per_subject=6, n_descriptors=120):
    """Three subjects drawing descriptors from four shared blobs with their own mixture weights"""
    rng = np.random.default_rng(seed)
    blobs = rng.normal(0, 1, size=(4, 45))
    weights = [(0.7, 0.1, 0.1, 0.1), (0.1, 0.7, 0.1, 0.1), (0.1, 0.1, 0.7, 0.1)]
    features = []
    for s, w in enumerate(weights):
        for j in range(per_subject):
            which = rng.choice(4, size=n_descriptors, p=w)
            descriptors = blobs[which] + rng.normal(0, 0.02, size=(n_descriptors, 45))
            features.append(SampleFeatures(sample_id=f"p{s}_{j}", subject_id=f"p{s}", descriptors=descriptors))
    return features


def test_1_fuse():
    """Block-wise then whole-vector L1 normalization"""
    print("\n🔗 Test 1: feature fusion")
    fused = fuse(np.array([2.0, 2.0]), TrajHistogram(np.array([1, 3])))
    assert np.allclose(fused.values, [0.25, 0.25, 0.125, 0.375])
    assert fused.block_dims == (2, 2)

    rng = np.random.default_rng(3)
    for _ in range(50):
        eg, tg = rng.normal(size=7), rng.integers(0, 20, 16)
        values = fuse(eg, tg).values
        assert abs(np.abs(values).sum() - 1) < 1e-12
        assert np.array_equal(values, fuse(eg.copy(), tg.copy()).values)
        assert np.array_equal(np.sign(values[:7]), np.sign(eg))

    half = fuse(np.zeros(3), np.array([1.0, 1.0]))
    assert np.allclose(half.values, [0, 0, 0, 0.5, 0.5])
    assert np.allclose(fuse(tg=np.array([2.0, 6.0])).values, [0.25, 0.75])
    for eg, tg in ((np.zeros(3), np.zeros(2)), (None, None)):
        try:
            fuse(eg, tg)
            assert False, "uninformative sample accepted"
        except ValidationError:
            pass
    print("✅ Fusion verified")


def test_2_train_and_classify():
    """Separable clusters are recovered; exact ties go to the first subject"""
    print("\n🔗 Test 2: one-vs-all training")
    rng = np.random.default_rng(4)
    centers = np.eye(3) * 4
    X = np.vstack([c + rng.normal(0, 0.3, size=(10, 3)) for c in centers])
    labels = [s for s in ("a", "b", "c") for _ in range(10)]
    model = train(X, labels, C=1000.0, seed=1)
    assert model.subject_ids == ["a", "b", "c"]
    predicted = [classify(model, x)[0] for x in X]
    assert predicted == labels

    scores = score(model, X[0])
    assert len(scores) == 3 and scores.subject_ids == ["a", "b", "c"]
    assert np.allclose(score_matrix(model, X)[0], scores.scores)

    again = train(X, labels, C=1000.0, seed=1, threads=1)
    assert np.array_equal(again.weights, model.weights)

    tied = SubjectModel(subject_ids=["x", "y"], models=[LinearModel(np.zeros(2), 0.5), LinearModel(np.zeros(2), 0.5)])
    subject, tie_scores = classify(tied, np.array([1.0, 1.0]))
    assert subject == "x" and np.array_equal(tie_scores.scores, [0.5, 0.5])

    for bad_labels in (["a"] * 30, labels[:-1]):
        try:
            train(X, bad_labels)
            assert False, "invalid training set accepted"
        except ValueError:
            pass
    print("✅ Training and classification verified")


def test_3_subject_model_file():
    """SGM1 round trip and hash compatibility checks"""
    print("\n💾 Test 3: SGM1 subject model file")
    rng = np.random.default_rng(5)
    data = {f"s{i}": [rng.normal(size=20) for _ in range(4)] for i in range(3)}
    eigen_model = eigengait.fit(data)
    codebook = Codebook(rng.normal(size=(8, 45)))
    other_codebook = Codebook(rng.normal(size=(8, 45)))

    dim = eigen_model.r + codebook.K
    X = rng.normal(size=(12, dim))
    model = train(X, ["a", "b", "c"] * 4, C=10.0, block_dims=(eigen_model.r, codebook.K),
                  eigen_model_id=eigen_model.model_id, codebook_id=codebook.codebook_id, mode=Mode.FUSED)

    with tempfile.TemporaryDirectory() as tmp:
        path = save_subject_model(model, Path(tmp) / "subjects.sgm")
        loaded = load_subject_model(path, eigen_model=eigen_model, codebook=codebook)
        try:
            load_subject_model(path, eigen_model=eigen_model, codebook=other_codebook)
            assert False, "codebook hash mismatch accepted"
        except ValidationError:
            pass

    assert loaded.subject_ids == model.subject_ids and loaded.block_dims == model.block_dims
    assert np.array_equal(loaded.weights, model.weights) and np.array_equal(loaded.biases, model.biases)
    assert loaded.mode is Mode.FUSED and loaded.C == 10.0

    blob = subject_model_to_bytes(model)
    assert blob[:4] == b"SGM1"
    for bad in (b"SGM0" + blob[4:], blob[:40]):
        try:
            subject_model_from_bytes(bad)
            assert False, "corrupt subject model accepted"
        except FormatError:
            pass
    print("✅ Subject model file verified")


def test_4_trajgait_recognizer():
    """Codebook + histograms + SVMs separate subjects by their descriptor mixtures"""
    print("\n🎯 Test 4: trajgait recognizer")
    features = _mixture_features()
    train_features = [f for f in features if int(f.sample_id[-1]) < 4]
    test_features = [f for f in features if int(f.sample_id[-1]) >= 4]
    config = PipelineConfig(mode=Mode.TRAJGAIT, K=4, restarts=3, descriptors_per_sample=60, seed=2)
    recognizer = GaitRecognizer(config, threads=2).fit(train_features)
    assert recognizer.codebook.K == 4 and recognizer.eigen_model is None
    assert recognizer.training_ids == [f.sample_id for f in train_features]

    predictions = recognizer.predict_many(test_features)
    assert [p[0] for p in predictions] == [f.subject_id for f in test_features]

    with tempfile.TemporaryDirectory() as tmp:
        written = recognizer.save(tmp)
        assert set(written) == {"codebook", "subject_model", "pipeline"}
        loaded = GaitRecognizer.load(tmp)
    assert loaded.codebook.codebook_id == recognizer.codebook.codebook_id
    for (subject, scores), f in zip(predictions, test_features):
        loaded_subject, loaded_scores = loaded.predict(f)
        assert loaded_subject == subject
        assert np.allclose(loaded_scores.scores, scores.scores, atol=1e-12)

    depth_only = GaitRecognizer(config.model_copy(update={"mode": Mode.TRAJGAIT_DEPTH}), threads=2)
    assert np.all(depth_only._descriptors(features[0])[:, :30] == 0)
    print(f"✅ {len(test_features)} held-out samples classified correctly")


def test_5_eigengait_recognizer():
    """Accel-only pipeline on synthetic walks: fit, persist, reload, refuse empty samples"""
    print("\n🎯 Test 5: eigengait recognizer")
    samples = generate_samples(3, 6, seed=3, rgbd=False, threads=2)
    config = PipelineConfig(mode=Mode.EIGENGAIT, seed=4)
    features = extract_features(samples, config, threads=2)
    assert all(len(f.windows(2)) >= 1 for f in features)

    recognizer = GaitRecognizer(config, threads=2)
    try:
        recognizer.predict(features[0])
        assert False, "unfitted recognizer predicted"
    except ValidationError:
        pass

    train_features = [f for f in features if f.sample_id[-1] in "0123"]
    recognizer.fit(train_features)
    assert recognizer.codebook is None
    assert recognizer.subject_model.block_dims == (recognizer.eigen_model.r, 0)
    subject, scores = recognizer.predict(features[5])
    assert recognizer.subject_model.subject_ids == ["subject_000", "subject_001", "subject_002"]
    assert subject in recognizer.subject_model.subject_ids
    assert len(scores) == 3

    refit = GaitRecognizer(config, threads=1).fit(train_features)
    assert refit.eigen_model.model_id == recognizer.eigen_model.model_id

    with tempfile.TemporaryDirectory() as tmp:
        recognizer.save(tmp)
        loaded = GaitRecognizer.load(tmp)
        try:
            GaitRecognizer.load(Path(tmp) / "missing")
            assert False, "missing model directory accepted"
        except FileNotFoundError:
            pass
    assert np.allclose(loaded.predict(features[5])[1].scores, scores.scores, atol=1e-12)

    empty = SampleFeatures(sample_id="empty", subject_id="?")
    assert recognizer.predict(empty) == (None, None)
    print(f"✅ Eigen model r={recognizer.eigen_model.r}, prediction {subject}")


def run_all_tests():
    print("=" * 60)
    print("Testing recognition")
    print("=" * 60)
    try:
        test_1_fuse()
        test_2_train_and_classify()
        test_3_subject_model_file()
        test_4_trajgait_recognizer()
        test_5_eigengait_recognizer()
        print("\n" + "=" * 60)
        print("ALL TESTS PASSED!")
        print("=" * 60)
    except AssertionError as e:
        print(f"\n❌ TEST FAILED: {e}")
        sys.exit(1)


if __name__ == "__main__":
    run_all_tests()

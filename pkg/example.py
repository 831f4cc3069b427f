"""
Complete Example: gaitforge Workflow
Demonstrates dataset generation, feature extraction, training, classification and evaluation
"""
import sys
import io
import tempfile
from pathlib import Path

# Set UTF-8 encoding for Windows console
if sys.platform == 'win32':
    sys.stdout = io.TextIOWrapper(sys.stdout.buffer, encoding='utf-8', errors='replace')
    sys.stderr = io.TextIOWrapper(sys.stderr.buffer, encoding='utf-8', errors='replace')

# Add backend to path
backend_dir = Path(__file__).parent / 'backend'
sys.path.insert(0, str(backend_dir))

from config import RESULTS_DIR
from ingestion import load_dataset
from models import Covariate, Pace
from recognition import GaitRecognizer, Mode, PipelineConfig, extract_features
from synth_generator import generate_dataset
import evaluation


def print_section(title):
    """Print formatted section header"""
    print("\n" + "=" * 60)
    print(f"  {title}")
    print("=" * 60)


# Small enough to run in a minute or two
SUBJECTS = 4
SAMPLES = 8
SMALL = dict(K=16, restarts=2, descriptors_per_sample=200)


def example_generate(workdir: Path) -> Path:
    """Example 1: Synthetic dataset"""
    print_section("Example 1: Synthetic Dataset")

    manifest = generate_dataset(
        SUBJECTS, SAMPLES,
        paces=[Pace.NORMAL, Pace.FAST],
        covariates=[Covariate.NONE, Covariate.NATURAL],
        seed=7,
        out_dir=workdir / "dataset",
    )
    print(f"✅ Dataset '{manifest.name}'")
    print(f"   Subjects: {len(manifest.subjects)}")
    print(f"   Samples:  {sum(len(s.samples) for s in manifest.subjects)}")
    return workdir / "dataset" / "manifest.json"


def example_extract(manifest_path: Path):
    """Example 2: Feature extraction"""
    print_section("Example 2: Feature Extraction")

    _, samples = load_dataset(manifest_path)
    config = PipelineConfig(mode=Mode.FUSED, **SMALL)
    features = extract_features(samples, config)

    first = features[0]
    print(f"📊 {first.sample_id} ({first.subject_id}, {first.pace}, {first.covariate})")
    print(f"   Gait curve: {len(first.curve)} samples")
    print(f"   Partition points: {[p.index for p in first.points][:8]} ...")
    print(f"   {config.steps}-step windows: {len(first.windows(config.steps))}")
    print(f"   Trajectory descriptors: {first.descriptors.shape}")
    return features


def example_train_classify(features, workdir: Path):
    """Example 3: Train, save, reload and classify"""
    print_section("Example 3: Train and Classify")

    config = PipelineConfig(mode=Mode.FUSED, **SMALL)
    train_set = features[::2]
    test_set = features[1::2]
    recognizer = GaitRecognizer(config).fit(train_set)
    written = recognizer.save(workdir / "model")
    print("💾 Saved model files:")
    for name, path in written.items():
        print(f"   - {name}: {Path(path).name}")

    reloaded = GaitRecognizer.load(workdir / "model")
    subject, scores = reloaded.predict(test_set[0])
    print(f"\n🔍 {test_set[0].sample_id} (true subject {test_set[0].subject_id})")
    print(f"   Predicted: {subject}")
    for subject_id, value in zip(scores.subject_ids, scores.scores):
        print(f"     - {subject_id}: {value:+.4f}")


def example_evaluate(features):
    """Example 4: Evaluation protocol"""
    print_section("Example 4: Evaluation")

    for mode in (Mode.EIGENGAIT, Mode.TRAJGAIT, Mode.FUSED):
        config = PipelineConfig(mode=mode, **SMALL)
        result = evaluation.evaluate_accuracy(config, features, evaluation.SplitSpec(train_fraction=0.5, seed=1))
        print(f"📊 {mode:<10} accuracy {result.accuracy:.3f} on {result.n_test} test samples")

    config = PipelineConfig(mode=Mode.FUSED, **SMALL)
    summary, _ = evaluation.fraction_sweep(config, features, fractions=[0.25, 0.5, 0.75], repeats=2)
    print("\n📋 Accuracy vs training fraction:")
    print(summary.to_string(index=False))
    evaluation.write_csv(summary, RESULTS_DIR / "example_fraction_sweep.csv")

    result = evaluation.evaluate_accuracy(config, features, evaluation.SplitSpec(train_fraction=0.5, seed=3))
    test_ids = set(result.test_ids)
    curves, average = evaluation.recognizer_roc(result.recognizer, [f for f in features if f.sample_id in test_ids])
    print(f"\n📈 Average ROC AUC: {average.auc:.3f}")
    evaluation.plot_roc(curves, average, RESULTS_DIR / "example_roc.svg")


def run_all_examples():
    """Run all examples in sequence"""
    print("\n" + "=" * 60)
    print("  🚶 gaitforge - Complete Examples")
    print("=" * 60)

    try:
        with tempfile.TemporaryDirectory() as tmp:
            workdir = Path(tmp)
            manifest_path = example_generate(workdir)
            features = example_extract(manifest_path)
            example_train_classify(features, workdir)
            example_evaluate(features)

        print_section("✅ All Examples Completed!")
        print(f"\n📚 Results written to {RESULTS_DIR}")
        print("   • Try the CLI: python gaitforge.py --help")
        print("   • Read the docs: README.md")

    except Exception as e:
        print(f"\n❌ Error: {str(e)}")
        print("\n💡 Make sure you've installed dependencies:")
        print("   pip install -r requirements.txt")
        raise


if __name__ == '__main__':
    run_all_examples()

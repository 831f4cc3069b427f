"""
Command-line entry point for gaitforge
Generates synthetic datasets, exports features, trains and applies recognizers, runs the
evaluation protocol and summarizes saved prediction logs
"""
import sys
import json
import logging
import argparse
from pathlib import Path
from typing import List, Optional

# Add backend to path
backend_dir = Path(__file__).parent / 'backend'
sys.path.insert(0, str(backend_dir))

import numpy as np
import pandas as pd

from config import (
    BREAKDOWN_TRAIN_FRACTION, CODEBOOK_SIZE, DEFAULT_REPEATS, DEFAULT_SEED, DEFAULT_STEPS,
    DEFAULT_TRAIN_FRACTION, ENERGY_FRACTION, KMEANS_RESTARTS, MIN_COMPONENT_PX, RESULTS_DIR,
    ROC_TRAIN_FRACTION, SVM_C, THREADS, TRAJECTORY_LENGTH
)
from models import Covariate, DatasetError, GaitForgeError, HARD_COVARIATES, Pace, SampleRecord, ValidationError

logger = logging.getLogger("gaitforge")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


class UsageError(Exception):
    pass


class GaitforgeArgumentParser(argparse.ArgumentParser):
    """argparse that reports usage errors as exit status 1"""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise UsageError(message)


def parse_fractions(text: str) -> List[float]:
    """`0.1:0.9:0.1` (inclusive range) or `0.1,0.3,0.5`"""
    try:
        if ':' in text:
            start, stop, step = (float(x) for x in text.split(':'))
            count = int(round((stop - start) / step)) + 1
            values = [round(start + i * step, 10) for i in range(count)]
        else:
            values = [float(x) for x in text.split(',') if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid fraction list {text!r}")
    if not values or any(not 0 < v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"fractions must lie strictly between 0 and 1: {text!r}")
    return values


def parse_columns(text: str) -> List[str]:
    columns = [c.strip() for c in text.split(',') if c.strip()]
    if not columns or not all(c.replace('_', '').isalnum() for c in columns):
        raise argparse.ArgumentTypeError(f"invalid column list {text!r}")
    return columns


def parse_enum_list(enum_type, text: str) -> list:
    try:
        return [enum_type(x.strip()) for x in text.split(',') if x.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def parse_covariates(text: str) -> List[Covariate]:
    if text == 'hard':
        return list(HARD_COVARIATES)
    return parse_enum_list(Covariate, text)


def add_pipeline_options(parser: argparse.ArgumentParser):
    from recognition import Mode

    parser.add_argument('--mode', choices=[m.value for m in Mode], default=Mode.FUSED.value,
                        help='Feature set: eigengait, trajgait, trajgait-depth, trajgait-rgb or fused (default: fused)')
    parser.add_argument('--steps', type=int, default=DEFAULT_STEPS,
                        help=f'Step-window length, 1-8 (default: {DEFAULT_STEPS})')
    parser.add_argument('-K', '--codebook-size', dest='K', type=int, default=CODEBOOK_SIZE,
                        help=f'TrajGait codebook size (default: {CODEBOOK_SIZE})')
    parser.add_argument('-L', '--trajectory-length', dest='L', type=int, default=TRAJECTORY_LENGTH,
                        help=f'Trajectory length in frames (default: {TRAJECTORY_LENGTH})')
    parser.add_argument('-C', dest='C', type=float, default=SVM_C,
                        help=f'SVM soft-margin constant (default: {SVM_C:g})')
    parser.add_argument('--energy', type=float, default=ENERGY_FRACTION,
                        help=f'Eigenvalue energy retained by EigenGait (default: {ENERGY_FRACTION})')
    parser.add_argument('--restarts', type=int, default=KMEANS_RESTARTS,
                        help=f'k-means restarts for the codebook (default: {KMEANS_RESTARTS})')
    parser.add_argument('--min-component-px', type=int, default=MIN_COMPONENT_PX,
                        help=f'Smallest person-mask component kept (default: {MIN_COMPONENT_PX})')
    parser.add_argument('--seed', type=int, default=DEFAULT_SEED, help=f'Random seed (default: {DEFAULT_SEED})')


def pipeline_config(args):
    from recognition import PipelineConfig

    config = PipelineConfig(
        mode=args.mode,
        steps=args.steps,
        K=args.K,
        L=args.L,
        C=args.C,
        energy_fraction=args.energy,
        restarts=args.restarts,
        min_component_px=args.min_component_px,
        seed=args.seed,
    )
    logger.info(f"📋 Config: {config.model_dump(mode='json')} threads={args.threads}")
    return config


def build_parser() -> argparse.ArgumentParser:
    parser = GaitforgeArgumentParser(
        prog='gaitforge',
        description='gaitforge - multi-sensor gait recognition (EigenGait + TrajGait)'
    )
    parser.add_argument('--threads', type=int, default=THREADS,
                        help='Worker threads (default: GAITFORGE_THREADS or the CPU count)')
    parser.add_argument('--log-level', default='INFO', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
                        help='Logging level (default: INFO)')
    commands = parser.add_subparsers(dest='command', required=True, parser_class=GaitforgeArgumentParser)

    gen = commands.add_parser('gen', help='Generate a synthetic dataset')
    gen.add_argument('--subjects', type=int, default=10, help='Number of subjects (default: 10)')
    gen.add_argument('--samples', type=int, default=20, help='Samples per subject (default: 20)')
    gen.add_argument('--paces', type=lambda t: parse_enum_list(Pace, t), default=[Pace.NORMAL],
                     help='Comma-separated paces cycled over samples (default: normal)')
    gen.add_argument('--covariates', type=parse_covariates, default=[Covariate.NONE],
                     help="Comma-separated covariates, or 'hard' for all eight (default: none)")
    gen.add_argument('--frames', type=int, default=45,
                     help='RGBD frames per sample; the 5 m to 1 m approach spans all of them (default: 45)')
    gen.add_argument('--no-accel', action='store_true', help='Skip acceleration data')
    gen.add_argument('--no-rgbd', action='store_true', help='Skip RGBD data')
    gen.add_argument('--seed', type=int, default=DEFAULT_SEED, help=f'Random seed (default: {DEFAULT_SEED})')
    gen.add_argument('-o', '--output', required=True, help='Output directory')

    extract = commands.add_parser('extract', help='Export step windows or trajectory descriptors to Parquet '
                                                  '(for outside analysis and report; train, eval and roc re-extract)')
    extract.add_argument('kind', choices=['accel', 'rgbd'])
    extract.add_argument('manifest', help='Dataset manifest (file or directory)')
    add_pipeline_options(extract)
    extract.add_argument('-o', '--output', required=True, help='Feature export directory')

    train = commands.add_parser('train', help='Train a recognizer on a dataset')
    train.add_argument('manifest', help='Dataset manifest (file or directory)')
    add_pipeline_options(train)
    train.add_argument('-o', '--output', required=True, help='Model directory')

    classify = commands.add_parser('classify', help='Classify one sample with a trained recognizer')
    classify.add_argument('model', help='Model directory written by train')
    classify.add_argument('sample', help='Sample JSON (a manifest sample entry; paths relative to the file)')

    evaluate = commands.add_parser('eval', help='Run the evaluation protocol')
    evaluate.add_argument('manifest', help='Dataset manifest (file or directory)')
    add_pipeline_options(evaluate)
    evaluate.add_argument('--fractions', type=parse_fractions, default=None,
                          help='Training fractions, start:stop:step or a comma list (implies --sweep fraction)')
    evaluate.add_argument('--repeats', type=int, default=DEFAULT_REPEATS,
                          help=f'Random splits per fraction (default: {DEFAULT_REPEATS})')
    evaluate.add_argument('--train-fraction', type=float, default=None,
                          help=f'Training fraction of a single split (default: {DEFAULT_TRAIN_FRACTION}; '
                               f'{BREAKDOWN_TRAIN_FRACTION} with --breakdown)')
    evaluate.add_argument('--breakdown', action='store_true', help='Per-covariate accuracy table')
    evaluate.add_argument('--sweep', choices=['fraction', 'steps', 'k'], default=None,
                          help='Accuracy vs training fraction, window length (per pace) or codebook size')
    evaluate.add_argument('--shuffle-labels', action='store_true', help='Label-shuffled control run')
    evaluate.add_argument('-o', '--output', default=str(RESULTS_DIR), help='Results directory')

    roc = commands.add_parser('roc', help='Per-subject and averaged one-vs-all ROC curves')
    roc.add_argument('manifest', help='Dataset manifest (file or directory)')
    add_pipeline_options(roc)
    roc.add_argument('--train-fraction', type=float, default=ROC_TRAIN_FRACTION,
                     help=f'Training fraction (default: {ROC_TRAIN_FRACTION})')
    roc.add_argument('-o', '--output', default=str(RESULTS_DIR), help='Results directory')

    report = commands.add_parser('report', help='Summarize saved prediction logs and feature exports')
    report.add_argument('results', nargs='?', default=str(RESULTS_DIR),
                        help='Directory holding predictions_<mode>.parquet logs written by eval')
    report.add_argument('--by', type=parse_columns, default=None,
                        help='Comma-separated log columns for grouped accuracy, e.g. pace,covariate')
    report.add_argument('--features', default=None, help='Feature export directory written by extract')
    return parser


# ============================================================================
# Commands
# ============================================================================

def cmd_gen(args) -> int:
    from synth_generator import generate_dataset

    logger.info(f"📋 Generating {args.subjects} subjects x {args.samples} samples, seed {args.seed}")
    generate_dataset(
        args.subjects,
        args.samples,
        paces=args.paces,
        covariates=args.covariates,
        seed=args.seed,
        out_dir=args.output,
        accel=not args.no_accel,
        rgbd=not args.no_rgbd,
        threads=args.threads,
        n_frames=args.frames,
    )
    print(Path(args.output) / 'manifest.json')
    return EXIT_OK


def _load(args, config):
    from ingestion import load_dataset
    from recognition import extract_features

    manifest, samples = load_dataset(args.manifest, threads=args.threads)
    return manifest, extract_features(samples, config, threads=args.threads)


def cmd_extract(args) -> int:
    from ingestion import FeatureStore
    from recognition import Mode

    args.mode = Mode.EIGENGAIT.value if args.kind == 'accel' else Mode.TRAJGAIT.value
    config = pipeline_config(args)
    _, features = _load(args, config)
    store = FeatureStore(args.output)

    rows = []
    if args.kind == 'accel':
        for f in features:
            for index, window in enumerate(f.windows(config.steps)):
                rows.append({
                    'sample_id': f.sample_id, 'subject_id': f.subject_id, 'pace': str(f.pace),
                    'covariate': str(f.covariate), 'window_index': index, 'steps': window.steps,
                    'samples': window.samples.tolist(),
                })
        result = store.write_windows(rows)
    else:
        for f in features:
            for index, values in enumerate(f.descriptors if f.descriptors is not None else []):
                rows.append({
                    'sample_id': f.sample_id, 'subject_id': f.subject_id, 'pace': str(f.pace),
                    'covariate': str(f.covariate), 'descriptor_index': index, 'values': values.tolist(),
                })
        result = store.write_descriptors(rows)

    if result["status"] != "success":
        print(f"❌ Error: {result.get('message', 'Unknown error')}")
        return EXIT_VALIDATION
    print(f"✅ Wrote {result['records_processed']} rows to {result['file']}")
    return EXIT_OK


def cmd_train(args) -> int:
    from recognition import GaitRecognizer

    config = pipeline_config(args)
    manifest, features = _load(args, config)
    if manifest.split:
        features = [f for f in features if manifest.split.get(f.sample_id) == 'train']
        logger.info(f"📋 Using {len(features)} samples annotated as training")
    recognizer = GaitRecognizer(config, threads=args.threads).fit(features)
    written = recognizer.save(args.output)
    print(json.dumps({"status": "success", "subjects": recognizer.subject_model.subject_ids, **written}, indent=2))
    return EXIT_OK


def cmd_classify(args) -> int:
    from ingestion import load_sample
    from recognition import GaitRecognizer, extract_sample_features

    recognizer = GaitRecognizer.load(args.model, threads=args.threads)
    sample_path = Path(args.sample)
    if not sample_path.exists():
        raise DatasetError(f"sample file not found: {sample_path}")
    try:
        record = SampleRecord.model_validate_json(sample_path.read_text())
    except ValueError as e:
        raise ValidationError(f"{sample_path}: invalid sample: {e}")

    sample = load_sample(record, subject_id="", root=sample_path.parent)
    subject, scores = recognizer.predict(extract_sample_features(sample, recognizer.config))
    if subject is None:
        raise ValidationError(f"{record.sample_id}: no usable {recognizer.mode} feature")
    print(json.dumps({
        "sample_id": record.sample_id,
        "subject_id": subject,
        "scores": dict(zip(scores.subject_ids, np.round(scores.scores, 6).tolist())),
    }, indent=2))
    return EXIT_OK


def cmd_eval(args) -> int:
    import evaluation
    from query_engine import write_prediction_log

    config = pipeline_config(args)
    _, features = _load(args, config)
    out = Path(args.output)
    sweep = args.sweep or ('fraction' if args.fractions else None)

    if sweep == 'fraction':
        fractions = args.fractions or evaluation.DEFAULT_FRACTIONS
        summary, log = evaluation.fraction_sweep(config, features, fractions, args.repeats, args.seed,
                                                 threads=args.threads)
        table = summary[['fraction', 'accuracy_mean', 'accuracy_std']]
        evaluation.write_csv(table, out / f"accuracy_vs_fraction_{config.mode}.csv")
        evaluation.plot_sweep(table, 'fraction', 'accuracy_mean', out / f"accuracy_vs_fraction_{config.mode}.svg",
                              error='accuracy_std')
        write_prediction_log(log, out / f"predictions_{config.mode}.parquet")
        print(table.to_string(index=False))
        return EXIT_OK

    if sweep == 'steps':
        table = evaluation.step_sweep(config, features, threads=args.threads,
                                      split=evaluation.SplitSpec(train_fraction=args.train_fraction or DEFAULT_TRAIN_FRACTION,
                                                                 seed=args.seed))
        evaluation.write_csv(table, out / "accuracy_vs_steps.csv")
        evaluation.plot_sweep(table, 'steps', 'accuracy', out / "accuracy_vs_steps.svg", group='pace')
        print(table.to_string(index=False))
        return EXIT_OK

    if sweep == 'k':
        table = evaluation.codebook_sweep(config, features, threads=args.threads,
                                          split=evaluation.SplitSpec(train_fraction=args.train_fraction or DEFAULT_TRAIN_FRACTION,
                                                                     seed=args.seed))
        evaluation.write_csv(table, out / "accuracy_vs_codebook.csv")
        evaluation.plot_sweep(table, 'K', 'accuracy', out / "accuracy_vs_codebook.svg")
        print(table.to_string(index=False))
        return EXIT_OK

    if args.breakdown:
        split = evaluation.SplitSpec(train_fraction=args.train_fraction or BREAKDOWN_TRAIN_FRACTION, seed=args.seed)
        table = evaluation.covariate_breakdown(config, features, split, threads=args.threads)
        evaluation.write_csv(table, out / f"accuracy_by_covariate_{config.mode}.csv")
        print(table.to_string(index=False))
        return EXIT_OK

    split = evaluation.SplitSpec(train_fraction=args.train_fraction or DEFAULT_TRAIN_FRACTION, seed=args.seed)
    result = evaluation.evaluate_accuracy(config, features, split, shuffle_labels=args.shuffle_labels,
                                          threads=args.threads)
    evaluation.write_csv(result.predictions, out / f"predictions_{config.mode}.csv")
    summary = {"mode": str(config.mode), "accuracy": result.accuracy, "test_samples": result.n_test}
    if args.shuffle_labels:
        n_subjects = result.predictions["subject_id"].nunique()
        low, high = evaluation.chance_band(n_subjects, n_subjects)
        summary.update(chance=1.0 / n_subjects, chance_band=[low, high],
                       within_chance_band=low <= result.accuracy <= high)
        if not summary["within_chance_band"]:
            logger.warning(f"⚠️ Shuffled-label accuracy {result.accuracy:.3f} is outside [{low:.3f}, {high:.3f}]")
    print(json.dumps(summary))
    return EXIT_OK


def cmd_roc(args) -> int:
    import evaluation

    config = pipeline_config(args)
    _, features = _load(args, config)
    split = evaluation.SplitSpec(train_fraction=args.train_fraction, seed=args.seed)
    result = evaluation.evaluate_accuracy(config, features, split, threads=args.threads)
    test_ids = set(result.test_ids)
    test_set = [f for f in features if f.sample_id in test_ids]
    curves, average = evaluation.recognizer_roc(result.recognizer, test_set)

    out = Path(args.output)
    evaluation.write_csv(evaluation.roc_table(average), out / f"roc_average_{config.mode}.csv")
    per_subject = [evaluation.roc_table(c).assign(subject_id=c.subject_id) for c in curves]
    evaluation.write_csv(pd.concat(per_subject, ignore_index=True)[['subject_id', 'fpr', 'tpr']],
                         out / f"roc_subjects_{config.mode}.csv")
    evaluation.plot_roc(curves, average, out / f"roc_{config.mode}.svg")
    print(json.dumps({"mode": str(config.mode), "average_auc": average.auc,
                      "subject_auc": {c.subject_id: c.auc for c in curves}}, indent=2))
    return EXIT_OK


def cmd_report(args) -> int:
    from ingestion import FeatureStore
    from query_engine import summarize_prediction_logs

    results = Path(args.results)
    logs = sorted(results.glob('predictions_*.parquet'))
    if not logs:
        raise DatasetError(f"no prediction logs (predictions_<mode>.parquet) in {results}")
    report = {"logs": {log.stem.removeprefix('predictions_'): summarize_prediction_logs([log], args.by)
                       for log in logs}}
    if args.features:
        if not Path(args.features).is_dir():
            raise DatasetError(f"feature export directory not found: {args.features}")
        report["feature_tables"] = FeatureStore(args.features).get_file_stats()
    print(json.dumps(report, indent=2))
    return EXIT_OK


COMMANDS = {
    'gen': cmd_gen,
    'extract': cmd_extract,
    'train': cmd_train,
    'classify': cmd_classify,
    'eval': cmd_eval,
    'roc': cmd_roc,
    'report': cmd_report,
}


def run(argv: Optional[List[str]] = None) -> int:
    """Parse argv, run the subcommand, map failures to exit status"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError:
        return EXIT_VALIDATION
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    logging.basicConfig(level=getattr(logging, args.log_level))
    logging.getLogger().setLevel(getattr(logging, args.log_level))

    try:
        return COMMANDS[args.command](args)
    except (DatasetError, OSError) as e:
        logger.error(f"❌ {e}")
        return EXIT_IO
    except (GaitForgeError, ValueError) as e:
        logger.error(f"❌ {e}")
        return EXIT_VALIDATION


if __name__ == '__main__':
    sys.exit(run())

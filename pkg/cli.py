"""Command Line Interface for the trajectory representation toolkit."""

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import pandas as pd

from config import Config, RunConfig, build_run_config, load_json_config, parse_degree_range
from src.ebayes.marginal import HyperParams
from src.ingestion.pipeline import TrajectoryPipeline, noise_summary_rows
from src.regress.metrics import table_row, write_error_table, write_quantiles
from src.synth.generator import SynthConfig, export, generate
from src.trajdata import csv_io
from src.utils.errors import ArgumentError, OptimizerError, SchemaError, TrajectoryToolkitError
from src.utils.file_utils import print_outputs_summary, write_json
from src.utils.logging_utils import configure_logging


def _tag(run: RunConfig) -> str:
    return f"{run.object_class}_T{run.horizon:g}"


def cmd_synth(args, run: RunConfig):
    """Generate a synthetic corpus and its ground truth."""
    cfg = SynthConfig.from_json(args.config) if args.config else SynthConfig()
    overrides = {"seed": args.seed, "object_class": args.object_class}
    cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})

    print("SYNTHETIC CORPUS")
    print("=" * 40)
    corpus, truth = generate(cfg)
    output = Path(run.output_dir)
    csv_path = export(corpus, output / "corpus.csv", truth)
    print(f"Generated {len(corpus)} {cfg.object_class} trajectories "
          f"({len(truth.outliers)} with injected outliers)")
    print_outputs_summary([csv_path, output / "corpus_truth.json"])


def cmd_clean(args, run: RunConfig):
    """Window, classify outliers and write the clean corpus."""
    pipeline = TrajectoryPipeline(run)
    trajectories = pipeline.load()
    run.validate()

    clean, report = pipeline.clean(pipeline.cut_windows(trajectories))
    output = Path(run.output_dir)
    outputs = [csv_io.export(clean, output / "clean.csv"), report.write(output / "outliers.json")]
    pipeline.processed.extend({'key': tr.key} for tr in clean)
    pipeline.show_final_summary(outputs)


def cmd_fit(args, run: RunConfig):
    """Fit hyperparameters for a degree or degree range and score them."""
    if run.object_class is None:
        raise ArgumentError("--class is required for fit")
    pipeline = TrajectoryPipeline(run)
    trajectories = pipeline.load()
    run.validate(needs_degree=True)

    prepared = pipeline.prepare(pipeline.cut_windows(trajectories))
    if not prepared:
        raise ArgumentError(f"No {run.object_class} trajectories to fit")

    output = Path(run.output_dir)
    try:
        result = pipeline.fit(prepared)
    except OptimizerError as e:
        dump_path = write_json(e.dump, output / f"optimizer_dump_{_tag(run)}.json")
        raise OptimizerError(f"{e} (iterate dump: {dump_path})", dump=e.dump)

    outputs = list(result.write(output / f"scores_{_tag(run)}.csv", output / f"scores_{_tag(run)}.json"))
    for n, hyper in result.hypers.items():
        outputs.append(write_json(hyper.to_json(), output / f"hyper_{_tag(run)}_n{n}.json"))

    best = result.best(run.criterion)
    outputs.append(write_json(best.to_json(), output / f"hyper_{_tag(run)}.json"))
    noise_path = output / f"noise_{_tag(run)}.csv"
    pd.DataFrame(noise_summary_rows(best)).to_csv(noise_path, index=False, lineterminator="\n")
    outputs.append(noise_path)

    pipeline.processed.extend({'key': obs.key} for obs in prepared)
    pipeline.show_final_summary(outputs)


def cmd_evaluate(args, run: RunConfig):
    """Fit posteriors with given hyperparameters and report the representation error."""
    hyper_path = args.hyper or str(Path(run.output_dir) / f"hyper_{_tag(run)}.json")
    try:
        with open(hyper_path, 'r', encoding='utf-8') as f:
            hyper = HyperParams.from_json(json.load(f))
    except FileNotFoundError:
        raise SchemaError("Hyperparameter file not found", path=hyper_path)
    except json.JSONDecodeError as e:
        raise SchemaError(f"Invalid JSON: {e.msg}", path=hyper_path, line=e.lineno)

    if run.object_class is None:
        run.object_class = hyper.object_class
    pipeline = TrajectoryPipeline(run)
    pipeline.check_hyper(hyper)
    trajectories = pipeline.load()
    run.validate()

    prepared = pipeline.prepare(pipeline.cut_windows(trajectories))
    if not prepared:
        raise ArgumentError(f"No {run.object_class} trajectories to evaluate")
    fits, report = pipeline.evaluate(prepared, hyper)

    output = Path(run.output_dir)
    tag = f"{_tag(run)}_n{hyper.degree}"
    table_path = write_error_table([table_row(report, run.object_class, run.horizon, hyper.degree)],
                                   output / f"errors_{tag}.csv")
    quantile_path = write_quantiles(report, run.object_class, run.horizon, hyper.degree,
                                    output / f"quantiles_{tag}.csv")
    per_traj_path = output / f"errors_per_trajectory_{tag}.csv"
    pd.DataFrame(report.per_trajectory).to_csv(per_traj_path, index=False, lineterminator="\n")
    summary_path = write_json(report.summary(), output / f"errors_{tag}.json")
    pipeline.show_final_summary([table_path, quantile_path, per_traj_path, summary_path])


def cmd_show_config(args, run: RunConfig):
    """Show current configuration."""
    print("TRAJECTORY REPRESENTATION TOOLKIT CONFIGURATION")
    print("=" * 40)
    print(f"App Name: {Config.APP_NAME}")
    print(f"Log Level: {Config.LOG_LEVEL}")
    print()
    print("Paths:")
    print(f"  Input: {run.input_path or '-'}")
    print(f"  Output: {run.output_dir}")
    print(f"  Logs: {Config.LOG_DIR}")
    print()
    print("Data Settings:")
    print(f"  Class: {run.object_class or 'all'}")
    print(f"  Horizon: {run.horizon:g} s")
    print(f"  Window Mode: {run.window_mode}")
    print(f"  Frame: {run.frame}")
    print(f"  Sample Rate: {run.sample_rate:g} Hz ({run.nominal_samples()} samples per horizon)")
    print(f"  Duration Tolerance: {Config.DURATION_TOLERANCE}")
    print()
    print("Model:")
    print(f"  Basis: {run.basis_family}")
    print(f"  Degree: {run.degree if run.degree is not None else run.degree_range}")
    print(f"  Criterion: {run.criterion}")
    print(f"  Optimizer: {run.optimizer or Config.OPTIMIZER_METHOD}")
    print(f"  Threads: {run.threads}")
    print(f"  Seed: {run.seed}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Trajectory Representation Toolkit CLI",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python cli.py synth --config synth.json --output-dir out       # Synthetic corpus
  python cli.py clean --input corpus.csv --horizon 5              # Outlier rejection
  python cli.py fit --input clean.csv --class agent --degree-range 1..7
  python cli.py evaluate --input clean.csv --class agent --hyper out/hyper_agent_T5.json
  python cli.py config                                            # Show configuration
        """
    )

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--input', dest='input_path', help='Canonical CSV corpus')
    common.add_argument('--output-dir', dest='output_dir', help=f'Output directory (default: {Config.OUTPUT_DIR})')
    common.add_argument('--class', dest='object_class', choices=['ego', 'agent'], help='Object class')
    common.add_argument('--horizon', type=float, help=f'Horizon T in seconds (default: {Config.HORIZON_S:g})')
    common.add_argument('--sample-rate', dest='sample_rate', type=float,
                        help=f'Nominal sample rate in Hz for the BIC term (default: {Config.SAMPLE_RATE_HZ:g})')
    degree = common.add_mutually_exclusive_group()
    degree.add_argument('--degree', type=int, help='Basis degree n')
    degree.add_argument('--degree-range', dest='degree_range', help='Degree range a..b')
    common.add_argument('--criterion', choices=['aic', 'bic', 'paper-aic'],
                        help=f'Selection criterion (default: {Config.CRITERION})')
    common.add_argument('--window', dest='window_mode', choices=['stride_1s', 'random_one', 'whole'],
                        help=f'Window mode (default: {Config.WINDOW_MODE})')
    common.add_argument('--frame', choices=['local', 'world'], help=f'Fitting frame (default: {Config.FRAME})')
    common.add_argument('--basis', dest='basis_family', choices=['monomial', 'bernstein'],
                        help=f'Basis family (default: {Config.BASIS_FAMILY})')
    common.add_argument('--seed', type=int, help='Random seed')
    common.add_argument('--threads', type=int, help='Worker threads')
    common.add_argument('--config', help='JSON config file')
    common.add_argument('--log-level', dest='log_level', help=f'Log level (default: {Config.LOG_LEVEL})')

    subparsers = parser.add_subparsers(dest='command', help='Available commands')

    synth_parser = subparsers.add_parser('synth', parents=[common], help='Generate a synthetic corpus')
    synth_parser.set_defaults(func=cmd_synth)

    clean_parser = subparsers.add_parser('clean', parents=[common], help='Reject outliers')
    clean_parser.set_defaults(func=cmd_clean)

    fit_parser = subparsers.add_parser('fit', parents=[common], help='Fit hyperparameters and select the degree')
    fit_parser.set_defaults(func=cmd_fit)

    evaluate_parser = subparsers.add_parser('evaluate', parents=[common], help='Report representation errors')
    evaluate_parser.add_argument('--hyper', help='Fitted hyperparameter JSON')
    evaluate_parser.set_defaults(func=cmd_evaluate)

    config_parser = subparsers.add_parser('config', parents=[common], help='Show configuration')
    config_parser.set_defaults(func=cmd_show_config)

    return parser


def main(argv=None) -> int:
    """Main CLI function."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return 0

    configure_logging(args.log_level)

    try:
        file_values = {}
        if args.config and args.command != 'synth':
            file_values = load_json_config(args.config)
        flag_values = {k: v for k, v in vars(args).items() if k not in ('func', 'command', 'config')}
        if flag_values.get('degree_range'):
            flag_values['degree_range'] = parse_degree_range(flag_values['degree_range'])
        run = build_run_config(file_values, flag_values)
        if args.command == 'synth':
            run.validate()
        args.func(args, run)
    except TrajectoryToolkitError as e:
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())

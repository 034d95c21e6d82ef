"""
Command-line interface.

    mssd <command> [--config run.yml] [--data file.csv] [--out dir] [overrides...]

Every ``RunConfig`` key is accepted as a flag (underscores become dashes).
Exit status is 0 on success, 2 on usage errors and 1 on runtime failures,
which print a one-line ``<code>: <message>`` diagnostic on stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import pandas as pd
from pydantic import ValidationError

from mssd.config.run_config import RunConfig, resolve_run_config
from mssd.config.settings import get_settings
from mssd.core.errors import ConfigurationError, MssdError
from mssd.data import SeriesFrame, SynthComponents, load_csv, save_csv, synth_seasonal
from mssd.decompose import decompose, make_period_spec
from mssd.evalbench import (
    AblationSwitches,
    EvalReport,
    SeasonalNaive,
    ablation_study,
    efficiency_bench,
    evaluate,
    evaluate_multivariate,
    fit_global_linear,
    input_length_sweep,
    robustness_sweep,
)
from mssd.evalbench import reports
from mssd.models import MssdModel, load_checkpoint, save_checkpoint
from mssd.training import fit_channel_independent, predict, prepare_splits
from mssd.utils.training_log import TrainingLog

logger = logging.getLogger(__name__)

FLAG_ALIASES = {"samples_per_hour": ["--i"], "output_dir": ["--out"]}
ABLATION_VARIANTS = {
    "no-causal-conv": AblationSwitches(causal_conv=False),
    "no-global-block": AblationSwitches(global_block=False),
    "both": AblationSwitches(causal_conv=False, global_block=False),
    "none": AblationSwitches(),
}


class _Parser(argparse.ArgumentParser):
    """Usage errors print one ``USAGE: <message>`` line and exit 2."""

    def error(self, message: str):
        self.exit(2, f"USAGE: {self.prog}: {message}\n")


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _list_of(kind: Callable[[str], Any]) -> Callable[[str], List[Any]]:
    def parse(text: str) -> List[Any]:
        try:
            parts = [part.strip() for part in text.split(",")]
            if not all(parts):
                raise argparse.ArgumentTypeError(f"empty element in list {text!r}")
            return [kind(part) for part in parts]
        except ValueError as e:
            raise argparse.ArgumentTypeError(str(e)) from e
    return parse


def _flag_type(name: str) -> Callable[[str], Any]:
    if name == "samples_per_hour":
        return int
    if name == "data":
        return str
    default = RunConfig.model_fields[name].get_default(call_default_factory=True)
    if isinstance(default, bool):
        return _bool
    if isinstance(default, (list, tuple)):
        return _list_of(int if all(isinstance(v, int) for v in default) else float)
    return type(default)


def _config_flags() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    parent.add_argument("--config", help="Flat YAML run configuration")
    group = parent.add_argument_group("run configuration overrides")
    for name, info in RunConfig.model_fields.items():
        flags = [f"--{name.replace('_', '-')}"] + FLAG_ALIASES.get(name, [])
        group.add_argument(*flags, dest=name, type=_flag_type(name), default=None, help=info.description)
    return parent


def build_parser() -> argparse.ArgumentParser:
    parent = _config_flags()
    parser = _Parser(prog="mssd", description="MSSD seasonal forecasting toolkit", allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, help_text: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, parents=[parent], help=help_text, allow_abbrev=False)

    p = command("decompose", "Write per-phase component CSVs and a decomposition plot")
    p.set_defaults(handler=cmd_decompose)
    p = command("train", "Fit one model per variable and save checkpoints")
    p.set_defaults(handler=cmd_train)
    p = command("predict", "Forecast from saved checkpoints")
    p.add_argument("--checkpoint", help="Checkpoint file or directory (default <out>/checkpoints)")
    p.add_argument("--window-start", type=int, default=None, help="First row of the input window (default: last I rows)")
    p.set_defaults(handler=cmd_predict)
    p = command("evaluate", "Train and score one model set per horizon")
    p.add_argument("--baselines", action="store_true", help="Also score seasonal-naive and global-linear references")
    p.set_defaults(handler=cmd_evaluate)
    p = command("robustness", "Retrain under growing training-noise ratios")
    p.add_argument("--variable", type=int, default=0)
    p.set_defaults(handler=cmd_robustness)
    p = command("bench", "Time the Peak branch against naive self-attention")
    p.set_defaults(handler=cmd_bench)
    p = command("sweep-input", "Train and score one model per input length")
    p.add_argument("--variable", type=int, default=0)
    p.set_defaults(handler=cmd_sweep_input)
    p = command("ablate", "Paired default/variant training per horizon")
    p.add_argument("--variant", choices=sorted(ABLATION_VARIANTS), default="no-causal-conv")
    p.add_argument("--variable", type=int, default=0)
    p.set_defaults(handler=cmd_ablate)
    p = command("synth", "Generate a synthetic seasonal dataset")
    p.add_argument("--days", type=int, default=200)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--trend-slope", type=float, default=0.0)
    p.add_argument("--noise-std", type=float, default=0.1)
    p.add_argument("--peak-sharpness", type=float, default=2.0)
    p.add_argument("--csv", default=None, help="Output file (default <out>/synth.csv)")
    p.set_defaults(handler=cmd_synth)
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {name: getattr(args, name) for name in RunConfig.model_fields if getattr(args, name, None) is not None}


def _frame(config: RunConfig) -> SeriesFrame:
    if config.data is None:
        raise ConfigurationError("this command needs --data")
    return load_csv(
        config.data,
        delimiter=config.delimiter,
        fill_policy=config.fill_policy,
        samples_per_hour=config.samples_per_hour,
        phase_offset=config.phase_offset,
    )


def _out(config: RunConfig) -> Path:
    path = Path(config.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _training_log(out: Path) -> TrainingLog:
    log = TrainingLog(out / get_settings().TRAINING_LOG_NAME)
    log.clear()
    return log


def _print_table(df: pd.DataFrame) -> None:
    print(reports.format_table(df))


def cmd_decompose(config: RunConfig, args: argparse.Namespace) -> int:
    frame = _frame(config)
    out = _out(config)
    spec = make_period_spec(frame.samples_per_hour)
    decomps = [decompose(frame.column(v), spec, frame.phase_origin()) for v in range(frame.n_variables)]
    for phase in ("ascending", "peak", "descending"):
        df = pd.DataFrame({name: getattr(d, phase) for name, d in zip(frame.variable_names, decomps)})
        df.to_csv(out / f"{phase}.csv", index=False, float_format="%.17g")
    reports.plot_decomposition(frame.column(0), decomps[0], out / "decomposition.svg")
    logger.info(f"Wrote phase components of {frame.n_variables} variable(s) to {out}")
    return 0


def _fit_all(config: RunConfig, frame: SeriesFrame, horizon: Optional[int], log: TrainingLog, jobs: int):
    if horizon is not None:
        config = config.model_copy(update={"horizon": horizon})
    model_config = config.mssd_config(frame.samples_per_hour)
    return fit_channel_independent(
        frame.values,
        model_config,
        config.train_config(),
        variable_names=frame.variable_names,
        phase_origin=frame.phase_origin(),
        jobs=jobs,
        log=log,
    )


def cmd_train(config: RunConfig, args: argparse.Namespace) -> int:
    frame = _frame(config)
    out = _out(config)
    results = _fit_all(config, frame, None, _training_log(out), config.jobs)
    ckpt_dir = out / "checkpoints"
    for name, result in zip(frame.variable_names, results):
        save_checkpoint(result.model, ckpt_dir / f"{name}.ckpt.json")
    config.dump(out / "run_config.yml")
    _print_table(
        pd.DataFrame(
            {
                "variable": frame.variable_names,
                "best_epoch": [r.best_epoch for r in results],
                "best_val_mse": [r.best_val_mse for r in results],
                "epochs_run": [len(r.records) for r in results],
            }
        )
    )
    return 0


def _checkpoints(config: RunConfig, frame: SeriesFrame, location: Optional[str]) -> List[MssdModel]:
    path = Path(location) if location else Path(config.output_dir) / "checkpoints"
    if path.is_file():
        if frame.n_variables != 1:
            raise ConfigurationError(f"one checkpoint given for {frame.n_variables} variables; pass a directory")
        return [load_checkpoint(path)]
    return [load_checkpoint(path / f"{name}.ckpt.json") for name in frame.variable_names]


def cmd_predict(config: RunConfig, args: argparse.Namespace) -> int:
    frame = _frame(config)
    out = _out(config)
    models = _checkpoints(config, frame, args.checkpoint)
    rows = []
    for v, (name, model) in enumerate(zip(frame.variable_names, models)):
        start = args.window_start if args.window_start is not None else len(frame) - model.input_len
        if start < 0 or start + model.input_len > len(frame):
            raise ConfigurationError(
                f"window start {start} leaves fewer than {model.input_len} rows in a frame of {len(frame)}"
            )
        window = frame.column(v)[start:start + model.input_len]
        offset = (start + frame.phase_origin()) % frame.period_T
        forecast = predict(model, window, offset)
        rows.extend({"position": p, "variable": name, "value": value} for p, value in enumerate(forecast))
    path = out / "forecast.csv"
    pd.DataFrame(rows, columns=["position", "variable", "value"]).to_csv(path, index=False, float_format="%.17g")
    logger.info(f"Wrote {len(rows)} forecast rows to {path}")
    return 0


def _baseline_reports(config: RunConfig, frame: SeriesFrame, horizon: int) -> List[EvalReport]:
    spec = config.window_spec(horizon)
    found = []
    for label in ("seasonal_naive", "global_linear"):
        models = []
        for v in range(frame.n_variables):
            splits = prepare_splits(
                frame.column(v), spec, config.split_fractions, frame.period_T, frame.phase_origin()
            )
            if label == "seasonal_naive":
                models.append(SeasonalNaive(spec.input_len, horizon, frame.period_T, splits.norm_stats))
            else:
                models.append(fit_global_linear(splits, spec))
        found.append(evaluate_multivariate(models, frame, spec, config.split_fractions, variant=label))
    return found


def cmd_evaluate(config: RunConfig, args: argparse.Namespace) -> int:
    frame = _frame(config)
    out = _out(config)
    log = _training_log(out)
    found: List[EvalReport] = []
    for horizon in config.horizons:
        results = _fit_all(config, frame, horizon, log, config.jobs)
        found.append(
            evaluate_multivariate(
                [r.model for r in results], frame, config.window_spec(horizon), config.split_fractions
            )
        )
        if args.baselines:
            found.extend(_baseline_reports(config, frame, horizon))
    df = reports.reports_to_frame(found)
    reports.write_csv(df, out / "evaluation.csv")
    reports.plot_metric_vs_horizon(found, out / "metric_vs_horizon.svg")
    _print_table(df)
    return 0


def cmd_robustness(config: RunConfig, args: argparse.Namespace) -> int:
    frame = _frame(config)
    out = _out(config)
    model_config = config.mssd_config(frame.samples_per_hour)
    results = robustness_sweep(
        lambda: MssdModel(model_config),
        frame,
        config.noise_ratios,
        config.train_config(),
        config.sigma_scale,
        variable=args.variable,
        log=_training_log(out),
    )
    df = reports.robustness_to_frame(results)
    reports.write_csv(df, out / "robustness.csv")
    _print_table(df)
    return 0


def cmd_bench(config: RunConfig, args: argparse.Namespace) -> int:
    out = _out(config)
    switches = AblationSwitches(
        causal_conv=config.causal_conv, global_block=config.global_block, attention_reference=True
    )
    result = efficiency_bench(
        config.bench_lengths, switches, config.sdnet_config(), seed=config.seed, repeats=config.bench_repeats
    )
    df = reports.efficiency_to_frame(result)
    reports.write_csv(df, out / "efficiency.csv")
    reports.plot_runtime_vs_length(result, out / "runtime_vs_length.svg")
    _print_table(df)
    for module, slope in result.wall_slopes.items():
        print(f"{module}: wall-time slope {slope:.3f}, analytic slope {result.flop_slopes[module]:.3f}")
    return 0


def cmd_sweep_input(config: RunConfig, args: argparse.Namespace) -> int:
    frame = _frame(config)
    out = _out(config)
    found = input_length_sweep(
        frame,
        config.input_lens,
        config.horizon,
        config.mssd_config(frame.samples_per_hour),
        config.train_config(),
        variable=args.variable,
        log=_training_log(out),
    )
    df = reports.reports_to_frame(found)
    reports.write_csv(df, out / "input_sweep.csv")
    _print_table(df)
    return 0


def cmd_ablate(config: RunConfig, args: argparse.Namespace) -> int:
    frame = _frame(config)
    out = _out(config)
    results = ablation_study(
        frame,
        ABLATION_VARIANTS[args.variant],
        config.horizons,
        config.input_len,
        config.mssd_config(frame.samples_per_hour),
        config.train_config(),
        variable=args.variable,
        log=_training_log(out),
    )
    df = reports.ablation_to_frame(results)
    reports.write_csv(df, out / "ablation.csv")
    _print_table(df)
    return 0


def cmd_synth(config: RunConfig, args: argparse.Namespace) -> int:
    components = SynthComponents(
        amplitude=args.amplitude,
        trend_slope=args.trend_slope,
        noise_std=args.noise_std,
        peak_sharpness=args.peak_sharpness,
    )
    frame = synth_seasonal(args.days, config.samples_per_hour or 1, components, seed=config.seed)
    path = Path(args.csv) if args.csv else _out(config) / "synth.csv"
    save_csv(frame, path)
    logger.info(f"Wrote {len(frame)} synthetic rows to {path}")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    settings = get_settings()
    logging.basicConfig(
        level=settings.LOG_LEVEL,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        overrides = _overrides(args)
        if "jobs" not in overrides and settings.JOBS != 1:
            overrides["jobs"] = settings.JOBS
        if "output_dir" not in overrides and args.config is None:
            overrides["output_dir"] = settings.OUTPUT_DIR
        config = resolve_run_config(args.config, overrides, env_seed=settings.SEED)
        return args.handler(config, args)
    except MssdError as e:
        logger.debug("Command failed", exc_info=True)
        print(str(e), file=sys.stderr)
        return 1
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(part) for part in first["loc"])
        print(str(ConfigurationError(f"invalid value for {where}: {first['msg']}")), file=sys.stderr)
        return 1
    except OSError as e:
        print(f"IO_001: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

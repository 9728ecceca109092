"""``loadseq`` command line: synthesize, engineer, train, tune, evaluate, forecast, compare, experiment.

Every command writes its artifacts under ``--out`` together with
``run-config.yaml`` (the resolved configuration, loadable with ``--config``)
and a ``manifest.json`` that records that configuration, the seeds and a
SHA-256 digest of every input file.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import pathlib
import sys
from dataclasses import replace
from typing import Any, Callable, Dict, List, Optional, Sequence

from . import __version__
from .artifact import load_model, load_pipeline, save_model, save_pipeline
from .config import RunConfig, config_from_dict, config_to_dict, dump_run_config, load_run_config
from .dataset import (
    read_feeder_years,
    read_regional_years,
    read_samples,
    read_transfer_log,
    sample_peak_table,
    write_feeder_years,
    write_forecasts,
    write_regional_years,
    write_samples,
    write_transfer_log,
)
from .debug import configure, log
from .errors import ConfigError, DomainError, LoadSeqError
from .evalkit import build_report, compare_reports, render_comparison, render_text, report_from_json, report_to_json
from .experiments import Prepared, available_studies, evaluate_forecaster, get_study, prepare
from .featlab import RegionalYearRecord, attach_components, temperature_changes
from .forecasters import available_forecasters, sequence_predictions
from .model import CELL, MODE, SEARCH, SEASON
from .pipeline import FeaturePipeline, fit_pipeline
from .seqdata import (
    DatasetSplit,
    apply_temperature_scenario,
    chain_forecast,
    normalize_temperature_scenario,
    split_dataset,
)
from .synthgrid import ECON_COLUMNS, synthesize
from .tuner import SearchSpace, grid_search, network_scorer, random_search, scoreboard_to_json, settings_for

INPUT_FILES = {
    "feeder_years": "feeder_years.csv",
    "regional_years": "regional_years.csv",
    "transfer_log": "transfer_log.csv",
    "regional_forecasts": "regional_forecasts.csv",
}


class Run:
    """One command invocation: resolved config, output directory and the inputs it read."""

    def __init__(self, command: str, argv: Sequence[str], config: RunConfig) -> None:
        self.command = command
        self.argv = list(argv)
        self.config = config
        self.out = pathlib.Path(config.out_dir)
        self.inputs: List[pathlib.Path] = []
        self.outputs: List[str] = []
        self.regional: List[RegionalYearRecord] = []

    def path(self, name: str) -> pathlib.Path:
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs.append(name)
        return self.out / name

    def write_text(self, name: str, text: str) -> pathlib.Path:
        target = self.path(name)
        target.write_text(text, encoding="utf-8")
        return target

    def read(self, path) -> pathlib.Path:
        p = pathlib.Path(path)
        if not p.is_file():
            raise FileNotFoundError(2, "No such file", str(p))
        self.inputs.append(p)
        return p

    def manifest(self) -> Dict[str, Any]:
        c = self.config
        return {
            "command": self.command,
            "argv": self.argv,
            "version": __version__,
            "config": config_to_dict(c),
            "seeds": {"train": c.train.seed, "split": c.split_seed, "synth": c.synth.seed},
            "inputs": {str(p): _sha256(p) for p in self.inputs},
            "outputs": sorted(set(self.outputs)),
        }

    def finish(self) -> None:
        self.write_text("run-config.yaml", dump_run_config(self.config))
        self.write_text("manifest.json", json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n")


def _sha256(path: pathlib.Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


# ---------------------------------------------------------------------------
# Input loading
# ---------------------------------------------------------------------------

def _input_path(run: Run, args: argparse.Namespace, key: str) -> Optional[str]:
    if getattr(args, "data", None):
        candidate = pathlib.Path(args.data) / INPUT_FILES[key]
        if key in ("feeder_years", "regional_years") or candidate.is_file():
            return str(candidate)
        return None
    return getattr(run.config.inputs, key)


def _read_engineered(run: Run, path: pathlib.Path, pipeline: Optional[FeaturePipeline]) -> Prepared:
    c = run.config
    splits = read_samples(path, c.schema.raw_columns(), c.model.mode)
    train, test = tuple(splits.get("train", ())), tuple(splits.get("test", ()))
    if not train or not test:
        raise DomainError(
            f"{path}: needs both train and test samples.\n  Tip: write it with `loadseq engineer`"
        )
    samples = train + test
    split = DatasetSplit(train, test, c.split_seed, c.split_ratio)
    log("INFO", f"{len(samples)} engineered samples: {len(train)} train / {len(test)} test")
    return Prepared((), samples, split, pipeline or fit_pipeline(train, c.schema), sample_peak_table(samples))


def _load_prepared(run: Run, args: argparse.Namespace, *, n_steps: Optional[int] = None,
                   pipeline: Optional[FeaturePipeline] = None) -> Prepared:
    """Samples from an ``engineer`` run (--samples) or built from the raw CSVs.

    A saved pipeline (the model's, else --pipeline) replaces the one fitted here.
    """
    if pipeline is None and getattr(args, "pipeline", None):
        pipeline = load_pipeline(run.read(args.pipeline))
    if pipeline is not None:
        run.config = replace(run.config, schema=pipeline.schema)
    c = run.config
    if getattr(args, "samples", None):
        return _read_engineered(run, run.read(args.samples), pipeline)
    feeder_path = _input_path(run, args, "feeder_years")
    regional_path = _input_path(run, args, "regional_years")
    if not feeder_path or not regional_path:
        raise ConfigError(
            "no input data given.\n  Tip: pass --data DIR or set inputs.feeder_years and inputs.regional_years"
        )
    feeders = read_feeder_years(run.read(feeder_path), c.season)
    regional = read_regional_years(run.read(regional_path), c.schema.econ_columns, c.season)
    transfer_path = _input_path(run, args, "transfer_log")
    events = read_transfer_log(run.read(transfer_path)) if transfer_path else []
    forecasts_path = _input_path(run, args, "regional_forecasts")
    forecasts = None
    if forecasts_path:
        forecasts = {r.year: r for r in read_regional_years(run.read(forecasts_path), c.schema.econ_columns, c.season)}
    run.regional = regional
    prepared = prepare(feeders, regional, events, c, forecast_regional=forecasts, n_steps=n_steps)
    return prepared if pipeline is None else replace(prepared, pipeline=pipeline)


def _write_report(run: Run, report) -> None:
    stem = f"report-{report.label}-{report.season.value}"
    run.write_text(f"{stem}.json", report_to_json(report))
    run.write_text(f"{stem}.txt", render_text(report))
    print(render_text(report), end="")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_synth(run: Run, args: argparse.Namespace) -> int:
    c = run.config
    synth = replace(c.synth, season=c.season)
    run.config = replace(c, synth=synth)
    grid = synthesize(synth)
    columns = list(ECON_COLUMNS)
    write_feeder_years(grid.feeder_years, run.path(INPUT_FILES["feeder_years"]))
    write_regional_years(grid.regional, run.path(INPUT_FILES["regional_years"]), columns)
    write_regional_years(grid.regional_forecasts, run.path(INPUT_FILES["regional_forecasts"]), columns)
    write_transfer_log(grid.transfer_log, run.path(INPUT_FILES["transfer_log"]))
    print(f"wrote {len(grid.feeder_years)} feeder-years for {synth.n_feeders} feeders "
          f"and {len(grid.transfer_log)} transfer events to {run.out}")
    return 0


def cmd_engineer(run: Run, args: argparse.Namespace) -> int:
    prepared = _load_prepared(run, args)
    c = run.config
    p = prepared.pipeline
    write_feeder_years(prepared.feeder_years, run.path("feeder_years_engineered.csv"))
    write_samples({"train": prepared.split.train, "test": prepared.split.test},
                  run.path("samples.csv"), c.schema.raw_columns())
    regional = attach_components(temperature_changes(run.regional), c.schema.econ_columns, p.econ_stats, p.pca)
    write_regional_years(regional, run.path("regional_engineered.csv"), c.schema.econ_columns)
    save_pipeline(run.path("pipeline.json"), p)
    print(f"{len(prepared.samples)} samples ({len(prepared.split.train)} train / {len(prepared.split.test)} test); "
          f"{p.pca.selected_count} principal component(s) kept")
    return 0


def cmd_train(run: Run, args: argparse.Namespace) -> int:
    prepared = _load_prepared(run, args)
    c = run.config
    report, forecaster = evaluate_forecaster(c.model.cell.value, prepared, c)
    save_model(run.path("model.json"), forecaster.net, prepared.pipeline)
    _write_report(run, report)
    return 0


def cmd_tune(run: Run, args: argparse.Namespace) -> int:
    prepared = _load_prepared(run, args)
    c = run.config
    train_set, val_set = prepared.split.train, prepared.split.test
    if c.search.validation == "inner":
        inner = split_dataset(train_set, c.search.inner_ratio, c.split_seed)
        train_set, val_set = inner.train, inner.test
    scorer = network_scorer(train_set, val_set, prepared.pipeline, c.model, c.train)
    space = SearchSpace(c.search.space())
    if c.search.strategy is SEARCH.GRID:
        result = grid_search(space, scorer, seed=c.train.seed, workers=c.search.workers)
    else:
        result = random_search(space, c.search.n_trials, scorer, seed=c.train.seed, workers=c.search.workers)
    run.write_text("scoreboard.json", scoreboard_to_json(result))
    best = settings_for(result.best.config, c.model)
    for t in result.scoreboard:
        status = f"{t.score:.4f}" if not t.failed else f"failed ({t.error})"
        print(f"trial {t.index}: {dict((k, getattr(v, 'value', v)) for k, v in t.config.items())} -> {status}")
    print(f"best: trial {result.best.index} (hidden={best.hidden}, dense={list(best.dense_widths)}, "
          f"score={result.best.score:.4f})")
    return 0


def cmd_evaluate(run: Run, args: argparse.Namespace) -> int:
    c = run.config
    if args.model_file:
        net, pipeline = load_model(run.read(args.model_file))
        prepared = _load_prepared(run, args, n_steps=net.n_steps, pipeline=pipeline)
        test = prepared.split.test
        report = build_report(
            f"{net.cell_kind.value}-{net.config.value.replace('_', '-')}",
            [s.final_peak for s in test], sequence_predictions(net, pipeline, test),
            season=c.season, record_ids=[s.record_id for s in test],
            bin_width=c.bin_width, threshold=c.threshold,
        )
    else:
        prepared = _load_prepared(run, args)
        report, _ = evaluate_forecaster(args.model, prepared, run.config)
    _write_report(run, report)
    return 0


def _future_econ(run: Run, args: argparse.Namespace, last_year: int, horizon: int) -> Dict[int, Dict[str, float]]:
    c = run.config
    columns = c.schema.econ_columns
    if args.future_regional:
        records = read_regional_years(run.read(args.future_regional), columns, c.season)
        econ = {r.year: dict(r.econ) for r in records if r.year > last_year}
    else:
        econ = {}
    last = max(run.regional, key=lambda r: r.year)
    for year in range(last_year + 1, last_year + horizon + 1):
        econ.setdefault(year, dict(econ.get(year - 1, last.econ)))
    return econ


def cmd_forecast(run: Run, args: argparse.Namespace) -> int:
    c = run.config
    net, pipeline = load_model(run.read(args.model_file))
    prepared = _load_prepared(run, args, n_steps=net.n_steps, pipeline=pipeline)
    regional = run.regional
    last_regional = max(r.year for r in regional)
    last_feeder = max(r.year for r in prepared.feeder_years)
    span = max(last_feeder + c.horizon - last_regional, 0)
    temperature = normalize_temperature_scenario([r.temperature for r in regional], c.temp_margin, c.season)
    scenario = apply_temperature_scenario(regional, _future_econ(run, args, last_regional, span), temperature)
    by_feeder: Dict[str, list] = {}
    for rec in prepared.feeder_years:
        by_feeder.setdefault(rec.feeder_id, []).append(rec)
    chains = []
    for feeder_id in sorted(by_feeder):
        try:
            chains.append(chain_forecast(net, pipeline, by_feeder[feeder_id], c.horizon, regional, scenario,
                                         event_margin=c.event_margin))
        except DomainError as exc:
            log("WARN", f"feeder {feeder_id}: no forecast ({exc})")
    write_forecasts(chains, run.path("forecasts.csv"))
    print(f"forecast {len(chains)} feeder(s) for {c.horizon} year(s) at {temperature:.2f} C")
    return 0


def cmd_compare(run: Run, args: argparse.Namespace) -> int:
    reports = [report_from_json(run.read(p).read_text(encoding="utf-8")) for p in args.reports]
    text = render_comparison(compare_reports(reports))
    run.write_text("comparison.txt", text)
    print(text, end="")
    return 0


def cmd_experiment(run: Run, args: argparse.Namespace) -> int:
    study = get_study(args.study)
    text = study.run(run.config)
    run.write_text(f"experiment-{study.key}.txt", text)
    print(f"[{study.key}] {study.title}")
    print(text, end="")
    return 0


COMMANDS: Dict[str, Callable[[Run, argparse.Namespace], int]] = {
    "synth": cmd_synth,
    "engineer": cmd_engineer,
    "train": cmd_train,
    "tune": cmd_tune,
    "evaluate": cmd_evaluate,
    "forecast": cmd_forecast,
    "compare": cmd_compare,
    "experiment": cmd_experiment,
}


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML run configuration.")
    common.add_argument("--season", choices=[s.value for s in SEASON])
    common.add_argument("--out", metavar="DIR", help="Output directory (default: out).")
    common.add_argument("--seed", type=int, help="Training and synthesis seed.")
    common.add_argument("--data", metavar="DIR", help="Directory holding the input CSVs written by `synth`.")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG.")
    return common


def _model_parser() -> argparse.ArgumentParser:
    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--cell", choices=[c.value for c in CELL])
    model.add_argument("--mode", type=MODE.parse, metavar="{many-to-one,many-to-many}")
    model.add_argument("--epochs", type=int)
    model.add_argument("--batch-size", type=int)
    model.add_argument("--pve", type=float, help="Variance share the kept principal components must reach.")
    model.add_argument("--no-virtual-feeders", action="store_true", help="Keep transfer-affected feeders as-is.")
    model.add_argument("--timing", action="store_true", default=None,
                       help="Record training wall-clock in reports (breaks byte-identical reruns).")
    return model


def _engineered_parser() -> argparse.ArgumentParser:
    engineered = argparse.ArgumentParser(add_help=False)
    engineered.add_argument("--samples", metavar="PATH",
                            help="samples.csv from `engineer`; replaces the raw CSVs and keeps its split.")
    engineered.add_argument("--pipeline", metavar="PATH",
                            help="pipeline.json from `engineer`; used instead of refitting the pipeline.")
    return engineered


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loadseq", description="Hybrid long-term feeder peak load forecasting.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common, model, engineered = _common_parser(), _model_parser(), _engineered_parser()

    sub.add_parser("synth", parents=[common], help="Write a synthetic feeder grid as CSV.")
    sub.add_parser("engineer", parents=[common, model], help="Virtual feeders, samples and the fitted pipeline.")
    sub.add_parser("train", parents=[common, model, engineered],
                   help="Fit one sequence model and report on the test split.")

    tune = sub.add_parser("tune", parents=[common, model, engineered], help="Grid or random hyperparameter search.")
    tune.add_argument("--search", choices=[s.value for s in SEARCH])
    tune.add_argument("--trials", type=int)
    tune.add_argument("--workers", type=int)

    evaluate = sub.add_parser("evaluate", parents=[common, model, engineered], help="Score a model on the test split.")
    which = evaluate.add_mutually_exclusive_group(required=True)
    which.add_argument("--model", choices=available_forecasters(), help="Fit a named forecaster.")
    which.add_argument("--model-file", metavar="PATH", help="Score a saved model document.")

    forecast = sub.add_parser("forecast", parents=[common, model], help="Chained multi-year forecasts.")
    forecast.add_argument("--model-file", metavar="PATH", required=True)
    forecast.add_argument("--future-regional", metavar="PATH",
                          help="Regional CSV with future economic columns (default: carry the last year).")
    forecast.add_argument("--temp-margin", type=float, metavar="DEG",
                          help="Added to the historical temperature extreme.")
    forecast.add_argument("--horizon", type=int)
    forecast.add_argument("--event-margin", type=float, metavar="AMPS", help="Added to every forecast peak.")

    compare = sub.add_parser("compare", parents=[common], help="Merge report JSON files into one MAPE grid.")
    compare.add_argument("reports", nargs="+", metavar="REPORT")

    experiment = sub.add_parser("experiment", parents=[common, model], help="Run a comparative study.")
    experiment.add_argument("study", choices=[s.key for s in available_studies()])
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    get = lambda name: getattr(args, name, None)  # noqa: E731
    return {
        "season": get("season"),
        "out_dir": get("out"),
        "train.seed": get("seed"),
        "synth.seed": get("seed"),
        "model.cell": get("cell"),
        "model.mode": get("mode"),
        "train.epochs": get("epochs"),
        "train.batch_size": get("batch_size"),
        "schema.pve_threshold": get("pve"),
        "virtual_feeders": False if get("no_virtual_feeders") else None,
        "timing": get("timing"),
        "search.strategy": get("search"),
        "search.n_trials": get("trials"),
        "search.workers": get("workers"),
        "temp_margin": get("temp_margin"),
        "horizon": get("horizon"),
        "event_margin": get("event_margin"),
    }


def resolve_config(args: argparse.Namespace) -> RunConfig:
    base = load_run_config(args.config) if args.config else config_from_dict(None)
    return base.with_overrides(_overrides(args))


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        configure(log_level="DEBUG" if args.verbose > 1 else "INFO")

    try:
        config = resolve_config(args)
        run = Run(args.command, argv, config)
        code = COMMANDS[args.command](run, args)
        run.finish()
        return code
    except FileNotFoundError as exc:
        print(f"loadseq: error: no such file: {exc.filename or exc}", file=sys.stderr)
        return 3
    except LoadSeqError as exc:
        print(f"loadseq: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())

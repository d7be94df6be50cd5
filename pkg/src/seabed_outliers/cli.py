"""Command-line entry point: ``seabed-outliers <command> --config run.json``.

Every command writes plain CSV/JSON files plus ``manifest.json`` recording
the seed, the config hash and a digest of every output.  Outputs are staged
in a temporary directory and only moved into place when the command
succeeds.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import shutil
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import __version__
from .arrivals import write_arrivals_csv
from .classifier import classify, draw_uniforms, success_rate, write_classified_csv
from .config import RunConfig, load_config
from .errors import (
    DataFormatError,
    InvalidArgumentError,
    NumericalError,
    UndefinedRateError,
)
from .evaluation import (
    Scenario,
    ScenarioConfig,
    classification_experiment,
    detection_experiment,
    pipeline_comparison,
    prepare_scenario,
    scenario_from_posterior,
    synthesize_window,
)
from .gap_analysis import gap_report, write_gap_csv, write_gap_summary
from .gp import IntensityField, intensity_stats
from .inference import bin_arrivals, default_prior, fit_arrivals, fit_posterior
from .outlier_probability import p_outlier_mean_only, p_outlier_second_order
from .ingest import LineSegmentSpec, parse_records, project_to_segment, write_projection_csv
from .outlier_probability import p_outlier_mc, write_curves_csv
from .placement import greedy_place, write_placement_json, write_sensors_csv

log = logging.getLogger("seabed_outliers")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4
COMMANDS = ("fit", "synth", "classify", "gap", "place", "evaluate", "pipeline")


class ConfigError(Exception):
    pass


def scenario_config(cfg: RunConfig, **overrides) -> ScenarioConfig:
    h, o, d, e = cfg.history, cfg.outliers, cfg.detection, cfg.experiment
    sc = ScenarioConfig(
        length_km=cfg.grid.length_km,
        n_cells=cfg.grid.n_cells,
        matern=cfg.matern_params(),
        normals_per_unit_time=h.normals_per_unit_time,
        lanes=tuple(tuple(l) for l in h.lanes),
        background_fraction=h.background_fraction,
        history_duration=h.duration,
        window=o.window,
        outlier_rate_per_km=o.rate_per_km,
        lambda1_init_per_km=o.lambda1_init_per_km,
        count_mode=o.count_mode,
        count_model_samples=e.count_model_samples,
        detection=cfg.detection_model(),
        n_sensors=d.n_sensors,
        detection_trials=e.detection_trials,
    )
    return replace(sc, **overrides)


def _ais_history(cfg: RunConfig):
    a = cfg.history.ais
    spec = LineSegmentSpec(a.endpoint_a, a.endpoint_b, a.corridor_halfwidth_km)
    try:
        with open(a.path, newline="") as fh:
            parsed = parse_records(fh)
    except OSError as err:
        raise DataFormatError(f"cannot read AIS file {a.path}: {err}") from err
    proj = project_to_segment(parsed.records, spec, a.window)
    return proj, parsed.skipped


def build_scenario(cfg: RunConfig, rng: np.random.Generator, **overrides):
    """Returns the scenario plus a dict of ingest details (empty for synthetic history)."""
    if cfg.history.source == "synthetic":
        return prepare_scenario(scenario_config(cfg, **overrides), rng), {}
    proj, skipped = _ais_history(cfg)
    duration = proj.duration_hours / cfg.history.ais.unit_time_hours
    sc_cfg = scenario_config(cfg, length_km=proj.arrivals.length_km,
                             history_duration=duration, **overrides)
    grid = sc_cfg.grid
    history = bin_arrivals(grid, proj.arrivals, duration)
    posterior = fit_posterior(history, default_prior(history, sc_cfg.matern))
    scenario = scenario_from_posterior(sc_cfg, posterior, history, rng)
    return scenario, {"projection": proj, "skipped_rows": skipped}


def _fmt(x) -> str:
    return repr(float(x))


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _write_field_csv(path, field_):
    stats = intensity_stats(field_)
    rows = [
        (_fmt(s), _fmt(m), _fmt(np.sqrt(v)), _fmt(im), _fmt(isd))
        for s, m, v, im, isd in zip(field_.grid.cell_centers, field_.mean, np.diag(field_.cov),
                                    stats.mean, stats.sd)
    ]
    _write_csv(path, ["s_km", "log_mean", "log_sd", "intensity_mean", "intensity_sd"], rows)


def _count_model_doc(scenario: Scenario) -> dict:
    m = scenario.count_model
    return {"mu_N": m.mu_N, "sigma_N": m.sigma_N, "unit_time": m.unit_time,
            "history_duration": scenario.history.duration,
            "history_total": scenario.history.total}


# -- commands -----------------------------------------------------------------

def cmd_fit(cfg, rngs, out: Path, workers: int):
    scenario, extra = build_scenario(cfg, rngs[0])
    _write_field_csv(out / "posterior.csv", scenario.posterior)
    doc = _count_model_doc(scenario)
    if "projection" in extra:
        write_projection_csv(out / "arrivals.csv", extra["projection"])
        doc["skipped_rows"] = extra["skipped_rows"]
        doc["n_arrivals"] = len(extra["projection"].arrivals)
        doc["segment_length_km"] = extra["projection"].arrivals.length_km
    else:
        rows = [(_fmt(s), int(c)) for s, c in zip(scenario.grid.cell_centers,
                                                  scenario.history.counts)]
        _write_csv(out / "history_counts.csv", ["s_km", "count"], rows)
    _write_json(out / "count_model.json", doc)


def cmd_synth(cfg, rngs, out, workers):
    scenario, _ = build_scenario(cfg, rngs[0])
    write_arrivals_csv(out / "dataset.csv", synthesize_window(scenario, rngs[1]))


def _classify_both(scenario, rng):
    window = synthesize_window(scenario, rng)
    u = draw_uniforms(rng, len(window))
    return window, {
        name: classify(window, scenario.count_model, curve, uniforms=u)
        for name, curve in (("mean_only", scenario.mean_only),
                            ("second_order", scenario.second_order))
    }


def cmd_classify(cfg, rngs, out, workers):
    scenario, _ = build_scenario(cfg, rngs[0])
    window, results = _classify_both(scenario, rngs[1])
    write_arrivals_csv(out / "dataset.csv", window)
    summary = {"n_arrivals": len(window), "n_outliers": window.n_outliers,
               "gate_probability": scenario.count_model.gate_probability(len(window)),
               "count_model": _count_model_doc(scenario)}
    for name, marked in results.items():
        write_classified_csv(out / f"classified_{name}.csv", marked)
        try:
            score = success_rate(marked)
            summary[name] = {"success_rate": score.success_rate,
                             "false_positive_rate": score.false_positive_rate,
                             "n_marked": score.n_marked}
        except UndefinedRateError:
            summary[name] = {"success_rate": None, "n_marked": int(marked.classified.sum())}
    _write_json(out / "classify_summary.json", summary)


def cmd_gap(cfg, rngs, out, workers):
    scenario, _ = build_scenario(cfg, rngs[0])
    lam1 = IntensityField.constant(scenario.grid, cfg.outliers.rate_per_km)
    mc = p_outlier_mc(scenario.posterior, lam1, cfg.experiment.mc_samples, rngs[1])
    report = gap_report(mc, scenario.stats, lam1)
    write_gap_csv(out / "gap.csv", report)
    write_gap_summary(out / "gap_summary.json", report)
    write_curves_csv(out / "curves.csv", [
        mc,
        p_outlier_mean_only(scenario.grid, scenario.stats, lam1),
        p_outlier_second_order(scenario.grid, scenario.stats, lam1),
    ])


def _place(cfg, scenario, rng):
    window, results = _classify_both(scenario, rng)
    marked = results["second_order"].marked()
    lam1 = fit_arrivals(scenario.grid, marked, scenario.config.window, scenario.config.matern)
    placement = greedy_place(scenario.grid.cell_centers, cfg.detection.n_sensors, lam1,
                             scenario.config.detection, cfg.detection.horizon_ratio)
    return window, marked, lam1, placement


def cmd_place(cfg, rngs, out, workers):
    scenario, _ = build_scenario(cfg, rngs[0])
    window, marked, lam1, placement = _place(cfg, scenario, rngs[1])
    write_arrivals_csv(out / "dataset.csv", window)
    _write_field_csv(out / "lambda1.csv", lam1)
    write_sensors_csv(out / "sensors.csv", placement.sensors)
    write_placement_json(out / "placement.json", placement, n_marked=len(marked),
                         curve="second_order")


def cmd_evaluate(cfg, rngs, out, workers):
    iterations = cfg.experiment.classification_iterations
    scales = cfg.experiment.scales if cfg.history.source == "synthetic" else [None]
    doc = {"classification": []}
    trace_rows = []
    stream = rngs[1]
    for scale in scales:
        overrides = {} if scale is None else {"history_duration": float(scale)}
        scenario, _ = build_scenario(cfg, stream, **overrides)
        summary = classification_experiment(scenario, iterations, stream)
        trace = summary.pop("trace")
        summary["history_duration"] = scenario.history.duration
        doc["classification"].append(summary)
        trace_rows += [(_fmt(scenario.history.duration), i, _fmt(a), _fmt(b))
                       for i, (a, b) in enumerate(trace)]
    scenario, _ = build_scenario(cfg, rngs[0])
    window, _, _, placement = _place(cfg, scenario, stream)
    det = detection_experiment(window, placement.sensors, scenario.config.detection,
                               cfg.experiment.detection_trials, stream)
    doc["detection"] = {"rate": det.rate, "stderr": det.stderr,
                        "expected_rate": det.expected_rate, "trials": det.trials,
                        "sensors_km": placement.sensors.positions.tolist()}
    _write_json(out / "evaluation.json", doc)
    _write_csv(out / "classification_trace.csv",
               ["history_duration", "iteration", "success_mean_only", "success_second_order"],
               trace_rows)


def cmd_pipeline(cfg, rngs, out, workers):
    scenario, _ = build_scenario(cfg, rngs[0])
    summary = pipeline_comparison(scenario, cfg.experiment.replications, rngs[1], workers)
    rows = summary.pop("rows")
    summary["count_model"] = _count_model_doc(scenario)
    _write_json(out / "pipeline.json", summary)
    header = ["replication", "n_arrivals", "n_outliers"]
    branches = [b for b in ("mean_only", "second_order", "oracle") if f"{b}_rate" in rows[0]]
    for b in branches:
        header += [f"{b}_rate", f"{b}_expected", f"{b}_marked", f"{b}_sensors"]
    table = []
    for i, r in enumerate(rows):
        line = [i, r["n_arrivals"], r["n_outliers"]]
        for b in branches:
            line += [_fmt(r[f"{b}_rate"]), _fmt(r[f"{b}_expected"]), r[f"{b}_marked"],
                     " ".join(_fmt(p) for p in r[f"{b}_sensors"])]
        table.append(line)
    _write_csv(out / "replications.csv", header, table)


HANDLERS = {
    "fit": cmd_fit, "synth": cmd_synth, "classify": cmd_classify, "gap": cmd_gap,
    "place": cmd_place, "evaluate": cmd_evaluate, "pipeline": cmd_pipeline,
}


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run(command: str, config_path, seed: int, output_dir, workers: int | None = None,
        deterministic: bool = False) -> int:
    """Execute one command; returns the process exit status."""
    try:
        try:
            cfg, config_hash = load_config(config_path)
        except (OSError, ValueError) as err:
            raise ConfigError(str(err)) from err
        if command not in HANDLERS:
            raise ConfigError(f"unknown command {command!r}")
        n_workers = 1 if deterministic else (workers or cfg.workers)

        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        stage = Path(tempfile.mkdtemp(prefix=f".{command}-", dir=out))
        try:
            rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2)]
            HANDLERS[command](cfg, rngs, stage, n_workers)
            files = sorted(p.name for p in stage.iterdir())
            manifest = {
                "command": command,
                "seed": seed,
                "config_sha256": config_hash,
                "config": cfg.model_dump(mode="json"),
                "version": __version__,
                "files": {name: _sha256(stage / name) for name in files},
            }
            _write_json(stage / "manifest.json", manifest)
            for name in files + ["manifest.json"]:
                os.replace(stage / name, out / name)
        finally:
            shutil.rmtree(stage, ignore_errors=True)
    except ValidationError as err:
        _report(f"config error in {config_path}:\n{_field_errors(err)}")
        return EXIT_CONFIG
    except ConfigError as err:
        _report(f"config error: {err}")
        return EXIT_CONFIG
    except NumericalError as err:
        _report(f"numerical error: {err}")
        return EXIT_NUMERICAL
    except (DataFormatError, InvalidArgumentError, UndefinedRateError) as err:
        _report(f"data error: {err}")
        return EXIT_DATA
    return EXIT_OK


def _field_errors(err: ValidationError) -> str:
    return "\n".join(
        f"  {'.'.join(str(p) for p in e['loc']) or '<root>'}: {e['msg']}" for e in err.errors()
    )


def _report(message: str):
    print(message, file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seabed-outliers",
        description="Commission-outlier classification and sensor placement on a line segment.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--workers", type=int, default=None,
                        help="parallel workers for replications (default: config value)")
    parser.add_argument("--deterministic", action="store_true",
                        help="force a single worker")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return run(args.command, args.config, args.seed, args.out, args.workers, args.deterministic)


if __name__ == "__main__":
    sys.exit(main())

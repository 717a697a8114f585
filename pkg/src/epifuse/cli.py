"""Command-line front end.

Subcommands: ingest, cluster, simulate, forecast, backtest, report.
Exit codes: 0 ok, 1 usage, 2 data validation / config, 3 runtime failure.

Every output file starts with a ``#`` comment line naming the resolved
config hash and seed, and a fully resolved config copy is written next to
the outputs, so any run can be reproduced from its artifacts.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as dt
import sys
from pathlib import Path

import numpy as np

from . import mechanistic
from ._rng import derive_seed
from .backtest import walk_forward
from .clustering import cluster_regions, pairwise_correlation
from .config import RunConfig
from .errors import ConfigError, DataValidationError, EpifuseError
from .evaluation import build_eval_report, coefficient_traces, matrix_similarity
from .forecaster import ForecastRecord, feature_columns
from .ingest import ingest
from .timeseries import aggregate, is_search_signal

_USAGE_EXIT = 1
_DATA_EXIT = 2
_RUNTIME_EXIT = 3


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; we reserve 2 for
    data validation."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(_USAGE_EXIT)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return str(float(value))
    return str(value)


def _write_csv(path: Path, header: list[str], rows, cfg: RunConfig) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_hash={cfg.config_hash} seed={cfg.seed}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_text(path: Path, body: str, cfg: RunConfig) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"# config_hash={cfg.config_hash} seed={cfg.seed}\n")
        fh.write(body if body.endswith("\n") else body + "\n")


def _load_panel(cfg: RunConfig):
    cases = cfg.input_path("cases")
    if cases is None:
        raise ConfigError("inputs.cases is required")
    panel, report = ingest(
        cases,
        search_path=cfg.input_path("search"),
        media_path=cfg.input_path("media"),
        mechanistic_path=cfg.input_path("mechanistic"),
        combine_search_terms=cfg.data["features"]["combine_search_terms"],
    )
    return panel, report


def _effective_models_and_spec(cfg: RunConfig, panel, models):
    """Auto-disable features whose signals are absent, with warnings."""
    spec = cfg.feature_spec()
    notes = []
    if spec.use_search and not any(is_search_signal(s) for s in panel.signals):
        spec = dataclasses.replace(spec, use_search=False)
        notes.append("no search signal ingested; search features disabled")
    if spec.use_media and "media_count" not in panel.signals:
        spec = dataclasses.replace(spec, use_media=False)
        notes.append("no media signal ingested; media features disabled")
    if "mechanistic_forecast" not in panel.signals and "augmented" in models:
        models = tuple(m for m in models if m != "augmented")
        notes.append("no mechanistic signal ingested; augmented model disabled")
    for note in notes:
        print(f"warning: {note}", file=sys.stderr)
    return spec, models


def _parse_as_of(text: str | None, agg) -> dt.date:
    if text is None:
        return _last_observed_bin(agg)
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise ConfigError(f"--as-of: expected an ISO date, got {text!r}") from None


def _last_observed_bin(agg) -> dt.date:
    confirmed = agg.values["confirmed"]
    for t in range(agg.n_bins - 1, -1, -1):
        if np.any(np.isfinite(confirmed[:, t])):
            return agg.bins[t]
    raise EpifuseError("panel contains no observed case bins")


def _forecast_rows(records: list[ForecastRecord]):
    for rec in records:
        yield (
            rec.as_of.isoformat(),
            rec.target_date.isoformat(),
            rec.region,
            rec.model,
            rec.estimate,
            rec.spread,
            rec.cluster_id,
            "|".join(rec.flags),
        )


def _partition_rows(partitions):
    for partition, excluded in partitions:
        as_of = partition.as_of.isoformat() if partition.as_of else ""
        ch = partition.ch_score
        for region, label in zip(partition.regions, partition.labels):
            yield (as_of, region, int(label), partition.k, ch)
        for region in excluded:
            yield (as_of, region, -1, partition.k, ch)


def _flagship_model(traces: dict) -> str | None:
    for name in ("augmented", "argonet", "argo"):
        if name in traces and traces[name]:
            return name
    return None


def cmd_ingest(cfg: RunConfig, out_dir: Path, args) -> int:
    panel, report = _load_panel(cfg)
    _write_text(out_dir / "ingest_report.txt", report.summary(), cfg)
    cfg.write_resolved(out_dir)
    print(
        f"ingested {len(panel.regions)} regions x {panel.n_days} days; "
        f"{report.findings} validation finding(s)"
    )
    print(report.summary())
    return 0


def cmd_cluster(cfg: RunConfig, out_dir: Path, args) -> int:
    panel, _ = _load_panel(cfg)
    agg = aggregate(panel)
    as_of = _parse_as_of(args.as_of, agg)
    pc = cfg.pipeline_config()
    partition, excluded, dendrogram = cluster_regions(
        agg, as_of, k_range=pc.k_range, enabled=pc.clustering_enabled,
        ch_features=pc.ch_features,
    )
    _write_csv(
        out_dir / "partition.csv",
        ["as_of", "region", "cluster_id", "k", "ch_score"],
        _partition_rows([(partition, excluded)]),
        cfg,
    )
    merges = dendrogram.merges if dendrogram is not None else ()
    _write_csv(
        out_dir / "dendrogram.csv",
        ["left", "right", "height"],
        ((left, right, height) for left, right, height in merges),
        cfg,
    )
    cfg.write_resolved(out_dir)
    print(f"clustered {len(partition.regions)} regions into k={partition.k} at {as_of}")
    return 0


def cmd_simulate(cfg: RunConfig, out_dir: Path, args) -> int:
    sc = cfg.data["mechanistic_scenario"]
    regions = sc["regions"]
    if regions is None:
        if cfg.input_path("cases") is not None:
            panel, _ = _load_panel(cfg)
            regions = list(panel.regions)
        else:
            raise ConfigError(
                "mechanistic_scenario.regions is required when no cases file is configured"
            )
    m = len(regions)
    mobility = mechanistic.hub_mobility(
        m,
        hub_strength=float(sc["hub_strength"]),
        local_strength=float(sc["local_strength"]),
        seed=derive_seed(cfg.seed, "mobility"),
    )
    metapop = mechanistic.Metapopulation.seeded(
        regions,
        [int(sc["population"])] * m,
        mobility,
        seed_subpop=int(sc["seed_subpop"]),
        seed_latent=int(sc["seed_latent"]),
    )
    params = mechanistic.EpiParams.from_r0(
        float(sc["r0"]),
        float(sc["latent_period"]),
        float(sc["infectious_period"]),
        steps_per_day=int(sc["steps_per_day"]),
        infectious_travel=sc["infectious_travel"],
    )
    start = (
        dt.date.fromisoformat(sc["start_date"])
        if sc["start_date"]
        else dt.date(2020, 1, 1)
    )
    sim = mechanistic.simulate_ensemble(
        metapop,
        params,
        horizon=int(sc["horizon"]),
        runs=int(sc["runs"]),
        seed=derive_seed(cfg.seed, "simulate"),
        start_date=start,
    )
    medians = sim.bin_median()  # (subpops, bins)
    bin_dates = sim.bin_dates()

    def rows():
        for b, end_date in enumerate(bin_dates):
            for day_offset in range(sim.window - 1, -1, -1):
                date = end_date - dt.timedelta(days=day_offset)
                for r, region in enumerate(regions):
                    # split each bin's median evenly over its days so ingest
                    # binning reproduces the bin value exactly
                    yield (date.isoformat(), region, medians[r, b] / sim.window)

    path = out_dir / "mechanistic.csv"
    _write_csv(path, ["date", "region", "forecast_new_cases"], rows(), cfg)
    cfg.write_resolved(out_dir)
    print(f"simulated {int(sc['runs'])} runs over {int(sc['horizon'])} days -> {path}")
    return 0


def _run_walk_forward(cfg: RunConfig, panel, start, end, jobs):
    agg = aggregate(panel)
    spec, models = _effective_models_and_spec(cfg, panel, cfg.models)
    result = walk_forward(
        agg,
        start,
        end,
        spec,
        cfg.seed,
        cfg=cfg.pipeline_config(),
        models=models,
        jobs=jobs,
    )
    return agg, spec, models, result


def cmd_forecast(cfg: RunConfig, out_dir: Path, args) -> int:
    panel, _ = _load_panel(cfg)
    agg = aggregate(panel)
    as_of = _parse_as_of(args.as_of, agg)
    agg, spec, models, result = _run_walk_forward(cfg, panel, as_of, as_of, args.jobs)
    _write_csv(
        out_dir / "forecasts.csv",
        ["as_of", "target_date", "region", "model", "estimate", "spread", "cluster_id", "flags"],
        _forecast_rows(result.records),
        cfg,
    )
    cfg.write_resolved(out_dir)
    print(f"wrote {len(result.records)} forecasts for {as_of}")
    return 0


def cmd_backtest(cfg: RunConfig, out_dir: Path, args) -> int:
    start, end = cfg.backtest_range
    if start is None or end is None:
        raise ConfigError("backtest.start and backtest.end are required")
    panel, _ = _load_panel(cfg)
    agg, spec, models, result = _run_walk_forward(cfg, panel, start, end, args.jobs)

    _write_csv(
        out_dir / "forecasts.csv",
        ["as_of", "target_date", "region", "model", "estimate", "spread", "cluster_id", "flags"],
        _forecast_rows(result.records),
        cfg,
    )
    _write_csv(
        out_dir / "partition.csv",
        ["as_of", "region", "cluster_id", "k", "ch_score"],
        _partition_rows(result.partitions),
        cfg,
    )
    rows = build_eval_report(result.records, agg)
    _write_csv(
        out_dir / "eval.csv",
        ["region", "model", "rmse", "pearson", "relative_improvement", "n_points"],
        (
            (r.region, r.model, r.rmse, r.pearson, r.relative_improvement, r.n_points)
            for r in rows
        ),
        cfg,
    )
    flagship = _flagship_model(result.traces)
    trace_rows = []
    if flagship is not None:
        mech_on = flagship == "augmented"
        feats = feature_columns(
            dataclasses.replace(spec, use_mechanistic=mech_on), agg
        )
        trace_rows = coefficient_traces(result.traces[flagship], feats)
    _write_csv(
        out_dir / "coefficient_traces.csv",
        ["region", "feature", "as_of", "mean_coef"],
        (
            (t.region, t.feature, t.as_of.isoformat(), t.mean_coef)
            for t in trace_rows
        ),
        cfg,
    )
    cfg.write_resolved(out_dir)
    print(
        f"backtest {start}..{end}: {len(result.records)} forecasts, "
        f"{len(rows)} eval rows, models: {', '.join(models)}"
    )
    return 0


def _read_forecasts_csv(path: Path) -> list[ForecastRecord]:
    records = []
    with path.open("r", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    for row in reader:
        records.append(
            ForecastRecord(
                region=row["region"],
                as_of=dt.date.fromisoformat(row["as_of"]),
                target_date=dt.date.fromisoformat(row["target_date"]),
                model=row["model"],
                estimate=float(row["estimate"]),
                spread=float(row["spread"]) if row["spread"] else 0.0,
                cluster_id=int(row["cluster_id"]) if row["cluster_id"] else -1,
                flags=tuple(f for f in row["flags"].split("|") if f),
            )
        )
    return records


def _read_matrix_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with path.open("r", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    names = [h.strip() for h in header[1:]]
    rows = []
    for row in reader:
        if not row:
            continue
        rows.append([float(v) for v in row[1:]])
    matrix = np.array(rows)
    if matrix.shape != (len(names), len(names)):
        raise DataValidationError(f"matrix in {path} is not square against its header")
    return names, matrix


def cmd_report(cfg: RunConfig, out_dir: Path, args) -> int:
    panel, _ = _load_panel(cfg)
    agg = aggregate(panel)
    forecasts_path = Path(args.forecasts) if args.forecasts else out_dir / "forecasts.csv"
    if not forecasts_path.exists():
        raise EpifuseError(f"no forecasts file at {forecasts_path}")
    records = _read_forecasts_csv(forecasts_path)
    rows = build_eval_report(records, agg)
    _write_csv(
        out_dir / "eval.csv",
        ["region", "model", "rmse", "pearson", "relative_improvement", "n_points"],
        (
            (r.region, r.model, r.rmse, r.pearson, r.relative_improvement, r.n_points)
            for r in rows
        ),
        cfg,
    )
    if args.mobility:
        names, mobility = _read_matrix_csv(Path(args.mobility))
        sub_regions = [r for r in agg.regions if r in set(names)]
        if len(sub_regions) < 2:
            raise EpifuseError("mobility matrix shares fewer than 2 regions with the panel")
        corr = pairwise_correlation(agg)
        cidx = [agg.regions.index(r) for r in sub_regions]
        midx = [names.index(r) for r in sub_regions]
        case_m = corr.values[np.ix_(cidx, cidx)]
        mob_m = mobility[np.ix_(midx, midx)]
        pear, cosine = matrix_similarity(mob_m, case_m)
        body = (
            f"regions_compared={len(sub_regions)}\n"
            f"pearson={_fmt(pear)}\n"
            f"cosine={_fmt(cosine)}\n"
        )
        _write_text(out_dir / "similarity.txt", body, cfg)
    cfg.write_resolved(out_dir)
    print(f"wrote {len(rows)} eval rows")
    return 0


_COMMANDS = {
    "ingest": cmd_ingest,
    "cluster": cmd_cluster,
    "simulate": cmd_simulate,
    "forecast": cmd_forecast,
    "backtest": cmd_backtest,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="epifuse", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--jobs", type=int, default=1, help="worker threads for ensemble fan-out")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        if name == "backtest":
            p.add_argument("--models", default=None, help="comma-separated model list override")
        if name in ("cluster", "forecast"):
            p.add_argument("--as-of", dest="as_of", default=None, help="ISO recalibration date")
        if name == "report":
            p.add_argument("--forecasts", default=None, help="forecasts.csv to score")
            p.add_argument("--mobility", default=None, help="square mobility matrix CSV")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else _USAGE_EXIT
    try:
        cfg = RunConfig.load(args.config)
        if args.seed is not None:
            cfg.data["seed"] = int(args.seed)
        if getattr(args, "models", None):
            cfg.data["models"] = [m.strip() for m in args.models.split(",") if m.strip()]
            cfg._validate()
        if args.out is not None:
            cfg.data["output"]["dir"] = args.out
        out_dir = Path(cfg.data["output"]["dir"])
        out_dir.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](cfg, out_dir, args)
    except (ConfigError, DataValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _DATA_EXIT
    except EpifuseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _RUNTIME_EXIT
    except Exception as exc:  # noqa: BLE001 - surface anything unexpected as runtime failure
        print(f"unexpected error: {exc!r}", file=sys.stderr)
        return _RUNTIME_EXIT


if __name__ == "__main__":
    raise SystemExit(main())

"""Command-line entry point: ``windcal <command> [options]``.

Commands
--------
simulate      write a synthetic dataset CSV
train         rolling training of one model; writes a model store
predict       forecast table from a model store
verify        paired verification of forecast tables against the raw ensemble
report        flatten a verification report into long-format tables
sweep-window  mean CRPS / MAE against training-window length
pipeline      train, predict, verify and report all four models in one go

Exit codes: 0 success, 1 usage error, 2 data or schema error (also partial
predictions), 3 numerical failure.
"""

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from dataclasses import asdict
from datetime import datetime, timezone

import numpy as np

from . import __version__, data, pipeline, store
from .errors import (DataError, InsufficientDataError, InvalidArgumentError,
                     NumericalFailureError, WindcalError)
from .scoring import NOMINAL_LEVEL
from .verification import METRICS, RAW, VerificationReport, metric_rows, pit_rows, rank_rows

log = logging.getLogger("windcal")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
MANIFEST = "manifest.json"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; route it through our own code 1
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}")


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _level(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid level {text!r}") from None
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("level must lie in (0, 1)")
    return v


def _date(text):
    try:
        return np.datetime64(datetime.strptime(text, "%Y-%m-%d").date(), "D")
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid date {text!r} (want YYYY-MM-DD)") from None


def _windows(text):
    try:
        if ".." in text:
            lo, _, rest = text.partition("..")
            hi, _, step = rest.partition(":")
            out = list(range(int(lo), int(hi) + 1, int(step or 5)))
        else:
            out = [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid window list {text!r}") from None
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("windows must be positive")
    return out


def build_parser():
    p = _Parser(prog="windcal", description="Calibration of ensemble wind-speed forecasts.",
                formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    d = data.SyntheticConfig()
    s = sub.add_parser("simulate", help="write a synthetic dataset", formatter_class=fmt)
    s.add_argument("--stations", type=_positive_int, default=d.n_stations, help="number of stations")
    s.add_argument("--days", type=_positive_int, default=d.n_days, help="number of initialisation days")
    s.add_argument("--seed", type=int, default=d.seed, help="generator seed")
    s.add_argument("--start-date", type=_date, default=d.start_date, help="first initialisation date")
    s.add_argument("--obs-noise-sd", type=float, default=d.obs_noise_sd,
                   help="constant part of the error scale (m/s)")
    s.add_argument("--spread-sd", type=float, default=d.ensemble_spread_sd,
                   help="diurnal part of the error scale")
    s.add_argument("--bias", type=float, default=d.ensemble_bias, help="member bias (m/s)")
    s.add_argument("--spread-deficiency", type=float, default=d.spread_deficiency_factor,
                   help="member spread relative to the error scale")
    s.add_argument("--anomaly-sd", type=float, default=d.anomaly_sd,
                   help="amplitude of the daily AR(1) anomaly (m/s)")
    s.add_argument("-o", "--output", required=True, help="CSV file to write")

    def add_common_train(q):
        q.add_argument("--data", required=True, help="dataset CSV")
        q.add_argument("--window", type=_positive_int, default=51, help="training window in days")
        q.add_argument("--scope", choices=("local", "regional"), default="local",
                       help="EMOS estimation scope (the network is always regional)")
        q.add_argument("--start", type=_date, help="first verification date")
        q.add_argument("--end", type=_date, help="last verification date")
        q.add_argument("--seed", type=int, default=0, help="network training seed")

    t = sub.add_parser("train", help="rolling training of one model", formatter_class=fmt)
    t.add_argument("model", choices=pipeline.MODELS, help="model to train")
    add_common_train(t)
    t.add_argument("-o", "--output", required=True, help="output directory")

    pr = sub.add_parser("predict", help="forecasts from a model store", formatter_class=fmt)
    pr.add_argument("--models", required=True, help="models.jsonl written by train")
    pr.add_argument("--data", required=True, help="dataset CSV")
    pr.add_argument("--start", type=_date, help="first initialisation date")
    pr.add_argument("--end", type=_date, help="last initialisation date")
    pr.add_argument("--level", type=_level, default=NOMINAL_LEVEL, help="central interval level")
    pr.add_argument("-o", "--output", required=True, help="output directory")

    v = sub.add_parser("verify", help="paired verification", formatter_class=fmt)
    v.add_argument("--data", required=True, help="dataset CSV with observations")
    v.add_argument("--forecasts", required=True, nargs="+", help="forecast tables")
    v.add_argument("--pit-bins", type=_positive_int, default=12, help="PIT histogram bins")
    v.add_argument("-o", "--output", required=True, help="output directory")

    r = sub.add_parser("report", help="plot-ready tables from a report", formatter_class=fmt)
    r.add_argument("--report", required=True, help="report.json written by verify")
    r.add_argument("-o", "--output", required=True, help="output directory")

    w = sub.add_parser("sweep-window", help="scores against window length", formatter_class=fmt)
    w.add_argument("--data", required=True, help="dataset CSV")
    w.add_argument("--model", choices=pipeline.MODELS, default="tn-emos", help="model to sweep")
    w.add_argument("--scope", choices=("local", "regional"), default="local",
                   help="EMOS estimation scope")
    w.add_argument("--windows", type=_windows, default=_windows("20..60:5"),
                   help="'lo..hi[:step]' or a comma list")
    w.add_argument("--seed", type=int, default=0, help="network training seed")
    w.add_argument("-o", "--output", required=True, help="output directory")

    pl = sub.add_parser("pipeline", help="all four models end to end", formatter_class=fmt)
    pl.add_argument("--data", help="dataset CSV; a default synthetic set is simulated if omitted")
    pl.add_argument("--window", type=_positive_int, default=51, help="training window in days")
    pl.add_argument("--scope", choices=("local", "regional"), default="local",
                    help="EMOS estimation scope (the network is always regional)")
    pl.add_argument("--seed", type=int, default=0, help="generator and network seed")
    pl.add_argument("--level", type=_level, default=NOMINAL_LEVEL, help="central interval level")
    pl.add_argument("--pit-bins", type=_positive_int, default=12, help="PIT histogram bins")
    pl.add_argument("--models", nargs="+", choices=pipeline.MODELS, default=list(pipeline.MODELS),
                    help="models to run")
    pl.add_argument("-o", "--output", required=True, help="output directory")
    return p


# ---------------------------------------------------------------------------
# helpers


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format(v, ".17g") if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _prepare_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def _config(args):
    return {k: (str(v) if isinstance(v, np.datetime64) else v)
            for k, v in sorted(vars(args).items()) if k not in ("verbose",)}


def _write_report(out_dir, report):
    store.atomic_write(os.path.join(out_dir, "report.json"), store.dumps(report.to_dict()) + "\n")


def _write_tables(out_dir, report):
    store.atomic_write(os.path.join(out_dir, "metrics_long.csv"),
                       _csv_text(["model", "lead_time_index", "metric", "value"], metric_rows(report)))
    store.atomic_write(os.path.join(out_dir, "pit_hist.csv"),
                       _csv_text(["model", "lead_group", "bin", "count"], pit_rows(report)))
    store.atomic_write(os.path.join(out_dir, "rank_hist.csv"),
                       _csv_text(["model", "rank", "count"], rank_rows(report)))
    overall = [(name, int(sc.n_cases.sum()), *(sc.overall[m] for m in METRICS),
                "" if sc.ks is None else sc.ks) for name, sc in report.models.items()]
    store.atomic_write(os.path.join(out_dir, "overall.csv"),
                       _csv_text(["model", "n_cases", *METRICS, "ks"], overall))


def _print_overall(report, out):
    out.write(f"{'model':<10} {'cases':>7} " + " ".join(f"{m:>9}" for m in METRICS) + f" {'ks':>7}\n")
    for name, sc in report.models.items():
        ks = "" if sc.ks is None else f"{sc.ks:.4f}"
        out.write(f"{name:<10} {int(sc.n_cases.sum()):>7} "
                  + " ".join(f"{sc.overall[m]:>9.4f}" for m in METRICS) + f" {ks:>7}\n")


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args, out):
    started = _now()
    cfg = data.SyntheticConfig(n_stations=args.stations, n_days=args.days, seed=args.seed,
                               start_date=str(args.start_date), obs_noise_sd=args.obs_noise_sd,
                               ensemble_spread_sd=args.spread_sd, ensemble_bias=args.bias,
                               spread_deficiency_factor=args.spread_deficiency,
                               anomaly_sd=args.anomaly_sd)
    ds = data.synthetic_generate(cfg)
    data.write_csv(ds, args.output)
    store.write_manifest(args.output + ".manifest.json", "simulate",
                         {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(cfg).items()},
                         seed=args.seed, started=started)
    out.write(f"wrote {len(ds)} rows to {args.output}\n")
    return EXIT_OK


def cmd_train(args, out):
    started = _now()
    ds = data.load_csv(args.data)
    dates = pipeline.verification_dates(ds, args.window, args.start, args.end)
    out_dir = _prepare_dir(args.output)
    res = pipeline.train_model(ds, args.model, args.window, args.scope, dates,
                               pipeline.n_workers(), args.seed)
    store.write_store(os.path.join(out_dir, "models.jsonl"), res.header, res.records)
    for date, n, crps in pipeline.window_summaries(res):
        out.write(f"{args.model} {date} models={n} train_mean_crps={crps:.6f}\n")
    store.write_manifest(os.path.join(out_dir, MANIFEST), "train", _config(args),
                         inputs=[args.data], seed=args.seed, started=started)
    return EXIT_OK


def cmd_predict(args, out):
    started = _now()
    header, records = store.read_store(args.models)
    ds = data.load_csv(args.data)
    dates = None
    if args.start is not None or args.end is not None:
        sel = ds.dates
        if args.start is not None:
            sel = sel[sel >= args.start]
        if args.end is not None:
            sel = sel[sel <= args.end]
        dates = sel
    table, missing = pipeline.predict(ds, header, records, dates, args.level)
    out_dir = _prepare_dir(args.output)
    store.write_forecasts(os.path.join(out_dir, "forecasts.csv"), table)
    exc_path = os.path.join(out_dir, "exceptions.csv")
    if missing:
        store.atomic_write(exc_path, _csv_text(["station", "init_date", "lead_time_index", "reason"],
                                               [(*k, "no stored model") for k in missing]))
    elif os.path.exists(exc_path):
        os.unlink(exc_path)
    store.write_manifest(os.path.join(out_dir, MANIFEST), "predict", _config(args),
                         inputs=[args.models, args.data], started=started)
    out.write(f"wrote {len(table)} forecasts to {out_dir}\n")
    if missing:
        out.write(f"{len(missing)} cases lack a stored model; see {exc_path}\n")
        return EXIT_DATA
    return EXIT_OK


def cmd_verify(args, out):
    started = _now()
    ds = data.load_csv(args.data)
    tables = [store.read_forecasts(p) for p in args.forecasts]
    report = pipeline.verify_tables(ds, tables, pit_bins=args.pit_bins)
    out_dir = _prepare_dir(args.output)
    _write_report(out_dir, report)
    store.write_manifest(os.path.join(out_dir, MANIFEST), "verify", _config(args),
                         inputs=[args.data, *args.forecasts], started=started)
    _print_overall(report, out)
    return EXIT_OK


def _load_report(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc.msg})") from exc
    try:
        return VerificationReport.from_dict(raw)
    except InvalidArgumentError as exc:
        raise DataError(f"{path}: {exc}") from exc


def cmd_report(args, out):
    started = _now()
    report = _load_report(args.report)
    if RAW not in report.models:
        raise DataError(f"{args.report}: report lacks the raw-ensemble reference")
    out_dir = _prepare_dir(args.output)
    _write_tables(out_dir, report)
    store.write_manifest(os.path.join(out_dir, MANIFEST), "report", _config(args),
                         inputs=[args.report], started=started)
    out.write(f"wrote tables for {len(report.models)} forecasters to {out_dir}\n")
    return EXIT_OK


def cmd_sweep_window(args, out):
    started = _now()
    ds = data.load_csv(args.data)
    # one verification period for all windows: the one the longest allows
    dates = pipeline.verification_dates(ds, max(args.windows))
    workers = pipeline.n_workers()
    rows = []
    for w in args.windows:
        res = pipeline.train_model(ds, args.model, w, args.scope, dates, workers, args.seed)
        rep = pipeline.verify_tables(ds, [res.forecasts])
        sc = rep.models[args.model]
        rows.append((w, args.model, rep.n_cases, sc.overall["mean_crps"], sc.overall["mae"],
                     sc.overall["rmse"], sc.overall["crpss"]))
        out.write(f"window={w} mean_crps={sc.overall['mean_crps']:.5f} mae={sc.overall['mae']:.5f}\n")
    out_dir = _prepare_dir(args.output)
    store.atomic_write(os.path.join(out_dir, "window_sweep.csv"),
                       _csv_text(["window_days", "model", "n_cases", "mean_crps", "mae", "rmse",
                                  "crpss"], rows))
    store.write_manifest(os.path.join(out_dir, MANIFEST), "sweep-window", _config(args),
                         inputs=[args.data], seed=args.seed, started=started)
    return EXIT_OK


def run_pipeline(ds, out_dir, models=pipeline.MODELS, window=51, scope="local", seed=0,
                 level=NOMINAL_LEVEL, pit_bins=12, workers=1, out=None):
    """Train every model, write stores and forecast tables, verify and report."""
    dates = pipeline.verification_dates(ds, window)
    tables = []
    for model in models:
        t0 = time.perf_counter()
        res = pipeline.train_model(ds, model, window, scope, dates, workers, seed, level)
        store.write_store(os.path.join(out_dir, f"{model}.models.jsonl"), res.header, res.records)
        store.write_forecasts(os.path.join(out_dir, f"{model}.forecasts.csv"), res.forecasts)
        tables.append(res.forecasts)
        log.info("%s trained in %.1f s", model, time.perf_counter() - t0)
    report = pipeline.verify_tables(ds, tables, level, pit_bins)
    _write_report(out_dir, report)
    _write_tables(out_dir, report)
    if out is not None:
        _print_overall(report, out)
    return report


def cmd_pipeline(args, out):
    started = _now()
    out_dir = _prepare_dir(args.output)
    inputs = []
    if args.data:
        ds = data.load_csv(args.data)
        inputs = [args.data]
    else:
        ds = data.synthetic_generate(data.SyntheticConfig(seed=args.seed))
        data.write_csv(ds, os.path.join(out_dir, "data.csv"))
    run_pipeline(ds, out_dir, args.models, args.window, args.scope, args.seed, args.level,
                 args.pit_bins, pipeline.n_workers(), out)
    store.write_manifest(os.path.join(out_dir, MANIFEST), "pipeline", _config(args),
                         inputs=inputs, seed=args.seed, started=started)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "predict": cmd_predict,
    "verify": cmd_verify,
    "report": cmd_report,
    "sweep-window": cmd_sweep_window,
    "pipeline": cmd_pipeline,
}


def main(argv=None, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        err.write(f"{exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:     # --help and --version
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(err)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=err)
    try:
        return COMMANDS[args.command](args, out)
    except NumericalFailureError as exc:
        err.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except InvalidArgumentError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (DataError, WindcalError) as exc:
        err.write(f"data error: {exc}\n")
        return EXIT_DATA
    except OSError as exc:
        err.write(f"i/o error: {exc}\n")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

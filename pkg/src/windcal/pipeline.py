"""Training, prediction and verification glue shared by the CLI and tests."""

import logging
import os
from dataclasses import dataclass, field

import numpy as np

from . import emos, mlp
from .data import ensemble_stats
from .dists import take
from .errors import InsufficientDataError, InvalidArgumentError, SchemaError
from .scoring import IntervalSpec, NOMINAL_LEVEL
from .store import ForecastTable
from .verification import tie_seeds, verify

log = logging.getLogger(__name__)

EMOS_MODELS = {"tn-emos": "tn", "ln-emos": "ln", "tgev-emos": "tgev"}
MODELS = tuple(EMOS_MODELS) + ("tn-mlp",)


def n_workers(default=1):
    """Worker-pool size from ``WINDCAL_WORKERS`` (at least 1)."""
    raw = os.environ.get("WINDCAL_WORKERS", "").strip()
    if not raw:
        return default
    try:
        n = int(raw)
    except ValueError:
        raise InvalidArgumentError(f"WINDCAL_WORKERS must be an integer, got {raw!r}") from None
    if n < 1:
        raise InvalidArgumentError("WINDCAL_WORKERS must be at least 1")
    return n


def verification_dates(dataset, window_days, start=None, end=None):
    """Dates with a complete training window, optionally clipped to [start, end]."""
    first = emos.earliest_date(dataset, window_days)
    dates = dataset.dates
    usable = dates[dates >= first]
    if start is not None:
        usable = usable[usable >= np.datetime64(start, "D")]
    if end is not None:
        usable = usable[usable <= np.datetime64(end, "D")]
    if usable.size == 0:
        raise InsufficientDataError(
            f"no verification date satisfies a {window_days}-day window; "
            f"earliest usable date is {first}")
    return usable


@dataclass
class TrainOutput:
    model: str
    header: dict
    records: list
    forecasts: ForecastTable
    skipped: list = field(default_factory=list)     # case keys without a model


def _table(model, dataset, rows, d, level):
    return ForecastTable.from_distribution(model, level, dataset.station[rows],
                                           dataset.init_date[rows], dataset.lead[rows], d)


def train_model(dataset, model, window_days=51, scope="local", dates=None, workers=1,
                seed=0, level=NOMINAL_LEVEL, optimizer=emos.OptimizerSettings(),
                mlp_config=None):
    """Rolling training of one model over ``dates``; returns records and forecasts."""
    if model not in MODELS:
        raise InvalidArgumentError(f"unknown model {model!r}; choose from {', '.join(MODELS)}")
    if dates is None:
        dates = verification_dates(dataset, window_days)
    header = {"model": model, "window_days": int(window_days)}
    if model in EMOS_MODELS:
        family = EMOS_MODELS[model]
        cfg = emos.EmosTrainingConfig(family=family, window_days=window_days, scope=scope,
                                      optimizer=optimizer)
        res = emos.rolling_train_predict(dataset, dates, cfg, workers=workers)
        header.update(family=family, scope=scope)
        records = list(emos.coefficient_records(res, model))
        rows, fc, skipped = res.case_rows, res.forecasts, res.skipped_rows
    else:
        cfg = mlp_config or mlp.MlpTrainConfig(seed=seed)
        res = mlp.rolling_train_predict(dataset, dates, window_days, cfg)
        header.update(family="tn", scope="regional", seed=int(cfg.seed))
        records = [mlp.model_record(r.model, model=model, date=str(date), n_cases=r.n_cases,
                                    epochs=int(r.epoch_losses.size),
                                    initial_mean_crps=r.initial_mean_crps,
                                    train_mean_crps=r.mean_crps)
                   for date, _, r in res.models]
        rows, fc, skipped = res.case_rows, res.forecasts, res.skipped_rows
    if fc is None:
        raise InsufficientDataError(f"{model}: no window could be fitted")
    table = _table(model, dataset, rows, fc, level)
    skipped_keys = _keys(dataset, skipped)
    return TrainOutput(model, header, records, table, skipped_keys)


def _keys(dataset, rows):
    return list(zip(dataset.station[rows].tolist(), dataset.init_date[rows].astype(str).tolist(),
                    dataset.lead[rows].tolist()))


def window_summaries(output):
    """(date, n_models, mean training CRPS) per training date."""
    by_date = {}
    for r in output.records:
        by_date.setdefault(r["date"], []).append(r["train_mean_crps"])
    return [(d, len(v), float(np.mean(v))) for d, v in sorted(by_date.items())]


# ---------------------------------------------------------------------------
# prediction from a store


def predict(dataset, header, records, dates=None, level=NOMINAL_LEVEL):
    """Forecast table for the cases of ``dates`` plus the keys lacking a model.

    ``dates=None`` means every date that has at least one stored model.
    """
    model = header.get("model")
    if model not in MODELS:
        raise SchemaError(f"model store names unknown model {model!r}")
    stored = sorted({r["date"] for r in records})
    if dates is None:
        dates = np.array(stored, dtype="datetime64[D]")
    dates = np.asarray(dates, dtype="datetime64[D]")
    rows = np.flatnonzero(np.isin(dataset.init_date, dates))
    stats = ensemble_stats(dataset.members[rows])
    date_str = dataset.init_date[rows].astype(str)
    lead = dataset.lead[rows]
    ok = np.zeros(rows.size, dtype=bool)

    if model in EMOS_MODELS:
        family = EMOS_MODELS[model]
        names = emos.COEFFICIENT_TYPES[family].names()
        local = header.get("scope", "local") == "local"
        index = {(r["unit"], r["date"], int(r["lead_time_index"])): r["coefficients"]
                 for r in records}
        coef = np.full((rows.size, len(names)), np.nan)
        units = dataset.station[rows] if local else np.full(rows.size, "regional")
        for i, key in enumerate(zip(units.tolist(), date_str.tolist(), lead.tolist())):
            c = index.get(key)
            if c is not None:
                coef[i] = [c[n] for n in names]
                ok[i] = True
        d = emos.link_rows(family, coef[ok], stats.take(ok)) if ok.any() else None
    else:
        index = {(r["date"], r["lead_time_group"]): mlp.model_from_record(r) for r in records}
        groups = mlp.group_of_lead(lead) if rows.size else np.zeros(0, dtype=str)
        feats = mlp.mlp_features(stats).as_matrix()
        loc = np.full(rows.size, np.nan)
        scale = np.full(rows.size, np.nan)
        for (date, group), m in index.items():
            sel = (date_str == date) & (groups == group)
            if sel.any():
                out = mlp.forward(m, feats[sel])
                loc[sel], scale[sel] = out.loc, out.scale
                ok[sel] = True
        from .dists import TruncNormal
        d = TruncNormal(loc[ok], scale[ok]) if ok.any() else None

    good = rows[ok]
    if d is None:
        table = ForecastTable(model, float(level), np.zeros(0, dtype=str),
                              np.zeros(0, dtype="datetime64[D]"), np.zeros(0, dtype=int),
                              header.get("family", "tn"), np.zeros((0, 3)))
    else:
        table = _table(model, dataset, good, d, level)
    return table, _keys(dataset, rows[~ok])


# ---------------------------------------------------------------------------
# paired verification


def align(dataset, tables):
    """Dataset rows and per-table indices of the cases common to all tables
    that also carry an observation."""
    if not tables:
        raise InvalidArgumentError("need at least one forecast table")
    lookup = {k: i for i, k in enumerate(_keys(dataset, np.arange(len(dataset))))}
    common = None
    per_table = []
    for t in tables:
        pos = {}
        for j, k in enumerate(t.keys()):
            i = lookup.get(k)
            if i is not None and np.isfinite(dataset.obs[i]):
                pos[i] = j
        per_table.append(pos)
        common = set(pos) if common is None else common & set(pos)
    rows = np.array(sorted(common), dtype=np.int64)
    if rows.size == 0:
        raise InsufficientDataError("forecast tables and data share no observed case")
    return rows, [np.array([p[i] for i in rows], dtype=np.int64) for p in per_table]


def verify_tables(dataset, tables, level=None, pit_bins=12):
    rows, idx = align(dataset, tables)
    names = [t.model for t in tables]
    if len(set(names)) != len(names):
        raise InvalidArgumentError("forecast tables must have distinct model names")
    if level is None:
        level = tables[0].level
    forecasts = {t.model: take(t.distribution(), j) for t, j in zip(tables, idx)}
    seeds = tie_seeds(dataset.station[rows], dataset.init_date[rows], dataset.lead[rows])
    return verify(dataset.obs[rows], dataset.lead[rows], dataset.members[rows], forecasts,
                  seeds, IntervalSpec(level), pit_bins)

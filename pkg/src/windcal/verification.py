"""Paired verification of predictive distributions against the raw ensemble.

All models are scored on one common case set. Scores are reported per lead
time and pooled; PIT histograms are split into four lead-time quarters
(0-12 h, 12-24 h, 24-36 h, 36-48 h) and the raw ensemble gets a verification
rank histogram instead.
"""

import zlib
from dataclasses import dataclass, field

import numpy as np

from . import dists, scoring
from .data import N_LEADS
from .errors import InvalidArgumentError

RAW = "raw"
METRICS = ("mean_crps", "crpss", "mae", "rmse", "coverage", "width")
N_PIT_GROUPS = 4
PIT_GROUP_LABELS = ("0-12h", "12-24h", "24-36h", "36-48h")


def pit_group(lead):
    """Lead-time quarter index 0..3 of 15-minute lead indices 1..192."""
    lead = np.asarray(lead)
    return (lead - 1) // (N_LEADS // N_PIT_GROUPS)


def tie_seeds(station, init_date, lead):
    """Per-case seeds derived from case identifiers, stable across runs."""
    keys = [f"{s}|{d}|{int(l)}" for s, d, l in zip(station, np.asarray(init_date).astype(str), lead)]
    return np.array([zlib.crc32(k.encode()) for k in keys], dtype=np.int64)


@dataclass
class ModelScores:
    """Scores of one forecaster over the verified cases."""

    name: str
    lead_times: np.ndarray
    n_cases: np.ndarray
    per_lead: dict                 # metric -> array over lead_times
    overall: dict                  # metric -> float
    pit_hist: np.ndarray = None    # (4, bins) for distributions
    rank_hist: np.ndarray = None   # (12,) for the raw ensemble
    ks: float = None


@dataclass
class VerificationReport:
    level: float
    pit_bins: int
    n_cases: int
    models: dict = field(default_factory=dict)   # name -> ModelScores

    def model_names(self):
        return [m for m in self.models if m != RAW]

    def to_dict(self):
        out = {"level": self.level, "pit_bins": self.pit_bins, "n_cases": self.n_cases,
               "models": {}}
        for name, sc in self.models.items():
            out["models"][name] = {
                "lead_times": sc.lead_times.tolist(),
                "n_cases": sc.n_cases.tolist(),
                "per_lead": {k: np.asarray(v).tolist() for k, v in sc.per_lead.items()},
                "overall": dict(sc.overall),
                "pit_hist": None if sc.pit_hist is None else sc.pit_hist.tolist(),
                "rank_hist": None if sc.rank_hist is None else sc.rank_hist.tolist(),
                "ks": sc.ks,
            }
        return out

    @classmethod
    def from_dict(cls, d):
        try:
            rep = cls(float(d["level"]), int(d["pit_bins"]), int(d["n_cases"]))
            for name, m in d["models"].items():
                rep.models[name] = ModelScores(
                    name, np.array(m["lead_times"], dtype=int), np.array(m["n_cases"], dtype=int),
                    {k: np.array(v, dtype=float) for k, v in m["per_lead"].items()},
                    {k: float(v) for k, v in m["overall"].items()},
                    None if m["pit_hist"] is None else np.array(m["pit_hist"], dtype=int),
                    None if m["rank_hist"] is None else np.array(m["rank_hist"], dtype=int),
                    m["ks"])
                missing = set(METRICS) - set(rep.models[name].per_lead)
                if missing:
                    raise KeyError(sorted(missing)[0])
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise InvalidArgumentError(f"malformed verification report ({exc})") from exc
        return rep


def _by_lead(values, lead, leads):
    idx = np.searchsorted(leads, lead)
    counts = np.bincount(idx, minlength=leads.size)
    sums = np.bincount(idx, weights=values, minlength=leads.size)
    return sums / counts


def _metrics(crps, med, mean, lo, hi, y, lead, leads, ref_crps):
    inside = ((y >= lo) & (y <= hi)).astype(float)
    per = {
        "mean_crps": _by_lead(crps, lead, leads),
        "mae": _by_lead(np.abs(med - y), lead, leads),
        "rmse": np.sqrt(_by_lead((mean - y) ** 2, lead, leads)),
        "coverage": _by_lead(inside, lead, leads),
        "width": _by_lead(hi - lo, lead, leads),
    }
    ref_lead = _by_lead(ref_crps, lead, leads)
    with np.errstate(divide="ignore", invalid="ignore"):
        per["crpss"] = np.where(ref_lead > 0, 1.0 - per["mean_crps"] / ref_lead, np.nan)
    ref_all = float(np.mean(ref_crps))
    overall = {
        "mean_crps": float(np.mean(crps)),
        "crpss": scoring.crpss(float(np.mean(crps)), ref_all) if ref_all > 0 else float("nan"),
        "mae": scoring.mae(med, y),
        "rmse": scoring.rmse(mean, y),
        "coverage": float(np.mean(inside)),
        "width": float(np.mean(hi - lo)),
    }
    return {k: per[k] for k in METRICS}, overall


def verify(obs, lead, members, forecasts, seeds, spec=scoring.IntervalSpec(), pit_bins=12):
    """Score the raw ensemble and every forecast on aligned cases.

    Parameters
    ----------
    obs, lead : array_like
        Observations and lead-time indices, one entry per case.
    members : ndarray, shape (n, 11)
        Raw ensemble; column 0 is the control forecast.
    forecasts : dict
        Model name -> predictive distribution with array parameters aligned
        with ``obs``.
    seeds : array_like of int
        Tie-breaking seeds for the verification ranks, one per case.
    """
    y = np.asarray(obs, dtype=float)
    lead = np.asarray(lead, dtype=int)
    f = np.asarray(members, dtype=float)
    n = y.size
    if n == 0:
        raise InvalidArgumentError("no cases to verify")
    if f.shape != (n, scoring.N_MEMBERS) or lead.shape != (n,) or not np.all(np.isfinite(y)):
        raise InvalidArgumentError("obs, lead and members must be aligned and observed")
    leads = np.unique(lead)
    counts = np.bincount(np.searchsorted(leads, lead), minlength=leads.size)
    groups = pit_group(lead)
    rep = VerificationReport(float(spec.level), int(pit_bins), int(n))

    raw_crps = scoring.crps_ensemble(f, y)
    lo, hi = scoring.ensemble_interval(f, spec)
    per, overall = _metrics(raw_crps, np.median(f, axis=1), f.mean(axis=1), lo, hi, y,
                            lead, leads, raw_crps)
    ranks = scoring.verification_ranks(f, y, seeds)
    rep.models[RAW] = ModelScores(RAW, leads, counts, per, overall,
                                  rank_hist=scoring.rank_histogram(ranks))

    for name, d in forecasts.items():
        if name == RAW:
            raise InvalidArgumentError(f"model name {RAW!r} is reserved for the raw ensemble")
        crps = np.broadcast_to(dists.crps_closed(d, y), (n,))
        lo, hi = scoring.central_interval(d, spec)
        lo, hi = np.broadcast_to(lo, (n,)), np.broadcast_to(hi, (n,))
        med = np.broadcast_to(dists.median(d), (n,))
        mean = np.broadcast_to(dists.dist_mean(d), (n,))
        per, overall = _metrics(crps, med, mean, lo, hi, y, lead, leads, raw_crps)
        u = np.broadcast_to(scoring.pit(d, y), (n,))
        hist = np.stack([scoring.histogram(u[groups == g], pit_bins) for g in range(N_PIT_GROUPS)])
        rep.models[name] = ModelScores(name, leads, counts, per, overall, pit_hist=hist,
                                       ks=scoring.ks_statistic(u))
    return rep


def metric_rows(report):
    """Long-format (model, lead_time, metric, value) rows."""
    rows = []
    for name, sc in report.models.items():
        for metric in METRICS:
            for lt, v in zip(sc.lead_times, sc.per_lead[metric]):
                rows.append((name, int(lt), metric, float(v)))
    return rows


def pit_rows(report):
    rows = []
    for name in report.model_names():
        h = report.models[name].pit_hist
        for g in range(h.shape[0]):
            for b in range(h.shape[1]):
                rows.append((name, PIT_GROUP_LABELS[g], b + 1, int(h[g, b])))
    return rows


def rank_rows(report):
    h = report.models[RAW].rank_hist
    return [(RAW, r + 1, int(c)) for r, c in enumerate(h)]

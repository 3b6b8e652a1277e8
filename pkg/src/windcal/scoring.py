"""Proper scores, skill scores and calibration diagnostics.

Everything here works on plain numpy arrays so that a whole verification
period can be scored in one call. ``crps_quadrature`` is deliberately
independent of the closed-form expressions in :mod:`windcal.dists`; it is
the reference those are tested against.
"""

from dataclasses import dataclass

import numpy as np

from . import dists
from .errors import InvalidArgumentError, NumericalFailureError

N_MEMBERS = 11
N_RANKS = N_MEMBERS + 1
NOMINAL_LEVEL = 10.0 / 12.0


@dataclass(frozen=True)
class IntervalSpec:
    """Central prediction interval with nominal coverage ``level``."""

    level: float = NOMINAL_LEVEL

    def __post_init__(self):
        if not 0.0 < self.level < 1.0:
            raise InvalidArgumentError("interval level must lie in (0, 1)")

    @property
    def lower_p(self):
        return 0.5 * (1.0 - self.level)

    @property
    def upper_p(self):
        return 1.0 - self.lower_p


# ---------------------------------------------------------------------------
# CRPS


def _simpson_adaptive(f, a, b, tol, max_evals=2_000_000, initial_panels=64):
    """Breadth-first adaptive Simpson rule; ``f`` must accept arrays."""
    if b <= a:
        return 0.0
    edges = np.linspace(a, b, initial_panels + 1)
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)
    fl, fm, fh = f(lo), f(mid), f(hi)
    whole = (hi - lo) / 6.0 * (fl + 4.0 * fm + fh)
    tols = np.full(lo.shape, tol / initial_panels)
    total = 0.0
    evals = 3 * initial_panels
    for _ in range(60):
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        evals += 2 * lo.size
        left = (mid - lo) / 6.0 * (fl + 4.0 * flm + fm)
        right = (hi - mid) / 6.0 * (fm + 4.0 * frm + fh)
        delta = left + right - whole
        ok = np.abs(delta) <= 15.0 * tols
        total += float(np.sum((left + right + delta / 15.0)[ok]))
        keep = ~ok
        if not keep.any():
            return total
        if evals > max_evals:
            break
        lo = np.concatenate([lo[keep], mid[keep]])
        hi_new = np.concatenate([mid[keep], hi[keep]])
        fl, fh = np.concatenate([fl[keep], fm[keep]]), np.concatenate([fm[keep], fh[keep]])
        fm = np.concatenate([flm[keep], frm[keep]])
        whole = np.concatenate([left[keep], right[keep]])
        tols = np.concatenate([tols[keep], tols[keep]]) / 2.0
        mid = np.concatenate([lm[keep], rm[keep]])
        hi = hi_new
    raise NumericalFailureError(
        "adaptive quadrature did not converge",
        {"evaluations": evals, "open_intervals": int(lo.size)},
    )


def crps_quadrature(cdf_evaluator, x, support_hint, tol=1e-8):
    """CRPS by direct numerical integration of the squared CDF difference.

    ``support_hint = (lo, hi)`` must bracket the region where the CDF moves
    from 0 to 1; outside it the integrand is the indicator mismatch only.
    """
    lo, hi = float(support_hint[0]), float(support_hint[1])
    x = float(x)
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise InvalidArgumentError("support hint must be a finite interval")

    def sq(t):
        return np.asarray(cdf_evaluator(t), dtype=float) ** 2

    def sq_upper(t):
        return (1.0 - np.asarray(cdf_evaluator(t), dtype=float)) ** 2

    total = 0.0
    if x <= lo:
        total += lo - x
        total += _simpson_adaptive(sq_upper, lo, hi, tol)
    elif x >= hi:
        total += _simpson_adaptive(sq, lo, hi, tol)
        total += x - hi
    else:
        total += _simpson_adaptive(sq, lo, x, tol / 2.0)
        total += _simpson_adaptive(sq_upper, x, hi, tol / 2.0)
    return total


def support_hint(d):
    """Integration range for :func:`crps_quadrature` on a predictive law."""
    scale = np.sqrt(d.v) if isinstance(d, dists.LogNormalMV) else d.scale
    return 0.0, float(dists.quantile(d, 1.0 - 1e-9) + 10.0 * scale)


def crps_ensemble(members, x):
    """CRPS of the empirical distribution of ``members`` (last axis)."""
    f = np.asarray(members, dtype=float)
    if f.ndim == 0 or f.shape[-1] == 0:
        raise InvalidArgumentError("ensemble must have at least one member")
    if not np.all(np.isfinite(f)):
        raise InvalidArgumentError("ensemble members must be finite")
    x = np.asarray(x, dtype=float)
    k = f.shape[-1]
    fs = np.sort(f, axis=-1)
    weights = 2.0 * np.arange(1, k + 1) - k - 1.0
    spread = (fs * weights).sum(axis=-1) / (k * k)
    err = np.abs(f - x[..., None]).mean(axis=-1)
    return dists._out(err - spread)


def crpss(mean_crps, mean_crps_ref):
    """Skill score 1 - CRPS / CRPS_ref."""
    ref = np.asarray(mean_crps_ref, dtype=float)
    if np.any(~(ref > 0)):
        raise InvalidArgumentError("reference CRPS must be positive")
    return dists._out(1.0 - np.asarray(mean_crps, dtype=float) / ref)


def _paired(point_forecasts, observations):
    f = np.asarray(point_forecasts, dtype=float).ravel()
    y = np.asarray(observations, dtype=float).ravel()
    if f.size == 0 or f.size != y.size:
        raise InvalidArgumentError("forecasts and observations need equal, nonzero length")
    return f, y


def mae(point_forecasts, observations):
    f, y = _paired(point_forecasts, observations)
    return float(np.mean(np.abs(f - y)))


def rmse(point_forecasts, observations):
    f, y = _paired(point_forecasts, observations)
    return float(np.sqrt(np.mean((f - y) ** 2)))


# ---------------------------------------------------------------------------
# intervals


def central_interval(d, spec=IntervalSpec()):
    lo = dists.quantile(d, spec.lower_p)
    hi = dists.quantile(d, spec.upper_p)
    return lo, hi


def ensemble_interval(members, spec=IntervalSpec()):
    """Range of an 11-member ensemble, the raw counterpart of a 10/12 interval."""
    f = np.asarray(members, dtype=float)
    if f.ndim == 0 or f.shape[-1] != N_MEMBERS:
        raise InvalidArgumentError(f"expected {N_MEMBERS} members")
    return dists._out(f.min(axis=-1)), dists._out(f.max(axis=-1))


def coverage(lo, hi, y):
    lo, hi, y = (np.asarray(a, dtype=float) for a in (lo, hi, y))
    return float(np.mean((y >= lo) & (y <= hi)))


# ---------------------------------------------------------------------------
# calibration diagnostics


def pit(d, y):
    """Probability integral transform; negative observations map to 0."""
    y = np.asarray(y, dtype=float)
    val = np.where(y < 0, 0.0, dists.cdf(d, np.maximum(y, 0.0)))
    return dists._out(val)


def verification_rank(members, y, rng_seed):
    """Rank (1..12) of ``y`` among 11 members, ties broken uniformly at random."""
    f = np.asarray(members, dtype=float)
    if f.shape != (N_MEMBERS,):
        raise InvalidArgumentError(f"expected {N_MEMBERS} members")
    below = int(np.sum(f < y))
    ties = int(np.sum(f == y))
    extra = int(np.random.default_rng(rng_seed).integers(0, ties + 1)) if ties else 0
    return 1 + below + extra


def verification_ranks(members, y, seeds):
    """Vectorised :func:`verification_rank`; one seed per case."""
    f = np.asarray(members, dtype=float)
    y = np.asarray(y, dtype=float)
    if f.ndim != 2 or f.shape[1] != N_MEMBERS:
        raise InvalidArgumentError(f"expected shape (n, {N_MEMBERS})")
    below = (f < y[:, None]).sum(axis=1)
    ties = (f == y[:, None]).sum(axis=1)
    ranks = 1 + below
    for i in np.flatnonzero(ties):
        rng = np.random.default_rng(int(seeds[i]))
        ranks[i] += int(rng.integers(0, ties[i] + 1))
    return ranks


def ks_statistic(pit_values):
    """Sup distance between the empirical CDF of PIT values and U(0, 1)."""
    u = np.sort(np.asarray(pit_values, dtype=float).ravel())
    n = u.size
    if n == 0:
        raise InvalidArgumentError("need at least one PIT value")
    if np.any((u < 0) | (u > 1)):
        raise InvalidArgumentError("PIT values must lie in [0, 1]")
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - u), np.max(u - (i - 1) / n)))


def histogram(values, bins=12):
    """Counts of values in equal-width bins on [0, 1]; 1.0 falls in the last bin."""
    if int(bins) < 1:
        raise InvalidArgumentError("bins must be a positive integer")
    bins = int(bins)
    v = np.asarray(values, dtype=float).ravel()
    idx = np.clip(np.floor(v * bins).astype(int), 0, bins - 1)
    return np.bincount(idx, minlength=bins)


def rank_histogram(ranks, n_ranks=N_RANKS):
    r = np.asarray(ranks, dtype=int).ravel()
    if r.size and (r.min() < 1 or r.max() > n_ranks):
        raise InvalidArgumentError(f"ranks must lie in 1..{n_ranks}")
    return np.bincount(r - 1, minlength=n_ranks)


def end_bin_excess(counts):
    """Mean of the two outer bins relative to the mean bin, minus one.

    Zero for a flat histogram, positive for a U shape.
    """
    c = np.asarray(counts, dtype=float)
    return float(0.5 * (c[0] + c[-1]) / c.mean() - 1.0)

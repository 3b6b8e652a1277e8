"""EMOS models: link functions, CRPS-minimising fits and the rolling driver.

Each family maps ensemble statistics to a predictive law through a small
coefficient vector. Coefficients that enter the links squared are left
unconstrained, and the TGEV shape goes through a logistic map onto its
admissible interval, so the fit is an unconstrained minimisation of the mean
closed-form CRPS. That minimisation is a Nelder-Mead simplex search compiled
with numba; many independent problems (all stations and lead times of one
verification date) are solved in one call.
"""

import logging
import math
from dataclasses import astuple, dataclass, fields
from typing import Optional

import numpy as np
from numba import njit

from . import dists
from .data import N_LEADS, EnsembleStats, TrainingSet, ensemble_stats
from .dists import (
    SHAPE_MAX,
    SHAPE_MIN,
    LogNormalMV,
    Tgev,
    TruncNormal,
    ln_crps_scalar,
    tgev_constants,
    tgev_crps_core,
    tn_crps_scalar,
)
from .errors import InsufficientDataError, InvalidArgumentError, NumericalFailureError

log = logging.getLogger(__name__)

SCALE_FLOOR = 1e-4
MEAN_FLOOR = 1e-4
VAR_FLOOR = 1e-8
# beyond this the logistic map saturates at 0 or 1 in double precision
_XI_RAW_CLAMP = 30.0

TN, LN, TGEV = 0, 1, 2
FAMILY_CODES = {"tn": TN, "ln": LN, "tgev": TGEV}


# ---------------------------------------------------------------------------
# coefficient types


class _Coefficients:
    def as_array(self):
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, values):
        values = [float(v) for v in np.asarray(values, dtype=float).ravel()]
        if len(values) != len(fields(cls)):
            raise InvalidArgumentError(f"{cls.__name__} needs {len(fields(cls))} values")
        return cls(*values)

    @classmethod
    def names(cls):
        return [f.name for f in fields(cls)]

    def __post_init__(self):
        if not all(math.isfinite(v) for v in astuple(self)):
            raise InvalidArgumentError("coefficients must be finite")


@dataclass(frozen=True)
class TnCoefficients(_Coefficients):
    a0: float = 0.0
    a_ctrl: float = math.sqrt(0.5)
    a_ens: float = math.sqrt(0.5)
    b0: float = 1.0
    b1: float = 1.0


@dataclass(frozen=True)
class LnCoefficients(_Coefficients):
    alpha0: float = 0.0
    alpha_ctrl: float = math.sqrt(0.5)
    alpha_ens: float = math.sqrt(0.5)
    beta0: float = 1.0
    beta1: float = 1.0


@dataclass(frozen=True)
class TgevCoefficients(_Coefficients):
    gamma0: float = 0.0
    gamma_ctrl: float = 0.5
    gamma_ens: float = 0.5
    s0: float = 1.0
    s1: float = math.sqrt(0.1)
    xi_raw: float = 0.0


COEFFICIENT_TYPES = {"tn": TnCoefficients, "ln": LnCoefficients, "tgev": TgevCoefficients}
N_COEF = {k: len(fields(v)) for k, v in COEFFICIENT_TYPES.items()}


def family_of_coefficients(c):
    for name, cls in COEFFICIENT_TYPES.items():
        if isinstance(c, cls):
            return name
    raise InvalidArgumentError(f"not an EMOS coefficient set: {c!r}")


def default_init(family):
    """Cold-start coefficients: location close to the ensemble mean."""
    return _family_type(family)()


def _family_type(family):
    try:
        return COEFFICIENT_TYPES[family]
    except KeyError:
        raise InvalidArgumentError(f"unknown family {family!r}") from None


# ---------------------------------------------------------------------------
# links


def shape_from_raw(xi_raw):
    """Logistic bijection of the real line onto (SHAPE_MIN, SHAPE_MAX)."""
    x = np.clip(np.asarray(xi_raw, dtype=float), -_XI_RAW_CLAMP, _XI_RAW_CLAMP)
    return dists._out(SHAPE_MIN + (SHAPE_MAX - SHAPE_MIN) / (1.0 + np.exp(-x)))


def raw_from_shape(shape):
    shape = np.asarray(shape, dtype=float)
    if np.any((shape <= SHAPE_MIN) | (shape >= SHAPE_MAX)):
        raise InvalidArgumentError("shape outside the admissible interval")
    u = (shape - SHAPE_MIN) / (SHAPE_MAX - SHAPE_MIN)
    return dists._out(np.log(u) - np.log1p(-u))


def _stat(s, name):
    return np.asarray(getattr(s, name), dtype=float)


def tn_link(c, s):
    loc = c.a0 + c.a_ctrl ** 2 * _stat(s, "f_ctrl") + c.a_ens ** 2 * _stat(s, "mean_ens")
    scale = np.maximum(np.sqrt(c.b0 ** 2 + c.b1 ** 2 * _stat(s, "md")), SCALE_FLOOR)
    return TruncNormal(dists._out(loc), dists._out(scale))


def ln_link(c, s):
    m = c.alpha0 + c.alpha_ctrl ** 2 * _stat(s, "f_ctrl") + c.alpha_ens ** 2 * _stat(s, "mean_ens")
    v = c.beta0 ** 2 + c.beta1 ** 2 * _stat(s, "s2")
    return LogNormalMV(dists._out(np.maximum(m, MEAN_FLOOR)), dists._out(np.maximum(v, VAR_FLOOR)))


def tgev_link(c, s):
    loc = c.gamma0 + c.gamma_ctrl * _stat(s, "f_ctrl") + c.gamma_ens * _stat(s, "mean_ens")
    scale = np.maximum(c.s0 ** 2 + c.s1 ** 2 * _stat(s, "mean_all"), SCALE_FLOOR)
    shape = np.broadcast_to(shape_from_raw(c.xi_raw), np.shape(loc))
    return Tgev(dists._out(loc), dists._out(scale), dists._out(np.array(shape)))


_LINKS = {TnCoefficients: tn_link, LnCoefficients: ln_link, TgevCoefficients: tgev_link}


def link(c, s):
    """Predictive distribution for coefficients ``c`` and statistics ``s``."""
    try:
        fn = _LINKS[type(c)]
    except KeyError:
        raise InvalidArgumentError(f"not an EMOS coefficient set: {c!r}") from None
    return fn(c, s)


# ---------------------------------------------------------------------------
# compiled objective and simplex search


def predictors(family, s):
    """(n, 3) design columns used by the compiled objective for ``family``."""
    third = {"tn": "md", "ln": "s2", "tgev": "mean_all"}[family]
    cols = [_stat(s, "f_ctrl"), _stat(s, "mean_ens"), _stat(s, third)]
    return np.ascontiguousarray(np.stack(np.broadcast_arrays(*cols), axis=-1))


@njit(cache=True)
def _shape_nb(xi_raw):
    x = min(max(xi_raw, -_XI_RAW_CLAMP), _XI_RAW_CLAMP)
    return SHAPE_MIN + (SHAPE_MAX - SHAPE_MIN) / (1.0 + math.exp(-x))


@njit(cache=True)
def _mean_crps(family, th, X, y, n):
    total = 0.0
    if family == TN:
        c1 = th[1] * th[1]
        c2 = th[2] * th[2]
        v0 = th[3] * th[3]
        v1 = th[4] * th[4]
        for i in range(n):
            loc = th[0] + c1 * X[i, 0] + c2 * X[i, 1]
            scale = max(math.sqrt(v0 + v1 * X[i, 2]), SCALE_FLOOR)
            total += tn_crps_scalar(loc, scale, y[i])
    elif family == LN:
        c1 = th[1] * th[1]
        c2 = th[2] * th[2]
        v0 = th[3] * th[3]
        v1 = th[4] * th[4]
        for i in range(n):
            m = max(th[0] + c1 * X[i, 0] + c2 * X[i, 1], MEAN_FLOOR)
            v = max(v0 + v1 * X[i, 2], VAR_FLOOR)
            total += ln_crps_scalar(m, v, y[i])
    else:
        v0 = th[3] * th[3]
        v1 = th[4] * th[4]
        shape = _shape_nb(th[5])
        gamma_a, inv, shift, factor = tgev_constants(shape)
        for i in range(n):
            loc = th[0] + th[1] * X[i, 0] + th[2] * X[i, 1]
            scale = max(v0 + v1 * X[i, 2], SCALE_FLOOR)
            total += tgev_crps_core(loc, scale, shape, gamma_a, inv, shift, factor, y[i])
    return total / n


@njit(cache=True)
def _eval(family, th, X, y, n):
    f = _mean_crps(family, th, X, y, n)
    if not math.isfinite(f):
        return math.inf
    return f


@njit(cache=True)
def _simplex(family, x0, step, X, y, n, ftol, maxfev, x_out):
    """One Nelder-Mead run; returns (best value, evaluations used)."""
    p = x0.size
    sim = np.empty((p + 1, p))
    fs = np.empty(p + 1)
    for j in range(p + 1):
        for k in range(p):
            sim[j, k] = x0[k]
        if j > 0:
            sim[j, j - 1] += step[j - 1]
        fs[j] = _eval(family, sim[j], X, y, n)
    nfev = p + 1
    cen = np.empty(p)
    xr = np.empty(p)
    xe = np.empty(p)
    xc = np.empty(p)
    row = np.empty(p)
    while True:
        # insertion sort keeps the simplex ordered best to worst
        for j in range(1, p + 1):
            fj = fs[j]
            for k in range(p):
                row[k] = sim[j, k]
            i = j - 1
            while i >= 0 and fs[i] > fj:
                fs[i + 1] = fs[i]
                for k in range(p):
                    sim[i + 1, k] = sim[i, k]
                i -= 1
            fs[i + 1] = fj
            for k in range(p):
                sim[i + 1, k] = row[k]
        if fs[p] - fs[0] <= ftol or nfev >= maxfev:
            break
        for k in range(p):
            acc = 0.0
            for j in range(p):
                acc += sim[j, k]
            cen[k] = acc / p
        for k in range(p):
            xr[k] = 2.0 * cen[k] - sim[p, k]
        fr = _eval(family, xr, X, y, n)
        nfev += 1
        if fr < fs[0]:
            for k in range(p):
                xe[k] = 3.0 * cen[k] - 2.0 * sim[p, k]
            fe = _eval(family, xe, X, y, n)
            nfev += 1
            if fe < fr:
                sim[p, :] = xe
                fs[p] = fe
            else:
                sim[p, :] = xr
                fs[p] = fr
            continue
        if fr < fs[p - 1]:
            sim[p, :] = xr
            fs[p] = fr
            continue
        if fr < fs[p]:
            # outside contraction
            for k in range(p):
                xc[k] = cen[k] + 0.5 * (xr[k] - cen[k])
            fc = _eval(family, xc, X, y, n)
            nfev += 1
            accept = fc <= fr
        else:
            # inside contraction
            for k in range(p):
                xc[k] = cen[k] + 0.5 * (sim[p, k] - cen[k])
            fc = _eval(family, xc, X, y, n)
            nfev += 1
            accept = fc < fs[p]
        if accept:
            sim[p, :] = xc
            fs[p] = fc
            continue
        for j in range(1, p + 1):
            for k in range(p):
                sim[j, k] = sim[0, k] + 0.5 * (sim[j, k] - sim[0, k])
            fs[j] = _eval(family, sim[j], X, y, n)
        nfev += p
    for k in range(p):
        x_out[k] = sim[0, k]
    return fs[0], nfev


@njit(cache=True)
def _initial_step(x, rel, floor, out):
    for k in range(x.size):
        out[k] = rel * max(abs(x[k]), floor)


@njit(cache=True)
def _minimize(family, x0, rel_step, X, y, n, ftol, maxfev, restarts, x_out):
    """Simplex search with restarts from the incumbent.

    Returns (f at x0, best f, evaluations).
    """
    p = x0.size
    step = np.empty(p)
    f0 = _eval(family, x0, X, y, n)
    _initial_step(x0, rel_step, 1.0, step)
    xb = np.empty(p)
    fb, nfev = _simplex(family, x0, step, X, y, n, ftol, maxfev, xb)
    nfev += 1
    xt = np.empty(p)
    for _ in range(restarts):
        if nfev >= maxfev:
            break
        _initial_step(xb, rel_step, 0.1, step)
        ft, used = _simplex(family, xb, step, X, y, n, ftol, maxfev - nfev, xt)
        nfev += used
        improved = fb - ft
        if ft < fb:
            fb = ft
            for k in range(p):
                xb[k] = xt[k]
        if improved <= ftol:
            break
    if not fb <= f0:
        # the start point is always in the simplex, so this only happens for f0 = inf
        fb = f0
        for k in range(p):
            xb[k] = x0[k]
    for k in range(p):
        x_out[k] = xb[k]
    return f0, fb, nfev


@njit(cache=True)
def _minimize_batch(family, x0, rel_step, X, y, n, ftol, maxfev, restarts):
    """Independent fits for problems ``X[i, :n[i]]``; rows with n = 0 are skipped.

    ``rel_step`` and ``restarts`` hold one value per problem.
    """
    P, p = x0.shape
    xs = np.full((P, p), np.nan)
    f0 = np.full(P, np.nan)
    fb = np.full(P, np.nan)
    nfev = np.zeros(P, dtype=np.int64)
    for i in range(P):
        if n[i] == 0:
            continue
        a, b, c = _minimize(family, x0[i], rel_step[i], X[i], y[i], n[i], ftol, maxfev,
                            restarts[i], xs[i])
        f0[i] = a
        fb[i] = b
        nfev[i] = c
    return xs, f0, fb, nfev


# ---------------------------------------------------------------------------
# fitting API


@dataclass(frozen=True)
class OptimizerSettings:
    """Nelder-Mead controls; ``rel_step`` scales the initial simplex."""

    ftol: float = 1e-8
    maxfev: int = 5000
    restarts: int = 2
    warm_restarts: int = 0
    rel_step: float = 0.1
    warm_rel_step: float = 0.1

    def __post_init__(self):
        if self.ftol <= 0 or self.maxfev < 10 or min(self.restarts, self.warm_restarts) < 0:
            raise InvalidArgumentError("invalid optimizer settings")
        if self.rel_step <= 0 or self.warm_rel_step <= 0:
            raise InvalidArgumentError("simplex steps must be positive")


@dataclass(frozen=True)
class FitResult:
    coefficients: object
    mean_crps: float
    initial_mean_crps: float
    n_cases: int
    evaluations: int


def mean_crps(c, stats, obs):
    """Mean closed-form CRPS of the linked laws over a training set."""
    return float(np.mean(dists.crps_closed(link(c, stats), np.asarray(obs, dtype=float))))


def fit_emos(family, training_set, init=None, settings=OptimizerSettings()):
    """Minimise the mean CRPS of ``family`` over ``training_set``.

    ``training_set`` is a :class:`~windcal.data.TrainingSet` or a pair
    ``(stats, observations)``. ``init`` defaults to :func:`default_init`.
    """
    cls = _family_type(family)
    if isinstance(training_set, TrainingSet):
        stats, obs = training_set.stats, training_set.obs
    else:
        stats, obs = training_set
    obs = np.atleast_1d(np.asarray(obs, dtype=float))
    X = predictors(family, stats).reshape(-1, 3)
    ok = np.isfinite(obs) & np.all(np.isfinite(X), axis=1)
    X, obs = np.ascontiguousarray(X[ok]), np.ascontiguousarray(obs[ok])
    p = N_COEF[family]
    if obs.size < p + 1:
        raise InsufficientDataError(f"{family} fit needs at least {p + 1} cases, got {obs.size}")
    if init is None:
        init = cls()
    elif not isinstance(init, cls):
        raise InvalidArgumentError(f"init must be {cls.__name__}")
    x0 = init.as_array()
    xb = np.empty(p)
    f0, fb, nfev = _minimize(FAMILY_CODES[family], x0, settings.rel_step, X, obs, obs.size,
                             settings.ftol, settings.maxfev, settings.restarts, xb)
    if not math.isfinite(fb):
        raise NumericalFailureError(
            "non-finite EMOS objective",
            {"family": family, "n_cases": int(obs.size), "init": x0.tolist()},
        )
    return FitResult(cls.from_array(xb), float(fb), float(f0), int(obs.size), int(nfev))


# ---------------------------------------------------------------------------
# rolling driver


@dataclass(frozen=True)
class EmosTrainingConfig:
    family: str = "tn"
    window_days: int = 51
    scope: str = "local"
    warm_start: bool = True
    optimizer: OptimizerSettings = OptimizerSettings()

    def __post_init__(self):
        _family_type(self.family)
        if int(self.window_days) < 1:
            raise InvalidArgumentError("window_days must be >= 1")
        if self.scope not in ("local", "regional"):
            raise InvalidArgumentError(f"unknown scope {self.scope!r}")


@dataclass
class WindowFit:
    """Coefficients fitted for one verification date.

    Arrays are indexed (unit, lead); a unit is a station (local scope) or the
    single pooled region. Unfitted entries hold NaN and ``n_cases`` 0.
    """

    date: np.datetime64
    units: list
    coef: np.ndarray        # (U, L, p)
    mean_crps: np.ndarray   # (U, L)
    initial_crps: np.ndarray
    n_cases: np.ndarray     # (U, L)
    evaluations: np.ndarray


@dataclass
class RollingResult:
    config: EmosTrainingConfig
    stations: list
    dates: np.ndarray       # verification dates actually processed
    fits: list              # WindowFit per date
    forecasts: object       # PredictiveDistribution over ``case_rows``
    case_rows: np.ndarray   # dataset row of every forecast case
    skipped_rows: np.ndarray


def earliest_date(dataset, window_days):
    """First date whose full training window lies inside ``dataset``."""
    return dataset.dates.min() + np.timedelta64(int(window_days), "D")


def _pack(X, y, valid):
    """Left-align valid cases along axis 1; returns packed arrays and counts."""
    order = np.argsort(~valid, axis=1, kind="stable")
    Xp = np.take_along_axis(X, order[..., None], axis=1)
    yp = np.take_along_axis(y, order, axis=1)
    n = valid.sum(axis=1).astype(np.int64)
    return np.ascontiguousarray(Xp), np.ascontiguousarray(yp), n


def _window_problems(obs, present, X_all, d, window, scope):
    """Training problems for verification day ``d``: (U*L, N, 3), (U*L, N), n."""
    lo = max(d - window, 0)
    Xw = X_all[:, lo:d]                          # (S, W, L, 3)
    yw = obs[:, lo:d]                            # (S, W, L)
    valid = present[:, lo:d] & np.isfinite(yw)
    S, W, L = yw.shape
    if scope == "local":
        Xp = Xw.transpose(0, 2, 1, 3).reshape(S * L, W, 3)
        yp = yw.transpose(0, 2, 1).reshape(S * L, W)
        vp = valid.transpose(0, 2, 1).reshape(S * L, W)
    else:
        Xp = Xw.transpose(2, 0, 1, 3).reshape(L, S * W, 3)
        yp = yw.transpose(2, 0, 1).reshape(L, S * W)
        vp = valid.transpose(2, 0, 1).reshape(L, S * W)
    yp = np.where(vp, yp, 0.0)
    Xp = np.where(vp[..., None], Xp, 0.0)
    return _pack(Xp, yp, vp)


def _fit_chain(family, cube_obs, present, X_all, day_indices, window, scope, settings,
               warm_start, lead_slice):
    """Fit all verification days for the leads in ``lead_slice`` (a worker task)."""
    obs = cube_obs[:, :, lead_slice]
    present = present[:, :, lead_slice]
    X_sub = X_all[:, :, lead_slice]
    fam = FAMILY_CODES[family]
    p = N_COEF[family]
    S = cube_obs.shape[0]
    L = X_sub.shape[2]
    U = S if scope == "local" else 1
    init = np.tile(default_init(family).as_array(), (U * L, 1))
    prev = np.full((U * L, p), np.nan)
    out = []
    for d in day_indices:
        Xp, yp, n = _window_problems(obs, present, X_sub, d, window, scope)
        n = np.where(n >= p + 1, n, 0)
        have_prev = warm_start & np.all(np.isfinite(prev), axis=1)
        x0 = np.where(have_prev[:, None], prev, init)
        rel = np.where(have_prev, settings.warm_rel_step, settings.rel_step)
        restarts = np.where(have_prev, settings.warm_restarts, settings.restarts)
        xs, f0, fb, nfev = _minimize_batch(fam, np.ascontiguousarray(x0), rel, Xp, yp, n,
                                           settings.ftol, settings.maxfev, restarts)
        fitted = n > 0
        if np.any(fitted & ~np.isfinite(fb)):
            i = int(np.flatnonzero(fitted & ~np.isfinite(fb))[0])
            raise NumericalFailureError(
                "non-finite EMOS objective",
                {"family": family, "day": int(d), "problem": i, "n_cases": int(n[i])},
            )
        prev = np.where(fitted[:, None], xs, prev)
        out.append((xs.reshape(U, L, p), fb.reshape(U, L), f0.reshape(U, L),
                    n.reshape(U, L), nfev.reshape(U, L)))
    return out


def _lead_chunks(n_workers):
    bounds = np.linspace(0, N_LEADS, n_workers + 1).astype(int)
    return [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def rolling_train_predict(dataset, verification_dates=None, config=EmosTrainingConfig(),
                          workers=1):
    """Rolling-window EMOS training and prediction.

    For every verification date, coefficients are fitted per lead time on the
    preceding ``window_days`` days (per station for local scope, pooled for
    regional scope), warm-started from the previous date's fit, and applied
    to that date's cases. Windows with fewer than p + 1 usable cases are
    skipped and their cases listed in ``skipped_rows``.
    """
    cube = dataset.cube()
    family = config.family
    window = int(config.window_days)
    if verification_dates is None:
        first = earliest_date(dataset, window)
        verification_dates = dataset.dates[dataset.dates >= first]
    dates = np.unique(np.asarray(verification_dates, dtype="datetime64[D]"))
    day_idx = np.array([cube.day_index(t) for t in dates], dtype=np.int64)
    keep = (day_idx >= 0) & (day_idx < cube.n_days)
    dates, day_idx = dates[keep], day_idx[keep]

    X_all = predictors(family, cube.stats())   # (S, D, L, 3)
    if workers > 1 and len(day_idx):
        from concurrent.futures import ProcessPoolExecutor

        chunks = _lead_chunks(workers)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(_fit_chain, family, cube.obs, cube.present, X_all, day_idx,
                                window, config.scope, config.optimizer, config.warm_start, c)
                    for c in chunks]
            parts = [f.result() for f in futs]
        chain = [tuple(np.concatenate([part[k][j] for part in parts], axis=1)
                       for j in range(5)) for k in range(len(day_idx))]
    else:
        chain = _fit_chain(family, cube.obs, cube.present, X_all, day_idx, window,
                           config.scope, config.optimizer, config.warm_start, slice(None))

    units = list(cube.stations) if config.scope == "local" else ["regional"]
    fits = [WindowFit(dates[k], units, *chain[k][:1], chain[k][1], chain[k][2], chain[k][3],
                      chain[k][4]) for k in range(len(day_idx))]
    rows, skipped, params = [], [], []
    for k, d in enumerate(day_idx):
        coef = fits[k].coef
        for s in range(len(cube.stations)):
            u = s if config.scope == "local" else 0
            present = cube.present[s, d]
            r = cube.row[s, d][present]
            c = coef[u][present]
            ok = np.all(np.isfinite(c), axis=1)
            rows.append(r[ok])
            skipped.append(r[~ok])
            params.append(c[ok])
        n_skip = sum(len(x) for x in skipped[-len(cube.stations):])
        if n_skip:
            log.warning("%s %s: %d cases skipped (insufficient training data)",
                        family, dates[k], n_skip)
    rows = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    skipped = np.concatenate(skipped) if skipped else np.zeros(0, dtype=np.int64)
    coef_rows = np.concatenate(params) if params else np.zeros((0, N_COEF[family]))
    forecasts = link_rows(family, coef_rows, dataset.stats().take(rows)) if rows.size else None
    return RollingResult(config, list(cube.stations), dates, fits, forecasts, rows, skipped)


def link_rows(family, coef_rows, stats):
    """Vectorised link with one coefficient vector per case (rows of ``coef_rows``)."""
    cls = _family_type(family)
    cols = {name: coef_rows[:, j] for j, name in enumerate(cls.names())}
    c = _RowCoefficients(**cols)
    return {"tn": tn_link, "ln": ln_link, "tgev": tgev_link}[family](c, stats)


class _RowCoefficients:
    # duck-typed coefficient holder whose attributes are per-case arrays
    def __init__(self, **kw):
        self.__dict__.update(kw)


# ---------------------------------------------------------------------------
# coefficient store


def coefficient_records(result, model_name=None):
    """Flatten a :class:`RollingResult` into store records (dicts)."""
    family = result.config.family
    names = _family_type(family).names()
    model_name = model_name or f"{family}-emos"
    for fit in result.fits:
        date = str(fit.date)
        for u, unit in enumerate(fit.units):
            for li in range(fit.coef.shape[1]):
                if fit.n_cases[u, li] == 0:
                    continue
                yield {
                    "model": model_name,
                    "family": family,
                    "scope": result.config.scope,
                    "unit": unit,
                    "date": date,
                    "lead_time_index": li + 1,
                    "window_days": int(result.config.window_days),
                    "n_cases": int(fit.n_cases[u, li]),
                    "train_mean_crps": float(fit.mean_crps[u, li]),
                    "coefficients": dict(zip(names, (float(v) for v in fit.coef[u, li]))),
                }


def coefficients_from_record(record):
    cls = _family_type(record["family"])
    values = record["coefficients"]
    return cls(*(float(values[name]) for name in cls.names()))

"""Predictive distribution families for non-negative wind speed.

Three laws are supported, all living on [0, inf):

* :class:`TruncNormal` -- normal law left-truncated at zero,
* :class:`LogNormalMV` -- log-normal law parameterised by its mean and variance,
* :class:`Tgev` -- generalised extreme value law left-truncated at zero.

Parameters may be scalars or equally shaped numpy arrays; every function in
this module broadcasts, so a single object can describe a whole batch of
forecast cases.
"""

from dataclasses import dataclass
from typing import Union

import math

import numpy as np
from numba import njit, vectorize

from .errors import InvalidArgumentError
from .special import (
    SQRT2,
    SQRT_PI,
    ein_log_scalar,
    gamma_reciprocals,
    lower_gamma_known,
    ncdf,
    norm_cdf,
    norm_pdf,
    norm_ppf,
    npdf,
)

SHAPE_MIN = -0.278
SHAPE_MAX = 1.0 / 3.0

# inside (-_GUMBEL_EPS, _GUMBEL_EPS) the TGEV score and mean are interpolated linearly
# between the Gumbel limit and the general formula, which loses accuracy to
# cancellation as shape -> 0
_GUMBEL_EPS = 1e-6
# below this |shape z|, log1p(shape z) / (shape z) rounds to 1 and t = e^-z
_BASE_TINY = 1e-17
_PHI_FLOOR = 1e-300
_NO_TABLE = np.empty(0)


def _arr(v):
    return np.asarray(v, dtype=float)


def _check_finite(name, v):
    if not np.all(np.isfinite(v)):
        raise InvalidArgumentError(f"{name} must be finite")


def _out(v):
    # hand back Python floats for scalar input
    return v.item() if np.ndim(v) == 0 else v


@dataclass(frozen=True)
class TruncNormal:
    """Normal law N(loc, scale^2) truncated to [0, inf)."""

    loc: Union[float, np.ndarray]
    scale: Union[float, np.ndarray]

    def __post_init__(self):
        _check_finite("loc", self.loc)
        _check_finite("scale", self.scale)
        if np.any(_arr(self.scale) <= 0):
            raise InvalidArgumentError("scale must be positive")


@dataclass(frozen=True)
class LogNormalMV:
    """Log-normal law given by its mean ``m`` and variance ``v``."""

    m: Union[float, np.ndarray]
    v: Union[float, np.ndarray]

    def __post_init__(self):
        _check_finite("m", self.m)
        _check_finite("v", self.v)
        if np.any(_arr(self.m) <= 0) or np.any(_arr(self.v) <= 0):
            raise InvalidArgumentError("m and v must be positive")

    @classmethod
    def from_log_params(cls, mu_log, sigma_log):
        mu_log, sigma_log = _arr(mu_log), _arr(sigma_log)
        s2 = sigma_log * sigma_log
        m = np.exp(mu_log + 0.5 * s2)
        v = np.expm1(s2) * np.exp(2.0 * mu_log + s2)
        return cls(_out(m), _out(v))

    @property
    def log_params(self):
        return ln_from_moments(self.m, self.v)


@dataclass(frozen=True)
class Tgev:
    """GEV law truncated to [0, inf); shape restricted to (-0.278, 1/3)."""

    loc: Union[float, np.ndarray]
    scale: Union[float, np.ndarray]
    shape: Union[float, np.ndarray]

    def __post_init__(self):
        for name in ("loc", "scale", "shape"):
            _check_finite(name, getattr(self, name))
        if np.any(_arr(self.scale) <= 0):
            raise InvalidArgumentError("scale must be positive")
        shape = _arr(self.shape)
        if np.any(shape <= SHAPE_MIN) or np.any(shape >= SHAPE_MAX):
            raise InvalidArgumentError(
                f"shape must lie in ({SHAPE_MIN}, {SHAPE_MAX:.6f})"
            )


PredictiveDistribution = Union[TruncNormal, LogNormalMV, Tgev]


def _check_dist(d):
    if not isinstance(d, (TruncNormal, LogNormalMV, Tgev)):
        raise InvalidArgumentError(f"not a predictive distribution: {d!r}")


def ln_from_moments(m, v):
    """Convert log-normal mean/variance to (mu_log, sigma_log)."""
    m, v = _arr(m), _arr(v)
    if np.any(~(m > 0)) or np.any(~(v > 0)):
        raise InvalidArgumentError("m and v must be positive")
    s2 = np.log1p(v / (m * m))
    return _out(np.log(m) - 0.5 * s2), _out(np.sqrt(s2))


# ---------------------------------------------------------------------------
# GEV helpers


def _gev_log_t(loc, scale, shape, x):
    """log of t(x) = [1 + shape (x - loc)/scale]^(-1/shape); G(x) = exp(-t)."""
    z = (x - loc) / scale
    gumbel = shape == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        base = shape * z
        safe_shape = np.where(gumbel, 1.0, shape)
        log_t = -np.log1p(np.where(base > -1.0, base, 0.0)) / safe_shape
    log_t = np.where(gumbel | (np.abs(base) < _BASE_TINY), -z, log_t)
    outside = ~gumbel & (base <= -1.0)
    # below the lower endpoint (shape > 0): t = inf; above the upper one: t = 0
    log_t = np.where(outside & (shape > 0), np.inf, log_t)
    log_t = np.where(outside & (shape < 0), -np.inf, log_t)
    return log_t


def gev_cdf(loc, scale, shape, x):
    """Untruncated GEV distribution function G(x | loc, scale, shape)."""
    loc, scale, shape, x = np.broadcast_arrays(_arr(loc), _arr(scale), _arr(shape), _arr(x))
    for name, v in (("loc", loc), ("scale", scale), ("shape", shape), ("x", x)):
        _check_finite(name, v)
    if np.any(scale <= 0):
        raise InvalidArgumentError("scale must be positive")
    with np.errstate(over="ignore"):
        t = np.exp(_gev_log_t(loc, scale, shape, x))
    return _out(np.exp(-t))


def _gev_survival(log_t):
    # 1 - G = 1 - exp(-t), accurate for small t
    with np.errstate(over="ignore"):
        return -np.expm1(-np.exp(log_t))


@njit(cache=True)
def _log_t(loc, scale, shape, x):
    z = (x - loc) / scale
    if shape == 0.0:
        return -z
    base = shape * z
    if abs(base) < _BASE_TINY:
        return -z
    if base <= -1.0:
        return math.inf if shape > 0.0 else -math.inf
    return -math.log1p(base) / shape


# beyond t = 40, e^-t < 5e-18: 1 - e^-t rounds to 1 and gamma(1 - shape, t)
# to Gamma(1 - shape) for every admissible shape, so both are taken as exact
_T_FLAT = 40.0
_LOG_T_FLAT = math.log(_T_FLAT)


@njit(cache=True)
def _gamma_a_pref(a, gamma_a, inv, t, log_t, e):
    # gamma(a, t) with e = exp(-t) already known
    if t > a + 50.0:
        return gamma_a
    return lower_gamma_known(a, gamma_a, inv, t, math.exp(a * log_t) * e)


@njit(cache=True)
def _tail_from_t(loc, scale, shape, gamma_a, inv, x, log_t):
    """int_x^inf (1 - G(y)) dy for the untruncated GEV, given log t(x).

    Uses (loc - x)(1 - G) + (scale/shape)[gamma(1 - shape, t) - (1 - G)]; the
    O(1/shape) pieces are grouped so they cancel inside the bracket.
    ``gamma_a`` is Gamma(1 - shape) and ``inv`` its reciprocal table.
    """
    if shape == 0.0:
        return scale * ein_log_scalar(log_t)
    if log_t > _LOG_T_FLAT:
        surv = 1.0
        lg = gamma_a
    elif log_t == -math.inf:
        return 0.0
    else:
        t = math.exp(log_t)
        e = math.exp(-t)
        surv = 1.0 - e if t > 0.5 else -math.expm1(-t)
        lg = _gamma_a_pref(1.0 - shape, gamma_a, inv, t, log_t, e)
    return (loc - x) * surv + scale / shape * (lg - surv)


@njit(cache=True)
def _tail_integral(loc, scale, shape, gamma_a, inv, x):
    return _tail_from_t(loc, scale, shape, gamma_a, inv, x, _log_t(loc, scale, shape, x))


# ---------------------------------------------------------------------------
# closed-form CRPS kernels


@njit(cache=True)
def _mills(a):
    """Mills ratio (1 - Phi(a)) / phi(a) for a >= 0, without underflow."""
    if a < 30.0:
        return 0.5 * math.erfc(a / SQRT2) / npdf(a)
    # Laplace continued fraction 1 / (a + 1 / (a + 2 / (a + ...)))
    f = a
    for k in range(40, 0, -1):
        f = a + k / f
    return 1.0 / f


# below this loc/scale the TN score switches to Mills-ratio scaled terms
_TN_SCALED = -4.0


@njit(cache=True)
def _tn_crps_scaled(loc, scale, y):
    # CRPS = y - 2 (T(0) - T(y)) / p + Q(0) / p^2 with T(x) = int_x^inf (1 - G),
    # Q(0) = int_0^inf (1 - G)^2 and p = 1 - Phi(a); every term is divided by
    # phi(a) or phi(a)^2 analytically so nothing underflows for a = -loc/scale >> 0
    a = -loc / scale
    z = y / scale + a
    ra = _mills(a)
    rz = _mills(z)
    ratio = math.exp(-0.5 * (z - a) * (z + a))
    head = 2.0 * ((1.0 - a * ra) - ratio * (1.0 - z * rz)) / ra
    quad = (2.0 * ra - a * ra * ra - SQRT2 * _mills(SQRT2 * a)) / (ra * ra)
    return scale * (y / scale - head + quad)


@njit(cache=True)
def tn_crps_scalar(loc, scale, y):
    below = 0.0
    if y < 0.0:
        below = -y
        y = 0.0
    m = loc / scale
    if m < _TN_SCALED:
        return _tn_crps_scaled(loc, scale, y) + below
    z = (y - loc) / scale
    p = max(ncdf(m), _PHI_FLOOR)
    val = z * p * (2.0 * ncdf(z) + p - 2.0) + 2.0 * npdf(z) * p - ncdf(SQRT2 * m) / SQRT_PI
    return scale * val / (p * p) + below


@njit(cache=True)
def ln_crps_scalar(m, v, y):
    s2 = math.log1p(v / (m * m))
    s = math.sqrt(s2)
    tail = -2.0 * m * (ncdf(s / SQRT2) - 1.0)
    if y <= 0.0:
        # CRPS(F, 0) = 2 m (1 - Phi(s / sqrt 2)), plus the distance below zero
        return tail - y
    w = (math.log(y) - (math.log(m) - 0.5 * s2)) / s
    return y * (2.0 * ncdf(w) - 1.0) - 2.0 * m * ncdf(w - s) + tail


@njit(cache=True)
def tgev_constants(shape):
    """Shape-only pieces of the TGEV score: Gamma(1 - shape), its reciprocal
    table, and the location shift and scale factor that turn G into G^2."""
    ln2 = 0.6931471805599453
    if shape == 0.0:
        shift = ln2
    else:
        shift = math.expm1(shape * ln2) / shape
    a = 1.0 - shape
    return math.gamma(a), gamma_reciprocals(a), shift, math.exp(shape * ln2)


@njit(cache=True)
def tgev_crps_core(loc, scale, shape, gamma_a, inv, shift, factor, y):
    if shape != 0.0 and abs(shape) < _GUMBEL_EPS:
        edge = math.copysign(_GUMBEL_EPS, shape)
        g0, i0, s0, f0 = tgev_constants(0.0)
        ge, ie, se, fe = tgev_constants(edge)
        at0 = _tgev_crps_general(loc, scale, 0.0, g0, i0, s0, f0, y)
        at_edge = _tgev_crps_general(loc, scale, edge, ge, ie, se, fe, y)
        return at0 + shape / edge * (at_edge - at0)
    return _tgev_crps_general(loc, scale, shape, gamma_a, inv, shift, factor, y)


@njit(cache=True)
def _sq_tail_series(scale, shape, lt):
    # int_x^inf (1 - G)^2 / t^2 for small t = t(x): expand (1 - e^-t)^2 in
    # powers of t and use int_x^inf t^k = scale t^(k - shape) / (k - shape).
    # Dividing by t^2 keeps the result finite when t^2 underflows.
    t = math.exp(lt)
    a_k = 0.5        # (-t)^k / k! / t^2
    b_k = 2.0        # (-2t)^k / k! / t^2
    total = (b_k - 2.0 * a_k) / (2.0 - shape)
    for k in range(3, 60):
        a_k *= -t / k
        b_k *= -2.0 * t / k
        term = (b_k - 2.0 * a_k) / (k - shape)
        total += term
        if abs(term) <= 1e-17 * abs(total):
            break
    return scale * total * math.exp(-shape * lt)


@njit(cache=True)
def _tgev_crps_general(loc, scale, shape, gamma_a, inv, shift, factor, y):
    # With T(x) = int_x^inf (1 - G), Q(x) = int_x^inf (1 - G)^2 and
    # D = 1 - G(0), for y >= 0
    #   CRPS = y - 2 (T(0) - T(y)) / D + Q(0) / D^2.
    # Q = 2 T - T2, where T2 belongs to G^2 = exp(-2t), a GEV law with
    # location loc + scale * shift and scale scale * factor (see
    # tgev_constants); for small t(0) that difference cancels and Q comes
    # from its power series instead.
    below = 0.0
    if y < 0.0:
        below = -y
        y = 0.0
    lt0 = _log_t(loc, scale, shape, 0.0)
    if lt0 == -math.inf:
        return y + below
    loc2 = loc + scale * shift
    scale2 = scale * factor
    t0 = math.exp(lt0) if lt0 <= 700.0 else math.inf
    small = t0 <= 0.5
    t2_0 = 0.0
    lg2 = 0.0
    if shape == 0.0:
        if lt0 > 700.0:
            dmass = 1.0
        else:
            dmass = -math.expm1(-t0)
        t_0 = scale * ein_log_scalar(lt0)
        if not small:
            t2_0 = scale2 * ein_log_scalar(lt0 + 0.6931471805599453)
    else:
        # T(0) and T2(0) share t0 = t(0), since t2(0) = 2 t0
        a = 1.0 - shape
        if t0 > _T_FLAT:
            c = 0.0
            dmass = 1.0
            dmass2 = 1.0
            lg0 = gamma_a
            lg2 = gamma_a
        else:
            c = math.exp(-t0)
            dmass = 1.0 - c if t0 > 0.5 else -math.expm1(-t0)
            dmass2 = dmass * (1.0 + c)
            if t0 > a + 50.0:
                lg0 = gamma_a
                lg2 = gamma_a
            else:
                pw = math.exp(a * lt0) * c
                lg0 = lower_gamma_known(a, gamma_a, inv, t0, pw)
                # (2 t0)^a e^(-2 t0) = 2^a t0^a e^-t0 c, and 2^a = 2 / factor
                if not small:
                    lg2 = lower_gamma_known(a, gamma_a, inv, 2.0 * t0, pw * c * 2.0 / factor)
        t_0 = loc * dmass + scale / shape * (lg0 - dmass)
        if not small:
            t2_0 = loc2 * dmass2 + scale2 / shape * (lg2 - dmass2)
    if dmass <= _PHI_FLOOR:
        return y + below
    if small:
        # Q(0) / D^2 = (Q(0) / t0^2) / (D / t0)^2
        r = dmass / t0
        q_ratio = _sq_tail_series(scale, shape, lt0) / (r * r)
    else:
        q_ratio = (2.0 * t_0 - t2_0) / (dmass * dmass)
    t_y = _tail_integral(loc, scale, shape, gamma_a, inv, y)
    val = y - 2.0 * (t_0 - t_y) / dmass + q_ratio
    return val + below


@njit(cache=True)
def tgev_crps_scalar(loc, scale, shape, y):
    a = 1.0 - shape
    ln2 = 0.6931471805599453
    shift = ln2 if shape == 0.0 else math.expm1(shape * ln2) / shape
    # an empty reciprocal table makes the series divide as it goes
    return tgev_crps_core(loc, scale, shape, math.gamma(a), _NO_TABLE, shift,
                          math.exp(shape * ln2), y)


@vectorize(["float64(float64, float64, float64)"], cache=True)
def tn_crps(loc, scale, y):
    """CRPS of the zero-truncated normal law (ufunc)."""
    return tn_crps_scalar(loc, scale, y)


@vectorize(["float64(float64, float64, float64)"], cache=True)
def ln_crps(m, v, y):
    """CRPS of the log-normal law given its mean and variance (ufunc)."""
    return ln_crps_scalar(m, v, y)


@vectorize(["float64(float64, float64, float64, float64)"], cache=True)
def tgev_crps(loc, scale, shape, y):
    """CRPS of the zero-truncated GEV law (ufunc)."""
    return tgev_crps_scalar(loc, scale, shape, y)


@vectorize(["float64(float64, float64, float64, float64)"], cache=True)
def _tgev_tail(loc, scale, shape, x):
    if shape != 0.0 and abs(shape) < _GUMBEL_EPS:
        edge = math.copysign(_GUMBEL_EPS, shape)
        at0 = _tail_integral(loc, scale, 0.0, 1.0, _NO_TABLE, x)
        at_edge = _tail_integral(loc, scale, edge, math.gamma(1.0 - edge), _NO_TABLE, x)
        return at0 + shape / edge * (at_edge - at0)
    return _tail_integral(loc, scale, shape, math.gamma(1.0 - shape), _NO_TABLE, x)


# ---------------------------------------------------------------------------
# public operations


def cdf(d, x):
    """Predictive CDF evaluated at ``x`` (broadcasts)."""
    _check_dist(d)
    x = _arr(x)
    if isinstance(d, TruncNormal):
        loc, scale = _arr(d.loc), _arr(d.scale)
        p = np.maximum(norm_cdf(loc / scale), _PHI_FLOOR)
        val = 1.0 - norm_cdf(-(x - loc) / scale) / p
    elif isinstance(d, LogNormalMV):
        mu, s = ln_from_moments(d.m, d.v)
        with np.errstate(divide="ignore"):
            lx = np.log(np.where(x > 0, x, 1.0))
        val = np.where(x > 0, norm_cdf((lx - mu) / s), 0.0)
    else:
        loc, scale, shape = _arr(d.loc), _arr(d.scale), _arr(d.shape)
        dmass = _gev_survival(_gev_log_t(loc, scale, shape, np.zeros_like(loc)))
        surv = _gev_survival(_gev_log_t(loc, scale, shape, x))
        degenerate = dmass <= _PHI_FLOOR
        val = np.where(degenerate, 1.0, 1.0 - surv / np.where(degenerate, 1.0, dmass))
    val = np.where(x < 0, 0.0, np.clip(val, 0.0, 1.0))
    return _out(val)


def pdf(d, x):
    """Predictive density at ``x``; zero below the origin."""
    _check_dist(d)
    x = _arr(x)
    if isinstance(d, TruncNormal):
        loc, scale = _arr(d.loc), _arr(d.scale)
        p = np.maximum(norm_cdf(loc / scale), _PHI_FLOOR)
        val = norm_pdf((x - loc) / scale) / (scale * p)
    elif isinstance(d, LogNormalMV):
        mu, s = ln_from_moments(d.m, d.v)
        xp = np.where(x > 0, x, 1.0)
        val = np.where(x > 0, norm_pdf((np.log(xp) - mu) / s) / (s * xp), 0.0)
    else:
        loc, scale, shape = _arr(d.loc), _arr(d.scale), _arr(d.shape)
        dmass = _gev_survival(_gev_log_t(loc, scale, shape, np.zeros_like(loc)))
        lt = _gev_log_t(loc, scale, shape, x)
        with np.errstate(invalid="ignore", over="ignore"):
            g = np.exp((shape + 1.0) * lt - np.exp(lt)) / scale
        g = np.where(np.isfinite(lt), g, 0.0)
        val = np.where(dmass > _PHI_FLOOR, g / np.where(dmass > 0, dmass, 1.0), 0.0)
    val = np.where(x < 0, 0.0, val)
    return _out(val)


def _tgev_quantile_guess(loc, scale, shape, p):
    log_t0 = _gev_log_t(loc, scale, shape, np.zeros_like(loc))
    dmass = _gev_survival(log_t0)
    # -log q with q = G(0) + p D, written via 1 - q = (1 - p) D
    neg_log_q = -np.log1p(-(1.0 - p) * dmass)
    with np.errstate(divide="ignore"):
        ll = np.log(neg_log_q)
    with np.errstate(invalid="ignore"):
        small = (shape == 0.0) | (np.abs(shape * ll) < _BASE_TINY)
    safe = np.where(small, 1.0, shape)
    x = np.where(small, loc - scale * ll, loc + scale * np.expm1(-shape * ll) / safe)
    return np.maximum(x, 0.0), dmass


def _polish(d, p, x, iters=60):
    # bracketed Newton: keep [lo, hi] with F(lo) <= p <= F(hi), bisect when a
    # Newton step leaves the bracket
    lo = np.zeros_like(x)
    hi = np.full_like(x, np.inf)
    for _ in range(iters):
        f = np.asarray(cdf(d, x), dtype=float) - p
        lo = np.where(f <= 0, np.maximum(lo, x), lo)
        hi = np.where(f >= 0, np.minimum(hi, x), hi)
        dens = np.asarray(pdf(d, x), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            step = np.where(dens > 0, f / dens, np.nan)
        cand = x - step
        bad = ~np.isfinite(cand) | (cand <= lo) | (cand >= hi)
        mid = np.where(np.isfinite(hi), 0.5 * (lo + hi), 2.0 * x + 1.0)
        new = np.where(bad, mid, cand)
        done = (np.abs(f) <= 1e-15) | (np.abs(new - x) <= 1e-14 * (1.0 + np.abs(x)))
        x = np.where(done, x, new)
        if done.all():
            break
    return x


def quantile(d, p):
    """Inverse predictive CDF for 0 < p < 1."""
    _check_dist(d)
    p = _arr(p)
    if np.any(~((p > 0) & (p < 1))):
        raise InvalidArgumentError("p must lie in (0, 1)")
    if isinstance(d, TruncNormal):
        loc, scale = _arr(d.loc), _arr(d.scale)
        mass = np.maximum(norm_cdf(loc / scale), _PHI_FLOOR)
        val = np.maximum(loc - scale * norm_ppf((1.0 - p) * mass), 0.0)
    elif isinstance(d, LogNormalMV):
        mu, s = ln_from_moments(d.m, d.v)
        val = np.exp(mu + s * norm_ppf(p))
    else:
        loc, scale, shape = np.broadcast_arrays(_arr(d.loc), _arr(d.scale), _arr(d.shape))
        loc, scale, shape = (np.broadcast_to(a, np.broadcast(a, p).shape) for a in (loc, scale, shape))
        guess, dmass = _tgev_quantile_guess(loc, scale, shape, p)
        pb = np.broadcast_to(p, guess.shape)
        # no mass above zero: every quantile is 0
        ok = dmass > _PHI_FLOOR
        val = np.zeros(guess.shape)
        if np.any(ok):
            val[ok] = _polish(Tgev(loc[ok], scale[ok], shape[ok]), pb[ok], guess[ok])
    return _out(val)


def dist_mean(d):
    """Mean of the predictive distribution."""
    _check_dist(d)
    if isinstance(d, TruncNormal):
        loc, scale = _arr(d.loc), _arr(d.scale)
        m = loc / scale
        val = loc + scale * norm_pdf(m) / np.maximum(norm_cdf(m), _PHI_FLOOR)
    elif isinstance(d, LogNormalMV):
        val = _arr(d.m) * 1.0
    else:
        loc, scale, shape = np.broadcast_arrays(_arr(d.loc), _arr(d.scale), _arr(d.shape))
        zero = np.zeros(loc.shape)
        dmass = _gev_survival(_gev_log_t(loc, scale, shape, zero))
        tail = _tgev_tail(loc, scale, shape, zero)
        val = np.where(dmass > _PHI_FLOOR, tail / np.where(dmass > 0, dmass, 1.0), 0.0)
    return _out(val)


def median(d):
    return quantile(d, 0.5)


def crps_closed(d, x):
    """Closed-form continuous ranked probability score of ``d`` at ``x``."""
    _check_dist(d)
    _check_finite("x", x)
    if isinstance(d, TruncNormal):
        val = tn_crps(d.loc, d.scale, x)
    elif isinstance(d, LogNormalMV):
        val = ln_crps(d.m, d.v, x)
    else:
        val = tgev_crps(d.loc, d.scale, d.shape, x)
    return _out(val)


FAMILIES = {"tn": TruncNormal, "ln": LogNormalMV, "tgev": Tgev}


def family_of(d):
    for name, cls in FAMILIES.items():
        if isinstance(d, cls):
            return name
    raise InvalidArgumentError(f"not a predictive distribution: {d!r}")


def params_of(d):
    """Parameter tuple of ``d`` in field order."""
    if isinstance(d, TruncNormal):
        return (d.loc, d.scale)
    if isinstance(d, LogNormalMV):
        return (d.m, d.v)
    if isinstance(d, Tgev):
        return (d.loc, d.scale, d.shape)
    raise InvalidArgumentError(f"not a predictive distribution: {d!r}")


def take(d, index):
    """Sub-select cases from an array-valued distribution."""
    params = np.broadcast_arrays(*(_arr(p) for p in params_of(d)))
    return type(d)(*(_out(p[index]) for p in params))

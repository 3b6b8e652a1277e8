"""Single-hidden-layer perceptron emitting truncated-normal forecasts.

Three standardised ensemble features (control forecast, mean of the
exchangeable members, standard deviation of all 11 members) pass through a
25-unit ELU layer to two linear outputs whose exponentials are the location
and scale of a zero-truncated normal law. The network is trained by
minimising the mean closed-form CRPS with Adam; the inner loop is compiled
with numba and is deterministic for a given seed.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .data import N_LEADS, STEPS_PER_DAY, ensemble_stats
from .dists import TruncNormal, _PHI_FLOOR, tn_crps_scalar
from .errors import InsufficientDataError, InvalidArgumentError, NumericalFailureError
from .special import INV_SQRT_2PI, SQRT2, SQRT_PI, ncdf, npdf

log = logging.getLogger(__name__)

INPUT_DIM = 3
HIDDEN_DIM = 25
OUTPUT_DIM = 2
GROUPS = {"day1": (1, STEPS_PER_DAY), "day2": (STEPS_PER_DAY + 1, N_LEADS)}

_N_W1 = HIDDEN_DIM * INPUT_DIM
_N_PARAMS = _N_W1 + HIDDEN_DIM + OUTPUT_DIM * HIDDEN_DIM + OUTPUT_DIM


def group_of_lead(lead_time_index):
    lead = np.asarray(lead_time_index)
    if np.any((lead < 1) | (lead > N_LEADS)):
        raise InvalidArgumentError(f"lead_time_index must lie in 1..{N_LEADS}")
    out = np.where(lead <= STEPS_PER_DAY, "day1", "day2")
    return str(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# model type


@dataclass(frozen=True)
class MlpFeatures:
    f_ctrl: np.ndarray
    mean_ens: np.ndarray
    sd: np.ndarray

    def as_matrix(self):
        cols = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in
                                     (self.f_ctrl, self.mean_ens, self.sd)))
        return np.stack(cols, axis=-1).reshape(-1, INPUT_DIM)


def mlp_features(case):
    """(f_ctrl, mean_ens, sd) of a case, of a member array or of EnsembleStats."""
    s = case if hasattr(case, "s2") else ensemble_stats(case)
    sd = np.sqrt(np.asarray(s.s2, dtype=float))
    out = MlpFeatures(s.f_ctrl, s.mean_ens, sd if sd.ndim else float(sd))
    return out


@dataclass
class MlpModel:
    """Weights of the 3-25-2 network plus the feature standardisation."""

    w1: np.ndarray          # (25, 3)
    b1: np.ndarray          # (25,)
    w2: np.ndarray          # (2, 25)
    b2: np.ndarray          # (2,)
    feature_mean: np.ndarray = field(default_factory=lambda: np.zeros(INPUT_DIM))
    feature_sd: np.ndarray = field(default_factory=lambda: np.ones(INPUT_DIM))
    lead_time_group: str = "day1"

    def __post_init__(self):
        shapes = {"w1": (HIDDEN_DIM, INPUT_DIM), "b1": (HIDDEN_DIM,),
                  "w2": (OUTPUT_DIM, HIDDEN_DIM), "b2": (OUTPUT_DIM,),
                  "feature_mean": (INPUT_DIM,), "feature_sd": (INPUT_DIM,)}
        for name, shape in shapes.items():
            v = np.array(getattr(self, name), dtype=float).reshape(shape)
            if not np.all(np.isfinite(v)):
                raise InvalidArgumentError(f"{name} must be finite")
            setattr(self, name, v)
        if np.any(self.feature_sd <= 0):
            raise InvalidArgumentError("feature_sd must be positive")
        if self.lead_time_group not in GROUPS:
            raise InvalidArgumentError(f"unknown lead-time group {self.lead_time_group!r}")

    @classmethod
    def zeros(cls, lead_time_group="day1"):
        return cls(np.zeros((HIDDEN_DIM, INPUT_DIM)), np.zeros(HIDDEN_DIM),
                   np.zeros((OUTPUT_DIM, HIDDEN_DIM)), np.zeros(OUTPUT_DIM),
                   lead_time_group=lead_time_group)

    def flat(self):
        return np.concatenate([self.w1.ravel(), self.b1, self.w2.ravel(), self.b2])

    def with_flat(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.size != _N_PARAMS:
            raise InvalidArgumentError(f"expected {_N_PARAMS} parameters")
        i = 0
        parts = []
        for n, shape in ((_N_W1, (HIDDEN_DIM, INPUT_DIM)), (HIDDEN_DIM, (HIDDEN_DIM,)),
                         (OUTPUT_DIM * HIDDEN_DIM, (OUTPUT_DIM, HIDDEN_DIM)),
                         (OUTPUT_DIM, (OUTPUT_DIM,))):
            parts.append(theta[i:i + n].reshape(shape))
            i += n
        return MlpModel(*parts, self.feature_mean.copy(), self.feature_sd.copy(),
                        self.lead_time_group)

    def standardize(self, features):
        x = features.as_matrix() if isinstance(features, MlpFeatures) else np.asarray(features, dtype=float)
        return (x.reshape(-1, INPUT_DIM) - self.feature_mean) / self.feature_sd


def elu(z):
    """Exponential linear unit with unit alpha."""
    z = np.asarray(z, dtype=float)
    # same arithmetic as the compiled training loop
    out = np.where(z > 0, z, np.exp(np.minimum(z, 0.0)) - 1.0)
    return out.item() if out.ndim == 0 else out


def _outputs(model, features):
    # explicit accumulation rather than BLAS so that results do not depend
    # on how many cases are passed at once
    x = model.standardize(features)
    z = np.broadcast_to(model.b1, (x.shape[0], HIDDEN_DIM)).copy()
    for k in range(INPUT_DIM):
        z += x[:, k:k + 1] * model.w1[:, k]
    h = np.atleast_2d(elu(z))
    theta = np.broadcast_to(model.b2, (x.shape[0], OUTPUT_DIM)).copy()
    for j in range(HIDDEN_DIM):
        theta += h[:, j:j + 1] * model.w2[:, j]
    return theta


def forward(model, features):
    """Truncated-normal forecast(s) for standardised-by-model ``features``."""
    theta = _outputs(model, features)
    loc, scale = np.exp(theta[:, 0]), np.exp(theta[:, 1])
    if loc.size == 1 and not isinstance(features, np.ndarray) and np.ndim(features.f_ctrl) == 0:
        return TruncNormal(float(loc[0]), float(scale[0]))
    return TruncNormal(loc, scale)


# ---------------------------------------------------------------------------
# CRPS gradient and backpropagation


@njit(cache=True)
def _tn_crps_grad(loc, scale, y):
    """(crps, d/dloc, d/dscale) of the zero-truncated normal CRPS."""
    below = 0.0
    if y < 0.0:
        below = -y
        y = 0.0
    m = loc / scale
    z = (y - loc) / scale
    p = max(ncdf(m), _PHI_FLOOR)
    phi_m = npdf(m)
    phi_z = npdf(z)
    cz = ncdf(z)
    q = 2.0 * cz + p - 2.0
    a = z * p * q + 2.0 * phi_z * p - ncdf(SQRT2 * m) / SQRT_PI
    g = a / (p * p)
    # CRPS = scale * g(m, z) with m = loc/scale, z = (y - loc)/scale
    h_z = q / p
    da_dm = (z * q + z * p + 2.0 * phi_z) * phi_m - SQRT2 * npdf(SQRT2 * m) / SQRT_PI
    h_m = da_dm / (p * p) - 2.0 * a * phi_m / (p * p * p)
    return scale * g + below, h_m - h_z, g - m * h_m - z * h_z


@njit(cache=True)
def _tn_crps_grad_vec(loc, scale, y):
    n = loc.size
    val = np.empty(n)
    dl = np.empty(n)
    ds = np.empty(n)
    for i in range(n):
        val[i], dl[i], ds[i] = _tn_crps_grad(loc[i], scale[i], y[i])
    return val, dl, ds


def crps_grad_tn(d, x):
    """Partial derivatives (d/dloc, d/dscale) of the closed-form TN CRPS."""
    loc, scale, y = np.broadcast_arrays(*(np.atleast_1d(np.asarray(v, dtype=float))
                                          for v in (d.loc, d.scale, x)))
    _, dl, ds = _tn_crps_grad_vec(np.ascontiguousarray(loc), np.ascontiguousarray(scale),
                                  np.ascontiguousarray(y))
    if dl.size == 1 and np.ndim(x) == 0 and np.ndim(d.loc) == 0:
        return float(dl[0]), float(ds[0])
    return dl, ds


@njit(cache=True)
def _case_grad(theta, x, y, grad, weight, hidden, act):
    """Add ``weight`` * d CRPS / d theta for one case into ``grad``; returns CRPS."""
    o_b1 = _N_W1
    o_w2 = o_b1 + HIDDEN_DIM
    o_b2 = o_w2 + OUTPUT_DIM * HIDDEN_DIM
    x0 = x[0]
    x1 = x[1]
    x2 = x[2]
    out0 = theta[o_b2]
    out1 = theta[o_b2 + 1]
    for j in range(HIDDEN_DIM):
        # INPUT_DIM == 3, unrolled
        w = j * INPUT_DIM
        zj = theta[o_b1 + j] + theta[w] * x0 + theta[w + 1] * x1 + theta[w + 2] * x2
        if zj > 0.0:
            hj = zj
            dj = 1.0
        else:
            # exp - 1 rather than expm1: twice as fast, and the absolute
            # error near zero (1e-16) is irrelevant for the network
            dj = math.exp(zj)
            hj = dj - 1.0
        hidden[j] = hj
        act[j] = dj
        out0 += theta[o_w2 + j] * hj
        out1 += theta[o_w2 + HIDDEN_DIM + j] * hj
    loc = math.exp(out0)
    scale = math.exp(out1)
    crps, dloc, dscale = _tn_crps_grad(loc, scale, y)
    g0 = weight * dloc * loc
    g1 = weight * dscale * scale
    grad[o_b2] += g0
    grad[o_b2 + 1] += g1
    for j in range(HIDDEN_DIM):
        grad[o_w2 + j] += g0 * hidden[j]
        grad[o_w2 + HIDDEN_DIM + j] += g1 * hidden[j]
        back = (g0 * theta[o_w2 + j] + g1 * theta[o_w2 + HIDDEN_DIM + j]) * act[j]
        grad[o_b1 + j] += back
        w = j * INPUT_DIM
        grad[w] += back * x0
        grad[w + 1] += back * x1
        grad[w + 2] += back * x2
    return crps


@njit(cache=True)
def _loss_grad(theta, X, y, idx, grad):
    """Mean CRPS over rows ``idx`` and its gradient (written into ``grad``)."""
    hidden = np.empty(HIDDEN_DIM)
    act = np.empty(HIDDEN_DIM)
    grad[:] = 0.0
    n = idx.size
    w = 1.0 / n
    total = 0.0
    for i in range(n):
        r = idx[i]
        total += _case_grad(theta, X[r], y[r], grad, w, hidden, act)
    return total / n


@njit(cache=True)
def _loss(theta, X, y):
    o_b1 = _N_W1
    o_w2 = o_b1 + HIDDEN_DIM
    o_b2 = o_w2 + OUTPUT_DIM * HIDDEN_DIM
    total = 0.0
    for r in range(y.size):
        out0 = theta[o_b2]
        out1 = theta[o_b2 + 1]
        for j in range(HIDDEN_DIM):
            zj = theta[o_b1 + j]
            for k in range(INPUT_DIM):
                zj += theta[j * INPUT_DIM + k] * X[r, k]
            hj = zj if zj > 0.0 else math.exp(zj) - 1.0
            out0 += theta[o_w2 + j] * hj
            out1 += theta[o_w2 + HIDDEN_DIM + j] * hj
        total += tn_crps_scalar(math.exp(out0), math.exp(out1), y[r])
    return total / y.size


def loss_and_gradients(model, X, y):
    """Mean CRPS and its gradient for a batch.

    ``X`` holds raw (unstandardised) features, one row per case; standardisation
    uses the model's stored statistics. Returns ``(loss, gradient)`` where the
    gradient is an :class:`MlpModel`-shaped set of arrays (a model object).
    """
    Xs = np.ascontiguousarray(model.standardize(np.asarray(X, dtype=float)))
    y = np.ascontiguousarray(np.atleast_1d(np.asarray(y, dtype=float)))
    if y.size == 0 or y.size != Xs.shape[0]:
        raise InvalidArgumentError("need a nonempty batch with one observation per case")
    grad = np.empty(_N_PARAMS)
    loss = _loss_grad(model.flat(), Xs, y, np.arange(y.size), grad)
    return float(loss), _grad_model(model, grad)


def _grad_model(model, grad):
    g = MlpModel.zeros(model.lead_time_group)
    g = g.with_flat(grad)
    return g


# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class MlpTrainConfig:
    epochs: int = 200
    batch_size: int = 64
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    patience: int = 10
    grad_clip: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.patience < 1:
            raise InvalidArgumentError("epochs, batch_size and patience must be positive")
        if not (self.learning_rate > 0 and self.grad_clip > 0):
            raise InvalidArgumentError("learning rate and clip must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise InvalidArgumentError("moment decays must lie in [0, 1)")


@njit(cache=True)
def _adam_train(theta, X, y, perms, batch, lr, beta1, beta2, eps, clip, patience):
    """Adam on the mean CRPS; returns (best params, epoch losses, epochs run).

    The epoch loss is the mean of the batch losses seen during the epoch.
    Training stops when it has not improved for ``patience`` epochs.
    """
    p = theta.size
    n = y.size
    m = np.zeros(p)
    v = np.zeros(p)
    grad = np.empty(p)
    best = theta.copy()
    best_loss = math.inf
    since = 0
    t = 0
    epochs = perms.shape[0]
    losses = np.full(epochs, np.nan)
    run = 0
    for e in range(epochs):
        order = perms[e]
        acc = 0.0
        for start in range(0, n, batch):
            idx = order[start:min(start + batch, n)]
            loss = _loss_grad(theta, X, y, idx, grad)
            if not math.isfinite(loss):
                return best, losses, -1
            acc += loss * idx.size
            t += 1
            c1 = 1.0 - beta1 ** t
            c2 = 1.0 - beta2 ** t
            for k in range(p):
                gk = min(max(grad[k], -clip), clip)
                m[k] = beta1 * m[k] + (1.0 - beta1) * gk
                v[k] = beta2 * v[k] + (1.0 - beta2) * gk * gk
                theta[k] -= lr * (m[k] / c1) / (math.sqrt(v[k] / c2) + eps)
        losses[e] = acc / n
        run = e + 1
        if losses[e] < best_loss:
            best_loss = losses[e]
            best[:] = theta
            since = 0
        else:
            since += 1
            if since >= patience:
                break
    return best, losses, run


@dataclass
class TrainResult:
    model: MlpModel
    initial_mean_crps: float
    mean_crps: float
    epoch_losses: np.ndarray
    n_cases: int


def initial_model(X, y, lead_time_group, seed):
    """Glorot-uniform weights, zero hidden biases and output biases that make
    the untrained network predict the climatological law of ``y``."""
    X = np.asarray(X, dtype=float)
    mean = X.mean(axis=0)
    sd = X.std(axis=0)
    sd = np.where(sd > 1e-12, sd, 1.0)
    rng = np.random.default_rng(seed)
    lim1 = math.sqrt(6.0 / (INPUT_DIM + HIDDEN_DIM))
    lim2 = math.sqrt(6.0 / (HIDDEN_DIM + OUTPUT_DIM))
    w1 = rng.uniform(-lim1, lim1, (HIDDEN_DIM, INPUT_DIM))
    w2 = rng.uniform(-lim2, lim2, (OUTPUT_DIM, HIDDEN_DIM))
    y_mean = max(float(np.mean(y)), 1e-3)
    y_sd = max(float(np.std(y)), 1e-3)
    b2 = np.array([math.log(y_mean), math.log(y_sd)])
    return MlpModel(w1, np.zeros(HIDDEN_DIM), w2, b2, mean, sd, lead_time_group)


def train_mlp_arrays(X, y, lead_time_group="day1", config=MlpTrainConfig()):
    """Train a network on raw feature rows ``X`` (n, 3) and observations ``y``.

    Standardisation statistics come from ``X`` only. The returned model's
    training mean CRPS never exceeds that of the initial network.
    """
    X = np.asarray(X, dtype=float).reshape(-1, INPUT_DIM)
    y = np.asarray(y, dtype=float).ravel()
    ok = np.isfinite(y) & np.all(np.isfinite(X), axis=1)
    X, y = X[ok], y[ok]
    if y.size == 0:
        raise InsufficientDataError("no training cases for the network")
    model0 = initial_model(X, y, lead_time_group, config.seed)
    Xs = np.ascontiguousarray(model0.standardize(X))
    y = np.ascontiguousarray(y)
    theta0 = model0.flat()
    rng = np.random.default_rng(config.seed)
    perms = np.tile(np.arange(y.size, dtype=np.int64), (config.epochs, 1))
    perms = rng.permuted(perms, axis=1)
    best, losses, run = _adam_train(theta0.copy(), Xs, y, perms, config.batch_size,
                                    config.learning_rate, config.beta1, config.beta2,
                                    config.adam_eps, config.grad_clip, config.patience)
    if run < 0:
        raise NumericalFailureError("non-finite training loss",
                                    {"group": lead_time_group, "n_cases": int(y.size)})
    init_loss = _loss(theta0, Xs, y)
    final_loss = _loss(best, Xs, y)
    if not final_loss <= init_loss:
        best, final_loss = theta0, init_loss
    return TrainResult(model0.with_flat(best), float(init_loss), float(final_loss),
                       losses[:run].copy(), int(y.size))


def group_training_set(dataset, target_date, lead_time_group, window_days):
    """Raw features and observations of the regional window for one group."""
    lo, hi = GROUPS[lead_time_group]
    target = np.datetime64(target_date, "D")
    first = target - np.timedelta64(int(window_days), "D")
    mask = ((dataset.lead >= lo) & (dataset.lead <= hi) & (dataset.init_date >= first)
            & (dataset.init_date < target) & dataset.has_obs)
    idx = np.flatnonzero(mask)
    f = mlp_features(ensemble_stats(dataset.members[idx]))
    return f.as_matrix(), dataset.obs[idx].copy()


def train_mlp(dataset, lead_time_group, target_date, window_days=51, config=MlpTrainConfig()):
    """Train the regional network of one group on the window before ``target_date``."""
    if lead_time_group not in GROUPS:
        raise InvalidArgumentError(f"unknown lead-time group {lead_time_group!r}")
    X, y = group_training_set(dataset, target_date, lead_time_group, window_days)
    if y.size == 0:
        raise InsufficientDataError(f"no training cases before {target_date} for {lead_time_group}")
    return train_mlp_arrays(X, y, lead_time_group, config)


@dataclass
class MlpRollingResult:
    dates: np.ndarray
    models: list            # (date, group, TrainResult)
    forecasts: Optional[TruncNormal]
    case_rows: np.ndarray
    skipped_rows: np.ndarray
    window_days: int


def rolling_train_predict(dataset, verification_dates, window_days=51, config=MlpTrainConfig()):
    """Retrain both group networks for every verification date and predict."""
    dates = np.unique(np.asarray(verification_dates, dtype="datetime64[D]"))
    feats = mlp_features(dataset.stats()).as_matrix()
    models, rows, skipped, locs, scales = [], [], [], [], []
    for date in dates:
        for group in GROUPS:
            lo, hi = GROUPS[group]
            target = np.flatnonzero((dataset.init_date == date) & (dataset.lead >= lo)
                                    & (dataset.lead <= hi))
            try:
                res = train_mlp(dataset, group, date, window_days, config)
            except InsufficientDataError as exc:
                log.warning("tn-mlp %s %s skipped: %s", date, group, exc)
                skipped.append(target)
                continue
            models.append((date, group, res))
            d = forward(res.model, feats[target])
            rows.append(target)
            locs.append(np.atleast_1d(d.loc))
            scales.append(np.atleast_1d(d.scale))
    rows = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    fc = TruncNormal(np.concatenate(locs), np.concatenate(scales)) if locs else None
    skipped = np.concatenate(skipped) if skipped else np.zeros(0, dtype=np.int64)
    return MlpRollingResult(dates, models, fc, rows, skipped, int(window_days))


# ---------------------------------------------------------------------------
# persistence helpers


def model_record(net, **extra):
    rec = dict(extra)
    rec.update({
        "lead_time_group": net.lead_time_group,
        "layers": [INPUT_DIM, HIDDEN_DIM, OUTPUT_DIM],
        "feature_mean": net.feature_mean.tolist(),
        "feature_sd": net.feature_sd.tolist(),
        "w1": net.w1.tolist(),
        "b1": net.b1.tolist(),
        "w2": net.w2.tolist(),
        "b2": net.b2.tolist(),
    })
    return rec


def model_from_record(rec):
    if list(rec.get("layers", [])) != [INPUT_DIM, HIDDEN_DIM, OUTPUT_DIM]:
        raise InvalidArgumentError("unsupported layer dimensions")
    return MlpModel(np.array(rec["w1"]), np.array(rec["b1"]), np.array(rec["w2"]),
                    np.array(rec["b2"]), np.array(rec["feature_mean"]),
                    np.array(rec["feature_sd"]), rec["lead_time_group"])

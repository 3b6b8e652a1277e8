"""Forecast cases, ensemble summaries, CSV ingestion and a synthetic generator.

A :class:`Dataset` is stored column-wise (numpy arrays) and is immutable once
built. The dense :class:`Cube` view indexes the same data by
(station, calendar day, lead time), which is what the rolling trainers use.
"""

import csv
import datetime as dt
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    InsufficientDataError,
    IntegrityError,
    InvalidArgumentError,
    ParseError,
    SchemaError,
)

N_MEMBERS = 11
N_LEADS = 192
STEPS_PER_DAY = 96  # 15-minute resolution
HEADER = ["station", "init_date", "lead_time_index", "obs", "f_ctrl"] + [
    f"f_ens_{k:02d}" for k in range(1, N_MEMBERS)
]


@dataclass(frozen=True)
class ForecastCase:
    """One (station, initialisation date, lead time) forecast case.

    ``members[0]`` is the control run, ``members[1:]`` the ten exchangeable
    perturbed members. ``observation`` is ``None`` when missing.
    """

    station_id: str
    init_date: dt.date
    lead_time_index: int
    members: tuple
    observation: Optional[float] = None

    def __post_init__(self):
        members = tuple(float(m) for m in self.members)
        object.__setattr__(self, "members", members)
        if len(members) != N_MEMBERS:
            raise InvalidArgumentError(f"expected {N_MEMBERS} members, got {len(members)}")
        if not all(math.isfinite(m) and m >= 0 for m in members):
            raise InvalidArgumentError("members must be finite and non-negative")
        if not 1 <= int(self.lead_time_index) <= N_LEADS:
            raise InvalidArgumentError(f"lead_time_index must lie in 1..{N_LEADS}")
        obs = self.observation
        if obs is not None:
            if not math.isfinite(obs):
                object.__setattr__(self, "observation", None)
            elif obs < 0:
                raise InvalidArgumentError("observation must be non-negative")


@dataclass(frozen=True)
class EnsembleStats:
    """Ensemble summaries; fields are floats or arrays of equal shape."""

    f_ctrl: np.ndarray
    mean_ens: np.ndarray
    mean_all: np.ndarray
    s2: np.ndarray
    md: np.ndarray

    @property
    def sd(self):
        return np.sqrt(self.s2)

    def take(self, index):
        return EnsembleStats(*(np.asarray(getattr(self, f))[index] for f in
                               ("f_ctrl", "mean_ens", "mean_all", "s2", "md")))


def ensemble_stats(case):
    """Summary statistics of an 11-member ensemble.

    ``case`` may be a :class:`ForecastCase` or an array whose last axis holds
    the members (control first). The variance uses divisor 10 and the mean
    absolute difference divisor 11^2.
    """
    if isinstance(case, ForecastCase):
        f = np.asarray(case.members, dtype=float)
    else:
        f = np.asarray(case, dtype=float)
    if f.shape[-1] != N_MEMBERS:
        raise InvalidArgumentError(f"expected {N_MEMBERS} members on the last axis")
    k = N_MEMBERS
    mean_all = f.mean(axis=-1)
    s2 = ((f - mean_all[..., None]) ** 2).sum(axis=-1) / (k - 1)
    fs = np.sort(f, axis=-1)
    # sum_k sum_l |f_k - f_l| = 2 sum_i (2i - k - 1) f_(i)
    weights = 2.0 * np.arange(1, k + 1) - k - 1.0
    md = 2.0 * (fs * weights).sum(axis=-1) / (k * k)
    stats = EnsembleStats(
        f_ctrl=f[..., 0],
        mean_ens=f[..., 1:].mean(axis=-1),
        mean_all=mean_all,
        s2=s2,
        md=md,
    )
    if f.ndim == 1:
        stats = EnsembleStats(*(float(getattr(stats, n)) for n in
                                ("f_ctrl", "mean_ens", "mean_all", "s2", "md")))
    return stats


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class Dataset:
    """Immutable, column-oriented collection of forecast cases."""

    def __init__(self, station, init_date, lead, obs, members):
        station = np.asarray(station, dtype=str)
        init_date = np.asarray(init_date, dtype="datetime64[D]")
        lead = np.asarray(lead, dtype=np.int64)
        obs = np.asarray(obs, dtype=float)
        members = np.asarray(members, dtype=float).reshape(-1, N_MEMBERS)
        n = station.size
        if not (init_date.size == lead.size == obs.size == members.shape[0] == n):
            raise InvalidArgumentError("column lengths differ")
        if n:
            if lead.min() < 1 or lead.max() > N_LEADS:
                raise IntegrityError(f"lead_time_index outside 1..{N_LEADS}")
            if not np.all(np.isfinite(members)) or members.min() < 0:
                raise IntegrityError("ensemble members must be finite and non-negative")
            if np.nanmin(np.where(np.isfinite(obs), obs, 0.0)) < 0:
                raise IntegrityError("observations must be non-negative")
            keys = np.rec.fromarrays([station, init_date.astype(np.int64), lead])
            uniq, counts = np.unique(keys, return_counts=True)
            if counts.max() > 1:
                dup = uniq[np.argmax(counts)]
                raise IntegrityError(f"duplicate case key {tuple(dup)}")
        self.station = _readonly(station)
        self.init_date = _readonly(init_date)
        self.lead = _readonly(lead)
        self.obs = _readonly(obs)
        self.members = _readonly(members)
        self._cube = None

    @classmethod
    def from_cases(cls, cases):
        cases = list(cases)
        return cls(
            [c.station_id for c in cases],
            [np.datetime64(c.init_date, "D") for c in cases],
            [c.lead_time_index for c in cases],
            [np.nan if c.observation is None else c.observation for c in cases],
            np.array([c.members for c in cases], dtype=float).reshape(-1, N_MEMBERS),
        )

    def __len__(self):
        return self.station.size

    def case(self, i):
        obs = self.obs[i]
        return ForecastCase(
            station_id=str(self.station[i]),
            init_date=self.init_date[i].astype(dt.date),
            lead_time_index=int(self.lead[i]),
            members=tuple(self.members[i]),
            observation=None if np.isnan(obs) else float(obs),
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self.case(i)

    @property
    def stations(self):
        return sorted(set(self.station.tolist()))

    @property
    def dates(self):
        return np.unique(self.init_date)

    @property
    def has_obs(self):
        return np.isfinite(self.obs)

    def stats(self):
        return ensemble_stats(self.members)

    def select(self, mask):
        return Dataset(self.station[mask], self.init_date[mask], self.lead[mask],
                       self.obs[mask], self.members[mask])

    def cube(self):
        if self._cube is None:
            self._cube = Cube.from_dataset(self)
        return self._cube

    def equals(self, other):
        """Bit-exact equality of all columns (NaN observations compare equal)."""
        return (
            np.array_equal(self.station, other.station)
            and np.array_equal(self.init_date, other.init_date)
            and np.array_equal(self.lead, other.lead)
            and np.array_equal(self.obs, other.obs, equal_nan=True)
            and np.array_equal(self.members, other.members)
        )


@dataclass
class Cube:
    """Dense (station, day, lead) view; missing cases hold NaN."""

    stations: list
    start: np.datetime64
    obs: np.ndarray        # (S, D, L)
    members: np.ndarray    # (S, D, L, 11)
    present: np.ndarray    # (S, D, L) case exists
    row: np.ndarray        # (S, D, L) dataset row index, -1 if absent
    _stats: Optional[EnsembleStats] = field(default=None, repr=False)

    @classmethod
    def from_dataset(cls, ds):
        stations = ds.stations
        if len(ds) == 0:
            raise InsufficientDataError("empty dataset")
        start = ds.init_date.min()
        n_days = int((ds.init_date.max() - start).astype(int)) + 1
        s_idx = np.searchsorted(np.array(stations), ds.station)
        d_idx = (ds.init_date - start).astype(int)
        l_idx = ds.lead - 1
        shape = (len(stations), n_days, N_LEADS)
        obs = np.full(shape, np.nan)
        members = np.full(shape + (N_MEMBERS,), np.nan)
        row = np.full(shape, -1, dtype=np.int64)
        obs[s_idx, d_idx, l_idx] = ds.obs
        members[s_idx, d_idx, l_idx] = ds.members
        row[s_idx, d_idx, l_idx] = np.arange(len(ds))
        return cls(stations, start, obs, members, row >= 0, row)

    @property
    def n_days(self):
        return self.obs.shape[1]

    def date(self, day_index):
        return self.start + np.timedelta64(int(day_index), "D")

    def day_index(self, date):
        return int((np.datetime64(date, "D") - self.start).astype(int))

    def stats(self):
        if self._stats is None:
            filled = np.where(self.present[..., None], self.members, 0.0)
            self._stats = ensemble_stats(filled)
        return self._stats


# ---------------------------------------------------------------------------
# CSV


def _fmt(x):
    return "" if not np.isfinite(x) else f"{x:.9g}"


def write_csv(dataset, path):
    """Write ``dataset`` using the documented column schema."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        dates = np.datetime_as_string(dataset.init_date, unit="D")
        for i in range(len(dataset)):
            w.writerow(
                [dataset.station[i], dates[i], int(dataset.lead[i]), _fmt(dataset.obs[i])]
                + [_fmt(v) for v in dataset.members[i]]
            )


def _parse_float(text, what, line):
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"cannot parse {what} {text!r}", line) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite {what} {text!r}", line)
    return v


def load_csv(path):
    """Read and validate a forecast/observation CSV file."""
    stations, dates, leads, obs, members = [], [], [], [], []
    seen = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty file: header required") from None
        header = [h.strip() for h in header]
        if header != HEADER:
            n_mem = sum(h.startswith("f_") for h in header)
            raise SchemaError(
                f"unexpected header ({n_mem} member columns); expected {','.join(HEADER)}"
            )
        for row in reader:
            line = reader.line_num
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(HEADER):
                raise ParseError(f"expected {len(HEADER)} fields, got {len(row)}", line)
            station = row[0].strip()
            if not station:
                raise ParseError("empty station id", line)
            try:
                date = np.datetime64(dt.date.fromisoformat(row[1].strip()), "D")
            except ValueError:
                raise ParseError(f"bad init_date {row[1]!r}", line) from None
            try:
                lead = int(row[2])
            except ValueError:
                raise ParseError(f"bad lead_time_index {row[2]!r}", line) from None
            if not 1 <= lead <= N_LEADS:
                raise IntegrityError(f"line {line}: lead_time_index {lead} outside 1..{N_LEADS}")
            o = row[3].strip()
            o = np.nan if o == "" else _parse_float(o, "obs", line)
            mem = [_parse_float(v, "member", line) for v in row[4:]]
            if min(mem) < 0 or (np.isfinite(o) and o < 0):
                raise IntegrityError(f"line {line}: negative wind speed")
            key = (station, date, lead)
            if key in seen:
                raise IntegrityError(f"line {line}: duplicate key {key} (first on line {seen[key]})")
            seen[key] = line
            stations.append(station)
            dates.append(date)
            leads.append(lead)
            obs.append(o)
            members.append(mem)
    return Dataset(stations, np.array(dates, dtype="datetime64[D]"), leads, obs,
                   np.array(members, dtype=float).reshape(-1, N_MEMBERS))


# ---------------------------------------------------------------------------
# training windows


@dataclass(frozen=True)
class TrainingSet:
    stats: EnsembleStats
    obs: np.ndarray
    station: np.ndarray
    init_date: np.ndarray

    def __len__(self):
        return self.obs.size


def rolling_window(dataset, target_date, lead_time_index, n_days, scope="regional", station=None):
    """Training cases for one target date and lead time.

    Selects cases with the given lead time whose initialisation date lies in
    ``[target_date - n_days, target_date - 1]`` and whose observation is
    present. ``scope="local"`` restricts to ``station``.
    """
    if int(n_days) < 1:
        raise InvalidArgumentError("n_days must be >= 1")
    if scope not in ("local", "regional"):
        raise InvalidArgumentError(f"unknown scope {scope!r}")
    if scope == "local" and station is None:
        raise InvalidArgumentError("local scope needs a station")
    target = np.datetime64(target_date, "D")
    first = target - np.timedelta64(int(n_days), "D")
    mask = (
        (dataset.lead == int(lead_time_index))
        & (dataset.init_date >= first)
        & (dataset.init_date < target)
        & dataset.has_obs
    )
    if scope == "local":
        mask &= dataset.station == str(station)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise InsufficientDataError(
            f"no training cases for {target} lead {lead_time_index} ({scope})"
        )
    return TrainingSet(
        stats=ensemble_stats(dataset.members[idx]),
        obs=dataset.obs[idx].copy(),
        station=dataset.station[idx].copy(),
        init_date=dataset.init_date[idx].copy(),
    )


# ---------------------------------------------------------------------------
# synthetic data


@dataclass(frozen=True)
class SyntheticConfig:
    """Parameters of the synthetic AROME-like generator.

    Per station and valid time the latent wind is a station base speed plus
    a diurnal sine plus an AR(1) anomaly that changes once per day. The
    situation-dependent error scale is ``obs_noise_sd`` plus a diurnal part
    of size ``ensemble_spread_sd``; observations scatter around the truth
    with that scale, members with ``spread_deficiency_factor`` times it.
    """

    n_stations: int = 3
    n_days: int = 120
    station_base_speeds: Sequence[float] = (6.0, 7.5, 9.0)
    diurnal_amplitude: float = 1.5
    ar1_coefficient: float = 0.7
    anomaly_sd: float = 2.0
    obs_noise_sd: float = 1.0
    ensemble_spread_sd: float = 0.6
    ensemble_bias: float = 0.2
    spread_deficiency_factor: float = 0.5
    seed: int = 0
    start_date: str = "2020-05-07"

    def __post_init__(self):
        if int(self.n_stations) < 1 or int(self.n_days) < 1:
            raise InvalidArgumentError("n_stations and n_days must be >= 1")
        if not self.station_base_speeds:
            raise InvalidArgumentError("need at least one station base speed")
        if self.obs_noise_sd < 0 or self.ensemble_spread_sd < 0 or self.anomaly_sd < 0:
            raise InvalidArgumentError("noise parameters must be non-negative")
        if not 0.0 < self.spread_deficiency_factor <= 1.0:
            raise InvalidArgumentError("spread_deficiency_factor must lie in (0, 1]")
        if not -1.0 < self.ar1_coefficient < 1.0:
            raise InvalidArgumentError("ar1_coefficient must lie in (-1, 1)")


def _station_name(s):
    return f"st{s + 1:02d}"


def synthetic_generate(config=SyntheticConfig()):
    """Generate a deterministic synthetic dataset from ``config``."""
    rng = np.random.default_rng(config.seed)
    n_st, n_days = int(config.n_stations), int(config.n_days)
    base = np.resize(np.asarray(config.station_base_speeds, dtype=float), n_st)
    phase = 0.5 * np.arange(n_st)

    # valid-time axis in 15-minute steps covering every lead of every run
    n_valid_days = n_days + N_LEADS // STEPS_PER_DAY
    n_slots = n_valid_days * STEPS_PER_DAY + 1
    slot = np.arange(n_slots)
    hour = (slot * 0.25) % 24.0
    valid_day = np.minimum(slot // STEPS_PER_DAY, n_valid_days - 1)

    phi = config.ar1_coefficient
    innov = rng.standard_normal((n_st, n_valid_days)) * config.anomaly_sd * math.sqrt(1 - phi * phi)
    anomaly = np.empty((n_st, n_valid_days))
    anomaly[:, 0] = rng.standard_normal(n_st) * config.anomaly_sd
    for d in range(1, n_valid_days):
        anomaly[:, d] = phi * anomaly[:, d - 1] + innov[:, d]

    angle = 2 * np.pi * hour[None, :] / 24.0 + phase[:, None]
    truth = np.maximum(
        0.0,
        base[:, None] + config.diurnal_amplitude * np.sin(angle) + anomaly[:, valid_day],
    )
    err_sd = config.obs_noise_sd + config.ensemble_spread_sd * 0.5 * (1.0 + np.cos(angle))
    obs_slot = np.maximum(0.0, truth + err_sd * rng.standard_normal(truth.shape))

    leads = np.arange(1, N_LEADS + 1)
    day = np.arange(n_days)
    # slot index of every (day, lead) valid time
    q = day[:, None] * STEPS_PER_DAY + leads[None, :]
    noise = rng.standard_normal((n_st, n_days, N_LEADS, N_MEMBERS))
    member_sd = config.spread_deficiency_factor * err_sd[:, q]
    members = np.maximum(
        0.0, truth[:, q][..., None] + config.ensemble_bias + member_sd[..., None] * noise
    )
    obs = obs_slot[:, q]

    # 0.1 mm/s resolution keeps the CSV text representation exact
    members = np.round(members, 4)
    obs = np.round(obs, 4)

    start = np.datetime64(config.start_date, "D")
    st_names = np.array([_station_name(s) for s in range(n_st)])
    # rows ordered by (date, station, lead)
    dd, ss, ll = np.meshgrid(day, np.arange(n_st), leads - 1, indexing="ij")
    return Dataset(
        st_names[ss.ravel()],
        start + dd.ravel().astype("timedelta64[D]"),
        ll.ravel() + 1,
        obs[ss.ravel(), dd.ravel(), ll.ravel()],
        members[ss.ravel(), dd.ravel(), ll.ravel()],
    )


# ---------------------------------------------------------------------------
# designed single-lead scenarios


@dataclass(frozen=True)
class Scenario:
    """Cases with known generating law; ``truth`` is the law of ``obs``."""

    members: np.ndarray     # (n, 11)
    obs: np.ndarray         # (n,)
    truth: object           # TruncNormal with per-case parameters

    def stats(self):
        return ensemble_stats(self.members)

    def split(self, n_train):
        from .dists import take
        a, b = slice(0, n_train), slice(n_train, None)
        return (Scenario(self.members[a], self.obs[a], take(self.truth, a)),
                Scenario(self.members[b], self.obs[b], take(self.truth, b)))


def _scenario_members(rng, n):
    centre = rng.uniform(2.0, 14.0, n)
    spread = rng.uniform(0.3, 1.8, n)
    members = centre[:, None] + spread[:, None] * rng.standard_normal((n, N_MEMBERS))
    return np.maximum(members, 0.0)


def _sample_tn(rng, d):
    from .dists import quantile
    u = rng.uniform(1e-12, 1.0 - 1e-12, np.shape(d.loc))
    return quantile(d, u)


def linear_truth_scenario(n_cases, seed=0, coefficients=(0.5, 0.5, 0.8, 0.6, 0.9)):
    """Observations drawn from the truncated-normal EMOS link itself.

    ``coefficients`` are (a0, a_ctrl, a_ens, b0, b1): location
    a0 + a_ctrl^2 f_ctrl + a_ens^2 mean_ens, scale sqrt(b0^2 + b1^2 MD).
    """
    from .dists import TruncNormal
    rng = np.random.default_rng(seed)
    members = _scenario_members(rng, int(n_cases))
    s = ensemble_stats(members)
    a0, ac, ae, b0, b1 = coefficients
    loc = a0 + ac * ac * s.f_ctrl + ae * ae * s.mean_ens
    scale = np.sqrt(b0 * b0 + b1 * b1 * s.md)
    truth = TruncNormal(np.maximum(loc, 1e-4), scale)
    return Scenario(members, _sample_tn(rng, truth), truth)


def nonlinear_scale_scenario(n_cases, seed=0):
    """Observations whose truncated-normal scale is a nonlinear function of
    the ensemble standard deviation and the control forecast.

    The scale grows quadratically with the spread and has a bump around a
    control forecast of 8 m/s, which no affine map of the mean difference
    can follow.
    """
    from .dists import TruncNormal
    rng = np.random.default_rng(seed)
    members = _scenario_members(rng, int(n_cases))
    s = ensemble_stats(members)
    loc = 0.3 * s.f_ctrl + 0.7 * s.mean_ens
    scale = 0.3 + 0.5 * s.s2 + 3.0 * np.exp(-(((s.f_ctrl - 8.0) / 2.0) ** 2))
    truth = TruncNormal(np.maximum(loc, 1e-4), scale)
    return Scenario(members, _sample_tn(rng, truth), truth)

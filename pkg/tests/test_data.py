import datetime as dt

import numpy as np
import pytest

from windcal import data, scoring
from windcal.data import Dataset, ForecastCase, SyntheticConfig
from windcal.errors import (
    InsufficientDataError,
    IntegrityError,
    InvalidArgumentError,
    ParseError,
    SchemaError,
)


def full_dataset(n_stations=3, n_days=60):
    return data.synthetic_generate(SyntheticConfig(n_stations=n_stations, n_days=n_days, seed=5))


# --- ensemble statistics -----------------------------------------------------


def test_stats_constant_ensemble():
    s = data.ensemble_stats(np.full(11, 4.5))
    assert (s.mean_all, s.s2, s.md) == (4.5, 0.0, 0.0)


def test_stats_one_to_eleven():
    s = data.ensemble_stats(np.arange(1.0, 12.0))
    assert s.f_ctrl == 1.0
    assert s.mean_ens == 6.5
    assert s.mean_all == 6.0
    assert abs(s.s2 - 11.0) <= 1e-12
    assert abs(s.md - 440 / 121) <= 1e-12


def test_stats_single_nonzero_member():
    s = data.ensemble_stats([0.0] * 10 + [11.0])
    assert s.mean_all == pytest.approx(1.0)
    assert s.s2 == pytest.approx(11.0)
    assert s.md == pytest.approx(220 / 121)


def test_stats_md_matches_double_sum(rng):
    f = rng.uniform(0, 15, (40, 11))
    s = data.ensemble_stats(f)
    ref = np.abs(f[:, :, None] - f[:, None, :]).sum(axis=(1, 2)) / 121
    assert np.allclose(s.md, ref, rtol=0, atol=1e-12)
    assert np.allclose(s.s2, f.var(axis=1, ddof=1), atol=1e-12)


def test_stats_from_case_and_wrong_width():
    case = ForecastCase("a", dt.date(2020, 1, 1), 3, tuple(range(1, 12)), 2.0)
    assert data.ensemble_stats(case).s2 == pytest.approx(11.0)
    with pytest.raises(InvalidArgumentError):
        data.ensemble_stats(np.ones(10))


def test_forecast_case_validation():
    with pytest.raises(InvalidArgumentError):
        ForecastCase("a", dt.date(2020, 1, 1), 0, (1.0,) * 11)
    with pytest.raises(InvalidArgumentError):
        ForecastCase("a", dt.date(2020, 1, 1), 1, (1.0,) * 10)
    with pytest.raises(InvalidArgumentError):
        ForecastCase("a", dt.date(2020, 1, 1), 1, (-1.0,) + (1.0,) * 10)
    assert ForecastCase("a", dt.date(2020, 1, 1), 1, (1.0,) * 11, float("nan")).observation is None


# --- CSV ---------------------------------------------------------------------


def _write_rows(path, header, rows):
    path.write_text("\n".join([",".join(header)] + [",".join(map(str, r)) for r in rows]) + "\n")


def test_load_single_row(tmp_path):
    p = tmp_path / "one.csv"
    _write_rows(p, data.HEADER, [["st01", "2020-05-07", 1, "3.5"] + ["4.0"] * 11])
    ds = data.load_csv(p)
    assert len(ds) == 1
    case = ds.case(0)
    assert case.observation == 3.5 and case.members == (4.0,) * 11


def test_missing_observation_is_nan(tmp_path):
    p = tmp_path / "miss.csv"
    _write_rows(p, data.HEADER, [["st01", "2020-05-07", 1, ""] + ["4.0"] * 11])
    ds = data.load_csv(p)
    assert np.isnan(ds.obs[0]) and ds.case(0).observation is None


def test_ten_member_columns_is_schema_error(tmp_path):
    p = tmp_path / "ten.csv"
    _write_rows(p, data.HEADER[:-1], [["st01", "2020-05-07", 1, "3.5"] + ["4.0"] * 10])
    with pytest.raises(SchemaError):
        data.load_csv(p)


@pytest.mark.parametrize("row, err", [
    (["st01", "2020-05-07", 1, "abc"] + ["4.0"] * 11, ParseError),
    (["st01", "2020-13-07", 1, "1"] + ["4.0"] * 11, ParseError),
    (["st01", "2020-05-07", 193, "1"] + ["4.0"] * 11, IntegrityError),
    (["st01", "2020-05-07", 1, "-1"] + ["4.0"] * 11, IntegrityError),
    (["st01", "2020-05-07", 1, "1"] + ["nan"] + ["4.0"] * 10, ParseError),
    (["st01", "2020-05-07", 1, "1"] + ["4.0"] * 10, ParseError),
])
def test_bad_rows(tmp_path, row, err):
    p = tmp_path / "bad.csv"
    _write_rows(p, data.HEADER, [row])
    with pytest.raises(err):
        data.load_csv(p)


def test_duplicate_key(tmp_path):
    p = tmp_path / "dup.csv"
    row = ["st01", "2020-05-07", 1, "1"] + ["4.0"] * 11
    _write_rows(p, data.HEADER, [row, row])
    with pytest.raises(IntegrityError):
        data.load_csv(p)


def test_empty_file_is_schema_error(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("")
    with pytest.raises(SchemaError):
        data.load_csv(p)


def test_csv_round_trip_bit_exact(tmp_path, small_dataset):
    p = tmp_path / "rt.csv"
    data.write_csv(small_dataset, p)
    back = data.load_csv(p)
    assert back.equals(small_dataset)
    q = tmp_path / "rt2.csv"
    data.write_csv(back, q)
    assert p.read_bytes() == q.read_bytes()


def test_csv_round_trip_arbitrary_values(tmp_path, rng):
    members = rng.uniform(0, 30, (5, 11))
    obs = np.array([1.234567891, np.nan, 0.0, 17.5, 3e-5])
    ds = Dataset(["a"] * 5, np.datetime64("2021-01-01") + np.arange(5), [1] * 5, obs, members)
    p = tmp_path / "x.csv"
    data.write_csv(ds, p)
    back = data.load_csv(p)
    # nine significant digits of text
    assert np.allclose(back.members, members, rtol=1e-8, atol=0)
    assert np.array_equal(np.isnan(back.obs), np.isnan(obs))


# --- rolling windows ---------------------------------------------------------


def test_rolling_window_regional_count():
    ds = full_dataset()
    target = ds.dates.min() + np.timedelta64(51, "D")
    ts = data.rolling_window(ds, target, 10, 51, scope="regional")
    assert len(ts) == 153
    assert ts.init_date.max() < target


def test_rolling_window_local_one_day():
    ds = full_dataset()
    target = ds.dates.min() + np.timedelta64(5, "D")
    ts = data.rolling_window(ds, target, 1, 1, scope="local", station="st02")
    assert len(ts) == 1
    assert ts.station.tolist() == ["st02"]
    assert ts.init_date[0] == target - np.timedelta64(1, "D")


def test_rolling_window_errors():
    ds = full_dataset(n_days=5)
    with pytest.raises(InsufficientDataError):
        data.rolling_window(ds, ds.dates.min(), 1, 10)
    with pytest.raises(InvalidArgumentError):
        data.rolling_window(ds, ds.dates.max(), 1, 0)
    with pytest.raises(InvalidArgumentError):
        data.rolling_window(ds, ds.dates.max(), 1, 3, scope="local")


def test_cube_matches_rows(small_dataset):
    cube = small_dataset.cube()
    r = 777
    s = cube.stations.index(str(small_dataset.station[r]))
    d = cube.day_index(small_dataset.init_date[r])
    li = int(small_dataset.lead[r]) - 1
    assert cube.row[s, d, li] == r
    assert np.array_equal(cube.members[s, d, li], small_dataset.members[r])


# --- synthetic generator -----------------------------------------------------


def test_generator_shape_and_determinism():
    cfg = SyntheticConfig(n_stations=2, n_days=4, seed=3)
    a, b = data.synthetic_generate(cfg), data.synthetic_generate(cfg)
    assert len(a) == 2 * 4 * 192
    assert a.equals(b)
    c = data.synthetic_generate(SyntheticConfig(n_stations=2, n_days=4, seed=4))
    assert not a.equals(c)


def test_generator_noiseless_limit():
    cfg = SyntheticConfig(n_stations=2, n_days=5, obs_noise_sd=0.0, ensemble_spread_sd=0.0,
                          ensemble_bias=0.0, seed=1)
    ds = data.synthetic_generate(cfg)
    assert np.max(np.abs(ds.members - ds.obs[:, None])) <= 1e-4


def test_generator_raw_ensemble_underdispersed():
    ds = data.synthetic_generate(SyntheticConfig(n_days=40, seed=2))
    lo, hi = scoring.ensemble_interval(ds.members)
    cov = scoring.coverage(lo, hi, ds.obs)
    assert 0.5 <= cov <= 0.7
    counts = scoring.rank_histogram(scoring.verification_ranks(ds.members, ds.obs, np.arange(len(ds))))
    assert min(counts[0], counts[-1]) > counts[1:-1].max()


@pytest.mark.parametrize("kw", [{"n_days": 0}, {"n_stations": 0}, {"obs_noise_sd": -1.0},
                                {"spread_deficiency_factor": 0.0}, {"ar1_coefficient": 1.0}])
def test_generator_config_validation(kw):
    with pytest.raises(InvalidArgumentError):
        SyntheticConfig(**kw)


def test_scenarios_are_deterministic():
    a = data.nonlinear_scale_scenario(200, seed=3)
    b = data.nonlinear_scale_scenario(200, seed=3)
    assert np.array_equal(a.obs, b.obs) and np.array_equal(a.members, b.members)
    train, test = a.split(150)
    assert train.obs.size == 150 and test.obs.size == 50
    assert np.all(a.obs >= 0)

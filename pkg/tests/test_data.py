"""Tests for datasets, CSV I/O, standardization, splits, and the
synthetic well generator."""

import math

import numpy as np
import pytest
from scipy import stats as sps

from bayesvfm.data import (CSV_HEADER, StandardizationStats, SyntheticWellConfig,
                           WellDataset, destandardize_y, drifting_config,
                           generate_synthetic_well, mpfm_config, read_csv,
                           split_future, split_historical, standardize,
                           separator_config, true_flow_rate,
                           validation_split, write_csv)
from bayesvfm.errors import ConfigurationError


def daily_dataset(n_days=360, start="2021-01-01T00:00:00"):
    """Evenly sampled synthetic-ish data, one record per day."""
    rng = np.random.default_rng(0)
    timestamps = np.datetime64(start, "s") + np.arange(n_days) * np.timedelta64(86400, "s")
    u = 0.3 + 0.2 * rng.random(n_days)
    p1 = 100 + rng.random(n_days)
    p2 = 30 + rng.random(n_days)
    t1 = 350 + rng.random(n_days)
    t2 = 345 + rng.random(n_days)
    eta_oil = 0.6 + 0.05 * rng.random(n_days)
    eta_gas = 0.1 + 0.05 * rng.random(n_days)
    features = np.column_stack([u, p1, p2, t1, t2, eta_oil, eta_gas])
    y = 10 + rng.random(n_days)
    meter = np.array(["MPFM"] * n_days, dtype=object)
    return WellDataset(timestamps, features, y, meter)


class TestWellDataset:
    def test_validation_catches_bad_records(self):
        ds = daily_dataset(10)
        with pytest.raises(ValueError):
            WellDataset(ds.timestamps[::-1], ds.features, ds.y, ds.meter)
        bad_y = ds.y.copy()
        bad_y[3] = 0.0
        with pytest.raises(ValueError):
            WellDataset(ds.timestamps, ds.features, bad_y, ds.meter)
        bad_feat = ds.features.copy()
        bad_feat[2, 0] = 1.4
        with pytest.raises(ValueError):
            WellDataset(ds.timestamps, bad_feat, ds.y, ds.meter)
        bad_feat = ds.features.copy()
        bad_feat[2, 2] = bad_feat[2, 1] + 1.0  # p2 > p1
        with pytest.raises(ValueError):
            WellDataset(ds.timestamps, bad_feat, ds.y, ds.meter)

    def test_meter_type_requires_uniformity(self):
        ds = daily_dataset(5)
        assert ds.meter_type == "MPFM"
        mixed = ds.meter.copy()
        mixed[0] = "TestSeparator"
        ds2 = WellDataset(ds.timestamps, ds.features, ds.y, mixed)
        with pytest.raises(ValueError):
            _ = ds2.meter_type


class TestCsvRoundTrip:
    def test_write_read_is_exact(self, tmp_path):
        ds = daily_dataset(50)
        path = tmp_path / "well.csv"
        write_csv(ds, path)
        back = read_csv(path)
        assert np.array_equal(ds.timestamps, back.timestamps)
        assert np.array_equal(ds.features, back.features)  # bit-exact floats
        assert np.array_equal(ds.y, back.y)
        assert list(ds.meter) == list(back.meter)

    def test_header_is_canonical(self, tmp_path):
        ds = daily_dataset(3)
        path = tmp_path / "well.csv"
        write_csv(ds, path)
        first = path.read_text().splitlines()[0]
        assert first == ",".join(CSV_HEADER)
        assert "timestamp,u,p1,p2,T1,T2,eta_oil,eta_gas,y,meter" == first

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ConfigurationError):
            read_csv(path)


class TestStandardization:
    def test_round_trip_exact(self):
        ds = daily_dataset(100)
        stats = StandardizationStats.from_dataset(ds)
        x_std, y_std = standardize(ds, stats)
        y_back = destandardize_y(y_std, stats)
        np.testing.assert_allclose(y_back, ds.y, rtol=1e-12, atol=1e-12)

    def test_training_features_have_unit_moments(self):
        ds = daily_dataset(500)
        stats = StandardizationStats.from_dataset(ds)
        x_std, y_std = standardize(ds, stats)
        np.testing.assert_allclose(x_std.mean(axis=0), 0.0, atol=1e-9)
        np.testing.assert_allclose(x_std.std(axis=0), 1.0, atol=1e-9)
        assert abs(y_std.mean()) < 1e-9
        assert abs(y_std.std() - 1.0) < 1e-9

    def test_constant_feature_rejected_by_name(self):
        ds = daily_dataset(20)
        feats = ds.features.copy()
        feats[:, 3] = 351.0  # T1 constant
        ds2 = WellDataset(ds.timestamps, feats, ds.y, ds.meter)
        with pytest.raises(ConfigurationError, match="T1"):
            StandardizationStats.from_dataset(ds2)


class TestChronologicalSplits:
    def test_historical_takes_middle_window(self):
        ds = daily_dataset(360)
        train, test = split_historical(ds, window_days=90.0)
        # span 359 days, midpoint day 179.5, window [134.5, 224.5)
        assert len(test) == 90
        assert test.timestamps[0] == ds.timestamps[135]
        assert test.timestamps[-1] == ds.timestamps[224]
        assert len(train) + len(test) == len(ds)

    def test_future_takes_last_window(self):
        ds = daily_dataset(360)
        train, test = split_future(ds, window_days=90.0)
        assert len(test) == 90
        assert test.timestamps[-1] == ds.timestamps[-1]
        assert train.timestamps[-1] < test.timestamps[0]

    def test_partition_is_disjoint_and_complete(self):
        ds = daily_dataset(400)
        for splitter in (split_historical, split_future):
            train, test = splitter(ds, window_days=90.0)
            merged = np.concatenate([train.timestamps, test.timestamps])
            assert len(merged) == len(ds)
            assert len(np.unique(merged.astype("int64"))) == len(ds)
            # order preserved within each part
            assert np.all(np.diff(train.timestamps.astype("int64")) > 0)
            assert np.all(np.diff(test.timestamps.astype("int64")) > 0)

    def test_window_larger_than_span_rejected(self):
        ds = daily_dataset(200)
        with pytest.raises(ConfigurationError):
            split_historical(ds, window_days=90.0)  # needs > 270 days
        with pytest.raises(ConfigurationError):
            split_future(ds, window_days=90.0)


class TestValidationSplit:
    def test_fraction_of_100_gives_20(self):
        ds = daily_dataset(100)
        fit, val = validation_split(ds, fraction=0.2, seed=5)
        assert len(val) == 20
        assert len(fit) == 80

    def test_same_seed_same_split(self):
        ds = daily_dataset(60)
        _, val1 = validation_split(ds, 0.25, seed=11)
        _, val2 = validation_split(ds, 0.25, seed=11)
        assert np.array_equal(val1.timestamps, val2.timestamps)

    def test_disjoint_union_equals_input(self):
        ds = daily_dataset(73)
        fit, val = validation_split(ds, 0.2, seed=2)
        merged = np.sort(np.concatenate([fit.timestamps, val.timestamps]).astype("int64"))
        assert np.array_equal(merged, ds.timestamps.astype("int64"))

    def test_degenerate_fraction_rejected(self):
        ds = daily_dataset(4)
        with pytest.raises(ConfigurationError):
            validation_split(ds, 0.01, seed=0)


class TestSyntheticWell:
    def test_noiseless_measurements_equal_truth(self):
        cfg = mpfm_config(er=0.0, n_records=500)
        ds = generate_synthetic_well(cfg, seed=1)
        z = true_flow_rate(ds.features[:, 0], ds.features[:, 1], ds.features[:, 2],
                           ds.features[:, 5], ds.features[:, 6], cfg)
        np.testing.assert_array_equal(ds.y, z)

    def test_stationary_constant_choke_gives_constant_rate(self):
        cfg = mpfm_config(er=0.0, n_records=200, u_setpoint_every=0,
                          feature_wiggle=0.0, p1_drift_per_day=0.0)
        ds = generate_synthetic_well(cfg, seed=0)
        assert np.ptp(ds.y) == 0.0
        assert np.ptp(ds.features[:, 0]) == 0.0

    def test_measured_relative_error_matches_er(self):
        # folded-normal identity at the generator level
        cfg = mpfm_config(er=0.1, n_records=100_000, u_setpoint_every=0)
        ds = generate_synthetic_well(cfg, seed=3)
        z = true_flow_rate(ds.features[:, 0], ds.features[:, 1], ds.features[:, 2],
                           ds.features[:, 5], ds.features[:, 6], cfg)
        rel = np.abs(ds.y - z) / z
        assert rel.mean() == pytest.approx(0.1, rel=0.01)

    def test_noise_is_gaussian(self):
        cfg = mpfm_config(er=0.1, n_records=100_000, u_setpoint_every=0)
        ds = generate_synthetic_well(cfg, seed=4)
        z = true_flow_rate(ds.features[:, 0], ds.features[:, 1], ds.features[:, 2],
                           ds.features[:, 5], ds.features[:, 6], cfg)
        resid = (ds.y - z) / (math.sqrt(math.pi / 2) * 0.1 * z)
        assert abs(sps.skew(resid)) < 0.05
        assert abs(sps.kurtosis(resid)) < 0.1

    def test_determinism(self):
        cfg = drifting_config(mpfm_config(n_records=400))
        a = generate_synthetic_well(cfg, seed=9)
        b = generate_synthetic_well(cfg, seed=9)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.y, b.y)
        c = generate_synthetic_well(cfg, seed=10)
        assert not np.array_equal(a.y, c.y)

    def test_drift_opens_choke_stepwise(self):
        cfg = drifting_config(mpfm_config(n_records=1500), p1_drift_per_day=0.08)
        ds = generate_synthetic_well(cfg, seed=2)
        u = ds.features[:, 0]
        assert u[-1] > u[0]
        assert np.all(np.diff(u) >= 0)          # only opens
        p1 = ds.features[:, 1]
        assert p1[-1] < p1[0]

    def test_pressure_crossing_truncates_with_warning(self):
        cfg = drifting_config(mpfm_config(n_records=3000), p1_drift_per_day=1.0)
        with pytest.warns(UserWarning, match="truncating"):
            ds = generate_synthetic_well(cfg, seed=0)
        assert len(ds) < 3000
        assert np.all(ds.features[:, 1] > ds.features[:, 2])

    def test_meter_presets(self):
        mp = mpfm_config()
        ts = separator_config()
        assert mp.er == 0.10 and mp.meter == "MPFM"
        assert ts.er == 0.025 and ts.meter == "TestSeparator"
        assert ts.cadence_hours > mp.cadence_hours

    def test_config_validation(self):
        with pytest.raises(ConfigurationError):
            SyntheticWellConfig(choke_coefficient=-1.0)
        with pytest.raises(ConfigurationError):
            SyntheticWellConfig(er=-0.1)
        with pytest.raises(ConfigurationError):
            SyntheticWellConfig(meter="bogus")

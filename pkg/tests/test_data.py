"""Generators, CSV schema, rescaling and splitting."""

import numpy as np
import pytest

from qrewind.data import (
    Dataset,
    SpikeParams,
    TimeSeries,
    gen_blobs,
    gen_gaussian,
    gen_noisy_sinusoids,
    gen_sine_added,
    gen_sinusoid_tests,
    gen_spikes,
    load_csv,
    minmax_rescale,
    save_csv,
    split,
)
from qrewind.errors import DataError


class TestGaussian:
    def test_zero_noise(self):
        ds = gen_gaussian(m=3, p=5, noise_std=0.0, seed=1)
        assert all(np.all(s.values == 0.0) for s in ds.series)

    def test_default_shape(self):
        ds = gen_gaussian(seed=0)
        assert (ds.m, ds.p, ds.d) == (50, 50, 1)
        assert all(s.label == "normal" for s in ds.series)

    def test_clt_mean(self):
        ds = gen_gaussian(m=50, p=50, noise_std=0.3, seed=2)
        grand_mean = ds.values_array().mean()
        assert abs(grand_mean) < 3 * 0.3 / np.sqrt(50 * 50)

    def test_seed_determinism(self):
        a = gen_gaussian(m=4, p=6, noise_std=0.2, seed=9)
        b = gen_gaussian(m=4, p=6, noise_std=0.2, seed=9)
        np.testing.assert_array_equal(a.values_array(), b.values_array())


class TestSpikes:
    def test_zero_rate_matches_gaussian(self):
        base = gen_gaussian(m=5, p=30, noise_std=0.1, seed=4)
        spiked = gen_spikes(m=5, p=30, noise_std=0.1, spike_params=SpikeParams(rate=0.0), seed=4)
        np.testing.assert_array_equal(base.values_array(), spiked.values_array())

    def test_expected_spiked_point_count(self):
        # unit duration, fixed amplitude: spiked points = Bernoulli(rate) starts
        m, p, rate = 400, 50, 0.1
        params = SpikeParams(
            rate=rate, duration=(1, 1), amplitude=(5.0, 5.0), rate_spread=0.0, min_spikes=0
        )
        base = gen_gaussian(m=m, p=p, noise_std=0.1, seed=6)
        spiked = gen_spikes(m=m, p=p, noise_std=0.1, spike_params=params, seed=6)
        count = int(np.sum(base.values_array() != spiked.values_array()))
        mean = rate * p * m
        std = np.sqrt(m * p * rate * (1 - rate))
        assert abs(count - mean) < 4 * std

    def test_labels(self):
        ds = gen_spikes(m=2, p=10, seed=0)
        assert all(s.label == "anomalous" for s in ds.series)

    def test_param_validation(self):
        with pytest.raises(ValueError):
            SpikeParams(rate=1.5)
        with pytest.raises(ValueError):
            SpikeParams(duration=(3, 1))


class TestSineAdded:
    def test_zero_noise_pure_sinusoid(self):
        ds = gen_sine_added(m=2, p=20, noise_std=0.0, seed=3)
        np.testing.assert_allclose(ds.series[0].values[:, 0], np.sin(np.arange(20.0)))

    def test_pairs_with_gaussian_plus_sinusoid(self):
        base = gen_gaussian(m=4, p=25, noise_std=0.2, seed=8)
        sine = gen_sine_added(m=4, p=25, noise_std=0.2, seed=8)
        expected = base.values_array() + np.sin(np.arange(25.0))[None, :, None]
        np.testing.assert_array_equal(sine.values_array(), expected)

    def test_tail_bound(self):
        noise_std = 0.1
        ds = gen_sine_added(m=50, p=50, noise_std=noise_std, seed=5)
        frac = np.mean(np.abs(ds.values_array()) <= 1.0 + 5 * noise_std)
        assert frac >= 0.99


class TestSinusoids:
    def test_grid(self):
        ds = gen_noisy_sinusoids(m=10, seed=0)
        assert ds.p == 51
        np.testing.assert_allclose(ds.series[0].times[[0, -1]], [0.0, 2 * np.pi])

    def test_zero_offset_std_identical_series(self):
        ds = gen_noisy_sinusoids(m=5, seed=1, offset_std=0.0)
        vals = ds.values_array()
        assert np.all(vals == vals[0])

    def test_r_offsets_moment(self):
        ds = gen_sinusoid_tests("R", seed=2)
        offsets = ds.values_array()[:, 0, 0] - np.sin(0.0)
        assert abs(offsets.mean() - 0.1) < 3 * 0.1 / np.sqrt(50)

    def test_w_is_r_with_cosine(self):
        r = gen_sinusoid_tests("R", seed=7)
        w = gen_sinusoid_tests("W", seed=7)
        times = r.series[0].times
        shift = w.values_array() - r.values_array()
        np.testing.assert_allclose(
            shift, np.tile((np.cos(times) - np.sin(times))[None, :, None], (50, 1, 1)), atol=1e-12
        )

    def test_z_wider_offsets(self):
        z = gen_sinusoid_tests("Z", seed=3)
        offsets = z.values_array()[:, 0, 0]
        assert offsets.std() > 0.25

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            gen_sinusoid_tests("Q", seed=0)


class TestBlobs:
    def test_zero_std_all_at_center(self):
        ds = gen_blobs(count=5, std=0.0, center=(1.0, 2.0), seed=0)
        np.testing.assert_array_equal(ds.values_array(), np.tile([1.0, 2.0], (5, 1, 1)))

    def test_default_config(self):
        ds = gen_blobs(seed=1)
        assert (ds.m, ds.p, ds.d) == (100, 1, 2)
        assert ds.series[0].times[0] == 1.0

    def test_sample_covariance(self):
        ds = gen_blobs(count=4000, seed=2)
        pts = ds.values_array()[:, 0, :]
        cov = np.cov(pts.T)
        target = (np.pi / 4) ** 2
        assert abs(cov[0, 0] - target) / target < 0.2
        assert abs(cov[1, 1] - target) / target < 0.2
        assert abs(cov[0, 1]) < 0.2 * target


class TestCsv:
    def test_round_trip_bit_identical(self, tmp_path, rng):
        series = [
            TimeSeries(id="a", times=[0.0, 1.0], values=rng.standard_normal((2, 1)), label="normal"),
            TimeSeries(id="b", times=[0.0, 1.0], values=rng.standard_normal((2, 1)), label=None),
        ]
        ds = Dataset(series, name="mini")
        path = tmp_path / "mini.csv"
        save_csv(ds, path)
        back = load_csv(path)
        for s1, s2 in zip(ds.series, back.series):
            assert s1.id == s2.id and s1.label == s2.label
            np.testing.assert_array_equal(s1.times, s2.times)
            np.testing.assert_array_equal(s1.values, s2.values)
        # a second save produces byte-identical output
        path2 = tmp_path / "mini2.csv"
        save_csv(back, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_round_trip_multivariate_with_values(self, tmp_path, rng):
        series = [
            TimeSeries(
                id=f"s{i}",
                times=np.arange(3.0),
                values=rng.standard_normal((3, 2)),
                label="anomalous",
                value_usd=float(1000 + i),
            )
            for i in range(3)
        ]
        path = tmp_path / "m.csv"
        save_csv(Dataset(series, name="m"), path)
        back = load_csv(path)
        assert back.d == 2
        assert [s.value_usd for s in back.series] == [1000.0, 1001.0, 1002.0]

    def test_missing_column_named(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("series_id,t\n")
        with pytest.raises(DataError, match="f1"):
            load_csv(path)

    def test_unexpected_column_named(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("series_id,t,f1,banana\na,0,1.0,x\n")
        with pytest.raises(DataError, match="banana"):
            load_csv(path)

    def test_parse_failure_reports_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("series_id,t,f1\na,0.0,1.0\na,oops,2.0\n")
        with pytest.raises(DataError, match=":3"):
            load_csv(path)

    def test_duplicate_time_reports_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("series_id,t,f1\na,1.0,0.5\na,1.0,0.7\n")
        with pytest.raises(DataError, match="non-increasing"):
            load_csv(path)

    def test_ragged_series_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("series_id,t,f1\na,0.0,0.5\na,1.0,0.7\nb,0.0,0.1\n")
        with pytest.raises(DataError):
            load_csv(path)

    def test_unsorted_rows_are_sorted(self, tmp_path):
        path = tmp_path / "ok.csv"
        path.write_text("series_id,t,f1\na,2.0,0.2\na,0.0,0.0\na,1.0,0.1\n")
        ds = load_csv(path)
        np.testing.assert_array_equal(ds.series[0].times, [0.0, 1.0, 2.0])
        np.testing.assert_array_equal(ds.series[0].values[:, 0], [0.0, 0.1, 0.2])

    def test_crlf_tolerated(self, tmp_path):
        path = tmp_path / "crlf.csv"
        path.write_bytes(b"series_id,t,f1\r\na,0.0,0.5\r\na,1.0,0.25\r\n")
        ds = load_csv(path)
        np.testing.assert_array_equal(ds.series[0].values[:, 0], [0.5, 0.25])

    def test_empty_body(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("series_id,t,f1\n")
        with pytest.raises(DataError):
            load_csv(path)
        assert load_csv(path, allow_empty=True) is None


class TestDefaultShapes:
    def test_paper_counts(self):
        assert (gen_noisy_sinusoids(seed=0).m, gen_noisy_sinusoids(seed=0).p) == (100, 51)
        assert gen_sinusoid_tests("R", seed=0).m == 50
        assert gen_blobs(seed=0).m == 100
        ds = gen_spikes(seed=0)
        assert (ds.m, ds.p, ds.d) == (50, 50, 1)

    def test_market_window_shape_loads(self, tmp_path, rng):
        # 3-hour window at 1-minute cadence: 180 points, two features
        times = -1.0 + np.arange(180) / 60.0
        series = [
            TimeSeries(id=f"w{i}", times=times, values=rng.standard_normal((180, 2)))
            for i in range(4)
        ]
        path = tmp_path / "windows.csv"
        save_csv(Dataset(series, name="w"), path)
        back = load_csv(path)
        assert (back.m, back.p, back.d) == (4, 180, 2)


class TestRescale:
    def test_endpoints(self):
        series = [
            TimeSeries(id="a", times=[0.0], values=[[0.0]]),
            TimeSeries(id="b", times=[0.0], values=[[1.0]]),
        ]
        out = minmax_rescale(Dataset(series, name="x"))
        assert out.series[0].values[0, 0] == -np.pi
        assert out.series[1].values[0, 0] == np.pi
        assert out.rescaled

    def test_midpoint(self):
        series = [
            TimeSeries(id="a", times=[0.0], values=[[0.0]]),
            TimeSeries(id="b", times=[0.0], values=[[0.5]]),
            TimeSeries(id="c", times=[0.0], values=[[1.0]]),
        ]
        out = minmax_rescale(Dataset(series, name="x"))
        assert out.series[1].values[0, 0] == 0.0

    def test_idempotent_to_rounding(self, rng):
        series = [
            TimeSeries(id=f"s{i}", times=np.arange(12.0), values=rng.normal(0, 2, (12, 2)))
            for i in range(20)
        ]
        once = minmax_rescale(Dataset(series, name="x"))
        twice = minmax_rescale(once)
        for a, b in zip(once.series, twice.series):
            np.testing.assert_allclose(b.values, a.values, atol=1e-14)
        # endpoints are reproduced exactly
        assert max(s.values.max() for s in twice.series) == np.pi
        assert min(s.values.min() for s in twice.series) == -np.pi

    def test_degenerate_slot_warns_and_zeroes(self):
        series = [
            TimeSeries(id="a", times=[0.0, 1.0], values=[[1.0], [0.0]]),
            TimeSeries(id="b", times=[0.0, 1.0], values=[[1.0], [3.0]]),
        ]
        with pytest.warns(UserWarning, match="constant"):
            out = minmax_rescale(Dataset(series, name="x"))
        assert out.series[0].values[0, 0] == 0.0
        assert out.series[1].values[0, 0] == 0.0

    def test_needs_two_series(self):
        ds = Dataset([TimeSeries(id="a", times=[0.0], values=[[1.0]])], name="x")
        with pytest.raises(DataError):
            minmax_rescale(ds)


class TestSplit:
    def test_all_in_train(self):
        ds = gen_gaussian(m=7, p=4, seed=0)
        tr, va, te = split(ds, (1, 0, 0), seed=1)
        assert tr.m == 7 and va is None and te is None

    def test_partition(self):
        ds = gen_gaussian(m=20, p=4, seed=0)
        parts = split(ds, (0.5, 0.25, 0.25), seed=2)
        ids = [s.id for p in parts for s in p.series]
        assert sorted(ids) == sorted(s.id for s in ds.series)
        assert [p.m for p in parts] == [10, 5, 5]

    def test_determinism(self):
        ds = gen_gaussian(m=10, p=4, seed=0)
        a = split(ds, (0.6, 0.2, 0.2), seed=5)
        b = split(ds, (0.6, 0.2, 0.2), seed=5)
        assert [s.id for s in a[0].series] == [s.id for s in b[0].series]


class TestValidation:
    def test_nonincreasing_times_rejected(self):
        with pytest.raises(DataError):
            TimeSeries(id="a", times=[1.0, 1.0], values=[[0.0], [0.0]])

    def test_nan_rejected(self):
        with pytest.raises(DataError):
            TimeSeries(id="a", times=[0.0, 1.0], values=[[np.nan], [0.0]])

    def test_heterogeneous_shapes_rejected(self):
        a = TimeSeries(id="a", times=[0.0], values=[[0.0]])
        b = TimeSeries(id="b", times=[0.0, 1.0], values=[[0.0], [0.0]])
        with pytest.raises(DataError):
            Dataset([a, b], name="x")

    def test_duplicate_ids_rejected(self):
        a = TimeSeries(id="a", times=[0.0], values=[[0.0]])
        b = TimeSeries(id="a", times=[0.0], values=[[1.0]])
        with pytest.raises(DataError):
            Dataset([a, b], name="x")

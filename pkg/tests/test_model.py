"""Cost stack and anomaly scores: closed forms, dense oracle, determinism."""

import math
from dataclasses import replace

import numpy as np
import pytest

from qrewind.ansatz import EigenbasisCircuit, EmbeddingSpec, zstring_basis
from qrewind.data import Dataset, TimeSeries
from qrewind.model import (
    CostBatch,
    ModelParams,
    TrainedModel,
    anomaly_score,
    cost,
    load_model,
    pack_params,
    penalty,
    point_cost,
    point_costs,
    reference_cost,
    rewound_expectation,
    sample_rates,
    save_model,
    series_cost,
    time_resolved_score,
    unpack_params,
)

from oracles import omega_oracle


def make_params(rng, layers=1, n=2, sigma_scale=0.3):
    basis = zstring_basis(n)
    return ModelParams(
        circuit=EigenbasisCircuit(rng.uniform(0, 2 * np.pi, (layers, n, 3))),
        mu=rng.uniform(-1, 1, basis.size),
        sigma=rng.uniform(0, sigma_scale, basis.size),
        eta0=float(rng.uniform(-1, 1)),
    )


def make_series(rng, p=6, d=1, sid="s0", label=None):
    return TimeSeries(
        id=sid, times=np.arange(p, dtype=float), values=rng.uniform(-np.pi, np.pi, (p, d)), label=label
    )


class TestSampleRates:
    def test_zero_width_is_exact(self, rng):
        params = make_params(rng)
        params = replace(params, sigma=np.zeros_like(params.sigma))
        draws = sample_rates(params, np.random.default_rng(5))
        np.testing.assert_array_equal(draws, params.mu)

    def test_moments(self):
        basis = zstring_basis(2)
        params = ModelParams(
            circuit=EigenbasisCircuit(np.zeros((1, 2, 3))),
            mu=np.zeros(basis.size),
            sigma=np.ones(basis.size),
            eta0=0.0,
        )
        gen = np.random.default_rng(11)
        draws = np.array([sample_rates(params, gen) for _ in range(100_000)])
        assert np.all(np.abs(draws.mean(axis=0)) < 0.02)
        assert np.all(np.abs(draws.std(axis=0) - 1.0) < 0.02)

    def test_seed_determinism(self, rng):
        params = make_params(rng)
        a = sample_rates(params, np.random.default_rng(7))
        b = sample_rates(params, np.random.default_rng(7))
        np.testing.assert_array_equal(a, b)

    def test_negative_width_acts_as_magnitude(self, rng):
        params = make_params(rng)
        flipped = replace(params, sigma=-params.sigma)
        a = sample_rates(params, np.random.default_rng(3))
        b = sample_rates(flipped, np.random.default_rng(3))
        np.testing.assert_array_equal(a, b)


class TestRewoundExpectation:
    def test_time_zero_zero_features(self, rng):
        params = make_params(rng)
        spec = EmbeddingSpec(d=1, n=2)
        basis = zstring_basis(2)
        rates = rng.uniform(-1, 1, basis.size)
        val = rewound_expectation([0.0], 0.0, params, spec, basis, rates)
        assert val == pytest.approx(params.eta0_effective - 1.0, abs=1e-12)

    def test_time_zero_equator(self, rng):
        params = make_params(rng, n=2)
        spec = EmbeddingSpec(d=2, n=2)
        basis = zstring_basis(2)
        rates = rng.uniform(-1, 1, basis.size)
        val = rewound_expectation([np.pi / 2, np.pi / 2], 0.0, params, spec, basis, rates)
        assert val == pytest.approx(params.eta0_effective, abs=1e-12)

    @pytest.mark.parametrize("n,d", [(1, 1), (2, 1), (2, 2), (3, 3)])
    def test_matches_dense_oracle(self, rng, n, d):
        params = make_params(rng, layers=2, n=n)
        spec = EmbeddingSpec(d=d, n=n)
        basis = zstring_basis(n)
        for _ in range(20):
            x = rng.uniform(-np.pi, np.pi, d)
            t = float(rng.uniform(-3, 3))
            rates = rng.uniform(-1, 1, basis.size)
            ours = rewound_expectation(x, t, params, spec, basis, rates)
            ref = omega_oracle(x, t, params.circuit.angles, rates, params.eta0, n)
            assert abs(ours - ref) < 1e-10

    def test_range(self, rng):
        params = make_params(rng)
        spec = EmbeddingSpec(d=1, n=2)
        basis = zstring_basis(2)
        lo, hi = params.eta0_effective - 1.0, params.eta0_effective + 1.0
        for _ in range(50):
            val = rewound_expectation(
                rng.uniform(-np.pi, np.pi, 1),
                rng.uniform(-5, 5),
                params,
                spec,
                basis,
                rng.uniform(-2, 2, basis.size),
            )
            assert lo - 1e-12 <= val <= hi + 1e-12


class TestPointCost:
    def test_deterministic_mode_equals_squared_expectation(self, rng):
        params = replace(make_params(rng), sigma=np.zeros(3))
        spec = EmbeddingSpec(d=1, n=2)
        basis = zstring_basis(2)
        x, t = [0.8], 1.4
        om = rewound_expectation(x, t, params, spec, basis, params.mu)
        for n_draws in (1, 7, 100):
            c1 = point_cost(x, t, params, spec, basis, n_draws, np.random.default_rng(0))
            assert c1 == om**2 / 4.0

    def test_bounds(self, rng):
        spec = EmbeddingSpec(d=1, n=2)
        basis = zstring_basis(2)
        for _ in range(50):
            params = make_params(rng, sigma_scale=1.0)
            c1 = point_cost(
                rng.uniform(-np.pi, np.pi, 1),
                rng.uniform(-3, 3),
                params,
                spec,
                basis,
                3,
                rng,
            )
            assert 0.0 <= c1 <= 1.0

    def test_small_draw_estimate_brackets_reference(self, rng):
        # n_draws=10 estimates stay within 3 sample-std of a high-draw oracle
        params = make_params(rng, sigma_scale=0.5)
        spec = EmbeddingSpec(d=1, n=2)
        basis = zstring_basis(2)
        x, t = [0.5], 2.0
        ref = point_cost(x, t, params, spec, basis, 100_000, np.random.default_rng(1))
        estimates = np.array(
            [point_cost(x, t, params, spec, basis, 10, np.random.default_rng(k)) for k in range(60)]
        )
        spread = estimates.std()
        assert abs(estimates.mean() - ref) < 3 * spread / math.sqrt(60) + 1e-4

    def test_draw_count_validation(self, rng):
        params = make_params(rng)
        with pytest.raises(ValueError):
            point_cost([0.1], 1.0, params, EmbeddingSpec(1, 2), zstring_basis(2), 0, rng)

    def test_std_scales_with_draw_count(self, rng):
        # Monte-Carlo error ~ 1/sqrt(n_draws) within a factor of 2
        params = make_params(rng, sigma_scale=0.5)
        spec = EmbeddingSpec(d=1, n=2)
        basis = zstring_basis(2)
        x, t = [1.1], 1.5
        stds = {}
        for n_draws in (1, 10, 100):
            vals = [
                point_cost(x, t, params, spec, basis, n_draws, np.random.default_rng(k))
                for k in range(200)
            ]
            stds[n_draws] = np.std(vals)
        for lo, hi in ((1, 10), (10, 100)):
            ratio = stds[lo] / stds[hi]
            expected = math.sqrt(hi / lo)
            assert expected / 2 < ratio < expected * 2


class TestSeriesCost:
    def test_single_point_equals_point_cost(self, rng):
        params = replace(make_params(rng), sigma=np.zeros(3))
        spec = EmbeddingSpec(d=1, n=2)
        basis = zstring_basis(2)
        y = make_series(rng)
        c2 = series_cost(y, [3], params, spec, basis, 5, rng)
        c1 = point_cost(y.values[3], y.times[3], params, spec, basis, 5, rng)
        assert c2 == c1

    def test_mean_bounds(self, rng):
        params = replace(make_params(rng), sigma=np.zeros(3))
        spec = EmbeddingSpec(d=1, n=2)
        basis = zstring_basis(2)
        y = make_series(rng, p=8)
        singles = [
            point_cost(y.values[j], y.times[j], params, spec, basis, 1, rng) for j in range(8)
        ]
        total = series_cost(y, np.arange(8), params, spec, basis, 1, rng)
        assert min(singles) - 1e-12 <= total <= max(singles) + 1e-12

    def test_partition_of_mean(self, rng):
        params = replace(make_params(rng), sigma=np.zeros(3))
        spec = EmbeddingSpec(d=1, n=2)
        basis = zstring_basis(2)
        y = make_series(rng, p=8)
        full = series_cost(y, np.arange(8), params, spec, basis, 1, rng)
        halves = (
            series_cost(y, np.arange(4), params, spec, basis, 1, rng)
            + series_cost(y, np.arange(4, 8), params, spec, basis, 1, rng)
        ) / 2.0
        assert abs(full - halves) < 1e-12

    def test_empty_batch(self, rng):
        params = make_params(rng)
        with pytest.raises(ValueError):
            series_cost(make_series(rng), [], params, EmbeddingSpec(1, 2), zstring_basis(2), 1, rng)


class TestPenalty:
    def test_zero_width(self):
        assert penalty(np.zeros(5), 3.0) == 0.0

    def test_large_width_limit(self):
        val = penalty(np.full(4, 1e12), 5.0)
        assert 0.49999 < val < 0.5

    def test_closed_form(self):
        # single string, tau=5, width 0.1: arctan(2*pi*5*0.1)/pi = arctan(pi)/pi
        expected = math.atan(math.pi) / math.pi
        assert penalty(np.array([0.1]), 5.0) == pytest.approx(expected, abs=1e-15)
        assert expected == pytest.approx(0.40187, abs=5e-5)

    def test_monotonic_in_width_and_tau(self, rng):
        sigma = rng.uniform(0.05, 1.0, 3)
        base = penalty(sigma, 2.0)
        bumped = sigma.copy()
        bumped[1] *= 1.5
        assert penalty(bumped, 2.0) > base
        assert penalty(sigma, 3.0) > base

    def test_uses_magnitude(self, rng):
        sigma = rng.uniform(0.1, 1.0, 4)
        assert penalty(-sigma, 1.7) == penalty(sigma, 1.7)

    def test_negative_tau_rejected(self):
        with pytest.raises(ValueError):
            penalty(np.ones(2), -0.1)


def make_dataset(rng, m=6, p=8, d=1, name="train"):
    return Dataset(
        [make_series(rng, p=p, d=d, sid=f"s{i:02d}", label="normal") for i in range(m)],
        name=name,
    )


class TestCost:
    def test_deterministic_composition(self, rng):
        ds = make_dataset(rng, m=3, p=4)
        params = replace(make_params(rng), sigma=np.zeros(3))
        spec = EmbeddingSpec(d=1, n=2)
        basis = zstring_basis(2)
        batch = CostBatch([1], [2], 1)
        om = rewound_expectation(
            ds.series[1].values[2], ds.series[1].times[2], params, spec, basis, params.mu
        )
        val = cost(ds, batch, params, spec, basis, 0.0, rng)
        assert val == pytest.approx(om**2 / 8.0, abs=1e-15)

    def test_bounds(self, rng):
        ds = make_dataset(rng)
        spec = EmbeddingSpec(d=1, n=2)
        basis = zstring_basis(2)
        for _ in range(25):
            params = make_params(rng, sigma_scale=1.0)
            batch = CostBatch(
                rng.choice(ds.m, 3, replace=False), rng.choice(ds.p, 4, replace=False), 2
            )
            val = cost(ds, batch, params, spec, basis, rng.uniform(0, 10), rng)
            assert 0.0 < val < 1.0

    def test_same_seed_same_value(self, rng):
        ds = make_dataset(rng)
        params = make_params(rng, sigma_scale=0.5)
        spec = EmbeddingSpec(d=1, n=2)
        basis = zstring_basis(2)
        batch = CostBatch(np.arange(ds.m), np.arange(ds.p), 4)
        a = cost(ds, batch, params, spec, basis, 5.0, np.random.default_rng(21))
        b = cost(ds, batch, params, spec, basis, 5.0, np.random.default_rng(21))
        assert a == b

    def test_bad_index(self, rng):
        ds = make_dataset(rng, m=3)
        params = make_params(rng)
        with pytest.raises(IndexError):
            cost(ds, CostBatch([5], [0], 1), params, EmbeddingSpec(1, 2), zstring_basis(2), 1.0, rng)

    def test_duplicate_batch_rejected(self):
        with pytest.raises(ValueError):
            CostBatch([1, 1], [0], 1)


def make_model(rng, ds, sigma_scale=0.0, tau=5.0, n_e_ref=50):
    params = make_params(rng, sigma_scale=sigma_scale)
    spec = EmbeddingSpec(d=1, n=2)
    basis = zstring_basis(2)
    ref = reference_cost(ds, params, spec, basis, tau, n_e_ref, np.random.default_rng(1))
    return TrainedModel(
        params=params,
        ref_cost=ref,
        ref_penalty=penalty(params.sigma, tau),
        tau=tau,
        n_e_ref=n_e_ref,
        spec=spec,
        basis=basis,
        seed=123,
    )


class TestAnomalyScore:
    def test_zero_at_cluster_center(self, rng):
        ds = make_dataset(rng)
        model = make_model(rng, ds)  # sigma = 0: fully deterministic
        scores = [anomaly_score(s, model, rng=rng) for s in ds.series]
        c2s = [
            series_cost(s, np.arange(ds.p), model.params, model.spec, model.basis, 1, rng)
            for s in ds.series
        ]
        # the reference center is the training-set mean series cost
        assert model.center == pytest.approx(np.mean(c2s), abs=1e-12)
        recomputed = [abs(np.mean(c2s) - v) for v in c2s]
        np.testing.assert_allclose(scores, recomputed, atol=1e-12)

    def test_nonnegative(self, rng):
        ds = make_dataset(rng)
        model = make_model(rng, ds, sigma_scale=0.4)
        for s in ds.series:
            assert anomaly_score(s, model, n_draws=5, rng=rng) >= 0.0

    def test_dimension_mismatch(self, rng):
        ds = make_dataset(rng)
        model = make_model(rng, ds)
        bad = make_series(rng, d=2)
        with pytest.raises(ValueError):
            anomaly_score(bad, model, rng=rng)

    def test_sigma_zero_independent_of_draws_and_seed(self, rng):
        ds = make_dataset(rng)
        model = make_model(rng, ds)
        y = ds.series[0]
        vals = {
            anomaly_score(y, model, n_draws=k, rng=np.random.default_rng(s))
            for k, s in [(1, 0), (10, 1), (100, 2)]
        }
        assert len(vals) == 1

    def test_rate_sign_symmetry(self, rng):
        # sigma = 0: centers mu with time grid t match -mu with grid -t
        ds = make_dataset(rng)
        params = replace(make_params(rng), sigma=np.zeros(3))
        spec = EmbeddingSpec(d=1, n=2)
        basis = zstring_basis(2)
        y = ds.series[0]
        flipped = TimeSeries(
            id=y.id, times=-y.times[::-1], values=y.values[::-1], label=y.label
        )
        a = series_cost(y, np.arange(y.p), params, spec, basis, 1, rng)
        b = series_cost(
            flipped, np.arange(y.p), replace(params, mu=-params.mu), spec, basis, 1, rng
        )
        assert abs(a - b) < 1e-9


class TestTimeResolvedScore:
    def test_single_point_series_equals_series_score(self, rng):
        params = replace(make_params(rng), sigma=np.zeros(3))
        spec = EmbeddingSpec(d=1, n=2)
        basis = zstring_basis(2)
        one = TimeSeries(id="y", times=[1.0], values=[[0.4]])
        ds = Dataset([make_series(rng, sid="t0"), make_series(rng, sid="t1")], name="d")
        model = make_model(rng, ds)
        assert time_resolved_score(one, 0, model, rng=rng) == anomaly_score(one, model, rng=rng)

    def test_triangle_inequality(self, rng):
        ds = make_dataset(rng)
        model = make_model(rng, ds)  # deterministic mode
        y = ds.series[2]
        total = anomaly_score(y, model, rng=rng)
        per_point = np.mean(
            [time_resolved_score(y, j, model, rng=rng) for j in range(y.p)]
        )
        assert total <= per_point + 1e-9


class TestModelSerialization:
    def test_round_trip(self, rng, tmp_path):
        ds = make_dataset(rng)
        model = make_model(rng, ds, sigma_scale=0.3)
        path = tmp_path / "model.json"
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.to_dict() == model.to_dict()
        # the reference cost is recomputable bit-for-bit from the document
        rec = reference_cost(
            ds, loaded.params, loaded.spec, loaded.basis, loaded.tau,
            loaded.n_e_ref, np.random.default_rng(1), loaded.scale,
        )
        assert rec == model.ref_cost

    def test_validation(self, rng):
        ds = make_dataset(rng)
        model = make_model(rng, ds)
        with pytest.raises(ValueError):
            TrainedModel(
                params=model.params, ref_cost=1.5, ref_penalty=0.0, tau=1.0,
                n_e_ref=10, spec=model.spec, basis=model.basis, seed=0,
            )

    def test_rejects_foreign_document(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"format": "something-else"}')
        with pytest.raises(Exception):
            load_model(path)


class TestPacking:
    def test_round_trip(self, rng):
        params = make_params(rng, layers=3, n=3)
        vec = pack_params(params)
        assert vec.shape == (3 * 3 * 3 + 2 * 7 + 1,)
        back = unpack_params(vec, 3, 3, 7)
        np.testing.assert_array_equal(back.circuit.angles, params.circuit.angles)
        np.testing.assert_array_equal(back.mu, params.mu)
        np.testing.assert_array_equal(back.sigma, params.sigma)
        assert back.eta0 == params.eta0

    def test_shape_check(self):
        with pytest.raises(ValueError):
            unpack_params(np.zeros(5), 1, 2, 3)


def test_point_costs_chunking_invariance(rng):
    # a shared generator consumed in row order makes chunked evaluation
    # identical to one big batch
    params = make_params(rng, sigma_scale=0.4)
    spec = EmbeddingSpec(d=1, n=2)
    basis = zstring_basis(2)
    xs = rng.uniform(-np.pi, np.pi, (30, 1))
    ts = rng.uniform(-2, 2, 30)
    whole = point_costs(xs, ts, params, spec, basis, 8, np.random.default_rng(9))
    g = np.random.default_rng(9)
    parts = np.concatenate(
        [point_costs(xs[k : k + 10], ts[k : k + 10], params, spec, basis, 8, g) for k in (0, 10, 20)]
    )
    np.testing.assert_array_equal(whole, parts)

"""Cost stack and anomaly scores of the rewinding model.

The pipeline per (series i, time t, rate draw): embed x_i(t), devolve by t
under the sampled diagonal generator, and measure the offset observable

    offset * I - (1/n) sum_i sigma_z^i.

Squaring that expectation, averaging over rate draws and dividing by a
fixed ``scale`` gives the per-time-point cost in [0, 1]; averaging over
time points gives the per-series cost; averaging over a series minibatch,
halving and adding the width penalty gives the training cost in (0, 1).

A trained model scores an unseen series by the distance of its per-series
cost from twice the penalty-free reference cost, which equals the training
set's mean per-series cost — the learned cluster center.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .ansatz import (
    EigenbasisCircuit,
    EmbeddingSpec,
    ZStringBasis,
    _embed_batch,
    _rewind_batch,
    zstring_basis,
)
from .data import Dataset, TimeSeries
from .errors import DataError
from .seeding import rng_from
from .statevec import _mean_z_batch

DEFAULT_SCALE = 4.0

MODEL_FORMAT = "qrewind-model"
MODEL_VERSION = 1


@dataclass
class ModelParams:
    """All trainable parameters.

    Attributes:
        circuit: angles of the eigenbasis circuit.
        mu: centers of the per-string normal rate distributions.
        sigma: widths of those distributions; stored signed so unconstrained
            optimizers can roam, used as ``|sigma|`` everywhere.
        eta0: identity coefficient of the observable (the learned cluster
            center for the mean-Z expectation); clamped to [-1, 1] at
            evaluation time.
    """

    circuit: EigenbasisCircuit
    mu: np.ndarray
    sigma: np.ndarray
    eta0: float

    def __post_init__(self):
        self.mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        self.sigma = np.atleast_1d(np.asarray(self.sigma, dtype=float))
        if self.mu.shape != self.sigma.shape or self.mu.ndim != 1:
            raise ValueError(
                f"mu and sigma must be equal-length vectors, got {self.mu.shape} and {self.sigma.shape}"
            )
        if not (np.all(np.isfinite(self.mu)) and np.all(np.isfinite(self.sigma))):
            raise ValueError("mu and sigma must be finite")
        if not np.isfinite(self.eta0):
            raise ValueError("eta0 must be finite")

    @property
    def num_strings(self) -> int:
        return self.mu.shape[0]

    @property
    def eta0_effective(self) -> float:
        return float(min(1.0, max(-1.0, self.eta0)))


@dataclass
class CostBatch:
    """Minibatch indices for one cost evaluation plus the rate-draw count."""

    series_idx: np.ndarray
    time_idx: np.ndarray
    n_draws: int

    def __post_init__(self):
        self.series_idx = np.atleast_1d(np.asarray(self.series_idx, dtype=int))
        self.time_idx = np.atleast_1d(np.asarray(self.time_idx, dtype=int))
        for name, idx in (("series_idx", self.series_idx), ("time_idx", self.time_idx)):
            if idx.size == 0:
                raise ValueError(f"{name} must be nonempty")
            if np.unique(idx).size != idx.size:
                raise ValueError(f"{name} contains duplicates")
        if self.n_draws < 1:
            raise ValueError(f"n_draws must be >= 1, got {self.n_draws}")


# ---------------------------------------------------------------------------
# sampling and expectation


def sample_rates(params: ModelParams, rng: np.random.Generator) -> np.ndarray:
    """One rate vector draw: rates[q] ~ Normal(mu[q], |sigma[q]|).

    Zero-width components come back exactly equal to their center.
    """
    z = rng.standard_normal(params.num_strings)
    return params.mu + np.abs(params.sigma) * z


def _omega_batch(xs, ts, params, spec, basis, rates) -> np.ndarray:
    amps = _embed_batch(xs, spec)
    amps = _rewind_batch(amps, params.circuit, basis, rates, ts)
    return params.eta0_effective - _mean_z_batch(amps, spec.n)


def rewound_expectation(
    x_t: np.ndarray,
    t: float,
    params: ModelParams,
    spec: EmbeddingSpec,
    basis: ZStringBasis,
    rates: np.ndarray,
) -> float:
    """Expectation of the offset observable on the rewound embedded state.

    Lies in [eta0 - 1, eta0 + 1] (with the clamped eta0).
    """
    x_t = np.atleast_1d(np.asarray(x_t, dtype=float))
    if x_t.shape != (spec.d,):
        raise ValueError(f"feature vector has shape {x_t.shape}, expected ({spec.d},)")
    rates = np.asarray(rates, dtype=float)
    return float(
        _omega_batch(x_t[None, :], np.array([t]), params, spec, basis, rates[None, :])[0]
    )


# ---------------------------------------------------------------------------
# cost stack


def _point_costs_batch(xs, ts, params, spec, basis, n_draws, rng, scale) -> np.ndarray:
    """Per-time-point costs for a batch of (x, t) pairs, shape (B,).

    With all-zero widths the rate distribution is degenerate, so the
    expectation is a single exact evaluation at the centers and no
    randomness is consumed — this is the deterministic mode the tests and
    sweeps rely on.
    """
    batch = xs.shape[0]
    q = params.num_strings
    if basis.size != q:
        raise ValueError(f"params have {q} rate components, basis has {basis.size}")
    if np.all(params.sigma == 0.0):
        rates = np.broadcast_to(params.mu, (batch, q))
        om = _omega_batch(xs, ts, params, spec, basis, rates)
        return om**2 / scale
    z = rng.standard_normal((batch, n_draws, q))
    rates = (params.mu + np.abs(params.sigma) * z).reshape(batch * n_draws, q)
    xs_rep = np.repeat(xs, n_draws, axis=0)
    ts_rep = np.repeat(ts, n_draws)
    om = _omega_batch(xs_rep, ts_rep, params, spec, basis, rates).reshape(batch, n_draws)
    return np.mean(om**2, axis=1) / scale


def point_cost(
    x_t,
    t: float,
    params: ModelParams,
    spec: EmbeddingSpec,
    basis: ZStringBasis,
    n_draws: int,
    rng: np.random.Generator,
    scale: float = DEFAULT_SCALE,
) -> float:
    """Cost contribution of one time point: mean of squared expectations
    over ``n_draws`` rate draws, divided by ``scale``."""
    if n_draws < 1:
        raise ValueError(f"n_draws must be >= 1, got {n_draws}")
    x_t = np.atleast_1d(np.asarray(x_t, dtype=float))
    return float(
        _point_costs_batch(x_t[None, :], np.array([float(t)]), params, spec, basis, n_draws, rng, scale)[0]
    )


def point_costs(
    xs: np.ndarray,
    ts: np.ndarray,
    params: ModelParams,
    spec: EmbeddingSpec,
    basis: ZStringBasis,
    n_draws: int,
    rng: np.random.Generator,
    scale: float = DEFAULT_SCALE,
) -> np.ndarray:
    """Vectorized :func:`point_cost` over rows of ``xs`` and matching ``ts``.

    The rate-draw stream is consumed in row order, so splitting a large
    batch into sequential chunks with a shared generator reproduces the
    unchunked result.
    """
    if n_draws < 1:
        raise ValueError(f"n_draws must be >= 1, got {n_draws}")
    xs = np.asarray(xs, dtype=float)
    ts = np.asarray(ts, dtype=float)
    if xs.ndim != 2 or xs.shape[1] != spec.d or ts.shape != (xs.shape[0],):
        raise ValueError(
            f"expected xs (B, {spec.d}) and ts (B,), got {xs.shape} and {ts.shape}"
        )
    return _point_costs_batch(xs, ts, params, spec, basis, n_draws, rng, scale)


def series_cost(
    series: TimeSeries,
    time_idx,
    params: ModelParams,
    spec: EmbeddingSpec,
    basis: ZStringBasis,
    n_draws: int,
    rng: np.random.Generator,
    scale: float = DEFAULT_SCALE,
) -> float:
    """Mean point cost of one series over the given time indices."""
    time_idx = np.atleast_1d(np.asarray(time_idx, dtype=int))
    if time_idx.size == 0:
        raise ValueError("time_idx must be nonempty")
    if n_draws < 1:
        raise ValueError(f"n_draws must be >= 1, got {n_draws}")
    xs = series.values[time_idx]
    ts = series.times[time_idx]
    return float(np.mean(_point_costs_batch(xs, ts, params, spec, basis, n_draws, rng, scale)))


def penalty(sigma: np.ndarray, tau: float) -> float:
    """Width penalty: (1/(pi*Q)) * sum_q arctan(2*pi*tau*|sigma_q|).

    Zero at sigma = 0, approaches 1/2 as every width grows; strictly
    increasing in each |sigma_q| and in tau for nonzero widths.
    """
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
    q = sigma.shape[0]
    return float(np.sum(np.arctan(2.0 * np.pi * tau * np.abs(sigma))) / (np.pi * q))


def cost(
    dataset: Dataset,
    batch: CostBatch,
    params: ModelParams,
    spec: EmbeddingSpec,
    basis: ZStringBasis,
    tau: float,
    rng: np.random.Generator,
    scale: float = DEFAULT_SCALE,
) -> float:
    """Training cost: width penalty plus half the minibatch-mean series cost."""
    m = len(dataset.series)
    if np.any(batch.series_idx < 0) or np.any(batch.series_idx >= m):
        raise IndexError(f"series index out of range for dataset of size {m}")
    per_series = [
        series_cost(dataset.series[i], batch.time_idx, params, spec, basis, batch.n_draws, rng, scale)
        for i in batch.series_idx
    ]
    return penalty(params.sigma, tau) + 0.5 * float(np.mean(per_series))


def reference_cost(
    dataset: Dataset,
    params: ModelParams,
    spec: EmbeddingSpec,
    basis: ZStringBasis,
    tau: float,
    n_draws: int,
    rng: np.random.Generator,
    scale: float = DEFAULT_SCALE,
) -> float:
    """Cost over the full dataset and full time grid (no minibatching).

    Used to freeze a stable cluster-center reference after training.
    """
    p = dataset.series[0].times.shape[0]
    batch = CostBatch(np.arange(len(dataset.series)), np.arange(p), n_draws)
    return cost(dataset, batch, params, spec, basis, tau, rng, scale)


# ---------------------------------------------------------------------------
# trained model and anomaly scores


@dataclass
class TrainedModel:
    """Frozen result of training: parameters plus the scoring reference.

    ``ref_cost`` is the full-dataset cost recomputed at ``n_e_ref`` draws
    after training (not the last noisy minibatch value) and ``ref_penalty``
    the width penalty at the trained sigma, so that
    ``2*(ref_cost - ref_penalty)`` is the training set's mean series cost.
    """

    params: ModelParams
    ref_cost: float
    ref_penalty: float
    tau: float
    n_e_ref: int
    spec: EmbeddingSpec
    basis: ZStringBasis
    seed: int
    scale: float = DEFAULT_SCALE
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.ref_cost < 1.0:
            raise ValueError(f"ref_cost must lie in (0, 1), got {self.ref_cost}")
        if not 0.0 <= self.ref_penalty < 0.5:
            raise ValueError(f"ref_penalty must lie in [0, 1/2), got {self.ref_penalty}")
        if self.ref_cost < self.ref_penalty:
            raise ValueError("ref_cost cannot be below ref_penalty")

    @property
    def center(self) -> float:
        """Cluster center 2*(ref_cost - ref_penalty) that scores measure from."""
        return 2.0 * (self.ref_cost - self.ref_penalty)

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "n": self.spec.n,
            "d": self.spec.d,
            "layers": self.params.circuit.layers,
            "num_strings": self.params.num_strings,
            "params": {
                "angles": self.params.circuit.angles.tolist(),
                "mu": self.params.mu.tolist(),
                "sigma": self.params.sigma.tolist(),
                "eta0": float(self.params.eta0),
            },
            "tau": float(self.tau),
            "scale": float(self.scale),
            "ref_cost": float(self.ref_cost),
            "ref_penalty": float(self.ref_penalty),
            "n_e_ref": int(self.n_e_ref),
            "seed": int(self.seed),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainedModel":
        if doc.get("format") != MODEL_FORMAT:
            raise DataError(f"not a model document (format={doc.get('format')!r})")
        if doc.get("version") != MODEL_VERSION:
            raise DataError(f"unsupported model version {doc.get('version')!r}")
        spec = EmbeddingSpec(d=int(doc["d"]), n=int(doc["n"]))
        basis = zstring_basis(spec.n)
        if int(doc["num_strings"]) != basis.size:
            raise DataError(
                f"model declares {doc['num_strings']} strings, expected {basis.size} for n={spec.n}"
            )
        p = doc["params"]
        params = ModelParams(
            circuit=EigenbasisCircuit(np.asarray(p["angles"], dtype=float)),
            mu=np.asarray(p["mu"], dtype=float),
            sigma=np.asarray(p["sigma"], dtype=float),
            eta0=float(p["eta0"]),
        )
        return cls(
            params=params,
            ref_cost=float(doc["ref_cost"]),
            ref_penalty=float(doc["ref_penalty"]),
            tau=float(doc["tau"]),
            n_e_ref=int(doc["n_e_ref"]),
            spec=spec,
            basis=basis,
            seed=int(doc["seed"]),
            scale=float(doc.get("scale", DEFAULT_SCALE)),
            meta=dict(doc.get("meta", {})),
        )


def save_model(model: TrainedModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, indent=2)
        fh.write("\n")


def load_model(path) -> TrainedModel:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read model: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid model document ({exc})") from None
    return TrainedModel.from_dict(doc)


def _score_rng(model: TrainedModel, rng):
    return rng if rng is not None else rng_from(model.seed, "score")


def anomaly_score(
    y: TimeSeries,
    model: TrainedModel,
    time_idx=None,
    n_draws: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Distance of a series' cost from the learned cluster center.

    |2*ref_cost - 2*ref_penalty - series_cost(y)|; zero means the model
    rewinds ``y`` exactly as well as a typical training series.
    """
    if y.values.shape[1] != model.spec.d:
        raise ValueError(
            f"series has {y.values.shape[1]} features, model expects {model.spec.d}"
        )
    if time_idx is None:
        time_idx = np.arange(y.times.shape[0])
    n_draws = model.n_e_ref if n_draws is None else n_draws
    c2 = series_cost(
        y, time_idx, model.params, model.spec, model.basis, n_draws, _score_rng(model, rng), model.scale
    )
    return abs(model.center - c2)


def point_score(
    x_t,
    t: float,
    model: TrainedModel,
    n_draws: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Time-resolved score of a single (feature vector, time) pair."""
    n_draws = model.n_e_ref if n_draws is None else n_draws
    c1 = point_cost(
        x_t, t, model.params, model.spec, model.basis, n_draws, _score_rng(model, rng), model.scale
    )
    return abs(model.center - c1)


def time_resolved_score(
    y: TimeSeries,
    t_index: int,
    model: TrainedModel,
    n_draws: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Time-resolved score of series ``y`` at one of its own time points."""
    if y.values.shape[1] != model.spec.d:
        raise ValueError(
            f"series has {y.values.shape[1]} features, model expects {model.spec.d}"
        )
    return point_score(y.values[t_index], float(y.times[t_index]), model, n_draws, rng)


# ---------------------------------------------------------------------------
# flat parameter vector <-> ModelParams (for derivative-free optimizers)


def n_params(layers: int, n: int, num_strings: int) -> int:
    return layers * n * 3 + 2 * num_strings + 1


def pack_params(params: ModelParams) -> np.ndarray:
    return np.concatenate(
        [params.circuit.angles.ravel(), params.mu, params.sigma, [params.eta0]]
    )


def unpack_params(vec: np.ndarray, layers: int, n: int, num_strings: int) -> ModelParams:
    vec = np.asarray(vec, dtype=float)
    expected = n_params(layers, n, num_strings)
    if vec.shape != (expected,):
        raise ValueError(f"parameter vector has shape {vec.shape}, expected ({expected},)")
    k = layers * n * 3
    angles = vec[:k].reshape(layers, n, 3)
    mu = vec[k : k + num_strings]
    sigma = vec[k + num_strings : k + 2 * num_strings]
    return ModelParams(
        circuit=EigenbasisCircuit(angles), mu=mu, sigma=sigma, eta0=float(vec[-1])
    )

"""Derivative-free training of the rewinding model.

Both optimizers are budgeted by *objective evaluations*, because in
training every evaluation consumes one fresh minibatch (series subset,
time subset and rate draws are all re-randomized per call).  The returned
best point is the best-so-far over all evaluations, which for a stochastic
objective is the standard "lowest observed cost" selection.
"""

import json
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ansatz import EmbeddingSpec, zstring_basis
from .data import Dataset
from .errors import ConfigError, NumericError
from .model import (
    CostBatch,
    TrainedModel,
    cost,
    n_params,
    pack_params,
    penalty,
    reference_cost,
    unpack_params,
)
from .seeding import rng_from

_GOLD = (np.sqrt(5.0) - 1.0) / 2.0  # golden-section shrink factor


@dataclass
class OptimizerSpec:
    """Optimizer choice and termination contract.

    ``max_minibatch_iters`` caps objective evaluations; ``cost_tolerance``
    additionally stops when the simplex diameter (Nelder-Mead) or sweep
    displacement (Powell) falls below it.  ``initial_step`` sets the
    simplex edge / line-search bracket scale, ``line_tolerance`` and
    ``line_evals`` bound each golden-section line search.
    """

    method: str = "powell"
    max_minibatch_iters: int = 1000
    cost_tolerance: float = 0.0
    initial_step: float = 0.5
    line_tolerance: float = 1e-4
    line_evals: int = 64

    def __post_init__(self):
        if self.method not in ("nelder-mead", "powell"):
            raise ConfigError(f"unknown optimizer {self.method!r}")
        if self.max_minibatch_iters < 1:
            raise ConfigError("max_minibatch_iters must be >= 1")


@dataclass
class TrainTrace:
    """Per-evaluation log: every entry is one minibatch draw."""

    costs: list = field(default_factory=list)
    best_costs: list = field(default_factory=list)
    wall_times: list = field(default_factory=list)
    best_x: np.ndarray | None = None
    stop_reason: str = ""

    def __len__(self):
        return len(self.costs)

    def records(self):
        for i, (c, b) in enumerate(zip(self.costs, self.best_costs)):
            yield {"iteration": i, "cost": c, "best_cost": b}


def write_trace(trace: TrainTrace, path) -> None:
    """Line-delimited (iteration, cost, best_cost) records for plotting."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in trace.records():
            fh.write(json.dumps(rec) + "\n")


class _BudgetExhausted(Exception):
    pass


class _Recorder:
    """Wraps the objective: budget enforcement, NaN abort, best-so-far."""

    def __init__(self, f, max_evals: int):
        self.f = f
        self.max_evals = max_evals
        self.trace = TrainTrace()
        self.best_f = np.inf

    def __call__(self, x: np.ndarray) -> float:
        if len(self.trace) >= self.max_evals:
            raise _BudgetExhausted
        t0 = time.perf_counter()
        val = float(self.f(x))
        dt = time.perf_counter() - t0
        if np.isnan(val):
            raise NumericError(
                f"objective returned NaN at evaluation {len(self.trace)} (x={x!r})"
            )
        if val < self.best_f:
            self.best_f = val
            self.trace.best_x = np.array(x, dtype=float)
        self.trace.costs.append(val)
        self.trace.best_costs.append(self.best_f)
        self.trace.wall_times.append(dt)
        return val

    def finish(self, reason: str):
        self.trace.stop_reason = reason
        return self.trace.best_x, self.best_f, self.trace


def nelder_mead(f, x0: np.ndarray, spec: OptimizerSpec):
    """Standard simplex search (reflection 1, expansion 2, contraction 1/2,
    shrink 1/2) under the evaluation budget.

    Returns (best point, best value, trace).
    """
    x0 = np.asarray(x0, dtype=float)
    dim = x0.size
    rec = _Recorder(f, spec.max_minibatch_iters)
    reason = "budget"
    try:
        sim = np.empty((dim + 1, dim))
        sim[0] = x0
        for i in range(dim):
            sim[i + 1] = x0
            sim[i + 1, i] += spec.initial_step
        fsim = np.array([rec(v) for v in sim])
        while True:
            order = np.argsort(fsim, kind="stable")
            sim, fsim = sim[order], fsim[order]
            if np.max(np.abs(sim[1:] - sim[0])) < spec.cost_tolerance:
                reason = "tolerance"
                break
            xbar = sim[:-1].mean(axis=0)
            xr = xbar + (xbar - sim[-1])
            fr = rec(xr)
            if fr < fsim[0]:
                xe = xbar + 2.0 * (xbar - sim[-1])
                fe = rec(xe)
                sim[-1], fsim[-1] = (xe, fe) if fe < fr else (xr, fr)
            elif fr < fsim[-2]:
                sim[-1], fsim[-1] = xr, fr
            else:
                if fr < fsim[-1]:  # outside contraction
                    xc = xbar + 0.5 * (xbar - sim[-1])
                    fc = rec(xc)
                    accept = fc <= fr
                else:  # inside contraction
                    xc = xbar - 0.5 * (xbar - sim[-1])
                    fc = rec(xc)
                    accept = fc < fsim[-1]
                if accept:
                    sim[-1], fsim[-1] = xc, fc
                else:  # shrink toward the best vertex
                    for i in range(1, dim + 1):
                        sim[i] = sim[0] + 0.5 * (sim[i] - sim[0])
                        fsim[i] = rec(sim[i])
    except _BudgetExhausted:
        reason = "budget"
    return rec.finish(reason)


def _golden_line_min(rec, x, direction, f_x, spec: OptimizerSpec):
    """Bounded golden-section minimization of a -> f(x + a*direction).

    Brackets from a=0 with expanding golden steps, then contracts the
    bracket; total evaluations are capped by ``spec.line_evals``.
    Returns (new x, new f).
    """
    used = 0

    def g(a):
        nonlocal used
        used += 1
        return rec(x + a * direction)

    step = spec.initial_step
    a, fa = 0.0, f_x
    b = step
    fb = g(b)
    if fb > fa:
        a, b, fa, fb = b, a, fb, fa  # downhill now points from a to b
    c = b + (1.0 + _GOLD) * (b - a)
    fc = g(c)
    while fc < fb and used < spec.line_evals // 2:
        a, b, fa, fb = b, c, fb, fc
        c = b + (1.0 + _GOLD) * (b - a)
        fc = g(c)
    lo, hi = (a, c) if a < c else (c, a)

    # golden-section contraction on [lo, hi]
    u = hi - _GOLD * (hi - lo)
    v = lo + _GOLD * (hi - lo)
    fu, fv = g(u), g(v)
    while hi - lo > spec.line_tolerance and used < spec.line_evals:
        if fu < fv:
            hi, v, fv = v, u, fu
            u = hi - _GOLD * (hi - lo)
            fu = g(u)
        else:
            lo, u, fu = u, v, fv
            v = lo + _GOLD * (hi - lo)
            fv = g(v)
    best_a, best_f = min(
        [(0.0, f_x), (b, fb), (u, fu), (v, fv)], key=lambda pair: pair[1]
    )
    return x + best_a * direction, best_f


def powell(f, x0: np.ndarray, spec: OptimizerSpec):
    """Powell's conjugate-direction method with golden-section line searches.

    After each sweep the direction of largest decrease may be replaced by
    the net sweep displacement (the standard acceptance test), building up
    mutually conjugate directions on quadratics.
    """
    x0 = np.asarray(x0, dtype=float)
    dim = x0.size
    rec = _Recorder(f, spec.max_minibatch_iters)
    reason = "budget"
    try:
        dirs = np.eye(dim)
        x = x0.copy()
        fx = rec(x)
        while True:
            x_prev, f_prev = x.copy(), fx
            biggest, bigi = 0.0, 0
            for i in range(dim):
                f_before = fx
                x, fx = _golden_line_min(rec, x, dirs[i], fx, spec)
                if f_before - fx > biggest:
                    biggest, bigi = f_before - fx, i
            if np.max(np.abs(x - x_prev)) < spec.cost_tolerance:
                reason = "tolerance"
                break
            xe = 2.0 * x - x_prev
            fe = rec(xe)
            if fe < f_prev:
                t = (
                    2.0 * (f_prev - 2.0 * fx + fe) * (f_prev - fx - biggest) ** 2
                    - biggest * (f_prev - fe) ** 2
                )
                if t < 0.0:
                    u_new = x - x_prev
                    norm = np.linalg.norm(u_new)
                    if norm > 0.0:
                        x, fx = _golden_line_min(rec, x, u_new / norm, fx, spec)
                        dirs[bigi] = dirs[dim - 1]
                        dirs[dim - 1] = u_new / norm
    except _BudgetExhausted:
        reason = "budget"
    return rec.finish(reason)


_OPTIMIZERS = {"nelder-mead": nelder_mead, "powell": powell}


# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class InitRanges:
    """Uniform initialization ranges for each parameter block."""

    angles: tuple = (0.0, 2.0 * np.pi)
    mu: tuple = (-1.0, 1.0)
    sigma: tuple = (0.0, 0.5)
    eta0: tuple = (-1.0, 1.0)


@dataclass
class TrainConfig:
    """Batch sizes, model structure and seeding for one training run."""

    n_x: int
    n_t: int
    n_e: int
    tau: float = 5.0
    layers: int = 1
    restarts: int = 1
    base_seed: int = 0
    n_qubits: int | None = None  # default: max(d, 2) with identity padding
    scale: float = 4.0
    n_e_ref: int = 100
    init_ranges: InitRanges = InitRanges()

    def __post_init__(self):
        for name in ("n_x", "n_t", "n_e", "restarts", "layers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.tau < 0:
            raise ConfigError("tau must be >= 0")


@dataclass
class TrainResult:
    model: TrainedModel
    trace: TrainTrace
    seed: int


def _initial_vector(
    layers: int, n: int, num_strings: int, rng, ranges: InitRanges
) -> np.ndarray:
    angles = rng.uniform(*ranges.angles, size=layers * n * 3)
    mu = rng.uniform(*ranges.mu, size=num_strings)
    sigma = rng.uniform(*ranges.sigma, size=num_strings)
    eta0 = rng.uniform(*ranges.eta0, size=1)
    return np.concatenate([angles, mu, sigma, eta0])


def random_params(
    layers: int, n: int, num_strings: int, rng, ranges: InitRanges = InitRanges()
):
    """Uniformly drawn ModelParams, as used for initialization and sweeps."""
    return unpack_params(
        _initial_vector(layers, n, num_strings, rng, ranges), layers, n, num_strings
    )


def train(
    dataset: Dataset,
    cfg: TrainConfig,
    opt: OptimizerSpec,
    seed: int | None = None,
    init=None,
) -> TrainResult:
    """One seeded training run.

    Wraps the stochastic objective (fresh minibatch and fresh rate draws
    per evaluation), runs the chosen optimizer, then freezes the model with
    the reference cost recomputed over the full dataset and time grid at
    ``cfg.n_e_ref`` draws.  ``init`` warm-starts from existing ModelParams
    instead of the random initialization (used by continuation sweeps).
    """
    seed = cfg.base_seed if seed is None else seed
    d = dataset.d
    n = cfg.n_qubits if cfg.n_qubits is not None else max(d, 2)
    if n < d:
        raise ConfigError(f"n_qubits={n} is below the feature dimension {d}")
    emb = EmbeddingSpec(d=d, n=n)
    basis = zstring_basis(n)
    if cfg.n_x > dataset.m:
        raise ConfigError(f"n_x={cfg.n_x} exceeds dataset size {dataset.m}")
    if cfg.n_t > dataset.p:
        raise ConfigError(f"n_t={cfg.n_t} exceeds time grid length {dataset.p}")

    obj_rng = rng_from(seed, "objective")
    dims = (cfg.layers, n, basis.size)

    def objective(x):
        if not np.all(np.isfinite(x)):
            return float("nan")
        params = unpack_params(x, *dims)
        batch = CostBatch(
            series_idx=obj_rng.choice(dataset.m, size=cfg.n_x, replace=False),
            time_idx=obj_rng.choice(dataset.p, size=cfg.n_t, replace=False),
            n_draws=cfg.n_e,
        )
        return cost(dataset, batch, params, emb, basis, cfg.tau, obj_rng, cfg.scale)

    if init is not None:
        x0 = pack_params(init)
        if x0.shape != (n_params(cfg.layers, n, basis.size),):
            raise ConfigError("warm-start parameters do not match the configured structure")
    else:
        x0 = _initial_vector(cfg.layers, n, basis.size, rng_from(seed, "init"), cfg.init_ranges)
    x_star, _, trace = _OPTIMIZERS[opt.method](objective, x0, opt)
    if trace.stop_reason == "budget" and opt.cost_tolerance > 0:
        warnings.warn("optimizer stopped on evaluation budget", stacklevel=2)

    params_star = unpack_params(x_star, *dims)
    ref = reference_cost(
        dataset, params_star, emb, basis, cfg.tau, cfg.n_e_ref,
        rng_from(seed, "reference"), cfg.scale,
    )
    model = TrainedModel(
        params=params_star,
        ref_cost=ref,
        ref_penalty=penalty(params_star.sigma, cfg.tau),
        tau=cfg.tau,
        n_e_ref=cfg.n_e_ref,
        spec=emb,
        basis=basis,
        seed=seed,
        scale=cfg.scale,
        meta={
            "method": opt.method,
            "iterations": len(trace),
            "best_training_cost": float(trace.best_costs[-1]),
            "stop_reason": trace.stop_reason,
        },
    )
    return TrainResult(model=model, trace=trace, seed=seed)


@dataclass
class MultiRestartResult:
    best: TrainedModel
    results: list

    @property
    def best_index(self) -> int:
        refs = [r.model.ref_cost for r in self.results]
        return int(np.argmin(refs))


def _run_restart(args):
    dataset, cfg, opt, seed = args
    return train(dataset, cfg, opt, seed=seed)


def multi_restart(
    dataset: Dataset, cfg: TrainConfig, opt: OptimizerSpec, threads: int = 1
) -> MultiRestartResult:
    """Independent seeded restarts; the winner has the lowest reference cost.

    Restart k uses seed ``base_seed + k`` (so a single restart matches
    :func:`train` exactly) and results are keyed by restart index, making
    the outcome independent of worker count.
    """
    jobs = [(dataset, cfg, opt, cfg.base_seed + k) for k in range(cfg.restarts)]
    if threads > 1 and cfg.restarts > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_restart, jobs))
    else:
        results = [_run_restart(j) for j in jobs]
    out = MultiRestartResult(best=None, results=results)
    out.best = results[out.best_index].model
    return out

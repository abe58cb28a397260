"""Scoring tables, threshold tuning, classification metrics and sweeps.

Sweep functions return lists of plain-dict records; ``write_records_csv``
persists them with a documented header so external tooling can plot them.
The anomalous class is the positive class throughout: a series is flagged
anomalous when its score exceeds the threshold.
"""

import csv
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .ansatz import EmbeddingSpec, zstring_basis
from .data import Dataset
from .errors import DataError
from .model import (
    CostBatch,
    ModelParams,
    TrainedModel,
    anomaly_score,
    cost,
    point_costs,
)
from .optimize import OptimizerSpec, TrainConfig, multi_restart, train
from .seeding import rng_from

_GRID_CHUNK = 2048


# ---------------------------------------------------------------------------
# score tables


@dataclass
class ScoreRow:
    series_id: str
    dataset: str
    score: float
    label: str | None = None


def score_dataset(
    ds: Dataset, model: TrainedModel, n_draws: int | None = None, seed: int = 0
) -> list:
    """Anomaly score for every series; one derived rate stream per series id
    so results do not depend on series order."""
    rows = []
    for s in ds.series:
        val = anomaly_score(
            s, model, n_draws=n_draws, rng=rng_from(seed, "series", s.id)
        )
        rows.append(ScoreRow(series_id=s.id, dataset=ds.name, score=val, label=s.label))
    return rows


def write_score_table(rows, path, comments=()) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["series_id", "dataset", "score", "label"])
        for r in rows:
            writer.writerow([r.series_id, r.dataset, repr(float(r.score)), r.label or ""])


def read_score_table(path) -> list:
    rows = []
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
    except OSError as exc:
        raise DataError(f"cannot read score table: {exc}") from None
    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None or header[:3] != ["series_id", "dataset", "score"]:
        raise DataError(f"{path}: not a score table")
    for rec in reader:
        if not rec:
            continue
        score = float(rec[2])
        if not np.isfinite(score) or score < 0:
            raise DataError(f"{path}: bad score {rec[2]!r} for series {rec[0]!r}")
        label = rec[3] if len(rec) > 3 and rec[3] else None
        rows.append(ScoreRow(series_id=rec[0], dataset=rec[1], score=score, label=label))
    return rows


# ---------------------------------------------------------------------------
# metrics and threshold tuning


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int


@dataclass(frozen=True)
class ThresholdResult:
    zeta: float
    balanced_accuracy: float
    f1: float
    confusion: Confusion


def _safe_ratio(num, den, what):
    if den == 0:
        warnings.warn(f"{what} undefined (zero denominator), counting it as 0", stacklevel=3)
        return 0.0
    return num / den


def balanced_accuracy(confusion: Confusion) -> float:
    """Mean of anomaly recall and normal recall."""
    r_anom = _safe_ratio(confusion.tp, confusion.tp + confusion.fn, "anomaly recall")
    r_norm = _safe_ratio(confusion.tn, confusion.tn + confusion.fp, "normal recall")
    return 0.5 * (r_anom + r_norm)


def f1(confusion: Confusion) -> float:
    return _safe_ratio(
        2 * confusion.tp, 2 * confusion.tp + confusion.fp + confusion.fn, "F1"
    )


def confusion_at(normal_scores, anomalous_scores, zeta: float) -> Confusion:
    """Counts for the rule: anomalous iff score > zeta."""
    normal_scores = np.asarray(normal_scores, dtype=float)
    anomalous_scores = np.asarray(anomalous_scores, dtype=float)
    return Confusion(
        tp=int(np.sum(anomalous_scores > zeta)),
        fn=int(np.sum(anomalous_scores <= zeta)),
        tn=int(np.sum(normal_scores <= zeta)),
        fp=int(np.sum(normal_scores > zeta)),
    )


def tune_threshold(normal_scores, anomalous_scores) -> ThresholdResult:
    """Threshold maximizing balanced accuracy.

    Candidates are the midpoints of adjacent sorted unique scores plus
    -inf/+inf sentinels; ties resolve toward the smaller threshold
    (favoring recall on anomalies).
    """
    normal_scores = np.asarray(normal_scores, dtype=float)
    anomalous_scores = np.asarray(anomalous_scores, dtype=float)
    if normal_scores.size == 0 or anomalous_scores.size == 0:
        raise ValueError("both score lists must be nonempty")
    uniq = np.unique(np.concatenate([normal_scores, anomalous_scores]))
    mids = (uniq[:-1] + uniq[1:]) / 2.0
    candidates = np.concatenate([[-np.inf], mids, [np.inf]])
    best = None
    for zeta in candidates:
        conf = confusion_at(normal_scores, anomalous_scores, zeta)
        a_b = balanced_accuracy(conf)
        if best is None or a_b > best.balanced_accuracy:
            best = ThresholdResult(
                zeta=float(zeta), balanced_accuracy=a_b, f1=f1(conf), confusion=conf
            )
    return best


def close_call_fraction(scores, zeta: float, delta: float) -> float:
    """Diagnostic (not part of the core protocol): fraction of series whose
    classification flips when scores are perturbed by up to ``delta``."""
    scores = np.asarray(scores, dtype=float)
    return float(np.mean(np.abs(scores - zeta) <= delta))


def detection_probability_by_value(
    scores, values, zeta: float, window: int = 285, step: int = 1
) -> list:
    """Moving-window P(score > zeta) over series ordered by transaction value.

    Only meaningful when the score table carries per-series values; windows
    shorter than ``window`` at the tail are dropped.
    """
    scores = np.asarray(scores, dtype=float)
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="stable")
    s, v = scores[order], values[order]
    records = []
    for lo in range(0, s.size - window + 1, step):
        sl = slice(lo, lo + window)
        records.append(
            {
                "window_start": lo,
                "median_value": float(np.median(v[sl])),
                "detection_probability": float(np.mean(s[sl] > zeta)),
            }
        )
    return records


# ---------------------------------------------------------------------------
# grid scoring


def _chunked_point_scores(model, xs, ts, n_draws, rng):
    n_draws = model.n_e_ref if n_draws is None else n_draws
    out = np.empty(xs.shape[0])
    for lo in range(0, xs.shape[0], _GRID_CHUNK):
        sl = slice(lo, lo + _GRID_CHUNK)
        c1 = point_costs(
            xs[sl], ts[sl], model.params, model.spec, model.basis, n_draws, rng, model.scale
        )
        out[sl] = np.abs(model.center - c1)
    return out


def time_value_score_grid(
    model: TrainedModel, t_grid, value_grid, n_draws: int | None = None, seed: int = 0
) -> np.ndarray:
    """Time-resolved scores of a univariate model on a (time x value) grid.

    Returns an array of shape (len(t_grid), len(value_grid)).
    """
    if model.spec.d != 1:
        raise ValueError("time/value grids require a univariate model")
    t_grid = np.asarray(t_grid, dtype=float)
    value_grid = np.asarray(value_grid, dtype=float)
    tt, vv = np.meshgrid(t_grid, value_grid, indexing="ij")
    scores = _chunked_point_scores(
        model, vv.reshape(-1, 1), tt.ravel(), n_draws, rng_from(seed, "grid")
    )
    return scores.reshape(t_grid.size, value_grid.size)


def static_score_grid(
    model: TrainedModel,
    axis1,
    axis2,
    t: float = 1.0,
    n_draws: int | None = None,
    seed: int = 0,
) -> np.ndarray:
    """Scores of a bivariate single-time-point model over a feature grid."""
    if model.spec.d != 2:
        raise ValueError("feature grids require a bivariate model")
    axis1 = np.asarray(axis1, dtype=float)
    axis2 = np.asarray(axis2, dtype=float)
    a1, a2 = np.meshgrid(axis1, axis2, indexing="ij")
    xs = np.stack([a1.ravel(), a2.ravel()], axis=1)
    ts = np.full(xs.shape[0], float(t))
    scores = _chunked_point_scores(model, xs, ts, n_draws, rng_from(seed, "grid"))
    return scores.reshape(axis1.size, axis2.size)


# ---------------------------------------------------------------------------
# sweeps


def sweep_ne(
    dataset: Dataset,
    params_list,
    n_x_list,
    n_e_grid,
    n_t: int = 10,
    repeats: int = 100,
    tau: float = 5.0,
    seed: int = 0,
) -> list:
    """Stochastic cost error versus rate-draw count.

    For each (parameter draw, n_x, n_e) the minibatch is drawn once and
    held fixed while the rate draws are re-randomized per repeat, so the
    reported spread isolates the sampling error of the classical
    expectation (and is exactly zero in the sigma = 0 deterministic mode).
    Records: theta_index, n_x, n_e, cost_mean, cost_std, std_pct.
    """
    emb = EmbeddingSpec(d=dataset.d, n=max(dataset.d, 2))
    basis = zstring_basis(emb.n)
    records = []
    for k, params in enumerate(params_list):
        for n_x in n_x_list:
            batch_rng = rng_from(seed, "batch", k, n_x)
            series_idx = batch_rng.choice(dataset.m, size=n_x, replace=False)
            time_idx = batch_rng.choice(dataset.p, size=min(n_t, dataset.p), replace=False)
            for n_e in n_e_grid:
                rng = rng_from(seed, "repeat", k, n_x, n_e)
                vals = np.array(
                    [
                        cost(
                            dataset,
                            CostBatch(series_idx, time_idx, n_e),
                            params,
                            emb,
                            basis,
                            tau,
                            rng,
                        )
                        for _ in range(repeats)
                    ]
                )
                mean = float(vals.mean())
                std = float(vals.std())
                records.append(
                    {
                        "theta_index": k,
                        "n_x": int(n_x),
                        "n_e": int(n_e),
                        "cost_mean": mean,
                        "cost_std": std,
                        "std_pct": 100.0 * std / mean if mean else 0.0,
                    }
                )
    return records


def sweep_mu_sigma(
    dataset: Dataset,
    base_params: ModelParams,
    mu_grid,
    sigma_list,
    n_x: int = 5,
    n_t: int = 10,
    n_e: int = 5,
    repeats: int = 100,
    tau: float = 5.0,
    seed: int = 0,
) -> list:
    """Cost landscape over scalar (mu, sigma) at fixed circuit angles.

    The scalar mu/sigma are broadcast to every string coefficient; one
    fixed minibatch is reused everywhere so the landscape is smooth in mu.
    Records: mu, sigma, cost_mean, q25, q50, q75.
    """
    emb = EmbeddingSpec(d=dataset.d, n=max(dataset.d, 2))
    basis = zstring_basis(emb.n)
    q = basis.size
    batch_rng = rng_from(seed, "batch")
    series_idx = batch_rng.choice(dataset.m, size=min(n_x, dataset.m), replace=False)
    time_idx = batch_rng.choice(dataset.p, size=min(n_t, dataset.p), replace=False)
    batch = CostBatch(series_idx, time_idx, n_e)
    records = []
    for sigma in sigma_list:
        for i, mu in enumerate(mu_grid):
            params = replace(
                base_params, mu=np.full(q, float(mu)), sigma=np.full(q, float(sigma))
            )
            rng = rng_from(seed, "repeat", i, repr(float(sigma)))
            vals = np.array(
                [cost(dataset, batch, params, emb, basis, tau, rng) for _ in range(repeats)]
            )
            q25, q50, q75 = np.percentile(vals, [25, 50, 75])
            records.append(
                {
                    "mu": float(mu),
                    "sigma": float(sigma),
                    "cost_mean": float(vals.mean()),
                    "q25": float(q25),
                    "q50": float(q50),
                    "q75": float(q75),
                }
            )
    return records


def sweep_tau(
    blob_dataset: Dataset,
    tau_list,
    grid_points: int = 60,
    cfg: TrainConfig | None = None,
    opt: OptimizerSpec | None = None,
    level: float = 0.01,
    n_draws: int = 100,
    seed: int = 0,
    threads: int = 1,
    continuation: bool = False,
) -> list:
    """Train one static (single-time-point) model per penalty strength and
    measure the feature-grid area scoring at or below ``level``.

    By default every penalty strength trains fresh from its own restarts.
    With ``continuation`` the strengths are processed in ascending order
    and each training warm-starts from the previous solution
    (regularization-path style).

    Records (in ``tau_list`` order): tau, area_fraction, plus the trained
    model and the score grid (over [0, 2pi) per axis) for persistence.
    """
    if cfg is None:
        cfg = TrainConfig(n_x=10, n_t=1, n_e=10, layers=3, restarts=5, base_seed=seed)
    if opt is None:
        opt = OptimizerSpec(max_minibatch_iters=2000, line_evals=16, line_tolerance=1e-4)
    axis = np.linspace(0.0, 2.0 * np.pi, grid_points, endpoint=False)
    order = np.argsort(np.asarray(tau_list, dtype=float), kind="stable")
    by_tau = {}
    warm = None
    for k in order:
        tau = float(tau_list[k])
        tau_cfg = replace(cfg, tau=tau)
        if continuation and warm is not None:
            model = train(
                blob_dataset, tau_cfg, opt, seed=cfg.base_seed, init=warm
            ).model
        else:
            model = multi_restart(blob_dataset, tau_cfg, opt, threads=threads).best
        warm = model.params
        grid = static_score_grid(
            model, axis, axis, t=float(blob_dataset.series[0].times[0]),
            n_draws=n_draws, seed=seed,
        )
        by_tau[k] = {
            "tau": tau,
            "area_fraction": float(np.mean(grid <= level)),
            "model": model,
            "grid": grid,
            "axis": axis,
        }
    return [by_tau[k] for k in range(len(tau_list))]


def benchmark_optimizers(
    dataset: Dataset,
    cfg: TrainConfig,
    methods=("powell", "nelder-mead"),
    restarts: int | None = None,
    threads: int = 1,
    opt: OptimizerSpec | None = None,
) -> list:
    """Training traces for each optimizer over seeded restarts.

    ``opt`` carries the shared budget/termination settings; only the method
    is swapped per entry.  Records: method, restart, iteration, cost,
    best_cost — the raw material for trace-density plots.
    """
    if restarts is not None:
        cfg = replace(cfg, restarts=restarts)
    if opt is None:
        opt = OptimizerSpec()
    records = []
    for method in methods:
        out = multi_restart(dataset, cfg, replace(opt, method=method), threads=threads)
        for r_idx, res in enumerate(out.results):
            for rec in res.trace.records():
                records.append({"method": method, "restart": r_idx, **rec})
    return records


# ---------------------------------------------------------------------------
# record tables


def write_records_csv(path, records, fieldnames=None, comments=()) -> None:
    """CSV dump of homogeneous dict records (non-scalar values excluded)."""
    if not records:
        raise ValueError("no records to write")
    if fieldnames is None:
        fieldnames = [
            k for k, v in records[0].items() if np.isscalar(v) or isinstance(v, str)
        ]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        writer = csv.DictWriter(fh, fieldnames=fieldnames, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        writer.writerows(
            [{k: rec.get(k) for k in fieldnames} for rec in records]
        )

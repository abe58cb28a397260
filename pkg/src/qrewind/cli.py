"""Command-line surface: generate / train / score / score-grid / evaluate / sweep.

Every command is reproducible from (config, seed) alone and embeds the
resolved config hash in its outputs.  Exit codes: 0 success, 2 config
error, 3 data error, 4 numeric failure.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import data as qdata
from . import evaluate as qeval
from .config import RunConfig, resolve_config
from .errors import ConfigError, DataError, NumericError
from .model import load_model, save_model
from .optimize import InitRanges, OptimizerSpec, TrainConfig, multi_restart
from .seeding import derive_seed

GENERATE_PRESETS = ("didactic", "sinusoids", "blobs")


def _train_config(cfg: RunConfig) -> TrainConfig:
    tr, an = cfg.train, cfg.ansatz
    return TrainConfig(
        n_x=tr.n_x,
        n_t=tr.n_t,
        n_e=tr.n_e,
        tau=tr.tau,
        layers=an.layers,
        restarts=tr.restarts,
        base_seed=cfg.seed,
        n_qubits=an.n_qubits,
        scale=tr.scale,
        n_e_ref=tr.n_e_ref,
        init_ranges=InitRanges(
            angles=tr.init_angles, mu=tr.init_mu, sigma=tr.init_sigma, eta0=tr.init_eta0
        ),
    )


def _optimizer_spec(cfg: RunConfig) -> OptimizerSpec:
    tr = cfg.train
    return OptimizerSpec(
        method=tr.method,
        max_minibatch_iters=tr.iterations,
        cost_tolerance=tr.cost_tolerance,
        initial_step=tr.initial_step,
        line_tolerance=tr.line_tolerance,
        line_evals=tr.line_evals,
    )


def _load_dataset(path, cfg: RunConfig, allow_empty=False):
    ds = qdata.load_csv(path, allow_empty=allow_empty)
    if ds is not None and cfg.data.rescale and not ds.rescaled:
        ds = qdata.minmax_rescale(ds)
    return ds


def _parse_grid(text: str) -> np.ndarray:
    try:
        lo, hi, num = text.split(":")
        return np.linspace(float(lo), float(hi), int(num))
    except ValueError:
        raise ConfigError(f"bad grid spec {text!r}, expected 'lo:hi:num'") from None


# ---------------------------------------------------------------------------
# commands


def _generate_sets(cfg: RunConfig) -> dict:
    da = cfg.data
    preset = da.preset
    seed = cfg.seed
    if preset == "didactic":
        spikes = qdata.SpikeParams(
            rate=da.spike_rate,
            duration=tuple(da.spike_duration),
            amplitude=tuple(da.spike_amplitude),
            rate_spread=da.spike_rate_spread,
            min_spikes=da.spike_min,
        )
        return {
            "X": qdata.gen_gaussian(da.m, da.p, da.noise_std, derive_seed(seed, "X"), name="X"),
            "F": qdata.gen_gaussian(da.m, da.p, da.noise_std, derive_seed(seed, "F"), name="F"),
            "G": qdata.gen_spikes(da.m, da.p, da.noise_std, spikes, derive_seed(seed, "G"), name="G"),
            "H": qdata.gen_sine_added(da.m, da.p, da.noise_std, derive_seed(seed, "H"), name="H"),
        }
    if preset == "sinusoids":
        test_seed = derive_seed(seed, "tests")
        return {
            "train": qdata.gen_noisy_sinusoids(
                da.sinusoid_train_count, derive_seed(seed, "train"), name="train"
            ),
            "R": qdata.gen_sinusoid_tests("R", test_seed, da.sinusoid_test_count),
            "W": qdata.gen_sinusoid_tests("W", test_seed, da.sinusoid_test_count),
            "Z": qdata.gen_sinusoid_tests("Z", derive_seed(seed, "Z"), da.sinusoid_test_count),
        }
    if preset == "blobs":
        return {
            "blobs": qdata.gen_blobs(
                da.blob_count, da.blob_std, tuple(da.blob_center), derive_seed(seed, "blobs")
            )
        }
    raise ConfigError(f"unknown generate preset {preset!r}; choose from {GENERATE_PRESETS}")


def cmd_generate(args) -> int:
    cfg = resolve_config(args.preset, args.config, args.seed, args.threads)
    if cfg.data.preset is None:
        raise ConfigError("generate needs --preset or data.preset in the config")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sets = _generate_sets(cfg)
    manifest = {
        "format": "qrewind-manifest",
        "version": 1,
        "preset": cfg.data.preset,
        "seed": cfg.seed,
        "config_hash": cfg.hash(),
        "datasets": {},
    }
    for name, ds in sets.items():
        fname = f"{name}.csv"
        qdata.save_csv(ds, out / fname)
        manifest["datasets"][name] = {
            "file": fname,
            "series": ds.m,
            "points": ds.p,
            "features": ds.d,
        }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    print(f"wrote {len(sets)} datasets + manifest.json to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = resolve_config(args.preset, args.config, args.seed, args.threads)
    dataset = _load_dataset(args.data, cfg)
    tc = _train_config(cfg)
    run = multi_restart(dataset, tc, _optimizer_spec(cfg), threads=cfg.threads)
    model = run.best
    model.meta.update(
        {
            "config_hash": cfg.hash(),
            "preset": args.preset,
            "data": Path(args.data).name,
            "restarts": tc.restarts,
            "best_restart": run.best_index,
        }
    )
    out = Path(args.out)
    save_model(model, out)
    traces_path = out.with_suffix(out.suffix + ".traces.jsonl")
    with open(traces_path, "w", encoding="utf-8") as fh:
        for k, res in enumerate(run.results):
            for rec in res.trace.records():
                fh.write(json.dumps({"restart": k, **rec}) + "\n")
    print(
        f"trained {tc.restarts} restart(s); best ref_cost={model.ref_cost:.6g} "
        f"(restart {run.best_index}); model -> {out}, traces -> {traces_path}"
    )
    return 0


def cmd_score(args) -> int:
    cfg = resolve_config(args.preset, args.config, args.seed, args.threads)
    model = load_model(args.model)
    rows = []
    for path in args.data:
        ds = _load_dataset(path, cfg, allow_empty=True)
        if ds is None:
            continue
        rows.extend(
            qeval.score_dataset(ds, model, n_draws=cfg.eval.n_e_score, seed=cfg.seed)
        )
    qeval.write_score_table(
        rows, args.out, comments=[f"config_hash={cfg.hash()}", f"seed={cfg.seed}"]
    )
    print(f"scored {len(rows)} series -> {args.out}")
    return 0


def cmd_score_grid(args) -> int:
    cfg = resolve_config(args.preset, args.config, args.seed, args.threads)
    model = load_model(args.model)
    comments = [f"config_hash={cfg.hash()}", f"seed={cfg.seed}"]
    if args.feature_grid:
        axis = _parse_grid(args.feature_grid)
        grid = qeval.static_score_grid(
            model, axis, axis, t=args.t, n_draws=cfg.eval.n_e_score, seed=cfg.seed
        )
        records = [
            {"f1": float(axis[i]), "f2": float(axis[j]), "score": float(grid[i, j])}
            for i in range(axis.size)
            for j in range(axis.size)
        ]
    else:
        if not (args.t_grid and args.value_grid):
            raise ConfigError("score-grid needs --feature-grid, or --t-grid with --value-grid")
        t_grid = _parse_grid(args.t_grid)
        v_grid = _parse_grid(args.value_grid)
        grid = qeval.time_value_score_grid(
            model, t_grid, v_grid, n_draws=cfg.eval.n_e_score, seed=cfg.seed
        )
        records = [
            {"t": float(t_grid[i]), "value": float(v_grid[j]), "score": float(grid[i, j])}
            for i in range(t_grid.size)
            for j in range(v_grid.size)
        ]
    qeval.write_records_csv(args.out, records, comments=comments)
    print(f"wrote {len(records)} grid scores -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = resolve_config(args.preset, args.config, args.seed, args.threads)
    rows = []
    for path in args.scores:
        rows.extend(qeval.read_score_table(path))
    normal = [r.score for r in rows if r.dataset == args.normal]
    anomalous = [r.score for r in rows if r.dataset != args.normal]
    if not normal:
        raise DataError(f"no rows from normal dataset {args.normal!r}")
    if not anomalous:
        raise DataError("no rows from any non-normal dataset")
    tuned = qeval.tune_threshold(normal, anomalous)
    report = {
        "format": "qrewind-report",
        "version": 1,
        "config_hash": cfg.hash(),
        "normal_dataset": args.normal,
        "zeta": tuned.zeta,
        "balanced_accuracy": tuned.balanced_accuracy,
        "f1": tuned.f1,
        "confusion": vars(tuned.confusion),
        "per_dataset": {},
    }
    for name in sorted({r.dataset for r in rows if r.dataset != args.normal}):
        scores = [r.score for r in rows if r.dataset == name]
        conf = qeval.confusion_at(normal, scores, tuned.zeta)
        entry = {
            "balanced_accuracy": qeval.balanced_accuracy(conf),
            "f1": qeval.f1(conf),
            "confusion": vars(conf),
        }
        if cfg.eval.close_call_delta > 0:
            entry["close_call_fraction"] = qeval.close_call_fraction(
                scores, tuned.zeta, cfg.eval.close_call_delta
            )
        report["per_dataset"][name] = entry
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    print(
        f"zeta={tuned.zeta:.6g} balanced_accuracy={tuned.balanced_accuracy:.4f} "
        f"f1={tuned.f1:.4f} -> {args.out}"
    )
    return 0


def cmd_sweep(args) -> int:
    cfg = resolve_config(args.preset, args.config, args.seed, args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    comments = [f"config_hash={cfg.hash()}", f"seed={cfg.seed}", f"kind={args.kind}"]
    dataset = _load_dataset(args.data, cfg)
    ev, an = cfg.eval, cfg.ansatz
    from .ansatz import zstring_basis
    from .seeding import rng_from

    n = an.n_qubits if an.n_qubits is not None else max(dataset.d, 2)
    num_strings = zstring_basis(n).size

    if args.kind == "ne":
        from .optimize import random_params

        params_list = [
            random_params(an.layers, n, num_strings, rng_from(cfg.seed, "theta", k))
            for k in range(ev.theta_draws)
        ]
        records = qeval.sweep_ne(
            dataset,
            params_list,
            ev.n_x_list,
            ev.n_e_grid,
            n_t=cfg.train.n_t,
            repeats=ev.repeats,
            tau=cfg.train.tau,
            seed=cfg.seed,
        )
        qeval.write_records_csv(out / "ne_convergence.csv", records, comments=comments)
    elif args.kind == "musigma":
        from .optimize import random_params

        base = random_params(an.layers, n, num_strings, rng_from(cfg.seed, "base"))
        records = qeval.sweep_mu_sigma(
            dataset,
            base,
            np.linspace(ev.mu_min, ev.mu_max, ev.mu_points),
            ev.sigma_list,
            n_x=cfg.train.n_x,
            n_t=cfg.train.n_t,
            n_e=cfg.train.n_e,
            repeats=ev.repeats,
            tau=cfg.train.tau,
            seed=cfg.seed,
        )
        qeval.write_records_csv(out / "mu_sigma_landscape.csv", records, comments=comments)
    elif args.kind == "tau":
        records = qeval.sweep_tau(
            dataset,
            ev.tau_list,
            grid_points=ev.grid_points,
            cfg=_train_config(cfg),
            opt=_optimizer_spec(cfg),
            level=ev.level,
            n_draws=ev.n_e_score,
            seed=cfg.seed,
            threads=cfg.threads,
        )
        summary = [{"tau": r["tau"], "area_fraction": r["area_fraction"]} for r in records]
        qeval.write_records_csv(out / "tau_areas.csv", summary, comments=comments)
        for r in records:
            axis, grid = r["axis"], r["grid"]
            rows = [
                {"f1": float(axis[i]), "f2": float(axis[j]), "score": float(grid[i, j])}
                for i in range(axis.size)
                for j in range(axis.size)
            ]
            tag = f"{r['tau']:g}".replace(".", "p")
            qeval.write_records_csv(out / f"tau_grid_{tag}.csv", rows, comments=comments)
            save_model(r["model"], out / f"tau_model_{tag}.json")
    elif args.kind == "optimizers":
        records = qeval.benchmark_optimizers(
            dataset,
            _train_config(cfg),
            methods=("powell", "nelder-mead"),
            threads=cfg.threads,
            opt=_optimizer_spec(cfg),
        )
        qeval.write_records_csv(out / "optimizer_traces.csv", records, comments=comments)
    else:
        raise ConfigError(f"unknown sweep kind {args.kind!r}")
    print(f"sweep {args.kind} -> {out}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--preset", help="built-in configuration preset")
    p.add_argument("--seed", type=int, help="base seed (overrides config)")
    p.add_argument("--threads", type=int, help="worker processes for restarts")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qrewind",
        description="Train and apply rewinding-operator anomaly detection models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a preset's datasets as CSV + manifest")
    _add_common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train a model on a dataset CSV")
    _add_common(p)
    p.add_argument("--data", required=True, help="training dataset CSV")
    p.add_argument("--out", required=True, help="output model JSON path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score datasets with a trained model")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, nargs="+", help="dataset CSVs to score")
    p.add_argument("--out", required=True, help="output score table CSV")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("score-grid", help="time-resolved or static score grids")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--t-grid", help="'lo:hi:num' time grid (univariate models)")
    p.add_argument("--value-grid", help="'lo:hi:num' feature value grid")
    p.add_argument("--feature-grid", help="'lo:hi:num' per-axis grid (static models)")
    p.add_argument("--t", type=float, default=1.0, help="time point for --feature-grid")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score_grid)

    p = sub.add_parser("evaluate", help="tune a threshold and report metrics")
    _add_common(p)
    p.add_argument("--scores", required=True, nargs="+", help="score table CSVs")
    p.add_argument("--normal", required=True, help="dataset name treated as normal")
    p.add_argument("--out", required=True, help="output report JSON")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="run a sweep experiment")
    _add_common(p)
    p.add_argument("--kind", required=True, choices=("ne", "musigma", "tau", "optimizers"))
    p.add_argument("--data", required=True, help="input dataset CSV")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()

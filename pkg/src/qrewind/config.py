"""Declarative run configuration for the CLI.

A config document is a nested mapping with sections ``data``, ``ansatz``,
``train`` and ``eval`` plus top-level ``seed``/``threads``.  Values merge
with precedence: CLI flag > environment (``QREWIND_*``) > config file >
preset > built-in default.  Unknown keys are rejected before any compute,
and every output embeds the hash of the fully resolved document.

Environment overrides use ``QREWIND_<KEY>`` for top-level keys and
``QREWIND_<SECTION>__<KEY>`` for section keys, with JSON-encoded values
(bare strings also accepted), e.g. ``QREWIND_TRAIN__N_E=20``.
"""

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ConfigError

ENV_PREFIX = "QREWIND_"


@dataclass
class DataSection:
    preset: str | None = None
    m: int = 50
    p: int = 50
    noise_std: float = 0.1
    spike_rate: float = 0.12
    spike_duration: tuple = (1, 10)
    spike_amplitude: tuple = (0.7, 3.0)
    spike_rate_spread: float = 0.8
    spike_min: int = 1
    sinusoid_train_count: int = 100
    sinusoid_test_count: int = 50
    blob_count: int = 100
    blob_std: float = float(np.pi / 4)
    blob_center: tuple = (float(3 * np.pi / 2), float(3 * np.pi / 2))
    rescale: bool = False


@dataclass
class AnsatzSection:
    layers: int = 1
    n_qubits: int | None = None  # default: max(feature dim, 2)


@dataclass
class TrainSection:
    method: str = "powell"
    n_x: int = 5
    n_t: int = 10
    n_e: int = 10
    tau: float = 5.0
    restarts: int = 1
    iterations: int = 1000
    cost_tolerance: float = 0.0
    initial_step: float = 0.5
    line_tolerance: float = 1e-4
    line_evals: int = 64
    scale: float = 4.0
    n_e_ref: int = 100
    init_angles: tuple = (0.0, float(2 * np.pi))
    init_mu: tuple = (-1.0, 1.0)
    init_sigma: tuple = (0.0, 0.5)
    init_eta0: tuple = (-1.0, 1.0)


@dataclass
class EvalSection:
    n_e_score: int = 100
    grid_points: int = 60
    level: float = 0.01
    tau_list: tuple = (0.5, 1.0, 3.0, 5.0, 6.0, 8.0, 10.0, 20.0)
    n_e_grid: tuple = (1, 10, 100)
    n_x_list: tuple = (1, 5, 10)
    theta_draws: int = 6
    repeats: int = 100
    mu_min: float = -2.0
    mu_max: float = 2.0
    mu_points: int = 41
    sigma_list: tuple = (0.0, 0.1, 0.5, 1.0)
    close_call_delta: float = 0.0
    pd_window: int = 285
    pd_step: int = 1


@dataclass
class RunConfig:
    seed: int = 0
    threads: int = 1
    data: DataSection = field(default_factory=DataSection)
    ansatz: AnsatzSection = field(default_factory=AnsatzSection)
    train: TrainSection = field(default_factory=TrainSection)
    eval: EvalSection = field(default_factory=EvalSection)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def hash(self) -> str:
        doc = json.dumps(self.to_dict(), sort_keys=True, default=_canonical)
        return hashlib.sha256(doc.encode("utf-8")).hexdigest()[:16]


def _canonical(obj):
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not serializable: {obj!r}")


# Built-in presets.  Partial documents merged over the defaults; generate
# presets carry a ``data`` section, train presets carry ansatz/train knobs,
# and the set presets (didactic/sinusoids/blobs) carry both so one name
# configures the whole experiment.
PRESETS: dict = {
    "didactic": {
        "data": {"preset": "didactic", "m": 50, "p": 50, "noise_std": 0.1},
        "ansatz": {"layers": 1, "n_qubits": 2},
        "train": {
            "method": "powell",
            "n_x": 5,
            "n_t": 10,
            "n_e": 10,
            "tau": 5.0,
            "iterations": 1000,
            "restarts": 20,
        },
    },
    "sinusoids": {
        "data": {"preset": "sinusoids"},
        "ansatz": {"layers": 3, "n_qubits": 2},
        "train": {
            "method": "powell",
            "n_x": 5,
            "n_t": 10,
            "n_e": 10,
            "tau": 20.0,
            "iterations": 200,
            "restarts": 3,
        },
    },
    "blobs": {
        "data": {"preset": "blobs"},
        "ansatz": {"layers": 3, "n_qubits": 2},
        "train": {
            "method": "powell",
            "n_x": 10,
            "n_t": 1,
            "n_e": 10,
            "tau": 5.0,
            "iterations": 2000,
            "restarts": 5,
            "line_evals": 16,
        },
    },
    "bivariate": {
        "data": {"rescale": True},
        "ansatz": {"layers": 3, "n_qubits": 2},
        "train": {
            "method": "powell",
            "n_x": 10,
            "n_t": 10,
            "n_e": 10,
            "tau": 5.0,
            "iterations": 2000,
            "restarts": 5,
        },
    },
    "trivariate": {
        "data": {"rescale": True},
        "ansatz": {"layers": 3, "n_qubits": 3},
        "train": {
            "method": "powell",
            "n_x": 10,
            "n_t": 10,
            "n_e": 10,
            "tau": 5.0,
            "iterations": 2000,
            "restarts": 5,
        },
    },
}
PRESETS["univariate"] = PRESETS["didactic"]


_SECTIONS = {"data": DataSection, "ansatz": AnsatzSection, "train": TrainSection, "eval": EvalSection}


def _coerce(value, target_type, path):
    if value is None:
        return None
    if target_type is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean, got {value!r}")
        return value
    if target_type is int:
        if isinstance(value, bool) or (not isinstance(value, (int, np.integer))):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return int(value)
    if target_type is float:
        if isinstance(value, bool) or not isinstance(value, (int, float, np.floating)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if target_type is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if target_type is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: expected a list, got {value!r}")
        return tuple(value)
    return value


def _field_type(f):
    t = f.type
    if t in ("int", int):
        return int
    if t in ("float", float):
        return float
    if t in ("str", str):
        return str
    if t in ("bool", bool):
        return bool
    if t in ("tuple", tuple):
        return tuple
    if "int" in str(t):
        return int
    if "str" in str(t):
        return str
    return None


def _apply_section(obj, updates: dict, section: str):
    known = {f.name: f for f in fields(obj)}
    for key, value in updates.items():
        if key not in known:
            raise ConfigError(f"unknown config key {section}.{key}")
        t = _field_type(known[key])
        setattr(obj, key, _coerce(value, t, f"{section}.{key}") if t else value)


def merge_config(base: RunConfig, doc: dict, origin: str = "config") -> RunConfig:
    """Apply a (partial) nested document onto ``base`` in place, rejecting
    unknown sections and keys."""
    for key, value in doc.items():
        if key in ("seed", "threads"):
            setattr(base, key, _coerce(value, int, key))
        elif key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"{origin}: section {key!r} must be a mapping")
            _apply_section(getattr(base, key), value, key)
        else:
            raise ConfigError(f"{origin}: unknown config key {key!r}")
    return base


def _env_overrides() -> dict:
    doc: dict = {}
    for name, raw in sorted(os.environ.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX) :].lower()
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        if "__" in key:
            section, sub = key.split("__", 1)
            doc.setdefault(section, {})[sub] = value
        elif key in ("seed", "threads"):
            doc[key] = value
        elif key in ("preset", "out"):
            continue  # consumed by the CLI argument layer
        else:
            raise ConfigError(f"unknown environment override {name}")
    return doc


def resolve_config(
    preset: str | None = None,
    config_path=None,
    seed: int | None = None,
    threads: int | None = None,
    use_env: bool = True,
) -> RunConfig:
    """Build the effective RunConfig from preset, file, env and flags."""
    cfg = RunConfig()
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(
                f"unknown preset {preset!r}; available: {', '.join(sorted(PRESETS))}"
            )
        merge_config(cfg, PRESETS[preset], origin=f"preset {preset!r}")
    if config_path is not None:
        try:
            with open(config_path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{config_path}: invalid JSON ({exc})") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{config_path}: top level must be a mapping")
        merge_config(cfg, doc, origin=str(config_path))
    if use_env:
        merge_config(cfg, _env_overrides(), origin="environment")
    if seed is not None:
        cfg.seed = int(seed)
    if threads is not None:
        cfg.threads = int(threads)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    tr, ev, da = cfg.train, cfg.eval, cfg.data
    checks = [
        (tr.n_x >= 1, "train.n_x must be >= 1"),
        (tr.n_t >= 1, "train.n_t must be >= 1"),
        (tr.n_e >= 1, "train.n_e must be >= 1"),
        (tr.iterations >= 1, "train.iterations must be >= 1"),
        (tr.restarts >= 1, "train.restarts must be >= 1"),
        (tr.tau >= 0, "train.tau must be >= 0"),
        (tr.scale > 0, "train.scale must be > 0"),
        (tr.n_e_ref >= 1, "train.n_e_ref must be >= 1"),
        (tr.method in ("powell", "nelder-mead"), f"unknown train.method {tr.method!r}"),
        (cfg.ansatz.layers >= 1, "ansatz.layers must be >= 1"),
        (cfg.threads >= 1, "threads must be >= 1"),
        (da.m >= 1 and da.p >= 1, "data.m and data.p must be >= 1"),
        (da.noise_std >= 0, "data.noise_std must be >= 0"),
        (0 <= da.spike_rate < 1, "data.spike_rate must lie in [0, 1)"),
        (ev.n_e_score >= 1, "eval.n_e_score must be >= 1"),
        (ev.grid_points >= 2, "eval.grid_points must be >= 2"),
        (ev.repeats >= 2, "eval.repeats must be >= 2"),
        (ev.pd_window >= 1 and ev.pd_step >= 1, "eval.pd_window/pd_step must be >= 1"),
    ]
    for ok, msg in checks:
        if not ok:
            raise ConfigError(msg)

"""Exact dense statevector engine for small qubit registers.

Amplitude layout: for an ``n``-qubit state the basis index ``b`` encodes
qubit 0 as the *most significant* bit, i.e. ``|q0 q1 ... q_{n-1}>`` maps to
``b = q0*2^{n-1} + ... + q_{n-1}``.  This convention is fixed here once and
used by every consumer; mixing conventions is the classic way to get
silently wrong expectation values.

All gate operations return a new :class:`Statevector`; callers may treat
states as immutable.  Module-private ``_*_batch`` kernels operate on
``(batch, 2**n)`` amplitude arrays and are the fast path used by the model
layer; the public single-state operations are thin wrappers around them so
there is exactly one implementation of each gate.

Supported register sizes are 1..12 qubits (the algorithms in this package
use 1-3; 12 keeps the dense representation comfortably in memory).
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError

MAX_QUBITS = 12

_NORM_TOL = 1e-9


@dataclass
class Statevector:
    """Pure state of ``n`` qubits as a dense complex amplitude vector.

    Attributes:
        n: qubit count, 1 <= n <= 12.
        amps: complex128 array of length ``2**n``; squared magnitudes sum
            to 1 within 1e-9.
    """

    n: int
    amps: np.ndarray

    def __post_init__(self):
        self.amps = np.asarray(self.amps, dtype=np.complex128)
        if self.amps.shape != (2**self.n,):
            raise ValueError(
                f"amplitude vector has shape {self.amps.shape}, expected ({2**self.n},)"
            )

    @property
    def dim(self) -> int:
        return 2**self.n

    def norm_error(self) -> float:
        """|sum |amps|^2 - 1|, useful in invariant checks."""
        return abs(float(np.sum(np.abs(self.amps) ** 2)) - 1.0)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2


@dataclass(frozen=True)
class ShotConfig:
    """Measurement budget for sampled expectation values.

    ``shots`` is a positive integer, or the string ``"exact"`` to bypass
    sampling entirely.  ``seed`` makes sampled estimates reproducible.
    """

    shots: int | str
    seed: int = 0

    def __post_init__(self):
        if self.shots != "exact":
            if not isinstance(self.shots, (int, np.integer)) or self.shots < 1:
                raise ValueError(f"shots must be >= 1 or 'exact', got {self.shots!r}")


# ---------------------------------------------------------------------------
# cached basis tables


@lru_cache(maxsize=None)
def z_signs(n: int, qubit: int) -> np.ndarray:
    """Per-basis-state sign of sigma_z on `qubit`: +1 if the bit is 0, else -1."""
    b = np.arange(2**n)
    signs = 1.0 - 2.0 * ((b >> (n - 1 - qubit)) & 1)
    signs.flags.writeable = False
    return signs


@lru_cache(maxsize=None)
def _mean_z_table(n: int) -> np.ndarray:
    table = np.mean([z_signs(n, q) for q in range(n)], axis=0)
    table.flags.writeable = False
    return table


@lru_cache(maxsize=None)
def _cnot_perm(n: int, control: int, target: int) -> np.ndarray:
    b = np.arange(2**n)
    ctrl = (b >> (n - 1 - control)) & 1
    perm = b ^ (ctrl << (n - 1 - target))
    perm.flags.writeable = False
    return perm


# ---------------------------------------------------------------------------
# batch kernels (amps: (..., 2**n) complex arrays)


def _apply_1q_batch(amps: np.ndarray, n: int, qubit: int, mat: np.ndarray) -> np.ndarray:
    """Apply a 2x2 matrix to one qubit of a batch of states.

    ``mat`` is either a shared ``(2, 2)`` matrix or a per-state batch of
    shape ``(batch, 2, 2)``.
    """
    batch = amps.shape[0]
    left = 2**qubit
    right = 2 ** (n - 1 - qubit)
    a = amps.reshape(batch, left, 2, right)
    if mat.ndim == 2:
        out = np.einsum("ij,bljr->blir", mat, a)
    else:
        out = np.einsum("bij,bljr->blir", mat, a)
    return out.reshape(batch, -1)


def _permute_batch(amps: np.ndarray, perm: np.ndarray) -> np.ndarray:
    return amps[:, perm]


def _diagonal_batch(amps: np.ndarray, phases: np.ndarray) -> np.ndarray:
    """Multiply amplitudes by exp(-i*phases); phases broadcasts over the batch."""
    return amps * np.exp(-1j * phases)


def _mean_z_batch(amps: np.ndarray, n: int) -> np.ndarray:
    probs = np.abs(amps) ** 2
    return probs @ _mean_z_table(n)


def _ry_mats(angles: np.ndarray) -> np.ndarray:
    """Batch of R_y matrices, shape ``angles.shape + (2, 2)``."""
    angles = np.asarray(angles, dtype=float)
    c = np.cos(angles / 2.0)
    s = np.sin(angles / 2.0)
    mats = np.empty(angles.shape + (2, 2), dtype=np.complex128)
    mats[..., 0, 0] = c
    mats[..., 0, 1] = -s
    mats[..., 1, 0] = s
    mats[..., 1, 1] = c
    return mats


def _rot_mat(phi: float, theta: float, omega: float) -> np.ndarray:
    """General rotation R_z(omega) @ R_y(theta) @ R_z(phi)."""
    c = np.cos(theta / 2.0)
    s = np.sin(theta / 2.0)
    ep = np.exp(-0.5j * (phi + omega))
    em = np.exp(0.5j * (phi - omega))
    return np.array(
        [[ep * c, -em * s], [np.conj(em) * s, np.conj(ep) * c]], dtype=np.complex128
    )


# ---------------------------------------------------------------------------
# public single-state operations


def init_zero(n: int) -> Statevector:
    """All-zeros register |0...0> on ``n`` qubits.

    Raises:
        ConfigError: if ``n`` is outside 1..12.
    """
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_QUBITS:
        raise ConfigError(f"qubit count must be in 1..{MAX_QUBITS}, got {n!r}")
    amps = np.zeros(2**n, dtype=np.complex128)
    amps[0] = 1.0
    return Statevector(int(n), amps)


def _check_qubit(state: Statevector, qubit: int, what: str = "qubit") -> None:
    if not 0 <= qubit < state.n:
        raise IndexError(f"{what} index {qubit} out of range for n={state.n}")


def apply_ry(state: Statevector, qubit: int, angle: float) -> Statevector:
    """Rotate ``qubit`` about Y by ``angle`` (radians)."""
    _check_qubit(state, qubit)
    mat = _ry_mats(np.asarray(angle, dtype=float))
    out = _apply_1q_batch(state.amps[None, :], state.n, qubit, mat)
    return Statevector(state.n, out[0])


def apply_rot(
    state: Statevector, qubit: int, phi: float, theta: float, omega: float
) -> Statevector:
    """Apply the general rotation R_z(omega) R_y(theta) R_z(phi) to ``qubit``.

    The z-y-z order is the package-wide rotation convention; its inverse is
    ``apply_rot(q, -omega, -theta, -phi)``.
    """
    _check_qubit(state, qubit)
    out = _apply_1q_batch(state.amps[None, :], state.n, qubit, _rot_mat(phi, theta, omega))
    return Statevector(state.n, out[0])


def apply_cnot(state: Statevector, control: int, target: int) -> Statevector:
    """Flip ``target`` on basis states whose ``control`` bit is 1."""
    _check_qubit(state, control, "control")
    _check_qubit(state, target, "target")
    if control == target:
        raise ValueError("control and target must differ")
    out = _permute_batch(state.amps[None, :], _cnot_perm(state.n, control, target))
    return Statevector(state.n, out[0])


def apply_diagonal(state: Statevector, phases: np.ndarray) -> Statevector:
    """Multiply each amplitude by ``exp(-i * phases[b])``.

    ``phases`` must have length ``2**n``; the operation is exactly
    norm-preserving.
    """
    phases = np.asarray(phases, dtype=float)
    if phases.shape != (state.dim,):
        raise ValueError(f"phase vector has shape {phases.shape}, expected ({state.dim},)")
    out = _diagonal_batch(state.amps[None, :], phases[None, :])
    return Statevector(state.n, out[0])


def expectation_mean_z(state: Statevector) -> float:
    """Exact qubit-averaged Pauli-Z expectation, (1/n) sum_i <sigma_z^i>.

    Always in [-1, 1]: +1 for |0...0>, -1 for |1...1>.
    """
    return float(_mean_z_batch(state.amps[None, :], state.n)[0])


def sample_mean_z(state: Statevector, cfg: ShotConfig) -> float:
    """Shot-sampled estimate of :func:`expectation_mean_z`.

    Draws ``cfg.shots`` basis states from the Born distribution with a
    generator seeded by ``cfg.seed``; identical seeds give bit-identical
    estimates.  ``shots="exact"`` returns the exact value.
    """
    if cfg.shots == "exact":
        return expectation_mean_z(state)
    probs = state.probabilities()
    probs = probs / probs.sum()
    rng = np.random.default_rng(cfg.seed)
    draws = rng.choice(state.dim, size=int(cfg.shots), p=probs)
    return float(np.mean(_mean_z_table(state.n)[draws]))

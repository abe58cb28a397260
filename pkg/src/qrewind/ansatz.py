"""Circuit building blocks for the rewinding model.

Three pieces compose the learnable time-devolution operator:

* an angle embedding that loads one time-point of a feature vector into a
  register via per-qubit Y rotations (idle padding qubits stay |0>),
* a layered trainable circuit playing the role of the eigenvector basis of
  the generator (per-qubit z-y-z rotations followed by a CNOT ring), and
* a diagonal unitary whose phases grow linearly in time with trainable
  rates expanded over the Pauli-Z string basis.

``rewind`` composes them as ``basis^-1 . diagonal(t) . basis``, which
reaches any time ``t`` in fixed depth.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import numpy as np

from .errors import ConfigError
from .statevec import (
    MAX_QUBITS,
    Statevector,
    _apply_1q_batch,
    _diagonal_batch,
    z_signs,
)


@dataclass(frozen=True)
class EmbeddingSpec:
    """Feature-to-register layout: ``d`` features on ``n >= d`` qubits."""

    d: int
    n: int

    def __post_init__(self):
        if not 1 <= self.d <= self.n:
            raise ConfigError(f"need 1 <= d <= n, got d={self.d}, n={self.n}")
        if self.n > MAX_QUBITS:
            raise ConfigError(f"n={self.n} exceeds the supported maximum {MAX_QUBITS}")


@dataclass
class EigenbasisCircuit:
    """Angles of the layered entangling circuit used as the eigenvector basis.

    ``angles`` has shape (layers, n, 3); each triple parameterizes the
    z-y-z rotation on one qubit in one layer.  Entries must be finite.
    """

    angles: np.ndarray

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=float)
        if self.angles.ndim != 3 or self.angles.shape[2] != 3:
            raise ValueError(f"angles must have shape (layers, n, 3), got {self.angles.shape}")
        if not np.all(np.isfinite(self.angles)):
            raise ValueError("angles must be finite")

    @property
    def layers(self) -> int:
        return self.angles.shape[0]

    @property
    def n(self) -> int:
        return self.angles.shape[1]


@dataclass(frozen=True)
class ZStringBasis:
    """All 2**n - 1 nonempty Pauli-Z strings on ``n`` qubits.

    ``strings`` lists the qubit subsets ordered by (cardinality,
    lexicographic) — a fixed tie-break so rate vectors are portable.
    ``sign_table[b, q]`` is the eigenvalue (+-1) of string ``q`` on basis
    state ``b``; the diagonal generator with rate vector ``r`` then has
    eigenvalues ``sign_table @ r``.
    """

    n: int
    strings: tuple = field(compare=False)
    sign_table: np.ndarray = field(compare=False)

    @property
    def size(self) -> int:
        """Number of strings, always 2**n - 1."""
        return len(self.strings)


@lru_cache(maxsize=None)
def zstring_basis(n: int) -> ZStringBasis:
    """Construct (and cache) the Z-string basis for ``n`` qubits."""
    if not 1 <= n <= MAX_QUBITS:
        raise ConfigError(f"qubit count must be in 1..{MAX_QUBITS}, got {n!r}")
    strings = []
    for k in range(1, n + 1):
        strings.extend(combinations(range(n), k))
    cols = []
    for subset in strings:
        col = np.ones(2**n)
        for q in subset:
            col = col * z_signs(n, q)
        cols.append(col)
    table = np.stack(cols, axis=1)
    table.flags.writeable = False
    return ZStringBasis(n=n, strings=tuple(strings), sign_table=table)


# ---------------------------------------------------------------------------
# batch kernels


def _rot_mats(angles: np.ndarray) -> np.ndarray:
    """z-y-z rotation matrices for ``angles[..., (phi, theta, omega)]``."""
    phi = angles[..., 0]
    theta = angles[..., 1]
    omega = angles[..., 2]
    c = np.cos(theta / 2.0)
    s = np.sin(theta / 2.0)
    ep = np.exp(-0.5j * (phi + omega))
    em = np.exp(0.5j * (phi - omega))
    mats = np.empty(angles.shape[:-1] + (2, 2), dtype=np.complex128)
    mats[..., 0, 0] = ep * c
    mats[..., 0, 1] = -em * s
    mats[..., 1, 0] = np.conj(em) * s
    mats[..., 1, 1] = np.conj(ep) * c
    return mats


@lru_cache(maxsize=None)
def _ring_perms(n: int) -> tuple:
    """Basis permutation of the CNOT ring (control q -> target (q+1) mod n)
    and its inverse.  Identity for n == 1."""
    dim = 2**n
    perm = np.arange(dim)
    if n >= 2:
        # new[b] = old[perm[b]]; composing gate maps g0..g_{n-1} applied in
        # order means evaluating g0(g1(...g_{n-1}(b))), so fold from the last
        for q in reversed(range(n)):
            ctrl = (perm >> (n - 1 - q)) & 1
            perm = perm ^ (ctrl << (n - 1 - ((q + 1) % n)))
    inv = np.argsort(perm)
    perm.flags.writeable = False
    inv.flags.writeable = False
    return perm, inv


def _embed_batch(xs: np.ndarray, spec: EmbeddingSpec) -> np.ndarray:
    """Embed rows of ``xs`` (batch, d) into (batch, 2**n) amplitudes."""
    batch = xs.shape[0]
    amps = np.ones((batch, 1), dtype=np.complex128)
    for q in range(spec.n):
        if q < spec.d:
            half = xs[:, q] / 2.0
            col = np.stack([np.cos(half), np.sin(half)], axis=1).astype(np.complex128)
        else:
            col = np.zeros((batch, 2), dtype=np.complex128)
            col[:, 0] = 1.0
        amps = (amps[:, :, None] * col[:, None, :]).reshape(batch, -1)
    return amps


def _eigenbasis_batch(
    amps: np.ndarray, circ: EigenbasisCircuit, adjoint: bool = False
) -> np.ndarray:
    n = circ.n
    perm, inv = _ring_perms(n)
    if not adjoint:
        mats = _rot_mats(circ.angles)
        for layer in range(circ.layers):
            for q in range(n):
                amps = _apply_1q_batch(amps, n, q, mats[layer, q])
            if n >= 2:
                amps = amps[:, perm]
    else:
        # exact inverse sequence: undo each layer's ring, then the rotations
        mats = _rot_mats(-circ.angles[..., ::-1])
        for layer in reversed(range(circ.layers)):
            if n >= 2:
                amps = amps[:, inv]
            for q in reversed(range(n)):
                amps = _apply_1q_batch(amps, n, q, mats[layer, q])
    return amps


def _diag_phases_batch(basis: ZStringBasis, rates: np.ndarray, t) -> np.ndarray:
    """Phase vectors (batch, 2**n) for rate rows ``rates`` at times ``t``."""
    t = np.asarray(t, dtype=float)
    return (rates @ basis.sign_table.T) * t[..., None]


def _rewind_batch(
    amps: np.ndarray,
    circ: EigenbasisCircuit,
    basis: ZStringBasis,
    rates: np.ndarray,
    t,
) -> np.ndarray:
    amps = _eigenbasis_batch(amps, circ)
    amps = _diagonal_batch(amps, _diag_phases_batch(basis, rates, t))
    return _eigenbasis_batch(amps, circ, adjoint=True)


# ---------------------------------------------------------------------------
# public single-state operations


def embed(x: np.ndarray, spec: EmbeddingSpec) -> Statevector:
    """Angle-embed a feature vector: qubit j gets R_y(x[j]), the rest |0>."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (spec.d,):
        raise ValueError(f"feature vector has shape {x.shape}, expected ({spec.d},)")
    return Statevector(spec.n, _embed_batch(x[None, :], spec)[0])


def apply_eigenbasis(
    state: Statevector, circ: EigenbasisCircuit, adjoint: bool = False
) -> Statevector:
    """Apply the layered circuit (or its exact inverse for ``adjoint``).

    Each layer rotates every qubit with its z-y-z triple, then entangles
    with the CNOT ring (skipped on single-qubit registers).
    """
    if circ.n != state.n:
        raise ValueError(f"circuit is for n={circ.n}, state has n={state.n}")
    return Statevector(state.n, _eigenbasis_batch(state.amps[None, :], circ, adjoint)[0])


def diag_phases(basis: ZStringBasis, rates: np.ndarray, t: float) -> np.ndarray:
    """Phases of the diagonal devolution at time ``t``.

    ``phases[b] = t * sum_q rates[q] * sign_table[b, q]``; feeding the result
    to ``apply_diagonal`` realizes ``exp(-i * t * M)`` for the diagonal
    generator ``M`` with those string coefficients.
    """
    rates = np.asarray(rates, dtype=float)
    if rates.shape != (basis.size,):
        raise ValueError(f"rate vector has shape {rates.shape}, expected ({basis.size},)")
    return _diag_phases_batch(basis, rates[None, :], float(t))[0]


def rewind(
    state: Statevector,
    circ: EigenbasisCircuit,
    basis: ZStringBasis,
    rates: np.ndarray,
    t: float,
) -> Statevector:
    """Devolve ``state`` by time ``t``: basis^-1 . diagonal(rates, t) . basis."""
    if circ.n != state.n or basis.n != state.n:
        raise ValueError(
            f"inconsistent sizes: state n={state.n}, circuit n={circ.n}, basis n={basis.n}"
        )
    rates = np.asarray(rates, dtype=float)
    if rates.shape != (basis.size,):
        raise ValueError(f"rate vector has shape {rates.shape}, expected ({basis.size},)")
    out = _rewind_batch(state.amps[None, :], circ, basis, rates[None, :], float(t))
    return Statevector(state.n, out[0])

"""Independent dense-matrix reference implementation used by tests.

Everything here is built from first principles with explicit Kronecker
products and scipy's matrix exponential, deliberately sharing no code with
the package: qubit 0 is the most significant bit, so an operator acting on
qubit q sits at position q in the left-to-right kron chain.
"""

from itertools import combinations

import numpy as np
from scipy.linalg import expm

I2 = np.eye(2, dtype=complex)
ZMAT = np.diag([1.0, -1.0]).astype(complex)


def ry_mat(a):
    c, s = np.cos(a / 2), np.sin(a / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz_mat(a):
    return np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])


def rot_mat(phi, theta, omega):
    return rz_mat(omega) @ ry_mat(theta) @ rz_mat(phi)


def kron_chain(mats):
    out = np.array([[1.0 + 0j]])
    for m in mats:
        out = np.kron(out, m)
    return out


def op_on(mat, q, n):
    return kron_chain([mat if i == q else I2 for i in range(n)])


def cnot_mat(n, control, target):
    dim = 2**n
    out = np.zeros((dim, dim), dtype=complex)
    for b in range(dim):
        if (b >> (n - 1 - control)) & 1:
            b2 = b ^ (1 << (n - 1 - target))
        else:
            b2 = b
        out[b2, b] = 1.0
    return out


def ring_mat(n):
    """CNOT ring, applied control 0 -> 1, 1 -> 2, ..., n-1 -> 0 in order."""
    out = np.eye(2**n, dtype=complex)
    for q in range(n):
        out = cnot_mat(n, q, (q + 1) % n) @ out
    return out


def w_matrix(angles):
    """Dense matrix of the layered circuit: rotations then ring, per layer."""
    layers, n, _ = angles.shape
    out = np.eye(2**n, dtype=complex)
    for layer in range(layers):
        for q in range(n):
            out = op_on(rot_mat(*angles[layer, q]), q, n) @ out
        if n >= 2:
            out = ring_mat(n) @ out
    return out


def z_subsets(n):
    subs = []
    for k in range(1, n + 1):
        subs.extend(combinations(range(n), k))
    return subs


def zstring_mat(subset, n):
    return kron_chain([ZMAT if i in subset else I2 for i in range(n)])


def generator_matrix(rates, n):
    out = np.zeros((2**n, 2**n), dtype=complex)
    for r, subset in zip(rates, z_subsets(n)):
        out += r * zstring_mat(subset, n)
    return out


def devolution_matrix(angles, rates, t, n):
    """W^dagger exp(-i M t) W via scipy's expm."""
    w = w_matrix(angles)
    d = expm(-1j * t * generator_matrix(rates, n))
    return w.conj().T @ d @ w


def embed_state(x, n):
    cols = []
    for q in range(n):
        if q < len(x):
            cols.append(ry_mat(x[q]) @ np.array([1.0, 0.0], dtype=complex))
        else:
            cols.append(np.array([1.0, 0.0], dtype=complex))
    psi = np.array([1.0 + 0j])
    for c in cols:
        psi = np.kron(psi, c)
    return psi


def observable_matrix(eta0, n):
    out = eta0 * np.eye(2**n, dtype=complex)
    for q in range(n):
        out -= op_on(ZMAT, q, n) / n
    return out


def omega_oracle(x, t, angles, rates, eta0, n):
    """Full pipeline expectation by dense linear algebra."""
    psi = devolution_matrix(angles, rates, t, n) @ embed_state(x, n)
    eta_eff = min(1.0, max(-1.0, eta0))
    val = np.vdot(psi, observable_matrix(eta_eff, n) @ psi)
    assert abs(val.imag) < 1e-12
    return float(val.real)

"""Local superoperator algebra in the orthonormal Pauli basis.

Every qubit of the vectorized density matrix carries a 4-dimensional local
space spanned by {I, sigma_x, sigma_y, sigma_z} / sqrt(2).  This basis is
orthonormal under the Hilbert-Schmidt inner product tr(A^dag B), so the
vectorized inner product equals tr(A^dag B) exactly and tr(rho) is
2^(N/2) times the coefficient of the all-identity string.

This module provides the 4x4 matrices that represent left/right operator
multiplication, Hamiltonian commutators and the three dissipative jump
terms in this basis, plus helpers to split two-site superoperators into
sums of one-site factors (the channel form used by the MPO builders).
"""

from __future__ import annotations

import numpy as np

SQRT2 = np.sqrt(2.0)

I2 = np.eye(2, dtype=complex)
SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SY = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SZ = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SP = (SX + 1j * SY) / 2.0
SM = (SX - 1j * SY) / 2.0

PAULIS = (I2, SX, SY, SZ)
AXIS_INDEX = {"i": 0, "x": 1, "y": 2, "z": 3}

# Orthonormal local basis B_a = sigma_a / sqrt(2).
BASIS = tuple(p / SQRT2 for p in PAULIS)
BASIS_SCALE = 1.0 / SQRT2


def left_mult(op: np.ndarray) -> np.ndarray:
    """4x4 matrix of rho -> op @ rho in the orthonormal Pauli basis."""
    m = np.empty((4, 4), dtype=complex)
    for a in range(4):
        for b in range(4):
            m[a, b] = np.trace(BASIS[a].conj().T @ op @ BASIS[b])
    return m


def right_mult(op: np.ndarray) -> np.ndarray:
    """4x4 matrix of rho -> rho @ op in the orthonormal Pauli basis."""
    m = np.empty((4, 4), dtype=complex)
    for a in range(4):
        for b in range(4):
            m[a, b] = np.trace(BASIS[a].conj().T @ BASIS[b] @ op)
    return m


def _real(m: np.ndarray, tol: float = 1e-13) -> np.ndarray:
    if np.abs(m.imag).max() > tol:
        raise ValueError("superoperator expected to be real in the Pauli basis")
    return np.ascontiguousarray(m.real)


def symmetrized_mult(axis: int) -> np.ndarray:
    """P_a = L(sigma_a) + R(sigma_a); real."""
    s = PAULIS[axis]
    return _real(left_mult(s) + right_mult(s))


def adjoint_action(axis: int) -> np.ndarray:
    """Q_a = -i [sigma_a, .]; real."""
    s = PAULIS[axis]
    return _real(-1j * (left_mult(s) - right_mult(s)))


def site_hamiltonian(h_x: float, h_y: float, h_z: float) -> np.ndarray:
    """Generator of -i[H_i, .] for H_i = (h_x sx + h_y sy + h_z sz)/2."""
    m = np.zeros((4, 4))
    for axis, h in ((1, h_x), (2, h_y), (3, h_z)):
        if h != 0.0:
            m += 0.5 * h * adjoint_action(axis)
    return m


def site_dissipator(g_0: float, g_1: float, g_2: float) -> np.ndarray:
    """Generator of the three local jump terms (raising, lowering, dephasing)."""
    m = np.zeros((4, 4), dtype=complex)
    if g_0 != 0.0:
        m += g_0 * (left_mult(SP) @ right_mult(SM)
                    - 0.5 * (left_mult(SM @ SP) + right_mult(SM @ SP)))
    if g_1 != 0.0:
        m += g_1 * (left_mult(SM) @ right_mult(SP)
                    - 0.5 * (left_mult(SP @ SM) + right_mult(SP @ SM)))
    if g_2 != 0.0:
        m += g_2 * (left_mult(SZ) @ right_mult(SZ) - np.eye(4))
    return _real(m)


def bond_channels(j: float, j_z: float) -> list[tuple[np.ndarray, np.ndarray]]:
    """Factorized channels of -i[H_bond, .] for one unordered bond.

    H_bond = j (s+ s- + s- s+) + (j_z / 2) sz sz
           = (j/2)(sx sx + sy sy) + (j_z/2) sz sz.

    Using L = (P + iQ)/2 and R = (P - iQ)/2 per factor,
    -i(L(A)L(B) - R(A)R(B)) = (P(A) Q(B) + Q(A) P(B)) / 2,
    which keeps every channel real.
    """
    chans: list[tuple[np.ndarray, np.ndarray]] = []
    for axis, c in ((1, 0.5 * j), (2, 0.5 * j), (3, 0.5 * j_z)):
        if c == 0.0:
            continue
        p = symmetrized_mult(axis)
        q = adjoint_action(axis)
        chans.append((0.5 * c * p, q))
        chans.append((0.5 * c * q, p))
    return chans


def conjugation_superop_2q(u: np.ndarray) -> np.ndarray:
    """16x16 matrix of rho -> u rho u^dag for a two-qubit unitary u.

    Index layout: row (a_i, a_j), column (b_i, b_j), each in the local
    orthonormal Pauli basis.
    """
    basis2 = [np.kron(BASIS[a], BASIS[b]) for a in range(4) for b in range(4)]
    m = np.empty((16, 16), dtype=complex)
    for r, br in enumerate(basis2):
        lhs = br.conj().T
        for c, bc in enumerate(basis2):
            m[r, c] = np.trace(lhs @ u @ bc @ u.conj().T)
    return m


def split_two_site(m16: np.ndarray, tol: float = 1e-13) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a 16x16 two-site superoperator into sum_r A_r (x) B_r channels.

    Exact up to singular values below `tol` relative to the largest one.
    """
    t = m16.reshape(4, 4, 4, 4).transpose(0, 2, 1, 3).reshape(16, 16)
    u, s, vh = np.linalg.svd(t)
    keep = s > tol * s[0]
    chans = []
    for r in np.nonzero(keep)[0]:
        a = (u[:, r] * s[r]).reshape(4, 4)
        b = vh[r, :].reshape(4, 4)
        chans.append((a, b))
    return chans


CZ = np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex)


def obs_covector(axis: int) -> np.ndarray:
    """Row covector w with w . c_site = tr(rho_site sigma_axis) contribution.

    Contracting one such covector per site against the coefficient MPS yields
    tr(rho P) for the Pauli string P (axis 0 meaning identity).
    """
    w = np.zeros(4)
    w[axis] = SQRT2
    return w

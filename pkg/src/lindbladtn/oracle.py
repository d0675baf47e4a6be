"""Dense brute-force integrator of the same Lindbladian, for N <= 10.

Ground truth for the tensor-network engine: the full 2^N x 2^N density
matrix is stored and evolved with an adaptive explicit Runge-Kutta scheme.
The generator is applied matrix-free (sparse Hamiltonian products and
per-site jump terms); the 4^N x 4^N superoperator is never materialized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.integrate import DOP853

from .model import Lattice, ModelParams
from .observables import ObservableRequest, TrajectoryRecord
from .superop import BASIS, PAULIS, SM, SP, SZ

MAX_ORACLE_QUBITS = 10

DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-11


class ResourceGuardError(RuntimeError):
    """Request exceeds the dense oracle's hard size limits."""


@dataclass
class DenseState:
    """Full density matrix; Hermitian and unit trace up to integration error."""

    rho: np.ndarray

    @property
    def n_qubits(self) -> int:
        return int(round(np.log2(self.rho.shape[0])))


def _guard(n: int) -> None:
    if n > MAX_ORACLE_QUBITS:
        raise ResourceGuardError(
            f"dense oracle is limited to N <= {MAX_ORACLE_QUBITS}, got {n}")


def _embed(op: np.ndarray, n: int, i: int) -> sp.csr_matrix:
    mat = sp.identity(2 ** i, format="csr", dtype=complex)
    mat = sp.kron(mat, sp.csr_matrix(op), format="csr")
    mat = sp.kron(mat, sp.identity(2 ** (n - i - 1), format="csr"), format="csr")
    return mat


class DenseGenerator:
    """Precompiled right-hand side of the master equation."""

    def __init__(self, lattice: Lattice, params: ModelParams):
        params.validate(lattice)
        n = lattice.n_qubits
        _guard(n)
        self.n = n
        dim = 2 ** n
        h = sp.csr_matrix((dim, dim), dtype=complex)
        for i in range(n):
            for axis, val in ((1, params.h_x[i]), (2, params.h_y[i]), (3, params.h_z[i])):
                if val != 0.0:
                    h = h + 0.5 * val * _embed(PAULIS[axis], n, i)
        seen = set()
        for (i, j) in zip(*np.nonzero(params.j + params.j_z)):
            key = (min(i, j), max(i, j))
            if key in seen:
                continue
            seen.add(key)
            a, b = key
            jv, jz = params.j[a, b], params.j_z[a, b]
            if jv != 0.0:
                h = h + jv * (_embed(SP, n, a) @ _embed(SM, n, b)
                              + _embed(SM, n, a) @ _embed(SP, n, b))
            if jz != 0.0:
                h = h + 0.5 * jz * (_embed(SZ, n, a) @ _embed(SZ, n, b))
        self.h = h
        self.jumps = []
        for i in range(n):
            for op, g in ((SP, params.g_0[i]), (SM, params.g_1[i])):
                if g != 0.0:
                    a = _embed(op, n, i)
                    ad = a.conj().T.tocsr()
                    self.jumps.append((g, a, ad, (ad @ a).tocsr()))
        self.dephasing = [(params.g_2[i], _embed(SZ, n, i))
                          for i in range(n) if params.g_2[i] != 0.0]

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """drho/dt = -i[H, rho] + D[rho], never forming the superoperator."""
        h = self.h
        out = -1j * (h @ rho - (h @ rho.conj().T).conj().T)
        for (g, a, ad, ada) in self.jumps:
            ar = a @ rho
            out += g * ((ad.conj().T @ ar.conj().T).conj().T
                        - 0.5 * (ada @ rho + (ada.conj().T @ rho.conj().T).conj().T))
        for (g, z) in self.dephasing:
            zr = z @ rho
            out += g * ((z.conj().T @ zr.conj().T).conj().T - rho)
        return out


def dense_generator_apply(params: ModelParams, lattice: Lattice,
                          rho: DenseState | np.ndarray) -> np.ndarray:
    """One generator application; builds the compiled form on the fly."""
    mat = rho.rho if isinstance(rho, DenseState) else np.asarray(rho, dtype=complex)
    return DenseGenerator(lattice, params).apply(mat)


def _integrate(gen: DenseGenerator, rho0: np.ndarray, t0: float, t1: float,
               output_times, callback, rtol: float, atol: float) -> np.ndarray:
    dim = rho0.shape[0]
    y0 = np.ascontiguousarray(rho0, dtype=complex).reshape(-1).view(np.float64)

    def rhs(_t, y):
        rho = y.view(np.complex128).reshape(dim, dim)
        return gen.apply(rho).reshape(-1).view(np.float64)

    pending = list(output_times)
    for t in pending:
        if t < t0 - 1e-12 or t > t1 + 1e-12:
            raise ValueError("output time outside the integration window")
    idx = 0
    while idx < len(pending) and pending[idx] <= t0 + 1e-12:
        callback(pending[idx], rho0.copy())
        idx += 1
    if idx >= len(pending) and t1 <= t0:
        return rho0
    solver = DOP853(rhs, t0, y0, t_bound=t1, rtol=rtol, atol=atol)
    while solver.status == "running":
        msg = solver.step()
        if solver.status == "failed":
            raise RuntimeError(f"dense integration failed: {msg}")
        while idx < len(pending) and pending[idx] <= solver.t + 1e-12:
            t_out = pending[idx]
            if t_out >= solver.t_old - 1e-12:
                y = solver.dense_output()(min(max(t_out, solver.t_old), solver.t))
            else:
                raise RuntimeError("output time fell behind the integrator")
            callback(t_out, y.view(np.complex128).reshape(dim, dim).copy())
            idx += 1
        if idx >= len(pending):
            break
    return None


def dense_evolve(params: ModelParams, lattice: Lattice, rho0, t0: float, t1: float,
                 rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                 t_eval=None) -> list[tuple[float, DenseState]]:
    """Adaptive integration returning dense states at the requested times
    (default: just the final time)."""
    gen = DenseGenerator(lattice, params)
    mat = rho0.rho if isinstance(rho0, DenseState) else np.asarray(rho0, dtype=complex)
    times = [t1] if t_eval is None else list(t_eval)
    if len(times) * 4 ** gen.n > 2 ** 28:
        raise ResourceGuardError("trajectory would not fit in memory; "
                                 "use dense_record for streaming extraction")
    out: list[tuple[float, DenseState]] = []
    _integrate(gen, mat, t0, t1, times,
               lambda t, rho: out.append((t, DenseState(rho))), rtol, atol)
    return out


class DenseObservables:
    """Observable extraction mirroring the tensor-network contracts."""

    def __init__(self, n: int):
        self.n = n

    def reduced(self, rho: np.ndarray, sites: tuple) -> np.ndarray:
        n = self.n
        keep = list(sites)
        t = rho.reshape((2,) * (2 * n))
        traced = [i for i in range(n) if i not in keep]
        for i in sorted(traced, reverse=True):
            t = np.trace(t, axis1=i, axis2=t.ndim // 2 + i)
        order = np.argsort(np.argsort(keep))  # current axes are sorted(keep)
        k = len(keep)
        t = t.transpose(list(order) + [k + o for o in order])
        return t.reshape(2 ** k, 2 ** k)

    def expect_1q(self, rho: np.ndarray, i: int, axis: int) -> complex:
        r = self.reduced(rho, (i,))
        return complex(np.trace(PAULIS[axis] @ r))

    def expect_2q(self, rho: np.ndarray, i: int, j: int, a: int, b: int) -> complex:
        r = self.reduced(rho, (i, j))
        return complex(np.trace(np.kron(PAULIS[a], PAULIS[b]) @ r))

    def purity(self, rho: np.ndarray) -> float:
        return float(np.einsum("ij,ji->", rho, rho).real)

    def pauli_coefficients(self, rho: np.ndarray) -> np.ndarray:
        """Coefficient tensor of rho over the orthonormal Pauli basis (4^N)."""
        n = self.n
        u = np.stack([BASIS[a].conj().T for a in range(4)])  # u[a, c, r] = conj(B_a[r, c])
        t = rho.reshape((2,) * (2 * n))
        for i in range(n):
            # site i's row axis sits at 0, its column axis at (n - i)
            t = np.tensordot(u, t, axes=([2, 1], [0, n - i]))
            t = np.moveaxis(t, 0, -1)  # accumulated coefficient axes stay in site order
        return t.reshape(-1)

    def osee(self, rho: np.ndarray, bond: int) -> float:
        c = self.pauli_coefficients(rho)
        nrm = np.linalg.norm(c)
        if nrm == 0:
            return 0.0
        mat = (c / nrm).reshape(4 ** (bond + 1), -1)
        s = np.linalg.svd(mat, compute_uv=False)
        p = s * s
        p = p[p > 0]
        p = p / p.sum()
        return float(-np.sum(p * np.log(p)))


def dense_record(params: ModelParams, lattice: Lattice, rho0, t0: float, t1: float,
                 request: ObservableRequest, output_times,
                 rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> TrajectoryRecord:
    """Stream observables at the given times without storing the trajectory."""
    gen = DenseGenerator(lattice, params)
    obs = DenseObservables(gen.n)
    mat = rho0.rho if isinstance(rho0, DenseState) else np.asarray(rho0, dtype=complex)
    from .observables import _axis_index

    times: list[float] = []
    acc_one: dict = {}
    acc_two: dict = {}
    acc_glob: dict = {"trace": []}
    acc_diag: dict = {"max_imag": []}
    if request.s2:
        acc_glob["s2"] = []
    if request.osee:
        acc_glob["osee_center"] = []
    if request.arm_pairs:
        acc_diag["arm_asym"] = []
    osee_bond = request.osee_bond if request.osee_bond is not None else gen.n // 2 - 1

    def callback(t: float, rho: np.ndarray) -> None:
        times.append(t)
        imags = []
        tr = complex(np.trace(rho))
        acc_glob["trace"].append(tr.real)
        imags.append(abs(tr.imag))
        cache_1q: dict = {}

        def one(i, ax):
            if (i, ax) not in cache_1q:
                cache_1q[(i, ax)] = obs.expect_1q(rho, i, ax)
            return cache_1q[(i, ax)]

        for (i, a) in request.one_q:
            v = one(i, _axis_index(a))
            acc_one.setdefault((i, a.upper()), []).append(v.real)
            imags.append(abs(v.imag))
        for (i, j, a, b) in request.two_q:
            v = obs.expect_2q(rho, i, j, _axis_index(a), _axis_index(b))
            acc_two.setdefault((i, j, a.upper(), b.upper()), []).append(v.real)
            imags.append(abs(v.imag))
        if request.s2:
            acc_glob["s2"].append(float(-np.log(obs.purity(rho) / tr.real ** 2)))
        if request.osee:
            acc_glob["osee_center"].append(obs.osee(rho, osee_bond))
        if request.arm_pairs:
            asym = 0.0
            for (i, j) in request.arm_pairs:
                for ax in (1, 2, 3):
                    asym = max(asym, abs(one(i, ax).real - one(j, ax).real))
            acc_diag["arm_asym"].append(asym)
        acc_diag["max_imag"].append(float(max(imags)))

    _integrate(gen, mat, t0, t1, list(output_times), callback, rtol, atol)
    return TrajectoryRecord(
        times=np.asarray(times),
        one_q={k: np.asarray(v) for k, v in acc_one.items()},
        two_q={k: np.asarray(v) for k, v in acc_two.items()},
        globals={k: np.asarray(v) for k, v in acc_glob.items()},
        diagnostics={k: np.asarray(v) for k, v in acc_diag.items()},
    )


def dense_from_vectorized(state) -> DenseState:
    """Rebuild the 2^N x 2^N matrix from a vectorized MPS (test sizes)."""
    from . import tensor_core as tc
    n = len(state)
    _guard(n)
    t = tc.to_dense(state, max_sites=MAX_ORACLE_QUBITS).reshape((4,) * n)
    v = np.stack(BASIS)  # v[a, r, c]
    for _ in range(n):
        t = np.tensordot(t, v, axes=(0, 0))  # consumes a_i, appends (r_i, c_i)
    rows = list(range(0, 2 * n, 2))
    cols = list(range(1, 2 * n, 2))
    rho = t.transpose(rows + cols).reshape(2 ** n, 2 ** n)
    return DenseState(rho)

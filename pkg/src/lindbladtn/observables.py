"""Observable extraction from vectorized states.

Expectation values are contractions of the coefficient MPS with product
covectors (sqrt(2) e_axis per site), so tr(rho P) for a Pauli string P costs
O(N D^2).  Batch extraction shares prefix/suffix environments across all
requested observables at one time point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor_core as tc
from .superop import SY, AXIS_INDEX

AXES = "XYZ"


def _axis_index(axis) -> int:
    if isinstance(axis, str):
        try:
            return AXIS_INDEX[axis.lower()]
        except KeyError:
            raise ValueError(f"unknown Pauli axis {axis!r}") from None
    axis = int(axis)
    if axis not in (1, 2, 3):
        raise ValueError("axis must be x, y or z")
    return axis


@dataclass
class ObservableRequest:
    """What to record at each output time.

    Site indices refer to positions along the state (the MPO path order).
    Empty request still yields trace/norm diagnostics.
    """

    one_q: tuple = ()                 # (site, 'X'|'Y'|'Z')
    two_q: tuple = ()                 # (site_a, site_b, 'X', 'Y')
    trace: bool = True
    s2: bool = False
    osee: bool = False
    osee_bond: int | None = None
    arm_pairs: tuple = ()             # plaquette mirror pairs for the symmetry diagnostic

    @classmethod
    def all_observables(cls, n: int, one_q_axes="XYZ", two_q_axes=None,
                        arm_pairs=()) -> "ObservableRequest":
        one_q = tuple((i, a) for i in range(n) for a in one_q_axes)
        combos = two_q_axes if two_q_axes is not None else [a + b for a in AXES for b in AXES]
        two_q = tuple((i, j, ab[0], ab[1])
                      for i in range(n) for j in range(i + 1, n) for ab in combos)
        return cls(one_q=one_q, two_q=two_q, trace=True, s2=True, osee=True,
                   arm_pairs=tuple(arm_pairs))


@dataclass
class Measurement:
    """Raw complex values measured at one time point."""

    one_q: dict
    two_q: dict
    trace: complex
    s2: float | None
    osee: float | None
    max_imag: float
    arm_asym: float | None


@dataclass
class TrajectoryRecord:
    """Time series of requested observables and global diagnostics."""

    times: np.ndarray = field(default_factory=lambda: np.empty(0))
    one_q: dict = field(default_factory=dict)       # (site, axis) -> array
    two_q: dict = field(default_factory=dict)       # (i, j, a, b) -> array
    globals: dict = field(default_factory=dict)     # trace / s2 / osee_center
    diagnostics: dict = field(default_factory=dict) # max_imag / arm_asym
    final_state: tc.VectorizedState | None = None


def _site_slice(tensor: np.ndarray, axis: int) -> np.ndarray:
    return np.sqrt(2.0) * tensor[:, axis, :]


def _prepare(state: tc.VectorizedState) -> tc.VectorizedState:
    if state.ortho_center is None:
        return tc.canonicalize(state, 0)
    return state


def measure_state(state: tc.VectorizedState, request: ObservableRequest) -> Measurement:
    """Evaluate every requested observable from shared environments."""
    st = _prepare(state)
    n = len(st)
    ts = st.tensors
    idn = [_site_slice(t, 0) for t in ts]
    # prefix[i]: row vector over bond i after contracting identity on sites < i
    prefix = [np.ones((1,), dtype=complex)]
    for i in range(n):
        prefix.append(prefix[-1] @ idn[i])
    suffix = [np.ones((1,), dtype=complex)] * (n + 1)
    suffix[n] = np.ones((1,), dtype=complex)
    for i in range(n - 1, -1, -1):
        suffix[i] = idn[i] @ suffix[i + 1]
    trace = complex(prefix[n][0])

    one_q_axes: dict = {}
    for (i, a) in request.one_q:
        one_q_axes.setdefault(i, set()).add(_axis_index(a))
    arm_sites = set()
    for (i, j) in request.arm_pairs:
        arm_sites.add(i)
        arm_sites.add(j)
    for i in arm_sites:
        one_q_axes.setdefault(i, set()).update((1, 2, 3))

    one_vals: dict = {}
    for i, axes in one_q_axes.items():
        for a in axes:
            v = prefix[i] @ _site_slice(ts[i], a) @ suffix[i + 1]
            one_vals[(i, a)] = complex(v)

    two_req: dict = {}
    for (i, j, a, b) in request.two_q:
        if i == j:
            raise ValueError("two-qubit observable needs distinct sites")
        ii, jj = (i, j) if i < j else (j, i)
        aa, bb = (a, b) if i < j else (b, a)
        two_req.setdefault((ii, _axis_index(aa)), []).append((jj, _axis_index(bb), (i, j, a, b)))
    two_vals: dict = {}
    for (i, a), targets in two_req.items():
        targets = sorted(targets)
        carry = prefix[i] @ _site_slice(ts[i], a)
        pos = i + 1
        for (j, b, key) in targets:
            while pos < j:
                carry = carry @ idn[pos]
                pos += 1
            v = carry @ _site_slice(ts[j], b) @ suffix[j + 1]
            two_vals[key] = complex(v)

    s2 = None
    if request.s2:
        s2 = renyi2(st)
    osee_val = None
    if request.osee:
        osee_val = osee(st, request.osee_bond)

    imags = [abs(trace.imag)]
    imags += [abs(v.imag) for v in one_vals.values()]
    imags += [abs(v.imag) for v in two_vals.values()]
    max_imag = float(max(imags))

    arm_asym = None
    if request.arm_pairs:
        arm_asym = 0.0
        for (i, j) in request.arm_pairs:
            for a in (1, 2, 3):
                arm_asym = max(arm_asym, abs(one_vals[(i, a)].real - one_vals[(j, a)].real))

    return Measurement(one_q=one_vals, two_q=two_vals, trace=trace, s2=s2,
                       osee=osee_val, max_imag=max_imag, arm_asym=arm_asym)


def expect_1q(state: tc.VectorizedState, i: int, axis) -> float:
    """tr(rho sigma_i^axis); the imaginary residue is a convergence diagnostic
    surfaced through the batch measurement path."""
    req = ObservableRequest(one_q=((i, "XYZ"[_axis_index(axis) - 1]),), trace=False)
    m = measure_state(state, req)
    return m.one_q[(i, _axis_index(axis))].real


def expect_2q(state: tc.VectorizedState, i: int, j: int, a, b) -> float:
    """tr(rho sigma_i^a sigma_j^b) for distinct sites."""
    if i == j:
        raise ValueError("two-qubit observable needs distinct sites")
    req = ObservableRequest(
        two_q=((i, j, "XYZ"[_axis_index(a) - 1], "XYZ"[_axis_index(b) - 1]),),
        trace=False)
    m = measure_state(state, req)
    return next(iter(m.two_q.values())).real


def connected_corr(state: tc.VectorizedState, i: int, j: int, a, b) -> float:
    """<sig_i^a sig_j^b> - <sig_i^a><sig_j^b>."""
    return expect_2q(state, i, j, a, b) - expect_1q(state, i, a) * expect_1q(state, j, b)


def trace_rho(state: tc.VectorizedState) -> float:
    st = _prepare(state)
    v = np.ones((1,), dtype=complex)
    for t in st.tensors:
        v = v @ _site_slice(t, 0)
    return float(v[0].real)


def _purity(state: tc.VectorizedState) -> float:
    st = _prepare(state)
    c = st.ortho_center
    return float(np.linalg.norm(st.tensors[c]) ** 2)


def renyi2(state: tc.VectorizedState) -> float:
    """S2 = -ln tr(rho^2) of the trace-normalized state."""
    t = trace_rho(state)
    if abs(t) < 1e-12:
        raise ValueError("state has (numerically) vanishing trace")
    p = _purity(state) / (t * t)
    if p <= 0.0:
        raise ValueError("nonpositive purity")
    return float(-np.log(p))


def osee(state: tc.VectorizedState, bond: int | None = None) -> float:
    """Operator-space entanglement entropy at `bond` (default central bond).

    Von Neumann entropy of the squared Schmidt spectrum of the unit-normalized
    vectorized state; exactly zero for any bond-dimension-1 state.
    """
    n = len(state)
    if n < 2:
        return 0.0
    if bond is None:
        bond = n // 2 - 1
    spec = tc.schmidt_spectrum(state, bond)
    p = spec.singular_values ** 2
    p = p[p > 0]
    if p.size == 0:
        return 0.0
    p = p / p.sum()
    return float(-np.sum(p * np.log(p)))


_PAULIS2 = None


def _paulis2():
    global _PAULIS2
    if _PAULIS2 is None:
        from .superop import PAULIS
        _PAULIS2 = [np.kron(PAULIS[a], PAULIS[b]) for a in range(4) for b in range(4)]
    return _PAULIS2


def reduced_dm_2q(state: tc.VectorizedState, i: int, j: int) -> np.ndarray:
    """Two-site reduced density matrix (trace-normalized), qubit i as the first
    tensor factor."""
    if i == j:
        raise ValueError("need two distinct sites")
    ii, jj = (i, j) if i < j else (j, i)
    pairs = [(ii, jj, a, b) for a in AXES for b in AXES]
    ones = [(ii, a) for a in AXES] + [(jj, a) for a in AXES]
    m = measure_state(state, ObservableRequest(one_q=tuple(ones), two_q=tuple(pairs)))
    coef = np.zeros((4, 4), dtype=complex)
    coef[0, 0] = m.trace
    for a in range(1, 4):
        coef[a, 0] = m.one_q[(ii, a)]
        coef[0, a] = m.one_q[(jj, a)]
        for b in range(1, 4):
            coef[a, b] = m.two_q[(ii, jj, AXES[a - 1], AXES[b - 1])]
    if i > j:
        coef = coef.T
    p2 = _paulis2()
    rho2 = np.zeros((4, 4), dtype=complex)
    for a in range(4):
        for b in range(4):
            rho2 += coef[a, b] * p2[4 * a + b]
    rho2 /= 4.0
    tr = np.trace(rho2)
    if abs(tr) < 1e-12:
        raise ValueError("reduced state has vanishing trace")
    return rho2 / tr


def concurrence(rho2: np.ndarray, clip: float = -1e-9) -> float:
    """Wootters two-qubit concurrence of a 4x4 density matrix.

    Eigenvalues of rho (sy x sy) rho* (sy x sy) slightly below zero (down to
    `clip`) are absorbed to zero; anything more negative is rejected as an
    invalid input.
    """
    rho2 = np.asarray(rho2, dtype=complex)
    if rho2.shape != (4, 4):
        raise ValueError("expected a 4x4 matrix")
    if np.abs(rho2 - rho2.conj().T).max() > 1e-6:
        raise ValueError("input is not Hermitian")
    tr = np.trace(rho2).real
    if abs(tr - 1.0) > 1e-6:
        rho2 = rho2 / tr
    flip = np.kron(SY, SY)
    r = rho2 @ flip @ rho2.conj() @ flip
    ev = np.linalg.eigvals(r).real
    if ev.min() < clip:
        raise ValueError(f"spin-flip spectrum has eigenvalue {ev.min():.3e} below {clip:.0e}")
    lam = np.sqrt(np.sort(np.maximum(ev, 0.0))[::-1])
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))

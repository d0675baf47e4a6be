"""Matrix-product storage, canonicalization, contraction and SVD truncation.

The vectorized density matrix lives as an open-boundary MPS whose sites
carry the 4-dimensional orthonormal Pauli basis of :mod:`lindbladtn.superop`.
Superoperators act as MPOs on the same local space.  States and MPOs are
treated as immutable values; every operation returns a new object.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import _linalg
from .superop import BASIS_SCALE

PHYS_DIM = 4

STATE_MAGIC = b"LMPO1"


class StructureError(ValueError):
    """Mismatched bond dimensions, lengths or malformed tensors."""


@dataclass(frozen=True)
class BondSpectrum:
    """Schmidt data of one bond: descending singular values and the relative
    squared weight that truncation discarded."""

    bond: int
    singular_values: np.ndarray
    discarded_weight: float


class VectorizedState:
    """MPS over 4-dimensional Pauli sites encoding a vectorized operator.

    Tensor index order is (left bond, physical, right bond).  Boundary bonds
    have dimension 1.  ``ortho_center`` marks the mixed-canonical gauge: all
    tensors strictly left of it are left-orthonormal, all strictly right of
    it right-orthonormal (``None`` means unknown gauge).
    """

    basis_scale = BASIS_SCALE

    def __init__(self, tensors, ortho_center=None):
        tensors = [np.asarray(t, dtype=complex) for t in tensors]
        if not tensors:
            raise StructureError("state needs at least one site")
        for i, t in enumerate(tensors):
            if t.ndim != 3 or t.shape[1] != PHYS_DIM:
                raise StructureError(f"site {i}: tensor shape {t.shape} invalid")
            if i > 0 and tensors[i - 1].shape[2] != t.shape[0]:
                raise StructureError(f"bond {i - 1}: dimensions do not match")
        if tensors[0].shape[0] != 1 or tensors[-1].shape[2] != 1:
            raise StructureError("boundary bonds must have dimension 1")
        if ortho_center is not None and not 0 <= ortho_center < len(tensors):
            raise StructureError("ortho_center out of range")
        self.tensors = tensors
        self.ortho_center = ortho_center

    def __len__(self):
        return len(self.tensors)

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    def copy(self) -> "VectorizedState":
        return VectorizedState([t.copy() for t in self.tensors], self.ortho_center)


class OperatorMPO:
    """MPO on the vectorized local space; tensors are
    (left bond, physical out, physical in, right bond)."""

    def __init__(self, tensors):
        tensors = [np.asarray(t, dtype=complex) for t in tensors]
        if not tensors:
            raise StructureError("mpo needs at least one site")
        for i, t in enumerate(tensors):
            if t.ndim != 4 or t.shape[1] != PHYS_DIM or t.shape[2] != PHYS_DIM:
                raise StructureError(f"site {i}: mpo tensor shape {t.shape} invalid")
            if i > 0 and tensors[i - 1].shape[3] != t.shape[0]:
                raise StructureError(f"bond {i - 1}: mpo dimensions do not match")
        if tensors[0].shape[0] != 1 or tensors[-1].shape[3] != 1:
            raise StructureError("mpo boundary bonds must have dimension 1")
        self.tensors = tensors

    def __len__(self):
        return len(self.tensors)


def _deterministic_svd(mat: np.ndarray):
    """SVD with descending values and a fixed gauge for reproducibility.

    Each left singular vector is rotated so its first entry of significant
    magnitude is real positive; the compensating phase goes into the right
    vectors.
    """
    return _linalg.svd(mat)


def _kept_dimension(s: np.ndarray, cutoff: float, max_dim: int) -> tuple[int, float]:
    """Smallest kept count meeting the Schmidt-weight cutoff, capped by max_dim."""
    total = float(np.sum(s * s))
    if total == 0.0:
        return 1, 0.0
    w = np.cumsum((s * s)[::-1])[::-1] / total  # w[k] = weight of s[k:]
    keep = s.size
    for k in range(s.size - 1, 0, -1):
        if w[k] <= cutoff:
            keep = k
        else:
            break
    keep = max(1, min(keep, max_dim))
    discarded = float(w[keep]) if keep < s.size else 0.0
    return keep, discarded


def canonicalize(state: VectorizedState, center: int) -> VectorizedState:
    """Return a copy in mixed-canonical form with the given orthogonality center.

    Pure gauge transformation: the represented coefficients and the global
    norm are unchanged up to round-off.
    """
    n = len(state)
    if not 0 <= center < n:
        raise StructureError("center out of range")
    ts = [t.copy() for t in state.tensors]
    old = state.ortho_center
    lo = 0 if old is None else min(old, center)
    hi = n - 1 if old is None else max(old, center)
    for i in range(lo, center):
        dl, d, dr = ts[i].shape
        q, r = _linalg.qr(ts[i].reshape(dl * d, dr))
        ts[i] = q.reshape(dl, d, -1)
        ts[i + 1] = np.tensordot(r, ts[i + 1], axes=(1, 0))
    for i in range(hi, center, -1):
        dl, d, dr = ts[i].shape
        q, r = _linalg.qr(ts[i].reshape(dl, d * dr).conj().T)
        ts[i] = q.conj().T.reshape(-1, d, dr)
        ts[i - 1] = np.tensordot(ts[i - 1], r.conj().T, axes=(2, 0))
    return VectorizedState(ts, center)


def truncate_bond(state: VectorizedState, bond: int, cutoff: float,
                  max_dim: int) -> tuple[VectorizedState, BondSpectrum]:
    """Truncate one bond by discarded Schmidt weight and a hard dimension cap.

    The kept dimension is min(max_dim, smallest k whose discarded relative
    squared weight is <= cutoff).  The state is brought to the canonical form
    required for the truncation to be optimal.
    """
    n = len(state)
    if not 0 <= bond < n - 1:
        raise StructureError("bond out of range")
    if state.ortho_center != bond:
        state = canonicalize(state, bond)
    ts = [t.copy() for t in state.tensors]
    dl, d, dr = ts[bond].shape
    u, s, vh = _deterministic_svd(ts[bond].reshape(dl * d, dr))
    keep, discarded = _kept_dimension(s, cutoff, max_dim)
    spectrum = BondSpectrum(bond=bond, singular_values=s.copy(), discarded_weight=discarded)
    u = u[:, :keep]
    sv = (s[:keep, None] * vh[:keep, :])
    ts[bond] = u.reshape(dl, d, keep)
    ts[bond + 1] = np.tensordot(sv, ts[bond + 1], axes=(1, 0))
    return VectorizedState(ts, bond + 1), spectrum


def schmidt_spectrum(state: VectorizedState, bond: int) -> BondSpectrum:
    """Schmidt values of the bipartition at `bond` for the unit-normalized state."""
    n = len(state)
    if not 0 <= bond < n - 1:
        raise StructureError("bond out of range")
    st = canonicalize(state, bond) if state.ortho_center != bond else state
    dl, d, dr = st.tensors[bond].shape
    s = _linalg.svdvals(st.tensors[bond].reshape(dl * d, dr))
    nrm = np.linalg.norm(s)
    if nrm > 0:
        s = s / nrm
    return BondSpectrum(bond=bond, singular_values=s, discarded_weight=0.0)


def inner(a: VectorizedState, b: VectorizedState) -> complex:
    """<<a|b>> in the orthonormal local basis (tr(A^dag B) for the operators)."""
    if len(a) != len(b):
        raise StructureError("length mismatch")
    env = np.ones((1, 1), dtype=complex)
    for ta, tb in zip(a.tensors, b.tensors):
        tmp = np.tensordot(env, tb, axes=(1, 0))        # (la, p, rb)
        env = np.tensordot(ta.conj(), tmp, axes=([0, 1], [0, 1]))
    return complex(env[0, 0])


def norm(state: VectorizedState) -> float:
    return float(np.sqrt(max(inner(state, state).real, 0.0)))


def apply_mpo(op: OperatorMPO, state: VectorizedState, cutoff: float,
              max_dim: int) -> VectorizedState:
    """Apply an MPO with bond-by-bond truncation; result is canonicalized.

    Zip-up contraction: one left-to-right sweep interleaving contraction and
    SVD compression (at a tighter interim cutoff), then a right-to-left sweep
    enforcing the requested (cutoff, max_dim) at every bond.
    """
    n = len(state)
    if len(op) != n:
        raise StructureError("operator/state length mismatch")
    # The zip sweep's interim truncation may use the faster Gram-eigh kernel;
    # the final right-to-left sweep enforces (cutoff, max_dim) with exact SVDs.
    fast_interim = cutoff >= 1e-13
    carry = np.ones((1, 1, 1), dtype=complex)  # (new bond, mpo bond, state bond)
    ts: list[np.ndarray] = []
    for i in range(n):
        w = op.tensors[i]
        a = state.tensors[i]
        # contract the large state bond first to keep intermediates small
        tmp = np.tensordot(carry, a, axes=(2, 0))        # (x, wl, q, ar)
        t = np.tensordot(tmp, w, axes=([1, 2], [0, 2]))  # (x, ar, p, wr)
        t = t.transpose(0, 2, 3, 1)                      # (x, p, wr, ar)
        x, d, wr, ar = t.shape
        if i == n - 1:
            ts.append(t.reshape(x, d, wr * ar))
            break
        mat = t.reshape(x * d, wr * ar)
        if fast_interim and x * d >= 256 and wr * ar > x * d:
            u, s = _linalg.left_factor_gram(mat)
            keep, _ = _kept_dimension(s, cutoff, max_dim)
            u = u[:, :keep]
            carry = (u.conj().T @ mat).reshape(keep, wr, ar)
        else:
            u, s, vh = _deterministic_svd(mat)
            keep, _ = _kept_dimension(s, cutoff, max_dim)
            u = u[:, :keep]
            carry = (s[:keep, None] * vh[:keep, :]).reshape(keep, wr, ar)
        ts.append(u.reshape(x, d, keep))
    out = VectorizedState(ts, n - 1)
    for bond in range(n - 2, -1, -1):
        out, _ = _truncate_from_right(out, bond, cutoff, max_dim)
    return out


def _truncate_from_right(state: VectorizedState, bond: int, cutoff: float, max_dim: int):
    """Truncate `bond` while sweeping the center leftward (center at bond+1)."""
    ts = state.tensors
    if state.ortho_center != bond + 1:
        state = canonicalize(state, bond + 1)
        ts = state.tensors
    ts = [t for t in ts]
    dl, d, dr = ts[bond + 1].shape
    u, s, vh = _deterministic_svd(ts[bond + 1].reshape(dl, d * dr))
    keep, discarded = _kept_dimension(s, cutoff, max_dim)
    spectrum = BondSpectrum(bond=bond, singular_values=s.copy(), discarded_weight=discarded)
    ts[bond + 1] = vh[:keep, :].reshape(keep, d, dr)
    us = u[:, :keep] * s[:keep]
    ts[bond] = np.tensordot(ts[bond], us, axes=(2, 0))
    return VectorizedState(ts, bond), spectrum


def compress(state: VectorizedState, cutoff: float, max_dim: int) -> VectorizedState:
    """Bring to canonical form truncating every bond at (cutoff, max_dim)."""
    out = canonicalize(state, len(state) - 1)
    for bond in range(len(state) - 2, -1, -1):
        out, _ = _truncate_from_right(out, bond, cutoff, max_dim)
    return out


def scale(state: VectorizedState, factor: complex) -> VectorizedState:
    """Multiply all represented coefficients by a scalar (applied on one site)."""
    site = state.ortho_center if state.ortho_center is not None else 0
    ts = [t.copy() for t in state.tensors]
    ts[site] = ts[site] * factor
    return VectorizedState(ts, state.ortho_center)


def conjugate(state: VectorizedState) -> VectorizedState:
    """Elementwise complex conjugation of all coefficients."""
    return VectorizedState([t.conj() for t in state.tensors], state.ortho_center)


def add(a: VectorizedState, b: VectorizedState, ca: complex = 1.0,
        cb: complex = 1.0) -> VectorizedState:
    """Exact linear combination ca*a + cb*b by bond direct sum (no truncation)."""
    if len(a) != len(b):
        raise StructureError("length mismatch")
    n = len(a)
    if n == 1:
        return VectorizedState([ca * a.tensors[0] + cb * b.tensors[0]])
    ts = []
    for i in range(n):
        ta, tb = a.tensors[i], b.tensors[i]
        if i == 0:
            t = np.concatenate([ca * ta, cb * tb], axis=2)
        elif i == n - 1:
            t = np.concatenate([ta, tb], axis=0)
        else:
            la, d, ra = ta.shape
            lb, _, rb = tb.shape
            t = np.zeros((la + lb, d, ra + rb), dtype=complex)
            t[:la, :, :ra] = ta
            t[la:, :, ra:] = tb
        ts.append(t)
    return VectorizedState(ts, None)


def product_state(vectors: list[np.ndarray]) -> VectorizedState:
    """Bond-dimension-1 state from per-site coefficient 4-vectors."""
    ts = [np.asarray(v, dtype=complex).reshape(1, PHYS_DIM, 1) for v in vectors]
    return VectorizedState(ts, 0)


def identity_mpo(n: int) -> OperatorMPO:
    eye = np.eye(PHYS_DIM, dtype=complex).reshape(1, PHYS_DIM, PHYS_DIM, 1)
    return OperatorMPO([eye.copy() for _ in range(n)])


def mpo_from_terms(n: int, site_terms, channel_terms) -> OperatorMPO:
    """Assemble sum_i D_i + sum_k A_k(i_k) B_k(j_k) as a finite-state-automaton MPO.

    ``site_terms`` maps site -> 4x4 matrix (or None); ``channel_terms`` is a
    list of (i, j, A, B) with i < j, carrying identities across i..j. Bond
    states are [pending, open channels..., complete].
    """
    chans = [(int(i), int(j), np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))
             for (i, j, a, b) in channel_terms]
    for (i, j, _, _) in chans:
        if not 0 <= i < j < n:
            raise StructureError("channel term out of range")
    if n == 1:
        d = site_terms[0] if site_terms[0] is not None else np.zeros((4, 4))
        return OperatorMPO([np.asarray(d, dtype=complex).reshape(1, 4, 4, 1)])
    active: list[list[int]] = [[] for _ in range(n - 1)]  # channel ids crossing each bond
    for k, (i, j, _, _) in enumerate(chans):
        for b in range(i, j):
            active[b].append(k)
    eye = np.eye(PHYS_DIM, dtype=complex)
    tensors = []
    for i in range(n):
        left = [] if i == 0 else active[i - 1]
        right = [] if i == n - 1 else active[i]
        # state layout per bond: [0]=pending, channels..., [last]=complete
        dl = 1 if i == 0 else len(left) + 2
        dr = 1 if i == n - 1 else len(right) + 2
        lpos = {k: p + 1 for p, k in enumerate(left)}
        rpos = {k: p + 1 for p, k in enumerate(right)}
        w = np.zeros((dl, PHYS_DIM, PHYS_DIM, dr), dtype=complex)
        l_pend = 0
        l_comp = dl - 1
        r_pend = 0
        r_comp = dr - 1
        if i < n - 1:
            w[l_pend, :, :, r_pend] = eye
        if i > 0:
            w[l_comp, :, :, r_comp] = eye
        d_i = site_terms[i]
        if d_i is not None:
            w[l_pend, :, :, r_comp] += np.asarray(d_i, dtype=complex)
        for k, (ci, cj, a, b) in enumerate(chans):
            if ci == i:
                w[l_pend, :, :, rpos[k]] = a
            elif cj == i:
                w[lpos[k], :, :, r_comp] = b
            elif ci < i < cj:
                w[lpos[k], :, :, rpos[k]] = eye
        tensors.append(w)
    # boundary bonds of the first/last tensors: pending on the far left is the
    # only live row; complete on the far right the only live column, but for
    # single-bond states pending==complete slot 0 on edges; handled above by
    # dl/dr = 1 at the boundaries since edge sites merge pending/complete.
    return OperatorMPO(tensors)


def to_dense(state: VectorizedState, max_sites: int = 9) -> np.ndarray:
    """Contract to the full 4^N coefficient vector (test/diagnostic sizes only)."""
    n = len(state)
    if n > max_sites:
        raise StructureError(f"dense contraction limited to {max_sites} sites")
    vec = state.tensors[0]
    for t in state.tensors[1:]:
        vec = np.tensordot(vec, t, axes=(vec.ndim - 1, 0))
    return vec.reshape(-1)


def mpo_to_dense(op: OperatorMPO, max_sites: int = 6) -> np.ndarray:
    """Contract an MPO to its full 4^N x 4^N matrix (test sizes only)."""
    n = len(op)
    if n > max_sites:
        raise StructureError(f"dense contraction limited to {max_sites} sites")
    mat = op.tensors[0]
    for t in op.tensors[1:]:
        mat = np.tensordot(mat, t, axes=(mat.ndim - 1, 0))
    # axes: (1, p1, q1, p2, q2, ..., 1)
    n_ax = mat.ndim
    perm = [0] + list(range(1, n_ax - 1, 2)) + list(range(2, n_ax - 1, 2)) + [n_ax - 1]
    mat = mat.transpose(perm)
    dim = PHYS_DIM ** n
    return mat.reshape(dim, dim)


def write_state_file(state: VectorizedState, path) -> None:
    """Serialize with the LMPO1 layout: magic, N, per-site bond dims, then
    row-major little-endian complex payloads (two float64 per entry)."""
    with open(path, "wb") as fh:
        fh.write(STATE_MAGIC)
        fh.write(struct.pack("<I", len(state)))
        for t in state.tensors:
            fh.write(struct.pack("<II", t.shape[0], t.shape[2]))
        for t in state.tensors:
            fh.write(np.ascontiguousarray(t, dtype="<c16").tobytes())


def read_state_file(path) -> VectorizedState:
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != STATE_MAGIC:
            raise StructureError(f"bad state file magic {magic!r}")
        raw = fh.read(4)
        if len(raw) < 4:
            raise StructureError("truncated state file header")
        n = struct.unpack("<I", raw)[0]
        if n < 1:
            raise StructureError("state file declares no sites")
        dims = []
        for _ in range(n):
            raw = fh.read(8)
            if len(raw) < 8:
                raise StructureError("truncated state file header")
            dims.append(struct.unpack("<II", raw))
        tensors = []
        for dl, dr in dims:
            count = dl * PHYS_DIM * dr
            raw = fh.read(16 * count)
            if len(raw) < 16 * count:
                raise StructureError("truncated state file payload")
            tensors.append(np.frombuffer(raw, dtype="<c16").reshape(dl, PHYS_DIM, dr).copy())
        if fh.read(1):
            raise StructureError("trailing bytes in state file")
    return VectorizedState(tensors, None)

"""Lattices, model coefficients, the vectorized Liouvillian MPO and frame utilities.

The master equation is
    drho/dt = -i[H, rho] + D0[rho] + D1[rho] + D2[rho],
with
    H = sum_i (h_z,i sz + h_x,i sx + h_y,i sy)/2 + K,
    K = sum over unordered bonds (i,j) of
        J_ij (s+_i s-_j + s-_i s+_j) + (Jz_ij / 2) sz_i sz_j,
and D0/D1/D2 the raising, lowering and dephasing jump terms with rates
g_0, g_1, g_2 per site.  Each unordered bond is counted once.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import superop
from .tensor_core import OperatorMPO, StructureError, mpo_from_terms

LATTICE_KINDS = ("chain", "ring", "strip", "cylinder", "plaquette", "custom")


@dataclass(frozen=True)
class Lattice:
    """Qubit connectivity plus the one-dimensional ordering used by the MPO.

    ``mpo_path[p]`` is the site placed at path position ``p``.  Interactions
    between sites far apart along the path become long-range channels inside
    the MPO; no swap networks are used.
    """

    n_qubits: int
    kind: str
    l_x: int
    l_y: int
    bonds: frozenset
    mpo_path: tuple

    def __post_init__(self):
        if self.kind not in LATTICE_KINDS:
            raise ValueError(f"unknown lattice kind {self.kind!r}")
        if sorted(self.mpo_path) != list(range(self.n_qubits)):
            raise ValueError("mpo_path must be a permutation of the sites")
        for (i, j) in self.bonds:
            if i == j:
                raise ValueError("self-bonds are not allowed")
            if not (0 <= i < self.n_qubits and 0 <= j < self.n_qubits):
                raise ValueError("bond references an invalid site")

    @property
    def position_of(self) -> dict:
        return {site: pos for pos, site in enumerate(self.mpo_path)}

    def arm_pairs(self) -> list[tuple[int, int]]:
        """Mirror-symmetric qubit pairs of a plaquette's two arms."""
        if self.kind != "plaquette":
            return []
        return [(k, k + 1) for k in range(2, self.n_qubits - 3, 2)]

    def two_coloring(self) -> np.ndarray:
        """0/1 labels with adjacent sites colored differently (site 0 gets 0).

        Raises if the bond graph is not bipartite.
        """
        color = np.full(self.n_qubits, -1, dtype=int)
        adj = [[] for _ in range(self.n_qubits)]
        for (i, j) in self.bonds:
            adj[i].append(j)
            adj[j].append(i)
        for start in range(self.n_qubits):
            if color[start] >= 0:
                continue
            color[start] = 0
            queue = [start]
            while queue:
                v = queue.pop()
                for w in adj[v]:
                    if color[w] < 0:
                        color[w] = 1 - color[v]
                        queue.append(w)
                    elif color[w] == color[v]:
                        raise ValueError("bond graph is not bipartite")
        return color


def _grid_bonds(l_x: int, l_y: int, periodic_y: bool) -> set:
    bonds = set()
    def sid(x, y):
        return x * l_y + y
    for x in range(l_x):
        for y in range(l_y):
            if x + 1 < l_x:
                bonds.add((sid(x, y), sid(x + 1, y)))
            if y + 1 < l_y:
                bonds.add((sid(x, y), sid(x, y + 1)))
        if periodic_y and l_y > 2:
            bonds.add((sid(x, 0), sid(x, l_y - 1)))
    return bonds


def _snake_path(l_x: int, l_y: int) -> tuple:
    path = []
    for x in range(l_x):
        ys = range(l_y) if x % 2 == 0 else range(l_y - 1, -1, -1)
        for y in ys:
            path.append(x * l_y + y)
    return tuple(path)


def build_lattice(kind: str, n_qubits: int, l_x: int = 0, l_y: int = 1,
                  periodic_x: bool = False, periodic_y: bool = False) -> Lattice:
    """Construct one of the supported lattices.

    1D kinds (chain, ring, plaquette) ignore l_x/l_y; 2D kinds require
    l_x * l_y == n_qubits.  Periodic x is only meaningful for l_y == 1 and is
    expressed by the ring kind.
    """
    n = int(n_qubits)
    if n < 1:
        raise ValueError("n_qubits must be positive")
    if kind == "chain":
        bonds = {(i, i + 1) for i in range(n - 1)}
        return Lattice(n, "chain", n, 1, frozenset(bonds), tuple(range(n)))
    if kind == "ring":
        if n < 3:
            raise ValueError("ring needs at least 3 sites")
        bonds = {(i, i + 1) for i in range(n - 1)}
        bonds.add((n - 1, 0))
        return Lattice(n, "ring", n, 1, frozenset(bonds), tuple(range(n)))
    if kind == "plaquette":
        # Sites 0 and n-1 dangle from opposite points of an (n-2)-ring.  The
        # ring is labeled as a zigzag ladder: attach site 1, arm pairs
        # (2,3), (4,5), ..., far attach site n-2.  Index jumps along the
        # path never exceed 2, and the identity order is the MPO path.
        if n < 6:
            raise ValueError("plaquette needs at least 6 sites")
        if (n - 2) % 2 != 0:
            raise ValueError("plaquette requires an even ring size")
        bonds = {(0, 1), (n - 2, n - 1), (1, 2), (1, 3), (n - 4, n - 2), (n - 3, n - 2)}
        for k in range(2, n - 5, 2):
            bonds.add((k, k + 2))
            bonds.add((k + 1, k + 3))
        return Lattice(n, "plaquette", n, 1, frozenset(bonds), tuple(range(n)))
    if kind in ("strip", "cylinder"):
        if l_x < 1 or l_y < 1 or l_x * l_y != n:
            raise ValueError("l_x * l_y must equal n_qubits")
        if periodic_x:
            raise ValueError("periodic x requires l_y = 1 (use the ring kind)")
        periodic = kind == "cylinder" or periodic_y
        bonds = _grid_bonds(l_x, l_y, periodic)
        kind_out = "cylinder" if periodic else "strip"
        return Lattice(n, kind_out, l_x, l_y, frozenset(bonds), _snake_path(l_x, l_y))
    if kind == "custom":
        raise ValueError("custom lattices are constructed directly from bonds")
    raise ValueError(f"unknown lattice kind {kind!r}")


def custom_lattice(n_qubits: int, bonds, mpo_path=None) -> Lattice:
    """Arbitrary connectivity; the caller owns the path choice (default identity)."""
    norm_bonds = frozenset(tuple(sorted((int(i), int(j)))) for (i, j) in bonds)
    path = tuple(range(n_qubits)) if mpo_path is None else tuple(mpo_path)
    return Lattice(n_qubits, "custom", n_qubits, 1, norm_bonds, path)


def _expand_sites(value, n: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValueError(f"{name} must be a scalar or length-{n} vector")
    return arr.copy()


def _expand_bonds(value, lattice: Lattice, name: str) -> np.ndarray:
    n = lattice.n_qubits
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        mat = np.zeros((n, n))
        for (i, j) in lattice.bonds:
            mat[i, j] = mat[j, i] = float(arr)
        return mat
    if arr.shape != (n, n):
        raise ValueError(f"{name} must be a scalar or {n}x{n} matrix")
    if not np.allclose(arr, arr.T):
        raise ValueError(f"{name} matrix must be symmetric")
    if np.any(np.diagonal(arr) != 0.0):
        raise ValueError(f"{name} matrix must have zero diagonal")
    return arr.copy()


@dataclass(frozen=True)
class ModelParams:
    """All coefficients of the Hamiltonian and the three dissipators.

    Couplings are stored as full symmetric matrices with zero diagonal; each
    unordered pair carries a single coupling value.
    """

    h_x: np.ndarray
    h_y: np.ndarray
    h_z: np.ndarray
    j: np.ndarray
    j_z: np.ndarray
    g_0: np.ndarray
    g_1: np.ndarray
    g_2: np.ndarray

    @classmethod
    def build(cls, lattice: Lattice, h_x=0.0, h_y=0.0, h_z=0.0, j=0.0, j_z=0.0,
              g_0=0.0, g_1=0.0, g_2=0.0) -> "ModelParams":
        """Expand scalars or vectors/matrices over a lattice; scalar couplings
        populate exactly the lattice bonds."""
        n = lattice.n_qubits
        params = cls(
            h_x=_expand_sites(h_x, n, "h_x"),
            h_y=_expand_sites(h_y, n, "h_y"),
            h_z=_expand_sites(h_z, n, "h_z"),
            j=_expand_bonds(j, lattice, "J"),
            j_z=_expand_bonds(j_z, lattice, "J_z"),
            g_0=_expand_sites(g_0, n, "g_0"),
            g_1=_expand_sites(g_1, n, "g_1"),
            g_2=_expand_sites(g_2, n, "g_2"),
        )
        params.validate(lattice)
        return params

    @property
    def n_qubits(self) -> int:
        return self.h_x.shape[0]

    def validate(self, lattice: Lattice) -> None:
        n = lattice.n_qubits
        if self.n_qubits != n:
            raise ValueError("parameter dimensions do not match the lattice")
        for name, g in (("g_0", self.g_0), ("g_1", self.g_1), ("g_2", self.g_2)):
            if np.any(g < 0):
                raise ValueError(f"{name} rates must be nonnegative")
        if lattice.kind != "custom":
            allowed = np.zeros((n, n), dtype=bool)
            for (i, j) in lattice.bonds:
                allowed[i, j] = allowed[j, i] = True
            for name, mat in (("J", self.j), ("J_z", self.j_z)):
                bad = np.nonzero(~allowed & (mat != 0.0) & ~np.eye(n, dtype=bool))
                if bad[0].size:
                    i, j = int(bad[0][0]), int(bad[1][0])
                    raise ValueError(f"{name}[{i},{j}] couples a non-bonded pair")

    def digest(self) -> str:
        h = hashlib.sha256()
        for arr in (self.h_x, self.h_y, self.h_z, self.j, self.j_z,
                    self.g_0, self.g_1, self.g_2):
            h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class LabFrameParams:
    """Lab-frame description: qubit frequencies and one harmonic drive tone.

    omega[i] are the lab frequencies, drive_amp[i] the per-qubit drive
    amplitudes (zero for undriven qubits), drive_freq the single shared tone
    and drive_phase[i] its per-qubit phase.  `delta` records the alternating
    frequency offset omega_1 - omega_0 for convenience.
    """

    omega: np.ndarray
    drive_amp: np.ndarray
    drive_freq: float
    drive_phase: np.ndarray
    delta: float = 0.0

    @classmethod
    def build(cls, omega, drive_amp=0.0, drive_freq=None, drive_phase=0.0,
              delta=0.0) -> "LabFrameParams":
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        n = omega.shape[0]
        freqs = np.atleast_1d(np.asarray(
            omega[0] if drive_freq is None else drive_freq, dtype=float))
        if np.unique(freqs).size > 1:
            raise ValueError("multiple distinct drive frequencies leave the "
                             "rotating-frame Hamiltonian time-dependent")
        return cls(
            omega=omega,
            drive_amp=_expand_sites(drive_amp, n, "drive_amp"),
            drive_freq=float(freqs[0]),
            drive_phase=_expand_sites(drive_phase, n, "drive_phase"),
            delta=float(delta),
        )

    @classmethod
    def alternating(cls, lattice: Lattice, omega_0: float, delta: float,
                    drive_amp_0: float) -> "LabFrameParams":
        """Frequencies alternating by the lattice two-coloring, qubit 0 driven
        on resonance with its own frequency."""
        color = lattice.two_coloring()
        omega = omega_0 + delta * color
        amp = np.zeros(lattice.n_qubits)
        amp[0] = drive_amp_0
        return cls.build(omega=omega, drive_amp=amp, drive_freq=omega[0],
                         drive_phase=0.0, delta=delta)


def lab_to_rotating(lab: LabFrameParams, base: ModelParams | None = None) -> ModelParams:
    """Rotating-wave parameters in the frame turning uniformly at the drive tone.

    h_x,i = amp_i cos(phase_i), h_y,i = amp_i sin(phase_i) and
    h_z,i = omega_i - drive_freq; couplings and rates carry over unchanged
    from `base` (zeros when no base is given).
    """
    n = lab.omega.shape[0]
    h_x = lab.drive_amp * np.cos(lab.drive_phase)
    h_y = lab.drive_amp * np.sin(lab.drive_phase)
    h_z = lab.omega - lab.drive_freq
    if base is None:
        zero_m = np.zeros((n, n))
        zero_v = np.zeros(n)
        return ModelParams(h_x=h_x, h_y=h_y, h_z=h_z, j=zero_m, j_z=zero_m.copy(),
                           g_0=zero_v, g_1=zero_v.copy(), g_2=zero_v.copy())
    if base.n_qubits != n:
        raise ValueError("base parameters do not match the lab-frame size")
    return ModelParams(h_x=h_x, h_y=h_y, h_z=h_z, j=base.j.copy(),
                       j_z=base.j_z.copy(), g_0=base.g_0.copy(),
                       g_1=base.g_1.copy(), g_2=base.g_2.copy())


def effective_nnn_coupling(j: float, delta: float, degree) -> tuple[float, np.ndarray]:
    """Second-order effective XY coupling across an off-resonant qubit.

    Valid for |j| << |delta|.  Returns j_eff = j^2/|delta| together with the
    per-site frequency shifts (j^2/delta) * degree_i, signed + on the
    even (resonant) sublattice and - on the odd one, reproducing the
    three-site pattern (+1, -2, +1).
    """
    if delta == 0.0:
        raise ZeroDivisionError("effective coupling undefined at zero detuning")
    degree = np.atleast_1d(np.asarray(degree, dtype=float))
    j_eff = j * j / abs(delta)
    signs = np.array([1.0 if i % 2 == 0 else -1.0 for i in range(degree.shape[0])])
    shifts = (j * j / delta) * signs * degree
    return float(j_eff), shifts


@dataclass(frozen=True)
class LiouvillianMPO:
    """Exact MPO of the generator over the lattice's MPO path, plus the local
    term decomposition reused by the propagator builder.

    ``site_terms[p]`` is the on-site 4x4 generator block at path position p;
    ``channel_terms`` holds (p, q, A, B) products with p < q path positions.
    """

    mpo: OperatorMPO
    params_hash: str
    n_sites: int
    site_terms: tuple = field(repr=False, default=())
    channel_terms: tuple = field(repr=False, default=())

    def __len__(self):
        return self.n_sites


def _liouvillian_terms(lattice: Lattice, params: ModelParams):
    n = lattice.n_qubits
    pos = lattice.position_of
    site_terms = []
    for p in range(n):
        s = lattice.mpo_path[p]
        d = superop.site_hamiltonian(params.h_x[s], params.h_y[s], params.h_z[s])
        d = d + superop.site_dissipator(params.g_0[s], params.g_1[s], params.g_2[s])
        site_terms.append(d if np.any(d) else None)
    channels = []
    seen = set()
    nz = set(zip(*np.nonzero(params.j))) | set(zip(*np.nonzero(params.j_z)))
    for (i, j) in nz:
        key = (min(i, j), max(i, j))
        if key in seen:
            continue
        seen.add(key)
        a, b = key
        if lattice.kind != "custom" and (a, b) not in lattice.bonds and (b, a) not in lattice.bonds:
            raise ValueError(f"coupling on non-bonded pair ({a},{b})")
        p, q = pos[a], pos[b]
        if p > q:
            p, q = q, p
        for (ma, mb) in superop.bond_channels(params.j[a, b], params.j_z[a, b]):
            channels.append((p, q, ma, mb))
    channels.sort(key=lambda c: (c[0], c[1]))
    return site_terms, channels


def build_liouvillian(lattice: Lattice, params: ModelParams) -> LiouvillianMPO:
    """Assemble the generator MPO by symbolic summation of local superoperator
    terms with finite-state-automaton bond structure (exact representation)."""
    params.validate(lattice)
    site_terms, channels = _liouvillian_terms(lattice, params)
    mpo = mpo_from_terms(lattice.n_qubits, site_terms, channels)
    return LiouvillianMPO(
        mpo=mpo,
        params_hash=params.digest(),
        n_sites=lattice.n_qubits,
        site_terms=tuple(site_terms),
        channel_terms=tuple(channels),
    )

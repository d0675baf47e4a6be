"""Initial-state construction and state persistence."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor_core as tc
from .superop import CZ, conjugation_superop_2q, split_two_site

_SQ2 = np.sqrt(2.0)
_AXES = {"x": 1, "y": 2, "z": 3}


@dataclass(frozen=True)
class PauliSpec:
    """One qubit's Pauli eigenstate: (I + sign * sigma_axis)/2."""

    axis: str
    sign: int

    def __post_init__(self):
        if self.axis not in _AXES:
            raise ValueError(f"axis must be x, y or z, got {self.axis!r}")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    @classmethod
    def parse(cls, text: str) -> "PauliSpec":
        text = text.strip().lower()
        if len(text) != 2 or text[0] not in "+-":
            raise ValueError(f"expected a two-character state like '+z', got {text!r}")
        return cls(axis=text[1], sign=1 if text[0] == "+" else -1)


def _site_vector(spec: PauliSpec) -> np.ndarray:
    v = np.zeros(4, dtype=complex)
    v[0] = 1.0 / _SQ2
    v[_AXES[spec.axis]] = spec.sign / _SQ2
    return v


def _normalize_specs(specs, n: int) -> list[PauliSpec]:
    if isinstance(specs, (str, PauliSpec)):
        specs = [specs] * n
    out = []
    for s in specs:
        out.append(PauliSpec.parse(s) if isinstance(s, str) else s)
    if len(out) != n:
        raise ValueError(f"need one Pauli spec per qubit ({n}), got {len(out)}")
    return out


def pauli_product(specs, n: int) -> tc.VectorizedState:
    """Vectorized pure product state prod_i (I + sign_i sigma_i^axis)/2.

    `specs` is a single spec (string like '+z' or PauliSpec) applied to all
    qubits, or one per qubit.  Bond dimension 1, unit trace, purity 1.
    """
    if n < 1:
        raise ValueError("need at least one qubit")
    return tc.product_state([_site_vector(s) for s in _normalize_specs(specs, n)])


def _cz_channels():
    return split_two_site(conjugation_superop_2q(CZ))


def graph_state(pairs, n: int) -> tc.VectorizedState:
    """Graph state: controlled-Z on every listed pair applied to all-(+x).

    Gates act as exact two-site superoperator MPOs (cutoff 0); duplicate
    pairs are rejected since CZ^2 = identity would silently undo them.
    """
    seen = set()
    norm_pairs = []
    for (i, j) in pairs:
        i, j = int(i), int(j)
        if i == j:
            raise ValueError("graph-state pair must join distinct qubits")
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"pair ({i},{j}) out of range")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise ValueError(f"duplicate graph-state pair {key}")
        seen.add(key)
        norm_pairs.append(key)
    state = pauli_product("+x", n)
    chans = _cz_channels()
    for (i, j) in norm_pairs:
        mpo = tc.mpo_from_terms(n, [None] * n, [(i, j, a, b) for (a, b) in chans])
        state = tc.apply_mpo(mpo, state, 0.0, 2 ** 31)
    return state


def save_state(state: tc.VectorizedState, path) -> None:
    """Write the binary LMPO1 representation (bit-exact round trip)."""
    tc.write_state_file(state, path)


def load_state(path) -> tc.VectorizedState:
    """Read a state saved by `save_state`, validating header and layout."""
    return tc.read_state_file(path)

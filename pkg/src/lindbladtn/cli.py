"""Batch front-end: parameter files, single runs, sweeps and engine comparison.

Input files are `key = value` lines with `#` comments; vectors are comma
lists, coupling matrices use `J[i,j] = value` triplet lines.  Every run
writes whitespace-delimited observable files next to an echo of its input:

    <prefix>[.<uid>].N=<n>.obs-1q.dat    time qubit component value imag
    <prefix>[.<uid>].N=<n>.obs-2q.dat    time qubit_a qubit_b component value imag
    <prefix>[.<uid>].N=<n>.global.dat    time trace s2 osee_center max_imag arm_asym
    <prefix>[.<uid>].N=<n>.input.txt     canonical echo of the parsed input

Exit codes: 0 ok, 2 parse error, 3 numerical breakdown, 4 resource guard.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import glob as globmod
import hashlib
import os
import sys
import tempfile

import numpy as np

from . import states
from .evolution import EvolutionBreakdown, StepperConfig, evolve
from .model import Lattice, ModelParams, build_lattice, custom_lattice, build_liouvillian
from .observables import AXES, ObservableRequest, TrajectoryRecord
from .oracle import (MAX_ORACLE_QUBITS, ResourceGuardError, dense_from_vectorized,
                     dense_record)
from .tensor_core import read_state_file

BREAKDOWN_THRESHOLD = 1e-2
LARGE_OUTPUT_QUBITS = 32
SCRATCH_ENV = "LINDBLADTN_SCRATCH"

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_BREAKDOWN = 3
EXIT_GUARD = 4


class SpecError(ValueError):
    """Malformed or out-of-range input file content."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


_FLOAT = "f"
_INT = "i"
_BOOL = "b"
_STR = "s"
_SITE_VEC = "sv"     # scalar or per-site float vector
_MATRIX = "m"        # scalar or [i,j] triplet lines
_STR_VEC = "pv"      # single token or comma list of tokens
_PAIRS = "pr"        # list of (i,j) tuples
_INT_VEC = "iv"

# file key -> (attribute, kind, default); order fixes the canonical emit.
_SCHEMA = {
    "N": ("n", _INT, None),
    "t_final": ("t_final", _FLOAT, None),
    "tau": ("tau", _FLOAT, None),
    "t_init": ("t_init", _FLOAT, 0.0),
    "output_files_prefix": ("output_files_prefix", _STR, "lindblad"),
    "b_unique_id": ("b_unique_id", _BOOL, False),
    "h_x": ("h_x", _SITE_VEC, 0.0),
    "h_y": ("h_y", _SITE_VEC, 0.0),
    "h_z": ("h_z", _SITE_VEC, 0.0),
    "J": ("j", _MATRIX, 0.0),
    "J_z": ("j_z", _MATRIX, 0.0),
    "g_0": ("g_0", _SITE_VEC, 0.0),
    "g_1": ("g_1", _SITE_VEC, 0.0),
    "g_2": ("g_2", _SITE_VEC, 0.0),
    "init_pauli_state": ("init_pauli_state", _STR_VEC, "+z"),
    "init_graph_state": ("init_graph_state", _PAIRS, ()),
    "load_files_prefix": ("load_files_prefix", _STR, ""),
    "lattice": ("lattice", _STR, ""),
    "l_x": ("l_x", _INT, 0),
    "l_y": ("l_y", _INT, 1),
    "b_periodic_x": ("b_periodic_x", _BOOL, False),
    "b_periodic_y": ("b_periodic_y", _BOOL, False),
    "trotter_order": ("trotter_order", _INT, 4),
    "max_dim_rho": ("max_dim_rho", _INT, 400),
    "cut_off_rho": ("cut_off_rho", _FLOAT, 1e-16),
    "b_force_rho_trace": ("b_force_rho_trace", _BOOL, True),
    "force_rho_hermitian_step": ("force_rho_hermitian_step", _INT, 4),
    "b_initial_rho_compression": ("b_initial_rho_compression", _BOOL, True),
    "b_save_final_state": ("b_save_final_state", _BOOL, False),
    "output_step": ("output_step", _INT, 1),
    "1q_indices": ("q1_indices", _INT_VEC, ()),
    "1q_components": ("q1_components", _STR_VEC, ("Z",)),
    "2q_indices": ("q2_indices", _PAIRS, ()),
    "2q_components": ("q2_components", _STR_VEC, ("ZZ",)),
}
_REQUIRED = ("N", "t_final", "tau")
_ATTR_TO_KEY = {attr: key for key, (attr, _, _) in _SCHEMA.items()}


@dataclasses.dataclass
class RunSpec:
    """One simulation's full parameter set (defaults per the input format)."""

    n: int
    t_final: float
    tau: float
    t_init: float = 0.0
    output_files_prefix: str = "lindblad"
    b_unique_id: bool = False
    h_x: object = 0.0
    h_y: object = 0.0
    h_z: object = 0.0
    j: object = 0.0
    j_z: object = 0.0
    g_0: object = 0.0
    g_1: object = 0.0
    g_2: object = 0.0
    init_pauli_state: object = "+z"
    init_graph_state: tuple = ()
    load_files_prefix: str = ""
    lattice: str = ""
    l_x: int = 0
    l_y: int = 1
    b_periodic_x: bool = False
    b_periodic_y: bool = False
    trotter_order: int = 4
    max_dim_rho: int = 400
    cut_off_rho: float = 1e-16
    b_force_rho_trace: bool = True
    force_rho_hermitian_step: int = 4
    b_initial_rho_compression: bool = True
    b_save_final_state: bool = False
    output_step: int = 1
    q1_indices: tuple = ()
    q1_components: tuple = ("Z",)
    q2_indices: tuple = ()
    q2_components: tuple = ("ZZ",)

    def __eq__(self, other):
        if not isinstance(other, RunSpec):
            return NotImplemented
        return emit_runspec(self) == emit_runspec(other)

    def unique_id(self) -> str:
        """12-hex digest of the canonicalized spec (deterministic reruns)."""
        return hashlib.sha256(emit_runspec(self).encode()).hexdigest()[:12]

    def output_base(self) -> str:
        base = self.output_files_prefix
        if self.b_unique_id:
            base += "." + self.unique_id()
        return f"{base}.N={self.n}"


def _parse_bool(tok: str, line: int) -> bool:
    t = tok.strip().lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no"):
        return False
    raise SpecError(f"expected a boolean, got {tok!r}", line)


def _parse_float(tok: str, line: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise SpecError(f"expected a number, got {tok!r}", line) from None


def _parse_int(tok: str, line: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise SpecError(f"expected an integer, got {tok!r}", line) from None


def _parse_pairs(tok: str, line: int) -> tuple:
    tok = tok.strip()
    if tok in ("", "[]", "()"):
        return ()
    parts = tok.replace(" ", "")
    if not (parts.startswith("(") and parts.endswith(")")):
        raise SpecError("expected pairs like (0,1),(1,2)", line)
    pairs = []
    for chunk in parts[1:-1].split("),("):
        ij = chunk.split(",")
        if len(ij) != 2:
            raise SpecError("expected pairs like (0,1),(1,2)", line)
        pairs.append((_parse_int(ij[0], line), _parse_int(ij[1], line)))
    return tuple(pairs)


def parse_runspec(text: str) -> RunSpec:
    """Parse an input file; unknown keys, duplicates, type and range errors
    are rejected with the offending line number."""
    values: dict = {}
    matrices: dict = {}
    seen_lines: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecError("expected 'key = value'", lineno)
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if "[" in key:
            name, _, idx = key.partition("[")
            name = name.strip()
            if name not in _SCHEMA or _SCHEMA[name][1] != _MATRIX:
                raise SpecError(f"unknown matrix key {name!r}", lineno)
            if not idx.endswith("]"):
                raise SpecError("matrix entries look like J[i,j] = value", lineno)
            ij = idx[:-1].split(",")
            if len(ij) != 2:
                raise SpecError("matrix entries look like J[i,j] = value", lineno)
            i, j = _parse_int(ij[0], lineno), _parse_int(ij[1], lineno)
            if i == j:
                raise SpecError("matrix diagonal must stay zero", lineno)
            ent = matrices.setdefault(name, {})
            pair = (min(i, j), max(i, j))
            if pair in ent:
                raise SpecError(f"duplicate matrix entry {name}[{i},{j}]", lineno)
            ent[pair] = _parse_float(val, lineno)
            continue
        if key not in _SCHEMA:
            raise SpecError(f"unknown key {key!r}", lineno)
        if key in values:
            raise SpecError(f"duplicate key {key!r}", lineno)
        seen_lines[key] = lineno
        attr, kind, _ = _SCHEMA[key]
        if kind == _INT:
            values[key] = _parse_int(val, lineno)
        elif kind == _FLOAT:
            values[key] = _parse_float(val, lineno)
        elif kind == _BOOL:
            values[key] = _parse_bool(val, lineno)
        elif kind == _STR:
            values[key] = val.strip("'\"")
        elif kind == _SITE_VEC:
            toks = [t for t in val.split(",") if t.strip() != ""]
            if len(toks) == 1:
                values[key] = _parse_float(toks[0], lineno)
            else:
                values[key] = tuple(_parse_float(t, lineno) for t in toks)
        elif kind == _MATRIX:
            values[key] = _parse_float(val, lineno)
        elif kind == _STR_VEC:
            toks = [t.strip().strip("'\"") for t in val.split(",") if t.strip() != ""]
            if len(toks) == 0:
                values[key] = ()
            elif len(toks) == 1:
                values[key] = toks[0]
            else:
                values[key] = tuple(toks)
        elif kind == _PAIRS:
            values[key] = _parse_pairs(val, lineno)
        elif kind == _INT_VEC:
            toks = [t for t in val.split(",") if t.strip() != ""]
            values[key] = tuple(_parse_int(t, lineno) for t in toks)
    for key in _REQUIRED:
        if key not in values:
            raise SpecError(f"missing required key {key!r}")
    kwargs = {}
    for key, (attr, kind, default) in _SCHEMA.items():
        if key in values:
            kwargs[attr] = values[key]
        elif default is not None or key in _REQUIRED:
            kwargs[attr] = default
    for name, ent in matrices.items():
        attr = _SCHEMA[name][0]
        if name in values:
            raise SpecError(f"{name} given both as scalar and as matrix entries",
                            seen_lines.get(name))
        n = values["N"]
        mat = np.zeros((n, n))
        for (i, j), v in ent.items():
            if not (0 <= i < n and 0 <= j < n):
                raise SpecError(f"{name}[{i},{j}] outside the {n}-qubit lattice")
            mat[i, j] = mat[j, i] = v
        kwargs[attr] = mat
    spec = RunSpec(**kwargs)
    _validate_spec(spec)
    return spec


def _validate_spec(spec: RunSpec) -> None:
    if spec.n < 1:
        raise SpecError("N must be positive")
    if spec.tau <= 0:
        raise SpecError("tau must be positive")
    if spec.t_final < spec.t_init:
        raise SpecError("t_final must be >= t_init")
    if spec.trotter_order not in (2, 3, 4):
        raise SpecError(f"trotter_order must be 2, 3 or 4, got {spec.trotter_order}")
    if spec.max_dim_rho < 1:
        raise SpecError("max_dim_rho must be positive")
    if spec.cut_off_rho < 0:
        raise SpecError("cut_off_rho must be nonnegative")
    if spec.force_rho_hermitian_step < 0:
        raise SpecError("force_rho_hermitian_step must be >= 0")
    if spec.output_step < 0:
        raise SpecError("output_step must be >= 0")
    if spec.lattice and spec.lattice not in ("chain", "ring", "strip", "cylinder", "plaquette"):
        raise SpecError(f"unknown lattice {spec.lattice!r}")
    for comp in _as_tuple(spec.q1_components):
        if comp.upper() not in AXES:
            raise SpecError(f"bad 1q component {comp!r}")
    for comp in _as_tuple(spec.q2_components):
        if len(comp) != 2 or any(c.upper() not in AXES for c in comp):
            raise SpecError(f"bad 2q component {comp!r}")
    for i in spec.q1_indices:
        if not 0 <= i < spec.n:
            raise SpecError(f"1q index {i} out of range")
    for (i, j) in spec.q2_indices:
        if i == j or not (0 <= i < spec.n and 0 <= j < spec.n):
            raise SpecError(f"bad 2q index pair ({i},{j})")
    if spec.load_files_prefix:
        explicit_pauli = spec.init_pauli_state != "+z"
        if explicit_pauli or spec.init_graph_state:
            raise SpecError("load_files_prefix excludes init_pauli_state/init_graph_state")


def _as_tuple(v) -> tuple:
    if isinstance(v, str):
        return (v,)
    return tuple(v)


def _fmt_value(kind: str, value) -> str:
    if kind == _BOOL:
        return "True" if value else "False"
    if kind == _FLOAT:
        return repr(float(value))
    if kind == _INT:
        return str(int(value))
    if kind == _STR:
        return str(value)
    if kind == _SITE_VEC:
        if np.ndim(value) == 0:
            return repr(float(value))
        return ",".join(repr(float(x)) for x in value)
    if kind == _STR_VEC:
        return ",".join(_as_tuple(value))
    if kind == _PAIRS:
        return ",".join(f"({i},{j})" for (i, j) in value)
    if kind == _INT_VEC:
        return ",".join(str(int(x)) for x in value)
    raise AssertionError(kind)


def emit_runspec(spec: RunSpec) -> str:
    """Canonical text form; parse(emit(spec)) round trips to an equal spec."""
    lines = []
    for key, (attr, kind, _) in _SCHEMA.items():
        value = getattr(spec, attr)
        if kind == _MATRIX:
            if np.ndim(value) == 0:
                lines.append(f"{key} = {repr(float(value))}")
            else:
                mat = np.asarray(value)
                n = mat.shape[0]
                for i in range(n):
                    for j in range(i + 1, n):
                        if mat[i, j] != 0.0:
                            lines.append(f"{key}[{i},{j}] = {repr(float(mat[i, j]))}")
        else:
            lines.append(f"{key} = {_fmt_value(kind, value)}")
    return "\n".join(lines) + "\n"


def build_run_lattice(spec: RunSpec) -> Lattice:
    """Lattice from the explicit kind, the coupling matrices, or l_x/l_y flags."""
    n = spec.n
    if spec.lattice:
        kind = spec.lattice
        if kind in ("strip", "cylinder"):
            l_x = spec.l_x if spec.l_x else n
            return build_lattice(kind, n, l_x, spec.l_y, False, spec.b_periodic_y or kind == "cylinder")
        return build_lattice(kind, n)
    j_mat = np.ndim(spec.j) > 0
    jz_mat = np.ndim(spec.j_z) > 0
    if j_mat or jz_mat:
        bonds = set()
        for value in (spec.j, spec.j_z):
            if np.ndim(value) > 0:
                mat = np.asarray(value)
                for i, j in zip(*np.nonzero(mat)):
                    if i < j:
                        bonds.add((int(i), int(j)))
        return custom_lattice(n, bonds)
    if spec.b_periodic_x:
        if spec.l_y != 1:
            raise SpecError("b_periodic_x requires l_y = 1")
        return build_lattice("ring", n)
    if spec.l_y > 1:
        l_x = spec.l_x if spec.l_x else (n // spec.l_y)
        kind = "cylinder" if spec.b_periodic_y else "strip"
        return build_lattice(kind, n, l_x, spec.l_y, False, spec.b_periodic_y)
    if spec.l_x not in (0, n):
        raise SpecError("l_x must equal N for a 1D chain")
    return build_lattice("chain", n)


def build_model_params(spec: RunSpec, lattice: Lattice) -> ModelParams:
    return ModelParams.build(
        lattice,
        h_x=spec.h_x, h_y=spec.h_y, h_z=spec.h_z,
        j=spec.j, j_z=spec.j_z,
        g_0=spec.g_0, g_1=spec.g_1, g_2=spec.g_2,
    )


def _observable_request(spec: RunSpec, lattice: Lattice,
                        allow_large_output: bool) -> ObservableRequest:
    n = spec.n
    pos = lattice.position_of
    q1_sites = tuple(spec.q1_indices) if spec.q1_indices else tuple(range(n))
    q1_comps = tuple(c.upper() for c in _as_tuple(spec.q1_components))
    q2_pairs = tuple(spec.q2_indices) if spec.q2_indices else \
        tuple((i, j) for i in range(n) for j in range(i + 1, n))
    q2_comps = tuple(c.upper() for c in _as_tuple(spec.q2_components))
    if (n > LARGE_OUTPUT_QUBITS and not spec.q2_indices
            and len(set(q2_comps)) >= len(AXES) ** 2 and not allow_large_output):
        raise ResourceGuardError(
            f"all pairs x all components for N > {LARGE_OUTPUT_QUBITS} needs "
            "--allow-large-output (quadratic output blowup)")
    one_q = tuple((pos[i], a) for i in q1_sites for a in q1_comps)
    two_q = tuple((pos[i], pos[j], ab[0], ab[1]) for (i, j) in q2_pairs for ab in q2_comps)
    arm_pairs = tuple((pos[i], pos[j]) for (i, j) in lattice.arm_pairs())
    return ObservableRequest(one_q=one_q, two_q=two_q, trace=True, s2=True,
                             osee=True, arm_pairs=arm_pairs)


def _initial_state(spec: RunSpec, lattice: Lattice):
    n = spec.n
    path = lattice.mpo_path
    if spec.load_files_prefix:
        state = states.load_state(spec.load_files_prefix + ".state.bin")
        if len(state) != n:
            raise SpecError(f"loaded state has {len(state)} sites, expected {n}")
        if spec.b_initial_rho_compression:
            from .tensor_core import compress
            state = compress(state, spec.cut_off_rho, spec.max_dim_rho)
        return state
    if spec.init_graph_state:
        pos = lattice.position_of
        pairs = [(pos[i], pos[j]) for (i, j) in spec.init_graph_state]
        return states.graph_state(pairs, n)
    pauli = spec.init_pauli_state
    if isinstance(pauli, str):
        site_specs = [pauli] * n
    else:
        if len(pauli) != n:
            raise SpecError("init_pauli_state must list one state per qubit")
        site_specs = list(pauli)
    return states.pauli_product([site_specs[s] for s in path], n)


def _site_of(lattice: Lattice, position: int) -> int:
    return lattice.mpo_path[position]


def _atomic_write(path: str, payload: str | bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    scratch = os.environ.get(SCRATCH_ENV) or directory
    mode = "wb" if isinstance(payload, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=scratch, prefix=".lindbladtn-")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(payload)
        try:
            os.replace(tmp, path)
        except OSError:
            import shutil
            shutil.move(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _write_outputs(spec: RunSpec, lattice: Lattice, record: TrajectoryRecord) -> dict:
    base = spec.output_base()
    site_of = {p: s for p, s in enumerate(lattice.mpo_path)}
    times = record.times
    rows1 = ["# time qubit component value imag"]
    max_imag = record.diagnostics.get("max_imag")
    for (p, a), series in sorted(record.one_q.items(), key=lambda kv: (site_of[kv[0][0]], kv[0][1])):
        for k, t in enumerate(times):
            rows1.append(f"{t:.10e} {site_of[p]} {a} {series[k]:.12e} "
                         f"{(max_imag[k] if max_imag is not None else 0.0):.3e}")
    rows2 = ["# time qubit_a qubit_b component value imag"]
    for (p, q, a, b), series in sorted(
            record.two_q.items(), key=lambda kv: (site_of[kv[0][0]], site_of[kv[0][1]], kv[0][2], kv[0][3])):
        for k, t in enumerate(times):
            rows2.append(f"{t:.10e} {site_of[p]} {site_of[q]} {a}{b} {series[k]:.12e} "
                         f"{(max_imag[k] if max_imag is not None else 0.0):.3e}")
    rowsg = ["# time trace s2 osee_center max_imag arm_asym"]
    s2 = record.globals.get("s2")
    osee = record.globals.get("osee_center")
    asym = record.diagnostics.get("arm_asym")
    for k, t in enumerate(times):
        rowsg.append(
            f"{t:.10e} {record.globals['trace'][k]:.12e} "
            f"{(s2[k] if s2 is not None else float('nan')):.12e} "
            f"{(osee[k] if osee is not None else float('nan')):.12e} "
            f"{(max_imag[k] if max_imag is not None else 0.0):.3e} "
            f"{(asym[k] if asym is not None else float('nan')):.6e}")
    files = {
        "input": base + ".input.txt",
        "obs-1q": base + ".obs-1q.dat",
        "obs-2q": base + ".obs-2q.dat",
        "global": base + ".global.dat",
    }
    _atomic_write(files["input"], emit_runspec(spec))
    _atomic_write(files["obs-1q"], "\n".join(rows1) + "\n")
    _atomic_write(files["obs-2q"], "\n".join(rows2) + "\n")
    _atomic_write(files["global"], "\n".join(rowsg) + "\n")
    return files


@dataclasses.dataclass
class RunResult:
    status: int
    files: dict
    message: str = ""
    record: TrajectoryRecord | None = None


def run(spec: RunSpec, engine: str = "mpo", allow_large_output: bool = False,
        keep_record: bool = False) -> RunResult:
    """Execute one simulation and write its output files."""
    try:
        lattice = build_run_lattice(spec)
        params = build_model_params(spec, lattice)
        request = _observable_request(spec, lattice, allow_large_output)
        if spec.output_step == 0:
            request = ObservableRequest(arm_pairs=request.arm_pairs)
        if engine == "mpo":
            if spec.n <= 2:
                raise SpecError("the tensor-network solver requires N > 2")
            record, status, message = _run_mpo(spec, lattice, params, request)
        elif engine == "oracle":
            record, status, message = _run_oracle(spec, lattice, params, request)
        else:
            raise SpecError(f"unknown engine {engine!r}")
    except SpecError as err:
        return RunResult(EXIT_PARSE, {}, str(err))
    except ResourceGuardError as err:
        return RunResult(EXIT_GUARD, {}, str(err))
    files = _write_outputs(spec, lattice, record)
    if status == EXIT_OK and spec.b_save_final_state and record.final_state is not None:
        path = spec.output_base() + ".state.bin"
        states.save_state(record.final_state, path)
        files["state"] = path
    return RunResult(status, files, message, record if keep_record else None)


def _run_mpo(spec: RunSpec, lattice: Lattice, params: ModelParams,
             request: ObservableRequest):
    gen = build_liouvillian(lattice, params)
    state = _initial_state(spec, lattice)
    cfg = StepperConfig(
        tau=spec.tau,
        order=spec.trotter_order,
        cutoff=spec.cut_off_rho,
        max_dim=spec.max_dim_rho,
        hermitize_every=spec.force_rho_hermitian_step,
        force_trace=spec.b_force_rho_trace,
        output_every=max(spec.output_step, 1),
    )
    try:
        record = evolve(state, gen, spec.t_init, spec.t_final, cfg, request,
                        breakdown_threshold=BREAKDOWN_THRESHOLD)
    except EvolutionBreakdown as err:
        return err.record, EXIT_BREAKDOWN, str(err)
    except ValueError as err:
        raise SpecError(str(err)) from err
    return record, EXIT_OK, ""


def _run_oracle(spec: RunSpec, lattice: Lattice, params: ModelParams,
                request: ObservableRequest):
    if spec.load_files_prefix or spec.init_graph_state:
        state = _initial_state(spec, lattice)
        rho0 = dense_from_vectorized(state).rho
        # state tensors are in path order; dense axes must follow lattice sites
        rho0 = _permute_dense(rho0, lattice)
    else:
        rho0 = _dense_pauli_product(spec)
    n_steps = round((spec.t_final - spec.t_init) / spec.tau)
    if abs((spec.t_final - spec.t_init) / spec.tau - n_steps) > 1e-9 * max(1.0, n_steps):
        raise SpecError("(t_final - t_init)/tau must be an integer")
    every = max(spec.output_step, 1)
    ks = sorted(set(list(range(0, n_steps + 1, every)) + [n_steps]))
    out_times = [spec.t_init + k * spec.tau for k in ks]
    request = dataclasses.replace(
        request,
        one_q=tuple((_site_of_req(lattice, p), a) for (p, a) in request.one_q),
        two_q=tuple((_site_of_req(lattice, p), _site_of_req(lattice, q), a, b)
                    for (p, q, a, b) in request.two_q),
        arm_pairs=tuple((_site_of_req(lattice, p), _site_of_req(lattice, q))
                        for (p, q) in request.arm_pairs),
        osee_bond=None,
    )
    record = dense_record(params, lattice, rho0, spec.t_init, spec.t_final,
                          request, out_times)
    record = _relabel_record_to_positions(record, lattice)
    return record, EXIT_OK, ""


def _site_of_req(lattice: Lattice, position: int) -> int:
    return lattice.mpo_path[position]


def _relabel_record_to_positions(record: TrajectoryRecord, lattice: Lattice) -> TrajectoryRecord:
    pos = lattice.position_of
    return TrajectoryRecord(
        times=record.times,
        one_q={(pos[i], a): v for (i, a), v in record.one_q.items()},
        two_q={(pos[i], pos[j], a, b): v for (i, j, a, b), v in record.two_q.items()},
        globals=record.globals,
        diagnostics=record.diagnostics,
        final_state=None,
    )


def _permute_dense(rho: np.ndarray, lattice: Lattice) -> np.ndarray:
    n = lattice.n_qubits
    path = list(lattice.mpo_path)
    if path == list(range(n)):
        return rho
    # axis p of the path-ordered state holds lattice site path[p]
    perm = [0] * n
    for p, s in enumerate(path):
        perm[s] = p
    t = rho.reshape((2,) * (2 * n))
    t = t.transpose([perm[s] for s in range(n)] + [n + perm[s] for s in range(n)])
    return t.reshape(2 ** n, 2 ** n)


def _dense_pauli_product(spec: RunSpec) -> np.ndarray:
    from .superop import PAULIS
    n = spec.n
    pauli = spec.init_pauli_state
    site_specs = [pauli] * n if isinstance(pauli, str) else list(pauli)
    if len(site_specs) != n:
        raise SpecError("init_pauli_state must list one state per qubit")
    rho = np.array([[1.0]], dtype=complex)
    for text in site_specs:
        ps = states.PauliSpec.parse(text) if isinstance(text, str) else text
        axis = {"x": 1, "y": 2, "z": 3}[ps.axis]
        rho = np.kron(rho, 0.5 * (PAULIS[0] + ps.sign * PAULIS[axis]))
    return rho


def sweep(specs, workers: int = 1, engine: str = "mpo",
          allow_large_output: bool = False) -> list[RunResult]:
    """Run independent simulations concurrently; outputs match sequential runs."""
    specs = list(specs)
    if workers <= 1 or len(specs) <= 1:
        return [run(s, engine=engine, allow_large_output=allow_large_output) for s in specs]
    results: list[RunResult | None] = [None] * len(specs)
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(run, s, engine, allow_large_output): k
                   for k, s in enumerate(specs)}
        for fut in concurrent.futures.as_completed(futures):
            results[futures[fut]] = fut.result()
    return results  # type: ignore[return-value]


@dataclasses.dataclass
class CompareReport:
    """Maximum absolute deviation between the two engines per observable series."""

    per_series: dict
    max_abs_diff: float
    times: np.ndarray

    def format(self) -> str:
        lines = [f"{'series':>24s}  max|delta|"]
        for key, d in sorted(self.per_series.items(), key=lambda kv: -kv[1]):
            lines.append(f"{str(key):>24s}  {d:.3e}")
        lines.append(f"overall max |delta| = {self.max_abs_diff:.3e}")
        return "\n".join(lines)


def compare(spec: RunSpec, allow_large_output: bool = False) -> CompareReport:
    """Run the tensor-network engine and the dense oracle on one spec and
    report the largest deviation of every recorded series."""
    if spec.n > MAX_ORACLE_QUBITS:
        raise ResourceGuardError(
            f"compare needs the dense oracle and is limited to N <= {MAX_ORACLE_QUBITS}")
    lattice = build_run_lattice(spec)
    params = build_model_params(spec, lattice)
    request = _observable_request(spec, lattice, allow_large_output)
    rec_m, status, message = _run_mpo(spec, lattice, params, request)
    if status != EXIT_OK:
        raise RuntimeError(f"tensor-network run failed: {message}")
    rec_o, _, _ = _run_oracle(spec, lattice, params, request)
    if rec_m.times.shape != rec_o.times.shape or np.max(np.abs(rec_m.times - rec_o.times)) > 1e-9:
        raise RuntimeError("engines recorded different time grids")
    per = {}
    for key, series in rec_m.one_q.items():
        per[("1q",) + key] = float(np.max(np.abs(series - rec_o.one_q[key])))
    for key, series in rec_m.two_q.items():
        per[("2q",) + key] = float(np.max(np.abs(series - rec_o.two_q[key])))
    overall = max(per.values()) if per else 0.0
    return CompareReport(per_series=per, max_abs_diff=overall, times=rec_m.times)


def info(path: str) -> str:
    """Summarize a saved state file."""
    from .observables import trace_rho
    from .tensor_core import norm
    state = read_state_file(path)
    dims = state.bond_dims()
    lines = [
        f"sites: {len(state)}",
        f"bond dims: {dims if dims else '[]'} (max {max(dims) if dims else 1})",
        f"norm: {norm(state):.12e}",
        f"trace: {trace_rho(state):.12e}",
    ]
    return "\n".join(lines)


def _cmd_run(args) -> int:
    try:
        spec = parse_runspec(open(args.file).read())
    except (OSError, SpecError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_PARSE
    result = run(spec, engine=args.engine, allow_large_output=args.allow_large_output)
    if result.message:
        print(result.message, file=sys.stderr)
    for kind, path in sorted(result.files.items()):
        print(f"{kind}: {path}")
    return result.status


def _cmd_sweep(args) -> int:
    paths = sorted(globmod.glob(args.pattern)) if any(c in args.pattern for c in "*?[") \
        else [args.pattern]
    if not paths:
        print(f"error: no input files match {args.pattern!r}", file=sys.stderr)
        return EXIT_PARSE
    specs = []
    for p in paths:
        try:
            specs.append(parse_runspec(open(p).read()))
        except (OSError, SpecError) as err:
            print(f"error: {p}: {err}", file=sys.stderr)
            return EXIT_PARSE
    results = sweep(specs, workers=args.workers, engine=args.engine,
                    allow_large_output=args.allow_large_output)
    status = EXIT_OK
    for p, r in zip(paths, results):
        print(f"{p}: status {r.status}" + (f" ({r.message})" if r.message else ""))
        status = max(status, r.status)
    return status


def _cmd_compare(args) -> int:
    try:
        spec = parse_runspec(open(args.file).read())
    except (OSError, SpecError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_PARSE
    try:
        report = compare(spec, allow_large_output=args.allow_large_output)
    except ResourceGuardError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_GUARD
    print(report.format())
    return EXIT_OK


def _cmd_info(args) -> int:
    try:
        print(info(args.statefile))
    except Exception as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_PARSE
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lindbladtn",
        description="Tensor-network Lindblad solver: run, sweep, compare, inspect.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one input file")
    p_run.add_argument("file")
    p_run.add_argument("--engine", choices=("mpo", "oracle"), default="mpo")
    p_run.add_argument("--allow-large-output", action="store_true")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run many input files concurrently")
    p_sweep.add_argument("pattern", help="input file or glob")
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.add_argument("--engine", choices=("mpo", "oracle"), default="mpo")
    p_sweep.add_argument("--allow-large-output", action="store_true")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_cmp = sub.add_parser("compare", help="tensor network vs dense oracle")
    p_cmp.add_argument("file")
    p_cmp.add_argument("--allow-large-output", action="store_true")
    p_cmp.set_defaults(func=_cmd_compare)

    p_info = sub.add_parser("info", help="summarize a saved state file")
    p_info.add_argument("statefile")
    p_info.set_defaults(func=_cmd_info)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

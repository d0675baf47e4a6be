"""Tensor-network solver for the Lindblad master equation on qubit lattices.

Vectorized density matrices evolve as matrix-product states under a
matrix-product-operator Liouvillian, with SVD-truncated Trotter stepping,
observable extraction, a dense brute-force oracle for cross-validation,
and a batch CLI for parameter sweeps.
"""

from .tensor_core import (BondSpectrum, OperatorMPO, StructureError, VectorizedState,
                          apply_mpo, canonicalize, inner, schmidt_spectrum,
                          truncate_bond)
from .model import (LabFrameParams, Lattice, LiouvillianMPO, ModelParams,
                    build_lattice, build_liouvillian, custom_lattice,
                    effective_nnn_coupling, lab_to_rotating)
from .states import PauliSpec, graph_state, load_state, pauli_product, save_state
from .evolution import (EvolutionBreakdown, PropagatorSet, StepperConfig, evolve,
                        force_trace, hermitize, make_propagators, step)
from .observables import (ObservableRequest, TrajectoryRecord, concurrence,
                          connected_corr, expect_1q, expect_2q, measure_state,
                          osee, reduced_dm_2q, renyi2, trace_rho)
from .oracle import (DenseGenerator, DenseState, ResourceGuardError,
                     dense_evolve, dense_generator_apply, dense_record)

__version__ = "0.1.0"

__all__ = [
    "BondSpectrum", "OperatorMPO", "StructureError", "VectorizedState",
    "apply_mpo", "canonicalize", "inner", "schmidt_spectrum", "truncate_bond",
    "LabFrameParams", "Lattice", "LiouvillianMPO", "ModelParams",
    "build_lattice", "build_liouvillian", "custom_lattice",
    "effective_nnn_coupling", "lab_to_rotating",
    "PauliSpec", "graph_state", "load_state", "pauli_product", "save_state",
    "EvolutionBreakdown", "PropagatorSet", "StepperConfig", "evolve",
    "force_trace", "hermitize", "make_propagators", "step",
    "ObservableRequest", "TrajectoryRecord", "concurrence", "connected_corr",
    "expect_1q", "expect_2q", "measure_state", "osee", "reduced_dm_2q",
    "renyi2", "trace_rho",
    "DenseGenerator", "DenseState", "ResourceGuardError", "dense_evolve",
    "dense_generator_apply", "dense_record",
]

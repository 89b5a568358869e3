"""Symmetric measurement-only Clifford circuits: tableau simulation, a percolation
oracle for the measurement-only line, channel dynamics and finite-size scaling."""

from .clifford import (CliffordGate, PauliOperator, StabilizerState, apply_clifford, clip_gauge,
                       contains_up_to_sign, entanglement_entropy, measure_pauli)
from .symmetry import (SymmetricGatePool, build_symmetric_pool, duality_transform, is_symmetric,
                       sample_uniform_clifford, symmetry_generators)
from .circuits import (CircuitConfig, CircuitEvent, EventKind, Probes, TrajectoryRecord, apply_event,
                       entangle_ancilla, entangle_scrambled_ancillas, layered_step, run_trajectory,
                       sample_event)
from .channel import (StabilizerGroupState, channel_measure, channel_unitary, is_steady_state,
                      time_to_steady)
from .percolation import (PercolationState, ReconstructedStabilizerSet, entropy_from_clusters,
                          percolation_update, reconstruct_stabilizers, standard_bond_sample)
from .analysis import (CollapseResult, EntropyCurve, FitResult, aggregate, fit_log_profile,
                       fit_log_time, s_topo, scaling_collapse)
from .sweep import RunManifest, emit_plot_data, parse_manifest, run_oracle_check, run_sweep
from . import _backend

__version__ = "0.1.0"


def backend() -> str:
    """Name of the active kernel backend, ``compiled`` or ``python``."""
    return _backend.name()

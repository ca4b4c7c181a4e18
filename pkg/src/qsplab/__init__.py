"""Simulation toolkit for quadrature-sign parity (QSP) encoded qubits in bosonic modes."""

__version__ = "0.1.0"

from .encoding import LogicalState, apo_set, logical_fidelity, logical_qubit, logical_state, trace_distance
from .fock import CutoffError, DensityMatrix, FockSpace, QuadratureError, StateVector, TrajectoryEnsemble
from .gates import PrecisionError, cphase, joint_parity, parity_rotation, truncation_budget
from .mbqc import BudgetError, GraphPattern, qubit_oracle, simulate_pattern
from .measurement import ZeroProbabilityError, measure_logical_x, measure_logical_z, measure_xy
from .noise import CatParams, ConvergenceError, avg_fidelity, threshold_scan
from .states import ThermalParams, default_cutoff, dephase, displaced_thermal

__all__ = [
    "BudgetError", "CatParams", "ConvergenceError", "CutoffError", "DensityMatrix", "FockSpace", "GraphPattern",
    "LogicalState", "PrecisionError", "QuadratureError", "StateVector", "ThermalParams", "TrajectoryEnsemble",
    "ZeroProbabilityError", "__version__", "apo_set", "avg_fidelity", "cphase", "default_cutoff", "dephase",
    "displaced_thermal", "joint_parity", "logical_fidelity", "logical_qubit", "logical_state", "measure_logical_x",
    "measure_logical_z", "measure_xy", "parity_rotation", "qubit_oracle", "simulate_pattern", "threshold_scan",
    "trace_distance", "truncation_budget",
]

"""Optimal control of flying-qubit emission from a truncated transmon.

The library models the emitter with a non-Hermitian effective Hamiltonian,
propagates it with piecewise-constant controls, extracts the emitted
single-photon wavepacket and optimizes drives and couplings with a
projected L-BFGS method.
"""

from .emitter import EmitterModel, effective_hamiltonian
from .field import FlyingQubitState, TargetShape, flying_qubit_state, ideal_coupling, sample_shape
from .objectives import ConstraintTransform, Objective, ShapingProblem, objective_value_and_gradient
from .optimize import OptimizationResult, OptimizerConfig, minimize
from .propagation import ControlPulse, TimeGrid, build_chain, evolve_density
from .units import angular_to_mhz, mhz_to_angular

__version__ = "0.1.0"

__all__ = [
    "ConstraintTransform", "ControlPulse", "EmitterModel", "FlyingQubitState", "Objective",
    "OptimizationResult", "OptimizerConfig", "ShapingProblem", "TargetShape", "TimeGrid",
    "angular_to_mhz", "build_chain", "effective_hamiltonian", "evolve_density",
    "flying_qubit_state", "ideal_coupling", "minimize", "mhz_to_angular",
    "objective_value_and_gradient", "sample_shape",
]

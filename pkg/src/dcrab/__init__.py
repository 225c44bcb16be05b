"""Derivative-free quantum optimal control with randomized truncated bases."""

from .dynamics import Model, Propagation, build_model, gradient_kernel, propagate
from .objectives import ObjectiveSpec, compose_objective, local_invariants
from .optimizer import (
    OptimizationRecord,
    SearchConfig,
    SimulationProblem,
    nelder_mead,
    run_crab,
    run_dcrab,
)
from .pulses import BasisSet, Pulse, TimeGrid, assemble_pulse, sample_basis

__version__ = "1.0.0"

__all__ = [
    "BasisSet",
    "Model",
    "ObjectiveSpec",
    "OptimizationRecord",
    "Propagation",
    "Pulse",
    "SearchConfig",
    "SimulationProblem",
    "TimeGrid",
    "assemble_pulse",
    "build_model",
    "compose_objective",
    "gradient_kernel",
    "local_invariants",
    "nelder_mead",
    "propagate",
    "run_crab",
    "run_dcrab",
    "sample_basis",
    "__version__",
]

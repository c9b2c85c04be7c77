"""Dissipative singlet pumping for a pair of trapped-ion qubits.

Simulates two protocols that drive two co-trapped qubits into the
maximally entangled spin singlet through engineered dissipation, and
cross-validates the full Lindblad master-equation treatment against a
closed-form effective rate model.

Submodules
----------
hilbert
    Tensor-product layouts, sparse operators, states.
model
    Physical parameters, Hamiltonian/jump builders, Lindblad generator.
dynamics
    Master-equation integration, exact propagators, steady states.
measurement
    Bright/dark detection, analysis pulses, population reconstruction.
ratemodel
    Coarse-grained rate equations and closed-form steady state.
protocol
    Continuous/stepwise sequences, ensemble averaging, error budgets.
config / cli
    TOML run configuration, presets, and the command-line entry point.
"""

from singletpump.hilbert import (
    DensityState,
    HilbertLayout,
    QuantumOperator,
    build_layout,
)
from singletpump.model import ChannelConfig, ParameterError, SchemeParams
from singletpump.dynamics import Trajectory, evolve
from singletpump.measurement import simulate_detection, spin_populations
from singletpump.ratemodel import (
    EffectiveRates,
    compute_effective_rates,
    steady_state_closed_form,
)
from singletpump.protocol import (
    ContinuousSchedule,
    EnsembleSpec,
    PopulationRecord,
    StepwiseSchedule,
    compute_t2pi,
    run_continuous,
    run_stepwise,
)

__version__ = "0.1.0"

__all__ = [
    "DensityState",
    "HilbertLayout",
    "QuantumOperator",
    "build_layout",
    "ChannelConfig",
    "ParameterError",
    "SchemeParams",
    "Trajectory",
    "evolve",
    "simulate_detection",
    "spin_populations",
    "EffectiveRates",
    "compute_effective_rates",
    "steady_state_closed_form",
    "ContinuousSchedule",
    "EnsembleSpec",
    "PopulationRecord",
    "StepwiseSchedule",
    "compute_t2pi",
    "run_continuous",
    "run_stepwise",
    "__version__",
]

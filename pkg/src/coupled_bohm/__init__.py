"""Two linearly coupled quantum oscillators: exact spectral evolution, first-order closed forms and Bohmian trajectories."""

__version__ = "0.1.0"

from .bohmian import (
    EnergyBreakdown,
    EnsembleSpec,
    TrajectorySample,
    bohmian_energies,
    equivariance_check,
    guidance_field,
    integrate_trajectory,
    phase_S,
    quantum_potential,
    sample_initial_ensemble,
    scaling_map,
)
from .errors import (
    ConfigError,
    CoupledBohmError,
    FirstOrderWarning,
    GuardTriggered,
    QuadratureError,
    SingularityError,
    StepUnderflow,
)
from .model import DerivedFrequencies, OscillatorParams, derive_frequencies
from .spectral import SpectralState, project_coefficients, psi_exact, psi_first_order

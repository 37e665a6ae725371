"""Measurement-based feedback on trapped bosons via single-atom correlation fields."""

from .corrdyn import (
    FeedbackConfig,
    QuadSettings,
    ZVector,
    alpha_fourier,
    bec_initial,
    feedback_full,
    feedback_reduced,
    sadm,
)
from .errors import BosefeedError, CapacityError, ConfigError, QuadratureError, ToleranceError, TruncationError
from .freeprop import PropagationMatrix, evolve_correlation, free_particle_Vz, harmonic_Vz
from .hilbert import TrapBasis
from .observables import MomentReport, moments

__all__ = [
    "BosefeedError", "CapacityError", "ConfigError", "FeedbackConfig", "MomentReport",
    "PropagationMatrix", "QuadSettings", "QuadratureError", "ToleranceError", "TrapBasis",
    "TruncationError", "ZVector", "alpha_fourier", "bec_initial", "evolve_correlation",
    "feedback_full", "feedback_reduced", "free_particle_Vz", "harmonic_Vz", "moments", "sadm",
]
__version__ = "0.1.0"

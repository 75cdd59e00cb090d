"""Numerical lab for heat kernel estimates of subordinate Brownian motion."""

from .bernstein import H, comparability, evaluate, levy_tail, phi_inverse, scaling_indices
from .errors import ConfigError, DiagnosticError, DomainError, NumericError, PreconditionError, SBMLabError
from .exponents import LaplaceExponentSpec, load_spec, spec_from_dict
from .green import green_numeric, transience_check, verify_green
from .heatkernel import (
    EnvelopeConfig,
    KernelGrid,
    PointGrid,
    blowup_probe,
    chi_square_tail,
    envelope,
    p_fourier,
    p_subordinate,
    sbm_tail,
    verify_main_theorem,
    verify_near_diagonal,
)
from .subordinator import law, sample, tail_prob

__version__ = "0.1.0"

"""Ground states: constrained minimisation, Weinstein ascent, shooting oracle, certificates."""

from .certify import (
    certify,
    extract_omega,
    pohozaev_check,
    pohozaev_factor,
    rayleigh_omega,
    residual_norm,
    scale_to_omega,
)
from .flow import compute_ground_state, ground_state_from_profile, maximize_weinstein, minimize_mass_constrained
from .shooting import ShootOptions, ShootingProfile, shoot_elliptic, shoot_profile
from .types import FlowOptions, GroundState, OmegaReport, PohozaevReport

__all__ = [
    "FlowOptions",
    "GroundState",
    "OmegaReport",
    "PohozaevReport",
    "ShootOptions",
    "ShootingProfile",
    "certify",
    "compute_ground_state",
    "extract_omega",
    "ground_state_from_profile",
    "maximize_weinstein",
    "minimize_mass_constrained",
    "pohozaev_check",
    "pohozaev_factor",
    "rayleigh_omega",
    "residual_norm",
    "scale_to_omega",
    "shoot_elliptic",
    "shoot_profile",
]

"""Radial grids, the discrete Hardy operator and scalar functionals."""

from .field import RadialField
from .functionals import (
    ObservableSet,
    apply_H,
    bottom_of_spectrum,
    h1_inner,
    h1_norm,
    hardy_slack,
    inner,
    mass,
    observables,
    quadratic_form,
    scale_field,
    tail_mass,
    variance,
    weinstein,
)
from .grid import Grading, RadialGrid, gaussian_quadrature_error, make_grid, sphere_area
from .model import ModelParams, hardy_constant, model_violations, parse_real
from .operator import HardyOperator, hardy_operator

__all__ = [
    "Grading",
    "HardyOperator",
    "ModelParams",
    "ObservableSet",
    "RadialField",
    "RadialGrid",
    "apply_H",
    "bottom_of_spectrum",
    "gaussian_quadrature_error",
    "h1_inner",
    "h1_norm",
    "hardy_constant",
    "hardy_operator",
    "hardy_slack",
    "inner",
    "make_grid",
    "mass",
    "observables",
    "model_violations",
    "parse_real",
    "quadratic_form",
    "scale_field",
    "sphere_area",
    "tail_mass",
    "variance",
    "weinstein",
]

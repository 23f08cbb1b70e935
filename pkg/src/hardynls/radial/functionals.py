"""Scalar functionals, the Hamiltonian and the mass-invariant rescaling."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh_tridiagonal

from ..errors import DomainError, ResolutionError, SingularModelError
from .field import RadialField, require_same_grid
from .model import ModelParams
from .operator import hardy_operator


@dataclass(frozen=True)
class ObservableSet:
    mass: float
    kinetic: float
    hardy_term: float
    hardy_norm_sq: float
    lp_alpha2: float
    energy: float

    def to_dict(self) -> dict:
        return asdict(self)


ZERO_OBSERVABLES = ObservableSet(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def compose_observables(form: float, mass: float, hardy: float, lp: float, p: ModelParams) -> ObservableSet:
    """Assemble the set from its discrete parts; the energy is built from the same numbers."""
    kinetic = form + p.c * hardy
    hardy_norm_sq = kinetic - p.c * hardy
    energy = 0.5 * kinetic - 0.5 * p.c * hardy - lp / (p.alpha + 2)
    return ObservableSet(mass, kinetic, hardy, hardy_norm_sq, lp, energy)


def observables(u: RadialField, p: ModelParams) -> ObservableSet:
    op = hardy_operator(u.grid, p)
    g = op.to_g(u.values)
    return compose_observables(op.form(g), op.mass(g), op.hardy(g), op.lp(g), p)


def mass(u: RadialField, p: ModelParams) -> float:
    op = hardy_operator(u.grid, p)
    return op.mass(op.to_g(u.values))


def variance(u: RadialField, p: ModelParams) -> float:
    """||x u||^2 by grid quadrature."""
    op = hardy_operator(u.grid, p)
    return op.variance(op.to_g(u.values))


def tail_mass(u: RadialField, p: ModelParams, radius: float) -> float:
    """Mass carried by nodes with r > radius."""
    op = hardy_operator(u.grid, p)
    g = op.to_g(u.values)
    sel = u.grid.r > radius
    return float(np.dot(op.w[sel], np.abs(g[sel]) ** 2))


def weinstein(u: RadialField, p: ModelParams) -> float:
    """Gagliardo-Nirenberg quotient J(u); invariant under amplitude and mass-preserving scaling."""
    obs = observables(u, p)
    return weinstein_from(obs, p)


def weinstein_from(obs: ObservableSet, p: ModelParams) -> float:
    if obs.mass == 0:
        raise DomainError("Weinstein functional undefined for the zero field")
    if not obs.hardy_norm_sq > 0:
        raise SingularModelError(
            "non-positive Hardy norm; c is at or above the discrete Hardy constant",
            hardy_norm_sq=obs.hardy_norm_sq,
        )
    d, a = p.d, p.alpha
    # exponents split so that amplitude cancels exactly: lp/(M^m N^n) with m + n = (a+2)/2
    ratio = obs.lp_alpha2 / obs.mass ** ((a + 2) / 2)
    return ratio * (obs.mass / obs.hardy_norm_sq) ** (d * a / 4)


def apply_H(u: RadialField, p: ModelParams) -> RadialField:
    """(-Δ - c/r^2) u, self-adjoint for the grid inner product."""
    op = hardy_operator(u.grid, p)
    lg = op.stiffness(op.to_g(u.values))
    wd = u.grid.weights(p.d)
    # <v, H u>_grid = sum w_d conj(v) Hu must equal the form sum conj(g_v) (L g_u)
    out = np.zeros_like(lg)
    out[:-1] = lg[:-1] * op.rpow[:-1] / wd[:-1]
    return RadialField(u.grid, out)


def inner(u: RadialField, v: RadialField, p: ModelParams) -> complex:
    """L^2 inner product <u, v>, antilinear in u."""
    require_same_grid(u, v)
    wd = u.grid.weights(p.d)
    return complex(np.dot(wd, np.conj(u.values) * v.values))


def h1_inner(u: RadialField, v: RadialField, p: ModelParams) -> complex:
    """<u, v>_{L^2} + <grad u, grad v>_{L^2}, with the gradient term from the discrete form."""
    require_same_grid(u, v)
    op = hardy_operator(u.grid, p)
    gu, gv = op.to_g(u.values), op.to_g(v.values)
    kin = op.form(gu, gv) + p.c * complex(np.dot(op.hw, np.conj(gu) * gv))
    return complex(np.dot(op.w, np.conj(gu) * gv)) + kin


def h1_norm(u: RadialField, p: ModelParams) -> float:
    obs = observables(u, p)
    return math.sqrt(obs.mass + obs.kinetic)


def quadratic_form(u: RadialField, v: RadialField, p: ModelParams) -> complex:
    """<u, H v> through the grid inner product."""
    return inner(u, apply_H(v, p), p)


# -- rescaling --------------------------------------------------------------


def resample_g(u: RadialField, p: ModelParams | None, radii: np.ndarray) -> np.ndarray:
    """Values of the regular factor g = r^rho u at arbitrary radii (zero beyond Rmax)."""
    grid = u.grid
    rho = p.rho if p is not None else 0.0
    g = grid.r**rho * u.values
    s = np.asarray(grid.s)
    # mirror in s: g is even at the origin; close with the Dirichlet zero
    ss = np.concatenate((-s[::-1], s))
    gg = np.concatenate((g[::-1], g))
    spline = CubicSpline(ss, gg, bc_type="not-a-knot")
    radii = np.asarray(radii, dtype=float)
    inside = radii <= grid.Rmax
    out = np.zeros(radii.shape, dtype=gg.dtype)
    out[inside] = spline(grid.s_of_r(radii[inside]))
    return out


def scale_field(
    u: RadialField,
    lam: float,
    p: ModelParams | None = None,
    *,
    resolution_tol: float = 1e-4,
    amplitude: float = 1.0,
) -> RadialField:
    """v(x) = lam^(d/2) u(lam x), resampled onto the same grid.

    ``p`` supplies d and the singular exponent; interpolation is done on the
    regular factor so r^(-rho) profiles are resampled without loss. The
    optional ``amplitude`` multiplies the result (used for frequency scaling).
    Raises ResolutionError when the rescaled profile leaves the grid or is too
    narrow to resolve (detected through mass conservation).
    """
    if not lam > 0:
        raise DomainError(f"scale factor must be positive, got {lam!r}")
    if lam == 1 and amplitude == 1:
        return u
    d = p.d if p is not None else None
    if d is None:
        raise DomainError("scale_field needs the model parameters for the dimension")
    rho = p.rho
    grid = u.grid
    g_new = lam ** (d / 2 - rho) * resample_g(u, p, lam * np.asarray(grid.r))
    v = RadialField(grid, amplitude * g_new / grid.r**rho)
    m0 = mass(u, p) * amplitude**2
    if m0 > 0:
        m1 = mass(v, p)
        err = abs(m1 - m0) / m0
        if err > resolution_tol:
            raise ResolutionError(
                f"rescaling by {lam:g} changes the mass by {err:.2e} (tolerance {resolution_tol:g})",
                lam=lam,
                relative_mass_error=err,
            )
    return v


# -- spectral diagnostics ------------------------------------------------------


def bottom_of_spectrum(grid, p: ModelParams) -> float:
    """Smallest Rayleigh quotient <u,Hu>/<u,u> over the grid (Dirichlet at Rmax)."""
    op = hardy_operator(grid, p)
    dg, off = op.symmetric_tridiagonal(op.w)
    return float(eigh_tridiagonal(dg, off, eigvals_only=True, select="i", select_range=(0, 0))[0])


def hardy_slack(grid, p: ModelParams) -> float:
    """Discrete slack tau_h in ||u||^2_c >= (1 - max(c,0)/lambda - tau_h) ||grad u||^2.

    The extreme ratio is attained by the lowest generalised eigenvector of the
    form against the discrete Hardy weights.
    """
    if p.c <= 0:
        return 0.0
    op = hardy_operator(grid, p)
    dg, off = op.symmetric_tridiagonal(op.hw)
    nu = float(eigh_tridiagonal(dg, off, eigvals_only=True, select="i", select_range=(0, 0))[0])
    ratio = nu / (nu + p.c)
    return max(0.0, (1 - p.c / p.lambda_d) - ratio)

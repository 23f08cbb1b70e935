"""Pohozaev certificates, multiplier extraction and frequency scaling."""

from __future__ import annotations

import math

import numpy as np

from ..errors import CertificationError, DomainError
from ..radial import ModelParams, RadialField, observables, scale_field
from ..radial.functionals import ObservableSet
from ..radial.operator import hardy_operator
from .types import OmegaReport, PohozaevReport

DEFAULT_CERT_TOL = 1e-4


def pohozaev_from(obs: ObservableSet, omega: float, p: ModelParams, tol: float | None = DEFAULT_CERT_TOL) -> PohozaevReport:
    d, a = p.d, p.alpha
    lp, nrm, m = obs.lp_alpha2, obs.hardy_norm_sq, obs.mass
    e1 = _rel(nrm - d * a / (2 * a + 4) * lp, nrm)
    e2 = _rel(omega * m - (2 * a + 4 - d * a) / (2 * a + 4) * lp, omega * m)
    e3 = _rel(obs.energy, nrm) if p.is_critical else None
    return PohozaevReport(e1, e2, e3, tol)


def pohozaev_check(Q: RadialField, omega: float, p: ModelParams, tol: float | None = DEFAULT_CERT_TOL) -> PohozaevReport:
    """Relative residuals of the Pohozaev identities at frequency ``omega``."""
    return pohozaev_from(observables(Q, p), omega, p, tol)


def _rel(num: float, scale: float) -> float:
    if scale == 0:
        return math.inf if num != 0 else 0.0
    return abs(num) / abs(scale)


def rayleigh_omega(obs: ObservableSet) -> float:
    """Multiplier obtained by pairing the elliptic equation with Q."""
    return (obs.lp_alpha2 - obs.hardy_norm_sq) / obs.mass


def pohozaev_factor(p: ModelParams) -> float:
    """Ratio -E(Q)/(omega M) forced by the Pohozaev identities (zero when critical)."""
    d, a = p.d, p.alpha
    return (4 - d * a) / (2 * (2 * a + 4 - d * a))


def extract_omega(
    Q: RadialField,
    p: ModelParams,
    M: float,
    d_M: float | None,
    tol: float = 1e-4,
) -> OmegaReport:
    """Multiplier of the minimiser together with its consistency diagnostics.

    Raises CertificationError if the Rayleigh value and the Pohozaev-corrected
    energy ratio disagree by more than ``tol`` (subcritical runs only).
    """
    obs = observables(Q, p)
    om = rayleigh_omega(obs)
    if not om > 0:
        raise CertificationError(f"multiplier must be positive, got {om:.6g}", omega=om)
    crit = None
    if p.is_critical:
        crit = _rel(om * obs.mass - (2 / p.d) * obs.hardy_norm_sq, om * obs.mass)
    app = pc = disc = None
    if d_M is not None and not p.is_critical:
        app = -d_M / M
        pc = app / pohozaev_factor(p)
        disc = abs(pc - om) / om
        if disc > tol:
            raise CertificationError(
                f"multiplier estimates disagree: rayleigh {om:.10g} vs energy-based {pc:.10g}",
                omega=om,
                omega_pohozaev=pc,
                omega_appendix=app,
                discrepancy=disc,
            )
    return OmegaReport(om, app, pc, disc, crit)


def residual_norm(Q: RadialField, omega: float, p: ModelParams) -> float:
    """Grid L^2 norm of -ΔQ - cQ/r^2 + omega Q - |Q|^alpha Q."""
    op = hardy_operator(Q.grid, p)
    g = op.to_g(Q.values)
    res = op.stiffness(g) + op.w * (omega - op.kappa * np.abs(g) ** p.alpha) * g
    return float(math.sqrt(np.sum(np.abs(res[:-1]) ** 2 / op.w[:-1])))


def scale_to_omega(
    Q: RadialField,
    omega_new: float,
    p: ModelParams,
    omega: float = 1.0,
    resolution_tol: float = 1e-4,
) -> RadialField:
    """Map a solution at frequency ``omega`` to one at ``omega_new``.

    Q_new(x) = k^(1/alpha) Q(sqrt(k) x) with k = omega_new/omega; for the
    critical power this is the mass-preserving scaling.
    """
    if not (omega_new > 0 and omega > 0):
        raise DomainError("frequencies must be positive")
    k = omega_new / omega
    if k == 1:
        return Q
    lam = math.sqrt(k)
    amp = k ** (1 / p.alpha) / lam ** (p.d / 2)
    return scale_field(Q, lam, p, amplitude=amp, resolution_tol=resolution_tol)


def certify(report: PohozaevReport, tol: float = DEFAULT_CERT_TOL) -> PohozaevReport:
    if not report.passes(tol):
        raise CertificationError(
            f"Pohozaev residual {report.max_residual:.3e} exceeds {tol:g}", report=report.to_dict()
        )
    return report

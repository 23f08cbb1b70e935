"""Option and result records for ground-state computations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..errors import ConfigurationError
from ..radial import ModelParams, RadialField

INITIAL_GUESSES = ("gaussian", "factored-singular", "file")


@dataclass(frozen=True)
class FlowOptions:
    """Controls for the normalized gradient flow and the Weinstein ascent.

    ``width`` fixes the Gaussian initial width; when omitted the width is
    chosen to minimise the energy within the Gaussian family (flow) or set
    to 1/sqrt(omega) (ascent). A ``seed`` perturbs the initial guess with
    smooth positive noise so independent runs start from distinct data.
    """

    pseudo_time_step: float = 1.0
    max_iters: int = 20000
    energy_tol: float = 1e-13
    residual_tol: float = 1e-6
    step_tol: float = 1e-12
    initial_guess: str = "factored-singular"
    width: float | None = None
    seed: int | None = None
    path: str | None = None

    def __post_init__(self):
        bad = []
        if not self.pseudo_time_step > 0:
            bad.append("pseudo_time_step > 0 required")
        if not (isinstance(self.max_iters, int) and self.max_iters > 0):
            bad.append("max_iters must be a positive integer")
        if not self.energy_tol > 0:
            bad.append("energy_tol > 0 required")
        if not self.residual_tol > 0:
            bad.append("residual_tol > 0 required")
        if not self.step_tol > 0:
            bad.append("step_tol > 0 required")
        if self.initial_guess not in INITIAL_GUESSES:
            bad.append(f"initial_guess must be one of {INITIAL_GUESSES}")
        if self.initial_guess == "file" and not self.path:
            bad.append("initial_guess 'file' needs a path")
        if self.width is not None and not self.width > 0:
            bad.append("width > 0 required")
        if bad:
            raise ConfigurationError(bad[0], violations=bad)


@dataclass(frozen=True)
class PohozaevReport:
    e1: float
    e2: float
    e3: float | None
    tolerance: float | None = None

    @property
    def max_residual(self) -> float:
        vals = [self.e1, self.e2] + ([self.e3] if self.e3 is not None else [])
        return max(vals)

    def passes(self, tol: float | None = None) -> bool:
        tol = self.tolerance if tol is None else tol
        return bool(math.isfinite(self.max_residual) and self.max_residual <= tol)

    def to_dict(self) -> dict:
        return {
            "e1": self.e1,
            "e2": self.e2,
            "e3": self.e3,
            "max": self.max_residual,
            "tolerance": self.tolerance,
            "passes": self.passes() if self.tolerance is not None else None,
        }


@dataclass(frozen=True)
class OmegaReport:
    """Multiplier estimates.

    ``omega`` is the Rayleigh value certified by the elliptic equation.
    ``omega_appendix`` is the literal ratio -d_M/M; ``omega_pohozaev`` is the
    same ratio corrected by the Pohozaev factor, which is what must agree
    with ``omega`` at a true minimiser.
    """

    omega: float
    omega_appendix: float | None
    omega_pohozaev: float | None
    discrepancy: float | None
    critical_identity_residual: float | None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class GroundState:
    Q: RadialField
    params: ModelParams
    omega: float
    mass: float
    energy: float
    d_M: float | None
    residual: float
    pohozaev: PohozaevReport
    method: str
    iterations: int
    energy_history: tuple = ()
    energy_lower_bound: float | None = None
    omega_report: OmegaReport | None = None
    provenance: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "method": self.method,
            "omega": self.omega,
            "mass": self.mass,
            "energy": self.energy,
            "d_M": self.d_M,
            "residual": self.residual,
            "iterations": self.iterations,
            "pohozaev": self.pohozaev.to_dict(),
            "omega_report": self.omega_report.to_dict() if self.omega_report else None,
            "energy_lower_bound": self.energy_lower_bound,
            "provenance": self.provenance,
        }

"""Model parameters for the focusing NLS with an inverse-square potential."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from ..errors import ConfigurationError

# alpha is compared against 4/d after float round-trips such as float("4/3")
CRITICAL_ATOL = 1e-12


def hardy_constant(d: int) -> float:
    """Sharp Hardy constant ((d-2)/2)^2."""
    return ((d - 2) / 2) ** 2


def parse_real(value) -> float:
    """Accept floats, ints and rational strings like ``"4/3"``."""
    if isinstance(value, str):
        return float(Fraction(value.strip()))
    return float(value)


@dataclass(frozen=True)
class ModelParams:
    """Dimension, coupling and nonlinearity power.

    ``reference=True`` admits ``c = 0``, which is reserved for classical-NLS
    cross-checks (the equation of interest has ``c != 0``).
    """

    d: int
    c: float
    alpha: float
    reference: bool = False

    def __post_init__(self):
        problems = model_violations(self.d, self.c, self.alpha, self.reference)
        if problems:
            raise ConfigurationError(problems[0], violations=problems)

    @property
    def lambda_d(self) -> float:
        return hardy_constant(self.d)

    @property
    def rho(self) -> float:
        """Leading exponent of ground states at the origin, Q ~ r^(-rho)."""
        return (self.d - 2) / 2 - math.sqrt(self.lambda_d - self.c)

    @property
    def effective_dim(self) -> float:
        """Dimension seen by the regular factor g = r^rho u."""
        return self.d - 2 * self.rho

    @property
    def critical_alpha(self) -> float:
        return 4 / self.d

    @property
    def is_critical(self) -> bool:
        return abs(self.alpha - 4 / self.d) <= CRITICAL_ATOL

    @property
    def is_subcritical(self) -> bool:
        return self.alpha < 4 / self.d - CRITICAL_ATOL

    def with_c(self, c: float, reference: bool | None = None) -> "ModelParams":
        ref = self.reference if reference is None else reference
        return ModelParams(self.d, c, self.alpha, reference=ref or c == 0)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "c": self.c,
            "alpha": self.alpha,
            "reference": self.reference,
            "lambda_d": self.lambda_d,
            "rho": self.rho,
        }


def model_violations(d, c, alpha, reference=False) -> list[str]:
    """Every violated admissibility condition, each naming the inequality."""
    out = []
    if not isinstance(d, int) or isinstance(d, bool) or d < 3:
        out.append(f"d >= 3 (integer) required, got d = {d!r}")
        return out
    lam = hardy_constant(d)
    if not math.isfinite(c):
        out.append(f"c must be finite, got {c!r}")
    elif not c < lam:
        out.append(f"c < lambda({d}) = {lam:g} required strictly, got c = {c:g}")
    if c == 0 and not reference:
        out.append("c = 0 is admitted only in reference mode (c != 0 otherwise)")
    if not (math.isfinite(alpha) and alpha > 0):
        out.append(f"alpha > 0 required, got alpha = {alpha!r}")
    elif alpha > 4 / (d - 2) + CRITICAL_ATOL:
        out.append(f"alpha <= 4/(d-2) = {4 / (d - 2):g} required, got alpha = {alpha:g}")
    return out

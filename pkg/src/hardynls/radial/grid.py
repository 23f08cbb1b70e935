"""Cell-centred radial grids defined by a smooth map r = r(s).

Nodes sit at s = i - 1/2 (i = 1..N) and cell faces at integer s, so the origin
is a face and is never evaluated. The last node lies exactly on Rmax and carries
the homogeneous Dirichlet condition; its quadrature weight is halved.

Quadrature is the midpoint rule in s applied to f(r(s)) r(s)^(d-1) r'(s).
Because that integrand vanishes to high order at s = 0, the rule is far more
accurate than its nominal second order for smooth radial integrands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import gamma, gammainc

from ..errors import ConfigurationError


def sphere_area(d: float) -> float:
    """Surface area of the unit sphere in R^d (d may be fractional)."""
    return 2 * math.pi ** (d / 2) / gamma(d / 2)


@dataclass(frozen=True)
class Grading:
    kind: str = "uniform"
    ratio: float | None = None

    def __post_init__(self):
        if self.kind == "uniform":
            if self.ratio is not None:
                raise ConfigurationError("uniform grading takes no ratio")
        elif self.kind == "geometric":
            if self.ratio is None or not self.ratio > 1:
                raise ConfigurationError(f"geometric grading needs ratio > 1, got {self.ratio!r}")
        else:
            raise ConfigurationError(f"unknown grading kind {self.kind!r}")

    @classmethod
    def parse(cls, spec) -> "Grading":
        if isinstance(spec, Grading):
            return spec
        if spec is None or spec == "uniform":
            return cls("uniform")
        if isinstance(spec, dict):
            return cls(spec.get("kind", "uniform"), spec.get("ratio"))
        if isinstance(spec, (int, float)):
            return cls("geometric", float(spec))
        raise ConfigurationError(f"cannot parse grading {spec!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "ratio": self.ratio}

    def refined(self) -> "Grading":
        if self.kind == "uniform":
            return self
        return Grading("geometric", math.sqrt(self.ratio))


@dataclass(frozen=True)
class RadialGrid:
    """Immutable grid description; arrays are derived lazily and cached."""

    N: int
    Rmax: float
    grading: Grading = field(default_factory=Grading)

    # -- coordinate map ---------------------------------------------------
    @cached_property
    def _scale(self) -> float:
        smax = self.N - 0.5
        if self.grading.kind == "uniform":
            return self.Rmax / smax
        q = self.grading.ratio
        return self.Rmax / math.expm1(smax * math.log(q))

    def r_of_s(self, s):
        s = np.asarray(s, dtype=float)
        if self.grading.kind == "uniform":
            return self._scale * s
        return self._scale * np.expm1(s * math.log(self.grading.ratio))

    def dr_ds(self, s):
        s = np.asarray(s, dtype=float)
        if self.grading.kind == "uniform":
            return np.full_like(s, self._scale)
        lq = math.log(self.grading.ratio)
        return self._scale * lq * np.exp(s * lq)

    def s_of_r(self, r):
        r = np.asarray(r, dtype=float)
        if self.grading.kind == "uniform":
            return r / self._scale
        return np.log1p(r / self._scale) / math.log(self.grading.ratio)

    # -- arrays -------------------------------------------------------------
    @cached_property
    def s(self) -> np.ndarray:
        return _frozen(np.arange(1, self.N + 1) - 0.5)

    @cached_property
    def r(self) -> np.ndarray:
        r = self.r_of_s(self.s)
        r[-1] = self.Rmax
        return _frozen(r)

    @cached_property
    def faces(self) -> np.ndarray:
        """Cell faces r(0)=0, r(1), ..., r(N-1); face k separates nodes k-1 and k (0-based)."""
        return _frozen(self.r_of_s(np.arange(self.N, dtype=float)))

    @cached_property
    def jacobian(self) -> np.ndarray:
        return _frozen(self.dr_ds(self.s))

    def weights(self, d: float, shift: float = 0.0) -> np.ndarray:
        """Weights w_i with sum w_i f(r_i) ~ sigma_{d-1} int f(r) r^(d-1) dr.

        ``shift`` multiplies the integrand by r^shift (used for factored
        representations); the sphere constant always belongs to ``d``.
        """
        return _weights(self, float(d), float(shift))

    def refined(self) -> "RadialGrid":
        """Twice the nodes with half the spacing in the computational coordinate."""
        return RadialGrid(2 * self.N, self.Rmax, self.grading.refined())

    def to_dict(self) -> dict:
        return {"N": self.N, "Rmax": self.Rmax, "grading": self.grading.to_dict()}


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


_WEIGHT_CACHE: dict = {}


def _weights(grid: RadialGrid, d: float, shift: float) -> np.ndarray:
    key = (grid, d, shift)
    w = _WEIGHT_CACHE.get(key)
    if w is None:
        w = sphere_area(d) * grid.r ** (d - 1 + shift) * grid.jacobian
        w[-1] *= 0.5
        w = _frozen(w)
        if len(_WEIGHT_CACHE) > 256:
            _WEIGHT_CACHE.clear()
        _WEIGHT_CACHE[key] = w
    return w


def make_grid(N: int, Rmax: float, grading="uniform") -> RadialGrid:
    if not isinstance(N, (int, np.integer)) or N < 16:
        raise ConfigurationError(f"N >= 16 required, got N = {N!r}")
    if not (isinstance(Rmax, (int, float)) and math.isfinite(Rmax) and Rmax > 0):
        raise ConfigurationError(f"Rmax > 0 required, got Rmax = {Rmax!r}")
    return RadialGrid(int(N), float(Rmax), Grading.parse(grading))


def gaussian_quadrature_error(grid: RadialGrid, d: int) -> float:
    """Relative error of the grid quadrature of exp(-|x|^2) over the ball of radius Rmax."""
    exact = math.pi ** (d / 2) * gammainc(d / 2, grid.Rmax**2)
    approx = float(np.dot(grid.weights(d), np.exp(-grid.r**2)))
    return abs(approx - exact) / exact

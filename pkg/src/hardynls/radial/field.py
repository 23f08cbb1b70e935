"""Immutable radial fields sampled at grid nodes."""

from __future__ import annotations

import numbers

import numpy as np

from ..errors import DomainError, UsageError
from .grid import RadialGrid


class RadialField:
    """Values u(r_i) at the nodes of ``grid``; the last node is forced to zero."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: RadialGrid, values, *, enforce_boundary: bool = True):
        vals = np.array(values, copy=True)
        if vals.dtype.kind not in "fc":
            vals = vals.astype(float)
        if vals.shape != (grid.N,):
            raise UsageError(f"field has shape {vals.shape}, grid expects ({grid.N},)")
        if not np.all(np.isfinite(vals)):
            raise DomainError("field contains non-finite values")
        if enforce_boundary:
            vals[-1] = 0
        vals.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", vals)

    def __setattr__(self, name, value):
        raise AttributeError("RadialField is immutable")

    def __reduce__(self):
        return (RadialField, (self.grid, self.values), None)

    @classmethod
    def from_function(cls, grid: RadialGrid, f) -> "RadialField":
        return cls(grid, f(np.asarray(grid.r)))

    @classmethod
    def zeros(cls, grid: RadialGrid, dtype=float) -> "RadialField":
        return cls(grid, np.zeros(grid.N, dtype=dtype))

    @property
    def r(self) -> np.ndarray:
        return self.grid.r

    @property
    def is_real(self) -> bool:
        return self.values.dtype.kind == "f"

    def conj(self) -> "RadialField":
        return RadialField(self.grid, np.conj(self.values))

    def abs(self) -> "RadialField":
        return RadialField(self.grid, np.abs(self.values))

    def _check(self, other: "RadialField"):
        if not isinstance(other, RadialField):
            return NotImplemented
        if other.grid != self.grid:
            raise UsageError("fields live on different grids")
        return None

    def __add__(self, other):
        if (bad := self._check(other)) is NotImplemented:
            return bad
        return RadialField(self.grid, self.values + other.values)

    def __sub__(self, other):
        if (bad := self._check(other)) is NotImplemented:
            return bad
        return RadialField(self.grid, self.values - other.values)

    def __mul__(self, k):
        if isinstance(k, numbers.Number):
            return RadialField(self.grid, self.values * k)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, k):
        if isinstance(k, numbers.Number):
            return RadialField(self.grid, self.values / k)
        return NotImplemented

    def __neg__(self):
        return RadialField(self.grid, -self.values)

    def __repr__(self):
        return f"RadialField(N={self.grid.N}, Rmax={self.grid.Rmax}, dtype={self.values.dtype})"


def require_same_grid(*fields: RadialField) -> RadialGrid:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise UsageError("fields live on different grids")
    return grid

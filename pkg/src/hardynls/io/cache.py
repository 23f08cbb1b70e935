"""Versioned text cache for ground-state profiles.

Layout::

    # hardynls-groundstate
    # version = 1
    # d = 3
    # c = 1.8750000000000000e-01
    ...
    r,Q
    <r_0>,<Q_0>
    ...

Every float is written with 17 significant digits, so reading a file and
writing it again reproduces it byte for byte.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import DataAvailabilityError
from ..radial import Grading, ModelParams, RadialField, make_grid
from .persist import fmt

MAGIC = "# hardynls-groundstate"
FORMAT_VERSION = 1
_FLOAT_KEYS = ("c", "alpha", "omega", "M", "energy", "Rmax", "e1", "e2", "e3", "residual")


def _grading_str(gr: Grading) -> str:
    return "uniform" if gr.kind == "uniform" else f"geometric:{fmt(gr.ratio)}"


def _parse_grading(s: str) -> Grading:
    if s == "uniform":
        return Grading()
    kind, _, ratio = s.partition(":")
    if kind != "geometric":
        raise DataAvailabilityError(f"unknown grading {s!r} in cache header")
    return Grading("geometric", float(ratio))


def write_groundstate(path, Q: RadialField, p: ModelParams, omega: float, header_extra: dict | None = None) -> Path:
    """Write ``Q`` with its model, grid and certification numbers."""
    grid = Q.grid
    vals = np.asarray(Q.values)
    if vals.dtype.kind == "c":
        if np.any(vals.imag != 0):
            raise DataAvailabilityError("only real profiles can be cached")
        vals = vals.real
    extra = dict(header_extra or {})
    head = {
        "version": str(FORMAT_VERSION),
        "d": str(p.d),
        "c": fmt(p.c),
        "alpha": fmt(p.alpha),
        "reference": "true" if p.reference else "false",
        "omega": fmt(omega),
        "N": str(grid.N),
        "Rmax": fmt(grid.Rmax),
        "grading": _grading_str(grid.grading),
    }
    for k in ("M", "energy", "e1", "e2", "e3", "residual"):
        v = extra.pop(k, None)
        head[k] = "none" if v is None else fmt(v)
    for k, v in sorted(extra.items()):
        head[k] = str(v)
    lines = [MAGIC] + [f"# {k} = {v}" for k, v in head.items()] + ["r,Q"]
    r = np.asarray(grid.r)
    lines += [f"{fmt(a)},{fmt(b)}" for a, b in zip(r, vals)]
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def write_groundstate_from(path, gs) -> Path:
    """Cache a GroundState together with its certificates."""
    extra = {
        "M": gs.mass,
        "energy": gs.energy,
        "e1": gs.pohozaev.e1,
        "e2": gs.pohozaev.e2,
        "e3": gs.pohozaev.e3,
        "residual": gs.residual,
        "method": gs.method,
    }
    return write_groundstate(path, gs.Q, gs.params, gs.omega, extra)


def read_groundstate_text(path) -> tuple[dict, list[str], list[str]]:
    """Header (as strings) and the raw node/value strings."""
    path = Path(path)
    if not path.exists():
        raise DataAvailabilityError(f"ground-state cache {str(path)!r} does not exist")
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if not lines or lines[0] != MAGIC:
        raise DataAvailabilityError(f"{str(path)!r} is not a ground-state cache file")
    head = {}
    i = 1
    while i < len(lines) and lines[i].startswith("# "):
        k, _, v = lines[i][2:].partition(" = ")
        head[k] = v
        i += 1
    if lines[i] != "r,Q":
        raise DataAvailabilityError("cache file lacks the r,Q column header")
    rs, qs = [], []
    for ln in lines[i + 1 :]:
        if not ln:
            continue
        a, _, b = ln.partition(",")
        rs.append(a)
        qs.append(b)
    return head, rs, qs


def read_groundstate(path) -> tuple[dict, RadialField, ModelParams]:
    """Header with typed values, the profile and its model parameters."""
    raw, rs, qs = read_groundstate_text(path)
    if int(raw.get("version", "0")) != FORMAT_VERSION:
        raise DataAvailabilityError(f"unsupported cache version {raw.get('version')!r}")
    head: dict = {}
    for k, v in raw.items():
        if k in _FLOAT_KEYS:
            head[k] = None if v == "none" else float(v)
        elif k in ("d", "N", "version"):
            head[k] = int(v)
        elif k == "reference":
            head[k] = v == "true"
        else:
            head[k] = v
    p = ModelParams(head["d"], head["c"], head["alpha"], reference=head.get("reference", False))
    grid = make_grid(head["N"], head["Rmax"], _parse_grading(raw["grading"]))
    if len(rs) != grid.N:
        raise DataAvailabilityError(f"cache has {len(rs)} nodes, header says {grid.N}")
    r_file = np.array([float(x) for x in rs])
    if not np.allclose(r_file, grid.r, rtol=1e-14, atol=0):
        raise DataAvailabilityError("cached nodes do not match the grid described in the header")
    Q = RadialField(grid, np.array([float(x) for x in qs]))
    return head, Q, p

"""Cutoff profiles, localized virial quantities and virial-identity diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import PchipInterpolator

from .errors import ConstructionError, UsageError
from .radial import RadialField, RadialGrid

R_BREAK = 1 + 1 / math.sqrt(3)
V_STAR = 2 + 4 / (3 * math.sqrt(3))  # 2[r - (r-1)^3] at r = R_BREAK
CUTOFF_KINDS = ("standard", "lemma43")


class CutoffProfile:
    """theta(r) = r^2 near 0, constant beyond 2, with theta'' <= 2 everywhere.

    ``lemma43``: vartheta = 2r on [0,1], 2[r - (r-1)^3] up to 1 + 1/sqrt(3),
    then a cubic Hermite bridge decreasing to 0 at r = 2 with zero end slopes.
    ``standard``: the cubic Hermite bridge from (1, 2, slope 2) to (2, 0, slope 0).
    """

    def __init__(self, kind: str):
        if kind not in CUTOFF_KINDS:
            raise ConstructionError(f"unknown cutoff kind {kind!r}; expected one of {CUTOFF_KINDS}")
        self.kind = kind
        self.bridge_start = R_BREAK if kind == "lemma43" else 1.0
        self._theta_bridge0 = self._closed_theta(self.bridge_start)
        self._theta_end = self._theta_bridge0 + self._bridge_integral(2.0)

    # -- pieces -------------------------------------------------------------------
    def _closed_theta(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "lemma43":
            return np.where(r <= 1, r**2, r**2 - (r - 1) ** 4 / 2)
        return r**2

    def _bridge(self, r):
        """vartheta and vartheta' on the bridge."""
        r = np.asarray(r, dtype=float)
        if self.kind == "lemma43":
            L = 2 - R_BREAK
            t = (r - R_BREAK) / L
            return V_STAR * (1 - 3 * t**2 + 2 * t**3), V_STAR * (-6 * t + 6 * t**2) / L
        t = r - 1
        return 6 * t**3 - 10 * t**2 + 2 * t + 2, 18 * t**2 - 20 * t + 2

    def _bridge_integral(self, r):
        """int_{bridge_start}^{r} vartheta, by Gauss-Legendre (exact for the cubic)."""
        r0 = np.asarray(r, dtype=float)
        r = np.atleast_1d(r0)
        x, wq = leggauss(3)
        a = self.bridge_start
        half = 0.5 * (r - a)
        nodes = a + half[:, None] * (x[None, :] + 1)
        vals = self._bridge(nodes)[0]
        out = half * (vals @ wq)
        return out.reshape(r0.shape) if r0.ndim else float(out[0])

    # -- public evaluators ----------------------------------------------------------
    def vartheta(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        a = self.bridge_start
        m1 = r <= 1
        out[m1] = 2 * r[m1]
        if self.kind == "lemma43":
            m2 = (r > 1) & (r <= a)
            out[m2] = 2 * (r[m2] - (r[m2] - 1) ** 3)
        mb = (r > a) & (r < 2)
        out[mb] = self._bridge(r[mb])[0]
        return out

    def dvartheta(self, r):
        """theta''(r)."""
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        a = self.bridge_start
        m1 = r <= 1
        out[m1] = 2.0
        if self.kind == "lemma43":
            m2 = (r > 1) & (r <= a)
            out[m2] = 2 * (1 - 3 * (r[m2] - 1) ** 2)
        mb = (r > a) & (r < 2)
        out[mb] = self._bridge(r[mb])[1]
        return out

    def theta(self, r):
        r = np.asarray(r, dtype=float)
        a = self.bridge_start
        out = np.empty_like(r)
        mc = r <= a
        out[mc] = self._closed_theta(r[mc])
        mb = (r > a) & (r < 2)
        if np.any(mb):
            out[mb] = self._theta_bridge0 + self._bridge_integral(r[mb])
        out[r >= 2] = self._theta_end
        return out

    @property
    def plateau(self) -> float:
        """Constant value of theta for r >= 2."""
        return float(self._theta_end)

    def audit(self, n: int = 200001) -> dict:
        """Check the defining properties on a fine grid; raises ConstructionError on failure."""
        r = np.linspace(0, 3, n)
        th2 = self.dvartheta(r)
        problems = []
        if np.max(th2) > 2 + 1e-12:
            problems.append(f"theta'' exceeds 2 (max {np.max(th2):.3e})")
        checks = {
            "theta(1)": (float(self.theta(np.array([1.0]))[0]), 1.0),
            "vartheta(1)": (float(self.vartheta(np.array([1.0]))[0]), 2.0),
            "vartheta(2)": (float(self.vartheta(np.array([2.0]))[0]), 0.0),
        }
        if self.kind == "lemma43":
            checks["vartheta(1+1/sqrt3)"] = (float(self.vartheta(np.array([R_BREAK]))[0]), V_STAR)
        for name, (got, want) in checks.items():
            if abs(got - want) > 1e-14 * max(1.0, abs(want)):
                problems.append(f"{name} = {got!r}, expected {want!r}")
        rb = r[(r > self.bridge_start) & (r < 2)]
        slope = self.dvartheta(rb)
        if self.kind == "lemma43" and not np.all(slope < 0):
            problems.append("vartheta is not strictly decreasing on the bridge")
        # theta continuity at the breakpoints and at 2
        for b in (1.0, self.bridge_start, 2.0):
            lo, hi = self.theta(np.array([b - 1e-12, b + 1e-12]))
            if abs(hi - lo) > 1e-10:
                problems.append(f"theta jumps at r = {b}")
        if problems:
            raise ConstructionError(problems[0], problems=problems, kind=self.kind)
        return {
            "kind": self.kind,
            "max_theta_pp": float(np.max(th2)),
            "max_bridge_slope": float(np.max(slope)) if len(slope) else None,
            "plateau": self.plateau,
            "breakpoints": {k: v[0] for k, v in checks.items()},
        }


def build_cutoff(kind: str) -> CutoffProfile:
    prof = CutoffProfile(kind)
    prof.audit()
    return prof


@dataclass(frozen=True)
class VirialKit:
    profile: CutoffProfile
    R: float
    d: int
    grid: RadialGrid
    phi: np.ndarray
    dphi: np.ndarray
    ddphi: np.ndarray
    lap_phi: np.ndarray
    chi1: np.ndarray
    chi2: np.ndarray

    def audit(self) -> dict:
        r = np.asarray(self.grid.r)
        radial = 2 - self.dphi / r
        return {
            "profile": self.profile.kind,
            "R": self.R,
            "min_chi1": float(np.min(self.chi1)),
            "min_chi2": float(np.min(self.chi2)),
            "min_2_minus_dphi_over_r": float(np.min(radial)),
            "eps_star": check_nonneg_condition(self, 0.0).eps_star,
        }


def build_kit(profile: CutoffProfile, R: float, grid: RadialGrid, d: int) -> VirialKit:
    """Tabulate phi_R = R^2 theta(r/R) and its derived weights on the grid."""
    if not R > 1:
        raise UsageError(f"R > 1 required, got {R!r}")
    r = np.asarray(grid.r)
    s = r / R
    phi = R**2 * profile.theta(s)
    dphi = R * profile.vartheta(s)
    ddphi = profile.dvartheta(s)
    lap = ddphi + (d - 1) * dphi / r
    chi1 = 2 - ddphi
    chi2 = 2 * d - lap
    arrays = [phi, dphi, ddphi, lap, chi1, chi2]
    for a in arrays:
        a.setflags(write=False)
    kit = VirialKit(profile, float(R), d, grid, *arrays)
    a = kit.audit()
    tol = -1e-12
    if a["min_chi1"] < tol or a["min_chi2"] < tol or a["min_2_minus_dphi_over_r"] < tol:
        raise ConstructionError("virial kit violates a sign condition", audit=a)
    return kit


def virial_potential(u: RadialField, kit: VirialKit) -> float:
    """V_phi(u) = int phi_R |u|^2 dx."""
    if u.grid != kit.grid:
        raise UsageError("field and kit live on different grids")
    w = u.grid.weights(kit.d)
    return float(np.dot(w * kit.phi, np.abs(u.values) ** 2))


@dataclass(frozen=True)
class NonnegReport:
    passes: bool
    eps: float
    min_margin: float
    r_at_min: float | None
    eps_star: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def check_nonneg_condition(kit: VirialKit, eps: float) -> NonnegReport:
    """Test chi1 - eps/(d+2) chi2^(d/2) >= 0 at every node with r > R."""
    if eps < 0:
        raise UsageError("eps must be non-negative")
    r = np.asarray(kit.grid.r)
    sel = r > kit.R
    d = kit.d
    chi1, chi2 = kit.chi1[sel], np.maximum(kit.chi2[sel], 0)
    if not np.any(sel):
        return NonnegReport(True, eps, math.inf, None, math.inf)
    margin = chi1 - eps / (d + 2) * chi2 ** (d / 2)
    i = int(np.argmin(margin))
    with np.errstate(divide="ignore"):
        ratios = np.where(chi2 > 0, (d + 2) * chi1 / chi2 ** (d / 2), np.inf)
    eps_star = float(np.min(ratios))
    return NonnegReport(bool(margin[i] >= 0), eps, float(margin[i]), float(r[sel][i]), eps_star)


# -- virial identity -------------------------------------------------------------------


@dataclass(frozen=True)
class VirialReport:
    status: str  # "ok" | "not-applicable"
    reason: str | None
    target: float
    max_rel_deviation: float | None
    richardson_value: float | None
    richardson_rel_deviation: float | None
    xu_relative_variation: float | None
    samples: int
    spacing: float | None
    resampled: bool
    second_differences: tuple = ()

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["second_differences"] = list(self.second_differences)
        return d


def _not_applicable(reason, target):
    return VirialReport("not-applicable", reason, target, None, None, None, None, 0, None, False)


def second_differences(t: np.ndarray, x: np.ndarray, stride: int = 1) -> np.ndarray:
    h = (t[-1] - t[0]) / (len(t) - 1)
    H = stride * h
    return (x[2 * stride :] - 2 * x[stride:-stride] + x[: -2 * stride]) / H**2


def virial_identity_check(series, E0: float, t_window: tuple | None = None, rel_uniform: float = 1e-9) -> VirialReport:
    """Compare the discrete second derivative of ||xu||^2 with 16 E0.

    Samples outside the window are ignored; a flagged (truncation-affected)
    sample inside the window makes the result not applicable. Non-uniform
    sampling is resampled by monotone cubic interpolation before differencing.
    """
    target = 16 * E0
    t = np.asarray(series.t, dtype=float)
    x = np.asarray(series.xu_sq, dtype=float)
    valid = np.asarray(series.xu_valid, dtype=bool)
    if t_window is not None:
        sel = (t >= t_window[0]) & (t <= t_window[1])
        t, x, valid = t[sel], x[sel], valid[sel]
    if len(t) < 5:
        return _not_applicable("fewer than 5 samples in the window", target)
    if not np.all(valid):
        return _not_applicable("flagged samples (tail mass) inside the window", target)
    dts = np.diff(t)
    resampled = False
    if np.max(np.abs(dts - dts.mean())) > rel_uniform * dts.mean():
        h = float(np.median(dts))
        n = int(math.floor((t[-1] - t[0]) / h + 1e-9)) + 1
        tu = t[0] + h * np.arange(n)
        x = PchipInterpolator(t, x)(tu)
        t = tu
        resampled = True
        if len(t) < 5:
            return _not_applicable("fewer than 5 samples after resampling", target)
    d1 = second_differences(t, x, 1)
    d2 = second_differences(t, x, 2)
    scale = abs(target) if target != 0 else max(float(np.max(np.abs(x))), 1e-300) / (t[-1] - t[0]) ** 2
    dev = float(np.max(np.abs(d1 - target))) / scale
    rich_pts = (4 * d1[1:-1] - d2) / 3
    rich = float(np.mean(rich_pts))
    var = float((np.max(x) - np.min(x)) / np.mean(np.abs(x))) if np.any(x) else 0.0
    return VirialReport(
        "ok",
        None,
        target,
        dev,
        rich,
        abs(rich - target) / scale,
        var,
        len(t),
        float(t[1] - t[0]),
        resampled,
        tuple(float(v) for v in d1),
    )

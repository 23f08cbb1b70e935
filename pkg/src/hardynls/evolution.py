"""Time integration of the radial equation i u_t + Δu + c u/r^2 = -|u|^alpha u.

Both schemes act on the regular factor g = r^rho u and use the same discrete
Hamiltonian as the ground-state solvers, so standing waves computed there are
discrete standing waves here.

``crank-nicolson-relaxed``
    Crank-Nicolson in the linear part with the nonlinear potential frozen at
    half steps through the relaxation recursion
    phi_{n+1/2} = 2 kappa |g_n|^alpha - phi_{n-1/2}.
    Each step is a single complex tridiagonal solve and conserves the discrete
    mass exactly. The first half-step potential (and the one after every dt
    change) is obtained by fixed-point iteration of the implicit midpoint rule.
``strang-split``
    Exact nonlinear phase rotation for dt/2, a Crank-Nicolson linear step,
    and another half rotation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .errors import (
    ConfigurationError,
    DataAvailabilityError,
    DomainError,
    IntegratorFailure,
    StepFailure,
)
from .radial import ModelParams, RadialField
from .radial.functionals import compose_observables, scale_field
from .radial.operator import HardyOperator, hardy_operator

SCHEMES = ("crank-nicolson-relaxed", "strang-split")
SERIES_COLUMNS = ("t", "mass", "kinetic", "hardy_term", "energy", "l_alpha2", "xu_sq", "v_phiR", "dt")


@dataclass(frozen=True)
class EvolutionConfig:
    """Time-stepping controls.

    ``blowup_dt_floor`` defaults to dt0/1000. ``energy_budget`` bounds the
    energy drift relative to max(|E0|, ||u0||^2_{H^1_c}/2, ||u(t)||^2_{H^1_c}/2);
    ``mass_budget``
    bounds the relative mass drift. ``adaptive`` ties dt to the amplitude
    through dt = dt0 (A0/A)^alpha with A = max|u|. ``strang_phase_cap``
    bounds the nonlinear phase increment per Strang substep.
    """

    dt0: float
    t_end: float
    scheme: str = "crank-nicolson-relaxed"
    fixed_point_tol: float = 1e-12
    fixed_point_max_iter: int = 60
    blowup_gradient_factor: float = 1e3
    blowup_dt_floor: float | None = None
    record_every: int = 1
    adaptive: bool = True
    nonlinear: bool = True
    mass_budget: float = 1e-10
    energy_budget: float = 1e-2
    max_steps: int = 10_000_000
    tail_fraction: float = 0.75
    tail_mass_tol: float = 1e-8
    strang_phase_cap: float = 0.05

    def __post_init__(self):
        bad = []
        if not self.dt0 > 0:
            bad.append("dt0 > 0 required")
        if not self.t_end > 0:
            bad.append("t_end > 0 required")
        if self.scheme not in SCHEMES:
            bad.append(f"scheme must be one of {SCHEMES}")
        if not self.blowup_gradient_factor > 1:
            bad.append("blowup_gradient_factor > 1 required")
        if self.blowup_dt_floor is not None and not 0 < self.blowup_dt_floor <= self.dt0:
            bad.append("0 < blowup_dt_floor <= dt0 required")
        if not (isinstance(self.record_every, int) and self.record_every >= 1):
            bad.append("record_every must be a positive integer")
        if not self.fixed_point_tol > 0:
            bad.append("fixed_point_tol > 0 required")
        if not self.strang_phase_cap > 0:
            bad.append("strang_phase_cap > 0 required")
        if bad:
            raise ConfigurationError(bad[0], violations=bad)

    @property
    def dt_floor(self) -> float:
        return self.blowup_dt_floor if self.blowup_dt_floor is not None else self.dt0 * 1e-3


@dataclass(frozen=True)
class TimeSeries:
    """Column arrays sampled at strictly increasing times."""

    t: np.ndarray
    mass: np.ndarray
    kinetic: np.ndarray
    hardy_term: np.ndarray
    energy: np.ndarray
    l_alpha2: np.ndarray
    xu_sq: np.ndarray
    xu_valid: np.ndarray
    v_phiR: np.ndarray
    dt: np.ndarray

    def __len__(self):
        return len(self.t)

    def column(self, name: str) -> np.ndarray:
        return getattr(self, name)

    def rows(self):
        cols = [getattr(self, c) for c in SERIES_COLUMNS]
        for i in range(len(self.t)):
            yield tuple(float(c[i]) for c in cols)

    @classmethod
    def from_records(cls, recs: list[tuple]) -> "TimeSeries":
        names = SERIES_COLUMNS[:-1] + ("xu_valid", "dt")
        arr = {n: [] for n in names}
        for rec in recs:
            for n, v in zip(names, rec):
                arr[n].append(v)
        out = {}
        for n in names:
            a = np.asarray(arr[n], dtype=bool if n == "xu_valid" else float)
            a.setflags(write=False)
            out[n] = a
        return cls(**out)


@dataclass(frozen=True)
class EvolutionOutcome:
    kind: str  # "Completed" | "BlowUp"
    t_final: float
    T_estimate: float | None = None
    T_bracket: tuple | None = None
    diagnostics: dict = field(default_factory=dict)
    final: RadialField | None = None

    @property
    def is_blowup(self) -> bool:
        return self.kind == "BlowUp"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "t_final": self.t_final,
            "T_estimate": self.T_estimate,
            "T_bracket": list(self.T_bracket) if self.T_bracket else None,
            "diagnostics": self.diagnostics,
        }


# -- the discrete propagator ------------------------------------------------------


class _Propagator:
    def __init__(self, op: HardyOperator, nonlinear: bool):
        self.op = op
        n = op.n
        af = op.af
        self.n = n
        self.ldiag = np.zeros(n)
        self.ldiag += af[:n]
        self.ldiag[1:] += af[: n - 1]
        self.loff = -af[: n - 1]
        self.w = op.w[:n]
        self.kappa = op.kappa
        self.alpha = op.p.alpha
        self.nonlinear = nonlinear

    def potential(self, g):
        if not self.nonlinear:
            return np.zeros(len(g))
        return self.kappa * np.abs(g) ** self.alpha

    def cn(self, g, phi, dt):
        """Crank-Nicolson step for W g_t = -i (L - W phi) g."""
        n = self.n
        gi = g[:n]
        hd = self.ldiag - self.w * phi[:n]
        hg = hd * gi
        hg[:-1] += self.loff * gi[1:]
        hg[1:] += self.loff * gi[:-1]
        rhs = self.w * gi - 0.5j * dt * hg
        ab = np.empty((3, n), dtype=complex)
        ab[0, 0] = 0
        ab[0, 1:] = 0.5j * dt * self.loff
        ab[1] = self.w + 0.5j * dt * hd
        ab[2, :-1] = 0.5j * dt * self.loff
        ab[2, -1] = 0
        out = np.zeros(len(g), dtype=complex)
        out[:n] = solve_banded((1, 1), ab, rhs, check_finite=False)
        return out

    def midpoint_potential(self, g, dt, tol, max_iter):
        """Potential at the half step from the implicit midpoint fixed point."""
        phi = self.potential(g)
        if not self.nonlinear:
            return phi
        for _ in range(max_iter):
            g1 = self.cn(g, phi, dt)
            new = self.potential(0.5 * (g + g1))
            err = float(np.max(np.abs(new - phi)))
            phi = new
            if err <= tol * max(1.0, float(np.max(np.abs(new)))):
                return phi
        raise StepFailure("fixed-point iteration for the half-step potential did not converge", dt=dt)

    def strang(self, g, dt, phase_cap=math.inf):
        """Strang step, subdivided so the nonlinear phase per substep stays below ``phase_cap``.

        Near a singular weight the potential is large on the innermost cells;
        larger phase increments there feed the stiff modes that the
        Crank-Nicolson substep does not damp.
        """
        n_sub = 1
        if self.nonlinear and math.isfinite(phase_cap):
            n_sub = max(1, math.ceil(dt * float(np.max(self.potential(g))) / phase_cap))
        h = dt / n_sub
        zero = np.zeros(len(g))
        for _ in range(n_sub):
            if self.nonlinear:
                g = g * np.exp(0.5j * h * self.potential(g))
            g = self.cn(g, zero, h)
            if self.nonlinear:
                g = g * np.exp(0.5j * h * self.potential(g))
        return g


def step(
    u: RadialField,
    dt: float,
    p: ModelParams,
    scheme: str = "crank-nicolson-relaxed",
    fixed_point_tol: float = 1e-12,
    nonlinear: bool = True,
    strang_phase_cap: float = 0.05,
) -> RadialField:
    """Advance u by one time step dt (a self-starting step for the relaxed scheme)."""
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt!r}")
    if scheme not in SCHEMES:
        raise ConfigurationError(f"unknown scheme {scheme!r}")
    op = hardy_operator(u.grid, p)
    prop = _Propagator(op, nonlinear)
    g = op.to_g(u.values).astype(complex)
    if scheme == "strang-split":
        g1 = prop.strang(g, dt, strang_phase_cap)
    else:
        phi = prop.midpoint_potential(g, dt, fixed_point_tol, 60)
        g1 = prop.cn(g, phi, dt)
    return RadialField(u.grid, op.to_u(g1))


# -- evolution driver ---------------------------------------------------------------


def evolve(
    u0: RadialField,
    cfg: EvolutionConfig,
    p: ModelParams,
    kit=None,
    observer=None,
) -> tuple[TimeSeries, EvolutionOutcome]:
    """Integrate from t = 0 to cfg.t_end or until blow-up is declared.

    ``kit`` (a VirialKit on the same grid) adds the localized virial column.
    ``observer(t, field)`` is called with immutable snapshots at every
    recorded sample.
    """
    grid = u0.grid
    op = hardy_operator(grid, p)
    if kit is not None and kit.grid != grid:
        raise ConfigurationError("virial kit was built on a different grid")
    prop = _Propagator(op, cfg.nonlinear)
    g = op.to_g(u0.values).astype(complex)
    r = np.asarray(grid.r)
    w_full = op.w
    w_r2 = w_full * r**2
    phi_w = w_full * kit.phi if kit is not None else None
    tail_sel = r > cfg.tail_fraction * grid.Rmax
    inv_rpow = 1 / op.rpow
    alpha = p.alpha

    def obs_of(gv):
        a2 = (gv * np.conj(gv)).real
        lp = float(np.dot(w_full * op.kappa, a2 ** (alpha / 2 + 1)))
        return compose_observables(op.form(gv), float(np.dot(w_full, a2)), float(np.dot(op.hw, a2)), lp, p), a2

    def conserved(o):
        # the linear flow conserves the quadratic part only
        return o.energy if cfg.nonlinear else 0.5 * o.hardy_norm_sq

    obs0, a2 = obs_of(g)
    E0, M0, K0 = conserved(obs0), obs0.mass, obs0.kinetic
    escale = max(abs(E0), 0.5 * obs0.hardy_norm_sq)
    amp0 = float(np.max(np.sqrt(a2) * inv_rpow))
    floor = cfg.dt_floor
    records: list[tuple] = []

    def record(t, obs, a2, dt):
        xu = float(np.dot(w_r2, a2))
        valid = M0 == 0 or float(np.dot(w_full[tail_sel], a2[tail_sel])) <= cfg.tail_mass_tol * M0
        v = float(np.dot(phi_w, a2)) if phi_w is not None else math.nan
        records.append((t, obs.mass, obs.kinetic, obs.hardy_term, obs.energy, obs.lp_alpha2, xu, v, valid, dt))
        if observer is not None:
            observer(t, RadialField(grid, g * inv_rpow))

    record(0.0, obs0, a2, cfg.dt0)
    if M0 == 0:
        return TimeSeries.from_records(records), EvolutionOutcome(
            "Completed", 0.0 if cfg.t_end == 0 else cfg.t_end, diagnostics={"steps": 0}, final=u0
        )

    t = 0.0
    dt = cfg.dt0
    phi = None
    steps = 0
    halvings = 0
    last_rec_step = 0
    kin_hist: list[tuple[float, float]] = [(0.0, K0)]
    obs = obs0
    while t < cfg.t_end * (1 - 1e-14):
        if steps >= cfg.max_steps:
            raise IntegratorFailure("step budget exhausted", series=TimeSeries.from_records(records), t=t)
        if cfg.adaptive and cfg.nonlinear:
            amp = float(np.max(np.abs(g) * inv_rpow))
            target = cfg.dt0 * (amp0 / amp) ** alpha if amp > 0 else cfg.dt0
            if target < 0.8 * dt:
                dt = max(target, floor)
                phi = None
        h = min(dt, cfg.t_end - t)
        try:
            if cfg.scheme == "strang-split":
                g_new = prop.strang(g, h, cfg.strang_phase_cap)
            else:
                if phi is None or h != dt:
                    phi = prop.midpoint_potential(g, h, cfg.fixed_point_tol, cfg.fixed_point_max_iter)
                else:
                    phi = 2 * prop.potential(g) - phi
                g_new = prop.cn(g, phi, h)
        except StepFailure:
            halvings += 1
            if dt / 2 < floor or halvings > 40:
                raise
            dt = dt / 2
            phi = None
            continue
        if h != dt:
            phi = None
        g = g_new
        t += h
        steps += 1
        obs, a2 = obs_of(g)
        kin_hist.append((t, obs.kinetic))
        blow = obs.kinetic > cfg.blowup_gradient_factor * K0 and dt <= floor * (1 + 1e-12)
        done = not t < cfg.t_end * (1 - 1e-14)
        if steps - last_rec_step >= cfg.record_every or blow or done:
            record(t, obs, a2, h)
            last_rec_step = steps
        if blow:
            xu = float(np.dot(w_r2, a2))
            dxu = _variance_rate(op, g)
            lo = t
            hi = _blowup_upper(t, xu, dxu, obs0.energy, kin_hist)
            diag = _diagnostics(obs0, obs, steps, dt, escale)
            diag["variance"] = xu
            diag["variance_rate"] = dxu
            return TimeSeries.from_records(records), EvolutionOutcome(
                "BlowUp", t, T_estimate=t, T_bracket=(lo, hi), diagnostics=diag,
                final=RadialField(grid, g * inv_rpow),
            )
        dm = abs(obs.mass - M0) / M0
        # near focusing the natural scale is the current Hardy norm, not the initial one
        de = abs(conserved(obs) - E0) / max(escale, 0.5 * obs.hardy_norm_sq)
        if dm > cfg.mass_budget or de > cfg.energy_budget:
            series = TimeSeries.from_records(records)
            raise IntegratorFailure(
                "conservation budget exceeded without blow-up signature",
                series=series,
                t=t,
                mass_drift=dm,
                energy_drift=de,
                kinetic_ratio=obs.kinetic / K0,
                dt=dt,
            )
    diag = _diagnostics(obs0, obs, steps, dt, escale)
    diag["energy_drift"] = abs(conserved(obs) - E0) / escale
    return TimeSeries.from_records(records), EvolutionOutcome(
        "Completed", t, diagnostics=diag, final=RadialField(grid, g * inv_rpow)
    )


def _diagnostics(obs0, obs, steps, dt, escale) -> dict:
    return {
        "steps": steps,
        "final_dt": dt,
        "mass_drift": abs(obs.mass - obs0.mass) / obs0.mass,
        "energy_drift": abs(obs.energy - obs0.energy) / escale,
        "energy_scale": escale,
        "kinetic_ratio": obs.kinetic / obs0.kinetic if obs0.kinetic else math.inf,
    }


def _variance_rate(op: HardyOperator, g: np.ndarray) -> float:
    """Exact d/dt of sum w r^2 |g|^2 along the semi-discrete flow W g' = -i(L - W phi) g."""
    dr2 = np.diff(op.r**2)
    return float(2 * np.dot(op.af * dr2, np.imag(np.conj(g[:-1]) * g[1:])))


def _blowup_upper(t, X, dX, E, kin_hist) -> float:
    """Upper end of the blow-up bracket.

    First choice: the positive root of X + X' s + 8 E s^2 = 0 (the variance
    parabola). Otherwise K^(-1/2) is extrapolated linearly to zero.
    """
    if E < 0:
        disc = dX * dX - 32 * E * X
        if disc >= 0:
            s = (-dX - math.sqrt(disc)) / (16 * E)
            if s > 0:
                return t + s
    pts = kin_hist[-min(len(kin_hist), 20):]
    ts = np.array([q[0] for q in pts])
    y = np.array([q[1] for q in pts]) ** -0.5
    if len(ts) >= 2 and y[-1] < y[0]:
        slope, icpt = np.polyfit(ts, y, 1)
        if slope < 0:
            return max(t, -icpt / slope)
    return math.inf


# -- pseudo-conformal transform and field sources --------------------------------------


class StandingWaveSource:
    """Exact solution e^{i omega s} Q, available at every time."""

    def __init__(self, Q: RadialField, omega: float):
        self.Q = Q
        self.omega = omega

    def __call__(self, s: float) -> RadialField:
        return RadialField(self.Q.grid, np.exp(1j * self.omega * s) * self.Q.values)


class SnapshotSource:
    """Fields recorded at discrete times (e.g. from an evolve observer)."""

    def __init__(self, snapshots: dict[float, RadialField], atol: float = 1e-12):
        self.snapshots = dict(snapshots)
        self.atol = atol

    def __call__(self, s: float) -> RadialField:
        for ts, f in self.snapshots.items():
            if abs(ts - s) <= self.atol * max(1.0, abs(s)):
                return f
        horizon = max(self.snapshots) if self.snapshots else None
        raise DataAvailabilityError(f"no snapshot at time {s:g}", requested=s, horizon=horizon)


def pseudo_conformal(u_fn, T: float, t: float, p: ModelParams, resolution_tol: float = 1e-4) -> RadialField:
    """u_T(t, x) = (T-t)^(-d/2) exp(-i|x|^2/(4(T-t))) u(1/(T-t), x/(T-t))."""
    if not p.is_critical:
        raise DomainError("the pseudo-conformal transform is a symmetry only for alpha = 4/d")
    if not T > 0:
        raise DomainError(f"T must be positive, got {T!r}")
    if not (0 <= t < T):
        raise DomainError(f"t must lie in [0, T), got t = {t!r}, T = {T!r}")
    tau = T - t
    u = u_fn(1 / tau)
    lam = 1 / tau
    v = scale_field(u, lam, p, resolution_tol=resolution_tol) if lam != 1 else u
    r = np.asarray(v.grid.r)
    return RadialField(v.grid, np.exp(-1j * r**2 / (4 * tau)) * v.values)

"""Independent shooting solver for the radial elliptic equation.

    Q'' + (d-1)/r Q' + c/r^2 Q - omega Q + |Q|^alpha Q = 0,   Q ~ a r^(-rho) at 0.

The ODE is integrated with an adaptive Runge-Kutta method from a small radius
where a three-term Frobenius expansion supplies the data. The integrals
(mass, gradient, Hardy and L^(alpha+2) terms) are carried along as extra
state components, so no grid quadrature is involved. The amplitude a is
bisected: trajectories that cross zero overshoot and trajectories that turn
upward while positive undershoot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, solve_ivp

from ..errors import DomainError, OracleError
from ..radial import ModelParams, RadialField, RadialGrid
from ..radial.functionals import ObservableSet, compose_observables
from ..radial.grid import sphere_area


@dataclass(frozen=True)
class ShootOptions:
    Rmax: float = 30.0
    r_start_factor: float = 1e-5
    rtol: float = 1e-12
    atol: float = 1e-30
    max_bisections: int = 200
    a_guess: float | None = None


@dataclass
class ShootingProfile:
    """Continuous oracle solution; evaluate with ``values(r)``."""

    params: ModelParams
    omega: float
    amplitude: float
    r_start: float
    r_cut: float
    observables: ObservableSet
    _sol: object
    _tail: tuple

    def values(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        inner = r < self.r_start
        outer = r > self.r_cut
        mid = ~(inner | outer)
        out[inner] = _frobenius(self.params, self.omega, self.amplitude, r[inner])[0]
        if np.any(mid):
            out[mid] = self._sol.sol(r[mid])[0]
        q0, dq0, k = self._tail
        rc = self.r_cut
        # exponential decay continuation matched in value
        out[outer] = q0 * (rc / r[outer]) ** ((self.params.d - 1) / 2) * np.exp(-k * (r[outer] - rc))
        return out

    def on_grid(self, grid: RadialGrid) -> RadialField:
        return RadialField(grid, self.values(np.asarray(grid.r)))


def _frobenius(p: ModelParams, omega: float, a: float, r):
    """Q and Q' from f = a(1 + q2 r^2 + qn r^beta), Q = r^(-rho) f."""
    rho, D = p.rho, p.effective_dim
    q2 = omega / (2 * D)
    beta = 2 - rho * p.alpha
    qn = -(a**p.alpha) / (beta * (beta + D - 2))
    r = np.asarray(r, dtype=float)
    f = a * (1 + q2 * r**2 + qn * r**beta)
    df = a * (2 * q2 * r + beta * qn * r ** (beta - 1))
    Q = r ** (-rho) * f
    dQ = r ** (-rho) * (df - rho * f / r)
    return Q, dQ


def _inner_integrals(p, omega, a, r0):
    sigma = sphere_area(p.d)
    d, al = p.d, p.alpha

    def integ(fn):
        val, _ = quad(fn, 0, r0, limit=200, epsabs=0, epsrel=1e-13)
        return sigma * val

    def Q(r):
        return _frobenius(p, omega, a, r)[0]

    def dQ(r):
        return _frobenius(p, omega, a, r)[1]

    m = integ(lambda r: Q(r) ** 2 * r ** (d - 1))
    k = integ(lambda r: dQ(r) ** 2 * r ** (d - 1))
    h = integ(lambda r: Q(r) ** 2 * r ** (d - 3))
    lp = integ(lambda r: abs(Q(r)) ** (al + 2) * r ** (d - 1))
    return m, k, h, lp


def _rhs(p, omega):
    d, c, al = p.d, p.c, p.alpha
    sigma = sphere_area(d)

    def f(r, y):
        Q, dQ = y[0], y[1]
        aq = abs(Q)
        ddQ = -(d - 1) / r * dQ - c / r**2 * Q + omega * Q - aq**al * Q
        rd = r ** (d - 1)
        return [
            dQ,
            ddQ,
            sigma * Q * Q * rd,
            sigma * dQ * dQ * rd,
            sigma * Q * Q * r ** (d - 3),
            sigma * aq ** (al + 2) * rd,
        ]

    return f


def _integrate(p, omega, a, r0, R, opts, dense=False):
    Q0, dQ0 = _frobenius(p, omega, a, r0)
    y0 = [float(Q0), float(dQ0), 0.0, 0.0, 0.0, 0.0]

    def cross_zero(r, y):
        return y[0]

    cross_zero.terminal = True
    cross_zero.direction = -1

    def turn_up(r, y):
        return y[1]

    turn_up.terminal = True
    turn_up.direction = 1

    return solve_ivp(
        _rhs(p, omega),
        (r0, R),
        y0,
        method="DOP853",
        rtol=opts.rtol,
        atol=opts.atol,
        events=(cross_zero, turn_up),
        dense_output=dense,
    )


def _classify(sol) -> int:
    """+1 overshoot (zero crossing), -1 undershoot (turns upward), 0 neither."""
    if len(sol.t_events[0]):
        return 1
    if len(sol.t_events[1]):
        return -1
    return 0


def shoot_profile(p: ModelParams, omega: float, opts: ShootOptions | None = None) -> ShootingProfile:
    if not omega > 0:
        raise DomainError(f"omega must be positive, got {omega!r}")
    opts = opts or ShootOptions()
    R = opts.Rmax
    r0 = opts.r_start_factor * R

    def kind(a):
        return _classify(_integrate(p, omega, a, r0, R, opts))

    a = opts.a_guess or max(omega ** (1 / p.alpha), 1e-3)
    # bracket: lo undershoots, hi overshoots
    k = kind(a)
    lo = hi = None
    for _ in range(80):
        if k > 0:
            hi = a
            if lo is not None:
                break
            a *= 0.5
        else:
            lo = a
            if hi is not None:
                break
            a *= 2.0
        k = kind(a)
    if lo is None or hi is None:
        raise OracleError("no shooting bracket found", omega=omega, last_amplitude=a)
    for _ in range(opts.max_bisections):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if kind(mid) > 0:
            hi = mid
        else:
            lo = mid
    s_lo = _integrate(p, omega, lo, r0, R, opts, dense=True)
    s_hi = _integrate(p, omega, hi, r0, R, opts, dense=True)
    r_end = min(s_lo.t[-1], s_hi.t[-1])
    rr = np.linspace(r0, r_end, 20001)
    q_lo, q_hi = s_lo.sol(rr)[0], s_hi.sol(rr)[0]
    qm = 0.5 * (q_lo + q_hi)
    split = np.abs(q_lo - q_hi) > 1e-6 * np.abs(qm)
    if split[0]:
        raise OracleError("shooting trajectories separate immediately", amplitude=lo)
    idx = int(np.argmax(split)) if split.any() else len(rr) - 1
    # step back to where both trajectories are still well inside the decaying regime
    r_cut = rr[max(idx - 1, 1)]
    y_cut = 0.5 * (s_lo.sol(r_cut) + s_hi.sol(r_cut))
    if y_cut[0] <= 0:
        raise OracleError("oracle profile is not positive at the matching radius", r_cut=r_cut)
    kdec = math.sqrt(omega)
    inner = _inner_integrals(p, omega, lo, r0)
    tails = _tail_integrals(p, y_cut[0], r_cut, kdec)
    m, kin, h, lp = (inner[i] + y_cut[2 + i] + tails[i] for i in range(4))
    obs = compose_observables(kin - p.c * h, m, h, lp, p)
    return ShootingProfile(p, omega, 0.5 * (lo + hi), r0, r_cut, obs, s_lo, (y_cut[0], y_cut[1], kdec))


def _tail_integrals(p, q0, rc, k):
    sigma = sphere_area(p.d)
    d, al = p.d, p.alpha
    e = (d - 1) / 2

    def Q(r):
        return q0 * (rc / r) ** e * math.exp(-k * (r - rc))

    def dQ(r):
        return -Q(r) * (k + e / r)

    out = []
    for fn in (
        lambda r: Q(r) ** 2 * r ** (d - 1),
        lambda r: dQ(r) ** 2 * r ** (d - 1),
        lambda r: Q(r) ** 2 * r ** (d - 3),
        lambda r: Q(r) ** (al + 2) * r ** (d - 1),
    ):
        val, _ = quad(fn, rc, np.inf, epsabs=0, epsrel=1e-10, limit=200)
        out.append(sigma * val)
    return out


def shoot_elliptic(
    p: ModelParams, omega: float, grid: RadialGrid, opts: ShootOptions | None = None
) -> RadialField:
    """Oracle ground state sampled on ``grid``."""
    return shoot_profile(p, omega, opts).on_grid(grid)

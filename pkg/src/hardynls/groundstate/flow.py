"""Ground-state solvers working on the regular factor g = r^rho Q.

Two iterations share the discrete operator L (the Dirichlet form) and the
mass weights W:

* ``minimize_mass_constrained``: a preconditioned gradient flow on the mass
  sphere. The update direction is the H^1-type preconditioned energy
  gradient with the component along the constraint removed exactly, so a
  fixed point satisfies the discrete Euler-Lagrange equation with multiplier
  equal to minus the projection coefficient. Steps that raise the energy are
  rejected and the pseudo-time step is halved.
* ``maximize_weinstein``: a stabilised fixed-point iteration at fixed
  frequency whose fixed points are the critical points of the Weinstein
  quotient. Since L + omega W is a Stieltjes matrix its inverse is entrywise
  positive and positive iterates stay positive.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import minimize_scalar

from ..errors import ConvergenceError, DomainError, SingularModelError
from ..radial import ModelParams, RadialField, RadialGrid, weinstein
from ..radial.functionals import compose_observables
from ..radial.operator import hardy_operator
from .certify import extract_omega, pohozaev_from, rayleigh_omega, residual_norm
from .types import FlowOptions, GroundState


# accepted steps without halving the best step before a converged flow counts as stalled
STALL_ITERS = 50


# -- initial data -------------------------------------------------------------


def _gaussian_g(grid: RadialGrid, p: ModelParams, width: float, factored: bool) -> np.ndarray:
    r = np.asarray(grid.r)
    g = np.exp(-0.5 * (r / width) ** 2)
    if not factored:
        g = g * r**p.rho
    return g


def _seeded_modulation(grid: RadialGrid, width: float, seed: int) -> tuple[float, np.ndarray]:
    rng = np.random.default_rng(seed)
    stretch = float(np.exp(rng.uniform(-0.35, 0.35)))
    r = np.asarray(grid.r)
    centres = rng.uniform(0, 2.5 * width, size=4)
    amps = rng.normal(0, 0.25, size=4)
    bumps = sum(a * np.exp(-(((r - c0) / (0.6 * width)) ** 2)) for a, c0 in zip(amps, centres))
    return stretch, np.exp(bumps)


def initial_regular_factor(
    grid: RadialGrid, p: ModelParams, opts: FlowOptions, width: float
) -> np.ndarray:
    if opts.initial_guess == "file":
        from ..io.cache import read_groundstate
        from ..radial.functionals import resample_g

        _, field, cached_p = read_groundstate(opts.path)
        g = resample_g(field, cached_p, np.asarray(grid.r))
        # the cached factor uses its own rho; convert when the models differ
        g = g * np.asarray(grid.r) ** (p.rho - cached_p.rho)
        g = np.abs(g)
    else:
        factored = opts.initial_guess == "factored-singular"
        if opts.seed is not None:
            stretch, mod = _seeded_modulation(grid, width, opts.seed)
            g = _gaussian_g(grid, p, width * stretch, factored) * mod
        else:
            g = _gaussian_g(grid, p, width, factored)
    g = np.array(g, dtype=float)
    g[-1] = 0.0
    if not np.any(g > 0):
        raise DomainError("initial guess vanishes on the grid")
    return g


def gaussian_energy_width(grid: RadialGrid, p: ModelParams, M: float, factored: bool) -> float:
    """Width of the lowest-energy Gaussian of mass M that fits on the grid."""
    op = hardy_operator(grid, p)
    r = np.asarray(grid.r)
    lo = max(r[min(8, grid.N - 1)], 1e-8)
    hi = grid.Rmax / 6

    def energy(logw):
        g = _gaussian_g(grid, p, math.exp(logw), factored)
        g[-1] = 0
        g *= math.sqrt(M / op.mass(g))
        return 0.5 * op.form(g) - op.lp(g) / (p.alpha + 2)

    res = minimize_scalar(energy, bounds=(math.log(lo), math.log(hi)), method="bounded", options={"xatol": 1e-4})
    return float(math.exp(res.x))


# -- shared helpers -------------------------------------------------------------


def _norm_w(v, w) -> float:
    """Grid L^2 norm of the field whose weak form (tested against W) is v."""
    return math.sqrt(float(np.sum(v[:-1] ** 2 / w[:-1])))


def _gn_energy_bound(J: float, M: float, p: ModelParams) -> float:
    """Lower bound on E at mass M implied by the Gagliardo-Nirenberg constant J (subcritical)."""
    d, a = p.d, p.alpha
    k = d * a / 4
    B = J * M ** ((4 - (d - 2) * a) / 4) / (a + 2)
    n_star = (2 * B * k) ** (1 / (1 - k))
    return n_star / 2 - B * n_star**k


def _finish(op, g, p, method, iters, hist, provenance, omega_fixed=None, M=None, cert_tol=1e-4):
    grid = op.grid
    Q = RadialField(grid, op.to_u(g))
    obs = compose_observables(op.form(g), op.mass(g), op.hardy(g), op.lp(g), p)
    if not obs.hardy_norm_sq > 0:
        raise SingularModelError("Hardy norm of the computed profile is not positive")
    omega_r = rayleigh_omega(obs)
    d_M = None if p.is_critical else obs.energy
    report = extract_omega(Q, p, obs.mass if M is None else M, d_M, tol=max(cert_tol, 1e-12))
    omega = omega_fixed if omega_fixed is not None else omega_r
    poh = pohozaev_from(obs, omega, p, cert_tol)
    bound = None
    if p.is_subcritical:
        bound = _gn_energy_bound(weinstein(Q, p), obs.mass, p)
    return GroundState(
        Q=Q,
        params=p,
        omega=omega,
        mass=obs.mass,
        energy=obs.energy,
        d_M=d_M,
        residual=residual_norm(Q, omega, p),
        pohozaev=poh,
        method=method,
        iterations=iters,
        energy_history=tuple(hist),
        energy_lower_bound=bound,
        omega_report=report,
        provenance=provenance,
    )


# -- mass-constrained minimisation -------------------------------------------------


def minimize_mass_constrained(
    M: float,
    p: ModelParams,
    grid: RadialGrid,
    opts: FlowOptions | None = None,
    cert_tol: float = 1e-4,
) -> GroundState:
    """Minimise the energy on the sphere of mass M (subcritical powers only)."""
    opts = opts or FlowOptions()
    if not p.is_subcritical:
        raise DomainError(f"mass-constrained minimisation needs alpha < 4/d = {4 / p.d:g}; got {p.alpha:g}")
    if not M > 0:
        raise DomainError(f"mass must be positive, got {M!r}")
    op = hardy_operator(grid, p)
    w, a = op.w, p.alpha
    factored = opts.initial_guess != "gaussian"
    width = opts.width or gaussian_energy_width(grid, p, M, factored)
    g = initial_regular_factor(grid, p, opts, width)
    g *= math.sqrt(M / op.mass(g))

    def energy(v):
        return 0.5 * op.form(v) - op.lp(v) / (a + 2)

    tau0 = opts.pseudo_time_step
    tau, tau_max, tau_min = tau0, 64 * tau0, tau0 * 2.0**-40
    ab = op.banded(w / tau)
    E = energy(g)
    hist = [E]
    dE = step = math.inf
    sqrtM = math.sqrt(M)
    residual = math.inf
    best_step, since_best = math.inf, 0
    stop = "step_tol"
    it = 0
    for it in range(1, opts.max_iters + 1):
        Lg = op.stiffness(g)
        kg = op.kappa * np.abs(g) ** a * g
        lp = float(np.dot(w, kg * g))
        nrm = op.form(g)
        omega_r = (lp - nrm) / M
        res = Lg + w * omega_r * g - w * kg
        residual = _norm_w(res, w) / min(sqrtM, _norm_w(w * kg, w))
        if residual <= opts.residual_tol and dE <= opts.energy_tol:
            if step <= opts.step_tol:
                break
            # the update can stall at its round-off floor above step_tol
            if since_best >= STALL_ITERS:
                stop = "stalled"
                break
        R = Lg - w * kg
        y = op.solve(ab, R)
        z = op.solve(ab, w * g)
        mu = np.dot(g, w * y) / np.dot(g, w * z)
        gn = g - (y - mu * z)
        gn *= math.sqrt(M / op.mass(gn))
        En = energy(gn)
        if En > E + 1e-14 * abs(E) or np.any(gn[:-1] < 0):
            tau *= 0.5
            if tau < tau_min:
                raise ConvergenceError(
                    "pseudo-time step collapsed while backtracking",
                    iterations=it,
                    residual=residual,
                    energy=E,
                )
            ab = op.banded(w / tau)
            continue
        dE = abs(En - E) / max(abs(En), 1e-300)
        step = float(np.max(np.abs(gn - g)) / np.max(np.abs(gn)))
        if step < 0.5 * best_step:
            best_step, since_best = step, 0
        else:
            since_best += 1
        g, E = gn, En
        hist.append(E)
        if tau < tau_max:
            tau = min(1.5 * tau, tau_max)
            ab = op.banded(w / tau)
    else:
        raise ConvergenceError(
            f"gradient flow did not converge in {opts.max_iters} iterations",
            iterations=opts.max_iters,
            residual=residual,
            energy_change=dE,
            step=step,
            energy=E,
        )
    prov = {"initial_guess": opts.initial_guess, "width": width, "seed": opts.seed, "path": opts.path, "stop": stop}
    return _finish(op, g, p, "normalized-gradient-flow", it, hist, prov, M=M, cert_tol=cert_tol)


# -- Weinstein maximisation at fixed frequency ----------------------------------------


def maximize_weinstein(
    p: ModelParams,
    grid: RadialGrid,
    opts: FlowOptions | None = None,
    omega: float = 1.0,
    cert_tol: float = 1e-4,
) -> GroundState:
    """Positive critical point of the Weinstein quotient solving the equation at ``omega``."""
    opts = opts or FlowOptions()
    if not omega > 0:
        raise DomainError(f"omega must be positive, got {omega!r}")
    op = hardy_operator(grid, p)
    w, a = op.w, p.alpha
    width = opts.width or 1 / math.sqrt(omega)
    g = initial_regular_factor(grid, p, opts, width)
    ab = op.banded(omega * w)
    gamma = (a + 1) / a
    hist = []
    step = math.inf
    residual = math.inf
    it = 0
    for it in range(1, opts.max_iters + 1):
        nl = w * op.kappa * np.abs(g) ** a * g
        lin = op.stiffness(g) + omega * w * g
        res = lin - nl
        m = op.mass(g)
        residual = _norm_w(res, w) / min(math.sqrt(m), _norm_w(nl, w))
        nrm, lp = op.form(g), float(np.dot(g, nl))
        if lp <= 0:
            raise ConvergenceError("iterate lost its nonlinear mass", iterations=it)
        hist.append(lp / m ** ((a + 2) / 2) * (m / nrm) ** (p.d * a / 4))
        if residual <= opts.residual_tol and step <= opts.step_tol:
            break
        S = float(np.dot(g, lin)) / lp
        gn = S**gamma * op.solve(ab, nl)
        step = float(np.max(np.abs(gn - g)) / np.max(np.abs(gn)))
        g = gn
    else:
        raise ConvergenceError(
            f"Weinstein ascent did not converge in {opts.max_iters} iterations",
            iterations=opts.max_iters,
            residual=residual,
            step=step,
        )
    prov = {"initial_guess": opts.initial_guess, "width": width, "seed": opts.seed, "path": opts.path}
    return _finish(op, g, p, "weinstein-ascent", it, hist, prov, omega_fixed=omega, cert_tol=cert_tol)


def compute_ground_state(
    p: ModelParams,
    grid: RadialGrid,
    *,
    M: float | None = None,
    omega: float | None = None,
    opts: FlowOptions | None = None,
    cert_tol: float = 1e-4,
) -> GroundState:
    """Critical powers use the Weinstein ascent; subcritical powers minimise at mass M
    unless a frequency is requested instead."""
    if p.is_critical or M is None:
        return maximize_weinstein(p, grid, opts, omega=1.0 if omega is None else omega, cert_tol=cert_tol)
    return minimize_mass_constrained(M, p, grid, opts, cert_tol=cert_tol)


def ground_state_from_profile(
    Q: RadialField,
    p: ModelParams,
    *,
    omega: float | None = None,
    M: float | None = None,
    method: str = "cache",
    provenance: dict | None = None,
    cert_tol: float = 1e-4,
) -> GroundState:
    """Re-certify a stored profile and wrap it as a GroundState."""
    op = hardy_operator(Q.grid, p)
    g = op.to_g(np.asarray(Q.values, dtype=float))
    return _finish(op, g, p, method, 0, [], provenance or {}, omega_fixed=omega, M=M, cert_tol=cert_tol)

"""Drivers for the stability, instability and sharp Gagliardo-Nirenberg experiments.

Independent runs (one per perturbation size, per family member) are farmed
out to a process pool when ``workers > 1``; reports are always assembled in
parameter order so the output does not depend on completion order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import (
    CertificationError,
    DependencyError,
    DomainError,
    StabilityViolation,
    UnsupportedError,
)
from .evolution import EvolutionConfig, StandingWaveSource, TimeSeries, evolve, pseudo_conformal
from .groundstate import FlowOptions, GroundState, maximize_weinstein, minimize_mass_constrained
from .radial import ModelParams, RadialField, RadialGrid, observables
from .radial.functionals import h1_inner, mass, resample_g, scale_field
from .radial.grid import sphere_area

PERTURBATION_KINDS = ("dilation", "bump", "noise")


def _pool_map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as ex:
        return list(ex.map(fn, jobs))


# -- orbit distance --------------------------------------------------------------------


def orbit_distance(u: RadialField, Q: RadialField, p: ModelParams) -> float:
    """min over theta of ||u - e^{i theta} Q||_{H^1}.

    The minimiser is theta = arg <Q, u>_{H^1}; the difference is formed
    explicitly to avoid cancellation when u is close to the orbit.
    """
    z = h1_inner(Q, u, p)
    phase = z / abs(z) if z != 0 else 1.0
    diff = RadialField(u.grid, u.values - phase * Q.values)
    return math.sqrt(max(h1_inner(diff, diff, p).real, 0.0))


# -- stability ---------------------------------------------------------------------------


def perturbation_bank(Q: RadialField, p: ModelParams, seed: int = 0, kinds=PERTURBATION_KINDS) -> dict:
    """Fixed perturbation directions, each normalised to unit H^1 norm.

    ``dilation`` is Q_lambda - Q for a mass-preserving stretch by 1.1,
    ``bump`` is Q times a Gaussian ring at twice the profile's length scale,
    ``noise`` is Q times a seeded complex combination of smooth radial
    modes cos(k r / L), k = 1..8, with L the profile's rms radius.
    """
    grid = Q.grid
    r = np.asarray(grid.r)
    wd = grid.weights(p.d)
    q2 = np.abs(Q.values) ** 2
    L = math.sqrt(float(np.dot(wd * r**2, q2)) / float(np.dot(wd, q2)))
    out = {}
    for kind in kinds:
        if kind == "dilation":
            v = scale_field(Q, 1.1, p).values - Q.values
        elif kind == "bump":
            v = Q.values * np.exp(-(((r - 2 * L) / L) ** 2))
        elif kind == "noise":
            rng = np.random.default_rng(seed)
            k = np.arange(1, 9)
            coef = (rng.normal(size=8) + 1j * rng.normal(size=8)) / k
            v = Q.values * (np.cos(np.outer(r / L, k)) @ coef)
        else:
            raise DomainError(f"unknown perturbation kind {kind!r}")
        f = RadialField(grid, v)
        n = math.sqrt(h1_inner(f, f, p).real)
        out[kind] = RadialField(grid, v / n)
    return out


def perturbed_data(Q: RadialField, P: RadialField, delta: float, M: float, p: ModelParams):
    """u0 = sqrt(M) (Q + eta P)/||Q + eta P|| with eta chosen so dist(u0, orbit of Q) = delta."""
    if delta == 0:
        return Q, 0.0

    def build(eta):
        v = Q.values + eta * P.values
        f = RadialField(Q.grid, v)
        return RadialField(Q.grid, v * math.sqrt(M / mass(f, p)))

    def gap(eta):
        return orbit_distance(build(eta), Q, p) - delta

    hi = delta
    for _ in range(60):
        if gap(hi) > 0:
            break
        hi *= 2
    else:
        raise DomainError("could not reach the requested perturbation size", delta=delta)
    eta = brentq(gap, 0.0, hi, xtol=1e-14 * hi, rtol=1e-12)
    return build(eta), eta


@dataclass(frozen=True)
class StabilityRun:
    delta: float
    perturbation: str
    amplitude: float
    times: tuple
    dist: tuple
    outcome: dict

    @property
    def sup_dist(self) -> float:
        return max(self.dist)

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "perturbation": self.perturbation,
            "amplitude": self.amplitude,
            "dist0": self.dist[0],
            "sup_dist": self.sup_dist,
            "outcome": self.outcome,
        }


@dataclass(frozen=True)
class StabilityReport:
    M: float
    params: ModelParams
    omega: float
    deltas: tuple
    horizon: float
    kappa: float
    runs: tuple
    seed: int

    def verdict(self, delta: float) -> str:
        sel = [r for r in self.runs if r.delta == delta]
        return "bounded" if all(r.sup_dist <= self.kappa * max(delta, 0.0) or delta == 0 for r in sel) else "escaped"

    def amplification(self, delta: float) -> float:
        sel = [r for r in self.runs if r.delta == delta]
        return max(r.sup_dist for r in sel) / delta if delta > 0 else math.nan

    def to_dict(self) -> dict:
        return {
            "M": self.M,
            "params": self.params.to_dict(),
            "omega": self.omega,
            "horizon": self.horizon,
            "kappa": self.kappa,
            "seed": self.seed,
            "perturbation_bank": sorted({r.perturbation for r in self.runs}),
            "deltas": [
                {
                    "delta": d,
                    "verdict": self.verdict(d),
                    "max_amplification": self.amplification(d),
                }
                for d in self.deltas
            ],
            "runs": [r.to_dict() for r in self.runs],
        }


def _stability_job(job):
    Q, u0, p, cfg, delta, kind, eta = job
    times, dists = [], []

    def watch(t, u):
        times.append(t)
        dists.append(orbit_distance(u, Q, p))

    _, outcome = evolve(u0, cfg, p, observer=watch)
    if outcome.is_blowup:
        raise StabilityViolation(
            "subcritical run classified as blow-up",
            delta=delta,
            perturbation=kind,
            t_final=outcome.t_final,
        )
    return StabilityRun(delta, kind, eta, tuple(times), tuple(dists), outcome.to_dict())


def run_stability(
    M: float,
    p: ModelParams,
    deltas,
    horizon: float,
    grid: RadialGrid | None = None,
    *,
    ground_state: GroundState | None = None,
    compute_ground_state: bool = True,
    kappa: float = 20.0,
    perturbations=PERTURBATION_KINDS,
    seed: int = 0,
    dt0: float = 0.05,
    record_every: int = 10,
    flow: FlowOptions | None = None,
    workers: int = 1,
) -> StabilityReport:
    if not p.is_subcritical:
        raise DomainError(f"stability driver requires alpha < 4/d = {4 / p.d:g}")
    if ground_state is None:
        if not compute_ground_state or grid is None:
            raise DependencyError("no ground state supplied for the stability run", M=M)
        ground_state = minimize_mass_constrained(M, p, grid, flow or FlowOptions(pseudo_time_step=100.0))
    Q = ground_state.Q
    if abs(ground_state.mass - M) > 1e-8 * M:
        raise DependencyError("ground state has the wrong mass", expected=M, found=ground_state.mass)
    bank = perturbation_bank(Q, p, seed, perturbations)
    cfg = EvolutionConfig(dt0=dt0, t_end=horizon, record_every=record_every)
    jobs = []
    for delta in deltas:
        kinds = ("none",) if delta == 0 else perturbations
        for kind in kinds:
            u0, eta = (Q, 0.0) if delta == 0 else perturbed_data(Q, bank[kind], delta, M, p)
            jobs.append((Q, u0, p, cfg, float(delta), kind, eta))
    runs = _pool_map(_stability_job, jobs, workers)
    return StabilityReport(M, p, ground_state.omega, tuple(float(d) for d in deltas), horizon, kappa, tuple(runs), seed)


# -- instability families -------------------------------------------------------------------


@dataclass(frozen=True)
class InstabilityMember:
    n: int
    mu: float
    lam: float
    energy: float
    energy_closed_form: float
    h1_distance: float
    outcome: dict
    series: TimeSeries | None = field(default=None, compare=False, repr=False)

    @property
    def energy_rel_error(self) -> float:
        return abs(self.energy - self.energy_closed_form) / abs(self.energy_closed_form) if self.energy_closed_form else abs(self.energy)

    @property
    def blew_up(self) -> bool:
        return self.outcome["kind"] == "BlowUp"

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "mu": self.mu,
            "lambda": self.lam,
            "energy": self.energy,
            "energy_closed_form": self.energy_closed_form,
            "energy_rel_error": self.energy_rel_error,
            "h1_distance": self.h1_distance,
            "outcome": self.outcome,
        }


@dataclass(frozen=True)
class InstabilityReport:
    family: str
    params: ModelParams
    omega: float
    members: tuple

    @property
    def energies_negative(self) -> bool:
        return all(m.energy < 0 for m in self.members if m.mu > 1)

    @property
    def distances_decreasing(self) -> bool:
        d = [m.h1_distance for m in self.members]
        return all(b < a for a, b in zip(d, d[1:]))

    @property
    def all_blowup(self) -> bool:
        return all(m.blew_up for m in self.members)

    @property
    def max_energy_rel_error(self) -> float:
        return max(m.energy_rel_error for m in self.members)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "params": self.params.to_dict(),
            "omega": self.omega,
            "energies_negative": self.energies_negative,
            "distances_decreasing": self.distances_decreasing,
            "all_blowup": self.all_blowup,
            "max_energy_rel_error": self.max_energy_rel_error,
            "members": [m.to_dict() for m in self.members],
        }


def default_instability_config(t_end: float = 10.0, dt0: float = 2e-3) -> EvolutionConfig:
    return EvolutionConfig(dt0=dt0, t_end=t_end, record_every=10)


def _critical_ground_state(p, grid, ground_state, omega):
    if not p.is_critical:
        raise DomainError(f"instability drivers need the critical power alpha = 4/d = {4 / p.d:g}")
    if ground_state is None:
        if grid is None:
            raise DependencyError("no ground state and no grid to compute one")
        ground_state = maximize_weinstein(p, grid, omega=omega)
    return ground_state


def _instability_job(job):
    u0, p, cfg = job
    series, outcome = evolve(u0, cfg, p)
    return series, outcome.to_dict()


def _run_family(family, p, gs, data, cfg, workers, keep_series):
    Q = gs.Q
    jobs = [(u0, p, cfg) for (_, _, _, u0, _) in data]
    results = _pool_map(_instability_job, jobs, workers)
    members = []
    for (n, mu, lam, u0, e_closed), (series, outcome) in zip(data, results):
        obs = observables(u0, p)
        diff = RadialField(Q.grid, u0.values - Q.values)
        dist = math.sqrt(h1_inner(diff, diff, p).real)
        members.append(
            InstabilityMember(n, mu, lam, obs.energy, e_closed, dist, outcome, series if keep_series else None)
        )
    return InstabilityReport(family, p, gs.omega, tuple(members))


def family_I_energy(mu: float, obs_Q, p: ModelParams) -> float:
    """mu^2 E(Q) + d/(2d+4) mu^2 (1 - mu^(4/d)) ||Q||_{4/d+2}^{4/d+2}."""
    d = p.d
    return mu**2 * obs_Q.energy + d / (2 * d + 4) * mu**2 * (1 - mu ** (4 / d)) * obs_Q.lp_alpha2


def family_II_energy(mu: float, lam: float, obs_Q, p: ModelParams) -> float:
    """1/2 (1 - mu^(4/d)) mu^2 lam^2 ||Q||^2_{H^1_c}."""
    return 0.5 * (1 - mu ** (4 / p.d)) * mu**2 * lam**2 * obs_Q.hardy_norm_sq


def run_instability_I(
    p: ModelParams,
    n_values,
    grid: RadialGrid | None = None,
    *,
    ground_state: GroundState | None = None,
    omega: float = 1.0,
    config: EvolutionConfig | None = None,
    workers: int = 1,
    keep_series: bool = False,
) -> InstabilityReport:
    """Evolve u_{0,n} = (1 + 1/n) Q and check the closed-form energies."""
    gs = _critical_ground_state(p, grid, ground_state, omega)
    obs_Q = observables(gs.Q, p)
    data = []
    for n in n_values:
        mu = 1 + 1 / n
        e_closed = family_I_energy(mu, obs_Q, p)
        if not e_closed < 0:
            raise CertificationError("E(mu Q) is not negative; E(Q) = 0 is violated", n=n, energy=e_closed)
        data.append((int(n), mu, 1.0, mu * gs.Q, e_closed))
    return _run_family("I", p, gs, data, config or default_instability_config(), workers, keep_series)


def run_instability_II(
    p: ModelParams,
    mu_seq,
    lam_seq,
    grid: RadialGrid | None = None,
    *,
    ground_state: GroundState | None = None,
    omega: float = 1.0,
    config: EvolutionConfig | None = None,
    workers: int = 1,
    keep_series: bool = False,
) -> InstabilityReport:
    """Evolve u_{0,n}(x) = mu_n lam_n^(d/2) Q(lam_n x)."""
    mu_seq, lam_seq = list(mu_seq), list(lam_seq)
    if len(mu_seq) != len(lam_seq):
        raise DomainError("mu and lambda sequences differ in length")
    gs = _critical_ground_state(p, grid, ground_state, omega)
    obs_Q = observables(gs.Q, p)
    data = []
    for n, (mu, lam) in enumerate(zip(mu_seq, lam_seq), start=1):
        if mu < 1 or lam <= 0:
            raise DomainError("family II needs mu >= 1 and lambda > 0", n=n, mu=mu, lam=lam)
        u0 = scale_field(gs.Q, lam, p, amplitude=mu)
        e_closed = family_II_energy(mu, lam, obs_Q, p)
        if mu > 1 and not e_closed < 0:
            raise CertificationError("closed-form energy is not negative", n=n)
        data.append((n, float(mu), float(lam), u0, e_closed))
    return _run_family("II", p, gs, data, config or default_instability_config(), workers, keep_series)


# -- dichotomy exhibit ----------------------------------------------------------------------


@dataclass(frozen=True)
class DichotomyReport:
    params: ModelParams
    entries: tuple  # (mu, outcome dict, max kinetic / initial kinetic)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "entries": [{"mu": m, "outcome": o, "max_kinetic_ratio": k} for m, o, k in self.entries],
        }


def run_dichotomy(
    p: ModelParams,
    grid: RadialGrid,
    mus=(1.05, 0.95),
    horizon: float = 5.0,
    *,
    ground_state: GroundState | None = None,
    dt0: float = 2e-3,
    workers: int = 1,
) -> DichotomyReport:
    gs = _critical_ground_state(p, grid, ground_state, 1.0)
    cfg = EvolutionConfig(dt0=dt0, t_end=horizon, record_every=10)
    results = _pool_map(_instability_job, [(mu * gs.Q, p, cfg) for mu in mus], workers)
    entries = []
    for mu, (series, outcome) in zip(mus, results):
        entries.append((float(mu), outcome, float(np.max(series.kinetic) / series.kinetic[0])))
    return DichotomyReport(p, tuple(entries))


# -- pseudo-conformal exhibit ----------------------------------------------------------------


@dataclass(frozen=True)
class PseudoConformalReport:
    T: float
    mass_checks: tuple  # (t, mass of u_T(t), mass of the source at 1/(T-t), relative deviation)
    outcome: dict

    @property
    def bracket_contains_T(self) -> bool:
        b = self.outcome.get("T_bracket")
        return bool(b) and b[0] <= self.T * 1.05 and b[1] >= self.T * 0.95

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "mass_checks": [dict(zip(("t", "mass_u_T", "mass_source", "rel_dev"), m)) for m in self.mass_checks],
            "outcome": self.outcome,
            "bracket_contains_T": self.bracket_contains_T,
        }


def run_pseudo_conformal(
    p: ModelParams,
    grid: RadialGrid,
    T: float = 1.0,
    sample_times=(0.0, 0.5),
    *,
    ground_state: GroundState | None = None,
    dt0: float = 2e-3,
) -> PseudoConformalReport:
    """Transform the standing wave with blow-up time T, check the mass identity, then evolve."""
    gs = _critical_ground_state(p, grid, ground_state, 1.0)
    src = StandingWaveSource(gs.Q, gs.omega)
    checks = []
    for t in sample_times:
        uT = pseudo_conformal(src, T, t, p)
        m1 = mass(uT, p)
        m0 = mass(src(1 / (T - t)), p)
        checks.append((float(t), m1, m0, abs(m1 - m0) / m0))
    u0 = pseudo_conformal(src, T, 0.0, p)
    _, outcome = evolve(u0, EvolutionConfig(dt0=dt0, t_end=2 * T, record_every=10), p)
    return PseudoConformalReport(T, tuple(checks), outcome.to_dict())


# -- sharp Gagliardo-Nirenberg survey --------------------------------------------------------


def translated_hardy_term(Q: RadialField, p: ModelParams, x0: float) -> float:
    """int |x|^-2 |Q(x - x0)|^2 dx in d = 3 through the spherical mean of |x|^-2.

    Over the sphere |y| = s the mean of |y + x0|^-2 is
    ln((|x0| + s)/||x0| - s|) / (2 |x0| s).
    """
    if p.d != 3:
        raise UnsupportedError("translated profiles are only available in d = 3", d=p.d)
    R = Q.grid.Rmax
    sigma = sphere_area(3)
    if x0 == 0:
        def f(s):
            return float(resample_g(Q, p, np.array([s]))[0].real ** 2) * (s ** (-2 * p.rho))
        val, _ = quad(f, 0, R, limit=500, epsabs=0, epsrel=1e-10)
        return float(sigma * val)

    def f(s):
        q = float(resample_g(Q, p, np.array([s]))[0].real) * s ** (-p.rho)
        return q * q * s / (2 * x0) * math.log((x0 + s) / abs(x0 - s))

    pts = [x0] if x0 < R else None
    val, _ = quad(f, 0, R, points=pts, limit=1000, epsabs=0, epsrel=1e-10)
    return float(sigma * val)


@dataclass(frozen=True)
class GNSurvey:
    alpha: float
    d: int
    c_values: tuple
    weinstein_max: tuple
    reference_constant: float
    offset_c: float | None
    offsets: tuple
    translated_values: tuple

    @property
    def offsets_increasing(self) -> bool:
        v = self.translated_values
        return all(b > a for a, b in zip(v, v[1:]))

    @property
    def below_reference(self) -> bool:
        return all(v < self.reference_constant for v in self.translated_values)

    @property
    def terminal_gap(self) -> float | None:
        if not self.translated_values:
            return None
        return (self.reference_constant - self.translated_values[-1]) / self.reference_constant

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "alpha": self.alpha,
            "radial": [{"c": c, "weinstein_max": j} for c, j in zip(self.c_values, self.weinstein_max)],
            "reference_constant": self.reference_constant,
            "offset_c": self.offset_c,
            "translated": [{"x0": x, "weinstein": j} for x, j in zip(self.offsets, self.translated_values)],
            "offsets_increasing": self.offsets_increasing if self.translated_values else None,
            "below_reference": self.below_reference if self.translated_values else None,
            "terminal_gap": self.terminal_gap,
        }


def _weinstein_parts(lp, M, N, p):
    d, a = p.d, p.alpha
    return lp / M ** ((a + 2) / 2) * (M / N) ** (d * a / 4)


def run_gn_survey(
    p_template: ModelParams,
    c_values,
    grid: RadialGrid,
    offsets=(),
    *,
    offset_c: float | None = None,
    flow: FlowOptions | None = None,
) -> GNSurvey:
    """Weinstein maxima per c, plus translated reference profiles for a negative c."""
    offsets = tuple(float(x) for x in offsets)
    if offsets and p_template.d != 3:
        raise UnsupportedError("translated-profile branch requires d = 3", d=p_template.d)
    values = []
    for c in c_values:
        pc = p_template.with_c(float(c))
        gs = maximize_weinstein(pc, grid, flow)
        values.append(_weinstein_parts(*_lmn(gs.Q, pc), pc))
    p0 = p_template.with_c(0.0, reference=True)
    gs0 = maximize_weinstein(p0, grid, flow)
    lp0, M0, N0 = _lmn(gs0.Q, p0)
    J0 = _weinstein_parts(lp0, M0, N0, p0)
    translated = []
    if offsets:
        if offset_c is None:
            neg = [c for c in c_values if c < 0]
            offset_c = min(neg) if neg else -1.0
        if not offset_c < 0:
            raise DomainError("translated profiles are surveyed for negative c only", c=offset_c)
        for x0 in offsets:
            H = translated_hardy_term(gs0.Q, p0, x0)
            translated.append(_weinstein_parts(lp0, M0, N0 - offset_c * H, p0))
    return GNSurvey(
        p_template.alpha,
        p_template.d,
        tuple(float(c) for c in c_values),
        tuple(values),
        J0,
        offset_c if offsets else None,
        offsets,
        tuple(translated),
    )


def _lmn(Q, p):
    obs = observables(Q, p)
    return obs.lp_alpha2, obs.mass, obs.hardy_norm_sq


__all__ = [
    "PERTURBATION_KINDS",
    "orbit_distance",
    "perturbation_bank",
    "perturbed_data",
    "StabilityRun",
    "StabilityReport",
    "run_stability",
    "InstabilityMember",
    "InstabilityReport",
    "family_I_energy",
    "family_II_energy",
    "run_instability_I",
    "run_instability_II",
    "DichotomyReport",
    "run_dichotomy",
    "PseudoConformalReport",
    "run_pseudo_conformal",
    "translated_hardy_term",
    "GNSurvey",
    "run_gn_survey",
]

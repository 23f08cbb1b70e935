"""Run orchestration: dispatch a validated config, write artifacts and the manifest.

Each run writes into its own directory. All reports are produced by the
numerical modules; this layer only serialises them. ``manifest.json`` lists
SHA-256 hashes of every other emitted file and is written exactly once, also
when the run fails (alongside ``error.json``).
"""

from __future__ import annotations

import json
import math
import time
from pathlib import Path

import numpy as np

from .. import __version__
from ..errors import CertificationError, ConfigurationError, HardyNLSError, IntegratorFailure
from ..evolution import SERIES_COLUMNS, EvolutionConfig, StandingWaveSource, evolve, pseudo_conformal
from ..experiments import (
    run_gn_survey,
    run_instability_I,
    run_instability_II,
    run_stability,
)
from ..groundstate import FlowOptions, ground_state_from_profile, maximize_weinstein, minimize_mass_constrained
from ..radial import RadialField, gaussian_quadrature_error, hardy_slack, parse_real
from ..virial import build_cutoff, build_kit, check_nonneg_condition, virial_identity_check
from .cache import read_groundstate, write_groundstate_from
from .config import RunConfig
from .persist import sha256, write_csv, write_json

SERIES_HEADER = SERIES_COLUMNS + ("xu_valid",)
ENERGY_MATCH_TOL = 1e-6


class _Emitter:
    def __init__(self, out: Path):
        self.out = out
        self.files: list[str] = []

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.out / name

    def json(self, name, obj):
        write_json(self.path(name), obj)

    def series(self, name, series):
        rows = ((*row, 1.0 if v else 0.0) for row, v in zip(series.rows(), series.xu_valid))
        write_csv(self.path(name), SERIES_HEADER, rows)


# -- helpers ---------------------------------------------------------------------------------


def _flow_options(block: dict | None) -> FlowOptions:
    return FlowOptions(**(block or {}))


def _cached_ground_state(path, cfg: RunConfig):
    head, Q, p = read_groundstate(path)
    if p.to_dict() != cfg.params.to_dict():
        raise ConfigurationError(
            "cached ground state belongs to a different model",
            violations=[f"cache model {p.to_dict()} differs from config model {cfg.params.to_dict()}"],
        )
    if Q.grid != cfg.grid:
        raise ConfigurationError("cached ground state lives on a different grid", violations=["grid mismatch"])
    return ground_state_from_profile(Q, p, omega=head["omega"], M=head.get("M"), provenance={"cache": str(path)})


def _evolution_config(block: dict) -> EvolutionConfig:
    keys = (
        "dt0",
        "t_end",
        "scheme",
        "record_every",
        "adaptive",
        "fixed_point_tol",
        "blowup_gradient_factor",
        "blowup_dt_floor",
        "mass_budget",
        "energy_budget",
    )
    return EvolutionConfig(**{k: block[k] for k in keys if k in block})


def initial_data(ini: dict, cfg: RunConfig) -> tuple[RadialField, dict]:
    """Initial field described by an ``initial`` block, plus provenance."""
    p, grid = cfg.params, cfg.grid
    r = np.asarray(grid.r)
    kind = ini["kind"]
    A = float(ini.get("amplitude", 1.0))
    w = float(ini.get("width", 1.0))
    info = {"kind": kind}
    if kind == "gaussian":
        u = RadialField(grid, A * np.exp(-0.5 * (r / w) ** 2))
    elif kind == "hardy-gaussian":
        u = RadialField(grid, A * r ** (-p.rho) * np.exp(-0.5 * (r / w) ** 2))
    else:
        if kind == "cache":
            gs = _cached_ground_state(ini["path"], cfg)
        else:
            gs = maximize_weinstein(p, grid, omega=float(ini.get("omega", 1.0)))
        info.update(omega=gs.omega, mass=gs.mass)
        Q = gs.Q
        T = ini.get("pseudo_conformal_T")
        if T is not None:
            Q = pseudo_conformal(StandingWaveSource(Q, gs.omega), float(T), 0.0, p)
            info["pseudo_conformal_T"] = float(T)
        u = float(ini.get("mu", 1.0)) * Q
    return u, info


# -- tasks ---------------------------------------------------------------------------------------


def _task_groundstate(cfg: RunConfig, em: _Emitter) -> dict:
    b = cfg.block
    p, grid = cfg.params, cfg.grid
    opts = _flow_options(b.get("flow"))
    method = b["method"]
    if method == "auto":
        method = "flow" if (p.is_subcritical and "M" in b) else "weinstein"
    if method == "flow":
        if "M" not in b:
            raise ConfigurationError("flow method needs M", violations=["groundstate: M missing"])
        gs = minimize_mass_constrained(float(b["M"]), p, grid, opts, cert_tol=b["cert_tol"])
    else:
        gs = maximize_weinstein(p, grid, opts, omega=float(b.get("omega", 1.0)), cert_tol=b["cert_tol"])
    write_groundstate_from(em.path("groundstate.cache"), gs)
    summary = gs.summary()
    em.json("pohozaev.json", summary)
    if not gs.pohozaev.passes(b["cert_tol"]):
        raise CertificationError(
            "Pohozaev residuals exceed the tolerance",
            max_residual=gs.pohozaev.max_residual,
            tolerance=b["cert_tol"],
        )
    return {"omega": gs.omega, "mass": gs.mass, "energy": gs.energy, "pohozaev_max": gs.pohozaev.max_residual}


def _task_evolve(cfg: RunConfig, em: _Emitter) -> dict:
    b = cfg.block
    u0, info = initial_data(b["initial"], cfg)
    kit = None
    if "kit" in b:
        kb = b["kit"]
        kit = build_kit(build_cutoff(kb.get("profile", "lemma43")), float(kb.get("R", 4.0)), cfg.grid, cfg.params.d)
    ecfg = _evolution_config(b)
    try:
        series, outcome = evolve(u0, ecfg, cfg.params, kit=kit)
    except IntegratorFailure as exc:
        if exc.series is not None:
            em.series("series.csv", exc.series)
        raise
    em.series("series.csv", series)
    report = {"initial": info, "outcome": outcome.to_dict()}
    if kit is not None:
        report["kit"] = kit.audit()
    em.json("outcome.json", report)
    return {"kind": outcome.kind, "t_final": outcome.t_final, "T_bracket": outcome.T_bracket}


def _task_stability(cfg: RunConfig, em: _Emitter) -> dict:
    b = cfg.block
    gs = _cached_ground_state(b["ground_state_cache"], cfg) if "ground_state_cache" in b else None
    rep = run_stability(
        float(b["M"]),
        cfg.params,
        b["deltas"],
        float(b["horizon"]),
        cfg.grid,
        ground_state=gs,
        kappa=float(b["kappa"]),
        perturbations=tuple(b["perturbations"]),
        seed=cfg.seed,
        dt0=float(b["dt0"]),
        record_every=int(b["record_every"]),
        flow=_flow_options(b.get("flow")),
        workers=cfg.workers,
    )
    em.json("stability.json", rep)
    for i, run in enumerate(rep.runs):
        write_csv(em.path(f"dist_{i:02d}_{run.perturbation}.csv"), ("t", "dist"), zip(run.times, run.dist))
    return {"verdicts": {str(d): rep.verdict(d) for d in rep.deltas}}


def _instability_summary(rep, em: _Emitter) -> dict:
    em.json("instability.json", rep)
    for m in rep.members:
        if m.series is not None:
            em.series(f"series_n{m.n:02d}.csv", m.series)
    if rep.max_energy_rel_error > ENERGY_MATCH_TOL:
        raise CertificationError(
            "family energies disagree with the closed form",
            max_rel_error=rep.max_energy_rel_error,
        )
    return {
        "all_blowup": rep.all_blowup,
        "energies_negative": rep.energies_negative,
        "distances_decreasing": rep.distances_decreasing,
        "max_energy_rel_error": rep.max_energy_rel_error,
    }


def _instability_common(cfg):
    b = cfg.block
    gs = _cached_ground_state(b["ground_state_cache"], cfg) if "ground_state_cache" in b else None
    ecfg = EvolutionConfig(dt0=float(b["dt0"]), t_end=float(b["t_end"]), record_every=10)
    return dict(ground_state=gs, omega=float(b["omega"]), config=ecfg, workers=cfg.workers, keep_series=True)


def _task_instability_I(cfg: RunConfig, em: _Emitter) -> dict:
    rep = run_instability_I(cfg.params, cfg.block["n_values"], cfg.grid, **_instability_common(cfg))
    return _instability_summary(rep, em)


def _task_instability_II(cfg: RunConfig, em: _Emitter) -> dict:
    b = cfg.block
    rep = run_instability_II(cfg.params, b["mu"], b["lambda"], cfg.grid, **_instability_common(cfg))
    return _instability_summary(rep, em)


def _task_gn_survey(cfg: RunConfig, em: _Emitter) -> dict:
    b = cfg.block
    oc = b.get("offset_c")
    rep = run_gn_survey(
        cfg.params,
        [parse_real(c) for c in b["c_values"]],
        cfg.grid,
        b.get("offsets", []),
        offset_c=None if oc is None else parse_real(oc),
    )
    em.json("gn_survey.json", rep)
    return {"reference_constant": rep.reference_constant, "terminal_gap": rep.terminal_gap}


def _task_virial(cfg: RunConfig, em: _Emitter) -> dict:
    b = cfg.block
    prof = build_cutoff(b["profile"])
    kits = []
    for R in b["R_values"]:
        kit = build_kit(prof, float(R), cfg.grid, cfg.params.d)
        kits.append(
            {
                **kit.audit(),
                "nonneg": [check_nonneg_condition(kit, float(e)).to_dict() for e in b["eps"]],
            }
        )
    report = {"cutoff": prof.audit(), "kits": kits}
    summary = {"eps_star": [k["eps_star"] for k in kits]}
    if "identity" in b:
        ib = b["identity"]
        u0, info = initial_data(ib["initial"], cfg)
        series, outcome = evolve(u0, _evolution_config({"dt0": 2e-3, "t_end": 1.0, **ib}), cfg.params)
        em.series("identity_series.csv", series)
        E0 = float(series.energy[0])
        check = virial_identity_check(series, E0)
        report["identity"] = {"initial": info, "E0": E0, "outcome": outcome.to_dict(), "check": check.to_dict()}
        summary["identity_max_rel_deviation"] = check.max_rel_deviation
    em.json("virial.json", report)
    return summary


TASK_RUNNERS = {
    "groundstate": _task_groundstate,
    "evolve": _task_evolve,
    "stability": _task_stability,
    "instability-I": _task_instability_I,
    "instability-II": _task_instability_II,
    "gn-survey": _task_gn_survey,
    "virial-check": _task_virial,
}


def grid_audit(cfg: RunConfig) -> dict:
    tau = hardy_slack(cfg.grid, cfg.params)
    return {
        "quadrature_error": gaussian_quadrature_error(cfg.grid, cfg.params.d),
        "hardy_slack": tau if math.isfinite(tau) else None,
    }


def run(cfg: RunConfig, out_dir) -> int:
    """Execute ``cfg`` writing into ``out_dir``; returns the process exit status."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    em = _Emitter(out)
    t0 = time.perf_counter()
    status, code, summary, error = "ok", 0, None, None
    try:
        summary = TASK_RUNNERS[cfg.task](cfg, em)
    except HardyNLSError as exc:
        status, code, error = "error", exc.exit_code, exc.to_record()
    if error is not None:
        em.json("error.json", error)
    manifest = {
        "artifact": {"name": "hardynls", "version": __version__},
        "task": cfg.task,
        "seed": cfg.seed,
        "config": cfg.echo(),
        "grid_audit": grid_audit(cfg),
        "summary": summary,
        "status": status,
        "exit_code": code,
        "wall_clock_seconds": time.perf_counter() - t0,
        "files": {name: sha256(out / name) for name in sorted(set(em.files))},
    }
    write_json(out / "manifest.json", manifest)
    return code


def verify_manifest(out_dir) -> bool:
    """True when every hash listed in the manifest matches the file on disk."""
    out = Path(out_dir)
    man = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    return all(sha256(out / n) == h for n, h in man["files"].items())

"""Run configuration: loading, schema validation, physics checks, defaults.

Physics parameters (d, c, alpha, and M where a mass is needed) have no
defaults. Numerical controls do, and the resolved values are echoed in the
run manifest next to the document as written.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml
from jsonschema import Draft202012Validator

from ..errors import ConfigurationError
from ..radial import Grading, ModelParams, RadialGrid, make_grid, model_violations, parse_real

TASKS = ("groundstate", "evolve", "stability", "instability-I", "instability-II", "gn-survey", "virial-check")
TASK_BLOCK = {
    "groundstate": "groundstate",
    "evolve": "evolve",
    "stability": "stability",
    "instability-I": "instability",
    "instability-II": "instability",
    "gn-survey": "gn_survey",
    "virial-check": "virial",
}

_real = {"anyOf": [{"type": "number"}, {"type": "string", "pattern": r"^\s*-?\d+(\.\d*)?([eE][-+]?\d+)?(\s*/\s*\d+)?\s*$"}]}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_posint = {"type": "integer", "minimum": 1}

_FLOW = {
    "type": "object",
    "properties": {
        "pseudo_time_step": _pos,
        "max_iters": _posint,
        "energy_tol": _pos,
        "residual_tol": _pos,
        "step_tol": _pos,
        "initial_guess": {"enum": ["gaussian", "factored-singular", "file"]},
        "width": _pos,
        "seed": {"type": "integer"},
        "path": {"type": "string"},
    },
}

_EVOLVE_CORE = {
    "dt0": _pos,
    "t_end": _pos,
    "scheme": {"enum": ["crank-nicolson-relaxed", "strang-split"]},
    "record_every": _posint,
    "adaptive": {"type": "boolean"},
    "fixed_point_tol": _pos,
    "blowup_gradient_factor": {"type": "number", "exclusiveMinimum": 1},
    "blowup_dt_floor": _pos,
    "mass_budget": _pos,
    "energy_budget": _pos,
}

_INITIAL = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["gaussian", "hardy-gaussian", "groundstate", "cache"]},
        "amplitude": {"type": "number"},
        "width": _pos,
        "mu": _pos,
        "omega": _pos,
        "path": {"type": "string"},
        "pseudo_conformal_T": _pos,
    },
}

_KIT = {
    "type": "object",
    "properties": {"profile": {"enum": ["standard", "lemma43"]}, "R": {"type": "number", "exclusiveMinimum": 1}},
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["model", "grid"],
    "properties": {
        "task": {"enum": list(TASKS)},
        "model": {
            "type": "object",
            "required": ["d", "c", "alpha"],
            "properties": {"d": {"type": "integer"}, "c": _real, "alpha": _real, "reference": {"type": "boolean"}},
        },
        "grid": {
            "type": "object",
            "required": ["N", "Rmax"],
            "properties": {
                "N": {"type": "integer", "minimum": 16},
                "Rmax": _pos,
                "grading": {
                    "anyOf": [
                        {"type": "null"},
                        {"const": "uniform"},
                        {"type": "number", "exclusiveMinimum": 1},
                        {
                            "type": "object",
                            "required": ["kind"],
                            "properties": {"kind": {"enum": ["uniform", "geometric"]}, "ratio": {"type": "number"}},
                        },
                    ]
                },
            },
        },
        "output": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "workers": _posint,
        "groundstate": {
            "type": "object",
            "properties": {
                "M": _pos,
                "omega": _pos,
                "method": {"enum": ["auto", "flow", "weinstein"]},
                "cert_tol": _pos,
                "flow": _FLOW,
            },
        },
        "evolve": {
            "type": "object",
            "required": ["initial"],
            "properties": {**_EVOLVE_CORE, "initial": _INITIAL, "kit": _KIT},
        },
        "stability": {
            "type": "object",
            "required": ["M"],
            "properties": {
                "M": _pos,
                "deltas": {"type": "array", "items": _nonneg, "minItems": 1},
                "horizon": _pos,
                "kappa": _pos,
                "perturbations": {
                    "type": "array",
                    "items": {"enum": ["dilation", "bump", "noise"]},
                    "minItems": 1,
                    "uniqueItems": True,
                },
                "dt0": _pos,
                "record_every": _posint,
                "ground_state_cache": {"type": "string"},
                "flow": _FLOW,
            },
        },
        "instability": {
            "type": "object",
            "properties": {
                "n_values": {"type": "array", "items": _posint, "minItems": 1},
                "mu": {"type": "array", "items": _pos, "minItems": 1},
                "lambda": {"type": "array", "items": _pos, "minItems": 1},
                "omega": _pos,
                "dt0": _pos,
                "t_end": _pos,
                "ground_state_cache": {"type": "string"},
            },
        },
        "gn_survey": {
            "type": "object",
            "properties": {
                "c_values": {"type": "array", "items": _real, "minItems": 1},
                "offsets": {"type": "array", "items": _nonneg},
                "offset_c": _real,
            },
        },
        "virial": {
            "type": "object",
            "properties": {
                "profile": {"enum": ["standard", "lemma43"]},
                "R_values": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 1}, "minItems": 1},
                "eps": {"type": "array", "items": _nonneg, "minItems": 1},
                "identity": {
                    "type": "object",
                    "required": ["initial"],
                    "properties": {**_EVOLVE_CORE, "initial": _INITIAL},
                },
            },
        },
    },
}

DEFAULTS = {
    "groundstate": {"method": "auto", "cert_tol": 1e-4, "flow": {}},
    "evolve": {"dt0": 2e-3, "t_end": 1.0, "scheme": "crank-nicolson-relaxed", "record_every": 1, "adaptive": True},
    "stability": {
        "deltas": [0.01, 0.03],
        "horizon": 50.0,
        "kappa": 20.0,
        "perturbations": ["dilation", "bump", "noise"],
        "dt0": 0.05,
        "record_every": 10,
        "flow": {"pseudo_time_step": 100.0},
    },
    "instability": {"omega": 1.0, "dt0": 2e-3, "t_end": 10.0},
    "gn_survey": {"offsets": []},
    "virial": {"profile": "lemma43", "R_values": [4.0, 8.0], "eps": [1e-3]},
}


def _strict_schema(schema):
    """Copy of ``schema`` with additionalProperties: false on every object."""
    s = copy.deepcopy(schema)

    def walk(node):
        if isinstance(node, dict):
            if node.get("type") == "object" and "properties" in node:
                node.setdefault("additionalProperties", False)
            for v in node.values():
                walk(v)
        elif isinstance(node, list):
            for v in node:
                walk(v)

    walk(s)
    return s


_VALIDATORS = {False: Draft202012Validator(SCHEMA), True: Draft202012Validator(_strict_schema(SCHEMA))}


def _unknown_keys(doc, schema, path=""):
    """Paths of keys not declared in the schema (reported as warnings when not strict)."""
    out = []
    if isinstance(doc, dict) and isinstance(schema, dict) and "properties" in schema:
        for k, v in doc.items():
            if k not in schema["properties"]:
                out.append(f"{path}/{k}")
            else:
                out.extend(_unknown_keys(v, schema["properties"][k], f"{path}/{k}"))
    return out


@dataclass(frozen=True)
class RunConfig:
    raw: dict
    resolved: dict
    task: str
    params: ModelParams
    grid: RadialGrid
    block: dict
    output: str | None
    seed: int
    workers: int
    strict: bool
    source: str | None = None
    warnings: tuple = field(default=())

    def echo(self) -> dict:
        return {"as_written": self.raw, "resolved": self.resolved, "warnings": list(self.warnings)}


def load_document(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file {str(path)!r} does not exist", violations=[f"missing file {path}"])
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix.lower() in (".yaml", ".yml"):
            doc = yaml.safe_load(text)
        else:
            doc = json.loads(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigurationError(f"cannot parse {str(path)!r}: {exc}", violations=[str(exc)]) from exc
    if not isinstance(doc, dict):
        raise ConfigurationError("config document must be a mapping", violations=["top level is not a mapping"])
    return doc


def _merge(defaults: dict, given: dict) -> dict:
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _grading_of(spec) -> Grading:
    return Grading.parse(spec)


def _physics_violations(doc: dict, task: str, base: Path | None) -> list[str]:
    out = []
    m = doc["model"]
    try:
        d, c, alpha = int(m["d"]), parse_real(m["c"]), parse_real(m["alpha"])
    except (ValueError, ZeroDivisionError) as exc:
        return [f"model: {exc}"]
    out += [f"model: {v}" for v in model_violations(d, c, alpha, bool(m.get("reference", False)))]
    if d >= 1 and alpha > 0:
        if task == "stability" and not alpha < 4 / d - 1e-12:
            out.append(f"stability driver requires alpha < 4/d = {4 / d:g}; got alpha = {alpha:g}")
        if task in ("instability-I", "instability-II") and not abs(alpha - 4 / d) <= 1e-12:
            out.append(f"instability drivers require alpha = 4/d = {4 / d:g}; got alpha = {alpha:g}")
    g = doc.get("grid", {}).get("grading")
    try:
        _grading_of(g)
    except ConfigurationError as exc:
        out.append(f"grid: {exc.message}")
    blk = doc.get(TASK_BLOCK[task], {})
    if task == "groundstate":
        if d >= 3 and 0 < alpha < 4 / d - 1e-12 and "M" not in blk and "omega" not in blk:
            out.append("groundstate: subcritical power needs an explicit mass M (or a frequency omega)")
    if task == "gn-survey":
        if "c_values" not in blk:
            out.append("gn_survey: c_values must be given explicitly")
        if blk.get("offsets") and d != 3:
            out.append(f"gn_survey: translated offsets are only supported for d = 3 (got d = {d})")
    if task == "instability-I" and "n_values" not in blk:
        out.append("instability: n_values must be given for family I")
    if task == "instability-II":
        if "mu" not in blk or "lambda" not in blk:
            out.append("instability: mu and lambda sequences must be given for family II")
        elif len(blk["mu"]) != len(blk["lambda"]):
            out.append("instability: mu and lambda sequences differ in length")
    if task == "evolve" and "evolve" not in doc:
        out.append("evolve: block with initial data is required")
    for ref in _referenced_files(doc, task):
        p = Path(ref)
        if base is not None and not p.is_absolute():
            p = base / p
        if not p.exists():
            out.append(f"referenced file {ref!r} does not exist")
    return out


def _referenced_files(doc, task) -> list[str]:
    refs = []
    blk = doc.get(TASK_BLOCK[task], {})
    for key in ("ground_state_cache",):
        if key in blk:
            refs.append(blk[key])
    flow = blk.get("flow", {})
    if flow.get("initial_guess") == "file" and "path" in flow:
        refs.append(flow["path"])
    for holder in (blk, blk.get("identity", {})):
        ini = holder.get("initial", {}) if isinstance(holder, dict) else {}
        if ini.get("kind") == "cache" and "path" in ini:
            refs.append(ini["path"])
    return refs


def validate(doc: dict, task: str | None = None, strict: bool = False, base: Path | None = None) -> RunConfig:
    """Validate a config document; raises ConfigurationError listing every violation."""
    violations = []
    for err in sorted(_VALIDATORS[strict].iter_errors(doc), key=lambda e: (list(map(str, e.absolute_path)), e.message)):
        loc = "/" + "/".join(str(x) for x in err.absolute_path)
        violations.append(f"{loc}: {err.message}")
    doc_task = doc.get("task")
    if task is None:
        task = doc_task
    elif doc_task is not None and doc_task != task:
        violations.append(f"/task: config says {doc_task!r} but {task!r} was requested")
    if task is None:
        violations.append("/task: no task given in the config or on the command line")
    elif task not in TASKS:
        violations.append(f"/task: unknown task {task!r}")
    if task in TASKS:
        try:
            violations += _physics_violations(doc, task, base)
        except (KeyError, TypeError, ValueError, AttributeError):
            pass  # structural problems are already reported by the schema
    if violations:
        raise ConfigurationError(violations[0], violations=violations)
    warnings = tuple(_unknown_keys(doc, SCHEMA)) if not strict else ()
    m = doc["model"]
    params = ModelParams(int(m["d"]), parse_real(m["c"]), parse_real(m["alpha"]), bool(m.get("reference", False)))
    gr = doc["grid"]
    grid = make_grid(int(gr["N"]), float(gr["Rmax"]), _grading_of(gr.get("grading")))
    name = TASK_BLOCK[task]
    block = _merge(DEFAULTS.get(name, {}), doc.get(name, {}))
    if base is not None:
        block = _resolve_paths(block, base)
    resolved = copy.deepcopy(doc)
    resolved["task"] = task
    resolved[name] = block
    resolved.setdefault("seed", 0)
    resolved.setdefault("workers", 1)
    resolved["grid"] = {"N": grid.N, "Rmax": grid.Rmax, "grading": grid.grading.to_dict()}
    resolved["model"] = dict(params.to_dict())
    return RunConfig(
        raw=copy.deepcopy(doc),
        resolved=resolved,
        task=task,
        params=params,
        grid=grid,
        block=block,
        output=doc.get("output"),
        seed=int(doc.get("seed", 0)),
        workers=int(doc.get("workers", 1)),
        strict=strict,
        warnings=warnings,
    )


def _resolve_paths(block, base: Path):
    out = copy.deepcopy(block)

    def fix(holder, key):
        if isinstance(holder, dict) and key in holder and not Path(holder[key]).is_absolute():
            holder[key] = str(base / holder[key])

    fix(out, "ground_state_cache")
    fix(out.get("flow"), "path")
    fix(out.get("initial"), "path")
    fix(out.get("identity", {}).get("initial") if isinstance(out.get("identity"), dict) else None, "path")
    return out


def parse_config(path, task: str | None = None, strict: bool = False) -> RunConfig:
    doc = load_document(path)
    base = Path(path).resolve().parent
    cfg = validate(doc, task=task, strict=strict, base=base)
    return RunConfig(**{**cfg.__dict__, "source": str(path)})

"""Job configs, the batch runner, CSV grids and the bundled corpus.

A job is one JSON file (see ``schemas/config.schema.json``).  ``run`` is
deterministic given the config: sampling is seeded, iteration follows plan
order, and the report is plain JSON with sorted keys.
"""
from __future__ import annotations

import csv
import itertools
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

from . import expr as E
from .envelope import (LinearFamilyError, PatternError, envelope_of, family_from_web_function,
                       verify_tangency)
from .euler import (EulerSpec, SolvedField, closed_form_check, commutator_check,
                    derivative_cross_check, euler_system_residual, first_integral_check,
                    reconstruct_psi)
from .fields import ExprField
from .geometry import Connection, Geometry
from .poly import expand_to_poly
from .sampling import CheckResult, SamplePlan
from .webcheck import (DEFAULT_TOLERANCE, WebSpec, _flex, geodesic_oracle_check,
                       geodesic_web_check, hyperplanarity_check, pair_implication_check,
                       ratio_independence_check)

__all__ = ["ConfigError", "JobConfig", "load_config", "run", "emit_grid",
           "list_corpus", "corpus_config", "report_json", "SECTIONS"]

SECTIONS = ("check", "construct", "envelope")


class ConfigError(ValueError):
    pass


def _schema(name: str) -> dict:
    text = resources.files("geoweb").joinpath("schemas").joinpath(name).read_text(encoding="utf-8")
    return json.loads(text)


@dataclass
class WebFunctionConfig:
    name: str
    expr: E.Expr
    source: str
    envelope: dict | None = None


@dataclass
class EulerConfig:
    name: str
    spec: EulerSpec
    guess: E.Expr
    closed_form: E.Expr | None = None
    transform: str = "identity"
    expected_psi: tuple[E.Expr, ...] | None = None


@dataclass
class JobConfig:
    name: str
    description: str
    n: int
    geometry: Geometry
    geometry_raw: dict
    plan: SamplePlan
    functions: list[WebFunctionConfig] = field(default_factory=list)
    euler: list[EulerConfig] = field(default_factory=list)
    tolerances: dict[str, float] = field(default_factory=dict)
    checks: dict[str, bool] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)


DEFAULT_TOLERANCES = {
    "residual": DEFAULT_TOLERANCE,
    "solver": 1e-12,
    "min_regular_fraction": 0.9,
    "euler_fd": 1e-6,
    "euler_ift": 1e-9,
    "psi": 1e-6,
    "closed_form": 1e-9,
    "tangency": 1e-8,
    "oracle": 1e-6,
}


def _parse(text: str, n: int, names=(), what: str = "expression") -> E.Expr:
    try:
        return E.parse(text, n, names=names)
    except E.ParseError as exc:
        raise ConfigError(f"{what} {text!r}: {exc}") from exc


def _geometry(raw: dict, n: int) -> Geometry:
    kind = raw["type"]
    if kind == "flat":
        return Geometry.flat()
    if kind == "constant_curvature":
        return Geometry.constant_curvature(raw["kappa"])
    if kind == "hypersurface":
        return Geometry.hypersurface(_parse(raw["u"], n, what="hypersurface u"))
    if kind == "explicit":
        try:
            conn = Connection.from_strings(raw["gamma"], n)
        except (E.ParseError, ValueError) as exc:
            raise ConfigError(f"connection table: {exc}") from exc
        return Geometry.explicit(conn)
    raise ConfigError(f"unknown geometry {kind!r}")


def load_config(data: dict | str | Path) -> JobConfig:
    """Validate and parse a job config (dict, JSON text or path)."""
    if isinstance(data, Path) or (isinstance(data, str) and not data.lstrip().startswith("{")):
        try:
            data = json.loads(Path(data).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
    elif isinstance(data, str):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
    try:
        jsonschema.validate(data, _schema("config.schema.json"))
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config: {exc.message}") from exc

    n = data["dimension"]
    geometry = _geometry(data["geometry"], n)
    sp = data["sample_plan"]
    box = tuple(tuple(float(v) for v in b) for b in sp["box"])
    if len(box) != n:
        raise ConfigError(f"sample_plan.box has {len(box)} axes, dimension is {n}")
    grid = sp.get("grid")
    plan = SamplePlan(
        box=box,
        grid=tuple(grid) if isinstance(grid, list) else grid,
        n_random=sp.get("random_points", 100),
        seed=sp.get("seed", 0),
        constraints=tuple(_parse(c, n, what="constraint") for c in sp.get("constraints", [])),
        exclusion_tol=sp.get("exclusion_tolerance", 1e-8),
    )
    functions = [
        WebFunctionConfig(w["name"], _parse(w["expr"], n, what=f"web function {w['name']}"),
                          w["expr"], w.get("envelope"))
        for w in data.get("web_functions", [])
    ]
    euler = []
    for s in data.get("euler_specs", []):
        if len(s["psi"]) != n - 1:
            raise ConfigError(f"euler spec {s['name']}: need {n - 1} Psi functions")
        try:
            spec = EulerSpec.parse(s["u0"], s["psi"])
        except E.ParseError as exc:
            raise ConfigError(f"euler spec {s['name']}: {exc}") from exc
        guess = s.get("guess", 0)
        guess = _parse(str(guess), n, what="guess")
        euler.append(EulerConfig(
            s["name"], spec, guess,
            _parse(s["closed_form"], n, what="closed form") if s.get("closed_form") else None,
            s.get("transform", "identity"),
            tuple(_parse(p, 0, names=("t",), what="expected Psi") for p in s["expected_psi"])
            if s.get("expected_psi") else None,
        ))
    if not functions and not euler:
        raise ConfigError("config needs web_functions or euler_specs")
    if euler and geometry.kind != "flat":
        raise ConfigError("euler specs construct hyperplanar webs and need a flat geometry")
    tolerances = dict(DEFAULT_TOLERANCES)
    tolerances.update(data.get("tolerances", {}))
    return JobConfig(data.get("name", "job"), data.get("description", ""), n, geometry,
                     data["geometry"], plan, functions, euler, tolerances,
                     dict(data.get("checks", {})), dict(data.get("outputs", {})))


# --------------------------------------------------------------------------
# running

def _check_section(cfg: JobConfig) -> dict:
    tol = cfg.tolerances["residual"]
    web = WebSpec({w.name: w.expr for w in cfg.functions}, cfg.geometry, cfg.n)
    report = geodesic_web_check(web, cfg.plan, tol, cfg.tolerances["min_regular_fraction"])
    out = {}
    for w in cfg.functions:
        entry: dict[str, Any] = {"expr": w.source, "geodesic": report.to_dict()[w.name]}
        extra: list[CheckResult] = []
        if cfg.geometry.kind == "flat":
            extra.append(hyperplanarity_check(web.fields[w.name], cfg.plan, tol,
                                             cfg.tolerances["min_regular_fraction"]))
            if cfg.checks.get("distribution", True):
                extra.append(first_integral_check(web.fields[w.name], cfg.plan, tol))
                extra.append(commutator_check(web.fields[w.name], cfg.plan, tol))
            if cfg.checks.get("pair_implication", True):
                extra.append(pair_implication_check(web.fields[w.name], cfg.plan, tol=tol))
        elif cfg.geometry.kind in ("constant_curvature", "hypersurface"):
            if cfg.checks.get("ratio_independence", True):
                extra.append(ratio_independence_check(web.fields[w.name], cfg.geometry,
                                                      cfg.plan, tol))
        if cfg.checks.get("geodesic_oracle", False):
            extra.append(geodesic_oracle_check(web.fields[w.name], cfg.geometry, cfg.plan,
                                               tol=cfg.tolerances["oracle"]))
        entry["checks"] = {r.name: r.to_dict() for r in extra}
        entry["passed"] = report.function_passed(w.name) and all(r.passed for r in extra)
        out[w.name] = entry
    return out


def _construct_section(cfg: JobConfig) -> dict:
    t = cfg.tolerances
    out = {}
    for ec in cfg.euler:
        fld = SolvedField(ec.spec, ec.guess, tol=t["solver"])
        entry: dict[str, Any] = {
            "u0": E.to_string(ec.spec.u0),
            "psi": [E.to_string(p) for p in ec.spec.psi],
        }
        fd = CheckResult("euler_system_fd", t["euler_fd"])
        ift = CheckResult("euler_system_ift", t["euler_ift"])
        for p in cfg.plan.points():
            for s in range(1, ec.spec.n):
                for method, res in (("fd", fd), ("ift", ift)):
                    try:
                        res.add(euler_system_residual(fld, s, p, method), 1.0, p)
                    except E.EvalError:
                        res.error()
        checks = [fd, ift,
                  hyperplanarity_check(fld, cfg.plan, t["residual"], t["min_regular_fraction"]),
                  derivative_cross_check(fld, cfg.plan, t["euler_fd"])]
        if ec.closed_form is not None:
            checks.append(closed_form_check(fld, ec.closed_form, cfg.plan, ec.transform,
                                            t["closed_form"]))
        psi = reconstruct_psi(fld, cfg.plan, ec.expected_psi, tol_psi=t["psi"])
        vals = [i.value for i in fld.cache.values()]
        nonvanishing = ec.spec.check_nonvanishing(vals)
        entry["checks"] = {r.name: r.to_dict() for r in checks}
        entry["psi_reconstruction"] = psi.to_dict()
        entry["solver"] = fld.stats()
        entry["psi_vanishes_at"] = nonvanishing[:5]
        entry["passed"] = all(r.passed for r in checks) and psi.passed and not nonvanishing
        out[ec.name] = entry
    return out


def _envelope_section(cfg: JobConfig) -> dict:
    out = {}
    for w in cfg.functions:
        if w.envelope is None:
            continue
        expected_text = w.envelope.get("expected")
        entry: dict[str, Any] = {"expected": expected_text}
        try:
            fam = family_from_web_function(w.expr)
        except PatternError as exc:
            entry.update(passed=False, error=str(exc))
            out[w.name] = entry
            continue
        entry["family"] = {
            "polynomial": str(fam.polynomial()),
            "a": str(fam.a), "b": str(fam.b), "c": str(fam.c),
            "squared_level": fam.squared_level,
            "stripped_factors": list(fam.stripped),
        }
        try:
            env = envelope_of(fam)
        except LinearFamilyError as exc:
            entry["envelope"] = None
            entry["linear_kind"] = fam.linear_kind()
            entry["note"] = str(exc)
            entry["passed"] = expected_text is None
            out[w.name] = entry
            continue
        entry["envelope"] = str(env)
        entry["canonical"] = str(env.primitive())
        if expected_text is not None:
            expected = expand_to_poly(_parse(expected_text, cfg.n, what="expected envelope"))
            entry["exact_match"] = env.primitive() == expected.primitive()
            entry["raw_match"] = env == expected
        tangency = verify_tangency(fam, env, seed=cfg.plan.seed, tol=cfg.tolerances["tangency"])
        entry["tangency"] = tangency.to_dict()
        entry["passed"] = bool(tangency.passed and entry.get("exact_match", True))
        out[w.name] = entry
    return out


def run(cfg: JobConfig, sections=SECTIONS) -> dict:
    """Run the requested sections and return the report as a JSON-ready dict."""
    report: dict[str, Any] = {
        "job": cfg.name,
        "description": cfg.description,
        "dimension": cfg.n,
        "geometry": cfg.geometry_raw,
        "sections": list(sections),
        "plan": {
            "box": [list(b) for b in cfg.plan.box],
            "seed": cfg.plan.seed,
            "exclusion_tolerance": cfg.plan.exclusion_tol,
            "candidates": int(len(cfg.plan.candidates())),
            "rejected_by_constraints": cfg.plan.n_rejected,
            "evaluated": int(len(cfg.plan.points())),
        },
        "tolerances": cfg.tolerances,
    }
    passed = []
    if "check" in sections and cfg.functions:
        report["web_functions"] = _check_section(cfg)
        passed += [e["passed"] for e in report["web_functions"].values()]
    if "construct" in sections and cfg.euler:
        report["euler_specs"] = _construct_section(cfg)
        passed += [e["passed"] for e in report["euler_specs"].values()]
    if "envelope" in sections:
        env = _envelope_section(cfg)
        if env:
            report["envelopes"] = env
            passed += [e["passed"] for e in env.values()]
    report["checks_run"] = len(passed)
    report["passed"] = bool(passed) and all(passed)
    return _plain(report)


def _plain(obj):
    """Convert numpy scalars and tuples so json.dumps is exact and stable."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return _plain(obj.item())
    if isinstance(obj, float) and obj != obj:
        return None
    if isinstance(obj, float) and obj in (float("inf"), float("-inf")):
        return None
    return obj


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


# --------------------------------------------------------------------------
# CSV grids

def emit_grid(f, plan: SamplePlan, path) -> int:
    """Write x1..xn, f and Flex_ij per pair for each plan point; returns the row count.

    RFC 4180 (CRLF line ends, minimal quoting), '.' decimals, 17 significant
    digits; cells that cannot be evaluated are left empty.
    """
    fld = f if not isinstance(f, E.Expr) else ExprField(f, plan.n)
    n = fld.n
    pairs = list(itertools.combinations(range(n), 2))
    header = [f"x{i + 1}" for i in range(n)] + ["f"] + [f"flex_{i + 1}{j + 1}" for i, j in pairs]
    rows = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        for p in plan.points():
            row = [_num(v) for v in p]
            try:
                v, g, h = fld.jet(p)
                row.append(_num(v))
                row += [_num(_flex(g, h, i, j)[0]) for i, j in pairs]
            except E.EvalError:
                row += [""] * (1 + len(pairs))
            writer.writerow(row)
            rows += 1
    return rows


def _num(v) -> str:
    return format(float(v), ".17g")


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", name).strip("_") or "f"


def grid_paths(cfg: JobConfig, path: str) -> list[tuple[WebFunctionConfig, Path]]:
    """One CSV per web function; with several functions the name is suffixed."""
    target = Path(path)
    if len(cfg.functions) == 1:
        return [(cfg.functions[0], target)]
    return [(w, target.with_name(f"{target.stem}_{_slug(w.name)}{target.suffix or '.csv'}"))
            for w in cfg.functions]


# --------------------------------------------------------------------------
# bundled corpus

def _corpus_dir():
    return resources.files("geoweb").joinpath("corpus")


def list_corpus() -> list[tuple[str, str]]:
    out = []
    for entry in sorted(_corpus_dir().iterdir(), key=lambda p: p.name):
        if entry.name.endswith(".json"):
            data = json.loads(entry.read_text(encoding="utf-8"))
            out.append((data["name"], data.get("description", "")))
    return out


def corpus_config(name: str) -> dict:
    entry = _corpus_dir().joinpath(f"{name}.json")
    if not entry.is_file():
        known = ", ".join(n for n, _ in list_corpus())
        raise ConfigError(f"unknown corpus job {name!r} (known: {known})")
    return json.loads(entry.read_text(encoding="utf-8"))

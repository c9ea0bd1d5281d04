"""End-to-end derivation runs and their reports.

A run goes load -> H -> identify -> solve -> propagate -> golden compare,
then the model-specific checks, the optional numeric oracle and the
equal-time limits.  The report is a plain dict (the JSON form); the text form
is rendered from the same dict.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import fields as fm
from .brackets import (
    BracketTable,
    DerivationError,
    as_operator_form,
    build_identification_system,
    check_golden,
    check_golden_table,
    eq1_residuals,
    eta_regularized_derivation,
    jacobi_and_leibniz_check,
    legendre_hamiltonian,
    model_hamiltonian,
    regularized_model,
    solve_bracket_table,
)
from .expr import ExprError, evaluate_numeric
from .library import BUILTIN_NAMES, FIELD_MODELS, builtin
from .model import ModelError, ModelSpec, load_model, validate
from .parser import ParseError

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3
ODE_TOL = 1e-6


class ConfigError(ValueError):
    pass


class PipelineError(RuntimeError):
    def __init__(self, model: str, stage: str, message: str):
        super().__init__(f"{model}: {stage}: {message}")
        self.model = model
        self.stage = stage


@dataclass
class RunConfig:
    model: str
    N: int | None = None
    L: float | None = None
    m: float | None = None
    oracle: bool = False
    tol: float = 1e-6
    eta_schedule: tuple[float, ...] = ()
    fmt: str = "text"
    out: str | None = None
    limits: bool = True

    def __post_init__(self):
        if not self.model:
            raise ConfigError("a model name or file is required")
        if not self.tol > 0:
            raise ConfigError(f"tolerance must be positive, got {self.tol}")
        if self.N is not None and self.N < 1:
            raise ConfigError(f"--modes must be >= 1, got {self.N}")
        if self.L is not None and not self.L > 0:
            raise ConfigError(f"--box must be positive, got {self.L}")
        if self.m is not None and not self.m > 0:
            raise ConfigError(f"--mass must be positive, got {self.m}")
        if self.fmt not in ("text", "json"):
            raise ConfigError(f"unknown format {self.fmt!r}")
        if any(not e > 0 for e in self.eta_schedule):
            raise ConfigError("eta values must be positive")


def load_selected(config: RunConfig) -> ModelSpec:
    if config.model in BUILTIN_NAMES:
        if config.model not in FIELD_MODELS and any(v is not None for v in (config.N, config.L, config.m)):
            raise ConfigError(f"{config.model} takes no truncation parameters")
        try:
            return builtin(config.model, N=config.N, L=config.L, m=config.m)
        except ModelError as err:
            raise ConfigError(str(err)) from None
    path = Path(config.model)
    if not path.is_file():
        raise ConfigError(f"{config.model!r} is neither a built-in model ({', '.join(BUILTIN_NAMES)}) nor a file")
    try:
        return load_model(path.read_text())
    except (ModelError, ParseError, ExprError) as err:
        raise ConfigError(f"{path}: {err}") from None


def _check(name: str, ok: bool, detail) -> dict:
    return {"name": name, "pass": bool(ok), "detail": detail}


def _float(x) -> float:
    return float(x)


def _hamiltonian_info(m: ModelSpec) -> tuple[dict, list[dict]]:
    H = model_hamiltonian(m)
    info = {"expression": str(H), "source": "stated" if m.hamiltonian is not None else "legendre"}
    checks = []
    if m.hamiltonian is not None and m.lagrangian is not None:
        leg = legendre_hamiltonian(m)
        checks.append(_check("stated H equals on-shell Legendre transform", leg == m.hamiltonian, str(leg)))
    return info, checks


def _table_dict(m: ModelSpec, table: BracketTable) -> dict:
    op = m.golden_table_kind != "bracket"
    entries = []
    for k, l, v in table.nonzero():
        e = {"pair": f"{{{table.constants[k].name}, {table.constants[l].name}}}", "bracket": str(v)}
        if op:
            e["operator_form"] = str(as_operator_form(v))
        entries.append(e)
    return {
        "constants": [c.name for c in table.constants],
        "matrix": table.matrix_strings(),
        "nonzero": entries,
        "operator_form": m.golden_table_kind if op else None,
        "rank": table.rank,
        "n_equations": table.n_equations,
        "n_unknowns": table.n_unknowns,
        "indeterminate": [f"{{{a}, {b}}}" for a, b in table.indeterminate],
        "residual_zero": table.residual_zero,
        "empty_system": table.empty_system,
        "notes": list(table.notes),
    }


def _model_checks(m: ModelSpec, table: BracketTable, audit_samples: int) -> list[dict]:
    checks = []
    kind = m.meta.get("kind")
    H = model_hamiltonian(m)
    if not table.indeterminate:
        res = eq1_residuals(m, table, H)
        bad = {k: str(v) for k, v in res.items() if v}
        checks.append(_check("df/dt = {f, H} exactly for every entry", not bad, bad or "all residuals 0"))
        audit = jacobi_and_leibniz_check(table, samples=audit_samples)
        ok = all(audit[k] for k in ("antisymmetry", "parity_selection", "jacobi", "leibniz", "bracket_antisymmetry"))
        checks.append(_check("antisymmetry, Jacobi and Leibniz on random probes", ok, audit["failures"][:3] or f"{audit_samples} probes"))
    if any(c.odd for c in table.constants) and m.golden:
        from .exterior import crosscheck_brackets

        pairs = [(g.f, g.g) for g in m.golden if all(m.on_shell(m.parse(x)).parity() is not None for x in (g.f, g.g))]
        pairs = [p for p in pairs if all(not m.on_shell(m.parse(x)).is_even() for x in p)]
        if pairs and len([c for c in table.constants if c.odd]) <= 10:
            cc = crosscheck_brackets(m, table, pairs)
            worst = max(c["deviation"] for c in cc)
            checks.append(_check("graded brackets agree with exterior-algebra matrices", worst < 1e-12, {"max_deviation": worst}))
    if kind == "sigma":
        lat = fm.sigma_lattice_bracket(m, table)
        checks.append(_check("site bracket {theta_i, Pi_j} = delta_ij/dx exactly", lat.is_lattice_delta(), f"{lat.sites} sites"))
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(10):
            th = rng.uniform(-np.pi, np.pi, lat.sites)
            td = rng.normal(size=lat.sites)
            worst = max(worst, fm.sigma_field_brackets(lat, m.meta["L"], th, td).max_deviation)
        checks.append(_check("phi/Pi field brackets by chain rule, 10 random configurations", worst < 1e-10, {"max_deviation": worst}))
    if kind == "majorana":
        op = fm.majorana_operator_check(m, table)
        ok = op["symbolic"] and op["matrix_anticommutator_deviation"] < 1e-12 and op["matrix_commutator_deviation"] < 1e-12
        checks.append(_check("[A, N] rebuilt from anticommutators; Jordan-Wigner matrices", ok, {k: v for k, v in op.items() if k != "failures"}))
        res = spinor_grid_residual(m.meta["m"])
        checks.append(_check("spinor sums on a 20-point k-grid", res < 1e-12, {"max_residual": res}))
    return checks


def spinor_grid_residual(m: float, n: int = 20) -> float:
    """Spinor relation residual on k in [0, 100 m] along x plus random 3D directions."""
    rng = np.random.default_rng(5)
    worst = 0.0
    ks = np.concatenate([[0.0], np.geomspace(1e-3 * m, 100 * m, n - 1)])
    for j, k in enumerate(ks):
        d = rng.normal(size=3) if j % 2 else np.array([1.0, 0.0, 0.0])
        kv = k * d / np.linalg.norm(d)
        worst = max(worst, fm.SpinorPair.build(kv, m).residual())
    return worst


def _limit_checks(m: ModelSpec, table: BracketTable) -> list[dict]:
    out = []
    for name, chk in fm.standard_limit_checks():
        if name == m.name:
            out.append(fm.equal_time_limit(m, table, chk).to_dict())
    return out


def _eta_runs(m: ModelSpec, schedule) -> dict:
    eta = m.source_term.coupling
    aug = regularized_model(m)
    tb = solve_bracket_table(build_identification_system(aug, model_hamiltonian(aug)), force_params=(eta,))
    rows = []
    for val in schedule:
        entries = {}
        for k, l, v in tb.nonzero():
            entries[f"{{{tb.constants[k].name}, {tb.constants[l].name}}}"] = _complex_pair(evaluate_numeric(v, {eta: val}))
        rows.append({"eta": val, "entries": entries})
    limit = eta_regularized_derivation(m)
    return {
        "coupling": eta.name,
        "table_at_eta": {f"{{{tb.constants[k].name}, {tb.constants[l].name}}}": str(v) for k, l, v in tb.nonzero()},
        "schedule": rows,
        "exact_limit": limit.matrix_strings(),
    }


def _complex_pair(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def derive(m: ModelSpec) -> tuple[BracketTable, list[str]]:
    """Plain derivation; falls back to eta regularization when underdetermined."""
    notes = []
    table = solve_bracket_table(build_identification_system(m, model_hamiltonian(m)))
    if table.indeterminate and m.source_term is not None:
        notes.append(f"plain identification leaves {len(table.indeterminate)} brackets open; using the eta -> 0 limit")
        table = eta_regularized_derivation(m)
    return table, notes


def run_model(m: ModelSpec, config: RunConfig) -> dict:
    t0 = time.perf_counter()
    stage = "validate"
    try:
        warnings = validate(m)
        stage = "hamiltonian"
        h_info, h_checks = _hamiltonian_info(m)
        stage = "identify"
        table, notes = derive(m)
        stage = "propagate"
        golden = check_golden(m, table)
        gtable = check_golden_table(m, table)
        stage = "checks"
        audit_samples = 10 if len(m.constants) <= 12 else 2
        checks = h_checks + _model_checks(m, table, audit_samples)
        oracle = None
        if config.oracle:
            stage = "oracle"
            oracle = _oracle(m, table, config.tol)
        limits = []
        if config.limits:
            stage = "limits"
            limits = _limit_checks(m, table)
        eta = None
        if config.eta_schedule:
            stage = "eta"
            eta = _eta_runs(m, config.eta_schedule)
    except (DerivationError, ExprError, ModelError, np.linalg.LinAlgError) as err:
        raise PipelineError(m.name, stage, str(err)) from err
    failures = _failures(golden, gtable, table, checks, oracle, limits)
    ok = not failures
    return {
        "kind": "report",
        "model": m.name,
        "parameters": {k: m.meta[k] for k in ("N", "L", "m") if k in m.meta},
        "hamiltonian": h_info,
        "table": _table_dict(m, table),
        "golden": golden,
        "golden_table": gtable,
        "checks": checks,
        "oracle": oracle,
        "limits": limits,
        "eta": eta,
        "notes": list(m.notes) + notes,
        "warnings": warnings,
        "failures": failures,
        "pass": ok,
        "exit_code": EXIT_OK if ok else EXIT_FAIL,
        "elapsed_s": round(time.perf_counter() - t0, 3),
    }


def _failures(golden, gtable, table: BracketTable, checks, oracle, limits) -> list[str]:
    out = [f"golden {g['bracket']}: expected {g['expected']}, derived {g['derived']}" for g in golden if not g["pass"]]
    out += [f"table {x['pair']}: expected {x['expected']}, derived {x['derived']}" for x in gtable["mismatches"]]
    if not table.residual_zero:
        out.append("identification residual is not zero")
    if table.indeterminate:
        out.append("indeterminate brackets: " + ", ".join(f"{{{a}, {b}}}" for a, b in table.indeterminate))
    out += [f"check {c['name']}" for c in checks if not c["pass"]]
    if oracle is not None and not oracle.get("pass", True):
        out.append(f"oracle {oracle.get('worst_entry')}: deviation {oracle.get('max_deviation')}")
    out += [f"limit {c['name']}" for c in limits if not c["pass"]]
    return out


def _oracle(m: ModelSpec, table: BracketTable, tol: float) -> dict:
    from .oracle import ode_cross_check, oracle_check

    if any(c.odd for c in m.constants):
        return {"skipped": "odd constants; covered by the exterior-algebra check", "pass": True}
    out = oracle_check(m, table, tol=tol)
    out = {k: (_float(v) if isinstance(v, (float, np.floating)) else v) for k, v in out.items()}
    # independent of the closed form: integrate the Euler-Lagrange equations
    # from the solution's initial data (real constants, conjugate pairs equal)
    rng = np.random.default_rng(11)
    real_c, values = {}, []
    for c in m.constants:
        key = min(c.name, c.conjugate or c.name)
        real_c.setdefault(key, float(rng.uniform(-1, 1)))
        values.append(real_c[key])
    ode = ode_cross_check(m, values)
    out["euler_lagrange"] = ode
    if ode is not None and not ode["max_deviation"] < ODE_TOL:
        out["pass"] = False
    return out


def run(config: RunConfig) -> dict:
    m = load_selected(config)
    if config.eta_schedule and m.source_term is None:
        raise ConfigError(f"--eta-schedule needs a model with a [source_term] section; {m.name} has none")
    return run_model(m, config)


def verify_all(jobs: int = 1, extra: tuple[str, ...] = ()) -> dict:
    """Every built-in at default parameters with oracle and limits, plus extra model files."""
    targets = [RunConfig(name, oracle=True) for name in BUILTIN_NAMES] + [RunConfig(p, oracle=True) for p in extra]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(jobs) as ex:
            rows = list(ex.map(_summary_row, targets))
    else:
        rows = [_summary_row(c) for c in targets]
    rows.sort(key=lambda r: r["model"])
    return {"kind": "summary", "models": rows, "pass": all(r["pass"] for r in rows)}


def _summary_row(config: RunConfig) -> dict:
    try:
        rep = run(config)
    except (ConfigError, PipelineError) as err:
        code = EXIT_USAGE if isinstance(err, ConfigError) else EXIT_INTERNAL
        return {"model": config.model, "pass": False, "exit_code": code, "error": str(err),
                "golden": False, "table": False, "checks": False, "oracle": False, "limits": False, "failures": [str(err)]}
    oracle = rep["oracle"]
    return {
        "model": rep["model"],
        "pass": rep["pass"],
        "exit_code": rep["exit_code"],
        "golden": all(g["pass"] for g in rep["golden"]) and rep["golden_table"]["pass"],
        "table": rep["table"]["residual_zero"] and not rep["table"]["indeterminate"],
        "checks": all(c["pass"] for c in rep["checks"]),
        "oracle": None if oracle is None or "skipped" in oracle else oracle["pass"],
        "limits": None if not rep["limits"] else all(c["pass"] for c in rep["limits"]),
        "failures": rep["failures"],
        "elapsed_s": rep["elapsed_s"],
    }


# ----------------------------------------------------------------------
# rendering and schema


def schema() -> dict:
    return json.loads(resources.files("ciquant").joinpath("report.schema.json").read_text())


def validate_json(doc: dict) -> None:
    import jsonschema

    jsonschema.validate(doc, schema())


def _mark(ok) -> str:
    if ok is None:
        return "  -  "
    return "PASS " if ok else "FAIL "


def render_text(doc: dict) -> str:
    if doc["kind"] == "summary":
        return _render_summary(doc)
    out = [f"model: {doc['model']}"]
    if doc["parameters"]:
        out.append("parameters: " + ", ".join(f"{k}={v!r}" for k, v in doc["parameters"].items()))
    h = doc["hamiltonian"]
    out.append(f"hamiltonian ({h['source']}): {h['expression']}")
    t = doc["table"]
    out.append(f"constants: {', '.join(t['constants'])}")
    out.append(
        f"identification: {t['n_equations']} equations, {t['n_unknowns']} unknown brackets, rank {t['rank']}, "
        f"residual {'zero' if t['residual_zero'] else 'NONZERO'}"
    )
    if t["indeterminate"]:
        out.append("indeterminate: " + ", ".join(t["indeterminate"]))
    if len(t["constants"]) <= 8:
        w = max(len(x) for row in t["matrix"] for x in row + t["constants"]) + 2
        out.append("bracket table {C_k, C_l}:")
        out.append(" " * w + "".join(c.rjust(w) for c in t["constants"]))
        for c, row in zip(t["constants"], t["matrix"]):
            out.append(c.rjust(w) + "".join(x.rjust(w) for x in row))
    out.append("nonzero brackets:" if t["nonzero"] else "nonzero brackets: none")
    for e in t["nonzero"]:
        extra = f"   [{t['operator_form']}: {e['operator_form']}]" if "operator_form" in e else ""
        out.append(f"  {e['pair']} = {e['bracket']}{extra}")
    for n in t["notes"]:
        out.append(f"note: {n}")
    out.append("golden:")
    for g in doc["golden"]:
        out.append(f"  {_mark(g['pass'])}{g['bracket']} = {g['derived']}   (expected {g['expected']})")
    gt = doc["golden_table"]
    if gt["checked"]:
        out.append(f"  {_mark(gt['pass'])}full table against expected table ({gt['checked']} entries)")
    for x in gt["mismatches"]:
        out.append(f"      {x['pair']}: expected {x['expected']}, derived {x['derived']}")
    if doc["checks"]:
        out.append("checks:")
        for c in doc["checks"]:
            out.append(f"  {_mark(c['pass'])}{c['name']}: {_detail(c['detail'])}")
    o = doc["oracle"]
    if o is not None:
        if "skipped" in o:
            out.append(f"oracle: skipped ({o['skipped']})")
        else:
            out.append(
                f"oracle: {_mark(o['pass'])}max deviation {o['max_deviation']!r} at {o['worst_entry']} "
                f"(tol {o['tolerance']!r}, h {o['h']!r}, {o['base_points']} x {o['grid_points']} grid points, "
                f"residual {o['residual']!r})"
            )
            if o.get("euler_lagrange"):
                el = o["euler_lagrange"]
                out.append(f"  integrated Euler-Lagrange vs closed form to t={el['t_end']!r}: max deviation {el['max_deviation']!r}")
    if doc["limits"]:
        out.append("equal-time limits:")
        for c in doc["limits"]:
            out.append(
                f"  {_mark(c['pass'])}{c['name']}: deviations {c['deviations']!r} at N={c['N_schedule']} "
                f"(raw {c['raw_deviations']!r}, tol {c['tolerance']!r}, L={c['L']!r})"
            )
    if doc["eta"]:
        e = doc["eta"]
        out.append(f"eta regularization ({e['coupling']}): table at finite {e['coupling']}: {e['table_at_eta']}")
        for row in e["schedule"]:
            out.append(f"  {e['coupling']}={row['eta']!r}: {row['entries']}")
        out.append(f"  exact limit: {e['exact_limit']}")
    for n in doc["notes"]:
        out.append(f"note: {n}")
    for w_ in doc["warnings"]:
        out.append(f"warning: {w_}")
    for f in doc["failures"]:
        out.append(f"failed: {f}")
    out.append(f"result: {'PASS' if doc['pass'] else 'FAIL'} ({doc['elapsed_s']!r} s)")
    return "\n".join(out) + "\n"


def _detail(d) -> str:
    if isinstance(d, dict):
        return ", ".join(f"{k}={v!r}" for k, v in d.items())
    return str(d)


def _render_summary(doc: dict) -> str:
    cols = ("golden", "table", "checks", "oracle", "limits")
    w = max(len(r["model"]) for r in doc["models"]) + 2
    out = ["model".ljust(w) + "".join(c.ljust(8) for c in cols) + "result"]
    for r in doc["models"]:
        out.append(r["model"].ljust(w) + "".join(_mark(r[c]).ljust(8) for c in cols) + ("PASS" if r["pass"] else "FAIL"))
        for f in r["failures"]:
            out.append(" " * w + f"- {f}")
    out.append(f"overall: {'PASS' if doc['pass'] else 'FAIL'}")
    return "\n".join(out) + "\n"

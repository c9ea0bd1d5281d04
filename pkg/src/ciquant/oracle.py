"""Numeric, symbol-free estimate of the bracket table (even constants only).

The closed-form solution is sampled on a grid of time/coordinate points and on
+-h perturbations of every constant.  Stacking

    d f / dt = sum_{k<l} B_kl (df/dC_k dH/dC_l - df/dC_l dH/dC_k)

over grid points and entries gives an overdetermined linear system for the
B_kl, solved by least squares.  All derivatives are central differences with
the same step h.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .brackets import BracketTable, model_hamiltonian, unknown_pairs
from .expr import Expr, Symbol, differentiate, evaluate_array, evaluate_numeric
from .model import ModelSpec


class OracleError(ValueError):
    pass


@dataclass
class TrajectoryBundle:
    model: str
    constants: tuple[Symbol, ...]
    base: np.ndarray  # constant values, shape (M,)
    grid: np.ndarray  # (G, n_basis) points in (time, coordinates...)
    h: float
    entries: tuple[str, ...]
    values: np.ndarray  # (E, G)
    dt: np.ndarray  # (E, G) central difference in time
    dC: np.ndarray  # (M, E, G) central differences in the constants
    dH: np.ndarray = field(default_factory=lambda: np.zeros(0))  # (M,)


def _bindings(m: ModelSpec, consts, cvals, grid: np.ndarray) -> dict:
    """Constant values plus one array per basis variable (columns of ``grid``)."""
    env = {c: complex(v) for c, v in zip(consts, cvals)}
    for j, s in enumerate(m.basis_vars):
        env[s] = grid[:, j]
    return env


def _evaluator(m: ModelSpec, e: Expr):
    free = [s for s in e.free_symbols() if s.role == "parameter" and s.value is None]
    if free:
        raise OracleError(f"parameters without numeric values: {sorted(s.name for s in free)}")
    return lambda env: evaluate_array(e, env)


def default_constants(m: ModelSpec, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.normal(size=len(m.constants)) + 1j * rng.normal(size=len(m.constants))


def default_grid(m: ModelSpec, n: int = 64, seed: int = 1) -> np.ndarray:
    rng = np.random.default_rng(seed)
    cols = [np.linspace(0.1, 3.0, n)]
    for _ in m.coordinates:
        cols.append(rng.uniform(-1.0, 1.0, n))
    return np.stack(cols, axis=1)


def sample_solution(
    m: ModelSpec, C_values: Sequence[complex] | Mapping[str, complex] | None = None, grid=None, h: float = 1e-5
) -> TrajectoryBundle:
    """Evaluate the given closed-form solution on the grid and on +-h perturbations."""
    consts = m.constants
    if any(c.odd for c in consts):
        raise OracleError(f"{m.name}: the numeric oracle handles even constants only")
    if C_values is None:
        base = default_constants(m)
    elif isinstance(C_values, Mapping):
        base = np.array([complex(C_values[c.name]) for c in consts])
    else:
        base = np.asarray(C_values, dtype=complex)
    if base.shape != (len(consts),):
        raise OracleError("one value per integration constant is required")
    grid = default_grid(m) if grid is None else np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.shape[1] != len(m.basis_vars):
        grid = grid.reshape(-1, len(m.basis_vars))
    names = tuple(s.name for s in m.solution.entries)
    evals = [_evaluator(m, e) for e in m.solution.entries.values()]
    E, G, M = len(evals), len(grid), len(consts)
    values = np.zeros((E, G), dtype=complex)
    dt = np.zeros((E, G), dtype=complex)
    dC = np.zeros((M, E, G), dtype=complex)
    shift_t = np.zeros(grid.shape[1])
    shift_t[0] = h
    env = _bindings(m, consts, base, grid)
    env_tp = _bindings(m, consts, base, grid + shift_t)
    env_tm = _bindings(m, consts, base, grid - shift_t)
    for e, f in enumerate(evals):
        values[e] = f(env)
        dt[e] = (f(env_tp) - f(env_tm)) / (2 * h)
    for k in range(M):
        up, dn = base.copy(), base.copy()
        up[k] += h
        dn[k] -= h
        env_up = _bindings(m, consts, up, grid)
        env_dn = _bindings(m, consts, dn, grid)
        for e, f in enumerate(evals):
            dC[k, e] = (f(env_up) - f(env_dn)) / (2 * h)
    bundle = TrajectoryBundle(m.name, consts, base, grid, h, names, values, dt, dC)
    bundle.dH = hamiltonian_gradient(m, base, h)
    return bundle


def hamiltonian_gradient(m: ModelSpec, base: np.ndarray, h: float, H: Expr | None = None) -> np.ndarray:
    H = model_hamiltonian(m) if H is None else H
    f = _evaluator(m, H)
    consts = m.constants
    out = np.zeros(len(consts), dtype=complex)
    for k in range(len(consts)):
        up, dn = base.copy(), base.copy()
        up[k] += h
        dn[k] -= h
        out[k] = complex(f(dict(zip(consts, up))) - f(dict(zip(consts, dn)))) / (2 * h)
    return out


@dataclass
class NumericTable:
    constants: tuple[Symbol, ...]
    matrix: np.ndarray  # NaN where indeterminate
    residual: float
    rank: int
    n_unknowns: int
    indeterminate: list[tuple[str, str]]
    h: float
    n_grid: int


def estimate_bracket_table(bundles: TrajectoryBundle | Sequence[TrajectoryBundle], rcond: float = 1e-9) -> NumericTable:
    """Least squares over all bundles; several base points separate terms
    that a single point of constant values cannot (field models)."""
    if isinstance(bundles, TrajectoryBundle):
        bundles = [bundles]
    bundle = bundles[0]
    consts = bundle.constants
    pairs = unknown_pairs(consts)
    M = len(consts)
    blocks, ys = [], []
    for b in bundles:
        E, G = b.values.shape
        Ab = np.zeros((E * G, len(pairs)), dtype=complex)
        for u, (k, l) in enumerate(pairs):
            Ab[:, u] = (b.dC[k] * b.dH[l] - b.dC[l] * b.dH[k]).reshape(-1)
        blocks.append(Ab)
        ys.append(b.dt.reshape(-1))
    A = np.concatenate(blocks) if blocks else np.zeros((0, len(pairs)))
    y = np.concatenate(ys)
    G = len(bundle.grid)
    keep = np.abs(A).sum(axis=1) + np.abs(y) > 0
    A, y = A[keep], y[keep]
    if len(pairs) == 0:
        return NumericTable(consts, np.zeros((M, M)), 0.0, 0, 0, [], bundle.h, G)
    U, s, Vh = np.linalg.svd(A, full_matrices=True) if A.size else (None, np.zeros(0), np.eye(len(pairs)))
    tol = rcond * (s[0] if s.size else 1.0)
    rank = int((s > tol).sum())
    x, *_ = np.linalg.lstsq(A, y, rcond=rcond) if A.size else (np.zeros(len(pairs)),)
    null = Vh[rank:].conj().T if rank < len(pairs) else np.zeros((len(pairs), 0))
    undetermined = set(np.nonzero(np.abs(null).max(axis=1) > 1e-6)[0]) if null.size else set()
    resid = float(np.linalg.norm(A @ x - y)) if A.size else 0.0
    mat = np.zeros((M, M), dtype=complex)
    indet = []
    for u, (k, l) in enumerate(pairs):
        v = np.nan if u in undetermined else x[u]
        mat[k, l] = v
        mat[l, k] = -v
        if u in undetermined:
            indet.append((consts[k].name, consts[l].name))
    return NumericTable(consts, mat, resid, rank, len(pairs), indet, bundle.h, G)


def symbolic_matrix(table: BracketTable) -> np.ndarray:
    M = len(table.constants)
    out = np.zeros((M, M), dtype=complex)
    for (k, l), v in table.values.items():
        out[k, l] = np.nan if v is None else evaluate_numeric(v, {})
    return out


def compare(table: BracketTable, numeric: NumericTable, tol: float = 1e-6) -> dict:
    """Entrywise max deviation; pass iff within tol and indeterminate sets agree."""
    if [c.name for c in table.constants] != [c.name for c in numeric.constants]:
        raise OracleError("constant ordering differs between symbolic and numeric tables")
    S = symbolic_matrix(table)
    N = numeric.matrix
    mask = ~(np.isnan(S) | np.isnan(N))
    dev = np.where(mask, np.abs(S - N), 0.0)
    k, l = np.unravel_index(int(np.argmax(dev)), dev.shape) if dev.size else (0, 0)
    worst = float(dev.max()) if dev.size else 0.0
    sym_indet = {tuple(sorted(p)) for p in table.indeterminate}
    num_indet = {tuple(sorted(p)) for p in numeric.indeterminate}
    names = [c.name for c in table.constants]
    return {
        "max_deviation": worst,
        "worst_entry": f"{{{names[k]}, {names[l]}}}" if dev.size else "",
        "tolerance": tol,
        "residual": numeric.residual,
        "h": numeric.h,
        "grid_points": numeric.n_grid,
        "indeterminate_agree": sym_indet == num_indet,
        "pass": worst <= tol and sym_indet == num_indet,
    }


def oracle_check(
    m: ModelSpec, table: BracketTable, h: float = 1e-5, n_grid: int = 64, tol: float = 1e-6, seed: int = 0, n_points: int | None = None
) -> dict:
    """Sample at ``n_points`` random constant values (default M, enough to
    separate monomials in the constants) and compare with ``table``."""
    if n_points is None:
        n_points = max(1, len(m.constants))
    grid = default_grid(m, n_grid, seed + 1)
    bundles = [sample_solution(m, default_constants(m, seed + 7 * j), grid, h) for j in range(n_points)]
    out = compare(table, estimate_bracket_table(bundles), tol)
    out["base_points"] = n_points
    return out


def convergence_in_h(m: ModelSpec, table: BracketTable, h0: float = 1e-2, n_grid: int = 64) -> dict:
    """Error at h0 and h0/2; second order means a ratio near 4."""
    errs = []
    for h in (h0, h0 / 2):
        errs.append(oracle_check(m, table, h=h, n_grid=n_grid, tol=np.inf)["max_deviation"])
    ratio = errs[0] / errs[1] if errs[1] > 0 else np.inf
    return {"h": [h0, h0 / 2], "errors": errs, "ratio": ratio}


# ----------------------------------------------------------------------
# optional cross-check: integrate Euler-Lagrange numerically


def ode_cross_check(m: ModelSpec, C_values: Sequence[float], t_end: float = 3.0, n: int = 31) -> dict | None:
    """Integrate the Euler-Lagrange equations from the solution's initial data.

    Only for Lagrangian models whose velocity Hessian is invertible; returns
    None otherwise.  Constants must be chosen so that the solution is real.
    """
    from scipy.integrate import solve_ivp

    if m.lagrangian is None or m.coordinates:
        return None
    qs = [q for q in m.variables]
    vs = [m.velocity_of(q) for q in qs]
    Lag = m.lagrangian
    dL_dv = [differentiate(Lag, v) for v in vs]
    W = [[differentiate(p, v) for v in vs] for p in dL_dv]
    Wq = [[differentiate(p, q) for q in qs] for p in dL_dv]
    dL_dq = [differentiate(Lag, q) for q in qs]
    t = m.time
    consts = m.constants
    env0 = {c: complex(v) for c, v in zip(consts, C_values)}
    q_sol = [m.solution.entries[q] for q in qs]
    v_sol = [differentiate(e, t) for e in q_sol]

    def num(e, env):
        return evaluate_numeric(e, env).real

    def rhs(tt, y):
        env = {t: tt}
        env.update({q: y[i] for i, q in enumerate(qs)})
        env.update({v: y[len(qs) + i] for i, v in enumerate(vs)})
        Wn = np.array([[num(e, env) for e in row] for row in W])
        Wqn = np.array([[num(e, env) for e in row] for row in Wq])
        f = np.array([num(e, env) for e in dL_dq]) - Wqn @ y[len(qs):]
        return np.concatenate([y[len(qs):], np.linalg.solve(Wn, f)])

    env = dict(env0)
    env[t] = 0.0
    y0 = np.array([num(e, env) for e in q_sol] + [num(e, env) for e in v_sol])
    probe = {**env, **{q: y0[i] for i, q in enumerate(qs)}, **{v: y0[len(qs) + i] for i, v in enumerate(vs)}}
    if abs(np.linalg.det(np.array([[num(e, probe) for e in row] for row in W]))) < 1e-12:
        return None
    ts = np.linspace(0.0, t_end, n)
    sol = solve_ivp(rhs, (0.0, t_end), y0, t_eval=ts, rtol=1e-10, atol=1e-12)
    closed = np.array([[num(e, {**env0, t: tt}) for tt in ts] for e in q_sol])
    return {"max_deviation": float(np.abs(sol.y[: len(qs)] - closed).max()), "t_end": t_end}

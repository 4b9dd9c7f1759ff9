"""Sparse MILP container, solver front end, and MPS file bridge.

An instance is assembled once through :class:`MilpInstance`, validated, and
then either solved in process (HiGHS via scipy) or exported as fixed-format
MPS for an external solver whose solution file is imported back.

Dual values reported by :func:`solve_lp` follow the convention
``duals[i] = d(objective)/d(rhs[i])`` for the row as originally stated,
regardless of its sense.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, linprog
from scipy.optimize import milp as _scipy_milp

LE, EQ, GE = "<=", "=", ">="
_SENSES = (LE, EQ, GE)

INF = math.inf


class InstanceError(ValueError):
    """Malformed instance: bad coefficients, unknown variables, bad bounds."""


class SolveError(RuntimeError):
    """Solver invocation failed in a way that is not an LP/MIP status."""


@dataclass
class SolveOptions:
    mip_gap: float = 0.01
    time_limit_s: float | None = None
    node_limit: int | None = None
    lp_tolerance: float = 1e-7
    branching: str = "pseudo-cost"  # accepted for compatibility; HiGHS decides
    seed: int = 0

    def __post_init__(self):
        if self.mip_gap < 0:
            raise InstanceError("mip_gap must be >= 0")
        if self.time_limit_s is not None and self.time_limit_s <= 0:
            raise InstanceError("time_limit_s must be > 0")
        if self.node_limit is not None and self.node_limit <= 0:
            raise InstanceError("node_limit must be > 0")
        if self.branching not in ("most-fractional", "pseudo-cost"):
            raise InstanceError(f"unknown branching rule {self.branching!r}")


@dataclass
class RawSolution:
    status: str  # optimal | gap-limited | infeasible | unbounded | no-solution | stalled | imported
    values: np.ndarray | None
    objective: float | None
    bound: float | None
    node_count: int = 0
    duals: np.ndarray | None = None  # per original row, d(obj)/d(rhs); LP solves only
    reduced_lower: np.ndarray | None = None  # multipliers of active lower bounds (>= 0)
    reduced_upper: np.ndarray | None = None  # multipliers of active upper bounds (<= 0)
    mip_gap: float | None = None

    @property
    def has_values(self) -> bool:
        return self.values is not None


class MilpInstance:
    """Minimization MILP with named variables and sparse constraint rows."""

    def __init__(self, name: str = "milp"):
        self.name = name
        self.var_names: list[str] = []
        self._var_index: dict[str, int] = {}
        self.lower: list[float] = []
        self.upper: list[float] = []
        self.binary: list[bool] = []
        self.obj: list[float] = []
        self.obj_constant: float = 0.0
        self.row_names: list[str] = []
        self.row_terms: list[list[tuple[int, float]]] = []
        self.senses: list[str] = []
        self.rhs: list[float] = []
        self.meta: dict = {}
        self._matrix_cache: sp.csr_matrix | None = None
        self._split_cache: tuple | None = None

    # -- construction -------------------------------------------------

    def add_variable(self, name, lower=0.0, upper=INF, obj=0.0, binary=False) -> int:
        if name in self._var_index:
            raise InstanceError(f"duplicate variable name {name!r}")
        if binary:
            if lower < 0.0 or upper > 1.0:
                raise InstanceError(f"binary {name!r} has bounds outside [0,1]")
        if not (math.isfinite(lower) or lower == -INF):
            raise InstanceError(f"bad lower bound for {name!r}")
        if not (math.isfinite(upper) or upper == INF):
            raise InstanceError(f"bad upper bound for {name!r}")
        if not math.isfinite(obj):
            raise InstanceError(f"non-finite objective coefficient for {name!r}")
        j = len(self.var_names)
        self.var_names.append(name)
        self._var_index[name] = j
        self.lower.append(float(lower))
        self.upper.append(float(upper))
        self.binary.append(bool(binary))
        self.obj.append(float(obj))
        self._matrix_cache = None
        self._split_cache = None
        return j

    def add_row(self, name, terms, sense, rhs) -> int:
        if sense not in _SENSES:
            raise InstanceError(f"unknown sense {sense!r}")
        if not math.isfinite(rhs):
            raise InstanceError(f"non-finite rhs in row {name!r}")
        compact: dict[int, float] = {}
        for col, coef in terms:
            if isinstance(col, str):
                if col not in self._var_index:
                    raise InstanceError(f"row {name!r} references unknown variable {col!r}")
                col = self._var_index[col]
            elif not 0 <= col < len(self.var_names):
                raise InstanceError(f"row {name!r} references undeclared column {col}")
            if not math.isfinite(coef):
                raise InstanceError(f"non-finite coefficient in row {name!r}")
            if coef != 0.0:
                compact[col] = compact.get(col, 0.0) + float(coef)
        i = len(self.row_names)
        self.row_names.append(name)
        self.row_terms.append(sorted(compact.items()))
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        self._matrix_cache = None
        self._split_cache = None
        return i

    def column(self, name: str) -> int:
        return self._var_index[name]

    @property
    def n_variables(self) -> int:
        return len(self.var_names)

    @property
    def n_rows(self) -> int:
        return len(self.row_names)

    @property
    def binary_columns(self) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.binary))

    def matrix(self) -> sp.csr_matrix:
        if self._matrix_cache is None:
            rows, cols, vals = [], [], []
            for i, terms in enumerate(self.row_terms):
                for j, v in terms:
                    rows.append(i)
                    cols.append(j)
                    vals.append(v)
            self._matrix_cache = sp.csr_matrix(
                (vals, (rows, cols)), shape=(self.n_rows, self.n_variables)
            )
        return self._matrix_cache

    def validate(self):
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        if np.any(lo > hi):
            j = int(np.argmax(lo > hi))
            raise InstanceError(f"variable {self.var_names[j]!r} has lower > upper")
        obj = np.asarray(self.obj)
        if not np.all(np.isfinite(obj)):
            raise InstanceError("non-finite objective coefficient")
        return self

    def objective_value(self, values) -> float:
        return float(np.dot(self.obj, values)) + self.obj_constant


def _relative_gap(objective, bound) -> float | None:
    if objective is None or bound is None:
        return None
    return abs(objective - bound) / max(1.0, abs(objective))


def _split_rows(instance: MilpInstance, dense: bool):
    """Canonicalize rows for linprog: eq kept, >= flipped into <=. Cached."""
    if instance._split_cache is not None and instance._split_cache[0] == dense:
        return instance._split_cache[1]
    a = instance.matrix().tocsr()
    senses = np.asarray(instance.senses)
    rhs = np.asarray(instance.rhs)
    eq_idx = np.flatnonzero(senses == EQ)
    le_idx = np.flatnonzero(senses == LE)
    ge_idx = np.flatnonzero(senses == GE)
    a_eq = a[eq_idx] if len(eq_idx) else None
    b_eq = rhs[eq_idx] if len(eq_idx) else None
    if len(le_idx) or len(ge_idx):
        a_ub = sp.vstack([m for m in (a[le_idx] if len(le_idx) else None,
                                      -a[ge_idx] if len(ge_idx) else None)
                          if m is not None], format="csr")
        b_ub = np.concatenate([rhs[le_idx], -rhs[ge_idx]])
    else:
        a_ub = b_ub = None
    if dense:
        a_eq = a_eq.toarray() if a_eq is not None else None
        a_ub = a_ub.toarray() if a_ub is not None else None
    split = (a_eq, b_eq, a_ub, b_ub, eq_idx, le_idx, ge_idx)
    instance._split_cache = (dense, split)
    return split


def solve_lp(instance: MilpInstance, options: SolveOptions | None = None) -> RawSolution:
    """Solve the LP relaxation (integrality ignored). Reports row duals."""
    options = options or SolveOptions()
    instance.validate()
    small = instance.n_variables * max(1, instance.n_rows) <= 4000
    a_eq, b_eq, a_ub, b_ub, eq_idx, le_idx, ge_idx = _split_rows(instance, small)
    bounds = [
        (None if lo == -INF else lo, None if hi == INF else hi)
        for lo, hi in zip(instance.lower, instance.upper)
    ]
    if instance.n_variables == 0:
        return RawSolution("optimal", np.zeros(0), instance.obj_constant,
                           instance.obj_constant, node_count=1,
                           duals=np.zeros(instance.n_rows),
                           reduced_lower=np.zeros(0), reduced_upper=np.zeros(0),
                           mip_gap=0.0)
    # tiny problems go through dense arrays without presolve: per-call
    # overhead dominates there and HiGHS needs no help
    hi_opts = {
        "presolve": not small,
        "primal_feasibility_tolerance": options.lp_tolerance,
        "dual_feasibility_tolerance": options.lp_tolerance,
    }
    if options.time_limit_s is not None:
        hi_opts["time_limit"] = float(options.time_limit_s)
    c = np.asarray(instance.obj)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                      bounds=bounds, method="highs", options=hi_opts)
        if res.status == 4 and small:
            # disambiguate infeasible-or-unbounded with presolve on
            res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                          bounds=bounds, method="highs",
                          options=dict(hi_opts, presolve=True))
    if res.status == 2:
        return RawSolution("infeasible", None, None, None)
    if res.status == 3:
        return RawSolution("unbounded", None, None, -INF)
    if res.status != 0 or res.x is None:
        values = np.asarray(res.x) if res.x is not None else None
        obj = instance.objective_value(values) if values is not None else None
        return RawSolution("stalled", values, obj, None)
    values = np.asarray(res.x, dtype=float)
    objective = instance.objective_value(values)

    duals = np.zeros(instance.n_rows)
    if len(eq_idx):
        duals[eq_idx] = res.eqlin.marginals
    n_le = len(le_idx)
    if a_ub is not None:
        ub_marg = np.asarray(res.ineqlin.marginals)
        if n_le:
            duals[le_idx] = ub_marg[:n_le]
        if len(ge_idx):
            # row was negated, so d(obj)/d(original rhs) flips sign
            duals[ge_idx] = -ub_marg[n_le:]
    return RawSolution(
        "optimal", values, objective, objective, node_count=1, duals=duals,
        reduced_lower=np.asarray(res.lower.marginals),
        reduced_upper=np.asarray(res.upper.marginals),
        mip_gap=0.0,
    )


def dual_objective(instance: MilpInstance, sol: RawSolution) -> float:
    """Dual objective matching solve_lp's multiplier conventions."""
    if sol.duals is None:
        raise SolveError("solution carries no dual values")
    total = float(np.dot(sol.duals, instance.rhs)) + instance.obj_constant
    for lo, z in zip(instance.lower, sol.reduced_lower):
        if z != 0.0:
            total += z * lo
    for hi, z in zip(instance.upper, sol.reduced_upper):
        if z != 0.0:
            total += z * hi
    return total


def duality_gap(instance: MilpInstance, sol: RawSolution) -> float:
    return abs(sol.objective - dual_objective(instance, sol))


def solve_mip(instance: MilpInstance, options: SolveOptions | None = None) -> RawSolution:
    """Solve to the configured gap; deterministic for a fixed seed."""
    options = options or SolveOptions()
    instance.validate()
    binaries = np.asarray(instance.binary)
    if not binaries.any():
        sol = solve_lp(instance, options)
        sol.duals = None  # MIP contract: no duals
        return sol

    a = instance.matrix()
    senses = np.asarray(instance.senses)
    rhs = np.asarray(instance.rhs)
    row_lb = np.where(senses == LE, -INF, rhs)
    row_ub = np.where(senses == GE, INF, rhs)
    constraints = (
        LinearConstraint(a, row_lb, row_ub) if instance.n_rows else ()
    )
    lo = np.asarray(instance.lower)
    hi = np.asarray(instance.upper)
    hi_opts = {
        "presolve": True,
        "mip_rel_gap": options.mip_gap,
        # passed through to HiGHS verbatim
        "random_seed": int(options.seed) % (2**31 - 1),
        "threads": 1,
    }
    if options.time_limit_s is not None:
        hi_opts["time_limit"] = float(options.time_limit_s)
    if options.node_limit is not None:
        hi_opts["node_limit"] = int(options.node_limit)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = _scipy_milp(
            c=np.asarray(instance.obj),
            constraints=constraints,
            integrality=binaries.astype(int),
            bounds=Bounds(lo, hi),
            options=hi_opts,
        )
    bound = getattr(res, "mip_dual_bound", None)
    if bound is not None:
        bound += instance.obj_constant
    nodes = int(getattr(res, "mip_node_count", 0) or 0)
    if res.status == 2:
        return RawSolution("infeasible", None, None, None, node_count=nodes)
    if res.status == 3:
        return RawSolution("unbounded", None, None, -INF, node_count=nodes)
    if res.x is None:
        return RawSolution("no-solution", None, None, bound, node_count=nodes)
    values = np.asarray(res.x, dtype=float)
    objective = instance.objective_value(values)
    gap = _relative_gap(objective, bound)
    status = "optimal" if res.status == 0 else "gap-limited"
    if status == "optimal" and gap is not None and gap > options.mip_gap + 1e-12:
        status = "gap-limited"
    return RawSolution(status, values, objective, bound,
                       node_count=max(1, nodes), mip_gap=gap)


# -- MPS bridge --------------------------------------------------------


def _mangle(prefix: str, k: int) -> str:
    return f"{prefix}{k:07d}"


def export_mps(instance: MilpInstance, path) -> str:
    """Write fixed-format MPS plus a sidecar name map at <path>.names.json."""
    instance.validate()
    path = str(path)
    col_names = [_mangle("C", j + 1) for j in range(instance.n_variables)]
    row_names = [_mangle("R", i + 1) for i in range(instance.n_rows)]
    sense_tag = {LE: "L", EQ: "E", GE: "G"}

    # column-major terms; MPS requires each column contiguous
    by_col: list[list[tuple[int, float]]] = [[] for _ in range(instance.n_variables)]
    for i, terms in enumerate(instance.row_terms):
        for j, v in terms:
            by_col[j].append((i, v))

    lines = [f"NAME          {instance.name[:8].upper() or 'MILP'}", "ROWS", " N  COST"]
    for i, name in enumerate(row_names):
        lines.append(f" {sense_tag[instance.senses[i]]}  {name}")
    lines.append("COLUMNS")
    in_int = False
    marker = 0
    for j, cname in enumerate(col_names):
        if instance.binary[j] != in_int:
            tag = "INTORG" if instance.binary[j] else "INTEND"
            lines.append(f"    MARKER{marker:04d}  'MARKER'                 '{tag}'")
            marker += 1
            in_int = instance.binary[j]
        if instance.obj[j] != 0.0:
            lines.append(f"    {cname:<8}  {'COST':<8}  {instance.obj[j]:< 12.6E}")
        for i, v in by_col[j]:
            lines.append(f"    {cname:<8}  {row_names[i]:<8}  {v:< 12.6E}")
        if not by_col[j] and instance.obj[j] == 0.0:
            # keep the column declared even when empty
            lines.append(f"    {cname:<8}  {'COST':<8}  { 0.0:< 12.6E}")
    if in_int:
        lines.append(f"    MARKER{marker:04d}  'MARKER'                 'INTEND'")
    lines.append("RHS")
    if instance.obj_constant != 0.0:
        lines.append(f"    RHS       {'COST':<8}  {-instance.obj_constant:< 12.6E}")
    for i, name in enumerate(row_names):
        if instance.rhs[i] != 0.0:
            lines.append(f"    RHS       {name:<8}  {instance.rhs[i]:< 12.6E}")
    lines.append("BOUNDS")
    for j, cname in enumerate(col_names):
        lo, hi = instance.lower[j], instance.upper[j]
        if instance.binary[j]:
            lines.append(f" BV BND       {cname:<8}")
            continue
        if lo == 0.0 and hi == INF:
            continue
        if lo == hi:
            lines.append(f" FX BND       {cname:<8}  {lo:< 12.6E}")
            continue
        if lo == -INF and hi == INF:
            lines.append(f" FR BND       {cname:<8}")
            continue
        if lo == -INF:
            lines.append(f" MI BND       {cname:<8}")
        elif lo != 0.0:
            lines.append(f" LO BND       {cname:<8}  {lo:< 12.6E}")
        if hi != INF:
            lines.append(f" UP BND       {cname:<8}  {hi:< 12.6E}")
    lines.append("ENDATA")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    name_map = {
        "columns": dict(zip(col_names, instance.var_names)),
        "rows": dict(zip(row_names, instance.row_names)),
    }
    map_path = path + ".names.json"
    with open(map_path, "w") as fh:
        json.dump(name_map, fh, indent=1, sort_keys=True)
    return map_path


def write_solution_file(instance: MilpInstance, sol: RawSolution, path,
                        mangled: bool = False):
    """Write a `name value` solution file; '#' starts a comment line."""
    with open(str(path), "w") as fh:
        fh.write(f"# objective {float(sol.objective)!r}\n")
        for j, name in enumerate(instance.var_names):
            out = _mangle("C", j + 1) if mangled else name
            fh.write(f"{out} {float(sol.values[j])!r}\n")


def import_solution(path, instance: MilpInstance,
                    name_map_path=None) -> RawSolution:
    """Parse an external solver's `name value` file against the name map."""
    lookup = dict(instance._var_index)
    if name_map_path is not None:
        with open(str(name_map_path)) as fh:
            mapping = json.load(fh)["columns"]
        for mangled, original in mapping.items():
            if original not in instance._var_index:
                raise InstanceError(
                    f"name map entry {original!r} not in instance")
            lookup[mangled] = instance._var_index[original]
    values = np.zeros(instance.n_variables)
    seen = np.zeros(instance.n_variables, dtype=bool)
    unknown = []
    with open(str(path)) as fh:
        for lineno, raw_line in enumerate(fh, start=1):
            line = raw_line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise InstanceError(
                    f"{path}:{lineno}: expected 'name value', got {raw_line.strip()!r}")
            name, value = parts
            if name not in lookup:
                unknown.append(name)
                continue
            j = lookup[name]
            values[j] = float(value)
            seen[j] = True
    if unknown:
        raise InstanceError(
            "solution file names unknown to the instance: " + ", ".join(sorted(set(unknown))))
    objective = instance.objective_value(values)
    return RawSolution("imported", values, objective, objective,
                       node_count=1, mip_gap=0.0)

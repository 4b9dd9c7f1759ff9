"""Independent oracles used across the suite.

The brute-force MIP oracle enumerates every binary assignment and solves
the remaining LP, so it shares no search logic with the branch-and-bound
path it checks. Interval arithmetic (a relaxation: it only ever discards
provably infeasible assignments) and a reused probe instance keep the
enumeration within the acceptance-suite time budget.
"""

import numpy as np

from gridflex.milp import MilpInstance, SolveOptions, solve_lp


def _continuous_intervals(instance, binary_set):
    """Per-row (lo, hi) activity range contributed by continuous columns."""
    n_rows = instance.n_rows
    lo = np.zeros(n_rows)
    hi = np.zeros(n_rows)
    for i, terms in enumerate(instance.row_terms):
        for j, c in terms:
            if j in binary_set:
                continue
            ends = sorted((c * instance.lower[j], c * instance.upper[j]))
            lo[i] += ends[0]
            hi[i] += ends[1]
    return lo, hi


def brute_force_mip(instance: MilpInstance, lp_tolerance=1e-9, on_lp=None):
    """Optimal objective by enumerating all binary assignments.

    ``on_lp(probe, solution)`` fires for every optimally solved LP so
    callers can audit dual values.
    """
    binaries = np.flatnonzero(np.asarray(instance.binary))
    n_bin = len(binaries)
    binary_set = set(binaries.tolist())
    has_continuous = n_bin < instance.n_variables
    obj = np.asarray(instance.obj)

    # all assignments as a bit matrix, screened by interval arithmetic
    assigns = ((np.arange(2 ** n_bin)[:, None] >> np.arange(n_bin)) & 1
               ).astype(float)
    a_bin = instance.matrix().toarray()[:, binaries] if instance.n_rows else \
        np.zeros((0, n_bin))
    cont_lo, cont_hi = _continuous_intervals(instance, binary_set)
    activity = assigns @ a_bin.T  # (2^n, rows)
    senses = np.asarray(instance.senses)
    rhs = np.asarray(instance.rhs)
    tol = 1e-9
    ok = np.ones(len(assigns), dtype=bool)
    for i in range(instance.n_rows):
        row_lo = activity[:, i] + cont_lo[i]
        row_hi = activity[:, i] + cont_hi[i]
        if senses[i] == "<=":
            ok &= row_lo <= rhs[i] + tol
        elif senses[i] == ">=":
            ok &= row_hi >= rhs[i] - tol
        else:
            ok &= (row_lo <= rhs[i] + tol) & (row_hi >= rhs[i] - tol)
    survivors = assigns[ok]

    if not has_continuous:
        if not len(survivors):
            return None, None
        objectives = survivors @ obj[binaries] + instance.obj_constant
        best = int(np.argmin(objectives))
        values = np.zeros(instance.n_variables)
        values[binaries] = survivors[best]
        return float(objectives[best]), values

    probe = MilpInstance(instance.name + "-bf")
    probe.var_names = instance.var_names
    probe._var_index = instance._var_index
    probe.lower = list(instance.lower)
    probe.upper = list(instance.upper)
    probe.binary = [False] * instance.n_variables
    probe.obj = instance.obj
    probe.obj_constant = instance.obj_constant
    probe.row_names = instance.row_names
    probe.row_terms = instance.row_terms
    probe.senses = instance.senses
    probe.rhs = instance.rhs
    probe._matrix_cache = instance.matrix()
    options = SolveOptions(lp_tolerance=lp_tolerance)

    best_obj = None
    best_values = None
    for assignment in survivors:
        for j, val in zip(binaries, assignment):
            probe.lower[j] = val
            probe.upper[j] = val
        sol = solve_lp(probe, options)
        if sol.status != "optimal":
            continue
        if on_lp is not None:
            on_lp(probe, sol)
        if best_obj is None or sol.objective < best_obj:
            best_obj = sol.objective
            best_values = sol.values
    return best_obj, best_values


def random_instance(rng, max_binaries=12, max_continuous=30) -> MilpInstance:
    """Random feasible-by-construction mixed instance.

    A known point is drawn first and every row's rhs is set relative to the
    row activity at that point, so the instance always has a solution.
    """
    # sizes cover the caps while keeping full enumeration affordable:
    # occasional 11-12 binary instances, mostly mid-size ones
    n_bin = min(max_binaries, 1 + int(rng.binomial(16, 0.35)))
    n_con = int(rng.integers(0, max_continuous + 1))
    inst = MilpInstance("rand")
    point = []
    for j in range(n_bin):
        inst.add_variable(f"b{j}", 0, 1, float(rng.normal(0, 5)), binary=True)
        point.append(float(rng.integers(0, 2)))
    for j in range(n_con):
        lo = float(rng.uniform(-4, 0))
        hi = lo + float(rng.uniform(0.5, 8))
        inst.add_variable(f"x{j}", lo, hi, float(rng.normal(0, 2)))
        point.append(float(rng.uniform(lo, hi)))
    point = np.array(point)
    # row count grows with the binary count so enumeration stays screened
    n_rows = int(rng.integers(2 + n_bin // 2, 4 + n_bin))
    n_vars = inst.n_variables
    for i in range(n_rows):
        nnz = int(rng.integers(1, min(8, n_vars) + 1)) if n_vars == 1 else \
            int(rng.integers(2, min(8, n_vars) + 1))
        cols = rng.choice(n_vars, size=nnz, replace=False)
        coefs = rng.normal(0, 2, size=nnz)
        activity = float(coefs @ point[cols])
        sense = rng.choice(["<=", ">=", "="])
        slack = float(rng.uniform(0, 3))
        if sense == "<=":
            rhs = activity + slack
        elif sense == ">=":
            rhs = activity - slack
        else:
            rhs = activity
        inst.add_row(f"r{i}", list(zip(cols.tolist(), coefs.tolist())), sense, rhs)
    return inst

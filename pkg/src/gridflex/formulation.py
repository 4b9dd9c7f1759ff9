"""Two-stage stochastic unit commitment with variable-impedance lines.

``build`` translates a grid case, a scenario set, and predicted flow
directions into a sparse MILP; ``decode`` turns a raw solver result back
into domain arrays, re-solving the LP with commitment fixed to obtain
nodal prices and a numerically clean dispatch.

First-stage decisions: commitment (u), startup (v), shutdown (w) and
hourly dispatch with its cost segments. Recourse per scenario: 10-minute
up/down redispatch, renewable curtailment, line flows and bus angles.
Equipped lines trade the fixed flow equation for direction-conditioned
susceptance-bound inequalities; the susceptance itself never appears as a
variable and is recovered as flow over angle spread at decode time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .facts import (DELTA_MAX_DEFAULT, DELTA_MIN_DEFAULT,
                    DISCOUNT_RATE_DEFAULT, LIFESPAN_YEARS_DEFAULT,
                    FlowDirection, device_hourly_cost, susceptance_range)
from .grid_model import GridCase
from .milp import MilpInstance, RawSolution, SolveOptions, solve_lp

ANGLE_TOL = 1e-8  # below this spread the derived susceptance is meaningless


class FormulationError(ValueError):
    pass


class ConsistencyError(RuntimeError):
    """Decoded values disagree with the solver's objective - solver bug guard."""


@dataclass(frozen=True)
class BuildOptions:
    delta_min: float = DELTA_MIN_DEFAULT
    delta_max: float = DELTA_MAX_DEFAULT
    facts_discount_rate: float = DISCOUNT_RATE_DEFAULT
    facts_lifespan_years: int = LIFESPAN_YEARS_DEFAULT
    # None -> annuitized device cost model; a number -> that $/h for every
    # device; a mapping -> per-line $/h
    facts_hourly_cost: float | dict | None = None
    horizon: int | None = None  # truncate the day for small tests

    def hourly_cost_for(self, case: GridCase, line_id: str) -> float:
        if self.facts_hourly_cost is None:
            return device_hourly_cost(case.line(line_id), case.s_base,
                                      self.facts_discount_rate,
                                      self.facts_lifespan_years)
        if isinstance(self.facts_hourly_cost, dict):
            return float(self.facts_hourly_cost[line_id])
        return float(self.facts_hourly_cost)


@dataclass
class SucSolution:
    gen_ids: tuple
    bus_ids: tuple
    line_ids: tuple
    resource_ids: tuple
    commitment: np.ndarray  # (G,T) 0/1
    startup: np.ndarray  # (G,T) 0/1
    shutdown: np.ndarray  # (G,T) 0/1
    dispatch: np.ndarray  # (G,T) MW
    segment_power: dict  # gen id -> (T,K) MW
    ramp_up_recourse: np.ndarray  # (G,T,S) MW
    ramp_down_recourse: np.ndarray  # (G,T,S) MW
    flows: np.ndarray  # (L,T,S) MW, from->to positive
    angles: np.ndarray  # (B,T,S) rad
    susceptance: dict  # equipped line id -> (T,S) p.u.
    curtailment: np.ndarray  # (R,T,S) MW
    nodal_duals: np.ndarray  # (B,T,S) $/MWh, scenario-conditional
    objective: float
    breakdown: dict  # commitment / energy / deployment / curtailment / facts
    status: str  # optimal | gap-limited
    mip_gap: float
    node_count: int = 0

    @property
    def horizon(self) -> int:
        return self.dispatch.shape[1]

    @property
    def n_scenarios(self) -> int:
        return self.flows.shape[2] if self.flows.size else self.ramp_up_recourse.shape[2]


def _scenario_power(scenarios, case: GridCase, T: int):
    """(R,T,S) available power; build error if a unit lacks scenario data."""
    S = scenarios.n_scenarios
    out = np.zeros((len(case.renewables), T, S))
    for i, unit in enumerate(case.renewables):
        grid = scenarios.power.get(unit.id)
        if grid is None:
            raise FormulationError(
                f"scenario set has no power grid for renewable {unit.id!r}")
        out[i] = grid[:T]
    return out


def build(case: GridCase, scenarios, directions: FlowDirection,
          options: BuildOptions | None = None) -> MilpInstance:
    """Assemble the commitment/dispatch/flow MILP for one day."""
    options = options or BuildOptions()
    T = options.horizon or len(case.load_curve)
    if not 1 <= T <= len(case.load_curve):
        raise FormulationError(f"horizon {T} outside the load curve length")
    probs = np.asarray(scenarios.probabilities)[:T]
    S = probs.shape[1]
    equipped = tuple(sorted(case.facts_enabled_lines))
    missing = [l for l in equipped if l not in directions]
    if missing:
        raise FormulationError(
            f"no predicted flow direction for equipped line(s) {missing}")

    gens = case.generators
    buses = case.buses
    lines = case.lines
    res = case.renewables
    G, B, L, R = len(gens), len(buses), len(lines), len(res)
    ref_bus = min(b.id for b in buses)
    bus_pos = {b.id: i for i, b in enumerate(buses)}
    avail = _scenario_power(scenarios, case, T)

    inst = MilpInstance("suc")
    NO = -1  # column sentinel for the pinned reference angle

    u = np.empty((G, T), dtype=int)
    v = np.empty((G, T), dtype=int)
    w = np.empty((G, T), dtype=int)
    p = np.empty((G, T), dtype=int)
    seg = {}
    for gi, g in enumerate(gens):
        K = len(g.segments)
        seg[g.id] = np.empty((T, K), dtype=int)
        for t in range(T):
            u[gi, t] = inst.add_variable(f"u[{g.id},{t}]", 0, 1, g.no_load_cost, binary=True)
            v[gi, t] = inst.add_variable(f"v[{g.id},{t}]", 0, 1, g.startup_cost, binary=True)
            w[gi, t] = inst.add_variable(f"w[{g.id},{t}]", 0, 1, g.shutdown_cost, binary=True)
            p[gi, t] = inst.add_variable(f"p[{g.id},{t}]", 0.0, g.p_max)
            for k, (width, cost) in enumerate(g.segments):
                seg[g.id][t, k] = inst.add_variable(
                    f"seg[{g.id},{t},{k}]", 0.0, width, cost)
    ru = np.empty((G, T, S), dtype=int)
    rd = np.empty((G, T, S), dtype=int)
    for gi, g in enumerate(gens):
        for t in range(T):
            for s in range(S):
                pi = probs[t, s]
                ru[gi, t, s] = inst.add_variable(
                    f"ru[{g.id},{t},{s}]", 0.0, 10.0 * g.ramp_up,
                    pi * g.deploy_cost)
                rd[gi, t, s] = inst.add_variable(
                    f"rd[{g.id},{t},{s}]", 0.0, 10.0 * g.ramp_down,
                    pi * g.deploy_cost)
    pl = np.empty((L, T, S), dtype=int)
    for li, ln in enumerate(lines):
        for t in range(T):
            for s in range(S):
                pl[li, t, s] = inst.add_variable(
                    f"pl[{ln.id},{t},{s}]", -ln.rating, ln.rating)
    theta = np.full((B, T, S), NO, dtype=int)
    for bi, b in enumerate(buses):
        if b.id == ref_bus:
            continue  # pinned at zero and substituted out
        if not any(ln.from_bus == b.id or ln.to_bus == b.id for ln in lines):
            continue  # isolated bus has no angle coupling
        for t in range(T):
            for s in range(S):
                theta[bi, t, s] = inst.add_variable(
                    f"th[{b.id},{t},{s}]", -np.inf, np.inf)
    rc = np.empty((R, T, S), dtype=int)
    for ri, unit in enumerate(res):
        for t in range(T):
            for s in range(S):
                rc[ri, t, s] = inst.add_variable(
                    f"rc[{unit.id},{t},{s}]", 0.0, avail[ri, t, s],
                    probs[t, s] * unit.curtail_cost)

    # device rent is a constant: allocation is a parameter here
    facts_cost = {lid: options.hourly_cost_for(case, lid) for lid in equipped}
    inst.obj_constant = T * sum(facts_cost.values())

    # dispatch definition and segment caps tied to commitment
    for gi, g in enumerate(gens):
        for t in range(T):
            terms = [(p[gi, t], 1.0), (u[gi, t], -g.p_min)]
            terms += [(int(c), -1.0) for c in seg[g.id][t]]
            inst.add_row(f"def_p[{g.id},{t}]", terms, "=", 0.0)
            for k, (width, _) in enumerate(g.segments):
                inst.add_row(f"segcap[{g.id},{t},{k}]",
                             [(int(seg[g.id][t, k]), 1.0), (u[gi, t], -width)],
                             "<=", 0.0)

    # capacity range per scenario after recourse
    for gi, g in enumerate(gens):
        for t in range(T):
            for s in range(S):
                base = [(p[gi, t], 1.0), (ru[gi, t, s], 1.0), (rd[gi, t, s], -1.0)]
                inst.add_row(f"cap_hi[{g.id},{t},{s}]",
                             base + [(u[gi, t], -g.p_max)], "<=", 0.0)
                inst.add_row(f"cap_lo[{g.id},{t},{s}]",
                             base + [(u[gi, t], -g.p_min)], ">=", 0.0)

    # startup/shutdown logic; units start the day offline
    for gi, g in enumerate(gens):
        for t in range(T):
            terms = [(v[gi, t], 1.0), (w[gi, t], -1.0), (u[gi, t], -1.0)]
            if t >= 1:
                terms.append((u[gi, t - 1], 1.0))
            inst.add_row(f"logic[{g.id},{t}]", terms, "=", 0.0)
            inst.add_row(f"excl[{g.id},{t}]",
                         [(v[gi, t], 1.0), (w[gi, t], 1.0)], "<=", 1.0)
            up_lo = max(0, t - g.min_up - 1)
            inst.add_row(f"minup[{g.id},{t}]",
                         [(v[gi, tau], 1.0) for tau in range(up_lo, t + 1)]
                         + [(u[gi, t], -1.0)], "<=", 0.0)
            dn_lo = max(0, t - g.min_down - 1)
            inst.add_row(f"mindown[{g.id},{t}]",
                         [(w[gi, tau], 1.0) for tau in range(dn_lo, t + 1)]
                         + [(u[gi, t], 1.0)], "<=", 1.0)

    # hour-to-hour ramping with a 10-minute start/stop allowance
    for gi, g in enumerate(gens):
        for t in range(1, T):
            inst.add_row(f"rampup[{g.id},{t}]",
                         [(p[gi, t], 1.0), (p[gi, t - 1], -1.0),
                          (u[gi, t - 1], -60.0 * g.ramp_up),
                          (v[gi, t], -10.0 * g.ramp_up)], "<=", 0.0)
            inst.add_row(f"rampdn[{g.id},{t}]",
                         [(p[gi, t - 1], 1.0), (p[gi, t], -1.0),
                          (u[gi, t], -60.0 * g.ramp_down),
                          (w[gi, t], -10.0 * g.ramp_down)], "<=", 0.0)

    # line flow physics
    for li, ln in enumerate(lines):
        fb, tb = bus_pos[ln.from_bus], bus_pos[ln.to_bus]
        if ln.id in equipped:
            b_min, b_max = susceptance_range(ln, options.delta_min, options.delta_max)
            f_dir = directions[ln.id]
            b_lo = b_min if f_dir == 1 else b_max
            b_hi = b_max if f_dir == 1 else b_min
        for t in range(T):
            for s in range(S):
                th_f, th_t = theta[fb, t, s], theta[tb, t, s]
                if ln.id not in equipped:
                    terms = [(pl[li, t, s], 1.0)]
                    b0 = ln.susceptance_nominal
                    if th_f != NO:
                        terms.append((int(th_f), -b0))
                    if th_t != NO:
                        terms.append((int(th_t), b0))
                    inst.add_row(f"flow[{ln.id},{t},{s}]", terms, "=", 0.0)
                else:
                    lo_terms = [(pl[li, t, s], -1.0)]
                    hi_terms = [(pl[li, t, s], -1.0)]
                    if th_f != NO:
                        lo_terms.append((int(th_f), b_lo))
                        hi_terms.append((int(th_f), b_hi))
                    if th_t != NO:
                        lo_terms.append((int(th_t), -b_lo))
                        hi_terms.append((int(th_t), -b_hi))
                    inst.add_row(f"flow_lo[{ln.id},{t},{s}]", lo_terms, "<=", 0.0)
                    inst.add_row(f"flow_hi[{ln.id},{t},{s}]", hi_terms, ">=", 0.0)

    # nodal balance; available renewable power moves to the right-hand side
    balance_rows = np.empty((B, T, S), dtype=int)
    for bi, bus in enumerate(buses):
        gens_here = [gi for gi, g in enumerate(gens) if g.bus == bus.id]
        res_here = [ri for ri, r_ in enumerate(res) if r_.bus == bus.id]
        into = [li for li, ln in enumerate(lines) if ln.to_bus == bus.id]
        outof = [li for li, ln in enumerate(lines) if ln.from_bus == bus.id]
        for t in range(T):
            demand = bus.load_share * case.load_curve[t]
            for s in range(S):
                terms = []
                for gi in gens_here:
                    terms += [(p[gi, t], 1.0), (ru[gi, t, s], 1.0),
                              (rd[gi, t, s], -1.0)]
                for ri in res_here:
                    terms.append((rc[ri, t, s], -1.0))
                terms += [(pl[li, t, s], 1.0) for li in into]
                terms += [(pl[li, t, s], -1.0) for li in outof]
                rhs = demand - sum(avail[ri, t, s] for ri in res_here)
                balance_rows[bi, t, s] = inst.add_row(
                    f"bal[{bus.id},{t},{s}]", terms, "=", rhs)

    inst.meta["suc"] = {
        "T": T, "S": S,
        "u": u, "v": v, "w": w, "p": p, "seg": seg,
        "ru": ru, "rd": rd, "pl": pl, "theta": theta, "rc": rc,
        "balance_rows": balance_rows,
        "ref_bus": ref_bus,
        "equipped": equipped,
        "facts_cost": facts_cost,
        "avail": avail,
        "probs": probs,
    }
    return inst.validate()


def _fixed_commitment_clone(instance: MilpInstance,
                            values: np.ndarray) -> MilpInstance:
    """Copy with every binary pinned to its rounded value and relaxed."""
    clone = MilpInstance(instance.name + "-fixed")
    clone.var_names = list(instance.var_names)
    clone._var_index = dict(instance._var_index)
    clone.lower = list(instance.lower)
    clone.upper = list(instance.upper)
    clone.binary = [False] * instance.n_variables
    clone.obj = list(instance.obj)
    clone.obj_constant = instance.obj_constant
    clone.row_names = list(instance.row_names)
    clone.row_terms = list(instance.row_terms)
    clone.senses = list(instance.senses)
    clone.rhs = list(instance.rhs)
    for j in np.flatnonzero(np.asarray(instance.binary)):
        pinned = float(round(values[j]))
        clone.lower[j] = pinned
        clone.upper[j] = pinned
    return clone


def decode(instance: MilpInstance, raw: RawSolution, case: GridCase,
           scenarios) -> SucSolution:
    """Translate a raw result into domain arrays with nodal prices.

    Commitment binaries are rounded, the LP re-solved with them fixed, and
    the re-solve's primal and duals reported. The recomputed objective must
    match the LP solver's objective to 1e-6 relative or decoding aborts.
    """
    if not raw.has_values:
        raise FormulationError(
            f"cannot decode a solution with status {raw.status!r}")
    idx = instance.meta.get("suc")
    if idx is None:
        raise FormulationError("instance was not built by formulation.build")
    if len(raw.values) != instance.n_variables:
        raise FormulationError("raw solution length does not match instance")

    fixed = _fixed_commitment_clone(instance, raw.values)
    lp = solve_lp(fixed, SolveOptions(lp_tolerance=1e-9))
    if lp.status != "optimal":
        raise ConsistencyError(
            f"fixed-commitment re-solve ended {lp.status!r}; incumbent "
            "commitment does not support a feasible dispatch")
    x = lp.values

    T, S = idx["T"], idx["S"]
    probs = idx["probs"]
    gens, buses, lines, res = (case.generators, case.buses, case.lines,
                               case.renewables)
    G, B, L, R = len(gens), len(buses), len(lines), len(res)

    u = np.rint(raw.values[idx["u"]]).astype(np.int8)
    v = np.rint(raw.values[idx["v"]]).astype(np.int8)
    w = np.rint(raw.values[idx["w"]]).astype(np.int8)
    p = x[idx["p"]]
    seg_vals = {g.id: x[idx["seg"][g.id]] for g in gens}
    ru = x[idx["ru"]]
    rd = x[idx["rd"]]
    pl = x[idx["pl"]] if L else np.zeros((0, T, S))
    theta = np.zeros((B, T, S))
    th_idx = idx["theta"]
    mask = th_idx >= 0
    theta[mask] = x[th_idx[mask]]
    rc = x[idx["rc"]] if R else np.zeros((0, T, S))

    line_pos = {ln.id: i for i, ln in enumerate(lines)}
    bus_pos = {b.id: i for i, b in enumerate(buses)}
    susceptance = {}
    for lid in idx["equipped"]:
        ln = case.line(lid)
        li = line_pos[lid]
        spread = (theta[bus_pos[ln.from_bus]] - theta[bus_pos[ln.to_bus]])
        grid = np.full((T, S), ln.susceptance_nominal)
        ok = np.abs(spread) > ANGLE_TOL
        grid[ok] = pl[li][ok] / spread[ok]
        susceptance[lid] = grid

    commitment_cost = float(sum(
        g.no_load_cost * u[gi].sum() + g.startup_cost * v[gi].sum()
        + g.shutdown_cost * w[gi].sum()
        for gi, g in enumerate(gens)))
    energy_cost = float(sum(
        (seg_vals[g.id] * np.array([c for _, c in g.segments])).sum()
        for g in gens if g.segments))
    deploy_cost = float(sum(
        g.deploy_cost * (probs * (ru[gi] + rd[gi])).sum()
        for gi, g in enumerate(gens)))
    curtail_cost = float(sum(
        unit.curtail_cost * (probs * rc[ri]).sum()
        for ri, unit in enumerate(res)))
    facts_cost = float(T * sum(idx["facts_cost"].values()))
    breakdown = {
        "commitment": commitment_cost,
        "energy": energy_cost,
        "deployment": deploy_cost,
        "curtailment": curtail_cost,
        "facts": facts_cost,
    }
    objective = sum(breakdown.values())
    if abs(objective - lp.objective) > 1e-6 * max(1.0, abs(lp.objective)):
        raise ConsistencyError(
            f"decoded objective {objective!r} disagrees with solver "
            f"objective {lp.objective!r}")

    duals = np.zeros((B, T, S))
    balance_duals = lp.duals[idx["balance_rows"]]
    nonzero = probs > 0
    for bi in range(B):
        duals[bi][nonzero] = balance_duals[bi][nonzero] / probs[nonzero]

    bound = raw.bound if raw.bound is not None else objective
    gap = abs(objective - bound) / max(1.0, abs(objective))
    status = "optimal" if raw.status in ("optimal", "imported") else raw.status
    return SucSolution(
        gen_ids=tuple(g.id for g in gens),
        bus_ids=tuple(b.id for b in buses),
        line_ids=tuple(ln.id for ln in lines),
        resource_ids=tuple(r_.id for r_ in res),
        commitment=u, startup=v, shutdown=w,
        dispatch=p, segment_power=seg_vals,
        ramp_up_recourse=ru, ramp_down_recourse=rd,
        flows=pl, angles=theta, susceptance=susceptance, curtailment=rc,
        nodal_duals=duals, objective=float(objective), breakdown=breakdown,
        status=status, mip_gap=float(gap), node_count=raw.node_count,
    )

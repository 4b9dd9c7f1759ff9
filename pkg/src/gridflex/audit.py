"""Independent feasibility audit of a decoded solution.

Every constraint family is re-evaluated from the case, scenario, and
direction data alone - never from the solver's constraint matrix - so a
builder bug and a solver bug cannot cancel out. Violations beyond the
tolerance are reported as human-readable strings; an empty list means the
solution passed.
"""

from __future__ import annotations

import numpy as np

from .facts import FlowDirection, susceptance_range
from .formulation import BuildOptions, SucSolution
from .grid_model import GridCase

DEFAULT_TOL = 1e-6


def audit_solution(case: GridCase, scenarios, directions: FlowDirection,
                   sol: SucSolution, options: BuildOptions | None = None,
                   tol: float = DEFAULT_TOL, max_report: int = 25) -> list[str]:
    options = options or BuildOptions()
    T = sol.horizon
    probs = np.asarray(scenarios.probabilities)[:T]
    S = probs.shape[1]
    gens = case.generators
    buses = case.buses
    lines = case.lines
    res = case.renewables
    bus_pos = {b.id: i for i, b in enumerate(buses)}
    viol: list[str] = []

    def report(msg: str):
        if len(viol) < max_report:
            viol.append(msg)
        elif len(viol) == max_report:
            viol.append("... further violations suppressed")

    u = sol.commitment.astype(float)
    v = sol.startup.astype(float)
    w = sol.shutdown.astype(float)
    for name, arr in (("u", sol.commitment), ("v", sol.startup),
                      ("w", sol.shutdown)):
        if not np.isin(arr, (0, 1)).all():
            report(f"{name} contains non-binary entries")

    for gi, g in enumerate(gens):
        widths = np.array([wd for wd, _ in g.segments])
        segp = sol.segment_power[g.id]  # (T,K)
        for t in range(T):
            total = g.p_min * u[gi, t] + segp[t].sum()
            if abs(sol.dispatch[gi, t] - total) > tol:
                report(f"dispatch definition off for {g.id} t={t}: "
                       f"{sol.dispatch[gi, t]} vs {total}")
            if np.any(segp[t] < -tol) or np.any(segp[t] > widths * u[gi, t] + tol):
                report(f"segment power outside [0, width*u] for {g.id} t={t}")
            if t >= 1:
                up = sol.dispatch[gi, t] - sol.dispatch[gi, t - 1]
                cap = 60.0 * g.ramp_up * u[gi, t - 1] + 10.0 * g.ramp_up * v[gi, t]
                if up > cap + tol:
                    report(f"up-ramp violated for {g.id} t={t}: {up} > {cap}")
                dn = sol.dispatch[gi, t - 1] - sol.dispatch[gi, t]
                cap = 60.0 * g.ramp_down * u[gi, t] + 10.0 * g.ramp_down * w[gi, t]
                if dn > cap + tol:
                    report(f"down-ramp violated for {g.id} t={t}: {dn} > {cap}")
            prev = u[gi, t - 1] if t >= 1 else 0.0
            if abs((v[gi, t] - w[gi, t]) - (u[gi, t] - prev)) > tol:
                report(f"start/stop logic broken for {g.id} t={t}")
            if v[gi, t] + w[gi, t] > 1 + tol:
                report(f"simultaneous start and stop for {g.id} t={t}")
            if v[gi, max(0, t - g.min_up - 1):t + 1].sum() > u[gi, t] + tol:
                report(f"minimum up time violated for {g.id} t={t}")
            if w[gi, max(0, t - g.min_down - 1):t + 1].sum() > 1 - u[gi, t] + tol:
                report(f"minimum down time violated for {g.id} t={t}")
            for s in range(S):
                eff = (sol.dispatch[gi, t] + sol.ramp_up_recourse[gi, t, s]
                       - sol.ramp_down_recourse[gi, t, s])
                if eff > g.p_max * u[gi, t] + tol or eff < g.p_min * u[gi, t] - tol:
                    report(f"capacity range violated for {g.id} t={t} s={s}: {eff}")
        if np.any(sol.ramp_up_recourse[gi] < -tol) or \
           np.any(sol.ramp_up_recourse[gi] > 10.0 * g.ramp_up + tol):
            report(f"up-recourse outside [0, 10*RU] for {g.id}")
        if np.any(sol.ramp_down_recourse[gi] < -tol) or \
           np.any(sol.ramp_down_recourse[gi] > 10.0 * g.ramp_down + tol):
            report(f"down-recourse outside [0, 10*RD] for {g.id}")

    equipped = set(case.facts_enabled_lines)
    for li, ln in enumerate(lines):
        spread = (sol.angles[bus_pos[ln.from_bus], :T] -
                  sol.angles[bus_pos[ln.to_bus], :T])
        flow = sol.flows[li, :T]
        if np.any(np.abs(flow) > ln.rating + tol):
            report(f"thermal limit violated on {ln.id}")
        if ln.id in equipped:
            b_min, b_max = susceptance_range(ln, options.delta_min,
                                             options.delta_max)
            f_dir = directions[ln.id]
            b_lo = b_min if f_dir == 1 else b_max
            b_hi = b_max if f_dir == 1 else b_min
            if np.any(b_lo * spread - flow > tol):
                report(f"susceptance lower envelope violated on {ln.id}")
            if np.any(flow - b_hi * spread > tol):
                report(f"susceptance upper envelope violated on {ln.id}")
        else:
            gap = np.abs(flow - ln.susceptance_nominal * spread)
            if np.any(gap > tol):
                report(f"flow equation violated on {ln.id}: max gap {gap.max()}")

    avail = np.zeros((len(res), T, S))
    for ri, unit in enumerate(res):
        avail[ri] = np.asarray(scenarios.power[unit.id])[:T]
        if np.any(sol.curtailment[ri] < -tol) or \
           np.any(sol.curtailment[ri] > avail[ri] + tol):
            report(f"curtailment outside [0, available] for {unit.id}")

    for bi, bus in enumerate(buses):
        gens_here = [gi for gi, g in enumerate(gens) if g.bus == bus.id]
        res_here = [ri for ri, r_ in enumerate(res) if r_.bus == bus.id]
        into = [li for li, ln in enumerate(lines) if ln.to_bus == bus.id]
        outof = [li for li, ln in enumerate(lines) if ln.from_bus == bus.id]
        for t in range(T):
            demand = bus.load_share * case.load_curve[t]
            for s in range(S):
                inj = sum(sol.dispatch[gi, t] + sol.ramp_up_recourse[gi, t, s]
                          - sol.ramp_down_recourse[gi, t, s] for gi in gens_here)
                inj += sum(avail[ri, t, s] - sol.curtailment[ri, t, s]
                           for ri in res_here)
                inj += sum(sol.flows[li, t, s] for li in into)
                inj -= sum(sol.flows[li, t, s] for li in outof)
                if abs(inj - demand) > tol:
                    report(f"nodal balance off at bus {bus.id} t={t} s={s}: "
                           f"{inj - demand}")

    ref = min(b.id for b in buses)
    if np.any(np.abs(sol.angles[bus_pos[ref]]) > tol):
        report(f"reference bus {ref} angle not pinned at zero")
    return viol

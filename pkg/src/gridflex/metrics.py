"""Post-solution accounting: emissions, curtailment, congestion rent.

All quantities are probability-weighted expectations over the scenario
grid. Congestion rent is computed two ways - nodally (load payment minus
generation revenue) and line-wise (price spread times flow) - which must
agree in a lossless DC network; the report carries both.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .formulation import SucSolution
from .grid_model import GridCase

MLB = 1e6  # pounds per Mlb


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class EmissionLedger:
    per_generator: dict  # id -> (expected energy MWh, emissions lb)
    total_lb: float

    @property
    def total_mlb(self) -> float:
        return self.total_lb / MLB


@dataclass(frozen=True)
class CongestionReport:
    load_payment: float
    generation_revenue: float
    congestion_rent: float
    per_line_rent: dict  # line id -> $

    @property
    def line_rent_total(self) -> float:
        return float(sum(self.per_line_rent.values()))


def _effective_output(sol: SucSolution, gi: int) -> np.ndarray:
    """(T,S) dispatched power of one unit after recourse."""
    return (sol.dispatch[gi][:, None] + sol.ramp_up_recourse[gi]
            - sol.ramp_down_recourse[gi])


def emissions(sol: SucSolution, case: GridCase, scenarios) -> EmissionLedger:
    """Expected CO2 by generator, Table-rate times probability-weighted MWh."""
    probs = np.asarray(scenarios.probabilities)[:sol.horizon]
    per = {}
    total = 0.0
    for gi, g in enumerate(case.generators):
        eff = _effective_output(sol, gi)
        if np.any(eff < -1e-6):
            raise MetricsError(
                f"generator {g.id} shows negative effective output "
                f"{eff.min()} MW; refusing to book emissions")
        energy = float((probs * eff).sum())
        lb = g.emission_rate * energy
        per[g.id] = (energy, lb)
        total += lb
    return EmissionLedger(per_generator=per, total_lb=total)


def curtailment_total(sol: SucSolution, scenarios) -> float:
    """Expected curtailed renewable energy in MWh."""
    if sol.curtailment.size == 0:
        return 0.0
    probs = np.asarray(scenarios.probabilities)[:sol.horizon]
    return float((probs[None, :, :] * sol.curtailment).sum())


def congestion_rent(sol: SucSolution, case: GridCase, scenarios) -> CongestionReport:
    """Load payment minus generation revenue at nodal prices, with the
    per-line decomposition (price spread times flow)."""
    if sol.nodal_duals is None or sol.nodal_duals.size == 0:
        raise MetricsError(
            "solution has no nodal duals; decode() performs the "
            "fixed-commitment LP re-solve that provides them")
    T = sol.horizon
    probs = np.asarray(scenarios.probabilities)[:T]
    lam = sol.nodal_duals  # (B,T,S) conditional $/MWh
    bus_pos = {b.id: i for i, b in enumerate(case.buses)}

    demand = np.array([[b.load_share * case.load_curve[t] for t in range(T)]
                       for b in case.buses])  # (B,T)
    load_payment = float((probs[None] * lam * demand[:, :, None]).sum())

    netgen = np.zeros_like(lam)  # (B,T,S)
    for gi, g in enumerate(case.generators):
        netgen[bus_pos[g.bus]] += _effective_output(sol, gi)
    for ri, unit in enumerate(case.renewables):
        avail = np.asarray(scenarios.power[unit.id])[:T]
        netgen[bus_pos[unit.bus]] += avail - sol.curtailment[ri]
    generation_revenue = float((probs[None] * lam * netgen).sum())

    per_line = {}
    for li, ln in enumerate(case.lines):
        spread = lam[bus_pos[ln.to_bus]] - lam[bus_pos[ln.from_bus]]
        per_line[ln.id] = float((probs * spread * sol.flows[li]).sum())

    return CongestionReport(
        load_payment=load_payment,
        generation_revenue=generation_revenue,
        congestion_rent=load_payment - generation_revenue,
        per_line_rent=per_line,
    )

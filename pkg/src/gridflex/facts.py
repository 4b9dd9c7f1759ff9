"""Thyristor-controlled series compensation: susceptance range, predicted
flow directions, compensation rating, and annuitized device cost.

The adjustment range is a fractional change of line reactance,
X_eff = X * (1 + delta), so susceptance bounds are B/(1+delta_max) and
B/(1+delta_min). With the default (-0.80, +0.40) range a line of nominal
susceptance B can move within [B/1.4, 5B].
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .grid_model import GridCase, Line

DELTA_MIN_DEFAULT = -0.80
DELTA_MAX_DEFAULT = 0.40
DISCOUNT_RATE_DEFAULT = 0.05
LIFESPAN_YEARS_DEFAULT = 15
HOURS_PER_YEAR = 8760.0


class FactsError(ValueError):
    pass


class InfeasibleCaseError(RuntimeError):
    """The direction-prediction presolve found the case infeasible."""


def susceptance_range(line: Line, delta_min: float = DELTA_MIN_DEFAULT,
                      delta_max: float = DELTA_MAX_DEFAULT) -> tuple[float, float]:
    """Susceptance bounds for a line whose reactance can swing by the
    fractional interval [delta_min, delta_max]."""
    if delta_min <= -1.0:
        raise FactsError(
            f"delta_min {delta_min} would drive reactance through zero")
    if not (delta_min <= 0.0 <= delta_max):
        raise FactsError("adjustment range must include zero")
    b = line.susceptance_nominal
    return b / (1.0 + delta_max), b / (1.0 + delta_min)


@dataclass(frozen=True)
class FactsSpec:
    line_id: str
    b_min: float
    b_max: float
    delta_min: float = DELTA_MIN_DEFAULT
    delta_max: float = DELTA_MAX_DEFAULT
    discount_rate: float = DISCOUNT_RATE_DEFAULT
    lifespan_years: int = LIFESPAN_YEARS_DEFAULT

    def __post_init__(self):
        if not (-1.0 < self.delta_min <= 0.0 <= self.delta_max):
            raise FactsError(
                f"device on {self.line_id}: need -1 < delta_min <= 0 <= delta_max")
        if self.b_min <= 0 or self.b_min > self.b_max:
            raise FactsError(f"device on {self.line_id}: bad susceptance bounds")

    @staticmethod
    def for_line(line: Line, delta_min: float = DELTA_MIN_DEFAULT,
                 delta_max: float = DELTA_MAX_DEFAULT,
                 discount_rate: float = DISCOUNT_RATE_DEFAULT,
                 lifespan_years: int = LIFESPAN_YEARS_DEFAULT) -> "FactsSpec":
        b_min, b_max = susceptance_range(line, delta_min, delta_max)
        return FactsSpec(line.id, b_min, b_max, delta_min, delta_max,
                         discount_rate, lifespan_years)


@dataclass(frozen=True)
class FlowDirection:
    """Per equipped line: 1 if the probability-weighted presolve flow is
    nonnegative in the from->to orientation, else 0."""
    directions: dict[str, int]

    def __getitem__(self, line_id: str) -> int:
        return self.directions[line_id]

    def __contains__(self, line_id: str) -> bool:
        return line_id in self.directions

    def covers(self, line_ids) -> bool:
        return all(l in self.directions for l in line_ids)


def compensation_rating(line_rating_mw: float, s_base: float) -> float:
    """Maximum series compensation rating in MVar for a line."""
    if line_rating_mw <= 0 or s_base <= 0:
        raise FactsError("line rating and system base must be > 0")
    return line_rating_mw ** 2 / s_base


def tcsc_unit_cost(s_mvar: float) -> float:
    """TCSC cost in $/kVar as a quadratic in the compensation rating."""
    if s_mvar <= 0:
        raise FactsError("compensation rating must be > 0")
    cost = 0.0015 * s_mvar ** 2 - 0.713 * s_mvar + 153.75
    if cost < 0:
        raise FactsError(
            f"rating {s_mvar} MVar is outside the cost model's range")
    return cost


def hourly_cost(total_investment: float, r: float, n: int) -> float:
    """Annuitize a capital cost at discount rate r over n years, per hour."""
    if total_investment < 0:
        raise FactsError("investment must be >= 0")
    if n < 1:
        raise FactsError("lifespan must be at least one year")
    if r < 0:
        raise FactsError("discount rate must be >= 0")
    if total_investment == 0:
        return 0.0
    if r == 0:
        return total_investment / (n * HOURS_PER_YEAR)
    growth = (1.0 + r) ** n
    annuity = r * growth / (growth - 1.0)
    return annuity * total_investment / HOURS_PER_YEAR


def device_hourly_cost(line: Line, s_base: float,
                       r: float = DISCOUNT_RATE_DEFAULT,
                       n: int = LIFESPAN_YEARS_DEFAULT) -> float:
    """Hourly annuity of one TCSC sized to the line's compensation rating."""
    s_mvar = compensation_rating(line.rating, s_base)
    per_kvar = tcsc_unit_cost(s_mvar)
    investment = per_kvar * s_mvar * 1000.0  # rating in kVar
    return hourly_cost(investment, r, n)


def predict_flow_directions(case: GridCase, scenarios, options=None,
                            lines=None) -> FlowDirection:
    """Solve the commitment model with every device held at nominal
    susceptance and read off each line's expected flow sign.

    Ties (weighted flow exactly zero) resolve to direction 1.
    """
    from . import formulation  # deferred: formulation depends on this module's types
    from .milp import SolveOptions, solve_mip

    line_ids = tuple(lines) if lines is not None else tuple(sorted(case.facts_enabled_lines))
    for lid in line_ids:
        case.line(lid)  # raises KeyError for unknown ids
    base = replace(case, facts_enabled_lines=frozenset())
    instance = formulation.build(base, scenarios, FlowDirection({}),
                                 formulation.BuildOptions())
    raw = solve_mip(instance, options or SolveOptions())
    if not raw.has_values:
        raise InfeasibleCaseError(
            f"direction presolve ended with status {raw.status!r}; "
            "the case is not solvable with FACTS disabled")
    sol = formulation.decode(instance, raw, base, scenarios)
    index = {ln.id: i for i, ln in enumerate(case.lines)}
    probs = scenarios.probabilities  # (T, S)
    directions = {}
    for lid in line_ids:
        weighted = float((probs * sol.flows[index[lid]]).sum())
        directions[lid] = 1 if weighted >= 0.0 else 0
    return FlowDirection(directions)

"""Wind/solar production models and discrete per-hour scenario generation.

Continuous weather uncertainty is collapsed into a rectangular (hour,
scenario) grid: per hour, each resource's historical powers are split into
equal-probability quantile bins and the bin means become the scenario
values. Scenario s of every resource pairs the s-th bin across resources
(comonotone pairing), so one joint probability 1/S applies per hour.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .grid_model import PVArraySpec, RenewableUnit

HOURS = 24


class ScenarioError(ValueError):
    """Bad trace data or an unsatisfiable scenario transformation."""


class InfeasibleTargetError(ScenarioError):
    """Requested daily energy exceeds what rated capacity can deliver."""


# -- production models ---------------------------------------------------


def wind_power(v: float, params, p_rated: float) -> float:
    """Turbine output at wind speed v: cubic below rated, flat to cut-out."""
    v_ci, v_rated, v_co = params
    if v < v_ci or v > v_co:
        return 0.0
    if v >= v_rated:
        return p_rated
    return p_rated * (v / v_rated) ** 3


def solar_power(g_irr: float, spec: PVArraySpec, p_rated: float) -> float:
    """Linear irradiance-to-power map, saturating at rated power."""
    if g_irr <= 0:
        return 0.0
    return min(p_rated, p_rated * g_irr / spec.g_stc)


def resource_power(unit: RenewableUnit, weather_value: float) -> float:
    if unit.kind == "wind":
        return wind_power(weather_value, unit.wind_params, unit.rated_power)
    return solar_power(weather_value, unit.pv_params, unit.rated_power)


# -- traces ---------------------------------------------------------------


@dataclass(frozen=True)
class WeatherTrace:
    resource_id: str
    kind: str  # wind | solar
    values: np.ndarray  # (24, M) wind speed m/s or irradiance W/m^2

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 2 or vals.shape[0] != HOURS:
            raise ScenarioError(
                f"trace {self.resource_id}: expected a 24 x days matrix, "
                f"got shape {vals.shape}")
        if vals.shape[1] == 0:
            raise ScenarioError(f"trace {self.resource_id}: empty trace")
        if np.any(vals < 0):
            raise ScenarioError(f"trace {self.resource_id}: negative values")
        if self.kind == "wind" and np.any(vals >= 100.0):
            raise ScenarioError(
                f"trace {self.resource_id}: wind speed >= 100 m/s fails sanity bound")

    @property
    def days(self) -> int:
        return self.values.shape[1]

    def for_resource(self, resource_id: str) -> "WeatherTrace":
        return WeatherTrace(resource_id, self.kind, self.values)


_UNIT_HEADERS = {
    "wind_speed_m_s": "wind",
    "irradiance_w_m2": "solar",
}


def write_trace_csv(trace: WeatherTrace, path) -> None:
    header = "wind_speed_m_s" if trace.kind == "wind" else "irradiance_w_m2"
    with open(str(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["day", "hour", header])
        for d in range(trace.days):
            for h in range(HOURS):
                w.writerow([d, h, repr(float(trace.values[h, d]))])


def read_trace_csv(path, resource_id: str | None = None) -> WeatherTrace:
    with open(str(path), newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ScenarioError(f"{path}: empty trace file")
    header = [c.strip() for c in rows[0]]
    if len(header) != 3 or header[:2] != ["day", "hour"]:
        raise ScenarioError(
            f"{path}: expected header 'day,hour,<value column>', got {header}")
    kind = _UNIT_HEADERS.get(header[2])
    if kind is None:
        raise ScenarioError(
            f"{path}: value column must declare units, one of "
            f"{sorted(_UNIT_HEADERS)}; got {header[2]!r}")
    cells: dict[tuple[int, int], float] = {}
    days = -1
    for i, row in enumerate(rows[1:], start=2):
        if not row or row[0].startswith("#"):
            continue
        try:
            d, h, v = int(row[0]), int(row[1]), float(row[2])
        except (ValueError, IndexError) as exc:
            raise ScenarioError(f"{path}:{i}: bad row {row}: {exc}") from exc
        cells[(h, d)] = v
        days = max(days, d)
    days += 1
    values = np.zeros((HOURS, days))
    for h in range(HOURS):
        for d in range(days):
            if (h, d) not in cells:
                raise ScenarioError(f"{path}: missing value for day {d} hour {h}")
            values[h, d] = cells[(h, d)]
    rid = resource_id or str(path)
    return WeatherTrace(rid, kind, values)


# -- scenario sets ---------------------------------------------------------


@dataclass(frozen=True)
class ScenarioSet:
    probabilities: np.ndarray  # (24, S), rows sum to 1
    power: dict[str, np.ndarray] = field(default_factory=dict)  # id -> (24, S) MW
    rated: dict[str, float] = field(default_factory=dict)  # id -> MW

    def __post_init__(self):
        probs = np.asarray(self.probabilities, dtype=float)
        object.__setattr__(self, "probabilities", probs)
        if probs.ndim != 2 or probs.shape[0] != HOURS:
            raise ScenarioError(f"probabilities must be 24 x S, got {probs.shape}")
        if np.any(probs < 0):
            raise ScenarioError("scenario probabilities must be >= 0")
        sums = probs.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            raise ScenarioError(
                f"scenario probabilities must sum to 1 per hour; worst sum {sums}")
        for rid, arr in self.power.items():
            arr = np.asarray(arr, dtype=float)
            self.power[rid] = arr
            if arr.shape != probs.shape:
                raise ScenarioError(
                    f"resource {rid}: power grid shape {arr.shape} does not match "
                    f"probability grid {probs.shape}")
            if np.any(arr < -1e-9):
                raise ScenarioError(f"resource {rid}: negative scenario power")
            cap = self.rated.get(rid)
            if cap is not None and np.any(arr > cap + 1e-6):
                raise ScenarioError(
                    f"resource {rid}: scenario power exceeds rated {cap} MW")

    @property
    def n_scenarios(self) -> int:
        return self.probabilities.shape[1]

    @property
    def resource_ids(self) -> tuple[str, ...]:
        return tuple(self.power)

    @staticmethod
    def empty(n_scenarios: int) -> "ScenarioSet":
        if n_scenarios < 1:
            raise ScenarioError("n_scenarios must be >= 1")
        probs = np.full((HOURS, n_scenarios), 1.0 / n_scenarios)
        return ScenarioSet(probabilities=probs)

    def expected_energy(self, resource_ids=None) -> float:
        """Probability-weighted MWh over the day for the selected resources."""
        ids = self.resource_ids if resource_ids is None else tuple(resource_ids)
        total = 0.0
        for rid in ids:
            total += float(np.sum(self.probabilities * self.power[rid]))
        return total


def _bin_means(sorted_vals: np.ndarray, n_bins: int) -> np.ndarray:
    m = len(sorted_vals)
    bins = (np.arange(m) * n_bins) // m  # day rank -> bin, all bins hit for m >= n
    out = np.empty(n_bins)
    for s in range(n_bins):
        members = sorted_vals[bins == s]
        out[s] = members.mean()
    return out


def discretize(traces, resources, n_scenarios: int) -> ScenarioSet:
    """Quantile-bin each resource's hourly power distribution into
    equal-probability scenarios; same-index bins form a joint scenario."""
    if n_scenarios < 1:
        raise ScenarioError("n_scenarios must be >= 1")
    by_id = {t.resource_id: t for t in traces}
    resources = tuple(resources)
    power: dict[str, np.ndarray] = {}
    rated: dict[str, float] = {}
    for unit in resources:
        trace = by_id.get(unit.id)
        if trace is None:
            raise ScenarioError(f"no weather trace for resource {unit.id!r}")
        if trace.days < n_scenarios:
            raise ScenarioError(
                f"resource {unit.id}: {trace.days} days cannot fill "
                f"{n_scenarios} scenarios")
        grid = np.empty((HOURS, n_scenarios))
        for h in range(HOURS):
            powers = np.array([resource_power(unit, v) for v in trace.values[h]])
            grid[h] = _bin_means(np.sort(powers), n_scenarios)
        power[unit.id] = grid
        rated[unit.id] = unit.rated_power
    probs = np.full((HOURS, n_scenarios), 1.0 / n_scenarios)
    return ScenarioSet(probabilities=probs, power=power, rated=rated)


def scale_to_daily_energy(sset: ScenarioSet, resource_ids, target_mwh: float,
                          tolerance: float = 1e-3, max_iter: int = 200) -> ScenarioSet:
    """Uniformly rescale selected resources (clipped at rated power) so their
    expected daily energy hits the target within the relative tolerance."""
    ids = tuple(resource_ids)
    if target_mwh <= 0:
        raise ScenarioError("target_mwh must be > 0")
    missing = [r for r in ids if r not in sset.power]
    if missing:
        raise ScenarioError(f"unknown resource ids: {missing}")
    for rid in ids:
        if rid not in sset.rated:
            raise ScenarioError(f"resource {rid}: rated power unknown, cannot clip")
    cap_energy = sum(sset.rated[r] for r in ids) * HOURS
    if target_mwh > cap_energy + 1e-9:
        raise InfeasibleTargetError(
            f"target {target_mwh} MWh exceeds {cap_energy} MWh attainable "
            f"from rated capacity over 24 h")
    current = sset.expected_energy(ids)
    if current <= 0:
        raise ScenarioError("current expected energy is zero; nothing to scale")

    def energy_at(alpha: float) -> float:
        total = 0.0
        for rid in ids:
            clipped = np.minimum(sset.power[rid] * alpha, sset.rated[rid])
            total += float(np.sum(sset.probabilities * clipped))
        return total

    lo, hi = 0.0, max(1.0, target_mwh / current)
    for _ in range(max_iter):
        if energy_at(hi) >= target_mwh:
            break
        hi *= 2.0
        if hi > 1e12:
            raise InfeasibleTargetError(
                f"cannot reach {target_mwh} MWh by scaling: clipping saturates "
                f"below the target")
    alpha = hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if energy_at(mid) < target_mwh:
            lo = mid
        else:
            hi = mid
        alpha = hi
        got = energy_at(alpha)
        if abs(got - target_mwh) <= tolerance * target_mwh:
            break
    got = energy_at(alpha)
    if abs(got - target_mwh) > tolerance * target_mwh:
        raise InfeasibleTargetError(
            f"scaling stalled at {got} MWh versus target {target_mwh} MWh")
    power = dict(sset.power)
    for rid in ids:
        power[rid] = np.minimum(sset.power[rid] * alpha, sset.rated[rid])
    return ScenarioSet(probabilities=sset.probabilities.copy(), power=power,
                       rated=dict(sset.rated))

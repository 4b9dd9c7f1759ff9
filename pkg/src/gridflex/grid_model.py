"""Transmission-system domain types and the modified RTS-96 case builder.

A :class:`GridCase` is immutable once constructed and is the single input a
study needs besides renewable scenarios. The bundled dataset is the IEEE
RTS-96 single-area system (24 buses, 38 branches, 32 units); the builder
applies the load shift, the +5% uplift, and the congestion-inducing rating
cuts that define the modified case.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources

FUELS = ("coal", "oil", "gas", "nuclear", "hydro")

SEGMENT_COUNT = 3
SEGMENT_SPREAD = (0.9, 1.0, 1.1)  # marginal-cost multipliers, nondecreasing
DEPLOY_COST_FACTOR = 1.5  # deploy cost relative to the top segment marginal


class CaseValidationError(ValueError):
    """A case or case file violates the schema or an invariant."""


class CaseDataError(IOError):
    """Bundled or user data file is missing or unreadable."""


@dataclass(frozen=True)
class Bus:
    id: int
    load_share: float

    def __post_init__(self):
        if self.load_share < 0:
            raise CaseValidationError(f"bus {self.id}: load_share must be >= 0")


@dataclass(frozen=True)
class Line:
    id: str
    from_bus: int
    to_bus: int
    susceptance_nominal: float  # per unit on the system base
    rating: float  # MW
    facts_candidate: bool = False

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise CaseValidationError(f"line {self.id}: from_bus equals to_bus")
        if self.rating <= 0:
            raise CaseValidationError(f"line {self.id}: rating must be > 0")
        if self.susceptance_nominal <= 0:
            raise CaseValidationError(f"line {self.id}: susceptance must be > 0")


@dataclass(frozen=True)
class Generator:
    id: str
    bus: int
    fuel: str
    p_min: float
    p_max: float
    min_up: int
    min_down: int
    ramp_up: float  # MW per minute
    ramp_down: float  # MW per minute
    no_load_cost: float  # $/h while committed
    startup_cost: float
    shutdown_cost: float
    segments: tuple[tuple[float, float], ...]  # (width MW, marginal $/MWh)
    deploy_cost: float  # $/MWh on recourse energy
    emission_rate: float  # lb CO2 per MWh

    def __post_init__(self):
        if self.fuel not in FUELS:
            raise CaseValidationError(
                f"generator {self.id}: unknown fuel token {self.fuel!r}")
        if not 0 <= self.p_min <= self.p_max:
            raise CaseValidationError(
                f"generator {self.id}: requires 0 <= p_min <= p_max")
        width_sum = sum(w for w, _ in self.segments)
        if abs(width_sum - (self.p_max - self.p_min)) > 1e-6:
            raise CaseValidationError(
                f"generator {self.id}: segment widths sum to {width_sum}, "
                f"expected {self.p_max - self.p_min}")
        marginals = [c for _, c in self.segments]
        if any(b < a - 1e-12 for a, b in zip(marginals, marginals[1:])):
            raise CaseValidationError(
                f"generator {self.id}: segment marginal costs must be nondecreasing")
        if self.ramp_up <= 0 or self.ramp_down <= 0:
            raise CaseValidationError(f"generator {self.id}: ramp rates must be > 0")
        if self.emission_rate < 0:
            raise CaseValidationError(f"generator {self.id}: emission_rate must be >= 0")

    @property
    def top_marginal_cost(self) -> float:
        return max((c for _, c in self.segments), default=0.0)


@dataclass(frozen=True)
class PVArraySpec:
    i_sc: float = 0.0  # informational
    v_oc: float = 0.0  # informational
    g_stc: float = 1000.0  # reference irradiance W/m^2

    def __post_init__(self):
        if self.g_stc <= 0:
            raise CaseValidationError("pv_params: g_stc must be > 0")


@dataclass(frozen=True)
class RenewableUnit:
    id: str
    bus: int
    kind: str  # wind | solar
    rated_power: float  # MW
    curtail_cost: float = 0.0  # $/MWh
    wind_params: tuple[float, float, float] | None = None  # (v_ci, v_rated, v_co)
    pv_params: PVArraySpec | None = None

    def __post_init__(self):
        if self.kind not in ("wind", "solar"):
            raise CaseValidationError(
                f"renewable {self.id}: kind must be wind or solar, got {self.kind!r}")
        if self.rated_power <= 0:
            raise CaseValidationError(f"renewable {self.id}: rated_power must be > 0")
        if self.kind == "wind":
            if self.wind_params is None:
                raise CaseValidationError(f"renewable {self.id}: wind_params required")
            v_ci, v_rated, v_co = self.wind_params
            if not 0 < v_ci < v_rated < v_co:
                raise CaseValidationError(
                    f"renewable {self.id}: need 0 < v_ci < v_rated < v_co")
        if self.kind == "solar" and self.pv_params is None:
            object.__setattr__(self, "pv_params", PVArraySpec())


@dataclass(frozen=True)
class GridCase:
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    generators: tuple[Generator, ...]
    renewables: tuple[RenewableUnit, ...]
    s_base: float
    load_curve: tuple[float, ...]  # 24 hourly system loads, MW
    n_facts_max: int = 3
    facts_enabled_lines: frozenset[str] = frozenset()
    renewable_candidate_pairs: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        bus_ids = {b.id for b in self.buses}
        if len(bus_ids) != len(self.buses):
            raise CaseValidationError("duplicate bus ids")
        share = sum(b.load_share for b in self.buses)
        if abs(share - 1.0) > 1e-9:
            raise CaseValidationError(
                f"bus load shares sum to {share!r}, expected 1.0")
        line_ids = set()
        for ln in self.lines:
            if ln.id in line_ids:
                raise CaseValidationError(f"duplicate line id {ln.id!r}")
            line_ids.add(ln.id)
            for end in (ln.from_bus, ln.to_bus):
                if end not in bus_ids:
                    raise CaseValidationError(f"line {ln.id}: unknown bus {end}")
        seen = set()
        for g in self.generators:
            if g.id in seen:
                raise CaseValidationError(f"duplicate generator id {g.id!r}")
            seen.add(g.id)
            if g.bus not in bus_ids:
                raise CaseValidationError(f"generator {g.id}: unknown bus {g.bus}")
        seen = set()
        for r in self.renewables:
            if r.id in seen:
                raise CaseValidationError(f"duplicate renewable id {r.id!r}")
            seen.add(r.id)
            if r.bus not in bus_ids:
                raise CaseValidationError(f"renewable {r.id}: unknown bus {r.bus}")
        if len(self.load_curve) != 24:
            raise CaseValidationError("load_curve must have 24 hourly values")
        if any(v < 0 for v in self.load_curve):
            raise CaseValidationError("load_curve values must be >= 0")
        if self.s_base <= 0:
            raise CaseValidationError("s_base must be > 0")
        candidates = {ln.id for ln in self.lines if ln.facts_candidate}
        extra = set(self.facts_enabled_lines) - candidates
        if extra:
            raise CaseValidationError(
                f"facts_enabled_lines includes non-candidate lines: {sorted(extra)}")
        if len(self.facts_enabled_lines) > self.n_facts_max:
            raise CaseValidationError(
                f"{len(self.facts_enabled_lines)} FACTS enabled exceeds "
                f"n_facts_max={self.n_facts_max}")
        for pair in self.renewable_candidate_pairs:
            for b in pair:
                if b not in bus_ids:
                    raise CaseValidationError(
                        f"renewable candidate pair references unknown bus {b}")

    # -- lookups -------------------------------------------------------

    def bus(self, bus_id: int) -> Bus:
        for b in self.buses:
            if b.id == bus_id:
                return b
        raise KeyError(bus_id)

    def line(self, line_id: str) -> Line:
        for ln in self.lines:
            if ln.id == line_id:
                return ln
        raise KeyError(line_id)

    def demand(self, bus_id: int, t: int) -> float:
        return self.bus(bus_id).load_share * self.load_curve[t]

    @property
    def total_dispatchable_capacity(self) -> float:
        return sum(g.p_max for g in self.generators)

    def capacity_by_fuel(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for g in self.generators:
            out[g.fuel] = out.get(g.fuel, 0.0) + g.p_max
        return out


# -- derived-case helpers ----------------------------------------------


def with_facts_enabled(case: GridCase, line_ids) -> GridCase:
    return replace(case, facts_enabled_lines=frozenset(line_ids))


def with_load_curve(case: GridCase, curve) -> GridCase:
    return replace(case, load_curve=tuple(float(v) for v in curve))


def add_renewables(case: GridCase, units) -> GridCase:
    return replace(case, renewables=case.renewables + tuple(units))


# -- unit construction --------------------------------------------------


def _make_segments(p_min: float, p_max: float, base_cost: float,
                   n: int = SEGMENT_COUNT) -> tuple[tuple[float, float], ...]:
    span = p_max - p_min
    if span <= 0:
        return ()
    width = span / n
    return tuple((width, base_cost * m) for m in SEGMENT_SPREAD[:n])


def _make_generator(uid, bus, group, fuel_defaults) -> Generator:
    fuel = group["fuel"]
    base = fuel_defaults[fuel]["marginal_cost"]
    segments = _make_segments(group["p_min"], group["p_max"], base)
    top = max((c for _, c in segments), default=base)
    return Generator(
        id=uid, bus=bus, fuel=fuel,
        p_min=float(group["p_min"]), p_max=float(group["p_max"]),
        min_up=int(group["min_up"]), min_down=int(group["min_down"]),
        ramp_up=float(group["ramp_mw_per_min"]),
        ramp_down=float(group["ramp_mw_per_min"]),
        no_load_cost=float(group["p_min"]) * base,
        startup_cost=float(group["startup_cost"]), shutdown_cost=0.0,
        segments=segments,
        deploy_cost=DEPLOY_COST_FACTOR * top,
        emission_rate=fuel_defaults[fuel]["emission_rate"],
    )


def _load_source_data() -> dict:
    try:
        raw = resources.files("gridflex.data").joinpath(
            "rts96_single_area.json").read_text()
    except (FileNotFoundError, ModuleNotFoundError) as exc:
        raise CaseDataError(
            "bundled data file rts96_single_area.json is missing") from exc
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise CaseDataError(
            f"bundled data file rts96_single_area.json is corrupt: {exc}") from exc


LOAD_SHIFT_MW = 480.0
LOAD_SHIFT_SOURCES = (14, 15, 19, 20)
LOAD_SHIFT_TARGET = 13
LOAD_UPLIFT = 1.05
RATING_OVERRIDES = {"A25-1": 175.0, "A25-2": 175.0, "A21": 220.0, "A22": 220.0}
FACTS_CANDIDATES = ("A21", "A25-1", "A26")
RENEWABLE_CANDIDATE_PAIRS = ((4, 5), (17, 18), (3, 24))
DEFAULT_WIND_PARAMS = (4.0, 14.0, 25.0)  # cut-in, rated, cut-out m/s


def build_rts96_modified() -> GridCase:
    """Modified single-area RTS-96: load shifted to bus 13, +5% uplift,
    congestion-inducing rating cuts, FACTS candidates flagged."""
    src = _load_source_data()

    peak = {int(k): float(v) for k, v in src["bus_peak_load_mw"].items()}
    shift_total = sum(peak[b] for b in LOAD_SHIFT_SOURCES)
    for b in LOAD_SHIFT_SOURCES:
        moved = LOAD_SHIFT_MW * peak[b] / shift_total
        peak[b] -= moved
    peak[LOAD_SHIFT_TARGET] += LOAD_SHIFT_MW
    peak = {b: v * LOAD_UPLIFT for b, v in peak.items()}
    total_peak = sum(peak.values())

    buses = tuple(Bus(id=b, load_share=peak[b] / total_peak)
                  for b in sorted(peak))
    lines = []
    for br in src["branches"]:
        rating = RATING_OVERRIDES.get(br["id"], float(br["rating"]))
        lines.append(Line(
            id=br["id"], from_bus=int(br["from"]), to_bus=int(br["to"]),
            susceptance_nominal=1.0 / float(br["x"]),
            rating=rating,
            facts_candidate=br["id"] in FACTS_CANDIDATES,
        ))

    fuel_defaults = src["fuel_defaults"]
    groups = src["unit_groups"]
    generators = []
    for placement in src["unit_placements"]:
        bus, gname, count = placement["bus"], placement["group"], placement["count"]
        for k in range(1, count + 1):
            uid = f"b{bus}-{gname.lower()}-{k}"
            generators.append(_make_generator(uid, bus, groups[gname], fuel_defaults))

    load_curve = tuple(total_peak * f for f in src["hourly_peak_fraction"])
    return GridCase(
        buses=buses, lines=tuple(lines), generators=tuple(generators),
        renewables=(), s_base=float(src["s_base_mva"]), load_curve=load_curve,
        n_facts_max=len(FACTS_CANDIDATES),
        facts_enabled_lines=frozenset(),
        renewable_candidate_pairs=RENEWABLE_CANDIDATE_PAIRS,
    )


def make_wind_unit(uid: str, bus: int, rated_mw: float,
                   params=DEFAULT_WIND_PARAMS, curtail_cost=0.0) -> RenewableUnit:
    return RenewableUnit(id=uid, bus=bus, kind="wind", rated_power=rated_mw,
                         curtail_cost=curtail_cost, wind_params=tuple(params))


def make_solar_unit(uid: str, bus: int, rated_mw: float,
                    spec: PVArraySpec | None = None, curtail_cost=0.0) -> RenewableUnit:
    return RenewableUnit(id=uid, bus=bus, kind="solar", rated_power=rated_mw,
                         curtail_cost=curtail_cost, pv_params=spec or PVArraySpec())


# -- generation-mix redistribution ---------------------------------------


def _scale_generator(gen: Generator, new_p_max: float) -> Generator:
    """Scale a unit's size, keeping its cost/emission rates and time data."""
    f = new_p_max / gen.p_max
    p_min = gen.p_min * f
    segments = tuple((w * f, c) for w, c in gen.segments)
    return replace(gen, p_max=new_p_max, p_min=p_min, segments=segments,
                   ramp_up=gen.ramp_up * f, ramp_down=gen.ramp_down * f,
                   no_load_cost=gen.no_load_cost * f)


def _gas_template(src: dict, uid: str, bus: int) -> Generator:
    tpl = src["gas_unit_template"]
    base = src["fuel_defaults"]["gas"]["marginal_cost"]
    p_max = float(tpl["p_max"])
    p_min = 0.3 * p_max
    return Generator(
        id=uid, bus=bus, fuel="gas", p_min=p_min, p_max=p_max,
        min_up=int(tpl["min_up"]), min_down=int(tpl["min_down"]),
        ramp_up=0.01 * p_max, ramp_down=0.01 * p_max,
        no_load_cost=p_min * base,
        startup_cost=float(tpl["startup_cost"]), shutdown_cost=0.0,
        segments=((p_max - p_min, base),),
        deploy_cost=DEPLOY_COST_FACTOR * base,
        emission_rate=src["fuel_defaults"]["gas"]["emission_rate"],
    )


def apply_generation_mix(case: GridCase, mix: dict) -> GridCase:
    """Redistribute dispatchable capacity across fuels, preserving the total.

    Whole units are cloned or removed largest-first along each fuel's
    original unit-size ladder; the residual is absorbed by rescaling the
    last-added (or largest remaining) unit so every fuel fraction is exact.
    """
    unknown = set(mix) - set(FUELS)
    if unknown:
        raise CaseValidationError(f"mix references unknown fuel(s): {sorted(unknown)}")
    if any(v < 0 for v in mix.values()):
        raise CaseValidationError("mix fractions must be >= 0")
    total_frac = sum(mix.values())
    if abs(total_frac - 1.0) > 1e-6:
        raise CaseValidationError(f"mix fractions sum to {total_frac}, expected 1.0")

    src = _load_source_data()
    total = case.total_dispatchable_capacity
    by_fuel: dict[str, list[Generator]] = {f: [] for f in FUELS}
    for g in case.generators:
        by_fuel[g.fuel].append(g)

    gen_buses = sorted({g.bus for g in case.generators})
    new_fleet: list[Generator] = []
    clone_serial = 0
    for fuel in FUELS:
        target = mix.get(fuel, 0.0) * total
        units = sorted(by_fuel[fuel], key=lambda g: (-g.p_max, g.id))
        if target <= 1e-9:
            continue
        if units:
            ladder = list(units)
            template_ladder = False
        else:
            tpl = _gas_template(src, f"tpl-{fuel}", gen_buses[0])
            if fuel != "gas":
                # absent fuel reuses the generic template shape with its own
                # cost/emission defaults
                base = src["fuel_defaults"][fuel]["marginal_cost"]
                tpl = replace(
                    tpl, fuel=fuel, no_load_cost=tpl.p_min * base,
                    segments=tuple((w, base) for w, _ in tpl.segments),
                    deploy_cost=DEPLOY_COST_FACTOR * base,
                    emission_rate=src["fuel_defaults"][fuel]["emission_rate"])
            ladder = [tpl]
            template_ladder = True
        smallest = min(g.p_max for g in ladder)
        current = sum(g.p_max for g in units)

        while units and current > target + smallest / 2:
            current -= units.pop(0).p_max  # largest first
        last_added = None
        i = 0
        while current < target - smallest / 2 or not units:
            proto = ladder[i % len(ladder)]
            clone_serial += 1
            bus = gen_buses[clone_serial % len(gen_buses)] if template_ladder \
                else proto.bus
            clone = replace(proto, id=f"{proto.id}+c{clone_serial}", bus=bus)
            units.append(clone)
            last_added = clone
            current += clone.p_max
            i += 1
        residual = target - current
        if abs(residual) > 1e-9:
            victim = last_added if last_added is not None \
                else max(units, key=lambda g: (g.p_max, g.id))
            units.remove(victim)
            scaled = _scale_generator(victim, victim.p_max + residual)
            units.append(scaled)
        new_fleet.extend(sorted(units, key=lambda g: g.id))

    # place any template units spread over generator buses, deterministically
    return replace(case, generators=tuple(new_fleet))


# -- JSON case files ------------------------------------------------------


def save_case(case: GridCase, path) -> None:
    doc = {
        "buses": [{"id": b.id, "load_share": b.load_share} for b in case.buses],
        "lines": [
            {"id": ln.id, "from_bus": ln.from_bus, "to_bus": ln.to_bus,
             "susceptance_nominal": ln.susceptance_nominal, "rating": ln.rating,
             "facts_candidate": ln.facts_candidate}
            for ln in case.lines
        ],
        "generators": [
            {"id": g.id, "bus": g.bus, "fuel": g.fuel,
             "p_min": g.p_min, "p_max": g.p_max,
             "min_up": g.min_up, "min_down": g.min_down,
             "ramp_up": g.ramp_up, "ramp_down": g.ramp_down,
             "no_load_cost": g.no_load_cost, "startup_cost": g.startup_cost,
             "shutdown_cost": g.shutdown_cost,
             "segments": [{"width": w, "marginal_cost": c} for w, c in g.segments],
             "deploy_cost": g.deploy_cost, "emission_rate": g.emission_rate}
            for g in case.generators
        ],
        "renewables": [
            {"id": r.id, "bus": r.bus, "kind": r.kind,
             "rated_power": r.rated_power, "curtail_cost": r.curtail_cost,
             "wind_params": list(r.wind_params) if r.wind_params else None,
             "pv_params": ({"i_sc": r.pv_params.i_sc, "v_oc": r.pv_params.v_oc,
                            "g_stc": r.pv_params.g_stc} if r.pv_params else None)}
            for r in case.renewables
        ],
        "s_base": case.s_base,
        "load_curve": list(case.load_curve),
        "facts": {
            "n_max": case.n_facts_max,
            "enabled_lines": sorted(case.facts_enabled_lines),
        },
        "renewable_candidate_pairs": [list(p) for p in case.renewable_candidate_pairs],
    }
    with open(str(path), "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)


def _require(doc, key, where):
    if key not in doc:
        raise CaseValidationError(f"{where}: missing field {key!r}")
    return doc[key]


def load_case(path) -> GridCase:
    try:
        with open(str(path)) as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise CaseDataError(f"case file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise CaseValidationError(
            f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    try:
        buses = tuple(
            Bus(id=int(_require(b, "id", f"buses[{i}]")),
                load_share=float(_require(b, "load_share", f"buses[{i}]")))
            for i, b in enumerate(_require(doc, "buses", "case")))
        lines = tuple(
            Line(id=str(_require(l, "id", f"lines[{i}]")),
                 from_bus=int(_require(l, "from_bus", f"lines[{i}]")),
                 to_bus=int(_require(l, "to_bus", f"lines[{i}]")),
                 susceptance_nominal=float(
                     _require(l, "susceptance_nominal", f"lines[{i}]")),
                 rating=float(_require(l, "rating", f"lines[{i}]")),
                 facts_candidate=bool(l.get("facts_candidate", False)))
            for i, l in enumerate(_require(doc, "lines", "case")))
        generators = []
        for i, g in enumerate(_require(doc, "generators", "case")):
            where = f"generators[{i}]"
            fuel = str(_require(g, "fuel", where))
            if fuel not in FUELS:
                raise CaseValidationError(
                    f"{where}: unknown fuel token {fuel!r} "
                    f"(expected one of {', '.join(FUELS)})")
            generators.append(Generator(
                id=str(_require(g, "id", where)), bus=int(_require(g, "bus", where)),
                fuel=fuel,
                p_min=float(_require(g, "p_min", where)),
                p_max=float(_require(g, "p_max", where)),
                min_up=int(_require(g, "min_up", where)),
                min_down=int(_require(g, "min_down", where)),
                ramp_up=float(_require(g, "ramp_up", where)),
                ramp_down=float(_require(g, "ramp_down", where)),
                no_load_cost=float(_require(g, "no_load_cost", where)),
                startup_cost=float(_require(g, "startup_cost", where)),
                shutdown_cost=float(_require(g, "shutdown_cost", where)),
                segments=tuple(
                    (float(s["width"]), float(s["marginal_cost"]))
                    for s in _require(g, "segments", where)),
                deploy_cost=float(_require(g, "deploy_cost", where)),
                emission_rate=float(_require(g, "emission_rate", where)),
            ))
        renewables = []
        for i, r in enumerate(doc.get("renewables", [])):
            where = f"renewables[{i}]"
            wind_params = r.get("wind_params")
            pv = r.get("pv_params")
            renewables.append(RenewableUnit(
                id=str(_require(r, "id", where)), bus=int(_require(r, "bus", where)),
                kind=str(_require(r, "kind", where)),
                rated_power=float(_require(r, "rated_power", where)),
                curtail_cost=float(r.get("curtail_cost", 0.0)),
                wind_params=tuple(wind_params) if wind_params else None,
                pv_params=PVArraySpec(**pv) if pv else None,
            ))
        facts = doc.get("facts", {})
        return GridCase(
            buses=buses, lines=lines, generators=tuple(generators),
            renewables=tuple(renewables),
            s_base=float(_require(doc, "s_base", "case")),
            load_curve=tuple(float(v) for v in _require(doc, "load_curve", "case")),
            n_facts_max=int(facts.get("n_max", 0)),
            facts_enabled_lines=frozenset(facts.get("enabled_lines", [])),
            renewable_candidate_pairs=tuple(
                (int(a), int(b)) for a, b in doc.get("renewable_candidate_pairs", [])),
        )
    except CaseValidationError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CaseValidationError(f"{path}: malformed case file: {exc}") from exc

"""Configuration-driven experiment runner for the five study families.

Each study expands into independent cells (one MILP solve plus metrics).
Cells are content-addressed by a hash of their configuration and inputs,
so rerunning into the same output directory recomputes only what is
missing. Failed cells keep their status; no numbers are fabricated.
"""

from __future__ import annotations

import hashlib
import json
import shlex
import subprocess
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import formulation
from .audit import audit_solution
from .facts import FlowDirection, InfeasibleCaseError, predict_flow_directions
from .grid_model import (GridCase, add_renewables, apply_generation_mix,
                         build_rts96_modified, load_case, make_solar_unit,
                         make_wind_unit, save_case, with_facts_enabled,
                         with_load_curve)
from .metrics import congestion_rent, curtailment_total, emissions
from .milp import (MilpInstance, RawSolution, SolveOptions, export_mps,
                   import_solution, solve_mip)
from .scenarios import ScenarioSet, WeatherTrace, discretize, read_trace_csv, \
    scale_to_daily_energy

DEFAULT_FACTS_SETS = ([], ["A21"], ["A25-1", "A26"], ["A21", "A25-1", "A26"])
WIND_DAILY_ENERGY_MWH = 6412.42
SOLAR_DAILY_ENERGY_MWH = 4891.71
STUDIES = ("base", "siting", "penetration", "load-curves", "mixes")


class ConfigError(ValueError):
    pass


@dataclass
class StudyConfig:
    case_source: str = "rts96-modified"  # built-in tag or a case-file path
    n_scenarios: int = 3
    wind_trace: str | None = None  # CSV path; None uses the bundled trace
    solar_trace: str | None = None
    facts_sets: tuple = DEFAULT_FACTS_SETS
    siting_capacity_mw: float = 400.0
    wind_daily_energy_mwh: float = WIND_DAILY_ENERGY_MWH
    solar_daily_energy_mwh: float = SOLAR_DAILY_ENERGY_MWH
    penetration_increment_mw: float = 100.0
    penetration_steps: int = 5
    spread_capacity_mw: float = 100.0  # per bus per kind, load-curve/mix studies
    load_curves: dict | None = None  # name -> 24 fractions of system peak
    generation_mixes: dict | None = None  # name -> fuel fractions
    facts_cost: object = "model"  # "model" | "zero" | $/h | {line: $/h}
    mip_gap: float = 0.01
    time_limit_s: float = 600.0
    seed: int = 7
    workers: int = 1
    external_solver: str | None = None  # command template with {mps} {sol}
    audit: bool = True

    @staticmethod
    def from_json(path) -> "StudyConfig":
        with open(str(path)) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        known = set(StudyConfig.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
        cfg = StudyConfig(**doc)
        if "facts_sets" in doc:
            cfg.facts_sets = tuple(tuple(s) for s in doc["facts_sets"])
        return cfg

    def to_json_dict(self) -> dict:
        doc = asdict(self)
        doc["facts_sets"] = [list(s) for s in self.facts_sets]
        return doc

    def solve_options(self) -> SolveOptions:
        return SolveOptions(mip_gap=self.mip_gap, time_limit_s=self.time_limit_s,
                            seed=self.seed)

    def validate(self, case: GridCase | None = None) -> list[str]:
        problems = []
        if self.n_scenarios < 1:
            problems.append("n_scenarios must be >= 1")
        for cap_name in ("siting_capacity_mw", "penetration_increment_mw",
                         "spread_capacity_mw"):
            if getattr(self, cap_name) <= 0:
                problems.append(f"{cap_name} must be > 0")
        if self.penetration_steps < 1:
            problems.append("penetration_steps must be >= 1")
        if self.workers < 1:
            problems.append("workers must be >= 1")
        case = case or self.load_grid_case()
        line_ids = {ln.id for ln in case.lines}
        for s in self.facts_sets:
            bad = set(s) - line_ids
            if bad:
                problems.append(f"facts set {list(s)} references unknown lines {sorted(bad)}")
        if self.load_curves:
            for name, vals in self.load_curves.items():
                if len(vals) != 24:
                    problems.append(f"load curve {name!r} must have 24 values")
        if self.generation_mixes:
            for name, mix in self.generation_mixes.items():
                if abs(sum(mix.values()) - 1.0) > 1e-6:
                    problems.append(f"generation mix {name!r} does not sum to 1")
        return problems

    # -- resource loading ----------------------------------------------

    def load_grid_case(self) -> GridCase:
        if self.case_source == "rts96-modified":
            return build_rts96_modified()
        return load_case(self.case_source)

    def load_trace(self, kind: str) -> WeatherTrace:
        path = self.wind_trace if kind == "wind" else self.solar_trace
        if path is not None:
            return read_trace_csv(path, resource_id=f"default-{kind}")
        name = "wind_trace.csv" if kind == "wind" else "solar_trace.csv"
        with resources.as_file(resources.files("gridflex.data") / name) as p:
            return read_trace_csv(p, resource_id=f"default-{kind}")

    def default_load_curves(self) -> dict:
        if self.load_curves is not None:
            return self.load_curves
        doc = json.loads(resources.files("gridflex.data")
                         .joinpath("load_curves.json").read_text())
        return doc["curves"]

    def default_mixes(self) -> dict:
        if self.generation_mixes is not None:
            return self.generation_mixes
        return json.loads(resources.files("gridflex.data")
                          .joinpath("iso_mixes.json").read_text())

    def build_options(self) -> formulation.BuildOptions:
        cost = self.facts_cost
        if cost == "model":
            return formulation.BuildOptions()
        if cost == "zero":
            return formulation.BuildOptions(facts_hourly_cost=0.0)
        if isinstance(cost, (int, float)):
            return formulation.BuildOptions(facts_hourly_cost=float(cost))
        if isinstance(cost, dict):
            return formulation.BuildOptions(facts_hourly_cost=dict(cost))
        raise ConfigError(f"facts_cost {cost!r} not understood")


@dataclass
class CellResult:
    study: str
    key: dict  # identifying axes, JSON-safe
    status: str
    mip_gap: float | None = None
    total_cost: float | None = None
    breakdown: dict | None = None
    emissions_mlb: float | None = None
    curtailment_mwh: float | None = None
    congestion_rent: float | None = None
    load_payment: float | None = None
    rent_identity_gap: float | None = None  # |nodal - line-wise| relative
    available_renewable_mwh: float | None = None
    audit_violations: int | None = None
    wall_time_s: float = 0.0  # reported in timings.csv, never in report.json

    def payload(self) -> dict:
        doc = asdict(self)
        doc.pop("wall_time_s")
        return doc

    @property
    def solved(self) -> bool:
        return self.status in ("optimal", "gap-limited")


@dataclass
class StudyReport:
    study: str
    config: dict
    cells: list

    def payload(self) -> dict:
        return {"study": self.study, "config": self.config,
                "cells": [c.payload() for c in self.cells]}

    def __eq__(self, other):
        return isinstance(other, StudyReport) and self.payload() == other.payload()

    def cell(self, **key) -> CellResult:
        for c in self.cells:
            if all(c.key.get(k) == v for k, v in key.items()):
                return c
        raise KeyError(key)

    @property
    def all_solved(self) -> bool:
        return all(c.solved for c in self.cells)

    @staticmethod
    def from_json(path) -> "StudyReport":
        with open(str(path)) as fh:
            doc = json.load(fh)
        cells = [CellResult(**c) for c in doc["cells"]]
        return StudyReport(doc["study"], doc["config"], cells)


# -- solving ---------------------------------------------------------------


def _solve_instance(inst: MilpInstance, opts: SolveOptions,
                    external_cmd: str | None) -> RawSolution:
    if not external_cmd:
        return solve_mip(inst, opts)
    with tempfile.TemporaryDirectory(prefix="gridflex-ext-") as tmp:
        mps = str(Path(tmp) / "instance.mps")
        sol = str(Path(tmp) / "instance.sol")
        name_map = export_mps(inst, mps)
        cmd = [part.format(mps=mps, sol=sol)
               for part in shlex.split(external_cmd)]
        proc = subprocess.run(cmd, capture_output=True, text=True)
        if proc.returncode != 0:
            raise RuntimeError(
                f"external solver failed ({proc.returncode}): {proc.stderr[-500:]}")
        return import_solution(sol, inst, name_map_path=name_map)


class StudyEngine:
    """Shared machinery: direction cache, cell cache, metrics assembly."""

    def __init__(self, config: StudyConfig, out_dir=None):
        self.config = config
        self.out_dir = Path(out_dir) if out_dir else None
        self._direction_cache: dict[str, FlowDirection] = {}
        if self.out_dir:
            (self.out_dir / "cells").mkdir(parents=True, exist_ok=True)

    # case digests feed both caches and resumability hashes
    @staticmethod
    def _case_digest(case: GridCase) -> str:
        with tempfile.NamedTemporaryFile("w+", suffix=".json") as fh:
            save_case(case, fh.name)
            fh.seek(0)
            return hashlib.sha256(fh.read().encode()).hexdigest()[:16]

    @staticmethod
    def _scen_digest(scen: ScenarioSet) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(scen.probabilities).tobytes())
        for rid in sorted(scen.power):
            h.update(rid.encode())
            h.update(np.ascontiguousarray(scen.power[rid]).tobytes())
        return h.hexdigest()[:16]

    def directions_for(self, case: GridCase, scen: ScenarioSet) -> FlowDirection:
        candidates = tuple(sorted(ln.id for ln in case.lines if ln.facts_candidate))
        if not candidates:
            return FlowDirection({})
        bare = with_facts_enabled(case, [])
        key = self._case_digest(bare) + self._scen_digest(scen)
        if key not in self._direction_cache:
            self._direction_cache[key] = predict_flow_directions(
                bare, scen, self.config.solve_options(), lines=candidates)
        return self._direction_cache[key]

    def _cell_hash(self, study: str, key: dict, case: GridCase,
                   scen: ScenarioSet) -> str:
        doc = {
            "study": study, "key": key,
            "case": self._case_digest(case),
            "scenarios": self._scen_digest(scen),
            "gap": self.config.mip_gap, "seed": self.config.seed,
            "facts_cost": self.config.facts_cost,
            "external": bool(self.config.external_solver),
        }
        return hashlib.sha256(
            json.dumps(doc, sort_keys=True).encode()).hexdigest()[:24]

    def solve_cell(self, study: str, key: dict, case: GridCase,
                   scen: ScenarioSet) -> CellResult:
        cache_path = None
        if self.out_dir:
            cache_path = self.out_dir / "cells" / (
                self._cell_hash(study, key, case, scen) + ".json")
            if cache_path.exists():
                doc = json.loads(cache_path.read_text())
                return CellResult(**doc)
        started = time.perf_counter()
        try:
            directions = (self.directions_for(case, scen)
                          if case.facts_enabled_lines else FlowDirection({}))
            build_opts = self.config.build_options()
            inst = formulation.build(case, scen, directions, build_opts)
            raw = _solve_instance(inst, self.config.solve_options(),
                                  self.config.external_solver)
            if not raw.has_values:
                result = CellResult(study, key, status=raw.status,
                                    wall_time_s=time.perf_counter() - started)
            else:
                sol = formulation.decode(inst, raw, case, scen)
                if self.config.audit:
                    viol = audit_solution(case, scen, directions, sol, build_opts)
                    n_viol = len(viol)
                else:
                    n_viol = None
                ledger = emissions(sol, case, scen)
                rent = congestion_rent(sol, case, scen)
                identity_gap = (abs(rent.congestion_rent - rent.line_rent_total)
                                / max(1.0, abs(rent.congestion_rent)))
                result = CellResult(
                    study, key, status=sol.status, mip_gap=sol.mip_gap,
                    total_cost=sol.objective, breakdown=sol.breakdown,
                    emissions_mlb=ledger.total_mlb,
                    curtailment_mwh=curtailment_total(sol, scen),
                    congestion_rent=rent.congestion_rent,
                    load_payment=rent.load_payment,
                    rent_identity_gap=identity_gap,
                    available_renewable_mwh=scen.expected_energy(),
                    audit_violations=n_viol,
                    wall_time_s=time.perf_counter() - started,
                )
        except InfeasibleCaseError as exc:
            result = CellResult(study, key, status="infeasible",
                                wall_time_s=time.perf_counter() - started)
        if cache_path:
            cache_path.write_text(json.dumps(result.payload() |
                                             {"wall_time_s": result.wall_time_s},
                                             sort_keys=True))
        return result

    def run(self, study: str, jobs: list) -> StudyReport:
        """jobs: list of (key, case, scenarios); order defines the report."""
        if self.config.workers > 1:
            with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
                futures = [pool.submit(self.solve_cell, study, k, c, s)
                           for k, c, s in jobs]
                cells = [f.result() for f in futures]
        else:
            cells = [self.solve_cell(study, k, c, s) for k, c, s in jobs]
        return StudyReport(study, self.config.to_json_dict(), cells)


# -- scenario assembly ------------------------------------------------------


def _scenarios_for(config: StudyConfig, units) -> ScenarioSet:
    units = tuple(units)
    if not units:
        return ScenarioSet.empty(config.n_scenarios)
    traces = []
    for unit in units:
        base = config.load_trace(unit.kind)
        traces.append(base.for_resource(unit.id))
    return discretize(traces, units, config.n_scenarios)


def _spread_renewables(case: GridCase, capacity_each: float):
    """One wind and one solar unit of the given size at every candidate bus."""
    units = []
    for pair in case.renewable_candidate_pairs:
        for bus in pair:
            units.append(make_wind_unit(f"w{bus}", bus, capacity_each))
            units.append(make_solar_unit(f"s{bus}", bus, capacity_each))
    return units


def _facts_key(line_set) -> str:
    return "+".join(line_set) if line_set else "none"


# -- the five studies -------------------------------------------------------


def run_base_case_study(config: StudyConfig, out_dir=None) -> StudyReport:
    """No renewables; every configured FACTS set on the modified case."""
    engine = StudyEngine(config, out_dir)
    case = config.load_grid_case()
    scen = ScenarioSet.empty(config.n_scenarios)
    jobs = [({"facts_set": list(fs)}, with_facts_enabled(case, fs), scen)
            for fs in config.facts_sets]
    return engine.run("base", jobs)


def run_siting_study(config: StudyConfig, out_dir=None) -> StudyReport:
    """One technology at a time on each candidate bus pair, all FACTS sets."""
    engine = StudyEngine(config, out_dir)
    base = config.load_grid_case()
    jobs = []
    for pair in base.renewable_candidate_pairs:
        for kind in ("wind", "solar"):
            make = make_wind_unit if kind == "wind" else make_solar_unit
            units = [make(f"{kind[0]}{bus}", bus, config.siting_capacity_mw)
                     for bus in pair]
            case = add_renewables(base, units)
            scen = _scenarios_for(config, units)
            target = (config.wind_daily_energy_mwh if kind == "wind"
                      else config.solar_daily_energy_mwh)
            scen = scale_to_daily_energy(scen, [u.id for u in units], target)
            for fs in config.facts_sets:
                jobs.append((
                    {"pair": list(pair), "kind": kind, "facts_set": list(fs)},
                    with_facts_enabled(case, fs), scen))
    return engine.run("siting", jobs)


def run_penetration_study(config: StudyConfig, out_dir=None) -> StudyReport:
    """Wind+solar at every candidate bus, swept in capacity increments."""
    engine = StudyEngine(config, out_dir)
    base = config.load_grid_case()
    jobs = []
    for step in range(config.penetration_steps + 1):
        cap = step * config.penetration_increment_mw
        if step == 0:
            case, scen = base, ScenarioSet.empty(config.n_scenarios)
        else:
            units = _spread_renewables(base, cap)
            case = add_renewables(base, units)
            scen = _scenarios_for(config, units)
        for fs in config.facts_sets:
            jobs.append(({"step": step, "capacity_mw_per_bus_per_kind": cap,
                          "facts_set": list(fs)},
                         with_facts_enabled(case, fs), scen))
    report = engine.run("penetration", jobs)
    _annotate_penetration(report)
    return report


def _annotate_penetration(report: StudyReport):
    """Attach cost-saving and emission-reduction percentages vs step 0."""
    baselines = {}
    for c in report.cells:
        if c.key["step"] == 0 and c.solved:
            baselines[_facts_key(c.key["facts_set"])] = c
    for c in report.cells:
        base = baselines.get(_facts_key(c.key["facts_set"]))
        if base is None or not c.solved:
            continue
        c.key["cost_saving_pct"] = round(
            100.0 * (base.total_cost - c.total_cost) / base.total_cost, 4)
        c.key["emission_reduction_pct"] = round(
            100.0 * (base.emissions_mlb - c.emissions_mlb)
            / max(base.emissions_mlb, 1e-9), 4)


def run_load_curve_study(config: StudyConfig, out_dir=None) -> StudyReport:
    """Six representative day shapes with spread-out 100 MW renewables."""
    engine = StudyEngine(config, out_dir)
    base = config.load_grid_case()
    peak = max(base.load_curve)
    units = _spread_renewables(base, config.spread_capacity_mw)
    scen = _scenarios_for(config, units)
    jobs = []
    for name, fractions in config.default_load_curves().items():
        case = with_load_curve(add_renewables(base, units),
                               [f * peak for f in fractions])
        for fs in config.facts_sets:
            jobs.append(({"curve": name, "facts_set": list(fs)},
                         with_facts_enabled(case, fs), scen))
    return engine.run("load-curves", jobs)


def run_generation_mix_study(config: StudyConfig, out_dir=None) -> StudyReport:
    """ISO capacity mixes at identical load, FACTS off and fully on."""
    engine = StudyEngine(config, out_dir)
    base = config.load_grid_case()
    units = _spread_renewables(base, config.spread_capacity_mw)
    scen = _scenarios_for(config, units)
    facts_all = max(config.facts_sets, key=len)
    jobs = []
    for name, mix in config.default_mixes().items():
        case = add_renewables(apply_generation_mix(base, mix), units)
        for fs in ([], list(facts_all)):
            jobs.append(({"mix": name, "facts_set": list(fs)},
                         with_facts_enabled(case, fs), scen))
    return engine.run("mixes", jobs)


RUNNERS = {
    "base": run_base_case_study,
    "siting": run_siting_study,
    "penetration": run_penetration_study,
    "load-curves": run_load_curve_study,
    "mixes": run_generation_mix_study,
}


# -- report emission ---------------------------------------------------------

_CSV_COLUMNS = ("study", "key", "status", "mip_gap", "total_cost",
                "emissions_mlb", "curtailment_mwh", "congestion_rent",
                "load_payment")


def emit_reports(report: StudyReport, out_dir) -> list[str]:
    """Write report.json, report.csv, per-figure CSVs, and timings.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "report.json"
    path.write_text(json.dumps(report.payload(), indent=1, sort_keys=True) + "\n")
    written.append(str(path))

    def fmt(v):
        return "" if v is None else repr(v)

    lines = [",".join(_CSV_COLUMNS)]
    for c in report.cells:
        key = json.dumps(c.key, sort_keys=True).replace(",", ";").replace('"', "'")
        lines.append(",".join([
            c.study, key, c.status, fmt(c.mip_gap), fmt(c.total_cost),
            fmt(c.emissions_mlb), fmt(c.curtailment_mwh),
            fmt(c.congestion_rent), fmt(c.load_payment)]))
    path = out / "report.csv"
    path.write_text("\n".join(lines) + "\n")
    written.append(str(path))

    path = out / "timings.csv"
    path.write_text("\n".join(
        ["key,status,wall_time_s"] +
        [",".join([json.dumps(c.key, sort_keys=True).replace(",", ";"),
                   c.status, f"{c.wall_time_s:.3f}"]) for c in report.cells]) + "\n")
    written.append(str(path))

    written += _figure_csvs(report, out)

    meta = {
        "study": report.study,
        "notes": [
            "bundled load curves, ISO mix remainders, and weather traces are "
            "editable approximations shipped with the package",
        ],
    }
    path = out / "metadata.json"
    path.write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    written.append(str(path))
    return written


def _figure_csvs(report: StudyReport, out: Path) -> list[str]:
    """One CSV per metric with the study's natural x-axis as rows."""
    axis_by_study = {"base": "facts_set", "siting": None, "penetration": "step",
                     "load-curves": "curve", "mixes": "mix"}
    metrics = {"cost": "total_cost", "emissions": "emissions_mlb",
               "curtailment": "curtailment_mwh", "congestion_rent":
               "congestion_rent"}
    written = []
    axis = axis_by_study.get(report.study)
    for metric, attr in metrics.items():
        rows = ["x,facts_set," + metric]
        for c in report.cells:
            if not c.solved:
                continue
            if axis is None:  # siting: pair+kind labels the row
                x = f"{c.key['kind']}@{'-'.join(map(str, c.key['pair']))}"
            elif axis == "facts_set":
                x = _facts_key(c.key["facts_set"])
            else:
                x = str(c.key[axis])
            rows.append(f"{x},{_facts_key(c.key['facts_set'])},{fmt_num(getattr(c, attr))}")
        path = out / f"fig_{report.study}_{metric}.csv"
        path.write_text("\n".join(rows) + "\n")
        written.append(str(path))
    return written


def fmt_num(v) -> str:
    return "" if v is None else repr(v)

"""Stochastic unit commitment with variable-impedance power flow control.

Public surface re-exports the domain types and operations of each layer:
grid model, renewable scenarios, series-compensation devices, the MILP
formulation and engine, post-solution metrics, and the study runner.
"""

from .audit import audit_solution
from .facts import (FactsSpec, FlowDirection, compensation_rating,
                    device_hourly_cost, hourly_cost, predict_flow_directions,
                    susceptance_range, tcsc_unit_cost)
from .formulation import BuildOptions, SucSolution, build, decode
from .grid_model import (Bus, CaseValidationError, Generator, GridCase, Line,
                         PVArraySpec, RenewableUnit, add_renewables,
                         apply_generation_mix, build_rts96_modified, load_case,
                         make_solar_unit, make_wind_unit, save_case,
                         with_facts_enabled, with_load_curve)
from .metrics import (CongestionReport, EmissionLedger, congestion_rent,
                      curtailment_total, emissions)
from .milp import (InstanceError, MilpInstance, RawSolution, SolveOptions,
                   dual_objective, duality_gap, export_mps, import_solution,
                   solve_lp, solve_mip)
from .scenarios import (ScenarioSet, WeatherTrace, discretize, read_trace_csv,
                        scale_to_daily_energy, solar_power, wind_power,
                        write_trace_csv)
from .study import (CellResult, StudyConfig, StudyReport, emit_reports,
                    run_base_case_study, run_generation_mix_study,
                    run_load_curve_study, run_penetration_study,
                    run_siting_study)

__version__ = "0.1.0"

"""Series-compensation device model: ranges, economics, direction predictor."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridflex.facts import (FactsError, FlowDirection, compensation_rating,
                            device_hourly_cost, hourly_cost,
                            predict_flow_directions, susceptance_range,
                            tcsc_unit_cost)
from gridflex.grid_model import Bus, Generator, GridCase, Line
from gridflex.milp import SolveOptions
from gridflex.scenarios import ScenarioSet


def line(b=10.0, rating=100.0):
    return Line("L", 1, 2, b, rating)


class TestSusceptanceRange:
    def test_default_range(self):
        b_min, b_max = susceptance_range(line(10.0), -0.8, 0.4)
        assert b_min == pytest.approx(7.142857142857143)
        assert b_max == pytest.approx(50.0)

    def test_zero_adjustment(self):
        assert susceptance_range(line(10.0), 0.0, 0.0) == \
            pytest.approx((10.0, 10.0))

    def test_one_sided(self):
        assert susceptance_range(line(1.0), -0.5, 0.0) == \
            pytest.approx((1.0, 2.0))

    def test_reactance_through_zero_rejected(self):
        with pytest.raises(FactsError):
            susceptance_range(line(), -1.0, 0.4)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-0.95, 0.0), st.floats(0.0, 3.0), st.floats(0.1, 80.0))
    def test_range_brackets_nominal(self, d_min, d_max, b):
        b_min, b_max = susceptance_range(line(b), d_min, d_max)
        assert b_min <= b + 1e-9 <= b_max + 2e-9


class TestDeviceEconomics:
    def test_compensation_rating_examples(self):
        assert compensation_rating(175.0, 100.0) == pytest.approx(306.25)
        assert compensation_rating(100.0, 100.0) == pytest.approx(100.0)
        assert compensation_rating(220.0, 100.0) == pytest.approx(484.0)

    def test_unit_cost_quadratic(self):
        assert tcsc_unit_cost(306.25) == pytest.approx(76.07734375, abs=1e-9)
        assert tcsc_unit_cost(100.0) == pytest.approx(97.45, abs=1e-9)
        assert tcsc_unit_cost(1e-9) == pytest.approx(153.75, rel=1e-6)

    def test_unit_cost_requires_positive_rating(self):
        with pytest.raises(FactsError):
            tcsc_unit_cost(0.0)

    def test_hourly_cost_zero_investment(self):
        assert hourly_cost(0.0, 0.05, 15) == 0.0

    def test_hourly_cost_zero_rate_limit(self):
        assert hourly_cost(8760.0, 0.0, 10) == pytest.approx(0.1)

    def test_hourly_cost_annuity(self):
        assert hourly_cost(1e6, 0.05, 15) == pytest.approx(10.998, abs=1e-3)

    def test_hourly_cost_continuous_at_zero_rate(self):
        exact = hourly_cost(5e5, 0.0, 12)
        near = hourly_cost(5e5, 1e-9, 12)
        assert abs(near - exact) / exact < 1e-4

    def test_composition_deterministic(self):
        a = device_hourly_cost(line(10.0, 175.0), 100.0)
        b = device_hourly_cost(line(10.0, 175.0), 100.0)
        assert a == b and a > 0


def two_bus_case(direction="forward"):
    """Cheap generator exports over one candidate line to the load bus."""
    if direction == "forward":
        buses = (Bus(1, 0.0), Bus(2, 1.0))
    else:
        buses = (Bus(1, 1.0), Bus(2, 0.0))
    gen_bus = 1 if direction == "forward" else 2
    gens = (Generator(
        id="g", bus=gen_bus, fuel="gas", p_min=0.0, p_max=300.0,
        min_up=1, min_down=1, ramp_up=300.0, ramp_down=300.0,
        no_load_cost=0.0, startup_cost=0.0, shutdown_cost=0.0,
        segments=((300.0, 20.0),), deploy_cost=30.0, emission_rate=1169.0),)
    lines = (Line("F1", 1, 2, 10.0, 200.0, facts_candidate=True),)
    return GridCase(buses, lines, gens, (), 100.0, (100.0,) * 24,
                    n_facts_max=1, facts_enabled_lines=frozenset({"F1"}))


class TestPredictFlowDirections:
    def test_forward_flow(self):
        case = two_bus_case("forward")
        dirs = predict_flow_directions(case, ScenarioSet.empty(1),
                                       SolveOptions(mip_gap=0.0))
        assert dirs["F1"] == 1

    def test_reverse_flow(self):
        case = two_bus_case("reverse")
        dirs = predict_flow_directions(case, ScenarioSet.empty(1),
                                       SolveOptions(mip_gap=0.0))
        assert dirs["F1"] == 0

    def test_zero_flow_tie_is_one(self):
        # load at the generator bus: the line never carries power
        buses = (Bus(1, 1.0), Bus(2, 0.0))
        gens = (Generator(
            id="g", bus=1, fuel="gas", p_min=0.0, p_max=300.0,
            min_up=1, min_down=1, ramp_up=300.0, ramp_down=300.0,
            no_load_cost=0.0, startup_cost=0.0, shutdown_cost=0.0,
            segments=((300.0, 20.0),), deploy_cost=30.0, emission_rate=0.0),)
        lines = (Line("F1", 1, 2, 10.0, 200.0, facts_candidate=True),)
        case = GridCase(buses, lines, gens, (), 100.0, (50.0,) * 24,
                        n_facts_max=1, facts_enabled_lines=frozenset({"F1"}))
        dirs = predict_flow_directions(case, ScenarioSet.empty(1))
        assert dirs["F1"] == 1

    def test_three_bus_hand_direction(self, three_bus_case):
        case, _ = three_bus_case
        import dataclasses
        lines = tuple(dataclasses.replace(l, facts_candidate=True)
                      for l in case.lines)
        case = dataclasses.replace(case, lines=lines, n_facts_max=3)
        dirs = predict_flow_directions(
            case, ScenarioSet.empty(1), SolveOptions(mip_gap=0.0),
            lines=["L12", "L13", "L23"])
        # hand DC solution: all flows move toward the load at bus 3
        assert dirs.directions == {"L12": 1, "L13": 1, "L23": 1}

    def test_scenario_permutation_invariant(self):
        # relabeling the scenario axis must not change predicted directions
        case = two_bus_case("forward")
        import dataclasses
        from gridflex.grid_model import make_wind_unit
        unit = make_wind_unit("w1", 2, 90.0)
        case = dataclasses.replace(case, renewables=(unit,))
        rng = np.random.default_rng(13)
        power = rng.uniform(0, 80, (24, 3))
        probs = np.full((24, 3), 1 / 3)
        base = ScenarioSet(probabilities=probs, power={"w1": power},
                           rated={"w1": 90.0})
        perm = [2, 0, 1]
        shuffled = ScenarioSet(probabilities=probs[:, perm],
                               power={"w1": power[:, perm]},
                               rated={"w1": 90.0})
        opts = SolveOptions(mip_gap=0.0)
        assert predict_flow_directions(case, base, opts).directions == \
            predict_flow_directions(case, shuffled, opts).directions

    def test_infeasible_presolve_propagates(self):
        from gridflex.facts import InfeasibleCaseError
        buses = (Bus(1, 0.0), Bus(2, 1.0))
        gens = (Generator(
            id="g", bus=1, fuel="gas", p_min=0.0, p_max=10.0,
            min_up=1, min_down=1, ramp_up=10.0, ramp_down=10.0,
            no_load_cost=0.0, startup_cost=0.0, shutdown_cost=0.0,
            segments=((10.0, 20.0),), deploy_cost=30.0, emission_rate=0.0),)
        lines = (Line("F1", 1, 2, 10.0, 200.0, facts_candidate=True),)
        case = GridCase(buses, lines, gens, (), 100.0, (100.0,) * 24,
                        n_facts_max=1, facts_enabled_lines=frozenset({"F1"}))
        with pytest.raises(InfeasibleCaseError):
            predict_flow_directions(case, ScenarioSet.empty(1))

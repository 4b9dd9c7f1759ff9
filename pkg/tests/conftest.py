import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gridflex.grid_model import Bus, Generator, GridCase, Line  # noqa: E402


def simple_gen(gid, bus, p_max, cost, p_min=0.0, fuel="coal", **kw):
    args = dict(
        id=gid, bus=bus, fuel=fuel, p_min=p_min, p_max=p_max,
        min_up=1, min_down=1, ramp_up=p_max, ramp_down=p_max,
        no_load_cost=0.0, startup_cost=0.0, shutdown_cost=0.0,
        segments=((p_max - p_min, cost),), deploy_cost=1.5 * cost,
        emission_rate=2027.0 if fuel == "coal" else 0.0)
    args.update(kw)
    return Generator(**args)


@pytest.fixture
def three_bus_case():
    """Congested triangle with a hand-solvable DC optimum.

    Load 100 MW at bus 3; 10 $/MWh unit at bus 1, 50 $/MWh unit at bus 3;
    equal susceptances, the direct line 1-3 capped at 40 MW. Optimum per
    hour: g1=60, g3=40, cost 2600 $, prices (10, 30, 50), flows
    (20, 40, 20) on (1-2, 1-3, 2-3), rent 2400 $.
    """
    buses = (Bus(1, 0.0), Bus(2, 0.0), Bus(3, 1.0))
    lines = (Line("L12", 1, 2, 10.0, 100.0),
             Line("L13", 1, 3, 10.0, 40.0),
             Line("L23", 2, 3, 10.0, 100.0))
    gens = (simple_gen("g1", 1, 200.0, 10.0),
            simple_gen("g3", 3, 200.0, 50.0, fuel="oil"))
    case = GridCase(buses, lines, gens, (), 100.0, (100.0,) * 24)
    per_hour = {"cost": 2600.0, "duals": (10.0, 30.0, 50.0),
                "flows": (20.0, 40.0, 20.0), "rent": 2400.0,
                "load_payment": 5000.0}
    return case, per_hour

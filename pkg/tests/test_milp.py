"""MILP engine: LP/MIP solves, duals, MPS bridge, enumeration oracle."""

import numpy as np
import pytest

from gridflex.milp import (InstanceError, MilpInstance, SolveOptions,
                           dual_objective, export_mps, import_solution,
                           solve_lp, solve_mip, write_solution_file)

from _oracles import brute_force_mip, random_instance


def knapsack():
    # max 3a+2b s.t. a+b <= 1  ->  min -3a-2b
    inst = MilpInstance("knap")
    inst.add_variable("a", 0, 1, -3.0, binary=True)
    inst.add_variable("b", 0, 1, -2.0, binary=True)
    inst.add_row("cap", [("a", 1.0), ("b", 1.0)], "<=", 1.0)
    return inst


class TestSolveLp:
    def test_single_variable_with_row_dual(self):
        inst = MilpInstance()
        inst.add_variable("x", -np.inf, np.inf, 1.0)
        inst.add_row("floor", [("x", 1.0)], ">=", 3.0)
        sol = solve_lp(inst)
        assert sol.status == "optimal"
        assert sol.values[0] == pytest.approx(3.0)
        assert sol.duals[0] == pytest.approx(1.0)  # d(obj)/d(rhs)

    def test_two_variable_face(self):
        inst = MilpInstance()
        inst.add_variable("x", 0, np.inf, -1.0)
        inst.add_variable("y", 0, np.inf, -1.0)
        inst.add_row("budget", [("x", 1.0), ("y", 1.0)], "<=", 1.0)
        sol = solve_lp(inst)
        assert sol.objective == pytest.approx(-1.0)
        assert sol.values.sum() == pytest.approx(1.0)

    def test_infeasible_pair(self):
        inst = MilpInstance()
        inst.add_variable("x", -np.inf, np.inf, 1.0)
        inst.add_row("a", [("x", 1.0)], "<=", 0.0)
        inst.add_row("b", [("x", 1.0)], ">=", 1.0)
        assert solve_lp(inst).status == "infeasible"

    def test_unbounded(self):
        inst = MilpInstance()
        inst.add_variable("x", -np.inf, 0, 1.0)
        assert solve_lp(inst).status == "unbounded"

    def test_strong_duality_with_bounds(self):
        inst = MilpInstance()
        inst.add_variable("x", 1.0, 4.0, 2.0)
        inst.add_variable("y", 0.0, np.inf, 1.0)
        inst.add_row("mix", [("x", 1.0), ("y", 2.0)], ">=", 6.0)
        sol = solve_lp(inst)
        assert sol.status == "optimal"
        assert dual_objective(inst, sol) == pytest.approx(sol.objective, abs=1e-8)

    def test_equality_dual_sign(self):
        inst = MilpInstance()
        inst.add_variable("x", -np.inf, np.inf, 1.0)
        inst.add_row("pin", [("x", 1.0)], "=", 3.0)
        sol = solve_lp(inst)
        assert sol.duals[0] == pytest.approx(1.0)

    def test_rowwise_dual_feasibility_random(self):
        # stationarity: c - A'y equals the bound multipliers, column-wise
        from _oracles import random_instance
        rng = np.random.default_rng(23)
        for _ in range(15):
            inst = random_instance(rng)
            sol = solve_lp(inst)
            if sol.status != "optimal":
                continue
            a = inst.matrix().toarray()
            residual = (np.asarray(inst.obj) - a.T @ sol.duals
                        - sol.reduced_lower - sol.reduced_upper)
            assert np.abs(residual).max() <= 1e-6
            assert np.all(sol.reduced_lower >= -1e-7)
            assert np.all(sol.reduced_upper <= 1e-7)


class TestSolveMip:
    def test_knapsack(self):
        sol = solve_mip(knapsack(), SolveOptions(mip_gap=0.0))
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(-3.0)
        assert sol.values[0] == pytest.approx(1.0)

    def test_integral_flow_solves_at_root(self):
        # transportation structure is totally unimodular
        inst = MilpInstance()
        for name, cost in (("x11", 1.0), ("x12", 4.0), ("x21", 3.0), ("x22", 1.5)):
            inst.add_variable(name, 0, 1, cost, binary=True)
        inst.add_row("s1", [("x11", 1.0), ("x12", 1.0)], "=", 1.0)
        inst.add_row("s2", [("x21", 1.0), ("x22", 1.0)], "=", 1.0)
        inst.add_row("d1", [("x11", 1.0), ("x21", 1.0)], "=", 1.0)
        inst.add_row("d2", [("x12", 1.0), ("x22", 1.0)], "=", 1.0)
        sol = solve_mip(inst, SolveOptions(mip_gap=0.0))
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(2.5)
        assert sol.node_count == 1

    def test_infeasible(self):
        inst = MilpInstance()
        inst.add_variable("a", 0, 1, 1.0, binary=True)
        inst.add_row("no", [("a", 1.0)], ">=", 2.0)
        assert solve_mip(inst).status == "infeasible"

    def test_objective_constant_carried(self):
        inst = knapsack()
        inst.obj_constant = 10.0
        sol = solve_mip(inst, SolveOptions(mip_gap=0.0))
        assert sol.objective == pytest.approx(7.0)
        assert sol.bound == pytest.approx(7.0)

    def test_matches_enumeration_on_random_instances(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            inst = random_instance(rng, max_binaries=8, max_continuous=10)
            sol = solve_mip(inst, SolveOptions(mip_gap=0.0))
            oracle_obj, _ = brute_force_mip(inst)
            if oracle_obj is None:
                assert sol.status in ("infeasible", "no-solution")
            else:
                assert sol.status == "optimal"
                assert sol.objective == pytest.approx(
                    oracle_obj, rel=1e-6, abs=1e-6)

    def test_determinism(self):
        rng = np.random.default_rng(7)
        inst = random_instance(rng, max_binaries=10, max_continuous=12)
        a = solve_mip(inst, SolveOptions(seed=3))
        b = solve_mip(inst, SolveOptions(seed=3))
        assert a.objective == b.objective
        assert np.array_equal(a.values, b.values)

    def test_bound_on_correct_side(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            inst = random_instance(rng)
            sol = solve_mip(inst, SolveOptions(mip_gap=0.05))
            if sol.has_values:
                assert sol.bound <= sol.objective + 1e-6 * max(1, abs(sol.objective))


class TestValidation:
    def test_duplicate_variable(self):
        inst = MilpInstance()
        inst.add_variable("x")
        with pytest.raises(InstanceError):
            inst.add_variable("x")

    def test_unknown_variable_in_row(self):
        inst = MilpInstance()
        inst.add_variable("x")
        with pytest.raises(InstanceError, match="unknown variable"):
            inst.add_row("r", [("y", 1.0)], "<=", 1.0)

    def test_nan_coefficient(self):
        inst = MilpInstance()
        inst.add_variable("x")
        with pytest.raises(InstanceError):
            inst.add_row("r", [("x", float("nan"))], "<=", 1.0)

    def test_binary_bounds(self):
        inst = MilpInstance()
        with pytest.raises(InstanceError):
            inst.add_variable("b", 0, 2, binary=True)

    def test_bad_options(self):
        with pytest.raises(InstanceError):
            SolveOptions(mip_gap=-0.1)
        with pytest.raises(InstanceError):
            SolveOptions(branching="widest")


class TestMpsBridge:
    def test_export_structure(self, tmp_path):
        path = tmp_path / "knap.mps"
        export_mps(knapsack(), path)
        text = path.read_text()
        lines = text.splitlines()
        assert lines[0].startswith("NAME")
        assert "ROWS" in lines and "COLUMNS" in lines and "ENDATA" in lines
        assert sum(1 for l in lines if l.startswith(" L  ")) == 1
        assert "'INTORG'" in text
        assert sum(1 for l in lines if l.startswith(" BV ")) == 2
        # two mangled columns present
        assert "C0000001" in text and "C0000002" in text
        assert (tmp_path / "knap.mps.names.json").exists()

    def test_round_trip_objective(self, tmp_path):
        inst = knapsack()
        mps = tmp_path / "rt.mps"
        name_map = export_mps(inst, mps)
        solved = solve_mip(inst, SolveOptions(mip_gap=0.0))
        sol_file = tmp_path / "rt.sol"
        write_solution_file(inst, solved, sol_file, mangled=True)
        imported = import_solution(sol_file, inst, name_map_path=name_map)
        assert imported.objective == pytest.approx(solved.objective)
        assert imported.status == "imported"

    def test_import_original_names(self, tmp_path):
        inst = knapsack()
        sol_file = tmp_path / "plain.sol"
        sol_file.write_text("# comment line\na 1\nb 0\n")
        imported = import_solution(sol_file, inst)
        assert imported.objective == pytest.approx(-3.0)

    def test_alien_variable_rejected(self, tmp_path):
        inst = knapsack()
        sol_file = tmp_path / "alien.sol"
        sol_file.write_text("a 1\nzz 0\n")
        with pytest.raises(InstanceError, match="zz"):
            import_solution(sol_file, inst)

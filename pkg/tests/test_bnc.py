import dataclasses
import re
from types import SimpleNamespace

import numpy as np
import pytest

from pdpcd.bnc import (INFEASIBLE, LIMIT_FEASIBLE, LIMIT_NO_SOLUTION, OPTIMAL, SolveOptions,
                       check_integrality, relative_gap, solve)
from pdpcd.generator import generate_instance
from pdpcd.instance import make_instance
from pdpcd.oracle import brute_force_solve
from pdpcd.validator import validate


def _fake(values, priority):
    model = SimpleNamespace(binaries=np.arange(len(values)), priority=np.array(priority))
    return SimpleNamespace(x=np.array(values, dtype=float)), model


def test_integral_point_has_no_branching_variable():
    lp, model = _fake([0.0, 1.0, 1e-7, 1 - 1e-7], [0, 0, 1, 2])
    assert check_integrality(lp, model) is None


def test_branching_prefers_routing_class():
    # the flag (class 1) is more fractional, but routing variables come first
    lp, model = _fake([0.9, 0.5, 0.2], [0, 1, 0])
    assert check_integrality(lp, model) == 2


def test_branching_tie_takes_lowest_index():
    lp, model = _fake([1.0, 0.25, 0.75, 0.25], [0, 0, 0, 0])
    assert check_integrality(lp, model) == 1


def test_branching_falls_through_classes():
    lp, model = _fake([1.0, 0.0, 0.4, 0.5], [0, 1, 2, 2])
    assert check_integrality(lp, model) == 3


def test_relative_gap():
    assert relative_gap(100.0, 99.0) == pytest.approx(0.01)
    assert relative_gap(0.5, 0.0) == pytest.approx(0.5)
    assert relative_gap(10.0, 11.0) == 0.0
    assert relative_gap(float("inf"), 1.0) == float("inf")


def test_single_request():
    inst = make_instance(
        "one", (0.0, 0.0), [(3.0, 4.0, 2, 0, 100)], [(6.0, 8.0, 0, 200)],
        vehicles=[(5, 200)], depot_window=(0, 200), fixed_time=1, per_unit_time=1,
        max_ride_time=200)
    res = solve(inst, log_every=0)
    assert res.status == OPTIMAL
    assert res.objective == pytest.approx(30.0)
    assert res.gap == 0.0
    assert validate(inst, res.solution).passed


def test_toy_solution(toy):
    res = solve(toy, log_every=0)
    assert res.status == OPTIMAL
    assert res.objective == pytest.approx(1101.234, abs=1e-6)
    assert res.root_bound == pytest.approx(1101.234, abs=1e-6)
    # pickup and delivery costs separate, so which vehicle drives which
    # delivery route is not unique
    o1, o2, o3, o4 = toy.o1, toy.o2, toy.o3, toy.o4
    assert set(map(tuple, res.solution.pickup_routes)) == {(o1, 3, 1, o2), (o1, 2, 4, o2)}
    assert set(map(tuple, res.solution.delivery_routes)) == {(o3, 7, 5, o4), (o3, 6, 8, o4)}


@pytest.mark.parametrize("seed", range(4))
def test_matches_oracle(seed):
    inst = generate_instance(n=3, num_vehicles=2, seed=200 + seed)
    res = solve(inst, log_every=0)
    ref = brute_force_solve(inst)
    assert res.status == ref.status == OPTIMAL
    assert res.objective == pytest.approx(ref.objective, rel=1e-6)
    assert res.bound <= res.objective + 1e-9
    assert validate(inst, res.solution).passed


def test_cuts_do_not_change_the_optimum():
    inst = generate_instance(n=4, num_vehicles=2, seed=3)
    on = solve(inst, log_every=0)
    off = solve(inst, log_every=0, enable_cuts=False)
    assert off.objective == pytest.approx(on.objective, rel=1e-6)
    assert off.num_constraints < on.num_constraints


def test_more_vehicles_than_requests():
    inst = make_instance(
        "few", (0.0, 0.0), [(1.0, 0.0, 1, 0, 100)], [(2.0, 0.0, 0, 100)],
        vehicles=[(5, 100), (5, 100)], depot_window=(0, 100), fixed_time=0,
        per_unit_time=0, max_ride_time=100)
    res = solve(inst)
    assert res.status == INFEASIBLE
    assert res.reason.startswith("more vehicles (2) than requests (1)")
    assert res.solution is None and res.nodes == 0


def test_oversized_demand():
    inst = make_instance(
        "big", (0.0, 0.0), [(1.0, 0.0, 9, 0, 100)], [(2.0, 0.0, 0, 100)],
        vehicles=[(5, 100)], depot_window=(0, 100), fixed_time=0,
        per_unit_time=0, max_ride_time=100)
    res = solve(inst)
    assert res.status == INFEASIBLE
    assert res.reason == "some demand exceeds every vehicle capacity"


def test_zero_ride_time_exhausts_tree(toy):
    res = solve(dataclasses.replace(toy, max_ride_time=0.0), log_every=0)
    assert res.status == INFEASIBLE
    assert res.reason == "search tree exhausted without a feasible solution"


def test_invalid_instance_raises():
    inst = make_instance(
        "neg", (0.0, 0.0), [(1.0, 0.0, -1, 0, 100)], [(2.0, 0.0, 0, 100)],
        vehicles=[(5, 100)], depot_window=(0, 100), fixed_time=0,
        per_unit_time=0, max_ride_time=100)
    with pytest.raises(ValueError, match="negative demand"):
        solve(inst)


def test_node_limit():
    inst = generate_instance(n=4, num_vehicles=2, seed=4)
    res = solve(inst, node_limit=5, log_every=0)
    assert res.status in (LIMIT_FEASIBLE, LIMIT_NO_SOLUTION)
    assert res.reason == "node limit"
    assert res.nodes == 5
    assert np.isfinite(res.bound)
    if res.solution is not None:
        assert res.bound <= res.objective
        assert validate(inst, res.solution).passed


def test_time_limit():
    inst = generate_instance(n=5, num_vehicles=2, seed=0)
    res = solve(inst, time_limit_s=0.0, log_every=0)
    assert res.status == LIMIT_NO_SOLUTION
    assert res.reason == "time limit"
    assert res.summary()["ost"] is None


def test_parallel_matches_serial():
    inst = generate_instance(n=4, num_vehicles=2, seed=0)
    serial = solve(inst, log_every=0)
    par = solve(inst, log_every=0, threads=3)
    assert par.status == OPTIMAL
    assert par.objective == pytest.approx(serial.objective, rel=1e-6)
    assert validate(inst, par.solution).passed


def test_options_object_not_mutated(toy):
    opts = SolveOptions(log_every=0)
    solve(toy, opts, gap_tol=1e-3)
    assert opts.gap_tol == 1e-6


LINE = re.compile(r"^[ *]\s*\d+\s+\d+\s+(-|\d+\.\d{6})\s+(-|\d+\.\d{6})\s+(-|\d+\.\d{4}%)\s+\d+\.\d{2}s$")


def test_log_format():
    inst = generate_instance(n=4, num_vehicles=2, seed=3)
    res = solve(inst, log_every=10)
    assert res.log[0].startswith("model: 172 variables (82 binary), 349 constraints")
    assert res.log[1].split() == ["nodes", "open", "incumbent", "bound", "gap", "time"]
    body = res.log[2:-1]
    assert all(LINE.match(line) for line in body), body
    assert any(line.startswith("*") for line in body)
    assert res.log[-1] == "status: optimal"
    assert body[-1].split()[0] == str(res.nodes)


def test_summary_fields(toy):
    s = solve(toy, log_every=0).summary()
    assert set(s) == {"status", "CNS", "NE", "CPU", "ost", "bound", "gap", "variables",
                      "lp_iterations", "root_bound", "reason"}
    assert s["status"] == "optimal" and s["gap"] == 0.0

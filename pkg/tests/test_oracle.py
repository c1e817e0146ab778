import dataclasses
from math import comb, factorial

import numpy as np
import pytest

from conftest import PUBLISHED_ROUTES
from pdpcd.generator import generate_instance, generate_with_witness
from pdpcd.instance import make_instance
from pdpcd.oracle import RouteStructure, brute_force_solve, enumerate_structures, schedule_feasible
from pdpcd.validator import validate


def _splits(n, K):
    """Number of ways to place n items into K nonempty ordered lists."""
    if K == 1:
        return factorial(n)
    return sum(comb(n, j) * factorial(j) * _splits(n - j, K - 1) for j in range(1, n - K + 2))


@pytest.mark.parametrize("n,K", [(1, 1), (2, 1), (2, 2), (3, 2), (4, 2)])
def test_structure_count(n, K):
    inst = generate_instance(n=n, num_vehicles=K, seed=0)
    structures = list(enumerate_structures(inst))
    assert len(structures) == _splits(n, K) ** 2
    assert len(set(structures)) == len(structures)


def test_two_requests_two_vehicles():
    inst = generate_instance(n=2, num_vehicles=2, seed=0)
    got = list(enumerate_structures(inst))
    assert got == [
        RouteStructure(((1,), (2,)), ((3,), (4,))),
        RouteStructure(((1,), (2,)), ((4,), (3,))),
        RouteStructure(((2,), (1,)), ((3,), (4,))),
        RouteStructure(((2,), (1,)), ((4,), (3,))),
    ]
    flags = got[1].flags(2)
    assert flags[0].tolist() == [[1, 0], [0, 1]]
    assert flags[1].tolist() == [[0, 1], [1, 0]]


def test_single_request_closed_form():
    inst = make_instance(
        "one", (0.0, 0.0), [(3.0, 4.0, 2, 0, 100)], [(6.0, 8.0, 0, 200)],
        vehicles=[(5, 200)], depot_window=(0, 200), fixed_time=1, per_unit_time=1,
        max_ride_time=200)
    res = brute_force_solve(inst)
    assert res.status == "optimal"
    assert res.objective == pytest.approx(5 + 5 + 10 + 10)
    sol = res.solution
    # earliest schedule: pickup at 5, back at 10, unload 3, drive 10
    assert sol.service_start[0][1] == pytest.approx(5.0)
    assert sol.service_start[0][inst.o3] == pytest.approx(10.0)
    assert sol.service_start[0][2] == pytest.approx(20.0)
    assert validate(inst, sol).passed


def test_published_structure_is_schedulable(toy):
    (p1, d1), (p2, d2) = PUBLISHED_ROUTES
    sol = schedule_feasible(toy, RouteStructure((p1, p2), (d1, d2)))
    assert sol is not None
    sol.cost = 1101.234
    assert validate(toy, sol).passed


def test_toy_optimum(toy):
    res = brute_force_solve(toy)
    assert res.status == "optimal"
    assert res.objective == pytest.approx(1101.234, abs=1e-9)
    assert validate(toy, res.solution).passed


def test_zero_ride_time_infeasible(toy):
    tight = dataclasses.replace(toy, max_ride_time=0.0)
    res = brute_force_solve(tight)
    assert res.status == "infeasible"
    assert res.reason == "no route structure admits a feasible schedule"


def test_fewer_requests_than_vehicles():
    inst = make_instance(
        "few", (0.0, 0.0), [(1.0, 0.0, 1, 0, 100)], [(2.0, 0.0, 0, 100)],
        vehicles=[(5, 100), (5, 100)], depot_window=(0, 100), fixed_time=0,
        per_unit_time=0, max_ride_time=100)
    res = brute_force_solve(inst)
    assert res.status == "infeasible" and "more vehicles" in res.reason


def test_refuses_large_instances():
    inst = generate_instance(n=6, num_vehicles=2, seed=0)
    with pytest.raises(ValueError, match="n=6"):
        brute_force_solve(inst)


def test_transfer_timing_order():
    seen = 0
    for seed in range(20):
        inst = generate_instance(n=3, num_vehicles=2, seed=seed)
        res = brute_force_solve(inst)
        if res.status != "optimal":
            continue
        sol = res.solution
        for i in range(inst.n):
            a = np.flatnonzero(sol.unload[:, i])
            b = np.flatnonzero(sol.reload[:, i])
            if a.size:
                seen += 1
                assert sol.reload_start[b[0]] >= sol.unload_time[i] - 1e-9
                assert sol.unload_time[i] >= sol.unload_done[a[0]] - 1e-9
    assert seen > 0


@pytest.mark.parametrize("seed", range(10))
def test_oracle_solution_validates_and_beats_witness(seed):
    inst, witness = generate_with_witness(n=3, num_vehicles=2, seed=seed)
    res = brute_force_solve(inst)
    assert res.status == "optimal"
    rep = validate(inst, res.solution)
    assert rep.passed, rep.to_table()
    assert res.objective <= witness.cost + 1e-9
    assert res.nodes >= 1

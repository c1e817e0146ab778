import json

import numpy as np
import pytest

from pdpcd.generator import generate_instance
from pdpcd.instance import (InstanceFormatError, build_arc_set, eliminate_infeasible_arcs,
                            hard_errors, instance_to_dict, load_instance, make_instance,
                            same_instance, shortest_paths, store_instance, validate_instance)


def _line(n, **kw):
    """n requests on a line, wide windows; keyword overrides go to make_instance."""
    args = dict(
        depot_xy=(0.0, 0.0),
        pickups=[(float(i), 0.0, 1, 0, 1e9) for i in range(1, n + 1)],
        deliveries=[(float(-i), 0.0, 0, 1e9) for i in range(1, n + 1)],
        vehicles=[(10, 1e9)], depot_window=(0, 1e9),
        fixed_time=0, per_unit_time=0, max_ride_time=1e9)
    args.update(kw)
    return make_instance("line", **args)


@pytest.mark.parametrize("n", range(1, 13))
def test_arc_count_before_elimination(n):
    arcs = build_arc_set(_line(n))
    assert len(arcs) == 4 * n + 2 * n * (n - 1)


def test_minimal_arc_set():
    inst = _line(1)
    arcs = build_arc_set(inst)
    assert set(arcs.arcs()) == {(inst.o1, 1), (1, inst.o2), (inst.o3, 2), (2, inst.o4)}


@pytest.mark.parametrize("n", [2, 3, 5])
def test_arc_set_shape(n):
    inst = _line(n)
    arcs = set(build_arc_set(inst).arcs())
    P, D = set(inst.pickups), set(inst.deliveries)
    for i in P:
        assert (i, n + i) not in arcs
    for a, b in arcs:
        assert a != b
        assert a != inst.o2 and b != inst.o1 and b != inst.o3 and a != inst.o4
        if a in P or a == inst.o1:
            assert b in P or b == inst.o2
        if a in D or a == inst.o3:
            assert b in D or b == inst.o4


def test_arc_times_are_euclidean():
    inst = _line(2)
    arcs = build_arc_set(inst)
    a = arcs.index[(1, 2)]
    assert arcs.time[a] == 1.0
    a = arcs.index[(inst.o3, 4)]
    assert arcs.time[a] == 2.0
    assert np.array_equal(arcs.cost, arcs.time)


def test_toy_elimination_removes_late_arc(toy):
    arcs = eliminate_infeasible_arcs(toy, build_arc_set(toy))
    assert (4, 3) not in arcs
    for a, b in arcs.arcs():
        assert toy.earliest(a) + toy.t(a, b) <= toy.latest(b)


def test_vacuous_windows_remove_nothing():
    inst = _line(3)
    full = build_arc_set(inst)
    reduced = eliminate_infeasible_arcs(inst, full)
    assert reduced.arcs() == full.arcs()
    assert reduced.conflicts == ()


def _conflict_instance():
    # matrix order: depot, pickups 1 2, deliveries 3 4
    big = 1000.0
    t = np.full((5, 5), big)
    np.fill_diagonal(t, 0.0)
    t[1, 2], t[2, 0], t[0, 4], t[4, 3] = 200, 150, 150, 100
    t[0, 1] = t[0, 2] = t[1, 0] = 100
    t[0, 3] = t[3, 0] = t[4, 0] = 100
    t[2, 1] = t[3, 4] = 100
    return make_instance(
        "conflict", (None, None),
        [(None, None, 1, 0, 5000), (None, None, 1, 0, 5000)],
        [(None, None, 0, 5000), (None, None, 0, 5000)],
        vehicles=[(10, 5000)], depot_window=(0, 5000), fixed_time=0, per_unit_time=0,
        max_ride_time=550, travel_time_matrix=t)


def test_conflict_pair_recorded():
    inst = _conflict_instance()
    arcs = eliminate_infeasible_arcs(inst, build_arc_set(inst))
    pairs = set(arcs.conflict_pairs())
    assert ((1, 2), (4, 3)) in pairs
    # 100 + 100 + 100 + 100 <= 550: the direct arcs do not conflict
    assert ((1, inst.o2), (inst.o3, 3)) not in pairs


@pytest.mark.parametrize("seed", range(8))
def test_elimination_idempotent_and_monotone(seed):
    inst = generate_instance(n=4, num_vehicles=2, seed=seed, window_slack=20)
    full = build_arc_set(inst)
    once = eliminate_infeasible_arcs(inst, full)
    twice = eliminate_infeasible_arcs(inst, once)
    assert set(once.arcs()) <= set(full.arcs())
    assert once.arcs() == twice.arcs()
    assert once.conflict_pairs() == twice.conflict_pairs()


def test_shortest_paths_respect_triangle(toy):
    arcs = build_arc_set(toy)
    sp = shortest_paths(toy, arcs)
    assert sp[toy.o1, toy.o2] == pytest.approx(min(toy.t(0, i) + toy.t(i, 0) for i in toy.pickups))
    assert np.isinf(sp[toy.o2, toy.o1])


def test_toy_parameters_valid(toy):
    assert validate_instance(toy) == []
    assert toy.max_ride_time == 550 and list(toy.max_duration) == [480, 480]
    assert list(toy.capacity) == [20, 20] and list(toy.demand) == [16, 10, 4, 4]
    assert (toy.fixed_time, toy.per_unit_time) == (10, 1)


def test_negative_demand_is_hard_error():
    inst = _line(2, pickups=[(1.0, 0.0, -1, 0, 1e9), (2.0, 0.0, 1, 0, 1e9)])
    errs = hard_errors(validate_instance(inst))
    assert any("negative demand" in d.message for d in errs)


def test_inverted_window_is_hard_error():
    inst = _line(1, pickups=[(1.0, 0.0, 1, 50, 10)])
    errs = hard_errors(validate_instance(inst))
    assert any("e=50" in d.message for d in errs)


def test_more_vehicles_than_requests_warns():
    inst = _line(1, vehicles=[(10, 1e9), (10, 1e9)])
    diags = validate_instance(inst)
    assert [d.severity for d in diags] == ["warning"]
    assert diags[0].message == "more vehicles than requests: model infeasible by arc-set structure"


def test_fleet_capacity_warning():
    inst = _line(2, pickups=[(1.0, 0.0, 8, 0, 1e9), (2.0, 0.0, 8, 0, 1e9)])
    assert any("exceeds fleet capacity" in d.message for d in validate_instance(inst))


def test_round_trip(toy):
    data = store_instance(toy)
    back = load_instance(data)
    assert same_instance(toy, back)
    assert store_instance(back) == data


def test_round_trip_with_coordinates():
    inst = generate_instance(n=3, num_vehicles=2, seed=11)
    back = load_instance(store_instance(inst))
    assert same_instance(inst, back)
    assert back.coords is not None and not back.explicit_travel_time


def test_toy_file_fields(toy):
    doc = json.loads(store_instance(toy))
    inst = load_instance(json.dumps(doc).encode())
    assert inst.max_ride_time == 550
    assert list(inst.max_duration) == [480, 480]
    assert tuple(inst.windows[0]) == (360, 1320)


def test_empty_file_rejected():
    with pytest.raises(InstanceFormatError):
        load_instance(b"")


def test_dimension_mismatch_rejected(toy):
    doc = instance_to_dict(toy)
    doc["deliveries"].append(dict(doc["deliveries"][-1], id=9))
    with pytest.raises(InstanceFormatError, match="deliver"):
        load_instance(json.dumps(doc))


def test_unknown_field_rejected_with_path(toy):
    doc = instance_to_dict(toy)
    doc["pickups"][0]["colour"] = "red"
    with pytest.raises(InstanceFormatError, match="pickups"):
        load_instance(json.dumps(doc))


def test_matrix_size_checked(toy):
    doc = instance_to_dict(toy)
    doc["travel_time_matrix"] = doc["travel_time_matrix"][:-1]
    with pytest.raises(InstanceFormatError):
        load_instance(json.dumps(doc))


def test_missing_coordinates_and_matrix_rejected(toy):
    doc = instance_to_dict(toy)
    del doc["travel_time_matrix"]
    with pytest.raises(InstanceFormatError):
        load_instance(json.dumps(doc))


def test_non_finite_matrix_entry_rejected():
    t = np.ones((3, 3))
    t[0, 1] = np.inf
    inst = make_instance("bad", (None, None), [(None, None, 1, 0, 10)], [(None, None, 0, 10)],
                         vehicles=[(5, 10)], depot_window=(0, 10), fixed_time=0,
                         per_unit_time=0, max_ride_time=10, travel_time_matrix=t)
    with pytest.raises(InstanceFormatError):
        build_arc_set(inst)

"""Independent solution checker.

Everything here is recomputed from the instance data and the routes/schedule
of a :class:`~pdpcd.solution.Solution`; the MILP is never consulted, so the
checker catches formulation bugs as well as solver bugs.
"""
from dataclasses import dataclass, field
import json

import numpy as np

from .instance import full_arc_list
from .solution import SolutionFormatError

TIME_TOL = 1e-6
COST_RTOL = 1e-6

FAMILIES = ("eq2", "eq3", "eq4", "eq5", "eq6", "eq7", "eq8", "eq9", "eq10", "eq11",
            "eq12", "eq13", "eq14", "eq15", "eq16", "eq17", "eq18", "eq19", "eq20",
            "eq21", "eq22")


@dataclass(frozen=True)
class Violation:
    entity: str
    lhs: float
    rhs: float
    slack: float  # negative: amount by which the constraint is violated


@dataclass
class FamilyResult:
    checked: int = 0
    violations: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.violations


@dataclass
class ValidationReport:
    families: dict
    recomputed_cost: float
    stored_cost: float
    ride_times: np.ndarray

    @property
    def cost_matches(self):
        return abs(self.recomputed_cost - self.stored_cost) <= COST_RTOL * max(1.0, abs(self.stored_cost))

    @property
    def passed(self):
        return self.cost_matches and all(f.passed for f in self.families.values())

    def failed_families(self):
        return [name for name, f in self.families.items() if not f.passed]

    def num_violations(self):
        return sum(len(f.violations) for f in self.families.values())

    def to_dict(self):
        return {
            "verdict": "pass" if self.passed else "fail",
            "recomputed_cost": self.recomputed_cost,
            "stored_cost": self.stored_cost,
            "cost_matches": self.cost_matches,
            "ride_times": [float(r) for r in self.ride_times],
            "families": {
                name: {"passed": f.passed, "checked": f.checked,
                       "violations": [vars(v) for v in f.violations]}
                for name, f in self.families.items()},
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    def to_table(self):
        lines = [f"{'family':<8} {'checked':>7} {'status':<6} detail"]
        for name, f in self.families.items():
            detail = ""
            if f.violations:
                v = f.violations[0]
                detail = f"{v.entity}: lhs={v.lhs:.3f} rhs={v.rhs:.3f} slack={v.slack:.3f}"
                if len(f.violations) > 1:
                    detail += f" (+{len(f.violations) - 1} more)"
            lines.append(f"{name:<8} {f.checked:>7} {'pass' if f.passed else 'FAIL':<6} {detail}")
        lines.append(f"cost: stored {self.stored_cost:.3f}, recomputed {self.recomputed_cost:.3f}"
                     f" ({'match' if self.cost_matches else 'MISMATCH'})")
        lines.append("ride times: " + ", ".join(
            f"r_{i + 1}={r:.3f}" for i, r in enumerate(self.ride_times)))
        lines.append(f"verdict: {'pass' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def _check_structure(inst, sol):
    K = inst.num_vehicles
    if sol.num_vehicles != K or len(sol.delivery_routes) != K or len(sol.service_start) != K:
        raise SolutionFormatError(f"expected routes and schedules for {K} vehicles")
    n = inst.n
    for name, arr, shape in (("unload", sol.unload, (K, n)), ("reload", sol.reload, (K, n)),
                             ("unload_any", sol.unload_any, (K,)),
                             ("reload_any", sol.reload_any, (K,)),
                             ("unload_done", sol.unload_done, (K,)),
                             ("reload_start", sol.reload_start, (K,)),
                             ("unload_time", sol.unload_time, (n,)),
                             ("ride_time", sol.ride_time, (n,))):
        if np.shape(arr) != shape:
            raise SolutionFormatError(f"{name} has shape {np.shape(arr)}, expected {shape}")
    top = 2 * n + 4
    for k in range(K):
        for route in (sol.pickup_routes[k], sol.delivery_routes[k]):
            if len(route) < 2:
                raise SolutionFormatError(f"vehicle {k + 1}: route {route} too short")
            for v in route:
                if not 1 <= v <= top:
                    raise SolutionFormatError(f"vehicle {k + 1}: unknown vertex {v}")
                if v not in sol.service_start[k]:
                    raise SolutionFormatError(
                        f"vehicle {k + 1}: no service start time for vertex {inst.label(v)}")


def compute_ride_times(inst, sol):
    """Ride time of every request from the serve times of its serving vehicles."""
    r = np.zeros(inst.n)
    for i in inst.pickups:
        tp = sol.serve_time(i)
        td = sol.serve_time(inst.n + i)
        if tp is None or td is None:
            raise SolutionFormatError(f"request {i}: missing serve time at pickup or delivery")
        r[i - 1] = td - tp
    return r


def evaluate_cost(inst, sol):
    """Sum of arc costs over every pickup and delivery route."""
    allowed = set(full_arc_list(inst))
    total = 0.0
    for k in range(sol.num_vehicles):
        for route in (sol.pickup_routes[k], sol.delivery_routes[k]):
            for a, b in zip(route, route[1:]):
                if (a, b) not in allowed:
                    raise SolutionFormatError(
                        f"vehicle {k + 1}: ({inst.label(a)},{inst.label(b)}) is not an arc")
                total += inst.c(a, b)
    return total


def validate(inst, sol, tol=TIME_TOL):
    """Check ``sol`` against every constraint family directly from ``inst``."""
    _check_structure(inst, sol)
    fam = {name: FamilyResult() for name in FAMILIES}
    n, K = inst.n, inst.num_vehicles
    P = set(inst.pickups)
    D = set(inst.deliveries)
    arcs = set(full_arc_list(inst))
    a_fix, beta, L = inst.fixed_time, inst.per_unit_time, inst.max_ride_time

    def check(name, entity, lhs, rhs, sense):
        fam[name].checked += 1
        if sense == "<=":
            slack = rhs - lhs
        elif sense == ">=":
            slack = lhs - rhs
        else:
            slack = -abs(lhs - rhs)
        if slack < -tol:
            fam[name].violations.append(Violation(entity, float(lhs), float(rhs), float(slack)))

    # eq2: each request vertex visited exactly once, on the right route type
    count = {v: 0 for v in P | D}
    for k in range(K):
        for v in sol.pickup_routes[k][1:-1]:
            if v in P:
                count[v] += 1
        for v in sol.delivery_routes[k][1:-1]:
            if v in D:
                count[v] += 1
    for v in sorted(count):
        check("eq2", f"vertex {v}", count[v], 1, "=")

    starts = sol.service_start
    for k in range(K):
        pr, dr = sol.pickup_routes[k], sol.delivery_routes[k]
        veh = f"vehicle {k + 1}"
        # eq3/eq4: loads
        check("eq3", veh, sum(inst.q(v) for v in pr if v in P), inst.capacity[k], "<=")
        check("eq4", veh, sum(inst.q(v) for v in dr if v in D), inst.capacity[k], "<=")
        # eq5/eq6: route endpoints
        check("eq5", f"{veh} pickup start", float(pr[0] == inst.o1), 1, "=")
        check("eq5", f"{veh} delivery start", float(dr[0] == inst.o3), 1, "=")
        check("eq6", f"{veh} pickup end", float(pr[-1] == inst.o2), 1, "=")
        check("eq6", f"{veh} delivery end", float(dr[-1] == inst.o4), 1, "=")
        # eq7: each route is a simple path over existing arcs
        for kind, route in (("pickup", pr), ("delivery", dr)):
            check("eq7", f"{veh} {kind} route repeats a vertex",
                  len(set(route)), len(route), "=")
            for a, b in zip(route, route[1:]):
                check("eq7", f"{veh} arc ({inst.label(a)},{inst.label(b)})",
                      float((a, b) in arcs), 1, "=")
                # eq8: time propagation along traversed arcs
                check("eq8", f"{veh} arc ({inst.label(a)},{inst.label(b)})",
                      starts[k][b], starts[k][a] + inst.t(a, b), ">=")
        # eq9: windows at visited vertices, depot copies included
        for v in pr + dr:
            check("eq9", f"{veh} vertex {inst.label(v)} (early)", starts[k][v], inst.earliest(v), ">=")
            check("eq9", f"{veh} vertex {inst.label(v)} (late)", starts[k][v], inst.latest(v), "<=")

        # eq10/eq11: transfer flags follow the four-case table
        picked = set(pr[1:-1])
        delivered = set(dr[1:-1])
        for i in inst.pickups:
            eta, theta = int(sol.unload[k, i - 1]), int(sol.reload[k, i - 1])
            want = int(i in picked) - int(n + i in delivered)
            check("eq10", f"{veh} request {i}", eta - theta, want, "=")
            check("eq11", f"{veh} request {i}", eta + theta, 1, "<=")
            if eta not in (0, 1) or theta not in (0, 1):
                check("eq11", f"{veh} request {i} non-binary flag", 1, 0, "=")
        # eq12/eq13: indicators
        check("eq12", veh, int(sol.unload_any[k]), int(sol.unload[k].any()), "=")
        check("eq13", veh, int(sol.reload_any[k]), int(sol.reload[k].any()), "=")
        # eq14-eq16: crossdock timing
        unload_load = float(inst.demand @ sol.unload[k])
        reload_load = float(inst.demand @ sol.reload[k])
        tau, w = sol.unload_done[k], sol.reload_start[k]
        check("eq14", veh, tau, starts[k][pr[-1]] + a_fix * sol.unload_any[k] + beta * unload_load, "=")
        check("eq15", veh, w, tau, ">=")
        check("eq16", veh, starts[k][dr[0]], w + a_fix * sol.reload_any[k] + beta * reload_load, "=")
        # eq19/eq20: route durations
        check("eq19", veh, starts[k][pr[-1]] - starts[k][pr[0]], inst.max_duration[k], "<=")
        check("eq20", veh, starts[k][dr[-1]] - starts[k][dr[0]], inst.max_duration[k], "<=")

    # eq17/eq18: synchronisation across vehicles through the unload times z_i
    for k in range(K):
        for i in inst.pickups:
            if sol.reload[k, i - 1]:
                check("eq17", f"vehicle {k + 1} request {i}",
                      sol.reload_start[k], sol.unload_time[i - 1], ">=")
            if sol.unload[k, i - 1]:
                check("eq18", f"vehicle {k + 1} request {i}",
                      sol.unload_time[i - 1], sol.unload_done[k], ">=")

    # eq21/eq22: ride times recomputed from serve times
    if fam["eq2"].passed:
        ride = compute_ride_times(inst, sol)
    else:
        ride = np.full(n, np.nan)
        for i in inst.pickups:
            tp, td = sol.serve_time(i), sol.serve_time(n + i)
            if tp is not None and td is not None:
                ride[i - 1] = td - tp
    for i in inst.pickups:
        r = ride[i - 1]
        if np.isnan(r):
            check("eq21", f"request {i}: not served", 0, 1, "=")
            continue
        check("eq21", f"request {i}", sol.ride_time[i - 1], r, "=")
        check("eq22", f"request {i}", r, L, "<=")
        check("eq22", f"request {i} (nonnegative)", r, 0.0, ">=")

    try:
        cost = evaluate_cost(inst, sol)
    except SolutionFormatError:
        cost = float("nan")
    return ValidationReport(fam, cost, float(sol.cost), ride)

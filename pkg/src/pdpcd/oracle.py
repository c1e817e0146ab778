"""Exhaustive reference solver for tiny instances.

Every assignment of pickups and deliveries to vehicles, in every visiting
order, is a candidate route structure.  Route costs separate into a pickup
part and a delivery part, so the two lists are sorted once and candidate
pairs are visited in nondecreasing total cost; the first pair whose timing
LP is feasible is optimal.  Structures never come from the MILP or the
arc-elimination step, which keeps this an independent check on both.
"""
from dataclasses import dataclass
import heapq
from itertools import permutations, product
import time

import numpy as np
import scipy.sparse as sp

from .bnc import INFEASIBLE, OPTIMAL, SolveResult
from .lp import DualSimplex
from .solution import Solution

MAX_REQUESTS = 5


@dataclass(frozen=True)
class RouteStructure:
    """Visiting order of every vehicle: ``pickups[k]`` and ``deliveries[k]``
    hold pickup ids and delivery vertex ids (``n+i``) respectively."""

    pickups: tuple
    deliveries: tuple

    def flags(self, n):
        """Unload and reload flags ``(K, n)`` from the four-case rule."""
        K = len(self.pickups)
        unload = np.zeros((K, n), dtype=int)
        reload = np.zeros((K, n), dtype=int)
        for k in range(K):
            picked = set(self.pickups[k])
            delivered = {v - n for v in self.deliveries[k]}
            for i in picked - delivered:
                unload[k, i - 1] = 1
            for i in delivered - picked:
                reload[k, i - 1] = 1
        return unload, reload


def _sequences(items, K):
    """All ways to split ``items`` into K nonempty ordered lists, lexicographically."""
    items = tuple(items)
    for assign in product(range(K), repeat=len(items)):
        groups = [[v for v, a in zip(items, assign) if a == k] for k in range(K)]
        if any(not g for g in groups):
            continue
        yield from product(*(permutations(g) for g in groups))


def enumerate_structures(inst):
    """Every route structure of ``inst`` in lexicographic order."""
    K = inst.num_vehicles
    deliveries = list(_sequences(inst.deliveries, K))
    for p in _sequences(inst.pickups, K):
        for d in deliveries:
            yield RouteStructure(p, d)


def _route_cost(inst, start, seq, end):
    path = (start, *seq, end)
    return sum(inst.c(a, b) for a, b in zip(path, path[1:]))


def _route_possible(inst, start, seq, end):
    """Earliest-arrival check on one route alone (necessary, not sufficient)."""
    u = inst.earliest(start)
    prev = start
    for v in (*seq, end):
        u = max(u + inst.t(prev, v), inst.earliest(v))
        if u > inst.latest(v) + 1e-9:
            return False
        prev = v
    return True


def _half_candidates(inst, pickup_side):
    """(cost, position, sequences) for every capacity-feasible half structure."""
    K = inst.num_vehicles
    items = inst.pickups if pickup_side else inst.deliveries
    start, end = (inst.o1, inst.o2) if pickup_side else (inst.o3, inst.o4)
    out = []
    for pos, seqs in enumerate(_sequences(items, K)):
        ok = True
        cost = 0.0
        for k, seq in enumerate(seqs):
            if sum(inst.q(v) for v in seq) > inst.capacity[k] + 1e-9:
                ok = False
                break
            if not _route_possible(inst, start, seq, end):
                ok = False
                break
            cost += _route_cost(inst, start, seq, end)
        if ok:
            out.append((cost, pos, seqs))
    out.sort()
    return out


class _TimingLp:
    def __init__(self):
        self.names = []
        self.lo = []
        self.hi = []
        self.obj = []
        self.rows = []

    def var(self, name, lo, hi, obj=0.0):
        self.names.append(name)
        self.lo.append(lo)
        self.hi.append(hi)
        self.obj.append(obj)
        return len(self.names) - 1

    def row(self, terms, lo, hi):
        self.rows.append((terms, lo, hi))

    def solve(self):
        data, ri, ci = [], [], []
        for r, (terms, _, _) in enumerate(self.rows):
            for c, v in terms:
                ri.append(r)
                ci.append(c)
                data.append(v)
        A = sp.csc_matrix((data, (ri, ci)), shape=(len(self.rows), len(self.names)))
        eng = DualSimplex(A, [r[1] for r in self.rows], [r[2] for r in self.rows],
                          self.lo, self.hi, self.obj)
        return eng.solve()


def schedule_feasible(inst, structure):
    """Find service times for a fixed route structure, or return ``None``.

    All timing rules are linear once routes and transfer flags are fixed, so
    a small LP decides feasibility; it minimises the sum of service starts,
    which yields an earliest-possible witness.
    """
    n, K = inst.n, inst.num_vehicles
    unload, reload = structure.flags(n)
    a, beta, L = inst.fixed_time, inst.per_unit_time, inst.max_ride_time
    top = inst.horizon
    lp = _TimingLp()
    u = []
    for k in range(K):
        uk = {}
        routes = ((inst.o1, structure.pickups[k], inst.o2),
                  (inst.o3, structure.deliveries[k], inst.o4))
        for start, seq, end in routes:
            path = (start, *seq, end)
            for v in path:
                uk[v] = lp.var(f"u[{k},{v}]", inst.earliest(v), inst.latest(v), 1.0)
            for i, j in zip(path, path[1:]):
                lp.row([(uk[j], 1.0), (uk[i], -1.0)], inst.t(i, j), np.inf)
            lp.row([(uk[end], 1.0), (uk[start], -1.0)], -np.inf, inst.max_duration[k])
        u.append(uk)
    tau = [lp.var(f"tau[{k}]", 0.0, top) for k in range(K)]
    w = [lp.var(f"w[{k}]", 0.0, top) for k in range(K)]
    z = [lp.var(f"z[{i}]", 0.0, top) for i in inst.pickups]
    for k in range(K):
        h_un = a * unload[k].any() + beta * float(inst.demand @ unload[k])
        h_re = a * reload[k].any() + beta * float(inst.demand @ reload[k])
        lp.row([(tau[k], 1.0), (u[k][inst.o2], -1.0)], h_un, h_un)
        lp.row([(w[k], 1.0), (tau[k], -1.0)], 0.0, np.inf)
        lp.row([(u[k][inst.o3], 1.0), (w[k], -1.0)], h_re, h_re)
        for i in inst.pickups:
            if reload[k, i - 1]:
                lp.row([(w[k], 1.0), (z[i - 1], -1.0)], 0.0, np.inf)
            if unload[k, i - 1]:
                lp.row([(z[i - 1], 1.0), (tau[k], -1.0)], 0.0, np.inf)
    pk = {i: k for k in range(K) for i in structure.pickups[k]}
    dk = {v - n: k for k in range(K) for v in structure.deliveries[k]}
    for i in inst.pickups:
        lp.row([(u[dk[i]][n + i], 1.0), (u[pk[i]][i], -1.0)], 0.0, L)

    res = lp.solve()
    if not res.optimal:
        return None
    x = res.x
    starts = [{v: float(x[c]) for v, c in uk.items()} for uk in u]
    ride = np.array([starts[dk[i]][n + i] - starts[pk[i]][i] for i in inst.pickups])
    tau_v = np.array([x[c] for c in tau])
    unload_time = np.array([x[z[i - 1]] if unload[:, i - 1].any() else tau_v[pk[i]]
                            for i in inst.pickups])
    return Solution(
        pickup_routes=[[inst.o1, *structure.pickups[k], inst.o2] for k in range(K)],
        delivery_routes=[[inst.o3, *structure.deliveries[k], inst.o4] for k in range(K)],
        service_start=starts, unload=unload, reload=reload,
        unload_any=unload.any(axis=1).astype(int), reload_any=reload.any(axis=1).astype(int),
        unload_done=tau_v, reload_start=np.array([x[c] for c in w]),
        unload_time=unload_time, ride_time=ride, cost=0.0)


def brute_force_solve(inst):
    """Exact optimum by exhaustive enumeration (``n <= 5``)."""
    if inst.n > MAX_REQUESTS:
        raise ValueError(f"brute-force enumeration refused for n={inst.n} "
                         f"(limit {MAX_REQUESTS})")
    t0 = time.perf_counter()
    K = inst.num_vehicles
    if inst.n < K:
        return SolveResult(INFEASIBLE, reason="more vehicles than requests",
                           wall_time=time.perf_counter() - t0)
    P = _half_candidates(inst, True)
    D = _half_candidates(inst, False)
    checked = 0
    if P and D:
        heap = [(P[0][0] + D[0][0], P[0][1], D[0][1], 0, 0)]
        while heap:
            cost, _, _, a, b = heapq.heappop(heap)
            if b + 1 < len(D):
                heapq.heappush(heap, (P[a][0] + D[b + 1][0], P[a][1], D[b + 1][1], a, b + 1))
            if b == 0 and a + 1 < len(P):
                heapq.heappush(heap, (P[a + 1][0] + D[0][0], P[a + 1][1], D[0][1], a + 1, 0))
            structure = RouteStructure(P[a][2], D[b][2])
            checked += 1
            sol = schedule_feasible(inst, structure)
            if sol is None:
                continue
            sol.cost = cost
            return SolveResult(OPTIMAL, solution=sol, objective=cost, bound=cost, gap=0.0,
                               nodes=checked, wall_time=time.perf_counter() - t0)
    return SolveResult(INFEASIBLE, nodes=checked, wall_time=time.perf_counter() - t0,
                       reason="no route structure admits a feasible schedule")

"""Seeded random instances that are feasible by construction.

A random witness plan is drawn first (request-to-vehicle assignment and
visiting orders for both route halves), timed at earliest start through the
crossdock, and only then are windows, the ride-time cap and route durations
wrapped around the realised schedule.
"""
from dataclasses import dataclass

import numpy as np

from .instance import euclidean_matrix, make_instance
from .solution import Solution


@dataclass(frozen=True)
class GeneratorParams:
    n: int = 4
    num_vehicles: int = 2
    seed: int = 0
    box_size: float = 100.0
    demand_range: tuple = (1, 10)
    window_slack: float = 60.0
    L_factor: float = 1.2
    T_factor: float = 1.2
    capacity: float | None = None  # None: smallest value the witness needs
    fixed_time: float = 10.0
    per_unit_time: float = 1.0


def _split(rng, items, K):
    """Random assignment of ``items`` to K vehicles, each getting at least one."""
    items = list(items)
    rng.shuffle(items)
    owner = np.concatenate([np.arange(K), rng.integers(0, K, size=len(items) - K)])
    return [[v for v, o in zip(items, owner) if o == k] for k in range(K)]


def generate_with_witness(params=None, **kwargs):
    """Instance plus the witness solution it was built around."""
    p = params or GeneratorParams()
    if kwargs:
        p = GeneratorParams(**{**p.__dict__, **kwargs})
    n, K = p.n, p.num_vehicles
    if K < 1 or n < K:
        raise ValueError(f"need n >= num_vehicles >= 1 (got n={n}, num_vehicles={K})")
    dlo, dhi = p.demand_range
    if not 0 <= dlo <= dhi:
        raise ValueError(f"bad demand_range {p.demand_range}")
    if p.capacity is not None and dlo > p.capacity:
        raise ValueError(f"minimum demand {dlo} exceeds the vehicle capacity {p.capacity}")
    if p.window_slack < 0 or p.L_factor < 1 or p.T_factor < 1 or p.box_size <= 0:
        raise ValueError("window_slack must be >= 0, L_factor and T_factor >= 1, box_size > 0")

    rng = np.random.default_rng(p.seed)
    depot = np.array([p.box_size / 2, p.box_size / 2])
    pts = rng.uniform(0, p.box_size, size=(2 * n, 2))
    coords = np.vstack([depot, pts])
    demand = rng.integers(dlo, dhi + 1, size=n).astype(float)
    tt = euclidean_matrix(coords)

    p_routes = [list(rng.permutation(g)) for g in _split(rng, range(1, n + 1), K)]
    d_routes = [list(rng.permutation(g)) for g in _split(rng, range(n + 1, 2 * n + 1), K)]
    if p.capacity is not None:
        for routes in (p_routes, [[v - n for v in r] for r in d_routes]):
            for r in routes:
                if demand[np.array(r) - 1].sum() > p.capacity:
                    raise ValueError("capacity too small for the sampled witness plan; "
                                     "raise capacity or lower demand_range")

    o1, o2, o3, o4 = 2 * n + 1, 2 * n + 2, 2 * n + 3, 2 * n + 4
    starts = [dict() for _ in range(K)]
    unload = np.zeros((K, n), dtype=int)
    reload = np.zeros((K, n), dtype=int)
    pk = {}
    for k in range(K):
        picked = set(int(v) for v in p_routes[k])
        delivered = set(int(v) - n for v in d_routes[k])
        for i in picked - delivered:
            unload[k, i - 1] = 1
        for i in delivered - picked:
            reload[k, i - 1] = 1
        for i in picked:
            pk[i] = k

    def walk(k, start, seq, end, t0):
        starts[k][start] = t0
        prev, t = 0, t0
        for v in (*seq, end):
            loc = 0 if v > 2 * n else int(v)
            t += tt[prev, loc]
            starts[k][int(v)] = t
            prev = loc

    a, beta = p.fixed_time, p.per_unit_time
    tau = np.zeros(K)
    for k in range(K):
        walk(k, o1, p_routes[k], o2, 0.0)
        tau[k] = starts[k][o2] + a * unload[k].any() + beta * float(demand @ unload[k])
    z = np.array([tau[pk[i]] for i in range(1, n + 1)])
    w = np.array([max([tau[k]] + [z[i] for i in range(n) if reload[k, i]]) for k in range(K)])
    for k in range(K):
        t3 = w[k] + a * reload[k].any() + beta * float(demand @ reload[k])
        walk(k, o3, d_routes[k], o4, t3)

    serve = {}
    for k in range(K):
        for v in (*p_routes[k], *d_routes[k]):
            serve[int(v)] = starts[k][int(v)]
    ride = np.array([serve[n + i] - serve[i] for i in range(1, n + 1)])
    durations = [max(s[o2] - s[o1], s[o4] - s[o3]) for s in starts]
    end = max(s[o4] for s in starts)

    lo = rng.uniform(0, p.window_slack, size=2 * n)
    hi = rng.uniform(0, p.window_slack, size=2 * n)
    windows = {v: (max(0.0, serve[v] - lo[v - 1]), serve[v] + hi[v - 1]) for v in serve}
    depot_window = (0.0, end + p.window_slack)
    L = float(p.L_factor * ride.max())
    T = float(p.T_factor * max(durations))
    if p.capacity is not None:
        Q = float(p.capacity)
    else:
        loads = [demand[np.array(r) - 1].sum() for r in p_routes]
        loads += [demand[np.array(r) - n - 1].sum() for r in d_routes]
        Q = float(max(loads))

    pickups = [(*coords[i], demand[i - 1], *windows[i]) for i in range(1, n + 1)]
    deliveries = [(*coords[n + i], *windows[n + i]) for i in range(1, n + 1)]
    inst = make_instance(
        f"gen-n{n}-k{K}-s{p.seed}", tuple(depot), pickups, deliveries,
        vehicles=[(Q, T)] * K, depot_window=depot_window,
        fixed_time=a, per_unit_time=beta, max_ride_time=L)

    pr = [[o1, *map(int, r), o2] for r in p_routes]
    dr = [[o3, *map(int, r), o4] for r in d_routes]
    cost = sum(inst.c(x, y) for route in pr + dr for x, y in zip(route, route[1:]))
    witness = Solution(
        pickup_routes=pr, delivery_routes=dr, service_start=starts,
        unload=unload, reload=reload,
        unload_any=unload.any(axis=1).astype(int), reload_any=reload.any(axis=1).astype(int),
        unload_done=tau, reload_start=w, unload_time=z, ride_time=ride, cost=cost)
    return inst, witness


def generate_instance(params=None, **kwargs):
    """Seeded instance, feasible by construction (see :func:`generate_with_witness`)."""
    return generate_with_witness(params, **kwargs)[0]

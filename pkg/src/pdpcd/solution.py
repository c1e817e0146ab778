"""Solution container and its JSON form."""
from dataclasses import dataclass
import json

import numpy as np


class SolutionFormatError(ValueError):
    """Solution is not structurally parseable against its instance."""


@dataclass(eq=False)
class Solution:
    """Routes, schedule and crossdock decisions of every vehicle.

    Routes and ``service_start`` keys use graph vertex ids (see
    :mod:`pdpcd.instance`); ``unload``/``reload`` are ``(K, n)`` 0/1 arrays
    indexed by request ``i - 1``.
    """

    pickup_routes: list
    delivery_routes: list
    service_start: list
    unload: np.ndarray
    reload: np.ndarray
    unload_any: np.ndarray
    reload_any: np.ndarray
    unload_done: np.ndarray
    reload_start: np.ndarray
    unload_time: np.ndarray
    ride_time: np.ndarray
    cost: float

    @property
    def num_vehicles(self):
        return len(self.pickup_routes)

    def serving_vehicle(self, v):
        """Index of the vehicle whose route contains vertex ``v`` (or None)."""
        for k, (pr, dr) in enumerate(zip(self.pickup_routes, self.delivery_routes)):
            if v in pr[1:-1] or v in dr[1:-1]:
                return k
        return None

    def serve_time(self, v):
        k = self.serving_vehicle(v)
        if k is None or v not in self.service_start[k]:
            return None
        return self.service_start[k][v]


def solution_to_dict(inst, sol):
    n = inst.n
    vehicles = []
    for k in range(sol.num_vehicles):
        vehicles.append({
            "pickup_route": [_lab(inst, v) for v in sol.pickup_routes[k]],
            "delivery_route": [_lab(inst, v) for v in sol.delivery_routes[k]],
            "service_start": {inst.label(v): float(t) for v, t in sorted(sol.service_start[k].items())},
            "unloads": [i + 1 for i in range(n) if sol.unload[k, i]],
            "reloads": [i + 1 for i in range(n) if sol.reload[k, i]],
            "unload_indicator": int(sol.unload_any[k]),
            "reload_indicator": int(sol.reload_any[k]),
            "unload_done": float(sol.unload_done[k]),
            "reload_start": float(sol.reload_start[k]),
        })
    return {
        "instance": inst.name,
        "cost": float(sol.cost),
        "vehicles": vehicles,
        "requests": [{"id": i + 1, "unload_time": float(sol.unload_time[i]),
                      "ride_time": float(sol.ride_time[i])} for i in range(n)],
    }


def _lab(inst, v):
    return inst.label(v) if v > 2 * inst.n else int(v)


def solution_from_dict(inst, doc):
    n = inst.n
    try:
        vehicles = doc["vehicles"]
        K = len(vehicles)
        if K != inst.num_vehicles:
            raise SolutionFormatError(
                f"solution has {K} vehicles, instance has {inst.num_vehicles}")
        unload = np.zeros((K, n), dtype=int)
        reload = np.zeros((K, n), dtype=int)
        pr, dr, starts = [], [], []
        for k, veh in enumerate(vehicles):
            pr.append([inst.vertex(v) for v in veh["pickup_route"]])
            dr.append([inst.vertex(v) for v in veh["delivery_route"]])
            starts.append({inst.vertex(v): float(t) for v, t in veh["service_start"].items()})
            for i in veh.get("unloads", []):
                unload[k, _req(n, i)] = 1
            for i in veh.get("reloads", []):
                reload[k, _req(n, i)] = 1
        reqs = {int(r["id"]): r for r in doc["requests"]}
        if sorted(reqs) != list(range(1, n + 1)):
            raise SolutionFormatError("requests must list ids 1..n exactly once")
        return Solution(
            pickup_routes=pr, delivery_routes=dr, service_start=starts,
            unload=unload, reload=reload,
            unload_any=np.array([int(v["unload_indicator"]) for v in vehicles]),
            reload_any=np.array([int(v["reload_indicator"]) for v in vehicles]),
            unload_done=np.array([float(v["unload_done"]) for v in vehicles]),
            reload_start=np.array([float(v["reload_start"]) for v in vehicles]),
            unload_time=np.array([float(reqs[i]["unload_time"]) for i in range(1, n + 1)]),
            ride_time=np.array([float(reqs[i]["ride_time"]) for i in range(1, n + 1)]),
            cost=float(doc["cost"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SolutionFormatError):
            raise
        raise SolutionFormatError(f"malformed solution: {exc}") from None


def _req(n, i):
    i = int(i)
    if not 1 <= i <= n:
        raise SolutionFormatError(f"request id {i} out of range 1..{n}")
    return i - 1


def load_solution(inst, data):
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SolutionFormatError(f"invalid JSON: {exc}") from None
    return solution_from_dict(inst, doc)


def store_solution(inst, sol):
    return (json.dumps(solution_to_dict(inst, sol), indent=2) + "\n").encode("utf-8")

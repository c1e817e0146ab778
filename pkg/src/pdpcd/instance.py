"""Problem data, the feasible arc set and arc-elimination preprocessing.

Vertex numbering follows the matrix layout: ``0`` is the depot/crossdock
location, ``1..n`` are pickups and ``n+1..2n`` deliveries.  The four depot
copies used by the routing model get their own graph ids ``2n+1..2n+4``
(``o1``: pickup start, ``o2``: arrival at the crossdock, ``o3``: departure
from the crossdock, ``o4``: end of the delivery route); all of them map to
matrix index 0.
"""
from dataclasses import dataclass, field
import json
from typing import NamedTuple

import jsonschema
import numpy as np


class InstanceFormatError(ValueError):
    """Raised when an instance file does not match the schema."""


class Diagnostic(NamedTuple):
    severity: str  # "error" or "warning"
    message: str


@dataclass(frozen=True, eq=False)
class Instance:
    """Full PDPCDPG instance.

    ``windows`` has one row per matrix index (depot first); the depot row is
    the depot window ``[e_o1, l_o4]`` and doubles as the window of every depot
    copy.
    """

    name: str
    n: int
    demand: np.ndarray
    windows: np.ndarray
    capacity: np.ndarray
    max_duration: np.ndarray
    max_ride_time: float
    fixed_time: float
    per_unit_time: float
    travel_time: np.ndarray
    cost: np.ndarray
    coords: np.ndarray | None = None
    explicit_travel_time: bool = False
    explicit_cost: bool = False

    @property
    def num_vehicles(self):
        return len(self.capacity)

    @property
    def o1(self):
        return 2 * self.n + 1

    @property
    def o2(self):
        return 2 * self.n + 2

    @property
    def o3(self):
        return 2 * self.n + 3

    @property
    def o4(self):
        return 2 * self.n + 4

    @property
    def pickups(self):
        return range(1, self.n + 1)

    @property
    def deliveries(self):
        return range(self.n + 1, 2 * self.n + 1)

    @property
    def horizon(self):
        return float(self.windows[0, 1])

    def loc(self, v):
        """Matrix index of graph vertex ``v``."""
        return 0 if v > 2 * self.n else v

    def earliest(self, v):
        return float(self.windows[self.loc(v), 0])

    def latest(self, v):
        return float(self.windows[self.loc(v), 1])

    def q(self, v):
        """Demand of a pickup or delivery vertex (0 at the depot copies)."""
        if 1 <= v <= self.n:
            return float(self.demand[v - 1])
        if self.n < v <= 2 * self.n:
            return float(self.demand[v - self.n - 1])
        return 0.0

    def t(self, i, j):
        return float(self.travel_time[self.loc(i), self.loc(j)])

    def c(self, i, j):
        return float(self.cost[self.loc(i), self.loc(j)])

    def label(self, v):
        if v > 2 * self.n:
            return f"o{v - 2 * self.n}"
        return str(v)

    def vertex(self, label):
        """Inverse of :meth:`label`; accepts ints or ``"o1".."o4"``."""
        if isinstance(label, str):
            if label.startswith("o"):
                k = int(label[1:])
                if not 1 <= k <= 4:
                    raise ValueError(f"unknown depot copy {label!r}")
                return 2 * self.n + k
            label = int(label)
        if not 1 <= label <= 2 * self.n:
            raise ValueError(f"vertex {label} out of range 1..{2 * self.n}")
        return int(label)


def make_instance(name, depot_xy, pickups, deliveries, vehicles, depot_window,
                  fixed_time, per_unit_time, max_ride_time,
                  travel_time_matrix=None, cost_matrix=None):
    """Assemble an :class:`Instance` from plain python structures.

    ``pickups`` is a sequence of ``(x, y, demand, e, l)``, ``deliveries`` of
    ``(x, y, e, l)`` and ``vehicles`` of ``(capacity, max_route_duration)``.
    Coordinates may be ``None`` when an explicit travel-time matrix is given.
    """
    n = len(pickups)
    xs = [depot_xy[0]] + [p[0] for p in pickups] + [d[0] for d in deliveries]
    ys = [depot_xy[1]] + [p[1] for p in pickups] + [d[1] for d in deliveries]
    have_coords = all(v is not None for v in xs + ys)
    coords = np.column_stack([xs, ys]).astype(float) if have_coords else None
    windows = np.array([list(depot_window)]
                       + [[p[3], p[4]] for p in pickups]
                       + [[d[2], d[3]] for d in deliveries], dtype=float)
    if travel_time_matrix is not None:
        tt = np.asarray(travel_time_matrix, dtype=float)
    elif coords is not None:
        tt = euclidean_matrix(coords)
    else:
        raise InstanceFormatError("either coordinates or travel_time_matrix are required")
    cc = np.asarray(cost_matrix, dtype=float) if cost_matrix is not None else tt.copy()
    return Instance(
        name=name, n=n,
        demand=np.array([p[2] for p in pickups], dtype=float),
        windows=windows,
        capacity=np.array([v[0] for v in vehicles], dtype=float),
        max_duration=np.array([v[1] for v in vehicles], dtype=float),
        max_ride_time=float(max_ride_time),
        fixed_time=float(fixed_time),
        per_unit_time=float(per_unit_time),
        travel_time=tt, cost=cc, coords=coords,
        explicit_travel_time=travel_time_matrix is not None,
        explicit_cost=cost_matrix is not None,
    )


def euclidean_matrix(coords):
    diff = coords[:, None, :] - coords[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=-1))


# ----------------------------------------------------------------------------
# arc set
# ----------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class ArcSet:
    """Arcs ``(tail, head)`` over graph vertex ids with travel time and cost.

    ``conflicts`` holds pairs of arc indices that may not both be used because
    the combined path through the crossdock exceeds the ride-time limit.
    """

    tail: np.ndarray
    head: np.ndarray
    time: np.ndarray
    cost: np.ndarray
    conflicts: tuple = ()
    index: dict = field(default_factory=dict, repr=False)
    out_arcs: dict = field(default_factory=dict, repr=False)
    in_arcs: dict = field(default_factory=dict, repr=False)

    def __len__(self):
        return len(self.tail)

    def __contains__(self, arc):
        return tuple(arc) in self.index

    def arcs(self):
        return list(zip(self.tail.tolist(), self.head.tolist()))

    def conflict_pairs(self):
        """Conflicts as ``((i, j), (j', n+i))`` vertex pairs."""
        return [((int(self.tail[a]), int(self.head[a])), (int(self.tail[b]), int(self.head[b])))
                for a, b in self.conflicts]


def _arcset(inst, arcs, conflicts=()):
    tail = np.array([a for a, _ in arcs], dtype=np.int64)
    head = np.array([b for _, b in arcs], dtype=np.int64)
    time = np.array([inst.t(a, b) for a, b in arcs], dtype=float)
    cost = np.array([inst.c(a, b) for a, b in arcs], dtype=float)
    index = {arc: k for k, arc in enumerate(arcs)}
    out_arcs, in_arcs = {}, {}
    for k, (a, b) in enumerate(arcs):
        out_arcs.setdefault(a, []).append(k)
        in_arcs.setdefault(b, []).append(k)
    return ArcSet(tail, head, time, cost, tuple(conflicts), index, out_arcs, in_arcs)


def full_arc_list(inst):
    P = list(inst.pickups)
    D = list(inst.deliveries)
    arcs = [(inst.o1, j) for j in P]
    arcs += [(i, j) for i in P for j in P if i != j]
    arcs += [(i, inst.o2) for i in P]
    arcs += [(inst.o3, j) for j in D]
    arcs += [(i, j) for i in D for j in D if i != j]
    arcs += [(i, inst.o4) for i in D]
    return arcs


def build_arc_set(inst):
    """The complete arc set: no pickup-to-delivery arcs, no arcs out of o2 or into o3."""
    size = 2 * inst.n + 1
    for name, mat in (("travel_time", inst.travel_time), ("cost", inst.cost)):
        if mat.shape != (size, size):
            raise InstanceFormatError(f"{name} matrix is {mat.shape}, expected {(size, size)}")
        if not np.all(np.isfinite(mat)):
            raise InstanceFormatError(f"{name} matrix has missing (non-finite) entries")
    return _arcset(inst, full_arc_list(inst))


def shortest_paths(inst, arcs):
    """All-pairs shortest travel times over ``arcs`` (Floyd-Warshall).

    Indexed by graph vertex id; unreachable pairs are ``inf``.
    """
    size = 2 * inst.n + 5
    dist = np.full((size, size), np.inf)
    np.fill_diagonal(dist, 0.0)
    dist[arcs.tail, arcs.head] = np.minimum(dist[arcs.tail, arcs.head], arcs.time)
    for k in range(size):
        dist = np.minimum(dist, dist[:, k:k + 1] + dist[k:k + 1, :])
    return dist


def eliminate_infeasible_arcs(inst, arcs):
    """Drop arcs that violate time windows and record ride-time conflict pairs.

    An arc ``(i, j)`` is removed when ``e_i + t_ij > l_j``.  The pair
    ``(i, j)``/``(j', n+i)`` is recorded as conflicting when every path
    using both must exceed the ride-time limit; the path lengths from ``j``
    to the crossdock and from the crossdock to ``j'`` are shortest paths,
    which coincide with the direct arcs under the triangle inequality.
    """
    keep = [(a, b) for a, b in arcs.arcs()
            if inst.earliest(a) + inst.t(a, b) <= inst.latest(b)]
    reduced = _arcset(inst, keep)
    sp_ = shortest_paths(inst, reduced)
    L = inst.max_ride_time
    conflicts = []
    for i in inst.pickups:
        for k_in in reduced.out_arcs.get(i, ()):
            j = int(reduced.head[k_in])
            if j == inst.o2:
                continue
            head_part = reduced.time[k_in] + sp_[j, inst.o2]
            for k_del in reduced.in_arcs.get(inst.n + i, ()):
                jp = int(reduced.tail[k_del])
                if jp == inst.o3:
                    continue
                if head_part + sp_[inst.o3, jp] + reduced.time[k_del] > L:
                    conflicts.append((k_in, k_del))
    return _arcset(inst, keep, conflicts)


# ----------------------------------------------------------------------------
# validation
# ----------------------------------------------------------------------------
def validate_instance(inst):
    """Check the instance invariants; returns a list of :class:`Diagnostic`."""
    out = []

    def err(msg):
        out.append(Diagnostic("error", msg))

    def warn(msg):
        out.append(Diagnostic("warning", msg))

    if inst.n < 0:
        err(f"negative request count n={inst.n}")
        return out
    size = 2 * inst.n + 1
    if len(inst.demand) != inst.n:
        err(f"{len(inst.demand)} demands for {inst.n} requests")
    for i, qi in enumerate(inst.demand, start=1):
        if not qi >= 0:
            err(f"negative demand q_{i}={qi}")
    if inst.windows.shape != (size, 2):
        err(f"windows have shape {inst.windows.shape}, expected {(size, 2)}")
    else:
        for idx, (e, l) in enumerate(inst.windows):
            who = "depot" if idx == 0 else f"vertex {idx}"
            if not e <= l:
                err(f"time window of {who} has e={e} > l={l}")
            elif e < 0:
                err(f"time window of {who} starts before time 0 (e={e})")
    if len(inst.capacity) != len(inst.max_duration):
        err("vehicle capacity and duration lists differ in length")
    if len(inst.capacity) == 0:
        err("no vehicles")
    for k, (Q, T) in enumerate(zip(inst.capacity, inst.max_duration), start=1):
        if not Q >= 0:
            err(f"negative capacity Q_{k}={Q}")
        if not T >= 0:
            err(f"negative max route duration T_{k}={T}")
    for nm, val in (("max ride time L", inst.max_ride_time),
                    ("crossdock fixed time a", inst.fixed_time),
                    ("per-unit handling time beta", inst.per_unit_time)):
        if not val >= 0:
            err(f"negative {nm}={val}")
    for nm, mat in (("travel_time", inst.travel_time), ("cost", inst.cost)):
        if mat.shape != (size, size):
            err(f"{nm} matrix is {mat.shape}, expected {(size, size)}")
        elif not np.all(np.isfinite(mat)):
            err(f"{nm} matrix has non-finite entries")
        elif np.any(mat < 0):
            err(f"{nm} matrix has negative entries")
    if any(d.severity == "error" for d in out):
        return out

    K = inst.num_vehicles
    if inst.n < K:
        warn("more vehicles than requests: model infeasible by arc-set structure")
    if inst.demand.sum() > inst.capacity.sum():
        warn(f"total demand {inst.demand.sum():g} exceeds fleet capacity "
             f"{inst.capacity.sum():g}: model infeasible")
    if inst.n and inst.demand.max(initial=0) > inst.capacity.max(initial=0):
        warn("some demand exceeds every vehicle capacity: model infeasible")
    if inst.explicit_travel_time:
        tt = inst.travel_time
        viol = tt[:, None, :] > tt[:, :, None] + tt[None, :, :] + 1e-9
        if viol.any():
            warn("travel-time matrix violates the triangle inequality")
    return out


def hard_errors(diags):
    return [d for d in diags if d.severity == "error"]


# ----------------------------------------------------------------------------
# JSON
# ----------------------------------------------------------------------------
_num = {"type": "number"}
_window = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
_xy = {"type": ["number", "null"]}
INSTANCE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "num_requests", "depot", "pickups", "deliveries", "vehicles",
                 "depot_window", "crossdock", "max_ride_time"],
    "properties": {
        "name": {"type": "string"},
        "num_requests": {"type": "integer"},
        "depot": {"type": "object", "additionalProperties": False,
                  "required": ["x", "y"], "properties": {"x": _xy, "y": _xy}},
        "pickups": {"type": "array", "items": {
            "type": "object", "additionalProperties": False,
            "required": ["id", "demand", "tw"],
            "properties": {"id": {"type": "integer"}, "x": _xy, "y": _xy,
                           "demand": _num, "tw": _window}}},
        "deliveries": {"type": "array", "items": {
            "type": "object", "additionalProperties": False,
            "required": ["id", "tw"],
            "properties": {"id": {"type": "integer"}, "x": _xy, "y": _xy, "tw": _window}}},
        "vehicles": {"type": "array", "items": {
            "type": "object", "additionalProperties": False,
            "required": ["capacity", "max_route_duration"],
            "properties": {"capacity": _num, "max_route_duration": _num}}},
        "depot_window": _window,
        "crossdock": {"type": "object", "additionalProperties": False,
                      "required": ["fixed_time", "per_unit_time"],
                      "properties": {"fixed_time": _num, "per_unit_time": _num}},
        "max_ride_time": _num,
        "travel_time_matrix": {"type": "array", "items": {"type": "array", "items": _num}},
        "cost_matrix": {"type": "array", "items": {"type": "array", "items": _num}},
    },
}


def instance_from_dict(doc):
    try:
        jsonschema.validate(doc, INSTANCE_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InstanceFormatError(f"schema violation at {path}: {exc.message}") from None
    n = doc["num_requests"]
    if n < 0:
        raise InstanceFormatError(f"num_requests: negative value {n}")
    if len(doc["pickups"]) != n or len(doc["deliveries"]) != n:
        raise InstanceFormatError(
            f"dimension mismatch: num_requests={n}, {len(doc['pickups'])} pickups, "
            f"{len(doc['deliveries'])} deliveries")
    for pos, p in enumerate(doc["pickups"], start=1):
        if p["id"] != pos:
            raise InstanceFormatError(f"pickups/{pos - 1}/id: expected {pos}, got {p['id']}")
    for pos, d in enumerate(doc["deliveries"], start=1):
        if d["id"] != n + pos:
            raise InstanceFormatError(
                f"deliveries/{pos - 1}/id: expected {n + pos}, got {d['id']}")
    size = 2 * n + 1
    for key in ("travel_time_matrix", "cost_matrix"):
        mat = doc.get(key)
        if mat is not None and (len(mat) != size or any(len(row) != size for row in mat)):
            raise InstanceFormatError(f"{key}: expected a {size}x{size} matrix")
    if "travel_time_matrix" not in doc:
        pts = [doc["depot"]] + doc["pickups"] + doc["deliveries"]
        for pos, pt in enumerate(pts):
            if pt.get("x") is None or pt.get("y") is None:
                raise InstanceFormatError(
                    f"vertex {pos}: coordinates required without travel_time_matrix")
    inst = make_instance(
        doc["name"], (doc["depot"]["x"], doc["depot"]["y"]),
        [(p.get("x"), p.get("y"), p["demand"], p["tw"][0], p["tw"][1]) for p in doc["pickups"]],
        [(d.get("x"), d.get("y"), d["tw"][0], d["tw"][1]) for d in doc["deliveries"]],
        [(v["capacity"], v["max_route_duration"]) for v in doc["vehicles"]],
        doc["depot_window"], doc["crossdock"]["fixed_time"], doc["crossdock"]["per_unit_time"],
        doc["max_ride_time"], doc.get("travel_time_matrix"), doc.get("cost_matrix"))
    errors = hard_errors(validate_instance(inst))
    if errors:
        raise InstanceFormatError("; ".join(d.message for d in errors))
    return inst


def instance_to_dict(inst):
    def xy(idx):
        if inst.coords is None:
            return {}
        return {"x": float(inst.coords[idx, 0]), "y": float(inst.coords[idx, 1])}

    n = inst.n
    depot = xy(0) if inst.coords is not None else {"x": None, "y": None}
    doc = {
        "name": inst.name,
        "num_requests": n,
        "depot": depot,
        "pickups": [{"id": i, **xy(i), "demand": float(inst.demand[i - 1]),
                     "tw": [float(inst.windows[i, 0]), float(inst.windows[i, 1])]}
                    for i in range(1, n + 1)],
        "deliveries": [{"id": n + i, **xy(n + i),
                        "tw": [float(inst.windows[n + i, 0]), float(inst.windows[n + i, 1])]}
                       for i in range(1, n + 1)],
        "vehicles": [{"capacity": float(Q), "max_route_duration": float(T)}
                     for Q, T in zip(inst.capacity, inst.max_duration)],
        "depot_window": [float(inst.windows[0, 0]), float(inst.windows[0, 1])],
        "crossdock": {"fixed_time": inst.fixed_time, "per_unit_time": inst.per_unit_time},
        "max_ride_time": inst.max_ride_time,
    }
    if inst.explicit_travel_time:
        doc["travel_time_matrix"] = inst.travel_time.tolist()
    if inst.explicit_cost:
        doc["cost_matrix"] = inst.cost.tolist()
    return doc


def load_instance(data):
    """Parse instance JSON (``bytes`` or ``str``)."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    if not data.strip():
        raise InstanceFormatError("empty instance file")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"invalid JSON: {exc}") from None
    return instance_from_dict(doc)


def store_instance(inst):
    return (json.dumps(instance_to_dict(inst), indent=2) + "\n").encode("utf-8")


def read_instance(path):
    with open(path, "rb") as fh:
        return load_instance(fh.read())


def write_instance(inst, path):
    with open(path, "wb") as fh:
        fh.write(store_instance(inst))


def same_instance(a, b):
    """Semantic equality of two instances (exact on all data)."""
    return (a.name == b.name and a.n == b.n
            and np.array_equal(a.demand, b.demand)
            and np.array_equal(a.windows, b.windows)
            and np.array_equal(a.capacity, b.capacity)
            and np.array_equal(a.max_duration, b.max_duration)
            and a.max_ride_time == b.max_ride_time
            and a.fixed_time == b.fixed_time
            and a.per_unit_time == b.per_unit_time
            and np.array_equal(a.travel_time, b.travel_time)
            and np.array_equal(a.cost, b.cost)
            and ((a.coords is None and b.coords is None)
                 or (a.coords is not None and b.coords is not None
                     and np.array_equal(a.coords, b.coords))))


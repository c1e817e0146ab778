"""MILP formulation: variables, constraint families, valid inequalities.

Rows are stored sparsely with a provenance tag per row (``eq2`` ... ``eq24``
for the formulation itself, ``vi-*`` for the tightening families).  Big-M
values are finite per-row constants taken from :class:`BigMTable`.

Closed-form sizes for ``n`` requests, ``K`` vehicles and ``|A|`` arcs of
which ``A_in`` end at a pickup or delivery vertex (``A_in = |A| - 2n`` for the
full arc set):

* variables: ``K|A| + K A_in + 4Kn + 8K + 4n``
* rows of :func:`build_milp`: ``K|A| + 3K A_in + 8Kn + 13K + 3n``
"""
from dataclasses import dataclass, field, replace
import io

import numpy as np
import scipy.sparse as sp

from .instance import shortest_paths
from .solution import Solution

BINARY, CONTINUOUS = 1, 0
# branching priority classes (lower is branched first)
PRIO_ROUTING, PRIO_TRANSFER, PRIO_INDICATOR, PRIO_NONE = 0, 1, 2, 99

EPS_M = 1e-9


class ModelError(ValueError):
    pass


class ExtractionError(RuntimeError):
    pass


@dataclass(frozen=True)
class BigMTable:
    m8: np.ndarray  # per arc, aligned with the ArcSet
    m17: float
    m18: float
    m23: float


def compute_big_m(inst, arcs):
    """Per-arc constants for the time-propagation rows and horizon constants."""
    e = np.array([inst.earliest(int(v)) for v in arcs.head])
    l_tail = np.array([inst.latest(int(v)) for v in arcs.tail])
    m8 = np.maximum(EPS_M, l_tail + arcs.time - e)
    H = inst.horizon
    return BigMTable(m8=m8, m17=H, m18=H, m23=H)


@dataclass(frozen=True, eq=False)
class MilpModel:
    names: tuple
    kind: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    obj: np.ndarray
    priority: np.ndarray
    A: sp.csr_matrix
    sense: tuple
    rhs: np.ndarray
    tags: tuple
    index: dict = field(repr=False)
    arcs: object = field(repr=False)
    n_requests: int = 0
    n_vehicles: int = 0

    @property
    def num_vars(self):
        return len(self.names)

    @property
    def num_rows(self):
        return self.A.shape[0]

    @property
    def row_lo(self):
        return np.where(np.array(self.sense) == "<=", -np.inf, self.rhs)

    @property
    def row_hi(self):
        return np.where(np.array(self.sense) == ">=", np.inf, self.rhs)

    @property
    def binaries(self):
        return np.flatnonzero(self.kind == BINARY)

    def rows_tagged(self, tag):
        return [r for r, t in enumerate(self.tags) if t == tag]

    def tag_counts(self):
        out = {}
        for t in self.tags:
            out[t] = out.get(t, 0) + 1
        return out

    def row_activity(self, values):
        return self.A @ np.asarray(values, dtype=float)

    def max_violation(self, values):
        """Largest row or bound violation of ``values``."""
        x = np.asarray(values, dtype=float)
        act = self.A @ x
        rv = np.maximum(self.row_lo - act, act - self.row_hi)
        bv = np.maximum(self.lb - x, x - self.ub)
        return float(max(rv.max(initial=0.0), bv.max(initial=0.0)))


class _Builder:
    def __init__(self):
        self.names, self.kind, self.lb, self.ub, self.obj, self.prio = [], [], [], [], [], []
        self.rows, self.cols, self.vals = [], [], []
        self.sense, self.rhs, self.tags = [], [], []

    def var(self, name, lb, ub, obj=0.0, kind=CONTINUOUS, prio=PRIO_NONE):
        self.names.append(name)
        self.kind.append(kind)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.obj.append(float(obj))
        self.prio.append(prio)
        return len(self.names) - 1

    def row(self, terms, sense, rhs, tag):
        r = len(self.sense)
        for c, v in terms:
            if v != 0.0:
                self.rows.append(r)
                self.cols.append(c)
                self.vals.append(float(v))
        self.sense.append(sense)
        self.rhs.append(float(rhs))
        self.tags.append(tag)


def build_milp(inst, arcs, bigm):
    """Assemble the linearised formulation (objective and rows eq2..eq24)."""
    if len(arcs) == 0:
        raise ModelError("arc set is empty: instance infeasible")
    n, K = inst.n, inst.num_vehicles
    if n < K:
        raise ModelError(f"n={n} < |K|={K}: every vehicle needs a pickup and a delivery")
    b = _Builder()
    P = list(inst.pickups)
    D = list(inst.deliveries)
    PD = P + D
    O = [inst.o1, inst.o2, inst.o3, inst.o4]
    lab = inst.label
    H0, H = inst.earliest(inst.o1), inst.horizon

    x = {}
    for k in range(K):
        for a in range(len(arcs)):
            i, j = int(arcs.tail[a]), int(arcs.head[a])
            x[a, k] = b.var(f"x[{lab(i)},{lab(j)},{k + 1}]", 0, 1, arcs.cost[a], BINARY, PRIO_ROUTING)
    eta, theta = {}, {}
    for k in range(K):
        for i in P:
            eta[i, k] = b.var(f"eta[{i},{k + 1}]", 0, 1, kind=BINARY, prio=PRIO_TRANSFER)
            theta[i, k] = b.var(f"theta[{i},{k + 1}]", 0, 1, kind=BINARY, prio=PRIO_TRANSFER)
    eta_t = {k: b.var(f"eta~[{k + 1}]", 0, 1, kind=BINARY, prio=PRIO_INDICATOR) for k in range(K)}
    theta_t = {k: b.var(f"theta~[{k + 1}]", 0, 1, kind=BINARY, prio=PRIO_INDICATOR) for k in range(K)}
    u = {}
    for k in range(K):
        for v in PD + O:
            # eq9 as bounds, for every vehicle
            u[v, k] = b.var(f"u[{lab(v)},{k + 1}]", inst.earliest(v), inst.latest(v))
    ut = {v: b.var(f"u~[{v}]", inst.earliest(v), inst.latest(v)) for v in PD}
    # eq22 as a bound
    r = {i: b.var(f"r[{i}]", 0, inst.max_ride_time) for i in P}
    tau = {k: b.var(f"tau[{k + 1}]", H0, H) for k in range(K)}
    w = {k: b.var(f"w[{k + 1}]", H0, H) for k in range(K)}
    z = {i: b.var(f"z[{i}]", H0, H) for i in P}
    sigma = {}
    in_pd = [a for a in range(len(arcs)) if int(arcs.head[a]) <= 2 * n]
    for k in range(K):
        for a in in_pd:
            i, j = int(arcs.tail[a]), int(arcs.head[a])
            sigma[a, k] = b.var(f"sigma[{lab(i)},{lab(j)},{k + 1}]", -bigm.m23, bigm.m23)

    out_arcs = lambda v: arcs.out_arcs.get(v, [])  # noqa: E731
    in_arcs = lambda v: arcs.in_arcs.get(v, [])  # noqa: E731

    # eq2
    for v in PD:
        b.row([(x[a, k], 1.0) for k in range(K) for a in out_arcs(v)], "=", 1.0, "eq2")
    # eq3 / eq4
    for k in range(K):
        b.row([(x[a, k], inst.q(v)) for v in P for a in out_arcs(v)], "<=", inst.capacity[k], "eq3")
        b.row([(x[a, k], inst.q(v)) for v in D for a in out_arcs(v)], "<=", inst.capacity[k], "eq4")
    # eq5 / eq6
    for k in range(K):
        b.row([(x[a, k], 1.0) for a in out_arcs(inst.o1)], "=", 1.0, "eq5")
        b.row([(x[a, k], 1.0) for a in out_arcs(inst.o3)], "=", 1.0, "eq5")
        b.row([(x[a, k], 1.0) for a in in_arcs(inst.o2)], "=", 1.0, "eq6")
        b.row([(x[a, k], 1.0) for a in in_arcs(inst.o4)], "=", 1.0, "eq6")
    # eq7
    for k in range(K):
        for h in PD:
            b.row([(x[a, k], 1.0) for a in in_arcs(h)] + [(x[a, k], -1.0) for a in out_arcs(h)],
                  "=", 0.0, "eq7")
    # eq8: u_j - u_i - M x >= t - M
    for k in range(K):
        for a in range(len(arcs)):
            i, j = int(arcs.tail[a]), int(arcs.head[a])
            M = bigm.m8[a]
            b.row([(u[j, k], 1.0), (u[i, k], -1.0), (x[a, k], -M)], ">=", arcs.time[a] - M, "eq8")
    # eq10 / eq11
    for k in range(K):
        for i in P:
            terms = [(eta[i, k], 1.0), (theta[i, k], -1.0)]
            terms += [(x[a, k], -1.0) for a in out_arcs(i)]
            terms += [(x[a, k], 1.0) for a in out_arcs(n + i)]
            b.row(terms, "=", 0.0, "eq10")
            b.row([(eta[i, k], 1.0), (theta[i, k], 1.0)], "<=", 1.0, "eq11")
    # eq12 / eq13 in the binary-equivalent form: flag <= indicator <= sum of flags
    for k in range(K):
        for i in P:
            b.row([(eta[i, k], 1.0), (eta_t[k], -1.0)], "<=", 0.0, "eq12")
        b.row([(eta_t[k], 1.0)] + [(eta[i, k], -1.0) for i in P], "<=", 0.0, "eq12")
        for i in P:
            b.row([(theta[i, k], 1.0), (theta_t[k], -1.0)], "<=", 0.0, "eq13")
        b.row([(theta_t[k], 1.0)] + [(theta[i, k], -1.0) for i in P], "<=", 0.0, "eq13")
    a_fix, beta = inst.fixed_time, inst.per_unit_time
    for k in range(K):
        # eq14: tau = u_o2 + a eta~ + beta sum q eta
        b.row([(tau[k], 1.0), (u[inst.o2, k], -1.0), (eta_t[k], -a_fix)]
              + [(eta[i, k], -beta * inst.q(i)) for i in P], "=", 0.0, "eq14")
        # eq15
        b.row([(w[k], 1.0), (tau[k], -1.0)], ">=", 0.0, "eq15")
        # eq16: u_o3 = w + a theta~ + beta sum q theta
        b.row([(u[inst.o3, k], 1.0), (w[k], -1.0), (theta_t[k], -a_fix)]
              + [(theta[i, k], -beta * inst.q(i)) for i in P], "=", 0.0, "eq16")
    # eq17 / eq18
    for k in range(K):
        for i in P:
            b.row([(w[k], 1.0), (z[i], -1.0), (theta[i, k], -bigm.m17)], ">=", -bigm.m17, "eq17")
    for k in range(K):
        for i in P:
            b.row([(z[i], 1.0), (tau[k], -1.0), (eta[i, k], -bigm.m18)], ">=", -bigm.m18, "eq18")
    # eq19 / eq20
    for k in range(K):
        b.row([(u[inst.o2, k], 1.0), (u[inst.o1, k], -1.0)], "<=", inst.max_duration[k], "eq19")
        b.row([(u[inst.o4, k], 1.0), (u[inst.o3, k], -1.0)], "<=", inst.max_duration[k], "eq20")
    # eq23: u~_i + sigma = u_i^k, |sigma| <= M (1 - x)
    M = bigm.m23
    for k in range(K):
        for a in in_pd:
            i = int(arcs.head[a])
            s = sigma[a, k]
            b.row([(ut[i], 1.0), (s, 1.0), (u[i, k], -1.0)], "=", 0.0, "eq23")
            b.row([(s, 1.0), (x[a, k], M)], "<=", M, "eq23")
            b.row([(s, 1.0), (x[a, k], -M)], ">=", -M, "eq23")
    # eq24
    for i in P:
        b.row([(r[i], 1.0), (ut[n + i], -1.0), (ut[i], 1.0)], "=", 0.0, "eq24")

    index = {"x": x, "eta": eta, "theta": theta, "eta_t": eta_t, "theta_t": theta_t,
             "u": u, "ut": ut, "r": r, "tau": tau, "w": w, "z": z, "sigma": sigma}
    return _freeze(b, index, arcs, n, K)


def _freeze(b, index, arcs, n, K):
    A = sp.csr_matrix((b.vals, (b.rows, b.cols)), shape=(len(b.sense), len(b.names)))
    A.sum_duplicates()
    return MilpModel(
        names=tuple(b.names), kind=np.array(b.kind, dtype=np.int8),
        lb=np.array(b.lb), ub=np.array(b.ub), obj=np.array(b.obj),
        priority=np.array(b.prio, dtype=np.int64), A=A,
        sense=tuple(b.sense), rhs=np.array(b.rhs), tags=tuple(b.tags),
        index=index, arcs=arcs, n_requests=n, n_vehicles=K)


def add_valid_inequalities(model, inst, arcs):
    """Return a copy of ``model`` with the static tightening rows appended."""
    n, K = inst.n, inst.num_vehicles
    idx = model.index
    x, u, r = idx["x"], idx["u"], idx["r"]
    theta, theta_t = idx["theta"], idx["theta_t"]
    P = list(inst.pickups)
    D = list(inst.deliveries)
    rows, sense, rhs, tags = [], [], [], []

    def add(terms, s, val, tag):
        rows.append(terms)
        sense.append(s)
        rhs.append(float(val))
        tags.append(tag)

    # serve-time tightening, routing summed over vehicles
    for i in P + D:
        e_i, l_i = inst.earliest(i), inst.latest(i)
        lo_terms, hi_terms = [], []
        for a in arcs.in_arcs.get(i, []):
            j = int(arcs.tail[a])
            coef = max(0.0, inst.earliest(j) - e_i + arcs.time[a])
            lo_terms += [(x[a, kk], -coef) for kk in range(K)]
        for a in arcs.out_arcs.get(i, []):
            j = int(arcs.head[a])
            coef = max(0.0, l_i - inst.latest(j) + arcs.time[a])
            hi_terms += [(x[a, kk], coef) for kk in range(K)]
        for k in range(K):
            add([(u[i, k], 1.0)] + lo_terms, ">=", e_i, "vi-servetime")
            add([(u[i, k], 1.0)] + hi_terms, "<=", l_i, "vi-servetime")

    # 2-cycle elimination among pickups and among deliveries
    for group in (P, D):
        for p_, i in enumerate(group):
            for j in group[p_ + 1:]:
                pair = [arcs.index.get((i, j)), arcs.index.get((j, i))]
                pair = [a for a in pair if a is not None]
                if len(pair) == 2:
                    add([(x[a, k], 1.0) for a in pair for k in range(K)], "<=", 1.0, "vi-subtour")

    # ride-time lower bounds
    dist = shortest_paths(inst, arcs)
    a_fix, beta = inst.fixed_time, inst.per_unit_time
    for i in P:
        lb = dist[i, inst.o2] + dist[inst.o3, n + i]
        if not np.isfinite(lb):
            continue
        add([(r[i], 1.0)], ">=", lb, "vi-ridetimeLB")
        # the horizon deactivates the row unless the gated terms could exceed it
        M = max(inst.horizon, lb + a_fix + beta * float(inst.demand.sum()))
        for k in range(K):
            # r_i >= lb + a theta~ + beta sum q theta - M (1 - theta_i)
            terms = [(r[i], 1.0), (theta_t[k], -a_fix), (theta[i, k], -M - beta * inst.q(i))]
            terms += [(theta[ip, k], -beta * inst.q(ip)) for ip in P if ip != i]
            add(terms, ">=", lb - M, "vi-ridetimeLB")

    # ride-time conflict pairs
    for a1, a2 in arcs.conflicts:
        add([(x[a, k], 1.0) for a in (a1, a2) for k in range(K)], "<=", 1.0, "vi-conflict")

    if not rows:
        return model
    m0 = model.num_rows
    ri, ci, vi = [], [], []
    for off, terms in enumerate(rows):
        for c, v in terms:
            if v != 0.0:
                ri.append(off)
                ci.append(c)
                vi.append(v)
    extra = sp.csr_matrix((vi, (ri, ci)), shape=(len(rows), model.num_vars))
    extra.sum_duplicates()
    assert m0 == model.A.shape[0]
    return replace(model, A=sp.vstack([model.A, extra], format="csr"),
                   sense=model.sense + tuple(sense),
                   rhs=np.concatenate([model.rhs, rhs]), tags=model.tags + tuple(tags))


def build_model(inst, arcs, enable_cuts=True):
    model = build_milp(inst, arcs, compute_big_m(inst, arcs))
    if enable_cuts:
        model = add_valid_inequalities(model, inst, arcs)
    return model


# ----------------------------------------------------------------------------
# solution extraction
# ----------------------------------------------------------------------------
def extract_solution(model, values, inst, tol=1e-6):
    """Turn an integer-feasible assignment of ``model`` into a :class:`Solution`."""
    values = np.asarray(values, dtype=float)
    arcs = model.arcs
    idx = model.index
    n, K = inst.n, inst.num_vehicles
    xs = np.array([values[idx["x"][a, k]] for k in range(K) for a in range(len(arcs))])
    if np.any(np.minimum(np.abs(xs), np.abs(xs - 1.0)) > tol):
        raise ExtractionError("non-integral routing variables")

    def follow(k, start, end):
        route = [start]
        seen = {start}
        v = start
        while v != end:
            nxt = [int(arcs.head[a]) for a in arcs.out_arcs.get(v, [])
                   if values[idx["x"][a, k]] > 0.5]
            if len(nxt) != 1:
                raise ExtractionError(
                    f"vehicle {k + 1}: {len(nxt)} outgoing arcs at {inst.label(v)}")
            v = nxt[0]
            if v in seen:
                raise ExtractionError(f"vehicle {k + 1}: cycle through {inst.label(v)}")
            seen.add(v)
            route.append(v)
        return route

    pr = [follow(k, inst.o1, inst.o2) for k in range(K)]
    dr = [follow(k, inst.o3, inst.o4) for k in range(K)]
    visited = sorted(v for k in range(K) for v in pr[k][1:-1] + dr[k][1:-1])
    if visited != list(range(1, 2 * n + 1)):
        raise ExtractionError("routes do not visit every request vertex exactly once "
                              "(subtour in the routing variables)")
    starts = [{v: float(values[idx["u"][v, k]]) for v in pr[k] + dr[k]} for k in range(K)]
    rnd = lambda c: int(round(values[c]))  # noqa: E731
    unload = np.array([[rnd(idx["eta"][i, k]) for i in inst.pickups] for k in range(K)], dtype=int)
    reload = np.array([[rnd(idx["theta"][i, k]) for i in inst.pickups] for k in range(K)], dtype=int)
    cost = sum(inst.c(a, b) for route in pr + dr for a, b in zip(route, route[1:]))
    return Solution(
        pickup_routes=pr, delivery_routes=dr, service_start=starts,
        unload=unload.reshape(K, n), reload=reload.reshape(K, n),
        unload_any=np.array([rnd(idx["eta_t"][k]) for k in range(K)], dtype=int),
        reload_any=np.array([rnd(idx["theta_t"][k]) for k in range(K)], dtype=int),
        unload_done=np.array([values[idx["tau"][k]] for k in range(K)]),
        reload_start=np.array([values[idx["w"][k]] for k in range(K)]),
        unload_time=np.array([values[idx["z"][i]] for i in inst.pickups]),
        ride_time=np.array([values[idx["r"][i]] for i in inst.pickups]),
        cost=float(cost),
    )


# ----------------------------------------------------------------------------
# LP-format export
# ----------------------------------------------------------------------------
def _lp_name(name):
    return (name.replace("~", "t").replace("[", "(").replace("]", ")")
            .replace(",", "_"))


def write_lp(model, fh=None):
    """Write ``model`` in CPLEX LP format; each row carries its tag as a comment."""
    out = fh or io.StringIO()
    names = [_lp_name(nm) for nm in model.names]

    def expr(cols, vals):
        parts = []
        for c, v in zip(cols, vals):
            sign = "-" if v < 0 else "+"
            parts.append(f"{sign} {abs(v):.17g} {names[c]}")
        s = " ".join(parts)
        return s[2:] if s.startswith("+ ") else s

    out.write("\\ PDPCDPG model\nMinimize\n")
    nz = np.flatnonzero(model.obj)
    out.write(f" obj: {expr(nz, model.obj[nz]) or '0 ' + names[0]}\n")
    out.write("Subject To\n")
    A = model.A.tocsr()
    op = {"<=": "<=", ">=": ">=", "=": "="}
    for r in range(model.num_rows):
        lo, hi = A.indptr[r], A.indptr[r + 1]
        out.write(f"\\ {model.tags[r]}\n")
        body = expr(A.indices[lo:hi], A.data[lo:hi]) or f"0 {names[0]}"
        out.write(f" c{r}: {body} {op[model.sense[r]]} {model.rhs[r]:.17g}\n")
    out.write("Bounds\n")
    for c, nm in enumerate(names):
        if model.kind[c] == BINARY:
            continue
        out.write(f" {model.lb[c]:.17g} <= {nm} <= {model.ub[c]:.17g}\n")
    out.write("Binaries\n")
    for c in model.binaries:
        out.write(f" {names[c]}\n")
    out.write("End\n")
    return out if fh else out.getvalue()


def embed_solution(model, inst, sol):
    """Map a :class:`Solution` onto the model's variable vector.

    Copies of a vertex held by vehicles that do not visit it take the actual
    serve time, which keeps every linking row satisfied.
    """
    idx = model.index
    arcs = model.arcs
    K = inst.num_vehicles
    x = np.zeros(model.num_vars)
    for k in range(K):
        for route in (sol.pickup_routes[k], sol.delivery_routes[k]):
            for a, b in zip(route, route[1:]):
                if (a, b) not in arcs:
                    raise ModelError(f"arc ({inst.label(a)},{inst.label(b)}) is not in the model")
                x[idx["x"][arcs.index[a, b], k]] = 1.0
        for i in inst.pickups:
            x[idx["eta"][i, k]] = sol.unload[k, i - 1]
            x[idx["theta"][i, k]] = sol.reload[k, i - 1]
        x[idx["eta_t"][k]] = sol.unload_any[k]
        x[idx["theta_t"][k]] = sol.reload_any[k]
        x[idx["tau"][k]] = sol.unload_done[k]
        x[idx["w"][k]] = sol.reload_start[k]
    for v in list(inst.pickups) + list(inst.deliveries):
        t = sol.serve_time(v)
        x[idx["ut"][v]] = t
        for k in range(K):
            x[idx["u"][v, k]] = t
    for k in range(K):
        for v in (inst.o1, inst.o2, inst.o3, inst.o4):
            x[idx["u"][v, k]] = sol.service_start[k][v]
    for i in inst.pickups:
        x[idx["r"][i]] = sol.ride_time[i - 1]
        x[idx["z"][i]] = sol.unload_time[i - 1]
    return x

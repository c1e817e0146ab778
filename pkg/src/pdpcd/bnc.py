"""Branch-and-cut driver.

Search rules (all deterministic in single-worker mode):

* branching: binaries in priority classes routing > transfer flags >
  crossdock indicators; most fractional within a class, lowest index on ties;
* node selection: best bound, with a depth-first plunge into the child on the
  LP value's side after every branching until the dive ends;
* cuts: the static valid inequalities added by the model builder; no
  separation inside the tree.
"""
import dataclasses
from dataclasses import dataclass, field
import heapq
import logging
import threading
import time

import numpy as np

from .instance import build_arc_set, eliminate_infeasible_arcs, hard_errors, validate_instance
from .lp import DualSimplex
from .model import ModelError, build_model, extract_solution
from .validator import validate

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
LIMIT_FEASIBLE = "time-limit-feasible"
LIMIT_NO_SOLUTION = "time-limit-no-solution"

INT_TOL = 1e-6


@dataclass
class SolveOptions:
    time_limit_s: float = 14400.0
    gap_tol: float = 1e-6
    enable_cuts: bool = True
    seed: int = 0
    node_limit: int | None = None
    log_every: int = 100
    threads: int = 1


@dataclass
class SolveResult:
    status: str
    solution: object = None
    objective: float = float("inf")
    bound: float = -float("inf")
    gap: float = float("inf")
    nodes: int = 0
    wall_time: float = 0.0
    num_constraints: int = 0
    num_variables: int = 0
    lp_iterations: int = 0
    root_bound: float = float("nan")
    reason: str = ""
    log: list = field(default_factory=list)

    def summary(self):
        """Machine-readable summary with the benchmark-table fields."""
        return {
            "status": self.status,
            "CNS": self.num_constraints,
            "NE": self.nodes,
            "CPU": round(self.wall_time, 6),
            "ost": None if self.solution is None else self.objective,
            "bound": None if not np.isfinite(self.bound) else self.bound,
            "gap": None if not np.isfinite(self.gap) else self.gap,
            "variables": self.num_variables,
            "lp_iterations": self.lp_iterations,
            "root_bound": None if not np.isfinite(self.root_bound) else self.root_bound,
            "reason": self.reason,
        }


def relative_gap(obj, bound):
    if not np.isfinite(obj) or not np.isfinite(bound):
        return float("inf")
    return max(0.0, obj - bound) / max(1.0, abs(obj))


def check_integrality(lp, model, tol=INT_TOL):
    """Branching variable for ``lp`` or ``None`` when every binary is integral."""
    bins = model.binaries
    vals = lp.x[bins]
    dist = np.abs(vals - np.round(vals))
    frac = dist > tol
    if not frac.any():
        return None
    cand = bins[frac]
    prio = model.priority[cand]
    cls = prio.min()
    in_cls = prio == cls
    cand, d = cand[in_cls], dist[frac][in_cls]
    best = d.max()
    # candidates are in increasing catalog order, so argmax gives the lowest index
    return int(cand[np.flatnonzero(d == best)[0]])


class _Node:
    __slots__ = ("bound", "depth", "fixings", "basis")

    def __init__(self, bound, depth, fixings, basis):
        self.bound = bound
        self.depth = depth
        self.fixings = fixings  # linked list: (var, value, parent fixings) or None
        self.basis = basis


def _apply(fixings, lb, ub):
    f = fixings
    while f is not None:
        var, val, f = f
        lb[var] = val
        ub[var] = val


class _Search:
    def __init__(self, inst, model, opts, t0):
        self.inst = inst
        self.model = model
        self.opts = opts
        self.t0 = t0
        self.bins = model.binaries
        self.lb0 = model.lb.copy()
        self.ub0 = model.ub.copy()
        self.heap = []
        self.counter = 0
        self.nodes = 0
        self.incumbent = None
        self.inc_obj = float("inf")
        self.pruned_bound = float("inf")
        self.lp_iterations = 0
        self.root_bound = float("nan")
        self.log_lines = []
        self.lock = threading.Lock()
        self.busy = 0
        self.stop_reason = ""

    # -------------------------------------------------------------- bookkeeping
    def cutoff(self):
        if self.incumbent is None:
            return float("inf")
        return self.inc_obj - self.opts.gap_tol * max(1.0, abs(self.inc_obj))

    def global_bound(self, extra=()):
        b = min([self.inc_obj, self.pruned_bound] + list(extra))
        if self.heap:
            b = min(b, self.heap[0][0])
        return b

    def _emit(self, line, elapsed):
        text = f"{line} {elapsed:9.2f}s"
        self.log_lines.append(text)
        log.info(text)

    def _status_line(self, marker, current=()):
        bound = self.global_bound(current)
        inc = f"{self.inc_obj:14.6f}" if self.incumbent is not None else f"{'-':>14}"
        gap = relative_gap(self.inc_obj, bound)
        gs = f"{100 * gap:8.4f}%" if np.isfinite(gap) else f"{'-':>9}"
        bs = f"{bound:14.6f}" if np.isfinite(bound) else f"{'-':>14}"
        self._emit(f"{marker}{self.nodes:9d} {len(self.heap):9d} {inc} {bs} {gs}",
                   time.perf_counter() - self.t0)

    def push(self, node):
        heapq.heappush(self.heap, (node.bound, self.counter, node))
        self.counter += 1

    def limits_hit(self):
        if time.perf_counter() - self.t0 >= self.opts.time_limit_s:
            self.stop_reason = "time limit"
            return True
        if self.opts.node_limit is not None and self.nodes >= self.opts.node_limit:
            self.stop_reason = "node limit"
            return True
        return False

    # -------------------------------------------------------------- node work
    def solve_node(self, engine, node):
        """Process one node; returns the child to dive into (or None)."""
        lb = self.lb0.copy()
        ub = self.ub0.copy()
        _apply(node.fixings, lb, ub)
        lp = engine.solve(lb, ub, node.basis)
        if lp.status not in ("optimal", "infeasible"):
            log.debug("node LP %s (%s); retrying cold", lp.status, lp.message)
            lp = engine.solve(lb, ub, None)
            if lp.status not in ("optimal", "infeasible"):
                raise RuntimeError(f"LP engine failed at node: {lp.status} {lp.message}")
        with self.lock:
            self.nodes += 1
            self.lp_iterations += lp.iterations
            if node.depth == 0:
                self.root_bound = lp.objective
            if lp.status == "infeasible":
                return None
            obj = max(lp.objective, node.bound)
            if obj >= self.cutoff():
                self.pruned_bound = min(self.pruned_bound, obj)
                return None
        var = check_integrality(lp, self.model)
        if var is None:
            var = self._try_incumbent(engine, lp, lb, ub)
            if var is None:
                return None
        val = lp.x[var]
        up = (var, 1.0, node.fixings)
        down = (var, 0.0, node.fixings)
        first, second = (up, down) if val >= 0.5 else (down, up)
        with self.lock:
            self.push(_Node(obj, node.depth + 1, second, lp.basis))
        return _Node(obj, node.depth + 1, first, lp.basis)

    def _try_incumbent(self, engine, lp, lb, ub):
        """Polish an integral LP point; returns a branching variable if polishing fails."""
        bins = self.bins
        rounded = np.round(lp.x[bins])
        lb = lb.copy()
        ub = ub.copy()
        lb[bins] = rounded
        ub[bins] = rounded
        pol = engine.solve(lb, ub, lp.basis)
        if pol.status != "optimal":
            dev = np.abs(lp.x[bins] - rounded)
            if dev.max() > 1e-12:
                log.warning("integral LP point could not be polished; branching on tiny fraction")
                return int(bins[np.argmax(dev)])
            return None
        sol = extract_solution(self.model, pol.x, self.inst)
        report = validate(self.inst, sol)
        if not report.passed:
            raise RuntimeError("incumbent failed independent validation: "
                               + ", ".join(report.failed_families()))
        with self.lock:
            if sol.cost < self.inc_obj:
                self.incumbent = sol
                self.inc_obj = sol.cost
                self._status_line("*", (self.inc_obj,))
        return None

    # -------------------------------------------------------------- drivers
    def run_serial(self):
        engine = DualSimplex.from_model(self.model)
        self.push(_Node(-float("inf"), 0, None, None))
        dive = None
        while self.heap or dive is not None:
            if self.limits_hit():
                if dive is not None:
                    self.push(dive)
                return False
            if dive is None:
                bound, _, node = heapq.heappop(self.heap)
                if bound >= self.cutoff():
                    self.pruned_bound = min(self.pruned_bound, bound)
                    continue
            else:
                node, dive = dive, None
                if node.bound >= self.cutoff():
                    self.pruned_bound = min(self.pruned_bound, node.bound)
                    continue
            dive = self.solve_node(engine, node)
            if self.opts.log_every and self.nodes % self.opts.log_every == 0:
                self._status_line(" ", () if dive is None else (dive.bound,))
        return True

    def run_parallel(self, workers):
        self.push(_Node(-float("inf"), 0, None, None))
        cond = threading.Condition(self.lock)
        errors = []
        state = {"done": False, "limit": False}

        def worker():
            engine = DualSimplex.from_model(self.model)
            dive = None
            while True:
                with cond:
                    if dive is None:
                        while not self.heap and self.busy > 0 and not state["done"]:
                            cond.wait(0.05)
                        if state["done"] or (not self.heap and self.busy == 0):
                            state["done"] = True
                            cond.notify_all()
                            return
                        if self.limits_hit():
                            state["done"] = state["limit"] = True
                            cond.notify_all()
                            return
                        bound, _, node = heapq.heappop(self.heap)
                    else:
                        node, dive = dive, None
                        bound = node.bound
                    if bound >= self.cutoff():
                        self.pruned_bound = min(self.pruned_bound, bound)
                        continue
                    self.busy += 1
                try:
                    child = self.solve_node(engine, node)
                except Exception as exc:  # surfaced to the caller below
                    with cond:
                        errors.append(exc)
                        state["done"] = True
                        self.busy -= 1
                        cond.notify_all()
                    return
                with cond:
                    self.busy -= 1
                    if state["done"] and child is not None:
                        self.push(child)
                        child = None
                    if self.opts.log_every and self.nodes % self.opts.log_every == 0:
                        self._status_line(" ")
                    cond.notify_all()
                dive = child

        threads = [threading.Thread(target=worker, daemon=True) for _ in range(workers)]
        for th in threads:
            th.start()
        for th in threads:
            th.join()
        if errors:
            raise errors[0]
        return not state["limit"]


def structural_infeasibility(inst, arcs):
    """Reason string when the arc structure alone rules out any solution."""
    if inst.n < inst.num_vehicles:
        return (f"more vehicles ({inst.num_vehicles}) than requests ({inst.n}): "
                "every vehicle must serve at least one pickup and one delivery")
    for v in list(inst.pickups) + list(inst.deliveries):
        if not arcs.in_arcs.get(v) or not arcs.out_arcs.get(v):
            return f"vertex {v} has no feasible incoming or outgoing arc"
    if inst.n and inst.demand.max() > inst.capacity.max():
        return "some demand exceeds every vehicle capacity"
    return ""


def solve(inst, options=None, **kwargs):
    """Solve ``inst`` to proven optimality (or until a limit is reached)."""
    opts = dataclasses.replace(options or SolveOptions(), **kwargs)
    t0 = time.perf_counter()
    errors = hard_errors(validate_instance(inst))
    if errors:
        raise ValueError("invalid instance: " + "; ".join(d.message for d in errors))
    arcs = eliminate_infeasible_arcs(inst, build_arc_set(inst))
    reason = structural_infeasibility(inst, arcs)
    if reason:
        return SolveResult(INFEASIBLE, reason=reason, wall_time=time.perf_counter() - t0,
                           log=[f"infeasible: {reason}"])
    try:
        model = build_model(inst, arcs, enable_cuts=opts.enable_cuts)
    except ModelError as exc:
        return SolveResult(INFEASIBLE, reason=str(exc), wall_time=time.perf_counter() - t0,
                           log=[f"infeasible: {exc}"])

    search = _Search(inst, model, opts, t0)
    search.log_lines.append(
        f"model: {model.num_vars} variables ({len(model.binaries)} binary), "
        f"{model.num_rows} constraints, {len(arcs)} arcs, {len(arcs.conflicts)} conflict pairs")
    search.log_lines.append(f" {'nodes':>9} {'open':>9} {'incumbent':>14} {'bound':>14} {'gap':>9} {'time':>10}")
    if opts.threads > 1:
        complete = search.run_parallel(opts.threads)
    else:
        complete = search.run_serial()

    elapsed = time.perf_counter() - t0
    res = SolveResult(status="", nodes=search.nodes, wall_time=elapsed,
                      num_constraints=model.num_rows, num_variables=model.num_vars,
                      lp_iterations=search.lp_iterations, root_bound=search.root_bound)
    if complete:
        if search.incumbent is None:
            res.status = INFEASIBLE
            res.reason = "search tree exhausted without a feasible solution"
        else:
            res.status = OPTIMAL
            res.bound = min(search.inc_obj, search.pruned_bound)
    else:
        res.reason = search.stop_reason
        res.status = LIMIT_FEASIBLE if search.incumbent is not None else LIMIT_NO_SOLUTION
        res.bound = search.global_bound()
    if search.incumbent is not None:
        res.solution = search.incumbent
        res.objective = search.inc_obj
        res.gap = relative_gap(res.objective, res.bound)
    search._status_line(" ")
    res.log = search.log_lines
    search.log_lines.append(f"status: {res.status}" + (f" ({res.reason})" if res.reason else ""))
    return res

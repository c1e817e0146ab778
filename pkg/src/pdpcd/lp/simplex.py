"""Bounded-variable dual simplex with warm starts.

The engine works on the column matrix ``[A, -I]``: each row ``i`` gets a
logical variable ``s_i = a_i . x`` whose bounds are the row bounds, clipped to
the activity range implied by the variable bounds.  Every column is therefore
boxed, so any basis is made dual feasible by parking each nonbasic column at
the bound matching the sign of its reduced cost.  That removes the need for a
primal phase one: a cold start is simply the all-logical basis.

Factorisation is a sparse LU of the basis (SuperLU through scipy) with a
product-form eta file on top, rebuilt every ``refactor_every`` pivots.
"""
from dataclasses import dataclass
import logging

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .._accel import USE_NUMBA
from . import kernels as kn
from .kernels import AT_LOWER, AT_UPPER, BASIC, FIXED

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration-limit"

DEGENERATE_STEP = 1e-9   # dual step length below which a pivot counts as stalled
PERTURB_AFTER = 50       # stalled pivots before the costs are perturbed
PERTURB = 1e-7           # relative size of the cost perturbation


@dataclass(frozen=True)
class Basis:
    """Basic column indices (into ``[A, -I]``) plus nonbasic-at-upper flags."""

    basic: np.ndarray
    at_upper: np.ndarray


@dataclass
class LpSolution:
    status: str
    x: np.ndarray
    objective: float
    basis: Basis | None
    iterations: int
    message: str = ""

    @property
    def optimal(self):
        return self.status == OPTIMAL


class SingularBasis(RuntimeError):
    pass


class DualSimplex:
    """Reusable LP solve context for one constraint matrix.

    Parameters
    ----------
    A : sparse matrix, shape (m, n)
    row_lo, row_hi : arrays of length m (may hold +-inf)
    col_lo, col_hi : arrays of length n, all finite
    cost : array of length n (minimised)

    A context is owned by one caller at a time; the factorisation of the last
    basis is kept so that a child node started from its parent's final basis
    skips refactorisation.
    """

    def __init__(self, A, row_lo, row_hi, col_lo, col_hi, cost, *,
                 feas_tol=1e-7, opt_tol=1e-7, pivot_tol=1e-10,
                 refactor_every=100, bland_after=1000, max_iter=None,
                 debug=False):
        A = sp.csc_matrix(A, dtype=np.float64)
        A.sum_duplicates()
        A.sort_indices()
        m, n = A.shape
        col_lo = np.asarray(col_lo, dtype=np.float64)
        col_hi = np.asarray(col_hi, dtype=np.float64)
        if not (np.all(np.isfinite(col_lo)) and np.all(np.isfinite(col_hi))):
            raise ValueError("all column bounds must be finite")
        self.m, self.n = m, n
        self.A = A
        self.A_T = A.T.tocsr()
        self.full = sp.hstack([A, -sp.identity(m, format="csc")], format="csc")
        self.cost = np.concatenate([np.asarray(cost, dtype=np.float64), np.zeros(m)])
        self._c = self.cost

        # finite activity bounds for the logicals
        pos = A.copy()
        pos.data = np.maximum(pos.data, 0.0)
        neg = A.copy()
        neg.data = np.minimum(neg.data, 0.0)
        act_lo = pos @ col_lo + neg @ col_hi
        act_hi = pos @ col_hi + neg @ col_lo
        self.row_lo = np.asarray(row_lo, dtype=np.float64)
        self.row_hi = np.asarray(row_hi, dtype=np.float64)
        self.log_lo = np.maximum(self.row_lo, act_lo)
        self.log_hi = np.minimum(self.row_hi, act_hi)
        self.col_lo = col_lo
        self.col_hi = col_hi

        self.feas_tol = feas_tol
        self.opt_tol = opt_tol
        self.pivot_tol = pivot_tol
        self.refactor_every = refactor_every
        self.bland_after = bland_after
        self.max_iter = max_iter if max_iter is not None else 50 * (m + n) + 1000
        self.debug = debug

        self._indptr = self.A.indptr.astype(np.int64)
        self._indices = self.A.indices.astype(np.int64)
        self._data = self.A.data
        self._eta_rows = np.zeros(refactor_every + 1, dtype=np.int64)
        self._eta_cols = np.zeros((refactor_every + 1, m))
        self._flips = np.zeros(n + m, dtype=np.int64)
        self._alpha = np.zeros(n + m)
        self._lu = None
        self._basic = None
        self._neta = 0
        self.total_iterations = 0

    @classmethod
    def from_model(cls, model, **kwargs):
        return cls(model.A, model.row_lo, model.row_hi, model.lb, model.ub, model.obj, **kwargs)

    # ------------------------------------------------------------------ linear algebra
    def _factor(self, basic):
        B = self.full[:, basic]
        try:
            lu = splu(sp.csc_matrix(B), permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SingularBasis(str(exc)) from exc
        self._lu = lu
        self._basic = basic.copy()
        self._neta = 0

    def _ftran(self, v):
        y = self._lu.solve(v)
        if self._neta:
            kn.eta_ftran(self._eta_rows, self._eta_cols, self._neta, y)
        return y

    def _btran(self, v):
        z = v.copy()
        if self._neta:
            kn.eta_btran(self._eta_rows, self._eta_cols, self._neta, z)
        return self._lu.solve(z, trans="T")

    def _column(self, j):
        if j < self.n:
            col = np.zeros(self.m)
            lo, hi = self.A.indptr[j], self.A.indptr[j + 1]
            col[self.A.indices[lo:hi]] = self.A.data[lo:hi]
            return col
        col = np.zeros(self.m)
        col[j - self.n] = -1.0
        return col

    def _pivot_row(self, rho, state):
        if USE_NUMBA:
            return kn.pivot_row_nb(self._indptr, self._indices, self._data, rho, state, self._alpha)
        return kn.pivot_row_np(self.A_T, rho, state, self._alpha)

    # ------------------------------------------------------------------ solve
    def solve(self, lb=None, ub=None, basis=None):
        """Solve with optional structural bound overrides and warm-start basis."""
        m, n = self.m, self.n
        lo = np.concatenate([self.col_lo if lb is None else np.asarray(lb, float), self.log_lo])
        hi = np.concatenate([self.col_hi if ub is None else np.asarray(ub, float), self.log_hi])
        if np.any(lo > hi + self.feas_tol):
            return LpSolution(INFEASIBLE, np.clip(lo[:n], None, hi[:n]), np.inf, None, 0,
                              "crossed bounds")
        hi = np.maximum(hi, lo)

        if basis is None:
            basic = np.arange(n, n + m, dtype=np.int64)
            at_upper = np.zeros(n + m, dtype=bool)
        else:
            basic = np.asarray(basis.basic, dtype=np.int64)
            at_upper = np.asarray(basis.at_upper, dtype=bool)

        try:
            if self._basic is None or not np.array_equal(basic, self._basic):
                self._factor(basic)
        except SingularBasis:
            log.debug("warm-start basis singular, falling back to cold start")
            basic = np.arange(n, n + m, dtype=np.int64)
            at_upper = np.zeros(n + m, dtype=bool)
            self._factor(basic)
        return self._iterate(lo, hi, basic.copy(), at_upper.copy())

    def _init_state(self, lo, hi, basic, at_upper):
        n_tot = self.n + self.m
        state = np.where(at_upper, AT_UPPER, AT_LOWER).astype(np.int8)
        state[lo == hi] = FIXED
        state[basic] = BASIC
        x = np.where(state == AT_UPPER, hi, lo)
        y = self._btran(self._c[basic])
        d = self._c - self._full_T_dot(y)
        d[basic] = 0.0
        # park nonbasic boxed columns on the dual-feasible bound
        wrong_lo = (state == AT_LOWER) & (d < -self.opt_tol)
        wrong_hi = (state == AT_UPPER) & (d > self.opt_tol)
        state[wrong_lo] = AT_UPPER
        state[wrong_hi] = AT_LOWER
        x = np.where(state == AT_UPPER, hi, lo)
        x[basic] = 0.0
        xb = self._ftran(-(self.full @ x))
        x[basic] = xb
        assert x.shape[0] == n_tot
        return state, x, d

    def _full_T_dot(self, y):
        return np.concatenate([self.A_T @ y, -y])

    def _perturb(self, state, basic):
        """Shift the working costs away from dual degeneracy.

        Nonbasic columns get their reduced cost pushed further onto the
        dual-feasible side, basic ones a random-sign shift; the generator is
        seeded so solves stay reproducible.
        """
        rng = np.random.default_rng(len(basic))
        mag = PERTURB * (1.0 + np.abs(self.cost)) * rng.uniform(0.5, 1.0, self.cost.shape[0])
        sign = np.where(state == AT_UPPER, -1.0, 1.0)
        sign[basic] = rng.choice((-1.0, 1.0), size=len(basic))
        sign[state == FIXED] = 0.0
        self._c = self.cost + sign * mag

    def _iterate(self, lo, hi, basic, at_upper):
        m = self.m
        self._c = self.cost
        state, x, d = self._init_state(lo, hi, basic, at_upper)
        weights = np.ones(m)
        it = 0
        stall = 0
        bland = False
        perturbed = False
        verified = 0
        lo_b = lo[basic]
        hi_b = hi[basic]
        while True:
            if it >= self.max_iter:
                return self._finish(ITERATION_LIMIT, x, basic, state, it,
                                    "iteration limit reached")
            xb = x[basic]
            if bland:
                r = kn.select_leaving_bland(xb, lo_b, hi_b, basic, self.feas_tol)
            else:
                r = kn.select_leaving(xb, lo_b, hi_b, weights, self.feas_tol)
            if r < 0:
                # candidate optimum: refresh from a clean factorisation and re-check
                if self._neta or verified == 0:
                    self._factor(basic)
                    fixed = self._refresh(lo, hi, basic, state, x, d)
                    verified += 1
                    if verified > 20:
                        return self._finish(ITERATION_LIMIT, x, basic, state, it,
                                            "could not verify optimality")
                    if fixed or self._primal_infeasible(x[basic], lo_b, hi_b):
                        continue
                if self._c is not self.cost:
                    # optimal for the shifted costs: restore them and clean up
                    self._c = self.cost
                    self._refresh(lo, hi, basic, state, x, d)
                    stall = 0
                    verified = 0
                    continue
                return self._finish(OPTIMAL, x, basic, state, it)

            p = basic[r]
            if x[p] < lo_b[r]:
                delta = x[p] - lo_b[r]
            else:
                delta = x[p] - hi_b[r]
            e_r = np.zeros(m)
            e_r[r] = 1.0
            rho = self._btran(e_r)
            alpha = self._pivot_row(rho, state)
            q, nflip = kn.ratio_test(alpha, d, state, lo, hi, delta, self.pivot_tol,
                                     1e-12, bland, self._flips)
            if q < 0:
                # dual ray: verify on a fresh factorisation before declaring
                if self._neta:
                    self._factor(basic)
                    self._refresh(lo, hi, basic, state, x, d)
                    continue
                return self._finish(INFEASIBLE, x, basic, state, it, "dual unbounded")

            a_q = self._column(q)
            alpha_q = self._ftran(a_q)
            if abs(alpha_q[r]) < self.pivot_tol or \
                    abs(alpha_q[r] - alpha[q]) > 1e-6 * (1.0 + abs(alpha[q])):
                # numerically inconsistent pivot: refactor and retry
                if self._neta:
                    self._factor(basic)
                    self._refresh(lo, hi, basic, state, x, d)
                    continue
                if abs(alpha_q[r]) < self.pivot_tol:
                    return self._finish(ITERATION_LIMIT, x, basic, state, it,
                                        "zero pivot on fresh factorisation")

            # bound flips
            if nflip:
                fl = self._flips[:nflip].copy()
                dx = np.where(state[fl] == AT_LOWER, hi[fl] - lo[fl], lo[fl] - hi[fl])
                x[fl] += dx
                state[fl] = np.where(state[fl] == AT_LOWER, AT_UPPER, AT_LOWER)
                rhs = self.full[:, fl] @ dx
                x[basic] -= self._ftran(rhs)
                delta = x[p] - (lo_b[r] if delta < 0 else hi_b[r])

            # primal step
            theta_p = delta / alpha_q[r]
            x[basic] -= theta_p * alpha_q
            x[q] += theta_p
            leave_bound = lo_b[r] if delta < 0 else hi_b[r]
            x[p] = leave_bound

            # dual step
            theta_d = d[q] / alpha[q]
            d -= theta_d * alpha
            d[q] = 0.0
            d[p] = -theta_d
            if delta < 0:
                state[p] = FIXED if lo[p] == hi[p] else AT_LOWER
            else:
                state[p] = FIXED if lo[p] == hi[p] else AT_UPPER
            state[q] = BASIC

            if not bland:
                beta_r = float(rho @ rho)
                tau = self._ftran(rho)
                kn.dse_update(weights, alpha_q, tau, r, beta_r)

            basic[r] = q
            lo_b[r] = lo[q]
            hi_b[r] = hi[q]
            self._basic[r] = q
            self._eta_rows[self._neta] = r
            self._eta_cols[self._neta] = alpha_q
            self._neta += 1
            it += 1
            self.total_iterations += 1

            if abs(theta_d) <= DEGENERATE_STEP:
                stall += 1
                if stall >= PERTURB_AFTER and not perturbed:
                    log.debug("perturbing costs after %d degenerate pivots", stall)
                    perturbed = True
                    stall = 0
                    self._perturb(state, basic)
                    self._refresh(lo, hi, basic, state, x, d)
                elif stall >= self.bland_after and not bland:
                    log.debug("switching to Bland's rule after %d stalled pivots", stall)
                    bland = True
            else:
                stall = 0

            if self._neta >= self.refactor_every:
                self._factor(basic)
                self._refresh(lo, hi, basic, state, x, d)

    def _primal_infeasible(self, xb, lo_b, hi_b):
        return bool(np.any((xb < lo_b - self.feas_tol) | (xb > hi_b + self.feas_tol)))

    def _refresh(self, lo, hi, basic, state, x, d):
        """Recompute x_B and reduced costs from the current factorisation.

        Returns True when some nonbasic column had to be flipped to restore
        dual feasibility.
        """
        y = self._btran(self._c[basic])
        d[:] = self._c - self._full_T_dot(y)
        d[basic] = 0.0
        wrong_lo = (state == AT_LOWER) & (d < -self.opt_tol)
        wrong_hi = (state == AT_UPPER) & (d > self.opt_tol)
        state[wrong_lo] = AT_UPPER
        state[wrong_hi] = AT_LOWER
        nb = state != BASIC
        x[nb] = np.where(state[nb] == AT_UPPER, hi[nb], lo[nb])
        xn = x.copy()
        xn[basic] = 0.0
        x[basic] = self._ftran(-(self.full @ xn))
        return bool(wrong_lo.any() or wrong_hi.any())

    def _finish(self, status, x, basic, state, it, message=""):
        n = self.n
        xs = x[:n].copy()
        if status == OPTIMAL:
            obj = float(self.cost[:n] @ xs)
        elif status == INFEASIBLE:
            obj = np.inf
        else:
            obj = np.nan
        basis = Basis(basic.copy(), state == AT_UPPER)
        if self.debug:
            act = self.A @ xs
            resid = np.maximum(self.row_lo - act, act - self.row_hi).max(initial=0.0)
            log.debug("lp %s it=%d obj=%.9g max row residual=%.3g", status, it, obj, resid)
        return LpSolution(status, xs, obj, basis, it, message)


def solve_lp(model, lb=None, ub=None, basis=None, **kwargs):
    """One-shot convenience wrapper: build a context for ``model`` and solve."""
    return DualSimplex.from_model(model, **kwargs).solve(lb, ub, basis)

"""Hot inner loops of the dual simplex.

Every kernel exists twice: a numba-compiled loop (``*_nb``) and a vectorised
numpy version (``*_np``).  The module-level names bind to one or the other
according to :data:`pdpcd._accel.USE_NUMBA`; both must return identical
results up to floating-point summation order.

Variable states used throughout: 0 basic, 1 nonbasic at lower bound,
2 nonbasic at upper bound, 3 nonbasic fixed (lower == upper).
"""
import numpy as np

from .._accel import USE_NUMBA, njit

BASIC, AT_LOWER, AT_UPPER, FIXED = 0, 1, 2, 3


# --------------------------------------------------------------------------
# pivot row: alpha_j = rho . a_j for the column matrix [A, -I]
# --------------------------------------------------------------------------
@njit
def pivot_row_nb(indptr, indices, data, rho, state, out):
    n = indptr.shape[0] - 1
    m = rho.shape[0]
    for j in range(n):
        if state[j] == BASIC or state[j] == FIXED:
            out[j] = 0.0
            continue
        s = 0.0
        for p in range(indptr[j], indptr[j + 1]):
            s += data[p] * rho[indices[p]]
        out[j] = s
    for i in range(m):
        if state[n + i] == BASIC or state[n + i] == FIXED:
            out[n + i] = 0.0
        else:
            out[n + i] = -rho[i]
    return out


def pivot_row_np(A_T, rho, state, out):
    n = A_T.shape[0]
    out[:n] = A_T @ rho
    out[n:] = -rho
    out[(state == BASIC) | (state == FIXED)] = 0.0
    return out


# --------------------------------------------------------------------------
# leaving-row selection (dual steepest edge pricing)
# --------------------------------------------------------------------------
@njit
def select_leaving_nb(xb, lb, ub, weights, tol):
    best = -1
    best_score = 0.0
    for i in range(xb.shape[0]):
        if xb[i] < lb[i] - tol:
            infeas = lb[i] - xb[i]
        elif xb[i] > ub[i] + tol:
            infeas = xb[i] - ub[i]
        else:
            continue
        score = infeas * infeas / weights[i]
        if score > best_score:
            best_score = score
            best = i
    return best


def select_leaving_np(xb, lb, ub, weights, tol):
    infeas = np.maximum(lb - xb, xb - ub)
    mask = infeas > tol
    if not mask.any():
        return -1
    score = np.where(mask, infeas * infeas / weights, 0.0)
    return int(np.argmax(score))


@njit
def select_leaving_bland_nb(xb, lb, ub, basic, tol):
    best = -1
    best_idx = 1 << 62
    for i in range(xb.shape[0]):
        if xb[i] < lb[i] - tol or xb[i] > ub[i] + tol:
            if basic[i] < best_idx:
                best_idx = basic[i]
                best = i
    return best


def select_leaving_bland_np(xb, lb, ub, basic, tol):
    mask = (xb < lb - tol) | (xb > ub + tol)
    if not mask.any():
        return -1
    cand = np.flatnonzero(mask)
    return int(cand[np.argmin(basic[cand])])


# --------------------------------------------------------------------------
# bound-flipping dual ratio test
# --------------------------------------------------------------------------
@njit
def ratio_test_nb(alpha, d, state, lb, ub, delta, pivot_tol, tie_tol, bland, flips):
    sgn = 1.0 if delta > 0 else -1.0
    n = alpha.shape[0]
    cand = np.empty(n, np.int64)
    ratio = np.empty(n, np.float64)
    nc = 0
    for j in range(n):
        st = state[j]
        if st == BASIC or st == FIXED:
            continue
        a = sgn * alpha[j]
        if (st == AT_LOWER and a > pivot_tol) or (st == AT_UPPER and a < -pivot_tol):
            r = d[j] / a
            if r < 0.0:
                r = 0.0
            cand[nc] = j
            ratio[nc] = r
            nc += 1
    if nc == 0:
        return -1, 0
    if bland:
        tmin = ratio[0]
        for c in range(1, nc):
            if ratio[c] < tmin:
                tmin = ratio[c]
        q = -1
        for c in range(nc):
            if ratio[c] <= tmin + tie_tol and (q == -1 or cand[c] < q):
                q = cand[c]
        return q, 0
    order = np.argsort(ratio[:nc], kind="mergesort")
    slope = abs(delta)
    # a slope that ends at (numerically) zero still means the row can be
    # repaired exactly; only a clearly positive remainder proves infeasibility
    slope_tol = 1e-9 * max(1.0, abs(delta))
    nflip = 0
    pos = -1
    for c in range(nc):
        j = cand[order[c]]
        slope -= abs(alpha[j]) * (ub[j] - lb[j])
        if slope <= slope_tol:
            pos = c
            break
        flips[nflip] = j
        nflip += 1
    if pos == -1:
        return -1, nflip
    # among near-tied breakpoints at or after pos, prefer the largest pivot
    t0 = ratio[order[pos]]
    q = cand[order[pos]]
    amax = abs(alpha[q])
    for c in range(pos + 1, nc):
        jj = cand[order[c]]
        if ratio[order[c]] > t0 + tie_tol * max(1.0, t0):
            break
        if abs(alpha[jj]) > amax:
            amax = abs(alpha[jj])
            q = jj
    return q, nflip


def ratio_test_np(alpha, d, state, lb, ub, delta, pivot_tol, tie_tol, bland, flips):
    sgn = 1.0 if delta > 0 else -1.0
    a = sgn * alpha
    mask = ((state == AT_LOWER) & (a > pivot_tol)) | ((state == AT_UPPER) & (a < -pivot_tol))
    cand = np.flatnonzero(mask)
    if cand.size == 0:
        return -1, 0
    ratio = np.maximum(d[cand] / a[cand], 0.0)
    if bland:
        tmin = ratio.min()
        return int(cand[ratio <= tmin + tie_tol].min()), 0
    order = np.argsort(ratio, kind="mergesort")
    cs = cand[order]
    rs = ratio[order]
    slope = abs(delta) - np.cumsum(np.abs(alpha[cs]) * (ub[cs] - lb[cs]))
    neg = np.flatnonzero(slope <= 1e-9 * max(1.0, abs(delta)))
    if neg.size == 0:
        nflip = cs.size
        flips[:nflip] = cs
        return -1, nflip
    pos = int(neg[0])
    flips[:pos] = cs[:pos]
    t0 = rs[pos]
    tied = pos + np.flatnonzero(rs[pos:] <= t0 + tie_tol * max(1.0, t0))
    # first index of the maximum keeps the same tie-break as the loop version
    best = tied[np.argmax(np.abs(alpha[cs[tied]]))]
    return int(cs[best]), pos


# --------------------------------------------------------------------------
# product-form eta file
# --------------------------------------------------------------------------
@njit
def eta_ftran_nb(eta_rows, eta_cols, k, y):
    for e in range(k):
        p = eta_rows[e]
        col = eta_cols[e]
        yp = y[p] / col[p]
        if yp != 0.0:
            for i in range(y.shape[0]):
                y[i] -= col[i] * yp
        y[p] = yp
    return y


def eta_ftran_np(eta_rows, eta_cols, k, y):
    for e in range(k):
        p = eta_rows[e]
        col = eta_cols[e]
        yp = y[p] / col[p]
        if yp != 0.0:
            y -= col * yp
        y[p] = yp
    return y


@njit
def eta_btran_nb(eta_rows, eta_cols, k, z):
    for e in range(k - 1, -1, -1):
        p = eta_rows[e]
        col = eta_cols[e]
        s = 0.0
        for i in range(z.shape[0]):
            s += col[i] * z[i]
        s -= col[p] * z[p]
        z[p] = (z[p] - s) / col[p]
    return z


def eta_btran_np(eta_rows, eta_cols, k, z):
    for e in range(k - 1, -1, -1):
        p = eta_rows[e]
        col = eta_cols[e]
        s = col @ z - col[p] * z[p]
        z[p] = (z[p] - s) / col[p]
    return z


# --------------------------------------------------------------------------
# dual steepest-edge weight update
# --------------------------------------------------------------------------
@njit
def dse_update_nb(weights, alpha_q, tau, r, beta_r):
    ar = alpha_q[r]
    for i in range(weights.shape[0]):
        if i == r:
            continue
        ratio = alpha_q[i] / ar
        if ratio == 0.0:
            continue
        w = weights[i] + ratio * (ratio * beta_r - 2.0 * tau[i])
        weights[i] = w if w > 1e-4 else 1e-4
    w = beta_r / (ar * ar)
    weights[r] = w if w > 1e-4 else 1e-4
    return weights


def dse_update_np(weights, alpha_q, tau, r, beta_r):
    ar = alpha_q[r]
    ratio = alpha_q / ar
    w = weights + ratio * (ratio * beta_r - 2.0 * tau)
    w = np.where(ratio == 0.0, weights, w)
    np.maximum(w, 1e-4, out=weights)
    weights[r] = max(beta_r / (ar * ar), 1e-4)
    return weights


if USE_NUMBA:
    pivot_row = pivot_row_nb
    select_leaving = select_leaving_nb
    select_leaving_bland = select_leaving_bland_nb
    ratio_test = ratio_test_nb
    eta_ftran = eta_ftran_nb
    eta_btran = eta_btran_nb
    dse_update = dse_update_nb
else:
    pivot_row = None  # the numpy path calls pivot_row_np with a transposed matrix
    select_leaving = select_leaving_np
    select_leaving_bland = select_leaving_bland_np
    ratio_test = ratio_test_np
    eta_ftran = eta_ftran_np
    eta_btran = eta_btran_np
    dse_update = dse_update_np

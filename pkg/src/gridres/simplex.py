"""Dense bounded-variable revised simplex kernel.

Solves min c.x s.t. A x + s = b with per-column bounds on structural and
slack variables. Intended for desk-scale problems (a few hundred rows);
large instances are routed to a sparse library solver by the caller.

Algorithm notes:
- Two phases. Rows whose slack cannot absorb the initial residual get a
  signed artificial column; phase 1 minimizes the artificial sum.
- Entering rule: most-negative reduced cost (Dantzig), ties broken by
  lowest column index. After `degen_threshold` consecutive degenerate
  steps the kernel falls back to Bland's rule, which cannot cycle.
- Leaving rule: standard bounded-variable ratio test including bound
  flips; ties prefer the largest pivot magnitude for stability.
- The basis inverse is maintained by product-form updates; the kernel
  periodically recomputes basic values from scratch and reports a
  breakdown status instead of returning a silently wrong answer.

All tie-breaking is index-deterministic: identical inputs give bit-for-bit
identical outputs.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def deco(fn):
            return fn

        return deco


# status codes returned by the kernel
OPTIMAL = 0
INFEASIBLE = 1
UNBOUNDED = 2
ITER_LIMIT = 3
BREAKDOWN = 4

_AT_LOWER = 0
_AT_UPPER = 1
_BASIC = 2
_FREE = 3


@njit(cache=True)
def _solve_core(A_in, b, c_in, lo_in, up_in, n_slack_start,
                opt_tol, piv_tol, degen_threshold, max_iter):
    m, n = A_in.shape
    N = n + m  # one artificial column per row
    INF = np.inf

    A = np.zeros((m, N))
    A[:, :n] = A_in
    lo = np.empty(N)
    up = np.empty(N)
    lo[:n] = lo_in
    up[:n] = up_in
    lo[n:] = 0.0
    up[n:] = 0.0  # opened only for rows that need an artificial

    c2 = np.zeros(N)
    c2[:n] = c_in

    x = np.zeros(N)
    status = np.empty(N, dtype=np.int64)
    for j in range(N):
        if lo[j] > -INF:
            x[j] = lo[j]
            status[j] = _AT_LOWER
        elif up[j] < INF:
            x[j] = up[j]
            status[j] = _AT_UPPER
        else:
            x[j] = 0.0
            status[j] = _FREE

    # initial residuals with every real column at its starting bound
    r = b.copy()
    for j in range(n):
        if x[j] != 0.0:
            for i in range(m):
                r[i] -= A[i, j] * x[j]

    basis = np.empty(m, dtype=np.int64)
    B_inv = np.zeros((m, m))
    n_art = 0
    for i in range(m):
        sj = n_slack_start + i
        if lo[sj] - 1e-12 <= r[i] <= up[sj] + 1e-12:
            val = min(max(r[i], lo[sj]), up[sj])
            basis[i] = sj
            x[sj] = val
            status[sj] = _BASIC
            B_inv[i, i] = 1.0
        else:
            aj = n + i
            sgn = 1.0 if r[i] >= 0.0 else -1.0
            A[i, aj] = sgn
            lo[aj] = 0.0
            up[aj] = INF
            basis[i] = aj
            x[aj] = abs(r[i])
            status[aj] = _BASIC
            B_inv[i, i] = sgn
            n_art += 1

    c_cur = np.zeros(N)
    phase = 2
    if n_art > 0:
        phase = 1
        for i in range(m):
            if basis[i] >= n:
                c_cur[basis[i]] = 1.0
    else:
        for j in range(N):
            c_cur[j] = c2[j]

    y = np.zeros(m)
    cB = np.zeros(m)
    w = np.zeros(m)
    iters = 0
    degen_run = 0
    bland = False

    while True:
        if iters > max_iter:
            return ITER_LIMIT, x[:n], y, iters

        # periodic refresh of basic values against accumulated drift
        if iters > 0 and iters % 256 == 0:
            v = b.copy()
            for j in range(N):
                if status[j] != _BASIC and x[j] != 0.0:
                    for i in range(m):
                        v[i] -= A[i, j] * x[j]
            xb = B_inv @ v
            for i in range(m):
                x[basis[i]] = xb[i]
            resid = b - A @ x
            scale = 1.0 + np.max(np.abs(b))
            if np.max(np.abs(resid)) > 1e-6 * scale:
                return BREAKDOWN, x[:n], y, iters

        for i in range(m):
            cB[i] = c_cur[basis[i]]
        for j in range(m):
            acc = 0.0
            for i in range(m):
                acc += cB[i] * B_inv[i, j]
            y[j] = acc

        # entering selection
        q = -1
        q_dir = 0
        best_score = opt_tol
        for j in range(N):
            st = status[j]
            if st == _BASIC or lo[j] == up[j]:
                continue
            dj = c_cur[j]
            for i in range(m):
                dj -= y[i] * A[i, j]
            direction = 0
            if st == _AT_LOWER:
                if dj < -opt_tol:
                    direction = 1
            elif st == _AT_UPPER:
                if dj > opt_tol:
                    direction = -1
            else:  # free at zero
                if dj < -opt_tol:
                    direction = 1
                elif dj > opt_tol:
                    direction = -1
            if direction != 0:
                if bland:
                    q = j
                    q_dir = direction
                    break
                score = abs(dj)
                if score > best_score:
                    best_score = score
                    q = j
                    q_dir = direction

        if q < 0:
            if phase == 1:
                art_sum = 0.0
                for i in range(m):
                    if basis[i] >= n:
                        art_sum += x[basis[i]]
                if art_sum > 1e-7:
                    return INFEASIBLE, x[:n], y, iters
                for j in range(n, N):
                    lo[j] = 0.0
                    up[j] = 0.0
                for j in range(N):
                    c_cur[j] = c2[j]
                phase = 2
                bland = False
                degen_run = 0
                continue
            # recompute duals under the true objective and stop
            for i in range(m):
                cB[i] = c2[basis[i]]
            for j in range(m):
                acc = 0.0
                for i in range(m):
                    acc += cB[i] * B_inv[i, j]
                y[j] = acc
            return OPTIMAL, x[:n], y, iters

        for i in range(m):
            acc = 0.0
            for k in range(m):
                acc += B_inv[i, k] * A[k, q]
            w[i] = acc

        # ratio test
        t_own = up[q] - lo[q]  # inf when either bound is infinite
        t_best = INF
        leave_row = -1
        leave_side = 0
        best_piv = 0.0
        for i in range(m):
            rate = -q_dir * w[i]
            kb = basis[i]
            ti = INF
            side = 0
            if rate > piv_tol:
                if up[kb] < INF:
                    ti = (up[kb] - x[kb]) / rate
                    side = 1
            elif rate < -piv_tol:
                if lo[kb] > -INF:
                    ti = (lo[kb] - x[kb]) / rate
                    side = 0
            if ti == INF:
                continue
            if ti < 0.0:
                ti = 0.0
            better = False
            if ti < t_best - 1e-12:
                better = True
            elif ti <= t_best + 1e-12 and leave_row >= 0:
                if bland:
                    if kb < basis[leave_row]:
                        better = True
                elif abs(w[i]) > best_piv:
                    better = True
            elif leave_row < 0 and ti < t_best:
                better = True
            if better:
                t_best = ti
                leave_row = i
                leave_side = side
                best_piv = abs(w[i])

        t = t_best if t_best < t_own else t_own
        if t == INF:
            if phase == 1:
                return BREAKDOWN, x[:n], y, iters
            return UNBOUNDED, x[:n], y, iters

        if t <= 1e-11:
            degen_run += 1
            if degen_run >= degen_threshold:
                bland = True
        else:
            degen_run = 0

        if t_own <= t_best:
            # bound flip: no basis change
            for i in range(m):
                if w[i] != 0.0:
                    x[basis[i]] += (-q_dir * w[i]) * t
            if q_dir > 0:
                x[q] = up[q]
                status[q] = _AT_UPPER
            else:
                x[q] = lo[q]
                status[q] = _AT_LOWER
        else:
            rr = leave_row
            kb = basis[rr]
            for i in range(m):
                if w[i] != 0.0:
                    x[basis[i]] += (-q_dir * w[i]) * t
            x[q] = x[q] + q_dir * t
            # snap the leaving variable exactly onto its bound
            if leave_side == 1:
                x[kb] = up[kb]
                status[kb] = _AT_UPPER
            else:
                x[kb] = lo[kb]
                status[kb] = _AT_LOWER
            piv = w[rr]
            if abs(piv) < 1e-12:
                return BREAKDOWN, x[:n], y, iters
            basis[rr] = q
            status[q] = _BASIC
            inv_piv = 1.0 / piv
            for k in range(m):
                B_inv[rr, k] *= inv_piv
            for i in range(m):
                if i != rr and w[i] != 0.0:
                    wi = w[i]
                    for k in range(m):
                        B_inv[i, k] -= wi * B_inv[rr, k]
        iters += 1


def solve_dense_lp(A: np.ndarray, b: np.ndarray, c: np.ndarray,
                   lo: np.ndarray, up: np.ndarray, senses: list[str],
                   opt_tol: float = 1e-9, piv_tol: float = 1e-10,
                   degen_threshold: int = 60, max_iter: int | None = None):
    """Solve min c.x s.t. A x (sense) b, lo <= x <= up.

    senses entries are "<=", "==", ">=" per row. Returns
    (status, x, duals, iterations); on OPTIMAL x has length n and duals
    length m. Slack handling and phase logic live in the jitted core.
    """
    A = np.ascontiguousarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    if max_iter is None:
        max_iter = 2000 + 60 * (m + n)

    slack_lo = np.empty(m)
    slack_up = np.empty(m)
    for i, s in enumerate(senses):
        if s == "<=":
            slack_lo[i], slack_up[i] = 0.0, np.inf
        elif s == ">=":
            slack_lo[i], slack_up[i] = -np.inf, 0.0
        else:
            slack_lo[i], slack_up[i] = 0.0, 0.0

    A_aug = np.hstack([A, np.eye(m)])
    lo_aug = np.concatenate([np.asarray(lo, dtype=float), slack_lo])
    up_aug = np.concatenate([np.asarray(up, dtype=float), slack_up])
    c_aug = np.concatenate([c, np.zeros(m)])

    status, x_aug, duals, iters = _solve_core(
        A_aug, b, c_aug, lo_aug, up_aug, n,
        opt_tol, piv_tol, degen_threshold, max_iter)
    return status, np.asarray(x_aug)[:n].copy(), np.asarray(duals).copy(), iters


def warmup() -> None:
    """Trigger JIT compilation on a trivial instance (cached across runs)."""
    A = np.array([[1.0, 1.0]])
    solve_dense_lp(A, np.array([1.0]), np.array([1.0, 2.0]),
                   np.zeros(2), np.full(2, 10.0), ["=="])

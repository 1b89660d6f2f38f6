"""MILP solving: LP kernel dispatch, branch-and-bound, rounding heuristic.

Small models are solved by the in-package dense simplex kernel; large
models go to the sparse HiGHS solver behind the same contract. Both paths
are deterministic run-to-run. Branch-and-bound uses best-bound node
selection with lowest-node-id tie-breaks and is therefore deterministic
given fixed options.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from . import simplex
from .model import BINARY, EQ, GE, LE, MilpModel

OPTIMAL = "optimal"
FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
LIMIT = "limit"
ERROR = "error"

# dense-kernel size ceiling; larger models route to HiGHS
_DENSE_MAX_ROWS = 600
_DENSE_MAX_CELLS = 600_000


@dataclass
class SolverOptions:
    mip_gap: float = 1e-6
    feas_tol: float = 1e-9
    int_tol: float = 1e-6
    time_limit: float | None = None
    node_limit: int | None = None
    branching: str = "most-fractional"  # or "pseudo-cost"
    heuristic_enabled: bool = True
    lp_backend: str = "auto"  # auto | simplex | highs
    # tag prefixes tried first when repairing an infeasible rounding,
    # in order (mode-exclusion binaries before commitment binaries)
    repair_priority_prefixes: tuple[str, ...] = ("PSI", "x_DG")
    repair_flip_budget: int | None = None

    def __post_init__(self):
        if self.mip_gap <= 0 or self.feas_tol <= 0 or self.int_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.branching not in ("most-fractional", "pseudo-cost"):
            raise ValueError(f"unknown branching rule {self.branching!r}")
        if self.lp_backend not in ("auto", "simplex", "highs"):
            raise ValueError(f"unknown lp backend {self.lp_backend!r}")


@dataclass
class Solution:
    status: str
    objective: float = float("nan")
    values: np.ndarray | None = None
    bound: float = float("nan")
    gap: float = float("nan")
    duals: dict[str, float] | None = None
    message: str = ""
    stats: dict = field(default_factory=dict)


class PreparedLp:
    """Model arrays cached once so repeated bound-override solves are cheap."""

    def __init__(self, model: MilpModel, backend: str):
        self.model = model
        self.n = model.n_vars
        self.m = model.n_cons
        self.c = model.objective_array()
        self.lo, self.up = model.bounds_arrays()
        self.A, self.rhs, self.senses = model.constraint_matrix()
        self.binary_idx = np.array(model.binary_indices(), dtype=int)
        self.tags = [con.tag for con in model.constraints]
        self.backend = backend
        if backend == "simplex":
            self.A_dense = self.A.toarray()
        else:
            le = [i for i, s in enumerate(self.senses) if s == LE]
            ge = [i for i, s in enumerate(self.senses) if s == GE]
            eq = [i for i, s in enumerate(self.senses) if s == EQ]
            self.le_rows, self.ge_rows, self.eq_rows = le, ge, eq
            blocks_ub = []
            if le:
                blocks_ub.append(self.A[le])
            if ge:
                blocks_ub.append(-self.A[ge])
            self.A_ub = sp.vstack(blocks_ub).tocsc() if blocks_ub else None
            self.b_ub = np.concatenate([self.rhs[le], -self.rhs[ge]]) if blocks_ub else None
            self.A_eq = self.A[eq].tocsc() if eq else None
            self.b_eq = self.rhs[eq] if eq else None


def _pick_backend(model: MilpModel, options: SolverOptions) -> str:
    if options.lp_backend != "auto":
        return options.lp_backend
    m, n = model.n_cons, model.n_vars
    if m <= _DENSE_MAX_ROWS and m * (n + m) <= _DENSE_MAX_CELLS:
        return "simplex"
    return "highs"


def prepare_lp(model: MilpModel, options: SolverOptions | None = None) -> PreparedLp:
    options = options or SolverOptions()
    return PreparedLp(model, _pick_backend(model, options))


# -- presolve reductions ------------------------------------------------------


class _Reduced:
    """Reduction of (A, senses, rhs, c, lo, up) after removing fixed columns,
    singleton rows and unconstrained columns. Keeps enough bookkeeping to
    reconstruct a full-length solution vector."""

    __slots__ = ("status", "A", "senses", "rhs", "c", "lo", "up",
                 "col_map", "fixed_vals", "obj_const", "row_map")

    def __init__(self):
        self.status = OPTIMAL


def _reduce_problem(A_dense, senses, rhs, c, lo, up):
    n = A_dense.shape[1]
    lo = lo.copy()
    up = up.copy()
    rhs = rhs.copy()
    red = _Reduced()
    fixed = np.zeros(n, dtype=bool)
    fixed_vals = np.zeros(n)
    row_alive = np.ones(A_dense.shape[0], dtype=bool)
    sense_le = np.array([s == LE for s in senses])
    sense_ge = np.array([s == GE for s in senses])
    sense_eq = np.array([s == EQ for s in senses])

    changed = True
    while changed:
        changed = False
        newly = (lo == up) & ~fixed
        if newly.any():
            vals = lo[newly]
            rhs[row_alive] -= A_dense[np.ix_(row_alive, newly)] @ vals
            fixed_vals[newly] = vals
            fixed[newly] = True
            A_dense = A_dense.copy()
            A_dense[:, newly] = 0.0
            changed = True
        live_rows = np.where(row_alive)[0]
        nz_count = (A_dense[live_rows] != 0.0).sum(axis=1)
        for pos, i in enumerate(live_rows):
            k = nz_count[pos]
            if k == 0:
                r = rhs[i]
                ok = (r >= -1e-9) if sense_le[i] else (r <= 1e-9) if sense_ge[i] else (abs(r) <= 1e-9)
                if not ok:
                    red.status = INFEASIBLE
                    return red
                row_alive[i] = False
                changed = True
            elif k == 1:
                j = int(np.argmax(A_dense[i] != 0.0))
                a = A_dense[i, j]
                r = rhs[i] / a
                if sense_eq[i]:
                    new_lo, new_up = r, r
                elif (sense_le[i] and a > 0) or (sense_ge[i] and a < 0):
                    new_lo, new_up = lo[j], min(up[j], r)
                else:
                    new_lo, new_up = max(lo[j], r), up[j]
                if new_lo > new_up + 1e-9:
                    red.status = INFEASIBLE
                    return red
                lo[j] = min(new_lo, new_up)
                up[j] = max(min(new_up, up[j]), lo[j]) if sense_eq[i] else new_up
                if sense_eq[i]:
                    lo[j] = up[j] = r
                else:
                    lo[j], up[j] = new_lo, new_up
                row_alive[i] = False
                changed = True

    # columns with no live-row support: pushed to their cheapest bound
    live_rows = np.where(row_alive)[0]
    support = (A_dense[live_rows] != 0.0).any(axis=0) if live_rows.size else np.zeros(n, dtype=bool)
    for j in range(n):
        if fixed[j] or support[j]:
            continue
        if c[j] > 0:
            v = lo[j]
        elif c[j] < 0:
            v = up[j]
        else:
            v = lo[j] if np.isfinite(lo[j]) else (up[j] if np.isfinite(up[j]) else 0.0)
        if not np.isfinite(v):
            red.status = UNBOUNDED
            return red
        fixed[j] = True
        fixed_vals[j] = v

    keep_cols = np.where(~fixed)[0]
    keep_rows = np.where(row_alive)[0]
    red.A = A_dense[np.ix_(keep_rows, keep_cols)]
    red.senses = [senses[i] for i in keep_rows]
    red.rhs = rhs[keep_rows]
    red.c = c[keep_cols]
    red.lo = lo[keep_cols]
    red.up = up[keep_cols]
    red.col_map = keep_cols
    red.row_map = keep_rows
    red.fixed_vals = fixed_vals
    red.obj_const = float(c[fixed] @ fixed_vals[fixed]) if fixed.any() else 0.0
    return red


# -- LP solving ---------------------------------------------------------------


def _solve_prepared_simplex(prep: PreparedLp, lo, up, options: SolverOptions,
                            reduce_first: bool) -> Solution:
    t0 = time.perf_counter()
    if reduce_first:
        red = _reduce_problem(prep.A_dense, prep.senses, prep.rhs, prep.c, lo, up)
        if red.status == INFEASIBLE:
            return Solution(status=INFEASIBLE, message="presolve detected infeasibility")
        if red.status == UNBOUNDED:
            return Solution(status=UNBOUNDED)
        status, x_red, duals, iters = simplex.solve_dense_lp(
            red.A, red.rhs, red.c, red.lo, red.up, red.senses,
            opt_tol=options.feas_tol, degen_threshold=60)
        x = red.fixed_vals.copy()
        if red.col_map.size:
            x[red.col_map] = x_red
        obj = float(prep.c @ x)
        dual_map = None
    else:
        status, x, y, iters = simplex.solve_dense_lp(
            prep.A_dense, prep.rhs, prep.c, lo, up, prep.senses,
            opt_tol=options.feas_tol, degen_threshold=60)
        obj = float(prep.c @ x)
        dual_map = {tag: float(y[i]) for i, tag in enumerate(prep.tags)}
    wall = time.perf_counter() - t0
    stats = {"lp_iterations": int(iters), "wall_time": wall, "backend": "simplex"}
    if status == simplex.OPTIMAL:
        return Solution(status=OPTIMAL, objective=obj, values=x, bound=obj,
                        gap=0.0, duals=dual_map, stats=stats)
    if status == simplex.INFEASIBLE:
        return Solution(status=INFEASIBLE, stats=stats)
    if status == simplex.UNBOUNDED:
        return Solution(status=UNBOUNDED, stats=stats)
    if status == simplex.ITER_LIMIT:
        return Solution(status=LIMIT, message="simplex iteration limit", stats=stats)
    return Solution(status=ERROR, message="simplex numerical breakdown", stats=stats)


def _solve_prepared_highs(prep: PreparedLp, lo, up, options: SolverOptions) -> Solution:
    t0 = time.perf_counter()
    bounds = list(zip(np.where(np.isfinite(lo), lo, -np.inf),
                      np.where(np.isfinite(up), up, np.inf)))
    lp_opts = {"presolve": True}
    if options.time_limit is not None:
        lp_opts["time_limit"] = options.time_limit
    res = linprog(prep.c, A_ub=prep.A_ub, b_ub=prep.b_ub, A_eq=prep.A_eq,
                  b_eq=prep.b_eq, bounds=bounds, method="highs", options=lp_opts)
    wall = time.perf_counter() - t0
    stats = {"lp_iterations": int(getattr(res, "nit", 0) or 0),
             "wall_time": wall, "backend": "highs"}
    if res.status == 0:
        duals: dict[str, float] = {}
        n_le = len(prep.le_rows)
        if prep.A_ub is not None and res.ineqlin is not None:
            marg = np.asarray(res.ineqlin.marginals)
            for k, i in enumerate(prep.le_rows):
                duals[prep.tags[i]] = float(marg[k])
            for k, i in enumerate(prep.ge_rows):
                duals[prep.tags[i]] = float(-marg[n_le + k])
        if prep.A_eq is not None and res.eqlin is not None:
            marg = np.asarray(res.eqlin.marginals)
            for k, i in enumerate(prep.eq_rows):
                duals[prep.tags[i]] = float(marg[k])
        return Solution(status=OPTIMAL, objective=float(res.fun),
                        values=np.asarray(res.x), bound=float(res.fun),
                        gap=0.0, duals=duals, stats=stats)
    if res.status == 2:
        return Solution(status=INFEASIBLE, stats=stats)
    if res.status == 3:
        return Solution(status=UNBOUNDED, stats=stats)
    if res.status == 1:
        return Solution(status=LIMIT, message="highs hit a limit", stats=stats)
    return Solution(status=ERROR, message=f"highs numerical failure: {res.message}",
                    stats=stats)


def solve_prepared(prep: PreparedLp, lo=None, up=None,
                   options: SolverOptions | None = None,
                   reduce_first: bool = False) -> Solution:
    """Solve the LP relaxation of a prepared model with optional bound overrides."""
    options = options or SolverOptions()
    lo = prep.lo if lo is None else lo
    up = prep.up if up is None else up
    if prep.backend == "simplex":
        sol = _solve_prepared_simplex(prep, lo, up, options, reduce_first)
        if sol.status == ERROR:
            # numerical breakdown in the dense kernel: retry on the sparse path
            fallback = PreparedLp(prep.model, "highs")
            sol = _solve_prepared_highs(fallback, lo, up, options)
            sol.stats["backend"] = "highs-fallback"
        return sol
    return _solve_prepared_highs(prep, lo, up, options)


def solve_lp(model: MilpModel, options: SolverOptions | None = None,
             lo=None, up=None) -> Solution:
    """Solve the LP relaxation (integrality dropped) of a canonical model."""
    options = options or SolverOptions()
    prep = prepare_lp(model, options)
    return solve_prepared(prep, lo, up, options)


# -- branch and bound ---------------------------------------------------------


def _fractionality(values: np.ndarray, binary_idx: np.ndarray, int_tol: float):
    v = values[binary_idx]
    frac = np.abs(v - np.round(v))
    mask = frac > int_tol
    return frac, mask


def branch_and_bound(model: MilpModel, options: SolverOptions | None = None) -> Solution:
    """Exact MILP solve: best-bound search, deterministic tie-breaking.

    Branching picks the most fractional binary (ties: lowest variable
    index); "pseudo-cost" scores degradations once observed, falling back
    to fractionality before any history exists.
    """
    options = options or SolverOptions()
    t_start = time.monotonic()
    prep = prepare_lp(model, options)
    nbin = prep.binary_idx.size

    root = solve_prepared(prep, options=options, reduce_first=False)
    if root.status in (INFEASIBLE, UNBOUNDED, ERROR, LIMIT):
        root.stats["nodes"] = 0
        return root

    pseudo_up = np.zeros(model.n_vars)
    pseudo_dn = np.zeros(model.n_vars)
    pseudo_n = np.zeros(model.n_vars)

    incumbent: np.ndarray | None = None
    inc_obj = np.inf
    nodes = 0
    lp_iters = root.stats.get("lp_iterations", 0)

    def pick_branch_var(values) -> int:
        frac, mask = _fractionality(values, prep.binary_idx, options.int_tol)
        cand = prep.binary_idx[mask]
        if cand.size == 0:
            return -1
        if options.branching == "pseudo-cost" and pseudo_n[cand].max(initial=0) > 0:
            hist = np.where(pseudo_n[cand] > 0,
                            (pseudo_up[cand] + pseudo_dn[cand]) / np.maximum(pseudo_n[cand], 1),
                            0.0)
            score = hist * np.minimum(frac[mask], 1 - frac[mask])
        else:
            score = np.minimum(frac[mask], 1 - frac[mask])
        best = np.argmax(score)  # first max wins: lowest index on ties
        return int(cand[best])

    frac, mask = _fractionality(root.values, prep.binary_idx, options.int_tol)
    if not mask.any():
        root.stats.update(nodes=0, lp_iterations=lp_iters)
        root.gap = 0.0
        return Solution(status=OPTIMAL, objective=root.objective, values=root.values,
                        bound=root.objective, gap=0.0, stats=root.stats)

    heap: list[tuple[float, int, np.ndarray, np.ndarray, np.ndarray]] = []
    next_id = 0
    heapq.heappush(heap, (root.objective, next_id, prep.lo.copy(), prep.up.copy(),
                          root.values))
    next_id += 1
    best_bound = root.objective
    status = OPTIMAL
    message = ""

    while heap:
        if options.node_limit is not None and nodes >= options.node_limit:
            status = LIMIT
            message = "node limit reached"
            break
        if options.time_limit is not None and time.monotonic() - t_start > options.time_limit:
            status = LIMIT
            message = "time limit reached"
            break
        bound, _, lo_n, up_n, vals = heapq.heappop(heap)
        best_bound = bound
        if incumbent is not None and bound >= inc_obj - options.mip_gap * max(1.0, abs(inc_obj)):
            best_bound = inc_obj  # everything left is dominated
            break
        j = pick_branch_var(vals)
        if j < 0:
            continue
        vj = vals[j]
        for side in (0, 1):
            lo_c = lo_n.copy()
            up_c = up_n.copy()
            if side == 0:
                up_c[j] = np.floor(vj)
            else:
                lo_c[j] = np.ceil(vj)
            child = solve_prepared(prep, lo_c, up_c, options, reduce_first=True)
            nodes += 1
            lp_iters += child.stats.get("lp_iterations", 0)
            if child.status != OPTIMAL:
                continue
            degr = max(0.0, child.objective - bound)
            if side == 0:
                pseudo_dn[j] += degr / max(vj - np.floor(vj), 1e-9)
            else:
                pseudo_up[j] += degr / max(np.ceil(vj) - vj, 1e-9)
            pseudo_n[j] += 0.5
            if incumbent is not None and child.objective >= inc_obj - options.mip_gap * max(1.0, abs(inc_obj)):
                continue
            _, cmask = _fractionality(child.values, prep.binary_idx, options.int_tol)
            if not cmask.any():
                if child.objective < inc_obj:
                    inc_obj = child.objective
                    incumbent = child.values
            else:
                heapq.heappush(heap, (child.objective, next_id, lo_c, up_c, child.values))
                next_id += 1
    else:
        best_bound = inc_obj if incumbent is not None else best_bound

    if not heap and incumbent is not None and status == OPTIMAL:
        best_bound = inc_obj

    wall = time.monotonic() - t_start
    stats = {"nodes": nodes, "lp_iterations": lp_iters, "wall_time": wall}
    if incumbent is None:
        if status == LIMIT:
            return Solution(status=LIMIT, message=message, bound=best_bound, stats=stats)
        return Solution(status=INFEASIBLE, bound=best_bound, stats=stats,
                        message="no integral solution exists")
    gap = (inc_obj - best_bound) / max(1.0, abs(inc_obj))
    if status == LIMIT and gap > options.mip_gap:
        return Solution(status=FEASIBLE, objective=inc_obj, values=incumbent,
                        bound=best_bound, gap=gap, message=message, stats=stats)
    return Solution(status=OPTIMAL, objective=inc_obj, values=incumbent,
                    bound=min(best_bound, inc_obj), gap=max(gap, 0.0), stats=stats)


# -- rounding heuristic -------------------------------------------------------


def _repair_order(prep: PreparedLp, frac_vals: np.ndarray,
                  prefixes: tuple[str, ...]) -> list[int]:
    """Binary indices grouped by tag prefix priority, most fractional first."""
    tags = [prep.model.variables[j].tag for j in prep.binary_idx]
    order: list[int] = []
    groups = list(prefixes) + [None]
    for pref in groups:
        members = []
        for k, j in enumerate(prep.binary_idx):
            if pref is None:
                if any(tags[k].startswith(p) for p in prefixes):
                    continue
            elif not tags[k].startswith(pref):
                continue
            members.append((abs(frac_vals[k] - 0.5), j))
        members.sort(key=lambda t: (t[0], t[1]))
        order.extend(j for _, j in members)
    return order


def round_and_repair(model: MilpModel, relaxed: Solution,
                     options: SolverOptions | None = None,
                     rounding_values: np.ndarray | None = None) -> Solution:
    """Fix binaries by thresholding the relaxation, then repair infeasibility.

    rounding_values, when given, replaces the raw relaxation values for
    thresholding (full-length vector). Callers use it to stabilize binaries
    that are degenerate in the relaxation (several LP-optimal values), e.g.
    mode-exclusion flags whose vertex value is arbitrary.

    Repair searches flips of the rounded binaries: first each candidate
    alone, then cumulatively, exclusion binaries before commitments, most
    ambiguous (closest to 0.5) first, until the fixed LP turns feasible or
    the flip budget runs out.
    """
    options = options or SolverOptions()
    if relaxed.status != OPTIMAL or relaxed.values is None:
        return Solution(status=ERROR, message="relaxation not solved to optimality")
    prep = prepare_lp(model, options)
    if prep.binary_idx.size == 0:
        out = Solution(status=OPTIMAL, objective=relaxed.objective,
                       values=relaxed.values, bound=relaxed.objective, gap=0.0,
                       stats=dict(relaxed.stats))
        return out

    raw = relaxed.values if rounding_values is None else rounding_values
    vals = raw[prep.binary_idx]
    true_frac = np.abs(relaxed.values[prep.binary_idx]
                       - np.round(relaxed.values[prep.binary_idx]))
    if (true_frac <= options.int_tol).all():
        return Solution(status=OPTIMAL, objective=relaxed.objective,
                        values=relaxed.values, bound=relaxed.objective,
                        gap=0.0, stats=dict(relaxed.stats))

    fixed = (vals >= 0.5).astype(float)
    lo = prep.lo.copy()
    up = prep.up.copy()
    lo[prep.binary_idx] = fixed
    up[prep.binary_idx] = fixed

    attempts = 0
    budget = options.repair_flip_budget
    if budget is None:
        budget = min(48, max(8, prep.binary_idx.size))
    order = _repair_order(prep, vals, options.repair_priority_prefixes)

    sol = solve_prepared(prep, lo, up, options, reduce_first=True)
    flipped: list[str] = []
    # pass 1: single flips, reverted when they do not help
    k = 0
    while sol.status != OPTIMAL and k < len(order) and attempts < budget:
        j = order[k]
        k += 1
        old = lo[j]
        lo[j] = up[j] = 1.0 - old
        attempts += 1
        sol = solve_prepared(prep, lo, up, options, reduce_first=True)
        if sol.status == OPTIMAL:
            flipped.append(prep.model.variables[j].tag)
        else:
            lo[j] = up[j] = old
    # pass 2: cumulative flips
    k = 0
    while sol.status != OPTIMAL and k < len(order) and attempts < budget:
        j = order[k]
        k += 1
        lo[j] = up[j] = 1.0 - lo[j]
        flipped.append(prep.model.variables[j].tag)
        attempts += 1
        sol = solve_prepared(prep, lo, up, options, reduce_first=True)

    if sol.status != OPTIMAL:
        return Solution(status=INFEASIBLE, bound=relaxed.objective,
                        message="repair budget exhausted after flipping: "
                                + ", ".join(flipped[-8:]),
                        stats={"repair_attempts": attempts})
    gap = (sol.objective - relaxed.objective) / max(1.0, abs(sol.objective))
    stats = dict(sol.stats)
    stats.update(repair_attempts=attempts, flipped=len(flipped))
    return Solution(status=FEASIBLE if gap > options.mip_gap else OPTIMAL,
                    objective=sol.objective, values=sol.values,
                    bound=relaxed.objective, gap=max(gap, 0.0), stats=stats)


def solve_milp(model: MilpModel, options: SolverOptions | None = None,
               exact: bool | None = None,
               rounding_values: np.ndarray | None = None) -> Solution:
    """Default pipeline: exact search for short horizons, LP + repair otherwise."""
    options = options or SolverOptions()
    if exact is None:
        exact = model.horizon <= 48
    if exact:
        return branch_and_bound(model, options)
    relaxed = solve_lp(model, options)
    if relaxed.status != OPTIMAL:
        return relaxed
    return round_and_repair(model, relaxed, options, rounding_values)

"""Depth-first branch and bound for mixed-binary/integer counterparts.

Child nodes differ from their parent by a single variable bound, so they
are re-solved with the dual simplex starting from the parent's final
tableau (:func:`robopt.solver.simplex.resolve_lp`); a cold solve only
happens when no parent state is available.  The search dives toward the
rounding of the branching variable first, which finds incumbents early and
keeps the stack of retained tableaus short.
"""

from __future__ import annotations

import math
import time as _time

import numpy as np

from .. import errors
from .counterpart import (Counterpart, Solution, OPTIMAL, INFEASIBLE,
                          UNBOUNDED, LIMIT)
from .simplex import solve_lp, resolve_lp

INT_TOL = 1e-6
MIP_GAP = 1e-6

#: total bytes of parent tableaus kept on the stack before falling back to
#: cold re-solves for the far child of a branch
STATE_BYTES_BUDGET = 2 << 30


def _fractional(values, int_cols, var_names, priority=None):
    """Most fractional integer column (closest to .5), or -1 if integral.

    With ``priority`` (column -> rank, higher branches first), the highest
    rank with any fractional column wins and fractionality only breaks
    ties inside that rank.
    """
    best, best_score, best_rank = -1, INT_TOL, -math.inf
    for j in int_cols:
        v = values[var_names[j]]
        score = 0.5 - abs(v - math.floor(v) - 0.5)
        if score <= INT_TOL:
            continue
        rank = priority.get(j, 0) if priority else 0
        if rank > best_rank or (rank == best_rank and score > best_score):
            best, best_score, best_rank = j, score, rank
    return best


def solve_milp(cp: Counterpart, node_limit=200000, mip_gap=MIP_GAP,
               incumbent=None, branch_priority=None,
               verbose=False) -> Solution:
    """Branch and bound over the integer columns of ``cp``.

    ``incumbent`` optionally maps variable names to a known feasible point;
    its objective value primes the cutoff so nodes above it are pruned
    immediately.  ``branch_priority`` optionally maps column indices to a
    rank; fractional columns with higher rank are branched on first.  Raises :class:`errors.NodeLimit` only if no feasible
    point was found within the node budget; otherwise the best incumbent
    is returned with ``stats['gap']`` reporting the unresolved gap.
    """
    int_cols = cp.integer_columns()
    if not int_cols:
        return solve_lp(cp)

    best_obj = math.inf
    best_vals = None
    if incumbent is not None:
        x = np.array([incumbent.get(name, 0.0) for name in cp.var_names])
        if cp.max_violation(x) <= 1e-6:
            best_obj = cp.objective_value(x)
            best_vals = {name: float(v)
                         for name, v in zip(cp.var_names, x)}

    root = solve_lp(cp, keep_state=True)
    if root.status == INFEASIBLE:
        return Solution(INFEASIBLE, stats={"nodes": 1})
    if root.status == UNBOUNDED:
        return Solution(UNBOUNDED, stats={"nodes": 1})

    lb0 = np.array(cp.lb, dtype=float)
    ub0 = np.array(cp.ub, dtype=float)
    root_bound = root.objective
    # snapshot of the root basis for reduced-cost fixing: once an incumbent
    # is known, a nonbasic binary whose reduced cost exceeds the gap to the
    # cutoff can never flip bounds in a better solution
    n = cp.num_vars
    root_rc = root.state.rc[:n].copy()
    root_x = np.array([root.values[name] for name in cp.var_names])
    root_at_lb = root_x <= lb0 + INT_TOL
    root_at_ub = root_x >= ub0 - INT_TOL
    glob_lo = lb0.copy()
    glob_hi = ub0.copy()
    # stack entries: (parent bound, lb, ub, parent state or None); LIFO
    stack = [(root.objective, lb0.copy(), ub0.copy(), root.state)]
    state_bytes = root.state.nbytes
    nodes = 0

    def cutoff():
        return best_obj - mip_gap * (1.0 + abs(best_obj))

    def tighten_globals():
        margin = cutoff() - root_bound
        if not math.isfinite(margin) or margin <= 0:
            return
        for j in int_cols:
            if glob_hi[j] <= glob_lo[j]:
                continue
            if root_at_lb[j] and root_rc[j] > margin:
                glob_hi[j] = lb0[j]
            elif root_at_ub[j] and -root_rc[j] > margin:
                glob_lo[j] = ub0[j]

    tighten_globals()

    while stack:
        bound, lo, hi, state = stack.pop()
        if state is not None:
            state_bytes -= state.nbytes
        if bound >= cutoff():
            continue
        np.maximum(lo, glob_lo, out=lo)
        np.minimum(hi, glob_hi, out=hi)
        if np.any(lo > hi):
            continue
        nodes += 1
        if verbose and nodes % 100 == 0:
            print("node %d: bound %.8g best %.8g open %d"
                  % (nodes, bound, best_obj, len(stack)))
        if nodes > node_limit:
            if best_vals is None:
                raise errors.NodeLimit(
                    "no feasible point within %d nodes" % node_limit)
            stack.append((bound, lo, hi, None))
            break
        t_node = _time.time()
        if state is None:
            sol = solve_lp(cp, lb=lo, ub=hi, keep_state=True)
        elif nodes == 1:
            sol = root
        else:
            sol = resolve_lp(cp, state, lo, hi)
        if verbose and _time.time() - t_node > 5.0:
            print("node %d: %s lp %.1f s (%s iters, %s)"
                  % (nodes, "cold" if state is None else "warm",
                     _time.time() - t_node,
                     sol.stats.get("iterations", "?"), sol.status))
        if sol.status != OPTIMAL:
            continue
        if sol.objective >= cutoff():
            continue
        j = _fractional(sol.values, int_cols, cp.var_names, branch_priority)
        if j < 0:
            # double-check integral candidates against the original rows
            # before promoting them; a drifted node solve must not plant a
            # bogus incumbent
            xv = np.array([sol.values[name] for name in cp.var_names])
            if cp.max_violation(xv) > 1e-6:
                continue
            best_obj = sol.objective
            best_vals = dict(sol.values)
            if verbose:
                print("node %d: incumbent %.8g" % (nodes, best_obj))
            tighten_globals()
            # with a fresh cutoff, switch attention to the most promising
            # open subtrees (pop() takes the last entry)
            stack.sort(key=lambda entry: -entry[0])
            continue
        v = sol.values[cp.var_names[j]]
        down = lo.copy(), hi.copy()
        down[1][j] = math.floor(v)
        up = lo.copy(), hi.copy()
        up[0][j] = math.ceil(v)
        near_first = (down, up) if v - math.floor(v) < 0.5 else (up, down)
        far, near = near_first[1], near_first[0]
        # far child first (explored later); it gets a copy of the parent
        # tableau while the budget lasts, the near child consumes the
        # parent state itself
        far_state = None
        if sol.state is not None and \
                state_bytes + sol.state.nbytes <= STATE_BYTES_BUDGET:
            far_state = sol.state.copy()
            state_bytes += far_state.nbytes
        stack.append((sol.objective, far[0], far[1], far_state))
        if sol.state is not None:
            state_bytes += sol.state.nbytes
        stack.append((sol.objective, near[0], near[1], sol.state))

    if best_vals is None:
        return Solution(INFEASIBLE, stats={"nodes": nodes})
    best_bound = min((entry[0] for entry in stack), default=best_obj)
    best_bound = min(best_bound, best_obj)
    gap = abs(best_obj - best_bound) / (1.0 + abs(best_obj))
    # snap integer columns exactly
    for j in int_cols:
        name = cp.var_names[j]
        best_vals[name] = float(round(best_vals[name]))
    obj = cp.objective_value(
        np.array([best_vals[nm] for nm in cp.var_names]))
    return Solution(OPTIMAL, obj, best_vals,
                    {"nodes": nodes, "gap": gap, "dual_bound": best_bound})

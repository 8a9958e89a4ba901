"""Optional cvxpy bridge for counterparts with second-order-cone rows."""

from __future__ import annotations

import math

import numpy as np

from .counterpart import (Counterpart, Solution, BINARY, INTEGER,
                          OPTIMAL, INFEASIBLE, UNBOUNDED, LIMIT)

INF = math.inf


def have_cvxpy() -> bool:
    try:
        import cvxpy  # noqa: F401
    except ImportError:
        return False
    return True


def solve_conic(cp: Counterpart) -> Solution:
    """Solve ``cp`` (linear + SOC rows, mixed-integer allowed) with cvxpy."""
    import cvxpy as vp

    n = cp.num_vars
    x = vp.Variable(n)
    cons = []
    for j in range(n):
        if cp.lb[j] > -INF:
            cons.append(x[j] >= cp.lb[j])
        if cp.ub[j] < INF:
            cons.append(x[j] <= cp.ub[j])
        if cp.kind[j] == BINARY:
            cons.append(x[j] == vp.Variable(boolean=True))
        elif cp.kind[j] == INTEGER:
            cons.append(x[j] == vp.Variable(integer=True))
    for coeffs, sense, rhs, _ in cp.rows:
        expr = sum(v * x[j] for j, v in coeffs.items())
        if sense == "<=":
            cons.append(expr <= rhs)
        elif sense == ">=":
            cons.append(expr >= rhs)
        else:
            cons.append(expr == rhs)
    for elems, rhs, _ in cp.soc_rows:
        vec = vp.hstack([sum(v * x[j] for j, v in e[0].items()) + e[1]
                         for e in elems])
        rexpr = sum(v * x[j] for j, v in rhs[0].items()) + rhs[1]
        cons.append(vp.norm(vec, 2) <= rexpr)
    obj = sum(v * x[j] for j, v in cp.obj.items()) + cp.obj_offset
    prob = vp.Problem(vp.Minimize(obj), cons)
    prob.solve()
    if prob.status in ("optimal", "optimal_inaccurate"):
        xv = np.asarray(x.value, dtype=float)
        vals = {name: float(xv[j]) for j, name in enumerate(cp.var_names)}
        return Solution(OPTIMAL, float(prob.value), vals,
                        {"backend": "cvxpy"})
    if "infeasible" in prob.status:
        return Solution(INFEASIBLE)
    if "unbounded" in prob.status:
        return Solution(UNBOUNDED)
    return Solution(LIMIT, stats={"backend": "cvxpy",
                                  "raw_status": prob.status})

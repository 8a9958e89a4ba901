"""Bundled external solver: reads an LP file, writes a solution file.

Installed as the ``robopt-extsolve`` console script so it can serve as the
default external backend::

    robopt-extsolve problem.lp solution.txt

Pure LPs and MILPs go through :func:`scipy.optimize.linprog` /
:func:`scipy.optimize.milp` (HiGHS).  Files with quadratic cone rows need
``cvxpy`` (install the ``soc`` extra).
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from .solver.counterpart import BINARY, INTEGER
from .solver.lpfile import read_lp

INF = math.inf


def _solve_linear(cp):
    from scipy.optimize import milp, LinearConstraint, Bounds

    n = cp.num_vars
    c = np.zeros(n)
    for j, v in cp.obj.items():
        c[j] = v
    cons = []
    for coeffs, sense, rhs, _ in cp.rows:
        row = np.zeros(n)
        for j, v in coeffs.items():
            row[j] = v
        if sense == "<=":
            cons.append(LinearConstraint(row, -INF, rhs))
        elif sense == ">=":
            cons.append(LinearConstraint(row, rhs, INF))
        else:
            cons.append(LinearConstraint(row, rhs, rhs))
    integrality = np.array(
        [1 if k in (BINARY, INTEGER) else 0 for k in cp.kind])
    res = milp(c, constraints=cons, bounds=Bounds(cp.lb, cp.ub),
               integrality=integrality)
    if res.status == 0:
        return "optimal", res.fun + cp.obj_offset, res.x
    if res.status == 2:
        return "infeasible", math.nan, None
    if res.status == 3:
        return "unbounded", math.nan, None
    raise RuntimeError("scipy milp failed: %s" % res.message)


def _solve_conic(cp):
    from .solver.conic import solve_conic

    sol = solve_conic(cp)
    if sol.status == "optimal":
        x = np.array([sol.values[name] for name in cp.var_names])
        return "optimal", sol.objective, x
    if sol.status in ("infeasible", "unbounded"):
        return sol.status, math.nan, None
    raise RuntimeError("cvxpy failed: %s" % sol.stats.get("raw_status"))


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="robopt-extsolve",
        description="solve an LP/MILP/SOC file and write a solution file")
    parser.add_argument("lp_file")
    parser.add_argument("sol_file")
    args = parser.parse_args(argv)

    with open(args.lp_file) as fh:
        cp = read_lp(fh.read())
    if cp.has_soc():
        status, obj, x = _solve_conic(cp)
    else:
        status, obj, x = _solve_linear(cp)

    with open(args.sol_file, "w") as fh:
        fh.write("status %s\n" % status)
        if status == "optimal":
            fh.write("objective %s\n" % repr(obj))
            for j, name in enumerate(cp.var_names):
                fh.write("%s %s\n" % (name, repr(float(x[j]))))
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Deterministic counterpart container and solution objects."""

from __future__ import annotations

import math

from .. import errors

CONTINUOUS = "c"
BINARY = "b"
INTEGER = "i"

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
LIMIT = "limit"


class Counterpart:
    """A finite program: bounded variables, linear rows, optional
    second-order-cone rows ``||elems||_2 <= rhs`` (affine elements)."""

    def __init__(self, name="counterpart"):
        self.name = name
        self.var_names: list[str] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.kind: list[str] = []
        self.index: dict[str, int] = {}
        # rows: (coeffs dict col->float, sense, rhs, name)
        self.rows: list[tuple[dict, str, float, str]] = []
        # soc rows: (elems list[(coeffs, const)], rhs (coeffs, const), name)
        self.soc_rows: list[tuple[list, tuple, str]] = []
        self.obj: dict[int, float] = {}
        self.obj_offset = 0.0

    # --- construction ------------------------------------------------------

    def add_var(self, name, lb=-math.inf, ub=math.inf, kind=CONTINUOUS) -> int:
        if name in self.index:
            raise errors.DuplicateName("counterpart column %r" % name)
        if lb > ub:
            raise errors.InvalidBounds("column %s: lb %g > ub %g" % (name, lb, ub))
        if kind == BINARY:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        j = len(self.var_names)
        self.var_names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.kind.append(kind)
        self.index[name] = j
        return j

    def add_row(self, coeffs, sense, rhs, name=None):
        if sense not in ("<=", ">=", "=="):
            raise ValueError("bad row sense %r" % (sense,))
        coeffs = {int(j): float(c) for j, c in coeffs.items() if c != 0.0}
        if name is None:
            name = "c%d" % len(self.rows)
        self.rows.append((coeffs, sense, float(rhs), name))

    def add_soc_row(self, elems, rhs, name=None):
        """``elems``: list of (coeffs dict, const); ``rhs``: (coeffs, const)."""
        if name is None:
            name = "q%d" % len(self.soc_rows)
        elems = [({int(j): float(c) for j, c in e[0].items()}, float(e[1]))
                 for e in elems]
        rhs = ({int(j): float(c) for j, c in rhs[0].items()}, float(rhs[1]))
        self.soc_rows.append((elems, rhs, name))

    def set_objective(self, coeffs, offset=0.0):
        self.obj = {int(j): float(c) for j, c in coeffs.items() if c != 0.0}
        self.obj_offset = float(offset)

    # --- queries -----------------------------------------------------------

    @property
    def num_vars(self):
        return len(self.var_names)

    @property
    def num_rows(self):
        return len(self.rows)

    def integer_columns(self):
        return [j for j, k in enumerate(self.kind) if k in (BINARY, INTEGER)]

    def has_soc(self):
        return bool(self.soc_rows)

    def objective_value(self, values):
        tot = self.obj_offset
        for j, c in self.obj.items():
            tot += c * values[j]
        return tot

    def row_activity(self, coeffs, values):
        return sum(c * values[j] for j, c in coeffs.items())

    def max_violation(self, values):
        """Worst constraint/bound violation of a dense value vector."""
        worst = 0.0
        for j in range(self.num_vars):
            worst = max(worst, self.lb[j] - values[j], values[j] - self.ub[j])
        for coeffs, sense, rhs, _ in self.rows:
            act = self.row_activity(coeffs, values)
            if sense == "<=":
                worst = max(worst, act - rhs)
            elif sense == ">=":
                worst = max(worst, rhs - act)
            else:
                worst = max(worst, abs(act - rhs))
        for elems, rhs, _ in self.soc_rows:
            nrm = math.sqrt(sum((self.row_activity(e[0], values) + e[1]) ** 2
                                for e in elems))
            rv = self.row_activity(rhs[0], values) + rhs[1]
            worst = max(worst, nrm - rv)
        return worst

    def copy(self):
        cp = Counterpart(self.name)
        cp.var_names = list(self.var_names)
        cp.lb = list(self.lb)
        cp.ub = list(self.ub)
        cp.kind = list(self.kind)
        cp.index = dict(self.index)
        cp.rows = [(dict(c), s, r, n) for c, s, r, n in self.rows]
        cp.soc_rows = [([(dict(e[0]), e[1]) for e in elems],
                        (dict(rhs[0]), rhs[1]), n)
                       for elems, rhs, n in self.soc_rows]
        cp.obj = dict(self.obj)
        cp.obj_offset = self.obj_offset
        return cp


class Solution:
    """Solver result: status, objective, and a name -> value map."""

    def __init__(self, status, objective=math.nan, values=None, stats=None):
        self.status = status
        self.objective = objective
        self.values = values or {}
        self.stats = stats or {}

    @property
    def optimal(self):
        return self.status == OPTIMAL

    def value(self, name, default=0.0):
        return self.values.get(name, default)

    def __repr__(self):
        return "<Solution %s obj=%s>" % (self.status, self.objective)

"""Declarative model layer: variables, uncertain parameters, expressions, constraints.

A :class:`Model` holds the multi-stage problem in declarative form.  Decisions
are registered as static or adaptive variables with a time stage; uncertain
parameters carry the stage at which they become observable, or (for
decision-dependent discovery) an observation window managed through
:meth:`Model.add_ddu`.  Expressions are affine in decisions and affine in
uncertain parameters, with decision-times-uncertainty product terms allowed.
"""

from __future__ import annotations

import math
from typing import Iterable, Optional

from . import errors

REAL = "real"
BINARY = "binary"
INTEGER = "integer"

ROBUST = "robust"
STOCHASTIC = "stochastic"

_KINDS = (REAL, BINARY, INTEGER)
_SENSES = ("<=", ">=", "==")


class DecisionVariable:
    """A single decision variable.  Hash/equality are by identity."""

    __slots__ = ("name", "kind", "adaptive", "stage", "lb", "ub",
                 "is_measurement", "measured_uncertainty")

    def __init__(self, name, kind=REAL, adaptive=False, stage=1,
                 lb=None, ub=None, is_measurement=False,
                 measured_uncertainty=None):
        if kind not in _KINDS:
            raise ValueError("unknown variable kind %r" % (kind,))
        if lb is None:
            lb = 0.0 if kind == BINARY else -math.inf
        if ub is None:
            ub = 1.0 if kind == BINARY else math.inf
        if lb > ub:
            raise errors.InvalidBounds(
                "variable %s has lb %g > ub %g" % (name, lb, ub))
        if kind == BINARY and (lb < 0.0 or ub > 1.0):
            raise errors.InvalidBounds(
                "binary variable %s must have bounds within [0, 1]" % name)
        if not adaptive and stage != 1:
            raise errors.AdaptiveStageOutOfRange(
                "static variable %s must be at stage 1" % name)
        self.name = name
        self.kind = kind
        self.adaptive = adaptive
        self.stage = int(stage)
        self.lb = float(lb)
        self.ub = float(ub)
        self.is_measurement = is_measurement
        self.measured_uncertainty = measured_uncertainty

    # arithmetic lifts to LinearExpr
    def __add__(self, other):
        return LinearExpr.wrap(self) + other

    __radd__ = __add__

    def __sub__(self, other):
        return LinearExpr.wrap(self) - other

    def __rsub__(self, other):
        return LinearExpr.wrap(other) - self

    def __mul__(self, other):
        return LinearExpr.wrap(self) * other

    __rmul__ = __mul__

    def __neg__(self):
        return LinearExpr.wrap(self) * -1.0

    def __le__(self, other):
        return LinearExpr.wrap(self) <= other

    def __ge__(self, other):
        return LinearExpr.wrap(self) >= other

    def __repr__(self):
        tag = "adaptive" if self.adaptive else "static"
        return "<Var %s %s %s t=%d>" % (self.name, self.kind, tag, self.stage)


class UncertainParameter:
    """An uncertain parameter; ``stage`` is the stage at which it is revealed
    (exogenous case).  Decisions at stage ``t`` may depend on exogenous
    parameters revealed at stages strictly before ``t``."""

    __slots__ = ("name", "stage", "observable", "ddu_window",
                 "observation_cost", "paired_with")

    def __init__(self, name, stage=1, observable=True):
        self.name = name
        self.stage = int(stage)
        self.observable = observable
        self.ddu_window = None        # (first_stage, last_stage) once DDU
        self.observation_cost = None
        self.paired_with = set()

    @property
    def is_ddu(self):
        return self.ddu_window is not None

    def __add__(self, other):
        return LinearExpr.wrap(self) + other

    __radd__ = __add__

    def __sub__(self, other):
        return LinearExpr.wrap(self) - other

    def __rsub__(self, other):
        return LinearExpr.wrap(other) - self

    def __mul__(self, other):
        return LinearExpr.wrap(self) * other

    __rmul__ = __mul__

    def __neg__(self):
        return LinearExpr.wrap(self) * -1.0

    def __le__(self, other):
        return LinearExpr.wrap(self) <= other

    def __ge__(self, other):
        return LinearExpr.wrap(self) >= other

    def __repr__(self):
        return "<Unc %s t=%d%s>" % (
            self.name, self.stage, "" if self.observable else " aux")


class LinearExpr:
    """Expression affine in decisions and affine in uncertain parameters.

    Terms: a constant, per-variable coefficients, per-uncertainty
    coefficients, and (variable, uncertainty) product coefficients.  An
    optional 2-norm term ``||(e_1, ..., e_m)||`` of purely uncertain affine
    expressions may appear with a +1 sign (used in uncertainty-set
    constraints such as ellipsoids).
    """

    __slots__ = ("const", "dec", "unc", "prod", "norm")

    def __init__(self, const=0.0, dec=None, unc=None, prod=None, norm=None):
        self.const = float(const)
        self.dec = dict(dec) if dec else {}
        self.unc = dict(unc) if unc else {}
        self.prod = dict(prod) if prod else {}
        self.norm = norm  # list[LinearExpr] or None

    @staticmethod
    def wrap(x) -> "LinearExpr":
        if isinstance(x, LinearExpr):
            return x
        if isinstance(x, DecisionVariable):
            return LinearExpr(dec={x: 1.0})
        if isinstance(x, UncertainParameter):
            return LinearExpr(unc={x: 1.0})
        if isinstance(x, (int, float)):
            return LinearExpr(const=float(x))
        raise TypeError("cannot build expression from %r" % (x,))

    def copy(self) -> "LinearExpr":
        return LinearExpr(self.const, self.dec, self.unc, self.prod,
                          None if self.norm is None else list(self.norm))

    # --- structure queries -------------------------------------------------

    def is_deterministic(self):
        return not self.unc and not self.prod and self.norm is None

    def is_certain(self):
        """True when no uncertain parameter appears (norm counts)."""
        return self.is_deterministic()

    def is_decision_free(self):
        return not self.dec and not self.prod

    def variables(self):
        seen = dict.fromkeys(self.dec)
        for v, _ in self.prod:
            seen[v] = None
        return list(seen)

    def uncertainties(self):
        seen = dict.fromkeys(self.unc)
        for _, u in self.prod:
            seen[u] = None
        if self.norm is not None:
            for e in self.norm:
                for u in e.uncertainties():
                    seen[u] = None
        return list(seen)

    def unc_coeff(self, u) -> "LinearExpr":
        """Coefficient of uncertain parameter ``u`` as an expression in
        decisions (constant part plus any variable-times-``u`` products)."""
        out = LinearExpr(const=self.unc.get(u, 0.0))
        for (v, uu), c in self.prod.items():
            if uu is u:
                out.dec[v] = out.dec.get(v, 0.0) + c
        return out

    def certain_part(self) -> "LinearExpr":
        """Constant-in-uncertainty part (constant plus decision terms)."""
        return LinearExpr(const=self.const, dec=self.dec)

    # --- arithmetic --------------------------------------------------------

    def _iadd(self, other, sign):
        other = LinearExpr.wrap(other)
        self.const += sign * other.const
        for v, c in other.dec.items():
            self.dec[v] = self.dec.get(v, 0.0) + sign * c
        for u, c in other.unc.items():
            self.unc[u] = self.unc.get(u, 0.0) + sign * c
        for k, c in other.prod.items():
            self.prod[k] = self.prod.get(k, 0.0) + sign * c
        if other.norm is not None:
            if self.norm is not None:
                raise errors.NonlinearExpression(
                    "cannot combine two norm terms in one expression")
            if sign < 0:
                raise errors.NonlinearExpression(
                    "norm terms may only enter with a positive sign")
            self.norm = list(other.norm)
        return self

    def __add__(self, other):
        return self.copy()._iadd(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self.copy()._iadd(other, -1.0)

    def __rsub__(self, other):
        return LinearExpr.wrap(other) - self

    def __neg__(self):
        return self * -1.0

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            s = float(other)
            out = LinearExpr(self.const * s,
                             {v: c * s for v, c in self.dec.items()},
                             {u: c * s for u, c in self.unc.items()},
                             {k: c * s for k, c in self.prod.items()})
            if self.norm is not None:
                if s < 0:
                    raise errors.NonlinearExpression(
                        "cannot scale a norm term by a negative factor")
                out.norm = [e * s for e in self.norm]
            return out
        other = LinearExpr.wrap(other)
        if self.norm is not None or other.norm is not None:
            raise errors.NonlinearExpression("cannot multiply norm terms")
        if self.prod or other.prod:
            raise errors.NonlinearExpression(
                "product would exceed degree one in decisions or uncertainties")
        a_dec, a_unc = bool(self.dec), bool(self.unc)
        b_dec, b_unc = bool(other.dec), bool(other.unc)
        if (a_dec and b_dec) or (a_unc and b_unc):
            raise errors.NonlinearExpression(
                "product would exceed degree one in decisions or uncertainties")
        # orient: left factor carries decisions, right factor uncertainties
        left, right = self, other
        if b_dec or a_unc:
            left, right = other, self
        out = LinearExpr(left.const * right.const)
        for v, c in left.dec.items():
            out.dec[v] = c * right.const
        for u, c in right.unc.items():
            if left.const:
                out.unc[u] = c * left.const
            for v, cv in left.dec.items():
                out.prod[(v, u)] = cv * c
        # prune zero entries introduced by zero constants
        out.dec = {v: c for v, c in out.dec.items() if c != 0.0}
        out.unc = {u: c for u, c in out.unc.items() if c != 0.0}
        out.prod = {k: c for k, c in out.prod.items() if c != 0.0}
        return out

    __rmul__ = __mul__

    # --- constraints -------------------------------------------------------

    def __le__(self, other):
        return Constraint(self, "<=", other)

    def __ge__(self, other):
        return Constraint(self, ">=", other)

    def __eq__(self, other):  # noqa: builds a constraint, as in AMLs
        return Constraint(self, "==", other)

    __hash__ = None

    # --- evaluation & substitution ----------------------------------------

    def evaluate(self, dec_values=None, unc_values=None) -> float:
        dec_values = dec_values or {}
        unc_values = unc_values or {}
        val = self.const
        for v, c in self.dec.items():
            val += c * dec_values[v]
        for u, c in self.unc.items():
            val += c * unc_values[u]
        for (v, u), c in self.prod.items():
            val += c * dec_values[v] * unc_values[u]
        if self.norm is not None:
            val += math.sqrt(sum(e.evaluate(dec_values, unc_values) ** 2
                                 for e in self.norm))
        return val

    def substitute_vars(self, mapping) -> "LinearExpr":
        """Replace decision variables per ``mapping`` (var -> var or
        LinearExpr).  Product terms are re-expanded; a substitution that
        would create a degree-two term in the uncertainties raises."""
        out = LinearExpr(self.const, unc=self.unc)
        if self.norm is not None:
            out.norm = list(self.norm)
        for v, c in self.dec.items():
            rep = mapping.get(v, v)
            out._iadd(LinearExpr.wrap(rep) * c, 1.0)
        for (v, u), c in self.prod.items():
            rep = mapping.get(v, v)
            out._iadd(LinearExpr.wrap(rep) * LinearExpr(unc={u: c}), 1.0)
        return out

    # --- rendering ---------------------------------------------------------

    def __repr__(self):
        return "<LinearExpr %s>" % (format_terms(self),)


def format_num(x: float) -> str:
    s = "%.12g" % x
    return s


def format_terms(expr: LinearExpr, include_const=True) -> str:
    """Signed-coefficient term string, e.g. ``+1 Keep_1_1 Value_1 -0.69 w``."""
    parts = []

    def coef(c):
        return ("+" if c >= 0 else "-") + format_num(abs(c))

    for v, c in expr.dec.items():
        parts.append("%s %s" % (coef(c), v.name))
    for u, c in expr.unc.items():
        parts.append("%s %s" % (coef(c), u.name))
    for (v, u), c in expr.prod.items():
        parts.append("%s %s %s" % (coef(c), v.name, u.name))
    if expr.norm is not None:
        inner = " , ".join(format_terms(e) for e in expr.norm)
        parts.append("+ norm( %s )" % inner)
    if include_const and (expr.const != 0.0 or not parts):
        parts.append(coef(expr.const))
    return " ".join(parts)


class Constraint:
    """Normalized as ``expr (sense) 0`` with the norm term, when present,
    carried on the left with a positive sign."""

    __slots__ = ("expr", "sense", "scope", "name")

    def __init__(self, lhs, sense, rhs=0.0, scope="problem", name=None):
        if sense not in _SENSES:
            raise ValueError("bad constraint sense %r" % (sense,))
        lhs = LinearExpr.wrap(lhs)
        rhs = LinearExpr.wrap(rhs)
        if rhs.norm is not None:
            # norm on the right of <= / left of >= is concave-side: flip
            lhs, rhs = rhs, lhs
            sense = {"<=": ">=", ">=": "<=", "==": "=="}[sense]
        expr = lhs - rhs
        if expr.norm is not None:
            if sense == "==":
                raise errors.NonlinearExpression(
                    "equality constraints cannot carry a norm term")
            if sense == ">=":
                raise errors.NonlinearExpression(
                    "norm term must be on the small side of the inequality")
        self.expr = expr
        self.sense = sense
        self.scope = scope
        self.name = name

    def is_deterministic(self):
        return self.expr.is_deterministic()

    def violated_by(self, dec_values, unc_values, tol=1e-9):
        v = self.expr.evaluate(dec_values, unc_values)
        if self.sense == "<=":
            return v > tol
        if self.sense == ">=":
            return v < -tol
        return abs(v) > tol

    def __repr__(self):
        return "<Constraint %s %s 0>" % (format_terms(self.expr), self.sense)


def quicksum(items: Iterable) -> LinearExpr:
    out = LinearExpr()
    for it in items:
        out._iadd(it, 1.0)
    return out


class Model:
    """Multi-stage robust or stochastic problem over horizon ``1..T``.

    Objective sense is always minimization; the functional over uncertainty
    is the worst case (``robust``) or the expectation (``stochastic``).
    """

    def __init__(self, horizon, sense=ROBUST):
        if horizon < 1:
            raise ValueError("horizon must be a positive integer")
        if sense not in (ROBUST, STOCHASTIC):
            raise ValueError("unknown objective sense %r" % (sense,))
        self.horizon = int(horizon)
        self.sense = sense
        self.vars: dict[str, DecisionVariable] = {}
        self.uncs: dict[str, UncertainParameter] = {}
        self.constraints: list[Constraint] = []
        self.uncset_constraints: list[Constraint] = []
        self.objective = LinearExpr()
        self.auto_cost = LinearExpr()   # observation costs from add_ddu
        self.distribution: Optional[dict] = None  # unc -> (lb, ub)
        self._meas: dict[UncertainParameter, dict[int, DecisionVariable]] = {}
        self.paired: list[tuple[UncertainParameter, UncertainParameter]] = []

    # --- registration ------------------------------------------------------

    def _check_name(self, name):
        if name in self.vars or name in self.uncs:
            raise errors.DuplicateName("name %r already in use" % name)

    def add_variable(self, name, kind=REAL, adaptive=False, stage=1,
                     lb=None, ub=None) -> DecisionVariable:
        self._check_name(name)
        if adaptive and not (1 <= stage <= self.horizon + 1):
            raise errors.AdaptiveStageOutOfRange(
                "adaptive variable %s at stage %d, horizon %d"
                % (name, stage, self.horizon))
        v = DecisionVariable(name, kind, adaptive, stage, lb, ub)
        self.vars[name] = v
        return v

    def add_uncertainty(self, name, stage=1, observable=True) -> UncertainParameter:
        self._check_name(name)
        if not (1 <= stage <= self.horizon + 1):
            raise errors.StageOutOfRange(
                "uncertain parameter %s at stage %d" % (name, stage))
        u = UncertainParameter(name, stage, observable)
        self.uncs[name] = u
        return u

    def _register_measurement(self, unc, stage, var):
        var.is_measurement = True
        var.measured_uncertainty = unc
        self._meas.setdefault(unc, {})[stage] = var

    def add_ddu(self, unc, first_stage, last_stage, cost=0.0):
        """Declare ``unc`` as decision-dependent with observation window
        ``[first_stage, last_stage]``; creates binary measurement variables
        for every stage and accrues the per-observation cost into the
        objective."""
        if unc.name not in self.uncs or self.uncs[unc.name] is not unc:
            raise errors.UnregisteredSymbol(unc.name)
        if not unc.observable:
            raise errors.NotDDU(
                "%s is auxiliary and cannot be observed" % unc.name)
        if unc.is_ddu:
            raise errors.AlreadyDDU(unc.name)
        if not (1 <= first_stage <= last_stage <= self.horizon):
            raise errors.WindowOutOfRange(
                "window [%s, %s] outside horizon 1..%d"
                % (first_stage, last_stage, self.horizon))
        unc.ddu_window = (int(first_stage), int(last_stage))
        cost = LinearExpr.wrap(cost)
        unc.observation_cost = cost
        prev = None
        for t in range(1, self.horizon + 1):
            w = self.add_variable("m%s_%d" % (unc.name, t), kind=BINARY,
                                  adaptive=(t > 1), stage=t)
            self._register_measurement(unc, t, w)
            delta = (w - prev) if prev is not None else LinearExpr.wrap(w)
            if t < first_stage:
                self.add_constraint(LinearExpr.wrap(w) == 0.0)
            elif t > last_stage:
                self.add_constraint(delta == 0.0)
            if prev is not None:
                self.add_constraint(delta >= 0.0)
            self.auto_cost._iadd(cost * delta, 1.0)
            prev = w
        return [self._meas[unc][t] for t in range(1, self.horizon + 1)]

    def pair_uncertainties(self, a, b):
        """Force the observation indicators of ``a`` and ``b`` to coincide."""
        if a is b:
            return
        if not (a.is_ddu and b.is_ddu):
            raise errors.NotDDU(
                "both parameters must be decision-dependent to be paired")
        if a.ddu_window != b.ddu_window:
            raise errors.WindowMismatch(
                "%s window %s != %s window %s"
                % (a.name, a.ddu_window, b.name, b.ddu_window))
        if b in a.paired_with:
            return
        a.paired_with.add(b)
        b.paired_with.add(a)
        self.paired.append((a, b))
        for t in range(1, self.horizon + 1):
            self.add_constraint(
                LinearExpr.wrap(self._meas[a][t]) - self._meas[b][t] == 0.0)

    def get_meas_var(self, unc, stage) -> DecisionVariable:
        if not unc.is_ddu:
            raise errors.NotDDU("%s has no measurement variables" % unc.name)
        fam = self._meas[unc]
        if stage not in fam:
            raise errors.StageOutOfRange(
                "stage %s outside horizon 1..%d" % (stage, self.horizon))
        return fam[stage]

    def measurement_family(self, unc):
        return dict(self._meas.get(unc, {}))

    # --- constraints & objective -------------------------------------------

    def _check_registered(self, expr: LinearExpr):
        for v in expr.variables():
            if self.vars.get(v.name) is not v:
                raise errors.UnregisteredSymbol(v.name)
        for u in expr.uncertainties():
            if self.uncs.get(u.name) is not u:
                raise errors.UnregisteredSymbol(u.name)

    def add_constraint(self, con: Constraint, uncertainty_set=False):
        if not isinstance(con, Constraint):
            raise TypeError("expected a Constraint")
        self._check_registered(con.expr)
        if uncertainty_set:
            con.scope = "uncset"
            for v in con.expr.variables():
                if v.adaptive:
                    raise errors.ModelError(
                        "uncertainty-set constraints cannot involve adaptive "
                        "variable %s" % v.name)
            self.uncset_constraints.append(con)
        else:
            con.scope = "problem"
            self.constraints.append(con)
        return con

    def add_constraint_uncset(self, con: Constraint):
        return self.add_constraint(con, uncertainty_set=True)

    def set_objective(self, expr):
        expr = LinearExpr.wrap(expr)
        self._check_registered(expr)
        if expr.norm is not None:
            raise errors.NonlinearExpression("objective cannot carry a norm")
        self.objective = expr

    def full_objective(self) -> LinearExpr:
        """User objective plus automatically accrued observation costs."""
        return self.objective + self.auto_cost

    def set_distribution(self, bounds):
        """Uniform-on-box distribution: ``bounds`` maps each observable
        uncertain parameter to its (lb, ub) marginal support."""
        for u, (lo, hi) in bounds.items():
            if self.uncs.get(u.name) is not u:
                raise errors.UnregisteredSymbol(u.name)
            if lo > hi:
                raise errors.InvalidBounds(
                    "support of %s has lb > ub" % u.name)
        self.distribution = dict(bounds)

    # --- queries -----------------------------------------------------------

    def adaptive_variables(self):
        return [v for v in self.vars.values() if v.adaptive]

    def observable_uncertainties(self):
        return [u for u in self.uncs.values() if u.observable]

    def validate(self):
        for con in self.constraints + self.uncset_constraints:
            self._check_registered(con.expr)
        self._check_registered(self.full_objective())
        for v in self.adaptive_variables():
            if not (1 <= v.stage <= self.horizon + 1):
                raise errors.AdaptiveStageOutOfRange(v.name)
        return self

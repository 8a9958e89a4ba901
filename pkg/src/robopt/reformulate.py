"""Robust counterpart construction by conic dualization.

Takes a single-stage model (no adaptive variables remain after a decision
rule or finite-adaptability transform), an uncertainty set in block form,
and produces a deterministic :class:`Counterpart`:

* deterministic constraints pass through as linear rows;
* each uncertain constraint ``b(x) + a(x).xi <= 0 for all xi`` gets fresh
  dual multipliers per conic block (orthant rows nonnegative, Lorentz rows
  cone-constrained), equality rows matching the dual combination to the
  decision-affine coefficient of every parameter axis, and a dual-objective
  row ``sum q.lam + b(x) <= 0``;
* pure-box sets take a two-row envelope shortcut per axis, avoiding
  equality rows and phase-1 artificials in the built-in simplex;
* a worst-case objective is robustified through its epigraph;
* an expectation objective is evaluated in closed form at the distribution
  means (constraints stay robust).

Decision-dependent sets (coefficients affine in static binaries) linearize
each binary-times-dual product with envelope inequalities using a dual
magnitude bound.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from . import errors
from .model import (Model, LinearExpr, Constraint, REAL, BINARY, INTEGER,
                    ROBUST, STOCHASTIC)
from .solver import counterpart as ct
from .uncertainty import (UncertaintySet, NONNEG, SOC, from_model,
                          _coef_is_plain)

INF = math.inf

_KINDS = {REAL: ct.CONTINUOUS, BINARY: ct.BINARY, INTEGER: ct.INTEGER}


def _expr_row(cp, expr: LinearExpr):
    """Decision-linear part of a certain expression as (coeffs, const)."""
    coeffs = {}
    for v, c in expr.dec.items():
        j = cp.index[v.name]
        coeffs[j] = coeffs.get(j, 0.0) + c
    return coeffs, expr.const


def _distribution_means(model):
    if model.distribution is None:
        raise errors.StochasticWithoutDistribution(
            "expectation objective needs a declared distribution")
    return {u: 0.5 * (lo + hi) for u, (lo, hi) in model.distribution.items()}


def take_expectation(expr: LinearExpr, means) -> LinearExpr:
    """Replace every uncertain parameter by its mean."""
    out = LinearExpr(const=expr.const, dec=dict(expr.dec))
    for u, c in expr.unc.items():
        if u not in means:
            raise errors.StochasticWithoutDistribution(
                "no distribution support declared for %s" % u.name)
        out = out + c * means[u]
    for (v, u), c in expr.prod.items():
        if u not in means:
            raise errors.StochasticWithoutDistribution(
                "no distribution support declared for %s" % u.name)
        out = out + LinearExpr(dec={v: c * means[u]})
    return out


class _DDLinearizer:
    """Shared envelope linearization of binary-decision x dual products."""

    def __init__(self, cp, bound):
        self.cp = cp
        self.bound = bound
        self.cache = {}

    def product(self, zname, lam_j, lam_lb, tag):
        """Column representing ``z * lam`` for binary column ``zname``."""
        key = (zname, lam_j)
        if key in self.cache:
            return self.cache[key]
        cp = self.cp
        L = self.bound
        z = cp.index[zname]
        p = cp.add_var("%s_x_%s" % (tag, zname))
        # |p| <= L z ; p within L(1-z) of lam
        cp.add_row({p: 1.0, z: -L}, "<=", 0.0)
        if lam_lb >= 0.0:
            cp.add_row({p: 1.0}, ">=", 0.0)
        else:
            cp.add_row({p: 1.0, z: L}, ">=", 0.0)
        cp.add_row({p: 1.0, lam_j: -1.0, z: -L}, ">=", -L)
        cp.add_row({p: 1.0, lam_j: -1.0, z: L}, "<=", L)
        self.cache[key] = p
        return p


def _coef_terms(coef, lam_j, lam_lb, lin, tag):
    """Expand ``coef * lam`` into counterpart column terms.

    Returns a list of (column, multiplier).  ``coef`` is a float or a
    decision-affine LinearExpr over static binaries.
    """
    if not isinstance(coef, LinearExpr):
        return [(lam_j, float(coef))] if coef else []
    out = []
    if coef.const:
        out.append((lam_j, coef.const))
    for v, c in coef.dec.items():
        if lin is None:
            raise errors.MissingDualBounds(
                "decision-dependent set entry on %s needs a dual bound"
                % v.name)
        if v.kind != BINARY or v.adaptive:
            raise errors.ReformulationError(
                "decision-dependent set coefficients must use static "
                "binaries; %s is not one" % v.name)
        p = lin.product(v.name, lam_j, lam_lb, tag)
        out.append((p, c))
    return out


def _add_terms(row, terms):
    for j, c in terms:
        row[j] = row.get(j, 0.0) + c


def robustify(model: Model, uset: UncertaintySet = None,
              dual_bound=None) -> ct.Counterpart:
    """Build the deterministic counterpart of a single-stage model.

    The result carries an ``info`` dict with row/robustification counts.
    ``dual_bound`` caps dual magnitudes for decision-dependent sets
    (default 1e4, with a warning).
    """
    for v in model.adaptive_variables():
        raise errors.AdaptiveRemains(
            "variable %s is still adaptive; apply a decision rule or "
            "finite adaptability first" % v.name)
    if uset is None:
        uset = from_model(model)

    cp = ct.Counterpart(getattr(model, "name", "counterpart"))
    for v in model.vars.values():
        cp.add_var(v.name, v.lb, v.ub, _KINDS[v.kind])

    lin = None
    if uset.is_decision_dependent():
        if dual_bound is None:
            dual_bound = 1e4
            warnings.warn(
                "decision-dependent uncertainty set: dual bound defaulted "
                "to 1e4; pass dual_bound to override", RuntimeWarning,
                stacklevel=2)
        lin = _DDLinearizer(cp, float(dual_bound))

    info = {"robustified": 0, "deterministic": 0, "total": 0}

    def certain_row(expr, sense, name=None):
        coeffs, const = _expr_row(cp, expr)
        cp.add_row(coeffs, sense, -const, name)

    def robust_leq(expr, cidx, extra=None, against=None):
        """expr(x, xi) + extra-columns <= 0 for all xi in the set."""
        if expr.norm is not None:
            raise errors.ReformulationError(
                "norm terms are only supported in uncertainty-set "
                "constraints")
        uset_c = uset if against is None else against
        a = {u.name: expr.unc_coeff(u)
             for u in list(expr.unc) + [u for _, u in expr.prod]}
        b = expr.certain_part()
        if (uset_c.box_bounds is not None
                and not uset_c.is_decision_dependent()):
            _box_dual(cp, a, b, uset_c, cidx, extra)
        else:
            _conic_dual(cp, a, b, uset_c, cidx, lin, extra)
        info["robustified"] += 1

    cidx = 0

    def one_constraint(expr, sense, against=None):
        nonlocal cidx
        info["total"] += 1
        if expr.is_certain():
            certain_row(expr, sense, "c%d" % cidx)
            info["deterministic"] += 1
            cidx += 1
            return
        forms = []
        if sense in ("<=", "=="):
            forms.append(expr)
        if sense in (">=", "=="):
            forms.append(expr * -1.0)
        for f in forms:
            robust_leq(f, cidx, against=against)
            cidx += 1

    # objective
    obj = model.full_objective()
    if model.sense == STOCHASTIC:
        obj = take_expectation(obj, _distribution_means(model))
    if obj.is_certain():
        coeffs, const = _expr_row(cp, obj)
        cp.set_objective(coeffs, const)
    else:
        tau = cp.add_var("__tau")
        info["total"] += 1
        robust_leq(obj, cidx, extra={tau: -1.0})
        cidx += 1
        cp.set_objective({tau: 1.0})

    # per-constraint set restrictions (piecewise rules partition the set)
    overrides = getattr(model, "uset_overrides", {})
    for i, con in enumerate(model.constraints):
        one_constraint(con.expr, con.sense, against=overrides.get(i))

    cp.info = info
    return cp


def _box_dual(cp, a, b, uset, cidx, extra=None):
    """Box-set shortcut: worst case of a.xi separates per axis."""
    lb, ub = uset.box_bounds
    coeffs, const = _expr_row(cp, b)
    total = dict(coeffs)
    for i, name in enumerate(uset.unc_names):
        coef = a.get(name)
        if coef is None:
            continue
        acoeffs, aconst = _expr_row(cp, coef)
        if not acoeffs:
            const += aconst * (ub[i] if aconst > 0 else lb[i])
            continue
        t = cp.add_var("__dual_c%d_%s" % (cidx, name))
        for bound in (lb[i], ub[i]):
            row = {t: 1.0}
            for j, c in acoeffs.items():
                row[j] = row.get(j, 0.0) - c * bound
            cp.add_row(row, ">=", aconst * bound)
        total[t] = total.get(t, 0.0) + 1.0
    if extra:
        _add_terms(total, extra.items())
    cp.add_row(total, "<=", -const, "c%d" % cidx)


def _conic_dual(cp, a, b, uset, cidx, lin, extra=None):
    """General conic dualization of ``b(x) + a(x).xi <= 0`` over the set."""
    axes = {name: {} for name in uset.unc_names}   # equality row terms
    auxes = {name: {} for name in uset.aux_names}
    objrow = {}
    objconst = 0.0
    soc_groups = []
    for bi, blk in enumerate(uset.blocks):
        lams = []
        for ri, (p, z, q) in enumerate(blk.rows):
            tag = "__dual_c%d_b%d" % (cidx, bi)
            if blk.cone == NONNEG:
                j = cp.add_var("%s_r%d" % (tag, ri), lb=0.0)
                lam_lb = 0.0
            else:
                j = cp.add_var("%s_r%d" % (tag, ri),
                               lb=0.0 if ri == 0 else -INF)
                lam_lb = 0.0 if ri == 0 else -INF
            lams.append(j)
            _add_terms(objrow, _coef_terms(q, j, lam_lb, lin, tag))
            for name, c in list(p.items()) + list(z.items()):
                target = axes[name] if name in axes else auxes[name]
                _add_terms(target, _coef_terms(c, j, lam_lb, lin, tag))
        if blk.cone == SOC:
            soc_groups.append((lams, "__dualq_c%d_b%d" % (cidx, bi)))
    # equality rows: sum P^T lam = -a per primary axis
    for name in uset.unc_names:
        row = dict(axes[name])
        coef = a.get(name)
        rhs = 0.0
        if coef is not None:
            acoeffs, aconst = _expr_row(cp, coef)
            for j, c in acoeffs.items():
                row[j] = row.get(j, 0.0) + c
            rhs = -aconst
        cp.add_row(row, "==", rhs, "c%d_eq_%s" % (cidx, name))
    for name in uset.aux_names:
        cp.add_row(dict(auxes[name]), "==", 0.0, "c%d_eqa_%s" % (cidx, name))
    # dual objective row: sum q.lam + b(x) <= 0
    coeffs, const = _expr_row(cp, b)
    row = dict(objrow)
    for j, c in coeffs.items():
        row[j] = row.get(j, 0.0) + c
    if extra:
        _add_terms(row, extra.items())
    cp.add_row(row, "<=", -const - objconst, "c%d" % cidx)
    # lorentz duals live in the (self-dual) cone
    for lams, name in soc_groups:
        cp.add_soc_row([({j: 1.0}, 0.0) for j in lams[1:]],
                       ({lams[0]: 1.0}, 0.0), name)


def binary_expand_integers(cp: ct.Counterpart) -> ct.Counterpart:
    """Rewrite every bounded integer column via its binary expansion.

    ``x in [l, u]`` keeps its (now continuous) column tied by an equality
    ``x = l + sum 2^j b_j`` with ``ceil(log2(u-l+1))`` fresh binaries and a
    range row ``sum 2^j b_j <= u - l``.
    """
    out = cp.copy()
    for j, kind in enumerate(cp.kind):
        if kind != ct.INTEGER:
            continue
        lo, hi = cp.lb[j], cp.ub[j]
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise errors.UnboundedInteger(
                "integer column %s needs finite bounds for expansion"
                % cp.var_names[j])
        lo, hi = math.ceil(lo), math.floor(hi)
        out.kind[j] = ct.CONTINUOUS
        out.lb[j], out.ub[j] = float(lo), float(hi)
        span = hi - lo
        if span == 0:
            continue
        nbits = max(1, math.ceil(math.log2(span + 1)))
        row = {j: -1.0}
        rng_row = {}
        for k in range(nbits):
            bj = out.add_var("__bit%d_%s" % (k, cp.var_names[j]),
                             0.0, 1.0, ct.BINARY)
            row[bj] = float(2 ** k)
            rng_row[bj] = float(2 ** k)
        out.add_row(row, "==", float(-lo))
        out.add_row(rng_row, "<=", float(span))
    return out


def worst_case_scenario(values, constraint: Constraint,
                        uset: UncertaintySet):
    """Adversary check: maximize constraint violation over the set at
    fixed decisions.  Returns (scenario dict, violation)."""
    expr = constraint.expr
    if constraint.sense == ">=":
        expr = expr * -1.0
    # accept either variable-keyed or name-keyed decision values
    byname = {getattr(k, "name", k): v for k, v in values.items()}
    values = {v: byname.get(v.name, 0.0) for v in expr.variables()}
    direction = {}
    for u in list(expr.unc) + [u for _, u in expr.prod]:
        direction[u.name] = expr.unc_coeff(u).evaluate(values, {})
    b = expr.certain_part().evaluate(values, {})
    if not any(direction.values()):
        point = {name: 0.0 for name in uset.all_names}
        if uset.marginals:
            point = {name: 0.5 * (lo + hi)
                     for name, (lo, hi) in uset.marginals.items()}
        viol = abs(b) if constraint.sense == "==" else b
        return point, viol
    point = uset.support_point(direction)
    worst = sum(direction[n] * point[n] for n in direction) + b
    if constraint.sense == "==":
        point2 = uset.support_point({n: -d for n, d in direction.items()})
        low = sum(direction[n] * point2[n] for n in direction) + b
        if -low > worst:
            return point2, -low
    return point, worst

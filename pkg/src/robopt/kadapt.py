"""Finite adaptability: blanket contingency plans for binary decisions.

The transform picks, up front, ``K_t`` candidate assignments per stage for
every adaptive binary decision and lets the decision-maker follow the best
plan once uncertainty materializes.  Plans share prefixes: the stage-``t``
copy of a variable is indexed by the first ``t`` plan components only, so
plans that coincide up to stage ``t`` act identically there.

The min-over-plans of an uncertain objective is reformulated exactly: the
adversary's problem (maximize over the set the smallest plan cost) is a
linear program whose dual introduces one weight per plan on a simplex plus
one multiplier per uncertainty-set row; products of plan weights and binary
copies are linearized with exact 0-1 x [0,1] envelopes.  Uncertain *hard*
constraints are enforced per plan over the whole set, which is sound but
conservative; a warning flags it.
"""

from __future__ import annotations

import itertools
import warnings

from . import errors
from .model import (Model, LinearExpr, Constraint, ROBUST, REAL, BINARY,
                    quicksum)
from .uncertainty import NONNEG, from_model

DEFAULT_DUAL_BOUND = 1e4


class PlanConfig:
    """Number of contingency plans per stage.

    ``K`` is a scalar (same count for every stage after the first) or a
    mapping/sequence giving ``K_t`` for stages ``2..horizon``; stage 1
    always has a single plan.
    """

    def __init__(self, K, horizon):
        self.horizon = int(horizon)
        counts = {1: 1}
        for t in range(2, self.horizon + 1):
            if isinstance(K, dict):
                kt = K.get(t, 1)
            elif isinstance(K, (list, tuple)):
                kt = K[t - 2] if t - 2 < len(K) else K[-1]
            else:
                kt = K
            kt = int(kt)
            if kt < 1:
                raise ValueError("K_%d must be at least 1" % t)
            counts[t] = kt
        self.counts = counts

    def prefixes(self, stage):
        """All plan prefixes of length ``stage``: tuples (k_1..k_stage)."""
        ranges = [range(1, self.counts[t] + 1) for t in range(1, stage + 1)]
        return [tuple(p) for p in itertools.product(*ranges)]

    def tuples(self):
        return self.prefixes(self.horizon)

    @staticmethod
    def label(plan):
        return "(%s)" % "-".join(str(k) for k in plan)

    @staticmethod
    def suffix(prefix):
        return "__k" + "_".join(str(k) for k in prefix)

    def __eq__(self, other):
        return (isinstance(other, PlanConfig)
                and self.counts == other.counts)

    def __repr__(self):
        return "<PlanConfig %s>" % (self.counts,)


def _copy_name(var, prefix):
    return var.name + PlanConfig.suffix(prefix)


def _marginal_widths(uset):
    """Support width per primary coordinate (big-M for scenario ties)."""
    if uset.box_bounds is not None:
        lb, ub = uset.box_bounds
        return {name: float(ub[i] - lb[i])
                for i, name in enumerate(uset.unc_names)}
    widths = {}
    for name in uset.unc_names:
        hi = uset.support_function({name: 1.0})
        lo = -uset.support_function({name: -1.0})
        widths[name] = float(hi - lo)
    return widths


def _var_magnitude(v):
    hi = max(abs(v.lb), abs(v.ub))
    return hi if hi < float("inf") else DEFAULT_DUAL_BOUND


def _coupling_dual_bound(model, plans, plan_mapping):
    """Per-uncertainty upper bounds on the scenario-tie multipliers.

    A tie multiplier on coordinate ``u`` routes the per-plan objective
    sensitivities with respect to ``u`` along the plan chain, so at a dual
    vertex its magnitude is bounded by the absolute coefficient mass on
    ``u`` summed over all plans.  Returns ``{unc name: bound}``.
    """
    totals = {name: 1.0 for name in model.uncs}
    for plan in plans:
        obj_k = model.full_objective().substitute_vars(plan_mapping(plan))
        for u in obj_k.uncertainties():
            coef = obj_k.unc_coeff(u)
            totals[u.name] += abs(coef.const) + sum(
                abs(c) * _var_magnitude(v) for v, c in coef.dec.items())
    return totals


def apply_kadaptability(model: Model, cfg, symmetry_breaking=False,
                        strengthen=True):
    """Reformulate a robust all-binary-adaptive model over ``cfg`` plans.

    Returns ``(single_stage_model, plan_map)``.  The output model has only
    static variables and is ready for :func:`robopt.reformulate.robustify`
    (for the conservative uncertain hard constraints, if any); its
    objective is the epigraph variable of the exact min-over-plans
    reformulation.  ``plan_map`` records, per original adaptive variable,
    the name of its copy under every plan prefix.
    """
    if not isinstance(cfg, PlanConfig):
        cfg = PlanConfig(cfg, model.horizon)
    if model.sense != ROBUST:
        raise errors.ExpectationObjectiveUnsupported(
            "finite adaptability applies to worst-case objectives only; "
            "use piecewise-constant rules for expectation objectives")
    for v in model.adaptive_variables():
        if v.kind == REAL:
            raise errors.RealAdaptiveUnsupported(
                "adaptive real variable %s: apply a linear decision rule "
                "first or model it as static" % v.name)

    uset = from_model(model, validate=False)
    for blk in uset.blocks:
        if blk.cone != NONNEG:
            raise errors.ReformulationError(
                "finite adaptability supports polyhedral uncertainty "
                "sets only")
        if blk.is_decision_dependent():
            raise errors.ReformulationError(
                "finite adaptability does not support decision-dependent "
                "uncertainty-set coefficients")

    out = Model(1, ROBUST)
    for name, u in model.uncs.items():
        out.uncs[name] = u
    out.uncset_constraints = list(model.uncset_constraints)

    # variable copies: statics shared, adaptives one copy per plan prefix
    copies = {}       # orig var -> {prefix: copy}
    for v in model.vars.values():
        if not v.adaptive:
            out.vars[v.name] = v
            continue
        fam = {}
        for prefix in cfg.prefixes(v.stage):
            fam[prefix] = out.add_variable(
                _copy_name(v, prefix), kind=v.kind, lb=v.lb, ub=v.ub)
        copies[v] = fam

    def plan_mapping(plan):
        return {v: fam[plan[:v.stage]] for v, fam in copies.items()}

    # problem constraints
    conservative = False
    for con in model.constraints:
        stage = max((v.stage for v in con.expr.variables() if v.adaptive),
                    default=1)
        for prefix in cfg.prefixes(stage):
            mapping = {v: fam[prefix[:v.stage]]
                       for v, fam in copies.items() if v.stage <= stage}
            expr = con.expr.substitute_vars(mapping)
            if not expr.is_certain():
                conservative = True
            out.add_constraint(Constraint(expr, con.sense))
    if conservative:
        warnings.warn(
            "uncertain constraints are enforced over the whole set for "
            "every plan", errors.UncertainConstraintConservative,
            stacklevel=2)

    # Exact epigraph of the worst case over scenarios of the best plan.
    # The adversary holds one scenario per plan, tied together only on
    # coordinates already observed when two plans branch apart, so a plan
    # choice cannot exploit information that has not been revealed.  The
    # adversary problem is a linear program; its dual introduces a simplex
    # weight per plan, one multiplier per set row and plan, and coupling
    # multipliers along the chain of lexicographically adjacent plans
    # (adjacent ties imply all others through measurement monotonicity).
    tau = out.add_variable("__tau", lb=-float("inf"))
    plans = cfg.tuples()
    alphas = {}
    prods = {}        # (tag, binary var) -> product variable

    def product(tag, weight, v, bound=1.0):
        """Linearized ``weight * v`` for binary ``v``, ``weight`` in
        ``[0, bound]``."""
        key = (tag, v)
        p = prods.get(key)
        if p is None:
            p = out.add_variable("__p%s_%s" % (tag, v.name),
                                 lb=0.0, ub=bound)
            out.add_constraint(LinearExpr.wrap(p) <= weight)
            out.add_constraint(p <= bound * v)
            out.add_constraint(p >= weight + bound * v - bound)
            prods[key] = p
        return p

    def weighted(expr, tag, alpha):
        """alpha * expr for an expression affine in binary copies."""
        res = LinearExpr.wrap(alpha) * expr.const
        for v, c in expr.dec.items():
            if c != 0.0:
                res = res + c * product(tag, alpha, v)
        return res

    dual_obj = LinearExpr()
    # per-plan scenario columns: one dual balance row per (plan, name)
    axis_rows = {(plan, name): LinearExpr()
                 for plan in plans for name in uset.unc_names}
    aux_rows = {(plan, name): LinearExpr()
                for plan in plans for name in uset.aux_names}
    for plan in plans:
        tag = PlanConfig.suffix(plan)[3:]
        alpha = out.add_variable("__alpha_" + tag, lb=0.0, ub=1.0)
        alphas[plan] = alpha
        obj_k = model.full_objective().substitute_vars(plan_mapping(plan))
        dual_obj = dual_obj + weighted(obj_k.certain_part(), tag, alpha)
        for u in obj_k.uncertainties():
            axis_rows[plan, u.name] = (
                axis_rows[plan, u.name]
                + weighted(obj_k.unc_coeff(u), tag, alpha))
        for bi, blk in enumerate(uset.blocks):
            for ri, (pmap, zmap, const) in enumerate(blk.rows):
                lam = out.add_variable(
                    "__lam_%s_b%d_r%d" % (tag, bi, ri), lb=0.0)
                dual_obj = dual_obj + float(const) * lam
                for name, c in pmap.items():
                    target = (axis_rows if name in uset.unc_names
                              else aux_rows)
                    target[plan, name] = target[plan, name] + float(c) * lam
                for name, c in zmap.items():
                    aux_rows[plan, name] = (aux_rows[plan, name]
                                            + float(c) * lam)
    out.add_constraint(quicksum(alphas[p] for p in plans) == 1.0)

    if strengthen:
        # Multiply each all-binary deterministic plan constraint by the
        # plan's simplex weight.  The products already exist (or get exact
        # 0-1 envelopes), so these rows are valid, and they stop the
        # relaxation from crediting a fractionally-weighted plan with more
        # constraint slack than its weight owns.
        for plan in plans:
            tag = PlanConfig.suffix(plan)[3:]
            alpha = alphas[plan]
            mapping = plan_mapping(plan)
            for con in model.constraints:
                if not con.is_deterministic():
                    continue
                expr = con.expr.substitute_vars(mapping)
                if any(v.kind != BINARY for v in expr.dec):
                    continue
                res = LinearExpr.wrap(alpha) * expr.const
                nontrivial = False
                for v, c in expr.dec.items():
                    if c != 0.0:
                        res = res + c * product(tag, alpha, v)
                        nontrivial = True
                if nontrivial:
                    out.add_constraint(Constraint(res, con.sense))

    # scenario-coupling multipliers along the plan chain
    widths = _marginal_widths(uset) if len(plans) > 1 else {}
    mu_bound = _coupling_dual_bound(model, plans, plan_mapping)
    for ei in range(len(plans) - 1):
        a, b = plans[ei], plans[ei + 1]
        branch = next(t for t in range(len(a)) if a[t] != b[t]) + 1
        prefix = a[:branch - 1]
        for name in uset.unc_names:
            u = model.uncs[name]
            if not u.observable:
                continue
            if u.is_ddu:
                wv = model.get_meas_var(u, branch - 1)
                w = copies[wv][prefix] if wv.adaptive else wv
                delta = widths[name]
                for lab, sa in (("f", 1.0), ("r", -1.0)):
                    mu = out.add_variable(
                        "__mu%s_e%d_%s" % (lab, ei, name), lb=0.0)
                    axis_rows[a, name] = axis_rows[a, name] + sa * mu
                    axis_rows[b, name] = axis_rows[b, name] - sa * mu
                    gate = product("mu%s_e%d" % (lab, ei), mu, w,
                                   bound=mu_bound[name])
                    dual_obj = dual_obj + delta * (mu - gate)
            elif u.stage < branch:
                mu = out.add_variable("__mu_e%d_%s" % (ei, name),
                                      lb=-float("inf"))
                axis_rows[a, name] = axis_rows[a, name] + mu
                axis_rows[b, name] = axis_rows[b, name] - mu

    for plan in plans:
        for name in uset.unc_names:
            out.add_constraint(axis_rows[plan, name] == 0.0)
        for name in uset.aux_names:
            out.add_constraint(aux_rows[plan, name] == 0.0)
    out.add_constraint(dual_obj <= LinearExpr.wrap(tau))
    out.set_objective(LinearExpr.wrap(tau))

    if symmetry_breaking:
        # plans that share a prefix are interchangeable below it: order
        # sibling branches lexicographically by their stage-t copies
        for t in range(2, model.horizon + 1):
            if cfg.counts[t] < 2:
                continue
            stage_vars = sorted((v for v in copies if v.stage == t),
                                key=lambda v: v.name)
            if not stage_vars:
                continue
            for parent in cfg.prefixes(t - 1):
                for k in range(1, cfg.counts[t]):
                    a = quicksum(2.0 ** -i * copies[v][parent + (k,)]
                                 for i, v in enumerate(stage_vars))
                    b = quicksum(2.0 ** -i * copies[v][parent + (k + 1,)]
                                 for i, v in enumerate(stage_vars))
                    out.add_constraint(a >= b)

    plan_map = {
        "cfg": cfg,
        "plans": list(plans),
        "vars": {v.name: {prefix: c.name for prefix, c in fam.items()}
                 for v, fam in copies.items()},
        "alpha": {plan: alphas[plan].name for plan in plans},
    }
    return out, plan_map


def query_plan(values, plan_map, name, plan):
    """Value of original decision ``name`` under plan tuple ``plan``.

    Static variables are returned as-is; adaptive ones via their copy for
    the plan prefix at the variable's stage.
    """
    fam = plan_map["vars"].get(name)
    if fam is None:
        return values[name]
    plan = tuple(plan)
    for prefix, copy in fam.items():
        if plan[:len(prefix)] == prefix:
            return values[copy]
    raise KeyError("plan %s not covered by configuration" % (plan,))


def query_observation_stage(values, plan_map, model, unc, plan, tol=0.5):
    """First stage at which ``unc`` is observed under ``plan``, or None."""
    u = model.uncs[unc] if isinstance(unc, str) else unc
    for t in range(1, model.horizon + 1):
        w = model.get_meas_var(u, t)
        if query_plan(values, plan_map, w.name, plan) > tol:
            return t
    return None


def warm_start_kadapt(cfg_fine, cfg_coarse, coarse_values, plan_map_fine,
                      plan_map_coarse):
    """Seed a finer plan configuration from a coarse solution.

    Every stage must offer at least as many plans as before, and at least
    one stage strictly more.  Fine plan component ``k_t`` maps to the same
    coarse component when available and to plan 1 otherwise, so added plans
    start as duplicates of the first.
    """
    fine, coarse = cfg_fine.counts, cfg_coarse.counts
    if fine.keys() != coarse.keys():
        raise errors.NotCoarser("configurations cover different horizons")
    if any(fine[t] < coarse[t] for t in fine):
        raise errors.NotCoarser("every stage needs at least as many plans")
    if all(fine[t] == coarse[t] for t in fine):
        raise errors.NotCoarser("refinement must add plans at some stage")

    def project(prefix):
        return tuple(k if k <= coarse[t + 1] else 1
                     for t, k in enumerate(prefix))

    start = {}
    for name, fam in plan_map_fine["vars"].items():
        coarse_fam = plan_map_coarse["vars"][name]
        for prefix, copy in fam.items():
            start[copy] = coarse_values[coarse_fam[project(prefix)]]
    for name in coarse_values:
        if name not in start and not name.startswith("__"):
            start[name] = coarse_values[name]
    return start

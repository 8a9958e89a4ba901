"""Decision-rule approximations: constant/linear and piecewise rules.

Both transforms take a validated multi-stage model and return a pair
``(single-stage model, rule map)``.  The output model has no adaptive
variables; its constraints are ready for :func:`robopt.reformulate.robustify`.
The rule map records, per original adaptive variable, the static variables
that encode its rule so that solutions can be rendered back in terms of the
original decisions.

Observability convention: a decision at stage ``t`` may depend on an
uncertain parameter whose revelation stage is strictly before ``t`` — the
parameter's own stage for exogenous parameters, the start of the
observation window for decision-dependent ones (where actual revelation is
gated by the measurement variables instead).
"""

from __future__ import annotations

import itertools
import math
import warnings

import numpy as np

from . import errors
from .model import (Model, LinearExpr, Constraint, DecisionVariable,
                    REAL, BINARY, INTEGER, ROBUST, STOCHASTIC, quicksum)
from .uncertainty import UncertaintySet, ConicBlock, NONNEG, from_model

DEFAULT_BIG_M = 1e4


def observable_axes(model, stage, memory=None):
    """Uncertain parameters a stage-``stage`` decision may condition on."""
    out = []
    for u in model.uncs.values():
        if not u.observable:
            continue
        s_u = u.ddu_window[0] if u.is_ddu else u.stage
        if s_u < stage and (memory is None or s_u >= stage - memory):
            out.append(u)
    return out


def _clone_base(model):
    out = Model(model.horizon, model.sense)
    for name, u in model.uncs.items():
        out.uncs[name] = u
    out.uncset_constraints = list(model.uncset_constraints)
    if model.distribution is not None:
        out.distribution = dict(model.distribution)
    return out


def _share_static(model, out, mapping):
    for v in model.vars.values():
        if not v.adaptive:
            out.vars[v.name] = v
        # adaptive variables handled by the caller via ``mapping``
    return mapping


def _coupling_big_m(v, big_m):
    if big_m is not None:
        return float(big_m)
    if math.isfinite(v.lb) and math.isfinite(v.ub):
        return max(1.0, v.ub - v.lb)
    warnings.warn(
        "adaptive variable %s has no finite bounds; decision-dependent "
        "rule coupling uses big-M %g" % (v.name, DEFAULT_BIG_M),
        RuntimeWarning, stacklevel=3)
    return DEFAULT_BIG_M


def apply_ldr_cdr(model: Model, memory=None, big_m=None):
    """Affine rules for adaptive reals, constants for adaptive binaries.

    Each adaptive real ``y`` at stage ``t`` becomes ``y__y0 + sum_i
    y__Y_<unc> * xi_i`` over the parameters observable before ``t``
    (restricted to the last ``memory`` stages when set).  Coefficients on
    decision-dependent parameters are coupled to the previous-stage
    measurement variable by ``|Y| <= M w``.  Finite bounds on the original
    adaptive variable become robust range constraints on the rule.
    """
    model.validate()
    out = _clone_base(model)
    mapping = {}
    rule_map = {}
    _share_static(model, out, mapping)

    for v in model.adaptive_variables():
        if v.kind == REAL:
            y0 = out.add_variable("%s__y0" % v.name)
            rule = LinearExpr(dec={y0: 1.0})
            coeffs = {}
            for u in observable_axes(model, v.stage, memory):
                cv = out.add_variable("%s__Y_%s" % (v.name, u.name))
                rule = rule + cv * u
                coeffs[u.name] = cv.name
            mapping[v] = rule
            rule_map[v.name] = {"kind": "affine", "stage": v.stage,
                                "intercept": y0.name, "coeffs": coeffs}
        else:
            zv = out.add_variable(v.name, kind=v.kind, lb=v.lb, ub=v.ub)
            mapping[v] = zv
            rule_map[v.name] = {"kind": "constant", "stage": v.stage,
                                "var": zv.name}

    # rule-range and DDU coefficient-coupling constraints
    for v in model.adaptive_variables():
        if v.kind != REAL:
            continue
        rule = mapping[v]
        if math.isfinite(v.lb):
            out.add_constraint(rule >= v.lb)
        if math.isfinite(v.ub):
            out.add_constraint(rule <= v.ub)
        for u in observable_axes(model, v.stage, memory):
            if not u.is_ddu:
                continue
            cv = out.vars[rule_map[v.name]["coeffs"][u.name]]
            w_old = model.get_meas_var(u, v.stage - 1)
            w_new = mapping.get(w_old, w_old)
            M = _coupling_big_m(v, big_m)
            out.add_constraint(cv - M * w_new <= 0.0)
            out.add_constraint(cv + M * w_new >= 0.0)

    for con in model.constraints:
        out.add_constraint(
            Constraint(con.expr.substitute_vars(mapping), con.sense))
    out.set_objective(model.full_objective().substitute_vars(mapping))
    return out, rule_map


# --- piecewise rules -------------------------------------------------------


class BreakpointConfig:
    """Hyper-rectangular partition: ``r[i]`` pieces per observable axis
    (creation order), split at ``breakpoints[name]`` or equally spaced."""

    def __init__(self, r, breakpoints=None):
        self.r = [int(v) for v in r]
        if any(v < 1 for v in self.r):
            raise errors.IncompatibleConfigs("subset counts must be >= 1")
        if any(v > 9 for v in self.r):
            raise errors.IncompatibleConfigs(
                "subset labels are single digits; r <= 9 per axis")
        self.breakpoints = dict(breakpoints or {})

    def segments(self, name, ri, lo, hi):
        """Closed segment bounds for one axis."""
        if ri == 1:
            return [(lo, hi)]
        pts = self.breakpoints.get(name)
        if pts is None:
            if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
                raise errors.BreakpointOutsideSupport(
                    "axis %s needs a finite support to split" % name)
            pts = [lo + (hi - lo) * k / ri for k in range(1, ri)]
        else:
            pts = sorted(float(p) for p in pts)
            if len(pts) != ri - 1:
                raise errors.IncompatibleConfigs(
                    "axis %s: %d breakpoints for r=%d"
                    % (name, len(pts), ri))
            if pts[0] <= lo or pts[-1] >= hi:
                raise errors.BreakpointOutsideSupport(
                    "axis %s: breakpoints must lie strictly inside "
                    "[%g, %g]" % (name, lo, hi))
        edges = [lo] + list(pts) + [hi]
        return [(edges[k], edges[k + 1]) for k in range(ri)]

    def align(self, axes):
        if len(self.r) != len(axes):
            raise errors.IncompatibleConfigs(
                "r has %d entries for %d observable parameters"
                % (len(self.r), len(axes)))
        return list(zip(axes, self.r))

    def subsets(self):
        return list(itertools.product(*[range(1, ri + 1) for ri in self.r]))

    @staticmethod
    def label(subset):
        return "".join(str(k) for k in subset)


def _axis_supports(model, axes):
    if model.distribution is not None:
        sup = {}
        for u in axes:
            if u in model.distribution:
                sup[u.name] = model.distribution[u]
        if len(sup) == len(axes):
            return sup
    uset = from_model(model)
    return {u.name: uset.marginals[u.name] for u in axes}


def uniform_subset_moments(distribution, cfg: BreakpointConfig, subset,
                           axes=None):
    """Probability and conditional mean of one subset under a uniform-box
    distribution: probability is the product of segment fractions, the
    conditional mean per axis is the segment midpoint."""
    axes = list(distribution.keys()) if axes is None else list(axes)
    prob = 1.0
    mean = {}
    for (u, ri), k in zip(cfg.align(axes), subset):
        lo, hi = distribution[u]
        seg_lo, seg_hi = cfg.segments(u.name, ri, lo, hi)[k - 1]
        if hi > lo:
            prob *= (seg_hi - seg_lo) / (hi - lo)
        mean[u] = 0.5 * (seg_lo + seg_hi)
    return prob, mean


def apply_pwc_pwl(model: Model, cfg: BreakpointConfig, linear=False,
                  big_m=None):
    """Piecewise rules on a hyper-rectangle partition of the set.

    Every adaptive variable gets one copy per subset (binaries stay
    constant per piece; reals become affine per piece when ``linear``).
    Constraints touching adaptive variables or parameters are duplicated
    per subset with the set restricted to that rectangle; copies of a
    variable in subsets that are indistinguishable at its stage are tied
    together (equality on unobserved exogenous axes, measurement-gated
    envelopes on decision-dependent axes).
    """
    model.validate()
    axes = model.observable_uncertainties()
    pairs = cfg.align(axes)
    supports = _axis_supports(model, axes)
    segs = {u.name: cfg.segments(u.name, ri, *supports[u.name])
            for u, ri in pairs}
    subsets = cfg.subsets()
    labels = [cfg.label(s) for s in subsets]
    base_set = from_model(model)

    out = _clone_base(model)
    out.uset_overrides = {}
    rule_map = {"__cfg": cfg, "__labels": labels}
    for v in model.vars.values():
        if not v.adaptive:
            out.vars[v.name] = v

    copies = {}  # (orig var, label) -> (static var, rule expr)
    per_var = {}
    for v in model.adaptive_variables():
        per_var[v.name] = {"kind": "piecewise", "stage": v.stage,
                           "copies": {}}
        for lab in labels:
            if v.kind == REAL and linear:
                y0 = out.add_variable("%s__s%s__y0" % (v.name, lab))
                rule = LinearExpr(dec={y0: 1.0})
                for u in observable_axes(model, v.stage):
                    cv = out.add_variable(
                        "%s__s%s__Y_%s" % (v.name, lab, u.name))
                    rule = rule + cv * u
                copies[(v, lab)] = (y0, rule)
            else:
                cv = out.add_variable("%s__s%s" % (v.name, lab),
                                      kind=v.kind, lb=v.lb, ub=v.ub)
                copies[(v, lab)] = (cv, LinearExpr(dec={cv: 1.0}))
            per_var[v.name]["copies"][lab] = copies[(v, lab)][0].name
        rule_map[v.name] = per_var[v.name]

    def subset_uset(subset):
        rows = []
        for (u, ri), k in zip(pairs, subset):
            lo, hi = segs[u.name][k - 1]
            rows.append(({u.name: 1.0}, {}, -lo))
            rows.append(({u.name: -1.0}, {}, hi))
        blocks = list(base_set.blocks) + [ConicBlock(NONNEG, rows)]
        return UncertaintySet(base_set.unc_names, base_set.aux_names, blocks)

    subset_sets = {lab: subset_uset(s) for lab, s in zip(labels, subsets)}

    def add_override(con, lab):
        idx = len(out.constraints)
        out.add_constraint(con)
        out.uset_overrides[idx] = subset_sets[lab]

    # constraints
    for con in model.constraints:
        touches_adaptive = any(v.adaptive for v in con.expr.variables())
        uncertain = not con.expr.is_certain()
        if not touches_adaptive and not uncertain:
            out.add_constraint(Constraint(con.expr, con.sense))
            continue
        for lab in labels:
            mapping = {v: copies[(v, lab)][1]
                       for v in model.adaptive_variables()}
            newcon = Constraint(con.expr.substitute_vars(mapping), con.sense)
            if uncertain:
                add_override(newcon, lab)
            else:
                out.add_constraint(newcon)

    # range constraints for linear real rules
    if linear:
        for v in model.adaptive_variables():
            if v.kind != REAL:
                continue
            for lab in labels:
                rule = copies[(v, lab)][1]
                if math.isfinite(v.lb):
                    add_override(Constraint(rule, ">=", v.lb), lab)
                if math.isfinite(v.ub):
                    add_override(Constraint(rule, "<=", v.ub), lab)

    # cross-subset non-anticipativity ties on single-axis-adjacent pairs
    for v in model.adaptive_variables():
        stage = v.stage
        M = 1.0 if v.kind != REAL else _coupling_big_m(v, big_m)
        for ai, (u, ri) in enumerate(pairs):
            if ri < 2:
                continue
            s_u = u.ddu_window[0] if u.is_ddu else u.stage
            ddu_gate = u.is_ddu and s_u < stage
            if not u.is_ddu and s_u < stage:
                continue  # exogenous and already observed: copies are free
            for s in subsets:
                if s[ai] >= ri:
                    continue
                s2 = list(s)
                s2[ai] += 1
                lab, lab2 = cfg.label(s), cfg.label(tuple(s2))
                a = copies[(v, lab)][1]
                b = copies[(v, lab2)][1]
                if not ddu_gate:
                    _tie_equal(out, v, a, b, linear)
                    continue
                w_old = model.get_meas_var(u, stage - 1)
                for wl in (lab, lab2):
                    w = copies[(w_old, wl)][1]
                    if v.kind == REAL and linear:
                        # tie every rule coefficient through the gate
                        for ca, cb in _rule_columns(a, b):
                            out.add_constraint(ca - cb - M * w <= 0.0)
                            out.add_constraint(cb - ca - M * w <= 0.0)
                    else:
                        out.add_constraint(a - b - M * w <= 0.0)
                        out.add_constraint(b - a - M * w <= 0.0)

    # objective
    full = model.full_objective()
    if model.sense == STOCHASTIC:
        if model.distribution is None:
            raise errors.StochasticWithoutDistribution(
                "piecewise expectation objective needs a distribution")
        total = LinearExpr()
        for s, lab in zip(subsets, labels):
            prob, mean = uniform_subset_moments(
                model.distribution, cfg, s, axes)
            mapping = {v: copies[(v, lab)][1]
                       for v in model.adaptive_variables()}
            piece = full.substitute_vars(mapping)
            total._iadd(_expect(piece, mean, model), prob)
        out.set_objective(total)
    else:
        tau = out.add_variable("__tau")
        for lab in labels:
            mapping = {v: copies[(v, lab)][1]
                       for v in model.adaptive_variables()}
            piece = full.substitute_vars(mapping)
            add_override(Constraint(piece - tau, "<="), lab)
        out.set_objective(LinearExpr(dec={tau: 1.0}))
    return out, rule_map


def _tie_equal(out, v, a, b, linear):
    if v.kind == REAL and linear:
        for ca, cb in _rule_columns(a, b):
            out.add_constraint(ca == cb)
    else:
        out.add_constraint(a == b)


def _rule_columns(a: LinearExpr, b: LinearExpr):
    """Pair up intercept/coefficient variables of two affine rules."""
    out = []
    b_by_suffix = {}
    for vb in b.dec:
        b_by_suffix[vb.name.split("__s", 1)[-1].split("__", 1)[-1]] = vb
    for va in a.dec:
        suffix = va.name.split("__s", 1)[-1].split("__", 1)[-1]
        vb = b_by_suffix.get(suffix)
        if vb is not None:
            out.append((va, vb))
    return out


def _expect(expr: LinearExpr, mean, model):
    """Expectation of a subset piece at its conditional means; parameters
    outside the partition fall back to their marginal support midpoint."""
    out = LinearExpr(const=expr.const, dec=dict(expr.dec))

    def mu(u):
        if u in mean:
            return mean[u]
        if model.distribution and u in model.distribution:
            lo, hi = model.distribution[u]
            return 0.5 * (lo + hi)
        raise errors.StochasticWithoutDistribution(
            "no distribution support declared for %s" % u.name)

    for u, c in expr.unc.items():
        out = out + c * mu(u)
    for (v, u), c in expr.prod.items():
        out = out + LinearExpr(dec={v: c * mu(u)})
    return out


# --- warm starts -----------------------------------------------------------


def _ratio_power_of_two(fine, coarse):
    if fine % coarse:
        return None
    q = fine // coarse
    return q if q & (q - 1) == 0 else None


def warm_start_pwc(cfg_fine: BreakpointConfig, cfg_coarse: BreakpointConfig,
                   coarse_values, adaptive_names=None):
    """Initial assignment for a fine partition from a coarse solution.

    Requires every fine-to-coarse piece-count ratio to be a power of two
    (so default equally spaced splits nest).  ``coarse_values`` is the
    solved name-to-value map; copies named ``<var>__s<label>`` inherit the
    value of the coarse subset containing them, other names pass through.
    """
    if len(cfg_fine.r) != len(cfg_coarse.r):
        raise errors.IncompatibleConfigs("partition dimensions differ")
    ratios = []
    for rf, rc in zip(cfg_fine.r, cfg_coarse.r):
        if rf < rc:
            raise errors.IncompatibleConfigs(
                "fine config must refine the coarse one")
        q = _ratio_power_of_two(rf, rc)
        if q is None:
            raise errors.IncompatibleConfigs(
                "piece-count ratio %d/%d is not a power of two" % (rf, rc))
        ratios.append(rf // rc)

    def coarse_label(fine_subset):
        return cfg_coarse.label(tuple(
            (k - 1) // q + 1 for k, q in zip(fine_subset, ratios)))

    out = {}
    fine_by_label = {cfg_fine.label(s): s for s in cfg_fine.subsets()}
    for name, val in coarse_values.items():
        if "__s" not in name:
            out[name] = val
    for lab, s in fine_by_label.items():
        clab = coarse_label(s)
        for name, val in coarse_values.items():
            if "__s%s" % clab not in name:
                continue
            base, _, rest = name.partition("__s%s" % clab)
            out["%s__s%s%s" % (base, lab, rest)] = val
    return out

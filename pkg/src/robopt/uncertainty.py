"""Conic uncertainty sets: constructors, validation, support functions.

A set over uncertain parameters ``xi`` (and auxiliary lifting parameters
``zeta``) is a finite intersection of blocks, each of the form ``P xi +
Q zeta + q  in  K`` where ``K`` is the nonnegative orthant or the Lorentz
cone (first row at least the 2-norm of the rest).  Individual coefficients
may be affine in *static binary* decision variables, which makes the set
decision-dependent; such entries are stored as expressions and resolved at
dualization time.

Constructors attach the defining constraints to the owning model (scope =
uncertainty set) so that ROB emission and reformulation see one canonical
representation; the returned object is the compiled block form.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from . import errors
from .model import LinearExpr, UncertainParameter, Constraint
from .solver.counterpart import Counterpart, OPTIMAL, INFEASIBLE, UNBOUNDED
from .solver.simplex import solve_lp

NONNEG = "nonneg"
SOC = "soc"

INF = math.inf


def _coef_value(c, dec_values):
    if isinstance(c, LinearExpr):
        return c.evaluate(dec_values or {}, {})
    return float(c)


def _coef_is_plain(c):
    return not isinstance(c, LinearExpr) or (not c.dec and not c.prod)


class ConicBlock:
    """One conic membership ``P xi + Q zeta + q in K``.

    ``rows`` is a list of ``(pcoeffs, zcoeffs, const)`` where the coeff maps
    go from parameter name to a float (or a decision-affine
    :class:`LinearExpr` in the decision-dependent case).  For the Lorentz
    cone, row 0 is the radius: ``row0 >= ||(row1, ..., rowk)||_2``.
    """

    __slots__ = ("cone", "rows")

    def __init__(self, cone, rows):
        if cone not in (NONNEG, SOC):
            raise ValueError("unknown cone %r" % (cone,))
        if cone == SOC and len(rows) < 2:
            raise ValueError("lorentz block needs arity >= 2")
        self.cone = cone
        self.rows = rows

    def is_decision_dependent(self):
        for p, z, q in self.rows:
            if not _coef_is_plain(q):
                return True
            for c in list(p.values()) + list(z.values()):
                if not _coef_is_plain(c):
                    return True
        return False

    def row_values(self, values, dec_values=None):
        """Evaluate every row at a full parameter assignment."""
        out = []
        for p, z, q in self.rows:
            v = _coef_value(q, dec_values)
            for name, c in p.items():
                v += _coef_value(c, dec_values) * values[name]
            for name, c in z.items():
                v += _coef_value(c, dec_values) * values[name]
            out.append(v)
        return out

    def violation(self, values, dec_values=None):
        vals = self.row_values(values, dec_values)
        if self.cone == NONNEG:
            return max(0.0, -min(vals)) if vals else 0.0
        return max(0.0, math.hypot(*vals[1:]) - vals[0])


class UncertaintySet:
    """Compiled conic uncertainty set over named parameters."""

    def __init__(self, unc_names, aux_names, blocks):
        self.unc_names = list(unc_names)
        self.aux_names = list(aux_names)
        self.blocks = list(blocks)
        self.marginals = None  # name -> (lo, hi) filled by validate()
        self.box_bounds = None  # (lb, ub) arrays when the set is a pure box
        self._detect_box()

    # --- structure ---------------------------------------------------------

    @property
    def all_names(self):
        return self.unc_names + self.aux_names

    def has_soc(self):
        return any(b.cone == SOC for b in self.blocks)

    def is_decision_dependent(self):
        return any(b.is_decision_dependent() for b in self.blocks)

    def _detect_box(self):
        """A pure box is an intersection of single-parameter halfspaces with
        numeric coefficients; its dualization admits a two-row shortcut."""
        if self.aux_names:
            return
        lo = {u: -INF for u in self.unc_names}
        hi = {u: INF for u in self.unc_names}
        for blk in self.blocks:
            if blk.cone != NONNEG:
                return
            for p, z, q in blk.rows:
                if z or len(p) != 1:
                    return
                if not _coef_is_plain(q):
                    return
                (name, c), = p.items()
                if not _coef_is_plain(c):
                    return
                c = float(c) if not isinstance(c, LinearExpr) else c.const
                q = float(q) if not isinstance(q, LinearExpr) else q.const
                if c > 0:
                    lo[name] = max(lo[name], -q / c)
                elif c < 0:
                    hi[name] = min(hi[name], -q / c)
                elif q < 0:
                    return  # 0 >= -q infeasible; let validation report it
        lb = np.array([lo[u] for u in self.unc_names])
        ub = np.array([hi[u] for u in self.unc_names])
        if np.all(np.isfinite(lb)) and np.all(np.isfinite(ub)):
            self.box_bounds = (lb, ub)

    # --- evaluation --------------------------------------------------------

    def contains(self, values, tol=1e-9, dec_values=None):
        return self.max_violation(values, dec_values) <= tol

    def max_violation(self, values, dec_values=None):
        return max((b.violation(values, dec_values) for b in self.blocks),
                   default=0.0)

    def _as_counterpart(self, direction, dec_values=None):
        """max direction . (xi, zeta) over the set, as a minimization LP."""
        cp = Counterpart("support")
        for name in self.all_names:
            cp.add_var(name)
        for bi, blk in enumerate(self.blocks):
            numrows = []
            for p, z, q in blk.rows:
                coeffs = {}
                for name, c in list(p.items()) + list(z.items()):
                    coeffs[cp.index[name]] = _coef_value(c, dec_values)
                numrows.append((coeffs, _coef_value(q, dec_values)))
            if blk.cone == NONNEG:
                for coeffs, const in numrows:
                    cp.add_row(coeffs, ">=", -const)
            else:
                cp.add_soc_row(numrows[1:], numrows[0], "q%d" % bi)
        cp.set_objective({cp.index[name]: -d
                          for name, d in direction.items() if d != 0.0})
        return cp

    def support_function(self, direction, dec_values=None):
        """``max dir . (xi, zeta)`` over the set; ``direction`` maps names
        to weights.  Raises :class:`errors.UnboundedSet` /
        :class:`errors.EmptySet` accordingly."""
        cp = self._as_counterpart(direction, dec_values)
        if cp.has_soc():
            from .solver.conic import have_cvxpy, solve_conic
            if have_cvxpy():
                sol = solve_conic(cp)
            else:
                # orthant relaxation |v_i| <= v0 of each cone row: upper
                # bound on the support, exact enough for boundedness checks
                relax = Counterpart("support-relax")
                relax.var_names = list(cp.var_names)
                relax.lb, relax.ub = list(cp.lb), list(cp.ub)
                relax.kind, relax.index = list(cp.kind), dict(cp.index)
                relax.rows = [r for r in cp.rows]
                relax.obj = dict(cp.obj)
                for elems, rhs, _ in cp.soc_rows:
                    for coeffs, const in elems:
                        for sgn in (1.0, -1.0):
                            row = {j: rhs[0].get(j, 0.0) - sgn * c
                                   for j, c in coeffs.items()}
                            for j, c in rhs[0].items():
                                row.setdefault(j, c)
                            relax.add_row(row, ">=", sgn * const - rhs[1])
                sol = solve_lp(relax)
        else:
            sol = solve_lp(cp)
        if sol.status == UNBOUNDED:
            raise errors.UnboundedSet(
                "support function unbounded in direction %r" % (direction,))
        if sol.status == INFEASIBLE:
            raise errors.EmptySet("uncertainty set is empty")
        if sol.status != OPTIMAL:
            raise errors.SolverError("support solve failed: %s" % sol.status)
        return -sol.objective

    def support_point(self, direction, dec_values=None):
        """Maximizer of the support problem (polyhedral sets)."""
        cp = self._as_counterpart(direction, dec_values)
        if cp.has_soc():
            from .solver.conic import solve_conic
            sol = solve_conic(cp)
        else:
            sol = solve_lp(cp)
        if sol.status != OPTIMAL:
            raise errors.UnboundedSet(
                "no support point in direction %r (%s)"
                % (direction, sol.status))
        return {name: sol.values[name] for name in self.all_names}

    # --- validation --------------------------------------------------------

    def validate(self, unsafe=False):
        """Boundedness check via 2k support LPs; fills ``marginals``.

        ``unsafe=True`` skips the solves (documented opt-out for expensive
        sets); SOC blocks trigger a strict-feasibility warning either way.
        """
        if self.has_soc():
            warnings.warn(
                "second-order-cone uncertainty blocks assume a strictly "
                "feasible representation; this is not verified",
                RuntimeWarning, stacklevel=2)
        if unsafe:
            return self
        marg = {}
        for name in self.all_names:
            hi = self.support_function({name: 1.0})
            lo = -self.support_function({name: -1.0})
            marg[name] = (lo, hi)
        self.marginals = marg
        return self

    def sample(self, count, rng=None, dec_values=None):
        """Random points of the set: convex combinations of support-problem
        maximizers along random directions.  Returns full assignments."""
        rng = np.random.default_rng(rng)
        names = self.all_names
        verts = []
        for _ in range(max(2 * len(names), 8)):
            d = rng.normal(size=len(names))
            verts.append(self.support_point(
                {nm: d[i] for i, nm in enumerate(names)}, dec_values))
        out = []
        for _ in range(count):
            w = rng.dirichlet(np.ones(len(verts)))
            out.append({nm: sum(w[i] * verts[i][nm]
                                for i in range(len(verts))) for nm in names})
        return out


# --- constructors ----------------------------------------------------------


def _names(uncs):
    out = []
    for u in uncs:
        out.append(u.name if isinstance(u, UncertainParameter) else str(u))
    return out


def _add_aux(model, count, prefix="__aux_", start=0):
    """Register fresh non-observable lifting parameters on the model."""
    made = []
    k = start
    while len(made) < count:
        name = "%s%d" % (prefix, k)
        k += 1
        if name in model.uncs:
            continue
        made.append(model.add_uncertainty(name, stage=1, observable=False))
    return made


def from_model(model, validate=True, unsafe=False):
    """Compile the model's uncertainty-set constraints into block form.

    Observable parameters are the primary axes (creation order);
    non-observable ones are auxiliary liftings.
    """
    primary = [u.name for u in model.uncs.values() if u.observable]
    aux = [u.name for u in model.uncs.values() if not u.observable]
    blocks = []
    for con in model.uncset_constraints:
        expr = con.expr
        if expr.norm is not None:
            # expr = norm(e_1..e_m) + affine <= 0; radius row is -affine
            affine = expr.copy()
            affine.norm = None
            radius = _row_from_expr(affine * -1.0)
            rows = [radius] + [_row_from_expr(e) for e in expr.norm]
            blocks.append(ConicBlock(SOC, rows))
            continue
        senses = {"<=": [-1.0], ">=": [1.0], "==": [1.0, -1.0]}[con.sense]
        for sgn in senses:
            blocks.append(ConicBlock(NONNEG, [_row_from_expr(expr * sgn)]))
    uset = UncertaintySet(primary, aux, blocks)
    if validate:
        uset.validate(unsafe=unsafe)
    return uset


def _row_from_expr(expr, drop_norm=False):
    expr = LinearExpr.wrap(expr)
    if expr.norm is not None and not drop_norm:
        raise errors.NonlinearExpression("nested norm in uncertainty set")
    p = {}
    for u, c in expr.unc.items():
        p[u.name] = c
    for (v, u), c in expr.prod.items():
        term = LinearExpr(dec={v: c})
        p[u.name] = term + p.get(u.name, 0.0)
    q = expr.const
    if expr.dec:
        q = LinearExpr(const=expr.const, dec=dict(expr.dec))
    return (p, {}, q)


def box_set(model, uncs, lower, upper, validate=True):
    """``lower <= xi <= upper`` componentwise."""
    names = _names(uncs)
    lower = np.broadcast_to(np.asarray(lower, dtype=float), (len(names),))
    upper = np.broadcast_to(np.asarray(upper, dtype=float), (len(names),))
    if np.any(lower > upper):
        raise errors.InvalidBounds("box set with lower > upper")
    for u, lo, hi in zip(uncs, lower, upper):
        model.add_constraint_uncset(u >= lo)
        model.add_constraint_uncset(u <= hi)
    return from_model(model, validate=validate)


def budget_set(model, uncs, gamma, norm="one", hierarchy=None,
               lower=None, upper=None, validate=True):
    """1-norm or inf-norm budget ``||xi|| <= gamma`` around the origin.

    ``hierarchy``: optional list of ``(unc_subset, gamma_h)`` adding
    grouped rows sharing the absolute-value liftings.  ``lower``/``upper``
    add box support rows.
    """
    if gamma < 0:
        raise errors.InvalidBounds("budget must be nonnegative")
    if norm == "inf":
        for u in uncs:
            model.add_constraint_uncset(u >= -gamma)
            model.add_constraint_uncset(u <= gamma)
    elif norm == "one":
        zeta = _add_aux(model, len(uncs))
        for u, z in zip(uncs, zeta):
            model.add_constraint_uncset(z >= u)
            model.add_constraint_uncset(z >= -u)
        total = LinearExpr()
        for z in zeta:
            total = total + z
        model.add_constraint_uncset(total <= gamma)
        if hierarchy:
            bymember = dict(zip(_names(uncs), zeta))
            for group, gh in hierarchy:
                part = LinearExpr()
                for u in group:
                    part = part + bymember[_names([u])[0]]
                model.add_constraint_uncset(part <= gh)
    else:
        raise ValueError("norm must be 'one' or 'inf'")
    if lower is not None:
        for u, lo in zip(uncs, np.broadcast_to(lower, (len(uncs),))):
            model.add_constraint_uncset(u >= float(lo))
    if upper is not None:
        for u, hi in zip(uncs, np.broadcast_to(upper, (len(uncs),))):
            model.add_constraint_uncset(u <= float(hi))
    return from_model(model, validate=validate)


def ellipsoid_set(model, uncs, center, omega, validate=True):
    """``||xi - center||_2 <= omega``."""
    if omega < 0:
        raise errors.InvalidBounds("ellipsoid radius must be nonnegative")
    center = np.broadcast_to(np.asarray(center, dtype=float), (len(uncs),))
    elems = [u - float(mu) for u, mu in zip(uncs, center)]
    model.add_constraint_uncset(
        Constraint(LinearExpr(norm=elems), "<=", float(omega),
                   scope="uncertaintySet"))
    return from_model(model, validate=validate)


def clt_set(model, uncs, mu, sigma, gamma, lower=None, upper=None,
            validate=True):
    """``|sum xi - mu k| <= gamma sigma sqrt(k)`` plus marginal bounds."""
    if sigma < 0 or gamma < 0:
        raise errors.InvalidBounds("sigma and gamma must be nonnegative")
    k = len(uncs)
    total = LinearExpr()
    for u in uncs:
        total = total + u
    half = gamma * sigma * math.sqrt(k)
    model.add_constraint_uncset(total <= mu * k + half)
    model.add_constraint_uncset(total >= mu * k - half)
    if lower is not None:
        for u, lo in zip(uncs, np.broadcast_to(lower, (k,))):
            model.add_constraint_uncset(u >= float(lo))
    if upper is not None:
        for u, hi in zip(uncs, np.broadcast_to(upper, (k,))):
            model.add_constraint_uncset(u <= float(hi))
    return from_model(model, validate=validate)


def factor_model_set(model, uncs, phi, nominal, factor_bound="box",
                     half=True, validate=True):
    """``xi_i = (1 + phi_i . zeta / 2) nominal_i`` with bounded factors.

    ``factor_bound``: "box" puts ``zeta in [-1, 1]^M``; "ball" puts
    ``||zeta||_2 <= 1``.  ``half=False`` drops the /2 scaling.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.shape[0] != len(uncs):
        raise errors.InvalidBounds("factor loading row count mismatch")
    M = phi.shape[1]
    nominal = np.broadcast_to(np.asarray(nominal, dtype=float), (len(uncs),))
    zeta = _add_aux(model, M, prefix="Factor_", start=1)
    scale = 0.5 if half else 1.0
    for i, u in enumerate(uncs):
        rhs = LinearExpr(const=float(nominal[i]))
        for j in range(M):
            rhs = rhs + (float(nominal[i]) * scale * phi[i, j]) * zeta[j]
        model.add_constraint_uncset(u == rhs)
    if factor_bound == "box":
        for z in zeta:
            model.add_constraint_uncset(z >= -1.0)
            model.add_constraint_uncset(z <= 1.0)
    elif factor_bound == "ball":
        model.add_constraint_uncset(
            Constraint(LinearExpr(norm=[LinearExpr() + z for z in zeta]),
                       "<=", 1.0, scope="uncertaintySet"))
    else:
        raise ValueError("factor_bound must be 'box' or 'ball'")
    return from_model(model, validate=validate)

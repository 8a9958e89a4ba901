"""Dense bounded-variable simplex: two-phase primal plus a dual kernel.

The pivot kernels are written once in numpy-compatible form and compiled
with numba unless the ``ROBOPT_PURE_NUMPY`` environment variable is set (or
numba is unavailable), in which case the plain numpy versions run as-is.
See ``benchmarks/bench_simplex.py`` for a comparison of the two paths.

The primal kernel returns its final tableau; :func:`resolve_lp` feeds it
back through the dual kernel after a bound change, which is how branch and
bound re-solves child nodes in a handful of pivots instead of from scratch.
"""

from __future__ import annotations

import math
import os

import numpy as np

from .. import errors
from .counterpart import (Counterpart, Solution, OPTIMAL, INFEASIBLE,
                          UNBOUNDED, LIMIT)

INF = np.inf

# kernel status codes
_OPT = 0
_INFEAS = 1
_UNBD = 2
_ITER = 3


def _bounded_simplex(A, b, c, lb, ub, crash, max_iter, piv_tol):
    """min c@x  s.t.  A x = b,  lb <= x <= ub  (dense two-phase tableau).

    ``crash[i]`` names a singleton column of row ``i`` (its slack) or is -1;
    when the initial residual lets that slack sit inside its bounds, the row
    starts with the slack basic and needs no artificial column.  Returns
    ``(status, x, y, rc, iters, T, basis, lbf, ubf, ycol, ysign)`` with
    ``x``/``rc`` over the full tableau width; the tail entries describe the
    final basis for warm restarts.
    """
    m, n = A.shape

    x0 = np.zeros(n)
    for j in range(n):
        if lb[j] > -INF:
            x0[j] = lb[j]
        elif ub[j] < INF:
            x0[j] = ub[j]
    r = b - A @ x0

    use_art = np.zeros(m, dtype=np.bool_)
    n_art = 0
    for i in range(m):
        j = crash[i]
        if j < 0 or r[i] / A[i, j] < 0.0:
            use_art[i] = True
            n_art += 1
    N = n + n_art

    T = np.zeros((m, N))
    T[:, :n] = A
    lbf = np.empty(N)
    ubf = np.empty(N)
    lbf[:n] = lb
    ubf[:n] = ub
    lbf[n:] = 0.0
    ubf[n:] = INF

    x = np.zeros(N)
    x[:n] = x0
    basis = np.empty(m, dtype=np.int64)
    ycol = np.empty(m, dtype=np.int64)
    ysign = np.ones(m)
    k = 0
    for i in range(m):
        if use_art[i]:
            a = n + k
            k += 1
            if r[i] < 0.0:
                ysign[i] = -1.0
                # initial basis matrix column is ysign*e_i; keep T = B^-1 A
                T[i] = -T[i]
            T[i, a] = 1.0
            x[a] = abs(r[i])
            basis[i] = a
            ycol[i] = a
        else:
            j = crash[i]
            s = A[i, j]
            if s < 0.0:
                T[i] = -T[i]
            x[j] = r[i] / s
            basis[i] = j
            ycol[i] = j
            ysign[i] = s

    in_basis = np.zeros(N, dtype=np.bool_)
    for i in range(m):
        in_basis[basis[i]] = True

    # true (unflipped) column data, handed to the dual kernel: warm-restart
    # chains accumulate drift over many pivots and periodically rebuild the
    # tableau from these columns
    Aext = np.zeros((m, N))
    Aext[:, :n] = A
    for i in range(m):
        if use_art[i]:
            Aext[i, basis[i]] = ysign[i]

    # phase-1 costs: sum of artificials
    c_full = np.zeros(N)
    c_full[n:] = 1.0
    rc = c_full.copy()
    for i in range(m):
        if c_full[basis[i]] != 0.0:
            rc -= c_full[basis[i]] * T[i]

    iters = 0
    phase = 1
    bland = False
    degen = 0
    status = _OPT

    while True:
        if iters >= max_iter:
            status = _ITER
            break
        # entering column
        can_inc = (~in_basis) & (x < ubf - 1e-12)
        can_dec = (~in_basis) & (x > lbf + 1e-12)
        score = np.zeros(N)
        inc_mask = can_inc & (rc < -piv_tol)
        dec_mask = can_dec & (rc > piv_tol)
        score[inc_mask] = -rc[inc_mask]
        score[dec_mask] = np.maximum(score[dec_mask], rc[dec_mask])
        if not np.any(score > 0.0):
            # optimal for current phase
            if phase == 1:
                scale = 1.0 + (np.abs(b).max() if m else 0.0)
                if x[n:].sum() > 1e-7 * scale:
                    status = _INFEAS
                    break
                # fix artificials, switch to true costs
                ubf[n:] = 0.0
                x[n:] = 0.0
                c_full[:] = 0.0
                c_full[:n] = c
                rc = c_full.copy()
                for i in range(m):
                    if c_full[basis[i]] != 0.0:
                        rc -= c_full[basis[i]] * T[i]
                phase = 2
                bland = False
                degen = 0
                continue
            status = _OPT
            break
        if bland:
            cand = score > 0.0
            q = int(np.argmax(cand))
        else:
            q = int(np.argmax(score))
        dirn = 1.0 if (inc_mask[q]
                       and (-rc[q] >= rc[q] or not dec_mask[q])) else -1.0
        if not inc_mask[q]:
            dirn = -1.0
        colv = T[:, q] * dirn
        steps = np.full(m, INF)
        xb = x[basis]
        lbb = lbf[basis]
        ubb = ubf[basis]
        pos = colv > piv_tol
        neg = colv < -piv_tol
        with_lb = pos & (lbb > -INF)
        with_ub = neg & (ubb < INF)
        steps[with_lb] = (xb[with_lb] - lbb[with_lb]) / colv[with_lb]
        steps[with_ub] = (xb[with_ub] - ubb[with_ub]) / colv[with_ub]
        steps = np.maximum(steps, 0.0)
        own = ubf[q] - x[q] if dirn > 0 else x[q] - lbf[q]
        min_step = steps.min()
        if own <= min_step:
            if own == INF:
                status = _UNBD if phase == 2 else _INFEAS
                break
            # bound flip, basis unchanged
            x[q] += dirn * own
            x[basis] -= colv * own
            iters += 1
            continue
        # leaving row: among near-ties prefer the largest pivot magnitude
        cand = steps <= min_step + 1e-10
        if bland:
            bi = np.where(cand, basis, N + 1)
            rrow = int(np.argmin(bi))
        else:
            mag = np.where(cand, np.abs(colv), -1.0)
            rrow = int(np.argmax(mag))
        step = steps[rrow]
        # update primal values
        x[q] += dirn * step
        x[basis] -= colv * step
        leave = basis[rrow]
        x[leave] = lbf[leave] if colv[rrow] > 0 else ubf[leave]
        # pivot: divide the row, then eliminate the column row by row,
        # skipping rows with a zero multiplier (no 2-d temporaries)
        piv = T[rrow, q]
        T[rrow] = T[rrow] / piv
        Trow = T[rrow]
        for i2 in range(m):
            if i2 != rrow:
                f = T[i2, q]
                if f != 0.0:
                    T[i2] -= f * Trow
        if rc[q] != 0.0:
            rc = rc - rc[q] * Trow
        in_basis[leave] = False
        in_basis[q] = True
        basis[rrow] = q
        iters += 1
        if step <= 1e-12:
            degen += 1
            if degen > 2 * m + 200:
                bland = True
        else:
            degen = 0
            bland = False

    y = np.zeros(m)
    for i in range(m):
        y[i] = -rc[ycol[i]] * ysign[i]
    return status, x, y, rc, iters, T, basis, lbf, ubf, ycol, ysign, Aext


def _dual_simplex(T, x, rc, basis, in_basis, lbf, ubf, max_iter, piv_tol):
    """Dual simplex on a tableau that is dual feasible but primal infeasible
    after bound changes (branch-and-bound child nodes).

    Mutates its arguments in place; returns ``(status, iters)`` where
    ``_INFEAS`` means the node is infeasible and ``_ITER`` that the caller
    should fall back to a cold solve.
    """
    m, N = T.shape
    iters = 0
    feas_tol = 1e-9
    while True:
        if iters >= max_iter:
            return _ITER, iters
        # leaving row: the first violated basic variable.  A fixed scan
        # order makes earlier rows settle before later ones get touched,
        # which avoids the ping-pong walks a most-violated rule takes
        # through dual-degenerate bases.
        rrow = -1
        for i in range(m):
            bi = basis[i]
            v = x[bi]
            if lbf[bi] - v > feas_tol or v - ubf[bi] > feas_tol:
                rrow = i
                break
        if rrow < 0:
            return _OPT, iters
        bi = basis[rrow]
        below = x[bi] < lbf[bi]
        alpha = T[rrow]
        # admissible entering columns keep reduced costs sign-feasible:
        # ratio rc[j] / (-alpha[j]) when pushing up, rc[j] / alpha[j] down
        best = -1
        best_ratio = INF
        for j in range(N):
            if in_basis[j] or lbf[j] == ubf[j]:
                continue
            a = alpha[j]
            if a > -piv_tol and a < piv_tol:
                continue
            at_lb = x[j] <= lbf[j] + 1e-9
            if below:
                ok = (at_lb and a < 0.0) or (not at_lb and a > 0.0)
            else:
                ok = (at_lb and a > 0.0) or (not at_lb and a < 0.0)
            if not ok:
                continue
            signed_rc = rc[j] if at_lb else -rc[j]
            if signed_rc < 0.0:
                signed_rc = 0.0
            ratio = signed_rc / abs(a)
            if ratio < best_ratio - 1e-10 or (
                    ratio < best_ratio + 1e-10
                    and (best < 0 or abs(a) > abs(alpha[best]))):
                best_ratio = ratio
                best = j
        if best < 0:
            return _INFEAS, iters
        q = best
        target = lbf[bi] if below else ubf[bi]
        t = (target - x[bi]) / (-alpha[q])
        # primal update
        x[q] += t
        if m:
            x[basis] -= T[:, q] * t
        x[bi] = target
        # pivot
        piv = T[rrow, q]
        T[rrow] = T[rrow] / piv
        Trow = T[rrow]
        for i2 in range(m):
            if i2 != rrow:
                f = T[i2, q]
                if f != 0.0:
                    T[i2] -= f * Trow
        if rc[q] != 0.0:
            rc -= rc[q] * Trow
        in_basis[bi] = False
        in_basis[q] = True
        basis[rrow] = q
        iters += 1


def _load_kernels():
    if os.environ.get("ROBOPT_PURE_NUMPY"):
        return _bounded_simplex, _dual_simplex, "numpy"
    try:
        from numba import njit
    except ImportError:
        return _bounded_simplex, _dual_simplex, "numpy"
    return (njit(cache=True)(_bounded_simplex),
            njit(cache=True)(_dual_simplex), "numba")


_KERNEL, _DUAL_KERNEL, KERNEL_FLAVOR = _load_kernels()


def kernel_variants():
    """Both primal kernel implementations, for benchmarking:
    (numpy, jitted-or-None)."""
    try:
        from numba import njit
        jitted = njit(cache=True)(_bounded_simplex)
    except ImportError:
        jitted = None
    return _bounded_simplex, jitted


def _standard_form(cp: Counterpart, lb=None, ub=None):
    n = cp.num_vars
    m = cp.num_rows
    n_slack = sum(1 for _, s, _, _ in cp.rows if s != "==")
    A = np.zeros((m, n + n_slack))
    b = np.zeros(m)
    lo = np.array(cp.lb if lb is None else lb, dtype=float)
    hi = np.array(cp.ub if ub is None else ub, dtype=float)
    lo = np.concatenate([lo, np.zeros(n_slack)])
    hi = np.concatenate([hi, np.full(n_slack, INF)])
    crash = np.full(m, -1, dtype=np.int64)
    k = n
    for i, (coeffs, sense, rhs, _) in enumerate(cp.rows):
        for j, c in coeffs.items():
            A[i, j] = c
        b[i] = rhs
        if sense == "<=":
            A[i, k] = 1.0
            crash[i] = k
            k += 1
        elif sense == ">=":
            A[i, k] = -1.0
            crash[i] = k
            k += 1
    c = np.zeros(n + n_slack)
    for j, cj in cp.obj.items():
        c[j] = cj
    return A, b, c, lo, hi, crash


class _BasisState:
    """Final tableau of a solved LP, reusable for bound-change resolves."""

    __slots__ = ("T", "x", "rc", "basis", "in_basis", "lbf", "ubf",
                 "ycol", "ysign", "cvec", "b", "Aext", "pivots")

    def __init__(self, T, x, rc, basis, in_basis, lbf, ubf, ycol, ysign,
                 cvec, b, Aext, pivots=0):
        self.T = T
        self.x = x
        self.rc = rc
        self.basis = basis
        self.in_basis = in_basis
        self.lbf = lbf
        self.ubf = ubf
        self.ycol = ycol
        self.ysign = ysign
        self.cvec = cvec
        self.b = b
        # original column data (read-only, shared across copies) and the
        # pivot count since the tableau was last rebuilt from it
        self.Aext = Aext
        self.pivots = pivots

    def copy(self):
        return _BasisState(self.T.copy(), self.x.copy(), self.rc.copy(),
                           self.basis.copy(), self.in_basis.copy(),
                           self.lbf.copy(), self.ubf.copy(), self.ycol,
                           self.ysign, self.cvec, self.b, self.Aext,
                           self.pivots)

    @property
    def nbytes(self):
        return self.T.nbytes


def _rebuild_state(state):
    """Recompute the tableau, basic values, and reduced costs of ``state``
    from the original column data, wiping out accumulated round-off.

    Returns True when the rebuilt data was committed.  A (near-)singular
    basis keeps the incremental data and returns False: solving against it
    either raises or yields garbage, and the incremental tableau is still a
    usable approximation.
    """
    T, x, basis = state.T, state.x, state.basis
    Aext, b, cvec = state.Aext, state.b, state.cvec
    B = np.ascontiguousarray(Aext[:, basis])
    try:
        T2 = np.linalg.solve(B, Aext)
        xn = x.copy()
        xn[basis] = 0.0
        xbv = np.linalg.solve(B, b - Aext @ xn)
    except np.linalg.LinAlgError:
        return False
    if not np.all(np.isfinite(xbv)) or np.abs(T2).max() > 1e9:
        return False
    lbb = state.lbf[basis]
    ubb = state.ubf[basis]
    v0 = max(0.0, float(np.maximum(lbb - x[basis], x[basis] - ubb).max()))
    v1 = max(0.0, float(np.maximum(lbb - xbv, xbv - ubb).max()))
    if v1 > v0 + 1e-3:
        return False
    T[:, :] = T2
    x[basis] = xbv
    rc = state.rc
    rc[:] = cvec
    cb = cvec[basis]
    for i in np.nonzero(cb)[0]:
        rc -= cb[i] * T[i]
    state.pivots = 0
    return True


def compact_state(state):
    """Tiny snapshot (basis + variable values) from which
    :func:`reconstruct_state` can rebuild a full warm-start state."""
    return state.basis.copy(), state.x.astype(np.float32)


def reconstruct_state(template, compact, lb, ub):
    """Rebuild a full basis state from a :func:`compact_state` snapshot.

    ``template`` is any state of the same LP (only its immutable parts and
    slack/artificial bound tail are read); ``lb``/``ub`` are the structural
    bounds of the node being reopened.  Returns None when the recorded
    basis turns out singular.
    """
    basis, x32 = compact
    N = template.Aext.shape[1]
    n = len(lb)
    lbf = np.empty(N)
    ubf = np.empty(N)
    lbf[:n] = lb
    ubf[:n] = ub
    lbf[n:] = template.lbf[n:]
    ubf[n:] = template.ubf[n:]
    x = x32.astype(np.float64)
    in_basis = np.zeros(N, dtype=bool)
    in_basis[basis] = True
    # nonbasic variables sit exactly at a bound; snap away the float32
    # round-off (basic values are recomputed exactly by the rebuild)
    for j in range(N):
        if in_basis[j]:
            continue
        if abs(x[j] - lbf[j]) < 1e-3:
            x[j] = lbf[j]
        elif ubf[j] < INF and abs(x[j] - ubf[j]) < 1e-3:
            x[j] = ubf[j]
    T = np.empty_like(template.T)
    rc = np.empty(N)
    state = _BasisState(T, x, rc, basis.copy(), in_basis, lbf, ubf,
                        template.ycol, template.ysign, template.cvec,
                        template.b, template.Aext, pivots=0)
    if not _rebuild_state(state):
        return None
    return state


def _finish(cp, state, iters, extra_iters=0):
    x = state.x
    n = cp.num_vars
    obj = float(state.cvec[:len(x)] @ x) + cp.obj_offset
    y = -state.rc[state.ycol] * state.ysign
    dual = float(y @ state.b)
    rc = state.rc
    lo, hi = state.lbf, state.ubf
    for j in range(len(rc)):
        if rc[j] > 1e-9 and lo[j] > -INF:
            dual += rc[j] * lo[j]
        elif rc[j] < -1e-9 and hi[j] < INF:
            dual += rc[j] * hi[j]
    vals = {cp.var_names[j]: float(x[j]) for j in range(n)}
    sol = Solution(OPTIMAL, obj, vals,
                   {"iterations": iters + extra_iters,
                    "dual_bound": dual + cp.obj_offset})
    sol.state = state
    return sol


def solve_lp(cp: Counterpart, lb=None, ub=None, max_iter=None,
             piv_tol=1e-9, keep_state=False) -> Solution:
    """Solve the continuous relaxation of ``cp`` with the built-in simplex.

    ``lb``/``ub`` optionally override the variable bounds (used by branch
    and bound).  With ``keep_state`` the returned solution carries the
    final tableau for :func:`resolve_lp`.  SOC rows are rejected: use the
    LP-file export or the external adapter for conic counterparts.
    """
    if cp.has_soc():
        raise errors.UnsupportedRows(
            "built-in simplex cannot handle second-order-cone rows; "
            "export an LP file or configure an external solver")
    A, b, c, lo, hi, crash = _standard_form(cp, lb, ub)
    if np.any(lo > hi) or np.any(lo == INF) or np.any(hi == -INF):
        return Solution(INFEASIBLE)
    m, nfull = A.shape
    if max_iter is None:
        max_iter = 200 * (m + nfull) + 2000
    if m == 0:
        # rowless problem: each variable sits at its cheaper bound
        x = np.zeros(cp.num_vars)
        for j in range(cp.num_vars):
            if c[j] > 0:
                x[j] = lo[j]
            elif c[j] < 0:
                x[j] = hi[j]
            else:
                x[j] = min(max(0.0, lo[j]), hi[j])
            if not np.isfinite(x[j]):
                if c[j] != 0:
                    return Solution(UNBOUNDED)
                x[j] = 0.0
        vals = {cp.var_names[j]: float(x[j]) for j in range(cp.num_vars)}
        obj = cp.objective_value(x)
        return Solution(OPTIMAL, obj, vals,
                        {"iterations": 0, "dual_bound": obj})
    # a certified optimum is only trusted when the basic solution actually
    # satisfies the original rows; long degenerate runs can drift the
    # incremental tableau into certifying garbage, in which case a retry
    # with a different pivot tolerance takes a different path
    tol_scale = 1e-6 * (1.0 + (np.abs(b).max() if len(b) else 0.0))
    total_iters = 0
    for attempt_tol in (piv_tol, 1e-8, 1e-7):
        (status, x, y, rc, iters, T, basis, lbf, ubf,
         ycol, ysign, Aext) = _KERNEL(A, b, c, lo, hi, crash, max_iter,
                                      attempt_tol)
        total_iters += iters
        if status != _OPT:
            break
        if np.abs(Aext @ x - b).max() <= tol_scale:
            break
    iters = total_iters
    if status == _INFEAS:
        return Solution(INFEASIBLE, stats={"iterations": iters})
    if status == _UNBD:
        return Solution(UNBOUNDED, stats={"iterations": iters})
    if status == _ITER:
        raise errors.IterationLimit("simplex hit %d iterations" % max_iter)
    cvec = np.zeros(T.shape[1])
    cvec[:len(c)] = c
    in_basis = np.zeros(T.shape[1], dtype=bool)
    in_basis[basis] = True
    state = _BasisState(T, x, rc, basis, in_basis, lbf, ubf, ycol, ysign,
                        cvec, b, Aext)
    sol = _finish(cp, state, iters)
    if not keep_state:
        sol.state = None
    return sol


def resolve_lp(cp: Counterpart, state: _BasisState, lb, ub,
               max_iter=None, piv_tol=1e-9) -> Solution:
    """Re-solve after variable-bound changes, starting from ``state``.

    ``state`` is consumed (mutated in place); callers keep a copy if they
    need the parent basis again.  Falls back to a cold solve when the dual
    kernel stalls.
    """
    n = cp.num_vars
    lbf, ubf = state.lbf, state.ubf
    T, x, rc = state.T, state.x, state.rc
    changed = []
    for j in range(n):
        if lbf[j] != lb[j] or ubf[j] != ub[j]:
            changed.append(j)
            lbf[j] = lb[j]
            ubf[j] = ub[j]
    if np.any(lbf > ubf):
        return Solution(INFEASIBLE)
    # nonbasic variables pushed outside their new range move to the nearest
    # bound (reduced-cost signs stay valid for the bound they sit at)
    for j in changed:
        if state.in_basis[j]:
            continue
        newv = min(max(x[j], lbf[j]), ubf[j])
        if newv != x[j]:
            delta = newv - x[j]
            x[j] = newv
            x[state.basis] -= T[:, j] * delta
    if max_iter is None:
        max_iter = 3000
    if state.pivots >= 700:
        # the tableau has absorbed many pivots since it was last exact;
        # rebuild before adding more (best effort, see _rebuild_state)
        _rebuild_state(state)
    status, iters = _DUAL_KERNEL(T, x, rc, state.basis, state.in_basis,
                                 lbf, ubf, max_iter, piv_tol)
    state.pivots += iters
    if status == _INFEAS:
        return Solution(INFEASIBLE, stats={"iterations": iters})
    if status == _ITER:
        return solve_lp(cp, lb=lb, ub=ub, piv_tol=piv_tol, keep_state=True)
    return _finish(cp, state, iters)

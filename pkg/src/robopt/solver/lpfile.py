"""CPLEX-style LP file writer and reader.

``write_lp`` emits a byte-deterministic text image of a counterpart so that
external solvers (or a human) can consume it.  Second-order-cone rows are
lowered to quadratic constraints ``[ e0^2 + ... - r^2 ] <= 0`` over auxiliary
columns that are tied to the affine cone elements by equality rows; the cone
rhs column carries an explicit nonnegative lower bound, which together with
the quadratic row is equivalent to the original cone membership.

``read_lp`` parses the same dialect back into a :class:`Counterpart`; it is
used by the bundled external-solver tool and by round-trip tests.
"""

from __future__ import annotations

import math

from .. import errors
from .counterpart import Counterpart, CONTINUOUS, BINARY, INTEGER

INF = math.inf


def _num(v):
    if v == math.floor(v) and abs(v) < 1e15:
        return "%d" % int(v)
    return repr(v)


def _terms(coeffs, names):
    parts = []
    for j in sorted(coeffs):
        c = coeffs[j]
        sign = "-" if c < 0 else "+"
        parts.append("%s %s %s" % (sign, _num(abs(c)), names[j]))
    return parts


def _affine_str(coeffs, const, names):
    parts = _terms(coeffs, names)
    if const != 0.0 or not parts:
        parts.append("%s %s" % ("-" if const < 0 else "+", _num(abs(const))))
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def _is_plain_var(coeffs, const):
    if const == 0.0 and len(coeffs) == 1:
        (j, c), = coeffs.items()
        if c == 1.0:
            return j
    return None


def write_lp(cp: Counterpart, path=None) -> str:
    """Render ``cp`` in LP format; also write to ``path`` when given."""
    work = cp.copy()
    quad = []  # (name, elem column ids, rhs column id)
    for si, (elems, rhs, name) in enumerate(cp.soc_rows):
        ecols = []
        for k, (coeffs, const) in enumerate(elems):
            j = _is_plain_var(coeffs, const)
            if j is None:
                j = work.add_var("__soc%d_e%d" % (si, k))
                row = {j: -1.0}
                row.update({jj: row.get(jj, 0.0) + c
                            for jj, c in coeffs.items()})
                work.add_row(row, "==", -const, "__socdef%d_e%d" % (si, k))
            ecols.append(j)
        j = _is_plain_var(rhs[0], rhs[1])
        if j is None or work.lb[j] < 0.0:
            j = work.add_var("__soc%d_r" % si, lb=0.0)
            row = {j: -1.0}
            row.update({jj: row.get(jj, 0.0) + c
                        for jj, c in rhs[0].items()})
            work.add_row(row, "==", -rhs[1], "__socdef%d_r" % si)
        ecols_rhs = j
        quad.append((name, ecols, ecols_rhs))

    names = work.var_names
    out = ["\\ %s" % work.name, "Minimize"]
    obj = _affine_str(work.obj, work.obj_offset, names)
    out.append(" obj: %s" % obj)
    out.append("Subject To")
    for coeffs, sense, rhsval, name in work.rows:
        lhs = " ".join(_terms(coeffs, names))
        if lhs.startswith("+ "):
            lhs = lhs[2:]
        elif not lhs:
            lhs = "0 %s" % (names[0] if names else "x")
        op = {"<=": "<=", ">=": ">=", "==": "="}[sense]
        out.append(" %s: %s %s %s" % (name, lhs, op, _num(rhsval)))
    for name, ecols, rcol in quad:
        sq = " + ".join("%s ^2" % names[j] for j in ecols)
        out.append(" %s: [ %s - %s ^2 ] <= 0" % (name, sq, names[rcol]))
    out.append("Bounds")
    for j, name in enumerate(names):
        lo, hi = work.lb[j], work.ub[j]
        if lo == 0.0 and hi == INF:
            continue
        if lo == -INF and hi == INF:
            out.append(" %s free" % name)
        else:
            lt = "-inf" if lo == -INF else _num(lo)
            ht = "+inf" if hi == INF else _num(hi)
            out.append(" %s <= %s <= %s" % (lt, name, ht))
    bins = [names[j] for j in range(work.num_vars) if work.kind[j] == BINARY]
    gens = [names[j] for j in range(work.num_vars) if work.kind[j] == INTEGER]
    if bins:
        out.append("Binaries")
        for name in bins:
            out.append(" %s" % name)
    if gens:
        out.append("Generals")
        for name in gens:
            out.append(" %s" % name)
    out.append("End")
    text = "\n".join(out) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


# --- reader ----------------------------------------------------------------


def _tokenize(text):
    # split on whitespace but keep operators attached tokens separate
    for ch in ("<=", ">=", "=", "[", "]", "^2", ":"):
        text = text.replace(ch, " %s " % ch)
    # undo damage to "<  =" style splits produced by the '=' pass
    toks = text.split()
    merged = []
    for t in toks:
        if t == "=" and merged and merged[-1] in ("<", ">"):
            merged[-1] += "="
        else:
            merged.append(t)
    return merged


def _parse_affine(toks, i, index):
    """Parse signed linear terms starting at ``toks[i]``; returns
    (coeffs, const, next_index) stopping at a relational operator or end."""
    coeffs = {}
    const = 0.0
    sign = 1.0
    pending = None  # numeric literal waiting for a variable
    while i < len(toks):
        t = toks[i]
        if t in ("<=", ">=", "=", "]", "["):
            break
        if t == "+":
            if pending is not None:
                const += sign * pending
                pending = None
            sign = 1.0
        elif t == "-":
            if pending is not None:
                const += sign * pending
                pending = None
            sign = -1.0
        else:
            try:
                v = float(t)
            except ValueError:
                v = None
            if v is not None:
                if pending is not None:
                    const += sign * pending
                pending = v
            else:
                coef = sign * (1.0 if pending is None else pending)
                j = index.get(t)
                if j is None:
                    raise errors.ParseFailure("unknown column %r" % t)
                coeffs[j] = coeffs.get(j, 0.0) + coef
                pending = None
                sign = 1.0
        i += 1
    if pending is not None:
        const += sign * pending
    return coeffs, const, i


def read_lp(text: str) -> Counterpart:
    """Parse an LP file in the dialect produced by :func:`write_lp`."""
    lines = [ln for ln in text.splitlines()
             if ln.strip() and not ln.lstrip().startswith("\\")]
    section = None
    cp = Counterpart()
    # first pass: collect column names in order of appearance
    body = []
    for ln in lines:
        key = ln.strip().lower()
        if key in ("minimize", "maximize", "subject to", "bounds",
                   "binaries", "generals", "end", "st", "s.t."):
            section = key
            continue
        body.append((section, ln.strip()))
    order = []
    seen = set()
    for section, ln in body:
        if section in ("minimize", "subject to"):
            toks = _tokenize(ln)
            if ":" in toks:
                toks = toks[toks.index(":") + 1:]
            for t in toks:
                if t in ("+", "-", "<=", ">=", "=", "[", "]", "^2"):
                    continue
                try:
                    float(t)
                except ValueError:
                    if t not in seen:
                        seen.add(t)
                        order.append(t)
        elif section in ("bounds", "binaries", "generals"):
            for t in _tokenize(ln):
                if t in ("free", "<=", ">=", "=", "-inf", "+inf", "inf"):
                    continue
                try:
                    float(t)
                except ValueError:
                    if t not in seen:
                        seen.add(t)
                        order.append(t)
    for name in order:
        cp.add_var(name, 0.0, INF)
    sense = 1.0
    for section, ln in body:
        toks = _tokenize(ln)
        if section == "maximize":
            sense = -1.0
        if section in ("minimize", "maximize"):
            if ":" in toks:
                toks = toks[toks.index(":") + 1:]
            coeffs, const, _ = _parse_affine(toks, 0, cp.index)
            cp.set_objective({j: sense * c for j, c in coeffs.items()},
                             sense * const)
        elif section in ("subject to", "st", "s.t."):
            name = None
            if ":" in toks:
                pos = toks.index(":")
                name = "".join(toks[:pos])
                toks = toks[pos + 1:]
            if "[" in toks:
                _read_quad(cp, toks, name)
                continue
            coeffs, const, i = _parse_affine(toks, 0, cp.index)
            if i >= len(toks):
                raise errors.ParseFailure("row %r lacks a relation" % ln)
            op = toks[i]
            rhs_coeffs, rhs_const, _ = _parse_affine(toks, i + 1, cp.index)
            for j, c in rhs_coeffs.items():
                coeffs[j] = coeffs.get(j, 0.0) - c
            op = {"<=": "<=", ">=": ">=", "=": "=="}[op]
            cp.add_row(coeffs, op, rhs_const - const, name)
        elif section == "bounds":
            _read_bound(cp, toks)
        elif section == "binaries":
            for t in toks:
                j = cp.index[t]
                cp.kind[j] = BINARY
                cp.lb[j] = max(cp.lb[j], 0.0)
                cp.ub[j] = min(cp.ub[j], 1.0)
        elif section == "generals":
            for t in toks:
                cp.kind[cp.index[t]] = INTEGER
    return cp


def _read_quad(cp, toks, name):
    """Quadratic row ``[ a ^2 + b ^2 - r ^2 ] <= 0`` back to a cone row."""
    try:
        lo = toks.index("[")
        hi = toks.index("]")
    except ValueError:
        raise errors.ParseFailure("unbalanced quadratic brackets")
    inner = toks[lo + 1:hi]
    elems = []
    rhs = None
    sign = 1.0
    i = 0
    while i < len(inner):
        t = inner[i]
        if t == "+":
            sign = 1.0
        elif t == "-":
            sign = -1.0
        elif t == "^2":
            pass
        else:
            j = cp.index.get(t)
            if j is None:
                raise errors.ParseFailure("unknown column %r" % t)
            if i + 1 >= len(inner) or inner[i + 1] != "^2":
                raise errors.ParseFailure("expected ^2 after %r" % t)
            if sign < 0:
                if rhs is not None:
                    raise errors.ParseFailure(
                        "quadratic row has two negated squares")
                rhs = j
            else:
                elems.append(j)
        i += 1
    tail = toks[hi + 1:]
    if rhs is None or tail[:2] != ["<=", "0"]:
        raise errors.ParseFailure("quadratic row is not a cone constraint")
    cp.add_soc_row([({j: 1.0}, 0.0) for j in elems], ({rhs: 1.0}, 0.0), name)


def _read_bound(cp, toks):
    if len(toks) == 2 and toks[1].lower() == "free":
        j = cp.index[toks[0]]
        cp.lb[j], cp.ub[j] = -INF, INF
        return

    def val(t):
        t = t.lower()
        if t in ("-inf", "-infinity"):
            return -INF
        if t in ("+inf", "inf", "+infinity", "infinity"):
            return INF
        return float(t)

    if len(toks) == 5 and toks[1] in ("<=", ">=") and toks[3] == toks[1]:
        j = cp.index[toks[2]]
        a, b = val(toks[0]), val(toks[4])
        if toks[1] == ">=":
            a, b = b, a
        cp.lb[j], cp.ub[j] = a, b
    elif len(toks) == 3 and toks[1] in ("<=", ">=", "="):
        if toks[0] in cp.index:
            j = cp.index[toks[0]]
            v = val(toks[2])
            if toks[1] == "<=":
                cp.ub[j] = v
            elif toks[1] == ">=":
                cp.lb[j] = v
            else:
                cp.lb[j] = cp.ub[j] = v
        else:
            j = cp.index[toks[2]]
            v = val(toks[0])
            if toks[1] == "<=":
                cp.lb[j] = v
            else:
                cp.ub[j] = v
    else:
        raise errors.ParseFailure("cannot parse bound line %r" % " ".join(toks))

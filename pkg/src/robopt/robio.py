"""Text serialization of models to and from ``.rob`` files.

A ``.rob`` file is a human-readable description of a robust or stochastic
program, organized in six sections that always appear in this order::

    Objective:
    Constraints:
    Uncertainty Set:
    Decision Variables:
    Bounds:
    Uncertainties:

Emission is deterministic: two structurally identical models produce
byte-identical files (UTF-8, LF newlines), and ``parse_rob`` followed by
``write_rob`` reproduces a file byte for byte.

Grammar (EBNF; ``{x}`` repetition, ``[x]`` option, ``|`` alternative)::

    file        = [comment] objective constraints uncset decvars bounds uncs ;
    comment     = "\\" text NEWLINE ;
    objective   = "Objective:" NEWLINE "min" ("max" | "E") terms NEWLINE ;
    constraints = "Constraints:" NEWLINE {conline} ;
    uncset      = "Uncertainty Set:" NEWLINE {conline} ;
    conline     = label ":" terms [normterm] rel signednum NEWLINE ;
    normterm    = "+ norm(" terms {"," terms} ")" ;
    rel         = "<=" | ">=" | "==" ;
    terms       = {signednum [ident [ident]]} ;
    decvars     = "Decision Variables:" NEWLINE {varline} ;
    varline     = ident ":" kind "," adapt "," integer "," meas NEWLINE ;
    kind        = "Boolean" | "Real" | "Integer" ;
    adapt       = "Static" | "Adaptive" ;
    meas        = "Non-Measurement" | "Measurement" "," ident ;
    bounds      = "Bounds:" NEWLINE {boundline} ;
    boundline   = (signednum "<=" ident "<=" signednum
                  | ident "<=" signednum | ident ">=" signednum) NEWLINE ;
    uncs        = "Uncertainties:" NEWLINE {uncline} ;
    uncline     = ident ":" obs "," integer "," ddu NEWLINE ;
    obs         = "Observable" | "Not Observable" ;
    ddu         = "Non-DDU" | "DDU" "," integer "," integer ;
    ident       = letter | "_" , {letter | digit | "_"} ;
    signednum   = ("+" | "-") number ;   (* fixed or scientific notation *)

A term is a signed coefficient followed by zero, one, or two identifiers:
a constant, a linear term in one symbol, or a decision-times-uncertainty
product (``-1 Keep_1_1 Value_1``).  Norm terms are an extension beyond
plain linear rows and are flagged by a leading comment in the file.

The observation-cost bookkeeping attached to measurement variables is
folded into the objective on write and is not represented separately in
the format; parsing yields a model whose explicit objective equals the
original's full objective.
"""

from __future__ import annotations

import io
import re

from . import errors
from .model import (BINARY, INTEGER, REAL, ROBUST, STOCHASTIC, Constraint,
                    LinearExpr, Model, format_num)

_KIND_OUT = {BINARY: "Boolean", REAL: "Real", INTEGER: "Integer"}
_KIND_IN = {v: k for k, v in _KIND_OUT.items()}

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_NUM = re.compile(r"[+-](?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?\Z")


def _signed(x):
    return ("+" if x >= 0 else "-") + format_num(abs(x))


def _drop_zeros(expr):
    """Copy of ``expr`` without zero-coefficient terms (emission normal
    form: parsing never recreates them)."""
    out = expr.copy()
    out.dec = {v: c for v, c in out.dec.items() if c != 0.0}
    out.unc = {u: c for u, c in out.unc.items() if c != 0.0}
    out.prod = {k: c for k, c in out.prod.items() if c != 0.0}
    return out


def _emit_terms(expr, include_const=True):
    """Like :func:`robopt.model.format_terms` but with product terms first,
    matching the conventional objective layout."""
    parts = []
    for (v, u), c in expr.prod.items():
        parts.append("%s %s %s" % (_signed(c), v.name, u.name))
    for v, c in expr.dec.items():
        parts.append("%s %s" % (_signed(c), v.name))
    for u, c in expr.unc.items():
        parts.append("%s %s" % (_signed(c), u.name))
    if expr.norm is not None:
        inner = " , ".join(_emit_terms(e) for e in expr.norm)
        parts.append("+ norm( %s )" % inner)
    if include_const and (expr.const != 0.0 or not parts):
        parts.append(_signed(expr.const))
    return " ".join(parts)


def _render_constraint(con, idx):
    expr = _drop_zeros(con.expr)
    body = _emit_terms(expr, include_const=False)
    if not body:
        body = "+0"
    return "c%d: %s %s %s" % (idx, body, con.sense, _signed(-expr.const))


def write_rob(model: Model, path) -> None:
    """Serialize ``model`` to ``path`` (a file name or text stream)."""
    out = io.StringIO()
    has_norm = any(c.expr.norm is not None
                   for c in model.constraints + model.uncset_constraints)
    if has_norm:
        out.write("\\ extension: norm terms\n")

    out.write("Objective:\n")
    keyword = "max" if model.sense == ROBUST else "E"
    full = _drop_zeros(model.full_objective())
    obj = _emit_terms(full, include_const=False)
    if full.const != 0.0 or not obj:
        obj = (obj + " " if obj else "") + _signed(full.const)
    out.write("min %s %s\n" % (keyword, obj))

    out.write("Constraints:\n")
    for i, con in enumerate(model.constraints):
        out.write(_render_constraint(con, i) + "\n")
    out.write("Uncertainty Set:\n")
    for i, con in enumerate(model.uncset_constraints):
        out.write(_render_constraint(con, i) + "\n")

    out.write("Decision Variables:\n")
    for v in model.vars.values():
        meas = ("Measurement, %s" % v.measured_uncertainty.name
                if v.is_measurement else "Non-Measurement")
        out.write("%s: %s, %s, %d, %s\n"
                  % (v.name, _KIND_OUT[v.kind],
                     "Adaptive" if v.adaptive else "Static", v.stage, meas))

    out.write("Bounds:\n")
    inf = float("inf")
    for v in model.vars.values():
        if v.lb == -inf and v.ub == inf:
            continue
        if v.lb == -inf:
            out.write("%s <= %s\n" % (v.name, format_num(v.ub)))
        elif v.ub == inf:
            out.write("%s >= %s\n" % (v.name, format_num(v.lb)))
        else:
            out.write("%s <= %s <= %s"
                      % (format_num(v.lb), v.name, format_num(v.ub)) + "\n")

    out.write("Uncertainties:\n")
    for u in model.uncs.values():
        obs = "Observable" if u.observable else "Not Observable"
        if u.is_ddu:
            tail = "DDU, %d, %d" % u.ddu_window
        else:
            tail = "Non-DDU"
        out.write("%s: %s, %d, %s\n" % (u.name, obs, u.stage, tail))

    text = out.getvalue()
    if hasattr(path, "write"):
        path.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


# --- parsing ---------------------------------------------------------------

_SECTIONS = ("Objective", "Constraints", "Uncertainty Set",
             "Decision Variables", "Bounds", "Uncertainties")


def _split_sections(lines):
    """Map section name -> list of (lineno, text) body lines."""
    sections = {}
    current = None
    for no, raw in enumerate(lines, 1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("\\"):
            continue
        if line.rstrip().endswith(":") and ":" not in line.rstrip()[:-1]:
            name = line.rstrip()[:-1].strip()
            if name not in _SECTIONS:
                raise errors.UnknownSection(
                    "line %d: unknown section %r" % (no, name))
            current = sections.setdefault(name, [])
            continue
        if current is None:
            raise errors.RobSyntaxError("text before first section", line=no)
        current.append((no, line.strip()))
    for name in _SECTIONS:
        sections.setdefault(name, [])
    return sections


def _parse_terms(tokens, pos, symbols, lineno, stop=()):
    """Parse signed terms until a stop token; returns (LinearExpr, next pos)."""
    expr = LinearExpr()
    while pos < len(tokens) and tokens[pos] not in stop:
        tok = tokens[pos]
        if not _NUM.match(tok):
            raise errors.RobSyntaxError(
                "bad token %r" % tok, line=lineno, column=pos + 1,
                expected="signed coefficient")
        coef = float(tok)
        pos += 1
        names = []
        while (pos < len(tokens) and tokens[pos] not in stop
               and _IDENT.match(tokens[pos]) and len(names) < 2):
            names.append(tokens[pos])
            pos += 1
        term = LinearExpr.wrap(coef)
        for name in names:
            if name not in symbols:
                raise errors.DanglingReference(
                    "line %d: undeclared symbol %r" % (lineno, name))
            term = term * symbols[name]
        expr = expr + term
    return expr, pos


def _parse_norm(tokens, pos, symbols, lineno):
    """Parse ``norm( terms , terms ... )`` starting at the 'norm(' token."""
    pos += 1  # past "norm("
    parts = []
    while True:
        inner, pos = _parse_terms(tokens, pos, symbols, lineno,
                                  stop=(",", ")"))
        parts.append(inner)
        if pos >= len(tokens):
            raise errors.RobSyntaxError("unterminated norm", line=lineno,
                                        expected="')'")
        if tokens[pos] == ")":
            return parts, pos + 1
        pos += 1  # past ","


def _parse_constraint_line(lineno, line, symbols):
    head, sep, body = line.partition(":")
    if not sep or not _IDENT.match(head.strip()):
        raise errors.RobSyntaxError("missing constraint label", line=lineno,
                                    expected="'cN:'")
    tokens = body.replace("<=", " <= ").replace(">=", " >= ").replace(
        "==", " == ").replace(",", " , ").replace(")", " ) ").split()
    # accept "norm (" as well as the canonical "norm("
    merged = []
    for tok in tokens:
        if merged and merged[-1] == "norm" and tok == "(":
            merged[-1] = "norm("
        else:
            merged.append(tok)
    tokens = merged
    norm_parts = None
    if "norm(" in tokens:
        at = tokens.index("norm(")
        if at == 0 or tokens[at - 1] not in ("+", "+1"):
            raise errors.RobSyntaxError("norm must enter with +1 weight",
                                        line=lineno)
        norm_parts, after = _parse_norm(tokens, at, symbols, lineno)
        tokens = tokens[:at - 1] + tokens[after:]
    expr, pos = _parse_terms(tokens, 0, symbols, lineno,
                             stop=("<=", ">=", "=="))
    if pos >= len(tokens):
        raise errors.RobSyntaxError("missing relation", line=lineno,
                                    expected="<=, >= or ==")
    sense = tokens[pos]
    rhs, pos = _parse_terms(tokens, pos + 1, symbols, lineno)
    if pos != len(tokens):
        raise errors.RobSyntaxError("trailing tokens", line=lineno)
    if norm_parts is not None:
        expr = expr + LinearExpr(norm=norm_parts)
    return Constraint(expr, sense, rhs)


def parse_rob(path) -> Model:
    """Read a ``.rob`` file back into a :class:`Model`."""
    if hasattr(path, "read"):
        lines = path.read().splitlines()
    else:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    sections = _split_sections(lines)

    if not sections["Objective"]:
        raise errors.RobSyntaxError("empty Objective section",
                                    expected="'min max' or 'min E'")
    obj_no, obj_line = sections["Objective"][0]
    tokens = obj_line.split()
    if len(tokens) < 2 or tokens[0] != "min" or tokens[1] not in ("max", "E"):
        raise errors.RobSyntaxError("bad objective header", line=obj_no,
                                    expected="'min max' or 'min E'")
    sense = ROBUST if tokens[1] == "max" else STOCHASTIC

    # Horizon: the largest stage mentioned anywhere (floor 1).
    horizon = 1
    staged = []
    for no, line in sections["Decision Variables"]:
        staged.append(int(line.split(",")[2]))
    for no, line in sections["Uncertainties"]:
        fields = [f.strip() for f in line.partition(":")[2].split(",")]
        staged.append(int(fields[1]))
        if len(fields) >= 5:
            staged.append(int(fields[4]))
    if staged:
        horizon = max(max(staged), 1)

    m = Model(horizon, sense)
    symbols = {}

    for no, line in sections["Uncertainties"]:
        name, sep, rest = line.partition(":")
        name = name.strip()
        fields = [f.strip() for f in rest.split(",")]
        if not sep or len(fields) < 3:
            raise errors.RobSyntaxError("bad uncertainty line", line=no,
                                        expected="name: obs, stage, ddu")
        if fields[0] not in ("Observable", "Not Observable"):
            raise errors.RobSyntaxError("bad observability %r" % fields[0],
                                        line=no,
                                        expected="Observable|Not Observable")
        u = m.add_uncertainty(name, stage=int(fields[1]),
                              observable=fields[0] == "Observable")
        if fields[2] == "DDU":
            if len(fields) != 5:
                raise errors.RobSyntaxError("bad DDU window", line=no,
                                            expected="DDU, first, last")
            u.ddu_window = (int(fields[3]), int(fields[4]))
        elif fields[2] != "Non-DDU":
            raise errors.RobSyntaxError("bad DDU flag %r" % fields[2],
                                        line=no, expected="DDU|Non-DDU")
        symbols[name] = u

    bounds = {}
    for no, line in sections["Bounds"]:
        toks = line.replace("<=", " <= ").replace(">=", " >= ").split()
        try:
            if len(toks) == 5 and toks[1] == "<=" and toks[3] == "<=":
                bounds[toks[2]] = (float(toks[0]), float(toks[4]))
            elif len(toks) == 3 and toks[1] == "<=":
                bounds[toks[0]] = (-float("inf"), float(toks[2]))
            elif len(toks) == 3 and toks[1] == ">=":
                bounds[toks[0]] = (float(toks[2]), float("inf"))
            else:
                raise ValueError
        except ValueError:
            raise errors.RobSyntaxError("bad bounds line", line=no,
                                        expected="lb <= name <= ub")

    meas_links = []
    for no, line in sections["Decision Variables"]:
        name, sep, rest = line.partition(":")
        name = name.strip()
        fields = [f.strip() for f in rest.split(",")]
        if not sep or len(fields) < 4:
            raise errors.RobSyntaxError(
                "bad variable line", line=no,
                expected="name: kind, adaptivity, stage, measurement")
        if fields[0] not in _KIND_IN:
            raise errors.RobSyntaxError("unknown kind %r" % fields[0],
                                        line=no, expected="Boolean|Real|Integer")
        if fields[1] not in ("Static", "Adaptive"):
            raise errors.RobSyntaxError("bad adaptivity %r" % fields[1],
                                        line=no, expected="Static|Adaptive")
        lb, ub = bounds.get(name, (None, None))
        v = m.add_variable(name, kind=_KIND_IN[fields[0]],
                           adaptive=fields[1] == "Adaptive",
                           stage=int(fields[2]), lb=lb, ub=ub)
        if fields[3] == "Measurement":
            if len(fields) != 5:
                raise errors.RobSyntaxError("missing measured uncertainty",
                                            line=no)
            if fields[4] not in m.uncs:
                raise errors.DanglingReference(
                    "line %d: measurement of undeclared %r" % (no, fields[4]))
            meas_links.append((m.uncs[fields[4]], int(fields[2]), v))
        elif fields[3] != "Non-Measurement":
            raise errors.RobSyntaxError("bad measurement flag %r" % fields[3],
                                        line=no,
                                        expected="Measurement|Non-Measurement")
        symbols[name] = v
    for unc, stage, v in meas_links:
        m._register_measurement(unc, stage, v)
    for name in bounds:
        if name not in m.vars:
            raise errors.DanglingReference(
                "bounds given for undeclared variable %r" % name)

    obj_expr, pos = _parse_terms(obj_line.split(), 2, symbols, obj_no)
    m.set_objective(obj_expr)
    for no, line in sections["Constraints"]:
        m.add_constraint(_parse_constraint_line(no, line, symbols))
    for no, line in sections["Uncertainty Set"]:
        m.add_constraint_uncset(_parse_constraint_line(no, line, symbols))
    return m

"""Run an external LP/MILP solver executable on an exported LP file.

The command template must contain ``{lp}`` and ``{sol}`` placeholders, e.g.::

    robopt-extsolve {lp} {sol}
    mysolver --in {lp} --out {sol}

The solution file grammar is plain text, one entry per line::

    status optimal|infeasible|unbounded
    objective <float>
    <column name> <float>

Unknown columns are ignored; missing columns default to zero.  A missing
``status`` line with an ``objective`` present is treated as optimal.
"""

from __future__ import annotations

import math
import shlex
import subprocess
import tempfile
from pathlib import Path

from .. import errors
from .counterpart import (Counterpart, Solution, OPTIMAL, INFEASIBLE,
                          UNBOUNDED)
from .lpfile import write_lp

STATUSES = {OPTIMAL, INFEASIBLE, UNBOUNDED}


def parse_solution_file(text: str, cp: Counterpart) -> Solution:
    status = None
    objective = math.nan
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise errors.ParseFailure(
                "solution line %d: expected 'name value', got %r"
                % (lineno, raw))
        key, val = parts
        if key == "status":
            if val not in STATUSES:
                raise errors.ParseFailure(
                    "solution line %d: unknown status %r" % (lineno, val))
            status = val
            continue
        try:
            num = float(val)
        except ValueError:
            raise errors.ParseFailure(
                "solution line %d: bad number %r" % (lineno, val))
        if key == "objective":
            objective = num
        else:
            values[key] = num
    if status is None:
        status = OPTIMAL if not math.isnan(objective) else INFEASIBLE
    if status != OPTIMAL:
        return Solution(status)
    vals = {name: values.get(name, 0.0) for name in cp.var_names}
    if math.isnan(objective):
        objective = cp.objective_value(
            [vals[name] for name in cp.var_names])
    return Solution(status, objective, vals)


def solve_via_executable(cp: Counterpart, command: str, timeout=None,
                         keep_files=False) -> Solution:
    """Export ``cp``, run ``command`` on it, parse the solution back."""
    if "{lp}" not in command or "{sol}" not in command:
        raise ValueError("command template needs {lp} and {sol} placeholders")
    tmp = tempfile.mkdtemp(prefix="robopt_")
    lp_path = Path(tmp) / "problem.lp"
    sol_path = Path(tmp) / "solution.txt"
    write_lp(cp, lp_path)
    argv = [a.replace("{lp}", str(lp_path)).replace("{sol}", str(sol_path))
            for a in shlex.split(command)]
    try:
        proc = subprocess.run(argv, capture_output=True, text=True,
                              timeout=timeout)
    except subprocess.TimeoutExpired:
        raise errors.ProcessFailure(
            "external solver timed out after %s s" % timeout)
    except OSError as exc:
        raise errors.ProcessFailure("cannot run %r: %s" % (argv[0], exc))
    if proc.returncode != 0:
        raise errors.ProcessFailure(
            "external solver exited %d: %s"
            % (proc.returncode, (proc.stderr or proc.stdout).strip()[:500]))
    if not sol_path.exists():
        raise errors.ProcessFailure(
            "external solver wrote no solution file %s" % sol_path)
    sol = parse_solution_file(sol_path.read_text(), cp)
    if not keep_files:
        for p in (lp_path, sol_path):
            try:
                p.unlink()
            except OSError:
                pass
        try:
            Path(tmp).rmdir()
        except OSError:
            pass
    else:
        sol.stats["lp_file"] = str(lp_path)
        sol.stats["sol_file"] = str(sol_path)
    return sol

"""Built-in LP/MILP solver, LP file I/O, and external-solver adapter."""

from .counterpart import (Counterpart, Solution, CONTINUOUS, BINARY, INTEGER,
                          OPTIMAL, INFEASIBLE, UNBOUNDED, LIMIT)
from .simplex import solve_lp, KERNEL_FLAVOR, kernel_variants
from .branch_bound import solve_milp
from .lpfile import write_lp, read_lp
from .external import solve_via_executable, parse_solution_file

__all__ = [
    "Counterpart", "Solution", "CONTINUOUS", "BINARY", "INTEGER",
    "OPTIMAL", "INFEASIBLE", "UNBOUNDED", "LIMIT",
    "solve_lp", "solve_milp", "KERNEL_FLAVOR", "kernel_variants",
    "write_lp", "read_lp", "solve_via_executable", "parse_solution_file",
]

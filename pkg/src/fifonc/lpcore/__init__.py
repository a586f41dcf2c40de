"""Linear programming layer: model, embedded solvers, LP files, external bridge."""
from .model import INF, LinearProgram, LPError, Row, SolveOutcome
from .solve import ENV_SOLVER, highs_solve, solve
from .simplex import simplex_solve
from .lpformat import export_lp_text, parse_lp_text
from .external import parse_solver_output, solve_external

__all__ = ["INF", "LinearProgram", "LPError", "Row", "SolveOutcome", "ENV_SOLVER",
           "highs_solve", "solve", "simplex_solve", "export_lp_text", "parse_lp_text",
           "parse_solver_output", "solve_external"]

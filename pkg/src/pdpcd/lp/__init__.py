from .simplex import (INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED, Basis,
                      DualSimplex, LpSolution, solve_lp)

__all__ = ["Basis", "DualSimplex", "LpSolution", "solve_lp",
           "OPTIMAL", "INFEASIBLE", "UNBOUNDED", "ITERATION_LIMIT"]

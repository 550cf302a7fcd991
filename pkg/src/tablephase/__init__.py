"""Contingency-table fibers, Markov-move samplers and the geometric-tilting MLE.

The hot loops (fiber backtracking, the Metropolis-Hastings walk) are compiled
with numba when available; set ``TABLEPHASE_DISABLE_NUMBA=1`` to run the
pure-Python versions instead.
"""
from importlib.metadata import PackageNotFoundError, version as _version

from .errors import (BudgetExceeded, DomainError, EmptyFiber, Infeasible, InvalidInput,
                     MismatchedTotals, NegativeEntry, NotConverged, TablePhaseError, ZeroMargin)
from .fiber import (Fiber, FiberDistribution, Target, conditional_poisson_oracle,
                    connectivity_check, count_fiber, enumerate_fiber, fiber_weights,
                    geometric_conditional)
from .moves import (Move, MoveSet, apply_move, basic_moves_2way, count_applicable_at_corner,
                    count_moves_2way, count_moves_3way, independence_moves, markov_basis_3way,
                    plane_moves_3way)
from .phase import (RunManifest, ScanRow, fiber_experiment, scan_2way, scan_3way,
                    theorem_limits_3way)
from .sampler import (ChainConfig, ChainStats, detailed_balance_gap,
                      divergence_uniform_vs_hypergeometric, mh_step, run_chain, tv_distance)
from .tables import MarginSpec, RealTable, Table, all_margins, northwest_corner, plane_margins
from .tilt import (BC_3WAY, BarvinokSolution, Regime, SolveReport, Tilting, barvinok_solve,
                   expected_table, log_likelihood, psi, psi_double, psi_prime, solve_mle,
                   typical_table_2way)

try:
    __version__ = _version("artifact")
except PackageNotFoundError:  # pragma: no cover - running from a source tree
    __version__ = "0.1.0"

__all__ = [
    "BC_3WAY", "BarvinokSolution", "BudgetExceeded", "ChainConfig", "ChainStats",
    "DomainError", "EmptyFiber", "Fiber", "FiberDistribution", "Infeasible", "InvalidInput",
    "MarginSpec", "MismatchedTotals", "Move", "MoveSet", "NegativeEntry", "NotConverged",
    "RealTable", "Regime", "RunManifest", "ScanRow", "SolveReport", "Table", "TablePhaseError",
    "Target", "Tilting", "ZeroMargin", "all_margins", "apply_move", "barvinok_solve",
    "basic_moves_2way", "conditional_poisson_oracle", "connectivity_check",
    "count_applicable_at_corner", "count_fiber", "count_moves_2way", "count_moves_3way",
    "detailed_balance_gap", "divergence_uniform_vs_hypergeometric", "enumerate_fiber",
    "expected_table", "fiber_experiment", "fiber_weights", "geometric_conditional",
    "independence_moves", "log_likelihood", "markov_basis_3way", "mh_step", "northwest_corner",
    "plane_margins", "plane_moves_3way", "psi", "psi_double", "psi_prime", "run_chain",
    "scan_2way", "scan_3way", "solve_mle", "theorem_limits_3way", "tv_distance",
    "typical_table_2way",
]

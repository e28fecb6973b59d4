"""Sparse solver for piecewise linear systems min{0,x} + T max{0,x} = b
and x + T max{0,x} = b, with finite-difference obstacle-problem
benchmarks built on top.

Set PLSKIT_NUMPY=1 to force the pure-numpy kernels instead of the
compiled ones.
"""

from ._kernels import BACKEND
from .krylov import (
    JACOBI,
    Breakdown,
    KrylovOptions,
    KrylovStats,
    NotConverged,
    qmr_solve,
)
from .matprops import (
    MatrixClassReport,
    Solvability,
    check_t1,
    check_t2,
    classify_solvability,
)
from .numkit import (
    ELLIPTIC,
    PARABOLIC,
    DimensionError,
    MaskedOperator,
    SparseMatrix,
    csr_from_triplets,
    load_matrix_market,
    masked_matvec,
    spmv,
)
from .obstacle import (
    GridError,
    ObstacleSpec,
    assemble_elliptic,
    coincidence_set,
    default_solver_options,
    problem_spec,
    run_parabolic,
    solve_obstacle,
    write_solution_csv,
)
from .oracle import Family, OracleResult, TooLarge, enumerate_solutions, w_matrix
from .pls import (
    CONVERGED,
    MAX_OUTER_EXCEEDED,
    NO_SOLUTION_CERTIFIED,
    ActiveMask,
    CheckReport,
    IterationReport,
    PlsProblem,
    PlsSolution,
    SolverOptions,
    active_mask,
    lcp_check,
    residual_nonsmooth,
    solve_elliptic_pls,
    solve_parabolic_pls,
    solve_shifted,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Breakdown",
    "JACOBI",
    "KrylovOptions",
    "KrylovStats",
    "NotConverged",
    "qmr_solve",
    "MatrixClassReport",
    "Solvability",
    "check_t1",
    "check_t2",
    "classify_solvability",
    "ELLIPTIC",
    "PARABOLIC",
    "DimensionError",
    "MaskedOperator",
    "SparseMatrix",
    "csr_from_triplets",
    "load_matrix_market",
    "masked_matvec",
    "spmv",
    "GridError",
    "ObstacleSpec",
    "assemble_elliptic",
    "coincidence_set",
    "default_solver_options",
    "problem_spec",
    "run_parabolic",
    "solve_obstacle",
    "write_solution_csv",
    "Family",
    "OracleResult",
    "TooLarge",
    "enumerate_solutions",
    "w_matrix",
    "CONVERGED",
    "MAX_OUTER_EXCEEDED",
    "NO_SOLUTION_CERTIFIED",
    "ActiveMask",
    "CheckReport",
    "IterationReport",
    "PlsProblem",
    "PlsSolution",
    "SolverOptions",
    "active_mask",
    "lcp_check",
    "residual_nonsmooth",
    "solve_elliptic_pls",
    "solve_parabolic_pls",
    "solve_shifted",
    "__version__",
]

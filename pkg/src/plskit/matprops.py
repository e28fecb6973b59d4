"""Hypothesis checks on the system matrix and solvability classification.

Two matrix classes matter to the solver: nonsingular irreducible M-matrices
("t1") and singular irreducible matrices with one-dimensional strictly
positive left/right null spaces whose diagonal perturbations are M-matrices
("t2"). Verdicts are three-valued; Inconclusive is reported honestly when
the numerics cannot separate the cases.
"""

from collections import deque
from dataclasses import dataclass

import numpy as np

from .numkit import DimensionError, SparseMatrix, as_vector, spmv
from .krylov import Breakdown, JACOBI, KrylovOptions, NotConverged, qmr_solve

PROVEN = "Proven"
DISPROVEN = "Disproven"
INCONCLUSIVE = "Inconclusive"

UNIQUE = "Unique"
FAMILY_ALONG_W = "FamilyAlongW"
NO_SOLUTION = "NoSolution"

_DENSE_SOLVE_LIMIT = 1024  # dense inverse iteration below this dimension
_SEPARATION = 1e-10  # relative spectral gap needed for a t1 verdict


class InvalidNullVector(ValueError):
    """A null vector that must be strictly positive is not."""


@dataclass
class MatrixClassReport:
    is_z_matrix: bool
    is_irreducible: bool
    t1_verdict: str | None = None
    t2_verdict: str | None = None
    left_null: np.ndarray | None = None
    right_null: np.ndarray | None = None
    alpha: float | None = None
    spectral_radius_estimate: float | None = None
    notes: tuple = ()


@dataclass
class Solvability:
    verdict: str
    vtb: float


def _require_square(matrix):
    if matrix.n_rows != matrix.n_cols:
        raise DimensionError(f"matrix is {matrix.shape}, expected square")


def _off_diagonal_sign_ok(matrix):
    rows = np.repeat(
        np.arange(matrix.n_rows), np.diff(matrix.row_offsets)
    )
    off = rows != matrix.col_indices
    return bool(np.all(matrix.values[off] <= 0.0))


def _is_connected(matrix):
    """Connectivity of the symmetrized sparsity pattern."""
    n = matrix.n_rows
    if n == 0:
        return True
    t = matrix.transpose()
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for mat in (matrix, t):
            lo, hi = mat.row_offsets[i], mat.row_offsets[i + 1]
            for j in mat.col_indices[lo:hi]:
                if not seen[j]:
                    seen[j] = True
                    queue.append(j)
    return bool(seen.all())


def _shifted_power_bounds(matrix, alpha, max_iters):
    """Collatz-Wielandt bounds for rho(alpha I - T) via B' = 2 alpha I - T.

    Returns (lower, upper, w_estimate); the shift makes the nonnegative
    iteration matrix aperiodic so the bounds close for irreducible patterns.
    """
    n = matrix.n_rows
    w = np.ones(n)
    lower, upper = 0.0, np.inf
    for _ in range(max_iters):
        bw = 2.0 * alpha * w - spmv(matrix, w)
        if np.any(w <= 0.0) or np.any(bw <= 0.0):
            w = np.abs(bw)
            w /= w.max()
            continue
        ratios = bw / w
        lower, upper = float(ratios.min()), float(ratios.max())
        w = bw / bw.max()
        if upper - lower <= _SEPARATION * alpha * 0.1:
            break
    return lower - alpha, upper - alpha, w


def check_t1(matrix):
    """Decide whether T is an irreducible nonsingular M-matrix.

    The cheap certificate (irreducibly diagonally dominant Z-matrix) is
    tried first; otherwise power iteration brackets rho(alpha I - T)
    against alpha = max diagonal entry.
    """
    _require_square(matrix)
    notes = []
    is_z = _off_diagonal_sign_ok(matrix)
    irreducible = _is_connected(matrix)
    diag = matrix.diagonal()
    report = MatrixClassReport(is_z_matrix=is_z, is_irreducible=irreducible)
    if not is_z:
        report.t1_verdict = DISPROVEN
        report.notes = ("positive off-diagonal entry",)
        return report
    if not irreducible:
        report.t1_verdict = DISPROVEN
        report.notes = ("sparsity pattern is not connected",)
        return report
    if matrix.n_rows == 0 or diag.min() <= 0.0:
        report.t1_verdict = DISPROVEN
        report.notes = ("nonpositive diagonal entry",)
        return report
    alpha = float(diag.max())
    report.alpha = alpha

    row_sums = spmv(matrix, np.ones(matrix.n_cols))
    if np.all(row_sums >= 0.0) and np.any(row_sums > 0.0):
        report.t1_verdict = PROVEN
        report.notes = ("irreducibly diagonally dominant",)
        # short power run just to report an estimate; the lower Collatz
        # bound sits below rho(B), which dominance already puts below alpha
        lower, _, _ = _shifted_power_bounds(matrix, alpha, max_iters=50)
        report.spectral_radius_estimate = max(lower, 0.0)
        return report

    lower, upper, w = _shifted_power_bounds(
        matrix, alpha, max_iters=500 + 2 * matrix.n_rows
    )
    report.spectral_radius_estimate = upper
    tnorm = matrix.norm_inf()
    null_resid = float(np.abs(spmv(matrix, w)).max())
    if null_resid <= 1e-12 * tnorm * float(np.abs(w).max()):
        report.t1_verdict = DISPROVEN
        notes.append("singular: positive vector found in the null space")
    elif upper <= alpha * (1.0 - _SEPARATION):
        report.t1_verdict = PROVEN
    elif lower >= alpha * (1.0 + _SEPARATION):
        report.t1_verdict = DISPROVEN
        notes.append("spectral radius exceeds the diagonal bound")
    else:
        report.t1_verdict = INCONCLUSIVE
        notes.append("power iteration could not separate rho from alpha")
    report.notes = tuple(notes)
    return report


def _shifted_solve(matrix, sigma, rhs):
    n = matrix.n_rows
    if n <= _DENSE_SOLVE_LIMIT:
        return np.linalg.solve(matrix.to_dense() + sigma * np.eye(n), rhs)
    shifted = matrix.add_diagonal(sigma)
    opts = KrylovOptions(rel_tol=1e-6, max_iters=40 * n, preconditioner=JACOBI)
    x, _ = qmr_solve(shifted, rhs, x0=None, opts=opts)
    return x


def _inverse_iteration(matrix, sigma, start, deflate=None, sweeps=2):
    z = start / np.abs(start).max()
    for _ in range(sweeps):
        if deflate is not None:
            z = z - (deflate @ z) / (deflate @ deflate) * deflate
        z = _shifted_solve(matrix, sigma, z)
        z = z / np.abs(z).max()
    if deflate is not None:
        z = z - (deflate @ z) / (deflate @ deflate) * deflate
        peak = np.abs(z).max()
        if peak > 0.0:
            z = z / peak
    if z[np.argmax(np.abs(z))] < 0.0:
        z = -z
    return z


def check_t2(matrix):
    """Decide whether T is singular irreducible with positive 1-d null spaces.

    Null vectors come from inverse iteration on T + sigma I with
    sigma = 1e-8 ||T||_inf and are normalized to max entry 1. Proven also
    requires that a single diagonal bump turns T into a t1 matrix.
    """
    _require_square(matrix)
    n = matrix.n_rows
    is_z = _off_diagonal_sign_ok(matrix)
    irreducible = _is_connected(matrix)
    report = MatrixClassReport(is_z_matrix=is_z, is_irreducible=irreducible)
    if not is_z or not irreducible or n == 0:
        report.t2_verdict = DISPROVEN
        report.notes = ("needs an irreducible Z-pattern",)
        return report
    tnorm = matrix.norm_inf()
    if tnorm == 0.0:
        report.t2_verdict = DISPROVEN
        report.notes = ("zero matrix",)
        return report
    sigma = 1e-8 * tnorm
    transpose = matrix.transpose()
    try:
        w = _inverse_iteration(matrix, sigma, np.ones(n))
        v = _inverse_iteration(transpose, sigma, np.ones(n))
    except (NotConverged, Breakdown, np.linalg.LinAlgError):
        report.t2_verdict = INCONCLUSIVE
        report.notes = ("shifted solve for the null vectors failed",)
        return report
    report.right_null = w
    report.left_null = v

    notes = []
    resid_w = float(np.abs(spmv(matrix, w)).max())
    resid_v = float(np.abs(spmv(transpose, v)).max())
    worst = max(resid_w, resid_v)
    if worst > 1e-4 * tnorm:
        report.t2_verdict = DISPROVEN
        report.notes = ("no null space found; matrix appears nonsingular",)
        return report
    if worst > 1e-10 * tnorm:
        report.t2_verdict = INCONCLUSIVE
        report.notes = ("null-space residual between the decision thresholds",)
        return report
    if w.min() <= 0.0 or v.min() <= 0.0:
        if min(w.min(), v.min()) <= -1e-8:
            report.t2_verdict = DISPROVEN
            report.notes = ("null vector is not strictly positive",)
        else:
            report.t2_verdict = INCONCLUSIVE
            report.notes = ("null vector positivity is borderline",)
        return report

    rng = np.random.default_rng(0)
    probe = _inverse_iteration(matrix, sigma, rng.standard_normal(n), deflate=w)
    if float(np.abs(spmv(matrix, probe)).max()) <= 1e-8 * tnorm:
        report.t2_verdict = DISPROVEN
        report.notes = ("null space is not one-dimensional",)
        return report

    bump = np.zeros(n)
    bump[0] = tnorm
    bumped = check_t1(matrix.add_diagonal(bump))
    if bumped.t1_verdict == DISPROVEN:
        report.t2_verdict = DISPROVEN
        report.notes = ("diagonal bump does not yield an M-matrix",)
        return report
    if bumped.t1_verdict == INCONCLUSIVE:
        report.t2_verdict = INCONCLUSIVE
        report.notes = ("diagonal bump check inconclusive",)
        return report
    notes.append("diagonal perturbations tested by a single bump, not proven for all")
    report.t2_verdict = PROVEN
    report.notes = tuple(notes)
    return report


def classify_solvability(v, b, class_tol=None):
    """Classify a singular system by the sign of v^T b.

    Negative means a unique solution, zero (within class_tol) a family
    along the right null vector, positive no solution. The default
    class_tol is 1e-10 ||v||_2 ||b||_2.
    """
    v = as_vector(v)
    b = as_vector(b)
    if v.shape != b.shape:
        raise DimensionError("null vector and right-hand side differ in length")
    if v.size == 0 or v.min() <= 0.0:
        raise InvalidNullVector("left null vector must be strictly positive")
    vtb = float(v @ b)
    tol = (
        class_tol
        if class_tol is not None
        else 1e-10 * float(np.linalg.norm(v)) * float(np.linalg.norm(b))
    )
    if vtb < -tol:
        return Solvability(UNIQUE, vtb)
    if vtb > tol:
        return Solvability(NO_SOLUTION, vtb)
    return Solvability(FAMILY_ALONG_W, vtb)

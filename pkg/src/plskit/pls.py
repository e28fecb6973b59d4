"""Solvers for piecewise linear systems of the two benchmark forms.

Elliptic: min{0,x} + T max{0,x} = b, iterated as (I - P + T P) x = b.
Parabolic: x + T max{0,x} = b, iterated as (I + T P) x = b.

The active mask P starts empty and is rebuilt from the signs of each
iterate; with exact inner solves it grows monotonically and stabilizes in
at most n steps. Termination: the mask repeats, or it changes only at
components whose value is exactly zero (both cases leave the iterate
satisfying the nonsmooth system).
"""

from dataclasses import dataclass, field

import numpy as np

from .numkit import (
    ELLIPTIC,
    PARABOLIC,
    DimensionError,
    MaskedOperator,
    as_vector,
    spmv,
)
from .krylov import KrylovOptions, NotConverged, qmr_solve
from .matprops import FAMILY_ALONG_W, NO_SOLUTION, classify_solvability

CONVERGED = "Converged"
NO_SOLUTION_CERTIFIED = "NoSolutionCertified"
MAX_OUTER_EXCEEDED = "MaxOuterExceeded"

MIN_PLUS_TMAX = "MinPlusTMax"
MAX_PLUS_TMIN = "MaxPlusTMin"


@dataclass
class ActiveMask:
    bits: np.ndarray
    popcount: int


def active_mask(x, threshold=0.0):
    """Mask with bit i set iff x_i >= threshold_i; the tie is active."""
    x = np.asarray(x, dtype=np.float64)
    threshold = np.asarray(threshold, dtype=np.float64)
    if threshold.ndim not in (0, 1) or (
        threshold.ndim == 1 and threshold.shape != x.shape
    ):
        raise DimensionError("threshold must be scalar or match x in length")
    bits = x >= threshold
    return ActiveMask(bits, int(bits.sum()))


@dataclass
class PlsProblem:
    T: object
    b: np.ndarray
    kind: str = ELLIPTIC
    shift: np.ndarray | None = None
    shift_form: str | None = None
    t2_data: tuple | None = None

    def __post_init__(self):
        if self.T.n_rows != self.T.n_cols:
            raise DimensionError(f"matrix is {self.T.shape}, expected square")
        self.b = as_vector(self.b)
        if self.b.size != self.T.n_rows:
            raise DimensionError("right-hand side length must match the matrix")
        if self.kind not in (ELLIPTIC, PARABOLIC):
            raise ValueError(f"unknown kind {self.kind!r}")
        if (self.shift is None) != (self.shift_form is None):
            raise ValueError("shift and shift_form must be given together")
        if self.shift_form not in (None, MIN_PLUS_TMAX, MAX_PLUS_TMIN):
            raise ValueError(f"unknown shift form {self.shift_form!r}")


@dataclass
class IterationReport:
    outer_iterations: int
    active_counts: list
    inner_stats: list
    residual_history: list
    solvability: object | None = None  # matprops.Solvability when classified
    family_direction: np.ndarray | None = None


@dataclass
class PlsSolution:
    x: np.ndarray
    y: np.ndarray
    status: str
    report: IterationReport


@dataclass
class SolverOptions:
    sign_threshold: float = 0.0
    res_tol: float = 1e-8  # relative to ||b||_inf
    enforce_monotone_mask: bool = True
    max_outer: int | None = None  # defaults to n + 1
    krylov: KrylovOptions = field(default_factory=KrylovOptions)

    def __post_init__(self):
        if self.max_outer is not None and self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")


def _form_residual(T, b, x, kind, complement):
    pos = np.maximum(x, 0.0)
    neg = np.minimum(x, 0.0)
    if kind == PARABOLIC:
        r = x + spmv(T, pos) - b
    elif complement:
        r = pos + spmv(T, neg) - b
    else:
        r = neg + spmv(T, pos) - b
    return float(np.abs(r).max()) if r.size else 0.0


def _picard(T, b, kind, opts, complement=False):
    """Masked Picard loop; returns the iterate, the report, and stability.

    The operator mask starts empty and each step is rebuilt from the signs
    of the new iterate (complemented for the MaxPlusTMin form), joined with
    the previous mask when monotone enforcement is on. Stops when the mask
    repeats or flips only at exact zeros; each linear solve is warm-started
    from the previous iterate.
    """
    n = T.n_rows
    x = np.zeros(n)
    opmask = np.zeros(n, dtype=bool)
    active_counts = [0]
    inner_stats = []
    residual_history = []
    max_outer = opts.max_outer if opts.max_outer is not None else n + 1
    stable = False
    outer = 0
    for _ in range(max_outer):
        op = MaskedOperator(T, opmask, kind)
        x, stats = qmr_solve(op, b, x0=x, opts=opts.krylov)
        outer += 1
        inner_stats.append(stats)
        signs = x >= opts.sign_threshold
        newmask = ~signs if complement else signs
        if opts.enforce_monotone_mask:
            newmask = newmask | opmask
        active_counts.append(int(newmask.sum()))
        residual_history.append(_form_residual(T, b, x, kind, complement))
        if np.array_equal(newmask, opmask):
            stable = True
            break
        # masked operators differ only in columns where the mask flipped;
        # flips confined to components within a few ulps of zero leave the
        # product unchanged, so the iterate already solves the nonsmooth
        # system; the residual gate makes the early exit sound
        flipped = np.abs(x[newmask != opmask]).max()
        if (
            flipped <= 4.0 * np.finfo(np.float64).eps * np.abs(x).max()
            and residual_history[-1] <= _residual_gate(b, opts)
        ):
            stable = True
            break
        opmask = newmask
    report = IterationReport(outer, active_counts, inner_stats, residual_history)
    return x, report, stable


def _residual_gate(b, opts):
    scale = float(np.abs(b).max()) if b.size else 0.0
    return opts.res_tol * (scale if scale > 0.0 else 1.0)


def _finish(x, report, stable, b, opts, residual):
    if not stable:
        return PlsSolution(x, np.maximum(x, 0.0), MAX_OUTER_EXCEEDED, report)
    if residual > _residual_gate(b, opts):
        raise NotConverged(
            "mask stabilized but the nonsmooth residual misses the gate; "
            "tighten the inner tolerance",
            x,
            report.inner_stats[-1] if report.inner_stats else None,
        )
    return PlsSolution(x, np.maximum(x, 0.0), CONVERGED, report)


def solve_elliptic_pls(problem, opts=None):
    """Solve min{0,x} + T max{0,x} = b.

    With t2_data = (v, w) supplied, v^T b > 0 certifies an empty solution
    set without iterating, and v^T b = 0 flags the one-parameter family
    x + alpha w (alpha >= 0) in the report.
    """
    if problem.kind != ELLIPTIC:
        raise ValueError("problem kind must be elliptic")
    opts = opts or SolverOptions()
    solvability = None
    family = None
    if problem.t2_data is not None:
        v, w = problem.t2_data
        solvability = classify_solvability(v, problem.b)
        if solvability.verdict == NO_SOLUTION:
            zero = np.zeros(problem.T.n_rows)
            report = IterationReport(0, [0], [], [], solvability=solvability)
            return PlsSolution(zero, zero.copy(), NO_SOLUTION_CERTIFIED, report)
        if solvability.verdict == FAMILY_ALONG_W:
            family = as_vector(w)
    x, report, stable = _picard(problem.T, problem.b, ELLIPTIC, opts)
    report.solvability = solvability
    report.family_direction = family
    residual = report.residual_history[-1] if report.residual_history else 0.0
    return _finish(x, report, stable, problem.b, opts, residual)


def solve_parabolic_pls(problem, opts=None):
    """Solve x + T max{0,x} = b; this form always has a unique solution."""
    if problem.kind != PARABOLIC:
        raise ValueError("problem kind must be parabolic")
    opts = opts or SolverOptions()
    x, report, stable = _picard(problem.T, problem.b, PARABOLIC, opts)
    residual = report.residual_history[-1] if report.residual_history else 0.0
    return _finish(x, report, stable, problem.b, opts, residual)


def solve_shifted(T, b, xi, form, opts=None):
    """Solve the shifted forms with thresholds xi instead of zero.

    MinPlusTMax: min{xi,x} + T max{xi,x} = b. MaxPlusTMin swaps min and
    max. Both reduce to the plain elliptic iteration in z = x - xi with
    right-hand side b - (I+T) xi; the second form runs on the complemented
    mask. Returns the solution in the unshifted variable.
    """
    if form not in (MIN_PLUS_TMAX, MAX_PLUS_TMIN):
        raise ValueError(f"unknown shift form {form!r}")
    opts = opts or SolverOptions()
    b = as_vector(b)
    xi = as_vector(xi)
    if b.size != T.n_rows or xi.size != T.n_rows:
        raise DimensionError("operand lengths must match the matrix")
    b2 = b - xi - spmv(T, xi)
    z, report, stable = _picard(T, b2, ELLIPTIC, opts, complement=(form == MAX_PLUS_TMIN))
    x = z + xi
    y = np.maximum(z, 0.0)
    if not stable:
        return PlsSolution(x, y, MAX_OUTER_EXCEEDED, report)
    residual = report.residual_history[-1] if report.residual_history else 0.0
    if residual > _residual_gate(b2, opts):
        raise NotConverged(
            "mask stabilized but the nonsmooth residual misses the gate; "
            "tighten the inner tolerance",
            x,
            report.inner_stats[-1] if report.inner_stats else None,
        )
    return PlsSolution(x, y, CONVERGED, report)


def residual_nonsmooth(T, b, x, kind=ELLIPTIC, xi=None, form=MIN_PLUS_TMAX):
    """Max-norm residual of the nonsmooth equation at x."""
    b = np.asarray(b, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if b.shape != x.shape or x.size != T.n_rows:
        raise DimensionError("operand lengths must match the matrix")
    if form not in (MIN_PLUS_TMAX, MAX_PLUS_TMIN):
        raise ValueError(f"unknown shift form {form!r}")
    if kind == PARABOLIC:
        r = x + spmv(T, np.maximum(x, 0.0)) - b
    else:
        base = 0.0 if xi is None else np.asarray(xi, dtype=np.float64)
        lo, hi = np.minimum(x, base), np.maximum(x, base)
        if form == MIN_PLUS_TMAX:
            r = lo + spmv(T, hi) - b
        else:
            r = hi + spmv(T, lo) - b
    return float(np.abs(r).max()) if r.size else 0.0


@dataclass
class CheckReport:
    passed: bool
    y_min: float
    slack_min: float
    complementarity: float


def lcp_check(T, b, y, kind=ELLIPTIC, tol=1e-8):
    """Verify the complementarity conditions satisfied by y = max{0,x}.

    Elliptic: y >= 0, T y >= b, y^T (T y - b) = 0; the parabolic slack is
    y + T y - b. Inequalities are tested against tol scaled by
    max(1, ||b||_inf); the complementarity product against tol ||y|| ||b||.
    """
    y = np.asarray(y, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    slack = spmv(T, y) - b
    if kind == PARABOLIC:
        slack = y + slack
    scale = max(1.0, float(np.abs(b).max()) if b.size else 0.0)
    y_min = float(y.min()) if y.size else 0.0
    slack_min = float(slack.min()) if slack.size else 0.0
    comp = abs(float(y @ slack))
    passed = (
        y_min >= -tol * scale
        and slack_min >= -tol * scale
        and comp <= tol * float(np.linalg.norm(y)) * float(np.linalg.norm(b))
    )
    return CheckReport(passed, y_min, slack_min, comp)

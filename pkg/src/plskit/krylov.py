"""QMR inner solver for the sparse nonsymmetric systems of each outer step.

Coupled two-term Lanczos biorthogonalization without look-ahead. The
operator only needs matvec and rmatvec (and diagonal() when Jacobi
preconditioning is requested). Convergence is always confirmed on the
recomputed true residual, never on the recurrence estimate alone.
"""

import math
from dataclasses import dataclass

import numpy as np

JACOBI = "jacobi"

_PIVOT_FLOOR = 1e-300  # below this a Lanczos pivot counts as a breakdown
_STALL_WINDOW = 60  # sweep iterations without a new best residual


@dataclass
class KrylovOptions:
    rel_tol: float = 1e-12
    abs_tol: float = 0.0
    max_iters: int | None = None  # defaults to 10 n at solve time
    preconditioner: str | None = None  # None or "jacobi"

    def __post_init__(self):
        if self.rel_tol < 0 or self.abs_tol < 0:
            raise ValueError("tolerances must be nonnegative")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.preconditioner not in (None, JACOBI):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")


@dataclass
class KrylovStats:
    iterations: int
    final_residual_norm: float
    converged: bool
    breakdown: bool


class NotConverged(RuntimeError):
    """Iteration budget exhausted; carries the best iterate found."""

    def __init__(self, message, x, stats):
        super().__init__(message)
        self.x = x
        self.stats = stats


class Breakdown(RuntimeError):
    """Unrecoverable Lanczos breakdown; carries the best iterate found."""

    def __init__(self, message, x, stats):
        super().__init__(message)
        self.x = x
        self.stats = stats


class _BreakdownSignal(Exception):
    pass


def _jacobi_diag(op):
    d = np.asarray(op.diagonal(), dtype=np.float64)
    safe = np.where(np.abs(d) > 0.0, d, 1.0)
    return safe


def _qmr_sweep(op, b, x, inv_d, tol, budget, check_every=10):
    """One QMR run from x until tol, budget, or breakdown.

    Jacobi preconditioning is applied on the right (columns scaled by the
    operator diagonal), so the recurrence residual stays the residual of
    the original system and the tolerance keeps its meaning.

    Returns (x_best, res_best, used, hit_tol). Raises _BreakdownSignal with
    the best pair attached when a Lanczos pivot collapses.
    """
    r = b - op.matvec(x)
    res = float(np.linalg.norm(r))
    x_best, res_best = x.copy(), res
    if res <= tol or budget <= 0:
        return x_best, res_best, 0, res <= tol

    def precond(u):
        return u * inv_d if inv_d is not None else u

    v_t = r.copy()
    rho = float(np.linalg.norm(v_t))
    w_t = r.copy()
    z = precond(w_t)
    xi = float(np.linalg.norm(z))
    gamma, eta, theta = 1.0, -1.0, 0.0
    eps = 1.0
    p = q = None
    d_vec = s_vec = None

    used = 0
    last_gain = 0
    while used < budget:
        if abs(rho) < _PIVOT_FLOOR or abs(xi) < _PIVOT_FLOOR:
            raise _BreakdownSignal(x_best, res_best, used)
        v = v_t / rho
        w = w_t / xi
        z = z / xi
        delta = float(z @ v)
        if abs(delta) < _PIVOT_FLOOR:
            raise _BreakdownSignal(x_best, res_best, used)
        y_t = precond(v)
        z_t = z
        if p is None:
            p = y_t.copy()
            q = z_t.copy()
        else:
            p = y_t - (xi * delta / eps) * p
            q = z_t - (rho * delta / eps) * q
        p_t = op.matvec(p)
        eps = float(q @ p_t)
        if abs(eps) < _PIVOT_FLOOR:
            raise _BreakdownSignal(x_best, res_best, used)
        beta = eps / delta
        if abs(beta) < _PIVOT_FLOOR:
            raise _BreakdownSignal(x_best, res_best, used)
        v_t = p_t - beta * v
        rho_prev, rho = rho, float(np.linalg.norm(v_t))
        w_t = op.rmatvec(q) - beta * w
        z = precond(w_t)
        xi = float(np.linalg.norm(z))
        theta_prev, gamma_prev = theta, gamma
        theta = rho / (gamma * abs(beta))
        gamma = 1.0 / math.sqrt(1.0 + theta * theta)
        if gamma < _PIVOT_FLOOR:
            raise _BreakdownSignal(x_best, res_best, used)
        eta = -eta * rho_prev * gamma * gamma / (beta * gamma_prev * gamma_prev)
        if d_vec is None:
            d_vec = eta * p
            s_vec = eta * p_t
        else:
            shrink = (theta_prev * gamma) ** 2
            d_vec = eta * p + shrink * d_vec
            s_vec = eta * p_t + shrink * s_vec
        x = x + d_vec
        r = r - s_vec
        used += 1

        estimate = float(np.linalg.norm(r))
        if estimate <= tol or used % check_every == 0 or used == budget:
            r = b - op.matvec(x)  # re-sync on the true residual
            res = float(np.linalg.norm(r))
            if res < res_best:
                x_best, res_best = x.copy(), res
                last_gain = used
            if res <= tol:
                return x_best, res_best, used, True
            if used - last_gain >= _STALL_WINDOW:
                return x_best, res_best, used, False  # stalled; caller restarts
    return x_best, res_best, used, False


def qmr_solve(op, b, x0=None, opts=None):
    """Solve op x = b by QMR; returns (x, KrylovStats).

    Returns immediately when x0 already meets the tolerance. On a Lanczos
    breakdown the iteration restarts from the best iterate as long as each
    sweep improved the residual; a stagnant breakdown raises Breakdown and
    a spent iteration budget raises NotConverged, both carrying the best
    iterate and its stats.
    """
    opts = opts or KrylovOptions()
    b = np.asarray(b, dtype=np.float64)
    n = b.size
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    tol = opts.rel_tol * float(np.linalg.norm(b)) + opts.abs_tol
    budget = opts.max_iters if opts.max_iters is not None else 10 * max(n, 1)
    inv_d = 1.0 / _jacobi_diag(op) if opts.preconditioner == JACOBI else None

    total = 0
    broke = False
    while True:
        entry_res = float(np.linalg.norm(b - op.matvec(x)))
        try:
            x, res, used, ok = _qmr_sweep(op, b, x, inv_d, tol, budget - total)
            total += used
            if ok:
                return x, KrylovStats(total, res, True, broke)
        except _BreakdownSignal as sig:
            x, res, used = sig.args
            total += used
            broke = True
        # restart from the best iterate only while sweeps keep shrinking
        # the residual; a stagnant sweep would just replay itself
        if res < 0.99 * entry_res and total < budget:
            continue
        stats = KrylovStats(total, res, False, broke)
        if broke and total < budget:
            raise Breakdown("Lanczos breakdown without progress", x, stats)
        raise NotConverged(
            f"no convergence within {total} iterations (stalled)"
            if total < budget
            else f"no convergence within {budget} iterations",
            x,
            stats,
        )

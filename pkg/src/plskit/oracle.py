"""Brute-force reference solver for small piecewise linear systems.

Enumerates all 2^n sign patterns, densely solves each masked system, and
keeps the candidates whose signs reproduce their generating mask. Singular
but consistent patterns contribute one-parameter solution families with
closed-form parameter ranges. Exponential by design; guarded at n = 20.
"""

from dataclasses import dataclass

import numpy as np

from .numkit import ELLIPTIC, PARABOLIC, DimensionError

_MAX_N = 20
_SING_TOL = 1e-12  # pivot and singular-value cutoff relative to ||M||_inf


class TooLarge(ValueError):
    """Enumeration over 2^n patterns refused beyond n = 20."""


@dataclass
class Family:
    base: np.ndarray
    direction: np.ndarray
    alpha_min: float
    alpha_max: float


@dataclass
class OracleResult:
    point_solutions: list
    families: list
    patterns_tested: int


@dataclass
class WDiagonal:
    omegas: np.ndarray


def _plu_solve(m, rhs, pivot_floor):
    """Partial-pivot LU solve; returns None when a pivot falls below floor."""
    n = m.shape[0]
    a = m.copy()
    x = rhs.copy()
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        if abs(a[p, k]) < pivot_floor:
            return None
        if p != k:
            a[[k, p]] = a[[p, k]]
            x[[k, p]] = x[[p, k]]
        factors = a[k + 1:, k] / a[k, k]
        a[k + 1:, k + 1:] -= np.outer(factors, a[k, k + 1:])
        x[k + 1:] -= factors * x[k]
    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - a[k, k + 1:] @ x[k + 1:]) / a[k, k]
    return x


def _masked_dense(t_dense, bits, kind):
    p = bits.astype(np.float64)
    if kind == ELLIPTIC:
        return np.diag(1.0 - p) + t_dense * p[None, :]
    return np.eye(bits.size) + t_dense * p[None, :]


def _pattern_consistent(x, bits):
    active = x >= 0.0
    return bool(np.array_equal(active, bits))


def _alpha_range(x0, d, bits):
    """Sign-consistency interval for x0 + alpha d under the given mask."""
    lo, hi = -np.inf, np.inf
    for xi, di, active in zip(x0, d, bits):
        if di == 0.0:
            if active != (xi >= 0.0):
                return None
            continue
        crossing = -xi / di
        if active:  # need xi + alpha di >= 0
            if di > 0.0:
                lo = max(lo, crossing)
            else:
                hi = min(hi, crossing)
        else:  # need xi + alpha di < 0
            if di > 0.0:
                hi = min(hi, crossing)
            else:
                lo = max(lo, crossing)
    if lo >= hi:
        return None
    return lo, hi


def _singular_family(m, b, bits, pivot_floor):
    u, s, vh = np.linalg.svd(m)
    if s[0] <= 0.0:
        return None
    null = s <= _SING_TOL * s[0]
    if null.sum() != 1:
        return None  # only one-parameter families are reported
    # consistency: b must lie in the range of m
    resid = u.T @ b
    if np.any(np.abs(resid[null]) > 1e-10 * (1.0 + np.abs(b).max())):
        return None
    x0 = vh.T @ np.where(null, 0.0, resid / np.where(null, 1.0, s))
    d = vh[-1]
    d = d / np.abs(d).max()
    if d.sum() < 0.0:
        d = -d
    rng = _alpha_range(x0, d, bits)
    if rng is None:
        return None
    lo, hi = rng
    if np.isfinite(lo):
        return Family(x0 + lo * d, d, 0.0, hi - lo)
    return Family(x0, d, lo, hi)


def enumerate_solutions(matrix, b, kind=ELLIPTIC):
    """All solutions of the piecewise linear system by pattern enumeration.

    For each boolean mask P the dense masked system is solved; a candidate
    is accepted iff its signs reproduce P under the inclusive >= 0 rule.
    Singular consistent patterns yield families restricted to their
    sign-consistent parameter range.
    """
    if matrix.n_rows != matrix.n_cols:
        raise DimensionError(f"matrix is {matrix.shape}, expected square")
    n = matrix.n_rows
    if n > _MAX_N:
        raise TooLarge(f"n = {n} exceeds the enumeration limit {_MAX_N}")
    if kind not in (ELLIPTIC, PARABOLIC):
        raise ValueError(f"unknown kind {kind!r}")
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (n,):
        raise DimensionError("right-hand side length must match the matrix")
    t_dense = matrix.to_dense()
    positions = np.arange(n)

    points, families = [], []
    for code in range(1 << n):
        bits = (code >> positions) & 1 == 1
        m = _masked_dense(t_dense, bits, kind)
        pivot_floor = _SING_TOL * max(np.abs(m).sum(axis=1).max(), 1e-300)
        x = _plu_solve(m, b, pivot_floor)
        if x is not None:
            if _pattern_consistent(x, bits):
                points.append(x)
        else:
            fam = _singular_family(m, b, bits, pivot_floor)
            if fam is not None and not any(
                np.allclose(fam.base, g.base) and np.allclose(fam.direction, g.direction)
                for g in families
            ):
                families.append(fam)
    return OracleResult(points, families, 1 << n)


def w_matrix(x, y):
    """Diagonal W with P(x)x - P(y)y = W (x - y), entrywise in [0, 1]."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionError("vectors differ in length")
    px = x >= 0.0
    py = y >= 0.0
    omegas = np.zeros(x.shape)
    omegas[px & py] = 1.0
    xpos = px & ~py
    omegas[xpos] = x[xpos] / (x[xpos] - y[xpos])
    ypos = ~px & py
    omegas[ypos] = y[ypos] / (y[ypos] - x[ypos])
    return WDiagonal(omegas)

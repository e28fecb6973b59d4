"""Finite-difference obstacle problems on rectangles.

Discretizes -Laplace(u) = f over the obstacle psi with the standard
5-point stencil on an N x N interior grid, eliminates the boundary
condition into the right-hand side, and hands the resulting piecewise
linear system in y = u - psi to the elliptic or parabolic solver.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .krylov import JACOBI, KrylovOptions
from .numkit import ELLIPTIC, PARABOLIC, SparseMatrix, csr_from_triplets, spmv
from .pls import (
    PlsProblem,
    PlsSolution,
    SolverOptions,
    solve_elliptic_pls,
    solve_parabolic_pls,
)


def default_solver_options():
    """Driver defaults: the assembled operators mix unit columns with
    1/h^2-scaled ones, which stalls plain QMR, so diagonal preconditioning
    is on here."""
    return SolverOptions(krylov=KrylovOptions(preconditioner=JACOBI))

DIRICHLET = "dirichlet"
NEUMANN = "neumann"

CORNER_AVERAGE = "average"
CORNER_XEDGE = "xedge"
CORNER_YEDGE = "yedge"

TENT = "tent"
TENT_NEUMANN = "tent-neumann"
TORSION = "torsion"
TORSION_NEUMANN = "torsion-neumann"

PROBLEM_NAMES = (TENT, TENT_NEUMANN, TORSION, TORSION_NEUMANN)


class GridError(ValueError):
    pass


@dataclass
class Grid2D:
    """Interior nodes of a rectangle, x fastest: node k = j*nx + i sits at
    (x0 + (i+1) dx, y0 + (j+1) dy)."""

    nx: int
    ny: int
    dx: float
    dy: float
    x0: float
    y0: float

    @property
    def n(self):
        return self.nx * self.ny

    def node_xy(self, k):
        j, i = divmod(k, self.nx)
        return self.x0 + (i + 1) * self.dx, self.y0 + (j + 1) * self.dy

    def x_coords(self):
        return self.x0 + self.dx * np.arange(self.nx + 2)

    def y_coords(self):
        return self.y0 + self.dy * np.arange(self.ny + 2)


@dataclass
class ObstacleSpec:
    name: str
    domain: tuple  # (x0, x1, y0, y1)
    psi: object  # callable (x, y) -> obstacle height
    f: object  # callable (x, y) -> load
    bc_kind: str
    bc_value: float = 0.0  # Dirichlet value on the whole boundary
    flux: object = None  # Neumann: callable (x, y) -> outward normal derivative
    c: float | None = None


def _tent_psi(x, y):
    return min(1.0 - abs(x), 2.0 - abs(y))


def problem_spec(name, c=None):
    """Named benchmark instances; c is the constant load of the torsion
    family and must be negative there."""
    if name == TENT:
        return ObstacleSpec(TENT, (-1.0, 1.0, -2.0, 2.0), _tent_psi,
                            lambda x, y: 0.0, DIRICHLET, bc_value=0.5)
    if name == TENT_NEUMANN:
        return ObstacleSpec(TENT_NEUMANN, (-1.0, 1.0, -2.0, 2.0), _tent_psi,
                            lambda x, y: -1.0, NEUMANN, flux=lambda x, y: 0.0)
    if name in (TORSION, TORSION_NEUMANN):
        if c is None:
            c = -20.0
        if c >= 0.0:
            raise ValueError("the torsion load constant must be negative")

        def psi(x, y):
            return -min(x, 1.0 - x, y, 1.0 - y)

        if name == TORSION:
            return ObstacleSpec(TORSION, (0.0, 1.0, 0.0, 1.0), psi,
                                lambda x, y, c=c: c, DIRICHLET, bc_value=0.0, c=c)
        return ObstacleSpec(TORSION_NEUMANN, (0.0, 1.0, 0.0, 1.0), psi,
                            lambda x, y, c=c: c, NEUMANN,
                            flux=lambda x, y: 1.0, c=c)
    raise ValueError(f"unknown problem {name!r}")


@dataclass
class DiscreteObstacle:
    spec: ObstacleSpec
    grid: Grid2D
    T: SparseMatrix
    f_vec: np.ndarray
    psi_vec: np.ndarray
    b: np.ndarray
    t2_data: tuple | None  # (v, w) for the Neumann (singular) matrices


def assemble_elliptic(spec, n):
    """Discrete negative Laplacian on the n x n interior grid of spec's
    rectangle, boundary terms folded into the right-hand side, and
    b = f - T psi for the reformulation in y = u - psi."""
    if n < 2:
        raise GridError("grid needs at least 2 interior nodes per side")
    x0, x1, y0, y1 = spec.domain
    dx = (x1 - x0) / (n + 1)
    dy = (y1 - y0) / (n + 1)
    grid = Grid2D(n, n, dx, dy, x0, y0)
    cx = 1.0 / dx**2
    cy = 1.0 / dy**2
    neumann = spec.bc_kind == NEUMANN
    size = grid.n
    triplets = []
    f_vec = np.empty(size)
    psi_vec = np.empty(size)
    for k in range(size):
        j, i = divmod(k, n)
        x, y = grid.node_xy(k)
        f_vec[k] = spec.f(x, y)
        psi_vec[k] = spec.psi(x, y)
        diag = 2.0 * cx + 2.0 * cy
        for di, dj, c in ((-1, 0, cx), (1, 0, cx), (0, -1, cy), (0, 1, cy)):
            ii, jj = i + di, j + dj
            if 0 <= ii < n and 0 <= jj < n:
                triplets.append((k, jj * n + ii, -c))
            elif neumann:
                # ghost elimination u_B = u_adj + h g keeps T symmetric
                diag -= c
                h = dx if di else dy
                bx = x + di * dx if di else x
                by = y + dj * dy if dj else y
                f_vec[k] += c * h * spec.flux(bx, by)
            else:
                f_vec[k] += c * spec.bc_value
        triplets.append((k, k, diag))
    T = csr_from_triplets(triplets, size, size)
    b = f_vec - spmv(T, psi_vec)
    t2_data = (np.ones(size), np.ones(size)) if neumann else None
    return DiscreteObstacle(spec, grid, T, f_vec, psi_vec, b, t2_data)


def coincidence_set(u, psi, coin_tol=1e-8):
    """Boolean mask of nodes where the membrane sits on the obstacle."""
    u = np.asarray(u, dtype=np.float64)
    psi = np.asarray(psi, dtype=np.float64)
    scale = 1.0 + (float(np.abs(u).max()) if u.size else 0.0)
    return u - psi <= coin_tol * scale


@dataclass
class ObstacleSolution:
    disc: DiscreteObstacle
    u: np.ndarray
    coincidence: np.ndarray
    result: PlsSolution


def solve_obstacle(spec, n, opts=None, coin_tol=1e-8):
    """Assemble and solve the stationary problem; u = max{0,x} + psi."""
    opts = opts or default_solver_options()
    disc = assemble_elliptic(spec, n)
    problem = PlsProblem(disc.T, disc.b, kind=ELLIPTIC, t2_data=disc.t2_data)
    result = solve_elliptic_pls(problem, opts)
    u = result.y + disc.psi_vec
    return ObstacleSolution(disc, u, coincidence_set(u, disc.psi_vec, coin_tol), result)


@dataclass
class ParabolicRun:
    disc: DiscreteObstacle
    tau: float
    nu: int
    dt: float
    snapshots: list  # nu + 1 membrane states, the initial one first
    step_results: list  # nu PlsSolution records


def run_parabolic(spec, n, tau, nu, opts=None):
    """Implicit Euler for the evolving membrane over the obstacle.

    Each of the nu steps of length dt = tau/nu solves
    (u' - psi) + dt T max{0, u' - psi} = (u - psi) + dt (f - T psi)
    starting from the membrane resting on the obstacle, and advances
    u <- max{0,x} + psi.
    """
    if nu < 1:
        raise GridError("need at least one time step")
    if tau <= 0.0:
        raise GridError("the horizon must be positive")
    opts = opts or default_solver_options()
    disc = assemble_elliptic(spec, n)
    dt = tau / nu
    T_step = disc.T.scaled(dt)
    u = disc.psi_vec.copy()
    snapshots = [u.copy()]
    step_results = []
    for _ in range(nu):
        b_step = (u - disc.psi_vec) + dt * disc.b
        problem = PlsProblem(T_step, b_step, kind=PARABOLIC)
        result = solve_parabolic_pls(problem, opts)
        u = result.y + disc.psi_vec
        snapshots.append(u.copy())
        step_results.append(result)
    return ParabolicRun(disc, tau, nu, dt, snapshots, step_results)


def _boundary_value(disc, interior, x, y, side):
    """Membrane value at a boundary node: the Dirichlet datum, or the
    ghost formula u_B = u_adj + h g matching the Neumann elimination."""
    spec = disc.spec
    if spec.bc_kind == DIRICHLET:
        return spec.bc_value
    g = spec.flux(x, y)
    if side == "x":
        return interior + disc.grid.dx * g
    return interior + disc.grid.dy * g


def full_grid_solution(disc, u, corner=CORNER_AVERAGE):
    """Membrane values on the full (n+2) x (n+2) grid including the
    reconstructed boundary ring; corners come from the chosen edge rule."""
    if corner not in (CORNER_AVERAGE, CORNER_XEDGE, CORNER_YEDGE):
        raise ValueError(f"unknown corner rule {corner!r}")
    n = disc.grid.nx
    xs = disc.grid.x_coords()
    ys = disc.grid.y_coords()
    full = np.empty((n + 2, n + 2))  # [row = y index][col = x index]
    full[1:-1, 1:-1] = np.asarray(u, dtype=np.float64).reshape(n, n)
    for i in range(1, n + 1):
        full[0, i] = _boundary_value(disc, full[1, i], xs[i], ys[0], "y")
        full[n + 1, i] = _boundary_value(disc, full[n, i], xs[i], ys[n + 1], "y")
    for j in range(1, n + 1):
        full[j, 0] = _boundary_value(disc, full[j, 1], xs[0], ys[j], "x")
        full[j, n + 1] = _boundary_value(disc, full[j, n], xs[n + 1], ys[j], "x")
    for jj, ii in ((0, 0), (0, n + 1), (n + 1, 0), (n + 1, n + 1)):
        from_x = _boundary_value(disc, full[jj, 1 if ii == 0 else n],
                                 xs[ii], ys[jj], "x")
        from_y = _boundary_value(disc, full[1 if jj == 0 else n, ii],
                                 xs[ii], ys[jj], "y")
        if corner == CORNER_XEDGE:
            full[jj, ii] = from_x
        elif corner == CORNER_YEDGE:
            full[jj, ii] = from_y
        else:
            full[jj, ii] = 0.5 * (from_x + from_y)
    return full


def write_solution_csv(path, disc, u, coincidence, corner=CORNER_AVERAGE):
    """Write x,y,u,psi,active rows for the full grid, row-major in y then
    x, 17 significant digits."""
    n = disc.grid.nx
    xs = disc.grid.x_coords()
    ys = disc.grid.y_coords()
    full = full_grid_solution(disc, u, corner)
    act = np.zeros((n + 2, n + 2), dtype=int)
    act[1:-1, 1:-1] = np.asarray(coincidence, dtype=bool).reshape(n, n)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", "y", "u", "psi", "active"])
        for jj in range(n + 2):
            for ii in range(n + 2):
                x, y = xs[ii], ys[jj]
                writer.writerow([
                    format(x, ".17g"),
                    format(y, ".17g"),
                    format(full[jj, ii], ".17g"),
                    format(disc.spec.psi(x, y), ".17g"),
                    act[jj, ii],
                ])

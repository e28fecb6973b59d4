import csv

import numpy as np
import pytest

from plskit import check_t1, check_t2, lcp_check
from plskit import obstacle as obs
from plskit.pls import CONVERGED, NO_SOLUTION_CERTIFIED


def test_problem_specs_cover_the_four_benchmarks():
    tent = obs.problem_spec("tent")
    assert tent.domain == (-1.0, 1.0, -2.0, 2.0)
    assert tent.bc_kind == obs.DIRICHLET and tent.bc_value == 0.5
    assert tent.f(0.3, 0.7) == 0.0
    assert tent.psi(0.0, 0.0) == 1.0
    assert tent.psi(0.5, 1.8) == pytest.approx(0.2)

    tn = obs.problem_spec("tent-neumann")
    assert tn.bc_kind == obs.NEUMANN
    assert tn.f(0.1, 0.2) == -1.0
    assert tn.flux(1.0, 0.5) == 0.0

    tor = obs.problem_spec("torsion")
    assert tor.domain == (0.0, 1.0, 0.0, 1.0)
    assert tor.c == -20.0  # default load
    assert tor.f(0.5, 0.5) == -20.0
    assert tor.psi(0.25, 0.5) == -0.25  # distance to the boundary, negated

    torn = obs.problem_spec("torsion-neumann", c=-5.0)
    assert torn.flux(0.0, 0.5) == 1.0
    assert torn.f(0.9, 0.9) == -5.0


def test_problem_spec_rejects_bad_input():
    with pytest.raises(ValueError):
        obs.problem_spec("torsion", c=1.0)
    with pytest.raises(ValueError):
        obs.problem_spec("torsion", c=0.0)
    with pytest.raises(ValueError):
        obs.problem_spec("drum")


def test_grid_geometry():
    d = obs.assemble_elliptic(obs.problem_spec("tent"), 25)
    assert d.grid.n == 625
    assert d.grid.dx == pytest.approx(2.0 / 26.0)
    assert d.grid.dy == pytest.approx(4.0 / 26.0)
    assert 2.0 * d.grid.dx == pytest.approx(d.grid.dy)
    x, y = d.grid.node_xy(0)
    assert (x, y) == pytest.approx((-1.0 + d.grid.dx, -2.0 + d.grid.dy))

    t = obs.assemble_elliptic(obs.problem_spec("torsion"), 9)
    assert t.grid.dx == t.grid.dy == pytest.approx(0.1)


def test_assembly_guards():
    with pytest.raises(obs.GridError):
        obs.assemble_elliptic(obs.problem_spec("tent"), 1)
    with pytest.raises(obs.GridError):
        obs.run_parabolic(obs.problem_spec("tent"), 5, tau=1.0, nu=0)
    with pytest.raises(obs.GridError):
        obs.run_parabolic(obs.problem_spec("tent"), 5, tau=-1.0, nu=2)


def test_dirichlet_stencil_and_boundary_fold():
    # tent, N=3: dx=0.5, dy=1 -> cx=4, cy=1, diagonal 10
    d = obs.assemble_elliptic(obs.problem_spec("tent"), 3)
    dense = d.T.to_dense()
    assert dense[4, 4] == pytest.approx(10.0)
    assert dense[4, 3] == dense[4, 5] == pytest.approx(-4.0)
    assert dense[4, 1] == dense[4, 7] == pytest.approx(-1.0)
    # corner node misses one x and one y neighbor; both fold 0.5 into f
    assert d.f_vec[0] == pytest.approx(4.0 * 0.5 + 1.0 * 0.5)
    assert d.f_vec[4] == 0.0
    assert np.allclose(d.b, d.f_vec - dense @ d.psi_vec)
    assert d.t2_data is None


def test_assembled_matrix_is_symmetric():
    for name in ("tent", "tent-neumann", "torsion", "torsion-neumann"):
        d = obs.assemble_elliptic(obs.problem_spec(name), 6)
        dense = d.T.to_dense()
        assert np.array_equal(dense, dense.T)


def test_neumann_matrix_has_flat_null_vectors():
    d = obs.assemble_elliptic(obs.problem_spec("tent-neumann"), 6)
    ones = np.ones(d.grid.n)
    tnorm = d.T.norm_inf()
    assert np.abs(d.T.matvec(ones)).max() <= 1e-10 * tnorm
    assert np.abs(d.T.rmatvec(ones)).max() <= 1e-10 * tnorm
    assert d.t2_data is not None
    v, w = d.t2_data
    assert np.array_equal(v, ones) and np.array_equal(w, ones)


def test_dirichlet_matrices_satisfy_t1():
    for name, nn in (("tent", 5), ("torsion", 10)):
        d = obs.assemble_elliptic(obs.problem_spec(name), nn)
        assert check_t1(d.T).t1_verdict == "Proven"


def test_neumann_matrix_satisfies_t2_and_shifted_t1():
    d = obs.assemble_elliptic(obs.problem_spec("tent-neumann"), 5)
    rep = check_t2(d.T)
    assert rep.t2_verdict == "Proven"
    for vec in (rep.left_null, rep.right_null):
        assert np.allclose(vec / vec[0], np.ones(d.grid.n), atol=1e-7)
    # the backward Euler matrix I + dt T is an M-matrix again
    stepped = d.T.scaled(1.0e4 / 20.0).add_diagonal(1.0)
    assert check_t1(stepped).t1_verdict == "Proven"


def test_neumann_load_is_compatible():
    d = obs.assemble_elliptic(obs.problem_spec("tent-neumann"), 5)
    assert d.b.sum() == pytest.approx(-25.0)  # v^T b < 0: unique solution


def test_tent_membrane_solution():
    sol = obs.solve_obstacle(obs.problem_spec("tent"), 25)
    assert sol.result.status == CONVERGED
    d = sol.disc
    assert np.all(sol.u >= d.psi_vec - 1e-8)
    assert sol.u.max() <= 1.0 + 1e-8
    assert lcp_check(d.T, d.b, sol.result.y).passed
    assert sol.coincidence.sum() > 0  # the membrane touches the tent pole
    assert np.array_equal(sol.coincidence, obs.coincidence_set(sol.u, d.psi_vec))


def test_tent_neumann_solution_is_unique_regime():
    sol = obs.solve_obstacle(obs.problem_spec("tent-neumann"), 25)
    assert sol.result.status == CONVERGED
    assert sol.result.report.solvability.verdict == "Unique"
    assert abs(sol.result.report.outer_iterations - 12) <= 2


def test_incompatible_neumann_load_is_certified():
    # c = -1 breaks the compatibility integral: no solution exists
    sol = obs.solve_obstacle(obs.problem_spec("torsion-neumann", c=-1.0), 5)
    assert sol.result.status == NO_SOLUTION_CERTIFIED


def test_torsion_iteration_count_is_stable():
    sol = obs.solve_obstacle(obs.problem_spec("torsion", c=-20.0), 25)
    assert sol.result.status == CONVERGED
    assert sol.result.report.outer_iterations == 4


def test_parabolic_run_shape_and_stationary_limit():
    spec = obs.problem_spec("tent")
    run = obs.run_parabolic(spec, 5, tau=1.0e4, nu=10)
    assert run.dt == pytest.approx(1.0e3)
    assert len(run.snapshots) == 11
    assert len(run.step_results) == 10
    assert np.array_equal(run.snapshots[0], run.disc.psi_vec)
    still = obs.solve_obstacle(spec, 5)
    assert np.abs(run.snapshots[-1] - still.u).max() <= 1e-10


def test_refinement_shrinks_the_error_on_nested_grids():
    # interior node (i,j) of the n-grid coincides with (2i+1, 2j+1) of the
    # (2n+1)-grid; compare three torsion solves on shared nodes
    spec = obs.problem_spec("torsion", c=-10.0)
    levels = {n: obs.solve_obstacle(spec, n).u for n in (24, 49, 99)}

    def on_coarse(u_fine, n_fine, n_coarse):
        idx = 2 * np.arange(n_coarse) + 1
        return u_fine.reshape(n_fine, n_fine)[np.ix_(idx, idx)].ravel()

    e_coarse = np.abs(levels[24] - on_coarse(levels[49], 49, 24)).max()
    e_fine = np.abs(levels[49] - on_coarse(levels[99], 99, 49)).max()
    assert e_fine < e_coarse / 3.0


def test_coincidence_set_tolerance():
    u = np.array([0.0, 1e-9, 1e-3])
    psi = np.zeros(3)
    assert obs.coincidence_set(u, psi).tolist() == [True, True, False]


def test_full_grid_reconstruction_dirichlet():
    sol = obs.solve_obstacle(obs.problem_spec("tent"), 5)
    for corner in (obs.CORNER_AVERAGE, obs.CORNER_XEDGE, obs.CORNER_YEDGE):
        full = obs.full_grid_solution(sol.disc, sol.u, corner)
        assert full.shape == (7, 7)
        assert np.allclose(full[1:-1, 1:-1], sol.u.reshape(5, 5))
        # the whole ring carries the boundary datum regardless of rule
        ring = np.concatenate([full[0], full[-1], full[:, 0], full[:, -1]])
        assert np.allclose(ring, 0.5)
    with pytest.raises(ValueError):
        obs.full_grid_solution(sol.disc, sol.u, corner="nearest")


def test_full_grid_reconstruction_neumann():
    sol = obs.solve_obstacle(obs.problem_spec("torsion-neumann", c=-20.0), 5)
    d = sol.disc
    inner = sol.u.reshape(5, 5)
    fx = obs.full_grid_solution(d, sol.u, obs.CORNER_XEDGE)
    # ghost formula u_B = u_adj + h g with g = 1
    assert fx[0, 1] == pytest.approx(inner[0, 0] + d.grid.dy)
    assert fx[3, 0] == pytest.approx(inner[2, 0] + d.grid.dx)


def test_corner_rules_differ_for_varying_flux():
    # a flux that varies along the boundary makes the two corner paths
    # pick up different ghost lifts; reconstruction needs no solve
    spec = obs.ObstacleSpec(
        "synthetic", (-1.0, 1.0, -2.0, 2.0), lambda x, y: 0.0,
        lambda x, y: 0.0, obs.NEUMANN, flux=lambda x, y: x,
    )
    d = obs.assemble_elliptic(spec, 4)
    u = np.arange(16.0)
    fx = obs.full_grid_solution(d, u, obs.CORNER_XEDGE)
    fy = obs.full_grid_solution(d, u, obs.CORNER_YEDGE)
    fa = obs.full_grid_solution(d, u, obs.CORNER_AVERAGE)
    assert fx[0, 0] != fy[0, 0]
    assert fa[0, 0] == pytest.approx(0.5 * (fx[0, 0] + fy[0, 0]))


def test_solution_csv_layout(tmp_path):
    sol = obs.solve_obstacle(obs.problem_spec("tent"), 5)
    path = tmp_path / "tent.csv"
    obs.write_solution_csv(path, sol.disc, sol.u, sol.coincidence)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["x", "y", "u", "psi", "active"]
    assert len(rows) == 1 + 7 * 7
    # boundary nodes are never marked active
    for row in rows[1:]:
        x, y = float(row[0]), float(row[1])
        if abs(x) == 1.0 or abs(y) == 2.0:
            assert row[4] == "0"
    # rewriting produces identical bytes
    again = tmp_path / "tent2.csv"
    obs.write_solution_csv(again, sol.disc, sol.u, sol.coincidence)
    assert path.read_bytes() == again.read_bytes()

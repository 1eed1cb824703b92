import math

import numpy as np
import pytest

from fraclap.domain_geom import (Ball, HalfLine, HalfSpace, Interval, build_partition, distance,
                                 graded_grid, interior_boundary_integral, psi_values)


def test_interval_distance():
    D = Interval()
    assert np.allclose(distance(D, np.array([-1.0, -0.5, 0.0, 0.9, 1.5])), [0, 0.5, 1, 0.1, 0])


def test_halfline_and_halfspace_distance():
    assert np.allclose(HalfLine().rho(np.array([-1.0, 0.0, 2.5])), [0, 0, 2.5])
    assert HalfSpace(2).rho(np.array([0.3, -7.0])) == pytest.approx(0.3)


def test_ball_distance():
    B = Ball((0.0, 0.0), 1.0)
    assert B.rho(np.array([0.5, 0.0])) == pytest.approx(0.5)
    assert B.rho(np.array([2.0, 0.0])) == 0.0
    assert B.measure == pytest.approx(math.pi)


def test_invalid_domains():
    with pytest.raises(ValueError):
        Interval(1.0, -1.0)
    with pytest.raises(ValueError):
        Ball((0.0,), 0.0)


def test_partition_covers_with_bounded_overlap():
    # every point lies in the core of some zeta_n and in at most two supports
    P = build_partition(Interval(), rho_min=1e-8)
    rho = np.geomspace(1e-7, 0.9, 400)
    assert P.covers(rho)
    s = P.zeta_sum(rho)
    assert s.min() >= 1.0 - 1e-12 and s.max() <= 2.0 + 1e-12


def test_partition_needs_overlap():
    with pytest.raises(ValueError):
        build_partition(Interval(), k1=1.0, k2=2.0)


def test_psi_comparable_to_rho():
    P = build_partition(Interval(), rho_min=1e-10)
    rho = np.geomspace(1e-9, 0.9, 500)
    q = P.psi(rho) / rho
    assert q.min() > 0.1 and q.max() < 10


def test_psi_derivative_bounds():
    # |D^m psi| <= C_m psi^{1-m}
    P = build_partition(Interval(), rho_min=1e-10)
    rho = np.geomspace(1e-8, 0.5, 500)
    assert P.covers(rho)
    psi = P.psi(rho)
    for m, c in ((1, 20.0), (2, 500.0)):
        assert np.max(np.abs(P.psi(rho, m)) * psi ** (m - 1)) < c


def test_graded_grid_weights_and_moments():
    g = graded_grid(Interval(), 256)
    assert g.size == 256
    assert np.all(np.diff(g.nodes) > 0)
    assert g.weights.sum() == pytest.approx(2.0, abs=1e-2)
    # int_{-1}^{1} rho^{-1/2} dx = 4 by the moment weights
    w = g.moment_weights(-0.5)
    assert w.sum() == pytest.approx(4.0, rel=1e-8)
    assert np.all(psi_values(g) > 0)


def test_graded_grid_clusters_near_boundary():
    g = graded_grid(Interval(), 128)
    assert g.rho.min() < 1e-3


def test_boundary_cells():
    g = graded_grid(Interval(), 32)
    cells = g.boundary_cells()
    assert [c[:2] for c in cells] == [(0, 1), (31, 30)]


def test_interior_boundary_integral_lam_zero():
    assert interior_boundary_integral(Interval(), 0.0, 0.0, 0.5) == pytest.approx(1.0)


def test_interior_boundary_integral_rejects_lam():
    with pytest.raises(ValueError):
        interior_boundary_integral(Interval(), -1.0, 0.0, 0.5)

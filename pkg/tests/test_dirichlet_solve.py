import numpy as np
import pytest

from fraclap.dirichlet_solve import (EllipticProblem, ParabolicProblem, bin_averages,
                                     green_function, heat_kernel, operator_for, solve_elliptic,
                                     solve_parabolic, weak_residual)
from fraclap.domain_geom import HalfLine, Interval, graded_grid
from fraclap.fraclap_op import GridFunction, getoor_constant, getoor_profile
from fraclap.verify_harness import bump


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_getoor_solution(alpha):
    g = graded_grid(Interval(), 256)
    f = GridFunction(g, np.full(g.size, getoor_constant(alpha)))
    u = solve_elliptic(EllipticProblem(alpha, 0.0, f))
    assert np.max(np.abs(u.values - getoor_profile(alpha, g.nodes))) < 2e-2


def test_green_function_properties():
    g = graded_grid(Interval(), 96)
    prev = None
    for lam in (0.0, 1.0, 10.0, 100.0):
        G = green_function(g, 1.0, lam)
        assert G.asymmetry() == 0.0
        assert G.values.min() >= -1e-14
        if prev is not None:
            assert np.all(G.values <= prev.values + 1e-14)
        prev = G


def test_green_apply_matches_solve():
    g = graded_grid(Interval(), 96)
    f = GridFunction(g, bump(g.nodes, 0.2, 0.4))
    u = solve_elliptic(EllipticProblem(1.0, 1.0, f))
    assert np.allclose(u.values, -green_function(g, 1.0, 1.0).apply(f))


def test_heat_kernel_sub_markov():
    g = graded_grid(Interval(), 96)
    op = operator_for(g, 1.0)
    H = heat_kernel(op, np.array([0.1, 0.5, 2.0]))
    mass = (H * g.weights[None, None, :]).sum(-1)
    assert np.all(H >= -1e-12)
    assert np.all(mass <= 1.0 + 1e-10)
    assert np.all(np.diff(mass, axis=0) < 0)
    assert np.allclose(H[1], H[1].T)


def test_parabolic_zero_data_stays_zero():
    g = graded_grid(Interval(), 32)
    tr = solve_parabolic(ParabolicProblem(1.0, 1.0, GridFunction(g, np.zeros(g.size))), 10)
    assert np.all(tr.values == 0.0)


def test_parabolic_converges_to_elliptic_steady_state():
    g = graded_grid(Interval(), 64)
    # du/dt = A u + 1 settles at the solution of A u = -1
    f = np.ones(g.size)
    tr = solve_parabolic(ParabolicProblem(1.0, 20.0, GridFunction(g, np.zeros(g.size)),
                                          f=lambda t: f), 400, "euler")
    u = solve_elliptic(EllipticProblem(1.0, 0.0, GridFunction(g, -f)))
    assert np.max(np.abs(tr.final.values - u.values)) < 1e-6


def test_euler_and_cn_agree():
    g = graded_grid(Interval(), 64)
    u0 = GridFunction(g, bump(g.nodes, 0.0, 0.5))
    a = solve_parabolic(ParabolicProblem(1.0, 1.0, u0), 2000, "euler").final.values
    b = solve_parabolic(ParabolicProblem(1.0, 1.0, u0), 200, "cn").final.values
    assert np.max(np.abs(a - b)) < 1e-3 * np.max(np.abs(b)) + 1e-6


def test_weak_residual_small_for_cn():
    g = graded_grid(Interval(), 128)
    u0 = GridFunction(g, bump(g.nodes, 0.0, 0.5))
    tr = solve_parabolic(ParabolicProblem(1.0, 0.5, u0), 128, "cn")
    r = weak_residual(tr, u0, None, lambda x: float(bump(x, 0.1, 0.6)), 1.0)
    assert r < 1e-3


def test_bin_averages_of_linear_function():
    g = graded_grid(Interval(), 64)
    v = 0.3 + 0.2 * g.nodes
    edges = np.linspace(-0.5, 0.5, 5)
    centers = 0.5 * (edges[1:] + edges[:-1])
    assert np.allclose(bin_averages(g, v, edges), 0.3 + 0.2 * centers, atol=1e-12)


def test_problem_validation():
    g = graded_grid(Interval(), 16)
    f = GridFunction(g, np.ones(16))
    with pytest.raises(ValueError):
        EllipticProblem(1.0, -1.0, f)
    with pytest.raises(ValueError):
        ParabolicProblem(1.0, 0.0, f)
    with pytest.raises(ValueError):
        solve_parabolic(ParabolicProblem(1.0, 1.0, f), 0)
    with pytest.raises(ValueError):
        solve_parabolic(ParabolicProblem(1.0, 1.0, f), 4, scheme="rk4")
    with pytest.raises(ValueError):
        EllipticProblem(2.0, 0.0, f)


def test_truncated_halfline_lambda_zero_allowed():
    g = graded_grid(HalfLine(), 64, truncation=8.0)
    u = solve_elliptic(EllipticProblem(1.0, 0.0, GridFunction(g, -bump(g.nodes, 1.0, 0.5))))
    assert np.all(u.values >= -1e-12)

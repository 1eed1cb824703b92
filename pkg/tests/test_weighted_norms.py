import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fraclap.domain_geom import Ball, Interval, graded_grid
from fraclap.fraclap_op import GridFunction
from fraclap.verify_harness import bump
from fraclap.weighted_norms import (HolderSpec, WeightSpec, besov_seminorm, fit_boundary_decay,
                                    refinement_study, spacetime_lp_norm, weighted_holder_norm,
                                    weighted_lp_norm, weighted_sobolev_norm, write_norm_table)

G = graded_grid(Interval(), 256)
RHO = G.rho


def gf(values, grid=G):
    return GridFunction(grid, np.asarray(values, dtype=float))


def test_constant_norm():
    # int_{-1}^{1} rho^0 dx = 2
    assert weighted_lp_norm(gf(np.ones(G.size)), WeightSpec(2, 1.0)) == pytest.approx(math.sqrt(2), rel=1e-6)


def test_power_profile_norm():
    # int rho dx = 1 on (-1, 1)
    v = weighted_lp_norm(gf(np.sqrt(RHO)), WeightSpec(2, 1.0))
    assert v == pytest.approx(1.0, rel=1e-3)


def test_disk_constant_norm():
    g = graded_grid(Ball((0.0, 0.0), 1.0), 256)
    v = weighted_lp_norm(gf(np.ones(g.size), g), WeightSpec(2, 2.0))
    assert v ** 2 == pytest.approx(math.pi, rel=1e-3)


def test_boundary_divergence_detected():
    u = gf(np.ones(G.size))
    assert math.isinf(weighted_lp_norm(u, WeightSpec(2, -0.02)))
    assert math.isfinite(weighted_lp_norm(u, WeightSpec(2, 0.02)))


def _sqrt_rho_norm(n, spec):
    g = graded_grid(Interval(), n)
    return weighted_lp_norm(gf(np.sqrt(g.rho), g), spec)


def test_near_critical_weight_refinement_stable():
    # |psi^{-1/2} rho^{1/2}|^2 rho^{-0.98} is integrable but only barely
    res = refinement_study(lambda n: _sqrt_rho_norm(n, WeightSpec(2, 0.02, -0.5)), (128, 256, 512))
    assert not res.divergent
    assert abs(res.ratio - 1) < 0.01


def test_spec_validation():
    with pytest.raises(ValueError):
        WeightSpec(1.0, 1.0)
    with pytest.raises(ValueError):
        HolderSpec(0.0)
    with pytest.raises(ValueError):
        HolderSpec(1.5)


_coef = st.floats(-3, 3, allow_nan=False)


@settings(max_examples=30, deadline=None)
@given(a=_coef, b=_coef, c=_coef, p=st.sampled_from([2.0, 3.0]), theta=st.sampled_from([0.6, 1.0, 1.4]))
def test_norm_axioms(a, b, c, p, theta):
    spec = WeightSpec(p, theta)
    u = bump(G.nodes, -0.3, 0.5)
    v = bump(G.nodes, 0.4, 0.4) * np.sin(3 * G.nodes)
    nu, nv = weighted_lp_norm(gf(u), spec), weighted_lp_norm(gf(v), spec)
    assert weighted_lp_norm(gf(c * u), spec) == pytest.approx(abs(c) * nu, rel=1e-10, abs=1e-14)
    assert weighted_lp_norm(gf(a * u + b * v), spec) <= abs(a) * nu + abs(b) * nv + 1e-12


@pytest.mark.parametrize("a", [-0.5, 0.5, 1.0])
def test_weight_shift_comparability(a):
    # ||psi^a u||_{p,theta} is comparable to ||u||_{p,theta+a p} because psi ~ rho
    u = gf(np.sqrt(RHO) * bump(G.nodes, 0.0, 1.2))
    for p, theta in ((2.0, 1.0), (3.0, 1.4)):
        lhs = weighted_lp_norm(u, WeightSpec(p, theta, a))
        rhs = weighted_lp_norm(u, WeightSpec(p, theta + a * p))
        assert 0.2 < lhs / rhs < 5


def test_spacetime_norm_of_constant_rows():
    times = np.linspace(0, 2, 11)
    rows = np.ones((11, G.size))
    v = spacetime_lp_norm(times, rows, WeightSpec(2, 1.0), G)
    assert v == pytest.approx(math.sqrt(2 * 2), rel=1e-6)


def test_sobolev_norm_converges():
    vals = []
    for n in (256, 512):
        g = graded_grid(Interval(), n)
        vals.append(weighted_sobolev_norm(gf(np.sqrt(g.rho) * bump(g.nodes, 0, 1.5), g), 1,
                                          WeightSpec(2, 1.0)))
    assert abs(vals[1] / vals[0] - 1) < 0.05


def test_besov_seminorm_finite_and_stable():
    vals = []
    for n in (128, 256):
        g = graded_grid(Interval(), n)
        vals.append(besov_seminorm(gf(np.sqrt(g.rho), g), 0.4, WeightSpec(2, 1.0)))
    assert all(math.isfinite(v) for v in vals)
    assert abs(vals[1] / vals[0] - 1) < 0.05


def test_besov_rejects_inadmissible_exponents():
    with pytest.raises(ValueError):
        besov_seminorm(gf(np.ones(G.size)), 0.1, WeightSpec(2, -0.3))


def test_holder_of_constant_and_linear():
    assert weighted_holder_norm(gf(np.ones(G.size)), HolderSpec(0.5)) == pytest.approx(1.0)
    lin = weighted_holder_norm(gf(G.nodes), HolderSpec(1.0))
    assert lin == pytest.approx(2.0, rel=1e-2)


def test_holder_pairwise_form_available():
    u = gf(np.sqrt(RHO))
    prod = weighted_holder_norm(u, HolderSpec(0.5, 0.25))
    pair = weighted_holder_norm(u, HolderSpec(0.5, 0.25), form="pairwise")
    assert math.isfinite(prod) and math.isfinite(pair)
    with pytest.raises(ValueError):
        weighted_holder_norm(u, HolderSpec(0.5), form="other")


@pytest.mark.parametrize("k", [0.3, 0.5, 0.75])
def test_decay_fit(k):
    g = graded_grid(Interval(), 512)
    u = gf(g.rho ** k, g)
    assert fit_boundary_decay(u, (1e-3, 0.1)) == pytest.approx(k, abs=0.02)


def test_refinement_study_flags_growth():
    res = refinement_study(lambda n: float(n), (1, 2, 4))
    assert res.divergent and res.ratio == 2.0
    res = refinement_study(lambda n: 1.0, (1, 2, 4))
    assert not res.divergent


def test_write_norm_table(tmp_path):
    path = tmp_path / "norms.csv"
    write_norm_table(path, [("lp", 2, 1, 0, 1.5, 1.0, False)])
    rows = list(csv.reader(open(path)))
    assert rows[0][0] == "norm_kind" and rows[1][-1] == "0"


def test_known_boundary_exponent_overrides_fit():
    # a profile that is flat on the grid but known to vanish like rho^{1/4} below it
    u = gf(np.ones(G.size))
    spec = WeightSpec(3.0, 0.6, -0.25)
    assert math.isinf(weighted_lp_norm(u, spec))
    assert math.isfinite(weighted_lp_norm(u, spec, boundary_exponent=0.25))


def test_spacetime_norm_skips_initial_row():
    times = np.linspace(0, 1, 5)
    rows = np.ones((5, G.size))
    rows[0] = 0.0
    spec = WeightSpec(2, 1.0)
    full = spacetime_lp_norm(times, rows, spec, G)
    skip = spacetime_lp_norm(times, rows, spec, G, skip_initial=True)
    assert skip == pytest.approx(math.sqrt(2.0), rel=1e-6)
    assert full < skip

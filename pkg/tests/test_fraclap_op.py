import math
import warnings

import numpy as np
import pytest

from fraclap import fraclap_op as fo
from fraclap.dirichlet_solve import operator_for
from fraclap.domain_geom import HalfLine, Interval, graded_grid


def test_getoor_constant_values():
    assert fo.getoor_constant(1.0) == pytest.approx(-1.0)
    assert fo.getoor_constant(1.0, 2) == pytest.approx(-math.pi / 2)
    # 2^a Gamma(1+a/2) Gamma((1+a)/2) / Gamma(1/2) for d = 1
    a = 0.5
    ref = 2 ** a * math.gamma(1 + a / 2) * math.gamma((1 + a) / 2) / math.sqrt(math.pi)
    assert fo.getoor_constant(a) == pytest.approx(-ref)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_apply_pv_getoor_profile(alpha):
    c = fo.getoor_constant(alpha)
    for x in np.linspace(-0.9, 0.9, 5):
        v = fo.apply_pv(lambda y: float(fo.getoor_profile(alpha, y)), alpha, x, kinks=(-1.0, 1.0))
        assert v == pytest.approx(c, abs=1e-3)


def test_apply_pv_matches_spectral_reference():
    g = fo.uniform_grid(20.0, 1024)
    u = fo.GridFunction(g, np.exp(-g.nodes ** 2))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        ref = fo.spectral_reference(u, 1.0)
    for j in np.searchsorted(g.nodes, [0.0, 0.5, 1.3]):
        x = g.nodes[j]
        assert fo.apply_pv(lambda y: math.exp(-y * y), 1.0, x) == pytest.approx(ref.values[j], abs=1e-8)


def test_apply_pv_of_constant_is_zero_derivative_free():
    # for u = 1 on R the operator vanishes
    assert fo.apply_pv(lambda y: 1.0, 1.0, 0.3) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_operator_symmetric_negative_definite(alpha):
    g = graded_grid(Interval(), 96)
    op = operator_for(g, alpha)
    assert np.allclose(op.matrix, op.matrix.T)
    assert np.max(np.linalg.eigvalsh(op.symmetric_form())) < 0


def test_operator_on_truncated_halfline():
    g = graded_grid(HalfLine(), 96, truncation=16.0)
    op = operator_for(g, 1.0)
    assert np.max(np.linalg.eigvalsh(op.symmetric_form())) < 0


def test_exterior_killing_positive():
    k = fo.exterior_killing(Interval(), np.array([0.0, 0.5, 0.99]), 1.0)
    assert np.all(k > 0) and k[2] > k[1] > k[0]


def test_gridfunction_validation():
    g = graded_grid(Interval(), 16)
    with pytest.raises(ValueError):
        fo.GridFunction(g, np.zeros(15))
    with pytest.raises(ValueError):
        fo.GridFunction(g, np.full(16, np.nan))
    u = fo.GridFunction(g, np.ones(16))
    assert (2 * u - u).max_abs() == 1.0

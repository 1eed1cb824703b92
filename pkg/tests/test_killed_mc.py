import numpy as np
import pytest
from scipy import stats

from fraclap import killed_mc as km
from fraclap.domain_geom import Ball, Interval


def _rng(seed=1):
    return np.random.default_rng(seed)


def test_cauchy_increments():
    x = km.sample_stable_increment(1.0, 1.0, _rng(), size=20000)
    assert stats.kstest(x, "cauchy").pvalue > 1e-3


@pytest.mark.parametrize("alpha", [0.5, 1.5])
def test_characteristic_function_1d(alpha):
    dt, xi, n = 0.5, 1.3, 40000
    x = km.sample_stable_increment(alpha, dt, _rng(2), size=n)
    emp = np.cos(xi * x).mean()
    assert abs(emp - np.exp(-dt * xi ** alpha)) < 4 / np.sqrt(n)


def test_characteristic_function_2d():
    n = 40000
    X = km.sample_stable_increment(1.0, 1.0, _rng(3), size=n, dim=2)
    assert X.shape == (n, 2)
    assert abs(np.cos(X @ np.array([0.6, 0.8])).mean() - np.exp(-1.0)) < 4 / np.sqrt(n)


def test_simulation_independent_of_worker_count():
    cfg = km.MCConfig(7, 40000, 1e-2, 20.0, Interval(), 1.0)
    a = km.simulate_killed_paths(cfg, 0.0, workers=1)
    b = km.simulate_killed_paths(cfg, 0.0, workers=3)
    assert np.array_equal(a.exit_times, b.exit_times)


def test_survival_curve_non_increasing():
    cfg = km.MCConfig(5, 5000, 1e-2, 10.0, Interval(), 1.0)
    s = km.simulate_killed_paths(cfg, 0.0)
    surv, err = km.survival_curve(s, np.linspace(0, 3, 31))
    assert surv[0] == 1.0
    assert np.all(np.diff(surv) <= 0)
    assert np.all(err >= 0)


def test_skeleton_bias_shrinks_toward_oracle():
    # the skeleton misses excursions, so E tau is overestimated and decreases with dt
    means = []
    for dt in (4e-2, 2.5e-3):
        cfg = km.MCConfig(7, 20000, dt, 60.0, Interval(), 1.0)
        means.append(km.mean_exit_time(km.simulate_killed_paths(cfg, 0.0)))
    (m0, s0), (m1, s1) = means
    assert m0 - m1 > 3 * np.hypot(s0, s1)
    assert abs(m1 - 1.0) < 3 * s1 + 0.01


def test_ball_exit_radial_law_from_centre():
    B = Ball((0.0, 0.0), 1.0)
    y = km.ball_exit_sample(B, np.zeros(2), _rng(4), 1.0, size=5000)
    r = np.linalg.norm(y, axis=1)
    assert stats.kstest(r, lambda s: km.ball_exit_radial_cdf(1.0, 1.0, s)).pvalue > 1e-3


def test_ball_exit_lands_outside():
    B = Ball((0.0, 0.0), 1.0)
    y = km.ball_exit_sample(B, np.array([0.5, 0.0]), _rng(5), 1.0, size=2000)
    assert np.all(np.linalg.norm(y, axis=1) >= 1.0)


def test_density_estimate_normalisation():
    cfg = km.MCConfig(11, 20000, 1e-3, 0.25, Interval(), 1.0)
    edges = np.linspace(-1, 1, 21)
    est = km.estimate_transition_density(cfg, 0.0, 0.25, edges)
    s = km.simulate_killed_paths(cfg, 0.0)
    surv, _ = km.survival_curve(s, [0.25])
    assert (est.estimates * est.widths).sum() == pytest.approx(surv[0], abs=1e-12)


@pytest.mark.parametrize("kw", [dict(n_paths=0), dict(dt=0.0), dict(seed=-1), dict(alpha=2.0)])
def test_config_validation(kw):
    base = dict(seed=1, n_paths=10, dt=1e-2, t_max=1.0, domain=Interval(), alpha=1.0)
    base.update(kw)
    with pytest.raises(ValueError):
        km.MCConfig(**base)

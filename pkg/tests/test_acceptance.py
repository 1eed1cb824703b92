"""Acceptance criteria 1-10, one PASS/FAIL line each at the stated tolerances.

Criteria 4 (growth part), 5 and 6 are expected to fail: the quantities
they test are finite and refinement-stable, or are bounded but not flat,
so the requested behaviour does not occur. See the decisions ledger.
"""
import math
import time

import numpy as np
import pytest

from acceptance_log import record
from fraclap import stable_kernel as sk
from fraclap.dirichlet_solve import EllipticProblem, solve_elliptic
from fraclap.domain_geom import Interval, graded_grid
from fraclap.fraclap_op import GridFunction, apply_pv
from fraclap.verify_harness import (SweepConfig, emit_report, function_bank, run_check,
                                    run_decay_holder_checks, run_kernel_bound_sweep,
                                    run_mc_consistency, run_operator_bound_sweep,
                                    run_roundtrip_and_residual, run_sharpness_demo)

pytestmark = pytest.mark.slow

ALPHAS = (0.5, 1.0, 1.5)


def _criteria(rep, names=None):
    crit = rep.criteria if names is None else {k: rep.criteria[k] for k in names}
    return all(crit.values()), ", ".join(f"{k}={'ok' if v else 'no'}" for k, v in crit.items())


def test_criterion_01_kernel_exactness():
    t0 = time.perf_counter()
    p0 = sk.density(1.0, 1.0, 0.0)
    e_cauchy = abs(p0 - 1 / math.pi)
    e_scale = max(abs(sk.scaling_check(a, d, t, x) - 1)
                  for a in ALPHAS for d in (1, 2, 3) for t in (0.01, 2.5, 100.0)
                  for x in (0.0, 0.7, 30.0))
    e_mass = max(abs(sk.total_mass(a, d) - 1) for a in ALPHAS for d in (1, 2, 3))
    el = time.perf_counter() - t0
    ok = e_cauchy <= 1e-8 and e_scale <= 1e-8 and e_mass <= 1e-6 and el < 30
    record(1, ok, f"|p(1,0)-1/pi|={e_cauchy:.1e} scaling={e_scale:.1e} mass={e_mass:.1e} "
                  f"time={el:.1f}s")
    assert ok


def test_criterion_02_getoor_chain():
    t0 = time.perf_counter()
    prof = lambda y: math.sqrt(max(1 - y * y, 0.0))  # noqa: E731
    xs = np.linspace(-0.95, 0.95, 10)
    e_pv = max(abs(apply_pv(prof, 1.0, x, kinks=(-1.0, 1.0)) + 1) for x in xs)
    errs = []
    for n in (64, 128, 256, 512):
        g = graded_grid(Interval(), n)
        u = solve_elliptic(EllipticProblem(1.0, 0.0, GridFunction(g, -np.ones(g.size))))
        errs.append(float(np.max(np.abs(u.values - np.sqrt(1 - g.nodes ** 2)))))
    mono = all(b < a for a, b in zip(errs, errs[1:]))
    el = time.perf_counter() - t0
    ok = e_pv <= 1e-3 and errs[-1] <= 1e-2 and mono and el < 60
    record(2, ok, f"pv err={e_pv:.1e} solve err@512={errs[-1]:.2e} ladder="
                  f"{'/'.join(f'{e:.1e}' for e in errs)} monotone={mono} time={el:.1f}s")
    assert ok


def test_criterion_03_roundtrip():
    t0 = time.perf_counter()
    bank = function_bank()[:5]
    worst = 0.0
    for alpha in ALPHAS:
        g = graded_grid(Interval(), 512)
        for _, w in bank:
            wv = w(g.nodes)
            Aw = np.array([apply_pv(lambda x: float(w(x)), alpha, x) for x in g.nodes])
            for lam in (0.0, 1.0, 10.0):
                u = solve_elliptic(EllipticProblem(alpha, lam, GridFunction(g, Aw - lam * wv)))
                worst = max(worst, float(np.max(np.abs(u.values - wv)) / np.max(np.abs(wv))))
    el = time.perf_counter() - t0
    ok = worst <= 1e-2 and el < 120
    record(3, ok, f"max relative error={worst:.2e} (5 bumps, lambda in 0/1/10, "
                  f"alpha in 0.5/1/1.5, 512 nodes) time={el:.1f}s")
    assert ok


def test_criterion_04_sharpness():
    t0 = time.perf_counter()
    rep = run_sharpness_demo(SweepConfig(check="sharpness", p_theta=((2.0, 1.0),)))
    el = time.perf_counter() - t0
    names = ["decay_fit", "stable_for_theta_d_0_and_0.5", "growth_10x_at_-0.99"]
    ok, txt = _criteria(rep, names)
    growth = [r for r in rep.stats.get("growth", []) if r["theta_minus_d"] == -0.99]
    gtxt = " ".join(f"a={r['alpha']}:x{r['growth']:.3f}" for r in growth)
    ok = ok and el < 300
    record(4, ok, f"{txt}; growth at -0.99 {gtxt}; time={el:.1f}s")
    assert ok


def test_criterion_05_lambda_T_uniformity():
    t0 = time.perf_counter()
    rep = run_operator_bound_sweep(SweepConfig(check="operator-bound"))
    el = time.perf_counter() - t0
    ok, txt = _criteria(rep, ["elliptic_lambda_spread", "parabolic_T_spread"])
    worst = {label: max(r["relative_spread"] for r in rep.stats[f"{label}_sup"])
             for label in ("elliptic", "parabolic", "initial")}
    wtxt = " ".join(f"{k}={v:.2f}" for k, v in worst.items())
    ok = ok and el < 600
    record(5, ok, f"{txt}; worst relative spreads {wtxt}; time={el:.1f}s")
    assert ok


def test_criterion_06_kernel_integrals():
    t0 = time.perf_counter()
    rep = run_kernel_bound_sweep(SweepConfig(check="kernel-bound"))
    el = time.perf_counter() - t0
    ok, txt = _criteria(rep, ["at_least_20_cases", "spread_within_threshold", "all_finite"])
    sp = [r["spread"] for r in rep.stats["group_spread"]]
    wtxt = (f"{rep.stats['admissible_cases']} admissible cases, group spreads "
            f"{min(sp):.3g} to {max(sp):.3g}")
    ok = ok and el < 300
    record(6, ok, f"{txt}; {wtxt}; time={el:.1f}s")
    assert ok


def test_criterion_07_monte_carlo():
    t0 = time.perf_counter()
    rep = run_mc_consistency(SweepConfig(check="mc-consistency", alpha=(1.0,)))
    el = time.perf_counter() - t0
    ok, txt = _criteria(rep)
    m = next(c for c in rep.cases if c.params.get("kind") == "mean_exit_time")
    ok = ok and el < 600
    record(7, ok, f"{txt}; E0 tau={m.ratio:.4f}+-{m.params['std_err']:.4f}; time={el:.1f}s")
    assert ok


def test_criterion_08_weak_solution():
    t0 = time.perf_counter()
    rep = run_roundtrip_and_residual(SweepConfig(check="roundtrip"), roundtrip_ladder=())
    el = time.perf_counter() - t0
    keys = [k for k in rep.criteria if k.startswith(("manufactured", "residual"))]
    ok, _ = _criteria(rep, keys)
    err = max(c.ratio for c in rep.cases if c.params["kind"] == "manufactured_error")
    rat = min(c.ratio for c in rep.cases if c.params["kind"] == "residual_ratio")
    ok = ok and el < 300
    record(8, ok, f"manufactured max error={err:.2e} min residual ratio={rat:.2f}; time={el:.1f}s")
    assert ok


def test_criterion_09_holder_decay():
    t0 = time.perf_counter()
    rep = run_decay_holder_checks(SweepConfig(check="decay-holder"))
    el = time.perf_counter() - t0
    ok, txt = _criteria(rep)
    ratios = [c.ratio for c in rep.cases
              if str(c.params["kind"]).endswith("refinement_ratio") and not c.informational]
    ok = ok and el < 300
    record(9, ok, f"{txt}; refinement ratios in [{min(ratios):.3f}, {max(ratios):.3f}]; "
                  f"time={el:.1f}s")
    assert ok


def test_criterion_10_determinism(tmp_path):
    same = []
    for cfg in (SweepConfig(check="decay-holder", alpha=(1.0,), ladder=(128, 256)),
                SweepConfig(check="mc-consistency", alpha=(1.0,), paths=20000, dt=1e-3)):
        out = []
        for k in range(2):
            d = tmp_path / f"{cfg.check}-{k}"
            emit_report(run_check(cfg), d, "csv")
            out.append((d / f"{cfg.check}.csv").read_bytes())
        same.append(out[0] == out[1])
    ok = all(same)
    record(10, ok, f"byte-identical reruns: decay-holder={same[0]} mc-consistency={same[1]}")
    assert ok

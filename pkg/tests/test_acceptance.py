"""Acceptance checks, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line with the measured values and
then asserts.  Monte Carlo criteria use fixed seeds so reruns are identical.
Run with ``pytest tests/test_acceptance.py -v``.
"""

import warnings

import numpy as np
import pytest

from conftest import random_panel
from pahy.grids import TickSeries, build_panel, empirical_time_transform
from pahy.hy import hy_matrix, hy_naive_oracle, prepare
from pahy.inference import optimal_theta, parametric_variance
from pahy.kernel import get_kernel, kappa_constants
from pahy.mc import Tuning, run_mc
from pahy.preavg import window_size
from pahy.sim import SCENARIOS, SvModelParams, apply_scheme, calibrate, make_rng, ma1_shocks
from pahy.variance import gamma_functions, var_plugin, var_subsample, var_univariate

CALIBRATION_REPS = 10_000


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")


@pytest.fixture(scope="module")
def scenario_runs():
    """Calibrated Monte Carlo runs shared by the Table 1 and CLT criteria."""
    out = {}
    for sc in (1, 2):
        scheme = SCENARIOS[sc]()
        table = calibrate(scheme, 0.15, "triangle", "ceil", CALIBRATION_REPS, 1.0, seed=100 + sc)
        out[sc] = (table, run_mc(scheme, SvModelParams(), Tuning(), 500, 2024, table))
    table = out[2][0]
    out["clt"] = run_mc(SCENARIOS[2](), SvModelParams(), Tuning(), 1000, 7, table)
    return out


def test_1_kernel_constants(capsys):
    k, kc = get_kernel("triangle"), kappa_constants("triangle")
    got = np.array([kc.kappa, kc.kappa_bar, kc.kappa_tilde])
    want = np.array([7585 / 1161216, 151 / 20160, 1 / 24])
    rel = np.abs(got / want - 1)
    ok = k.psi == 0.25 and np.all(rel < 1e-4)
    report(capsys, 1, ok, f"psi={k.psi!r} kappa={got.tolist()} max rel err={rel.max():.2e}")
    assert ok


def test_2_optimal_theta(capsys):
    t = optimal_theta(1.0, 1.0)
    v = parametric_variance(t, 1.0, 1.0)
    ok = abs(t / 2.381 - 1) < 1e-2 and abs(v / 12.765 - 1) < 1e-2
    report(capsys, 2, ok, f"theta*={t:.5f} (2.381) min variance={v:.5f} (12.765)")
    assert ok


def test_3_oracle_equivalence(capsys):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        p = random_panel(rng, int(rng.integers(1, 4)), n_max=30, n_min=3)
        k = int(rng.integers(2, min(s.n for s in p.series) + 1))
        worst = max(worst, float(np.max(np.abs(hy_matrix(p, None, k).raw - hy_naive_oracle(p, None, k).raw))))
    ok = worst < 1e-12
    report(capsys, 3, ok, f"max abs diff over 100 panels = {worst:.2e}")
    assert ok


def _pure_noise_means(ma_coef, reps=1000):
    scheme = SCENARIOS[1]()
    idx_panel = apply_scheme(np.zeros((2, scheme.N + 1)), scheme)
    k_n = window_size(idx_panel.n_total, 0.15, "ceil")
    draws = np.empty((reps, 2, 2))
    for rep in range(reps):
        rng = make_rng(31, rep, 0)
        series = [TickSeries(s.times, ma1_shocks(rng, s.times.size, ma_coef)) for s in idx_panel.series]
        draws[rep] = hy_matrix(build_panel(series, warn_boundary=False), None, k_n).raw
    mean = draws.mean(axis=0)
    se = draws.std(axis=0, ddof=1) / np.sqrt(reps)
    return mean / se


def test_4_unbiased_under_noise(capsys):
    z_iid = _pure_noise_means(0.0)
    z_ma = _pure_noise_means(0.5)
    ok = bool(np.all(np.abs(z_iid) < 3) and np.all(np.abs(z_ma) < 3))
    fmt = lambda z: [round(float(z[i, j]), 2) for i, j in ((0, 0), (0, 1), (1, 1))]
    report(capsys, 4, ok, f"mean/SE iid={fmt(z_iid)} MA(1)={fmt(z_ma)} (need |.|<3)")
    assert ok


def test_5_consistency_rate(capsys):
    sigma, psi, theta, reps = 1.0, 1e-3, 0.5, 500
    rmse = []
    for n in (2500, 10_000, 40_000):
        k = window_size(n, theta)
        t = np.linspace(0.0, 1.0, n + 1)
        err = np.empty(reps)
        for rep in range(reps):
            rng = make_rng(55, rep, n)
            x = np.concatenate(([0.0], np.cumsum(rng.normal(0.0, sigma / np.sqrt(n), n))))
            y = x + rng.normal(0.0, np.sqrt(psi), n + 1)
            err[rep] = hy_matrix(build_panel([(t, y)]), None, k).raw[0, 0] - sigma**2
        rmse.append(float(np.sqrt(np.mean(err**2))))
    ratios = [rmse[0] / rmse[1], rmse[1] / rmse[2]]
    ok = rmse[0] > rmse[1] > rmse[2] and all(1.15 <= r <= 1.75 for r in ratios)
    report(capsys, 5, ok, f"rmse={np.round(rmse, 5).tolist()} ratios={np.round(ratios, 3).tolist()}")
    assert ok


def test_6_table_one(capsys, scenario_runs):
    _, r2 = scenario_runs[2]
    _, r1 = scenario_runs[1]
    bias_ok = all(0.98 <= b <= 1.02 for b in r2.bias.values())
    rmse12 = r2.rmse["Sigma12"]
    rmse_ok = 0.05 <= rmse12 <= 0.09
    s1 = r1.rmse
    order_ok = s1["Sigma22"] > s1["Sigma11"] > s1["Sigma12"]
    ok = bias_ok and rmse_ok and order_ok
    fmt = lambda d: {k: round(v, 4) for k, v in d.items()}
    report(
        capsys,
        6,
        ok,
        f"scenario 2 bias={fmt(r2.bias)} [{'ok' if bias_ok else 'out'}], rmse={fmt(r2.rmse)} "
        f"rmse12 in [0.05,0.09]: {'ok' if rmse_ok else 'out'}; scenario 1 rmse={fmt(s1)} ordering: {'ok' if order_ok else 'out'}",
    )
    assert ok


def test_7_feasible_clt(capsys, scenario_runs):
    r = scenario_runs["clt"]
    mean, var = r.standardized_moments()
    cov = r.coverage["Sigma12"]
    ok = abs(mean) <= 0.15 and 0.8 <= var <= 1.25 and 0.91 <= cov <= 0.97
    report(capsys, 7, ok, f"reps={r.reps} mean={mean:.4f} variance={var:.4f} coverage={cov:.4f} refused={r.refused['Sigma12']}")
    assert ok


def test_8_variance_cross_consistency(capsys):
    n, theta, sigma, psi, reps = 10_000, 0.15, 1.0, 1e-3, 300
    k = window_size(n, theta)
    target = parametric_variance(k / np.sqrt(n), sigma, psi)
    t = np.linspace(0.0, 1.0, n + 1)
    vals = np.empty((reps, 3))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        for rep in range(reps):
            rng = make_rng(88, rep, 0)
            x = np.concatenate(([0.0], np.cumsum(rng.normal(0.0, sigma / np.sqrt(n), n))))
            panel = build_panel([(t, x + rng.normal(0.0, np.sqrt(psi), n + 1))])
            prep = prepare(panel, None, k)
            vals[rep] = [
                var_subsample(panel, None, k, prep=prep).tensor[0, 0, 0, 0],
                var_plugin(panel, None, None, k, prep=prep).tensor[0, 0, 0, 0],
                var_univariate(panel, None, k, prep=prep).tensor[0, 0, 0, 0],
            ]
    med = np.median(vals, axis=0) / target
    pairs = {
        "1/2": np.median(vals[:, 0] / vals[:, 1]),
        "1/3": np.median(vals[:, 0] / vals[:, 2]),
        "2/3": np.median(vals[:, 1] / vals[:, 2]),
    }
    ok = np.all(np.abs(med - 1) <= 0.25) and all(0.7 <= v <= 1.4 for v in pairs.values())
    report(
        capsys,
        8,
        ok,
        f"median/target (V1,V2,V3)={np.round(med, 3).tolist()} pairwise={ {k: round(float(v), 3) for k, v in pairs.items()} }",
    )
    assert ok


def test_9_gamma_reduction(capsys):
    panel = build_panel([(np.linspace(0, 1, 401), np.zeros(401))])
    tt = empirical_time_transform(panel)
    kappa = kappa_constants().kappa
    gam = np.array([gamma_functions(tt, None, u, 0, 0, 0, 0)[0] for u in np.linspace(0, 1, 21)])
    rel = float(np.max(np.abs(gam / kappa - 1)))
    scheme = SCENARIOS[2]()
    disjoint = empirical_time_transform(apply_scheme(np.zeros((2, scheme.N + 1)), scheme))
    zeros = [gamma_functions(disjoint, None, u, 0, 1, 1, 0)[1:] for u in (0.0, 0.5, 1.0)]
    zero_ok = all(g == 0.0 for pair in zeros for g in pair) and disjoint.m_joint(0, 1) == 0.0
    ok = rel < 1e-4 and zero_ok
    report(capsys, 9, ok, f"max rel |gamma/kappa - 1| on 21 points = {rel:.2e}; noise terms zero without joint points: {zero_ok}")
    assert ok

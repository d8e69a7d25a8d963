import json

import numpy as np
import pytest

from pahy.exceptions import ValidationError
from pahy.mc import TARGET_NAMES, TARGETS, Tuning, run_mc
from pahy.sim import SCENARIOS, SamplingScheme, SvModelParams, calibrate

SMALL = 4680


def test_requires_seed_and_calibration_choice():
    s = SCENARIOS[2](N=SMALL)
    with pytest.raises(ValidationError):
        run_mc(s, SvModelParams(N=SMALL), reps=2, seed=None, calibration=False)
    with pytest.raises(ValidationError):
        run_mc(s, SvModelParams(N=SMALL), reps=2, seed=1, calibration=None)
    with pytest.raises(ValidationError):
        run_mc(s, SvModelParams(N=SMALL), reps=0, seed=1, calibration=False)


def test_calibration_must_match_scheme():
    table = calibrate(SCENARIOS[1](N=SMALL), reps=100, seed=1)
    with pytest.raises(ValidationError):
        run_mc(SCENARIOS[2](N=SMALL), SvModelParams(N=SMALL), reps=2, seed=1, calibration=table)


def test_grid_mismatch_rejected():
    with pytest.raises(ValidationError):
        run_mc(SCENARIOS[2](N=SMALL), SvModelParams(), reps=2, seed=1, calibration=False)


def test_deterministic_and_thread_independent():
    s = SCENARIOS[3](N=SMALL)
    a = run_mc(s, SvModelParams(N=SMALL), reps=12, seed=4, calibration=False)
    b = run_mc(s, SvModelParams(N=SMALL), reps=12, seed=4, calibration=False, threads=2)
    assert json.dumps(a.to_dict(), sort_keys=True) == json.dumps(b.to_dict(), sort_keys=True)
    assert "runtime" not in a.to_dict() and "runtime" in a.to_dict(include_runtime=True)


def test_report_layout():
    s = SCENARIOS[2](N=SMALL)
    table = calibrate(s, reps=100, seed=1)
    r = run_mc(s, SvModelParams(N=SMALL), reps=20, seed=2, calibration=table)
    d = r.to_dict()
    assert set(d["table"]) == set(TARGET_NAMES)
    assert d["calibrated"] and len(d["standardized"]) == 20 - d["refused"]["Sigma12"]
    assert sum(d["histogram"]["counts"]) <= 20 and len(d["histogram"]["edges"]) == 51
    for (k, l), name in zip(TARGETS, TARGET_NAMES):
        assert np.isfinite(d["bias"][name]) and d["rmse"][name] > 0
        assert d["raw_bias"][name] == pytest.approx(d["bias"][name] * table.factors[k, l], rel=1e-12)


def test_noiseless_synchronous_constant_vol_sanity():
    s = SamplingScheme("subset", n1=SMALL, n2=SMALL, N=SMALL)
    p = SvModelParams(N=SMALL, beta1=0.0, beta0=0.0, gamma=0.0, drift=0.0)
    r = run_mc(s, p, Tuning(theta=0.5), reps=200, seed=3, calibration=calibrate(s, 0.5, reps=200, seed=9))
    for name in TARGET_NAMES:
        assert r.bias[name] == pytest.approx(1.0, abs=3 * r.rmse[name] / np.sqrt(200) + 1e-3)

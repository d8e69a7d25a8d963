"""Monte Carlo study: relative bias, RMSE, standardized statistics, coverage."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .exceptions import NumericalError, ValidationError
from .hy import hy_from_prepared, prepare
from .kernel import _as_kernel
from .preavg import window_size
from .sim import CalibrationTable, SamplingScheme, SvModelParams, simulate_panel
from .variance import var_subsample

logger = logging.getLogger(__name__)

TARGETS = ((0, 0), (0, 1), (1, 1))
TARGET_NAMES = ("Sigma11", "Sigma12", "Sigma22")


@dataclass(frozen=True)
class Tuning:
    theta: float = 0.15
    kernel: str = "triangle"
    kn_rule: str = "ceil"
    varpi: float = 1.0
    eta: float = 7.0 / 12.0
    level: float = 0.95
    entry: tuple = (0, 1)


@dataclass
class McReport:
    """Aggregated results of a Monte Carlo run.

    ``bias`` is the mean of estimate / truth (1 for an unbiased estimator),
    ``rmse`` the root mean squared error against each replication's realised
    integrated covariance.  ``raw_*`` are the same without calibration.
    """

    scheme: dict
    params: dict
    tuning: dict
    reps: int
    seed: int
    calibrated: bool
    bias: dict
    rmse: dict
    raw_bias: dict
    raw_rmse: dict
    coverage: dict
    refused: dict
    standardized: list
    histogram: dict
    failures: list = field(default_factory=list)
    runtime: float = 0.0

    def standardized_moments(self):
        z = np.asarray(self.standardized)
        return float(np.mean(z)), float(np.var(z, ddof=1))

    def to_dict(self, include_runtime=False):
        out = {k: v for k, v in asdict(self).items() if k != "runtime"}
        mean, var = self.standardized_moments() if len(self.standardized) > 1 else (float("nan"), float("nan"))
        out["standardized_mean"] = mean
        out["standardized_variance"] = var
        out["table"] = {
            name: {"bias": self.bias[name], "rmse": self.rmse[name]} for name in TARGET_NAMES
        }
        if include_runtime:
            out["runtime"] = self.runtime
        return out


def _one_rep(args):
    rep, params, scheme, tuning, seed, factors, ma_coef, convention = args
    kernel = _as_kernel(tuning.kernel)
    panel, paths = simulate_panel(params, scheme, seed, rep, ma_coef, convention)
    k_n = window_size(panel.n_total, tuning.theta, tuning.kn_rule)
    prep = prepare(panel, kernel, k_n)
    est = hy_from_prepared(prep, kernel.name, factors)
    var = var_subsample(panel, kernel, k_n, tuning.varpi, tuning.eta, prep=prep, calibration=factors)
    vdiag = np.array([[var.tensor[k, l, k, l] for l in range(2)] for k in range(2)])
    return {
        "rep": rep,
        "raw": est.raw,
        "est": est.matrix,
        "truth": paths.integrated,
        "vdiag": vdiag,
        "n": panel.n_total,
        "k_n": k_n,
    }


def _safe_rep(args):
    try:
        return _one_rep(args)
    except (ValidationError, NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        return {"rep": args[0], "error": f"{type(exc).__name__}: {exc}"}


def run_mc(scheme, params=None, tuning=None, reps=500, seed=None, calibration=None, threads=1, ma_coef=0.0, convention="increment"):
    """Run ``reps`` replications and aggregate them.

    ``calibration`` is a :class:`CalibrationTable`, or ``False`` to disable bias
    correction explicitly.  Replications are independent and seeded by index,
    so ``threads`` does not change the result.
    """
    if seed is None:
        raise ValidationError("an explicit seed is required")
    if reps < 1:
        raise ValidationError(f"reps must be positive, got {reps}")
    if calibration is None:
        raise ValidationError("pass a calibration table or calibration=False")
    params = params or SvModelParams(N=scheme.N)
    tuning = tuning or Tuning()
    if params.N != scheme.N:
        raise ValidationError(f"model grid N={params.N} differs from scheme grid N={scheme.N}")
    factors = None
    if calibration is not False:
        calibration.check(scheme, tuning.theta, _as_kernel(tuning.kernel).name, tuning.kn_rule)
        factors = calibration.factors

    t0 = time.perf_counter()
    jobs = [(rep, params, scheme, tuning, int(seed), factors, ma_coef, convention) for rep in range(reps)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_safe_rep, jobs, chunksize=max(1, reps // (4 * threads))))
    else:
        results = [_safe_rep(job) for job in jobs]
    results.sort(key=lambda r: r["rep"])
    failures = [r for r in results if "error" in r]
    if len(failures) > 0.01 * reps:
        raise NumericalError(f"{len(failures)} of {reps} replications failed", {"failures": failures[:10]})
    ok = [r for r in results if "error" not in r]

    est = np.array([r["est"] for r in ok])
    raw = np.array([r["raw"] for r in ok])
    truth = np.array([r["truth"] for r in ok])
    vdiag = np.array([r["vdiag"] for r in ok])
    nobs = np.array([r["n"] for r in ok], dtype=float)
    z_crit = stats.norm.ppf(0.5 + tuning.level / 2)

    bias, rmse, raw_bias, raw_rmse, coverage, refused = {}, {}, {}, {}, {}, {}
    for (k, l), name in zip(TARGETS, TARGET_NAMES):
        tr = truth[:, k, l]
        bias[name] = float(np.mean(est[:, k, l] / tr))
        rmse[name] = float(np.sqrt(np.mean((est[:, k, l] - tr) ** 2)))
        raw_bias[name] = float(np.mean(raw[:, k, l] / tr))
        raw_rmse[name] = float(np.sqrt(np.mean((raw[:, k, l] - tr) ** 2)))
        v = vdiag[:, k, l]
        good = v > 0
        refused[name] = int((~good).sum())
        half = z_crit * np.sqrt(v[good]) * nobs[good] ** -0.25
        coverage[name] = float(np.mean(np.abs(est[good, k, l] - tr[good]) <= half)) if good.any() else float("nan")

    k, l = tuning.entry
    v = vdiag[:, k, l]
    good = v > 0
    z = nobs[good] ** 0.25 * (est[good, k, l] - truth[good, k, l]) / np.sqrt(v[good])
    counts, edges = np.histogram(z, bins=50, range=(-4.0, 4.0))
    histogram = {"edges": edges.tolist(), "counts": counts.tolist(), "entry": list(tuning.entry)}

    return McReport(
        scheme=scheme.to_dict(),
        params=params.to_dict(),
        tuning=asdict(tuning),
        reps=reps,
        seed=int(seed),
        calibrated=factors is not None,
        bias=bias,
        rmse=rmse,
        raw_bias=raw_bias,
        raw_rmse=raw_rmse,
        coverage=coverage,
        refused=refused,
        standardized=z.tolist(),
        histogram=histogram,
        failures=failures,
        runtime=time.perf_counter() - t0,
    )

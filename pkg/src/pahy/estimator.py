"""Estimator object in the scikit-learn style."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import ValidationError
from .grids import Panel, TickSeries, build_panel, empirical_time_transform
from .hy import hy_from_prepared, prepare
from .inference import confidence_region, standardize
from .kernel import _as_kernel
from .preavg import KN_RULES, window_size
from .variance import PLUGIN, SUBSAMPLE, UNIVARIATE, var_plugin, var_subsample, var_univariate


def check_panel(X, warn_boundary=True):
    """Coerce ``X`` into a :class:`Panel`.

    Accepts a panel, a single :class:`TickSeries`, a long-format DataFrame
    with columns ``asset, time, value``, or a list of series or
    ``(times, values)`` pairs.
    """
    if isinstance(X, Panel):
        return X
    if isinstance(X, TickSeries):
        return Panel((X,))
    if hasattr(X, "groupby") and hasattr(X, "columns"):
        missing = {"asset", "time", "value"} - set(X.columns)
        if missing:
            raise ValidationError(f"DataFrame is missing columns {sorted(missing)}")
        items = [
            TickSeries(g["time"].to_numpy(float), g["value"].to_numpy(float), str(name))
            for name, g in X.groupby("asset", sort=False)
        ]
        return build_panel(items, warn_boundary)
    if isinstance(X, (list, tuple)) and X:
        return build_panel(X, warn_boundary)
    raise ValidationError(f"cannot interpret input of type {type(X).__name__} as tick data")


def check_calibration(calibration, d):
    if calibration is None:
        return None
    factors = np.asarray(getattr(calibration, "factors", calibration), dtype=float)
    if factors.shape != (d, d):
        raise ValidationError(f"calibration shape {factors.shape} does not match d = {d}")
    if not np.all(np.isfinite(factors)) or np.any(factors == 0):
        raise ValidationError("calibration factors must be finite and non-zero")
    return factors


class PreAveragedHY(BaseEstimator):
    """Pre-averaged Hayashi-Yoshida covariance estimator.

    Parameters
    ----------
    theta : float, default=0.15
        Window constant; ``k_n`` follows from ``theta * sqrt(n)``.
    kernel : str, default="triangle"
        Registered weight function.
    kn_rule : {"ceil", "round"}, default="ceil"
    k_n : int, optional
        Fixed window size; overrides ``theta``.
    calibration : array_like or CalibrationTable, optional
        Entrywise factors dividing the raw estimate.
    joint_tolerance : float, default=0.0
        Tolerance for matching joint observation times.

    Attributes
    ----------
    covariance_ : ndarray of shape (d, d)
    raw_covariance_ : ndarray of shape (d, d)
    k_n_ : int
    n_ : int
        Pooled number of intervals.
    """

    def __init__(self, theta=0.15, kernel="triangle", kn_rule="ceil", k_n=None, calibration=None, joint_tolerance=0.0):
        self.theta = theta
        self.kernel = kernel
        self.kn_rule = kn_rule
        self.k_n = k_n
        self.calibration = calibration
        self.joint_tolerance = joint_tolerance

    def _validate_params(self):
        if self.kn_rule not in KN_RULES:
            raise ValidationError(f"kn_rule must be one of {KN_RULES}, got {self.kn_rule!r}")
        if self.k_n is None and not (self.theta is not None and self.theta > 0):
            raise ValidationError(f"theta must be positive, got {self.theta}")
        if self.joint_tolerance < 0:
            raise ValidationError("joint_tolerance must be non-negative")

    def fit(self, X, y=None):
        """Estimate the integrated covariance of the panel ``X``."""
        self._validate_params()
        panel = check_panel(X)
        kernel = _as_kernel(self.kernel)
        k_n = int(self.k_n) if self.k_n is not None else window_size(panel.n_total, self.theta, self.kn_rule)
        factors = check_calibration(self.calibration, panel.d)
        self.panel_ = panel
        self.kernel_ = kernel
        self.prep_ = prepare(panel, kernel, k_n)
        self.estimate_ = hy_from_prepared(self.prep_, kernel.name, factors)
        self.calibration_ = factors
        self.covariance_ = self.estimate_.matrix
        self.raw_covariance_ = self.estimate_.raw
        self.k_n_ = k_n
        self.n_ = panel.n_total
        self.n_features_in_ = panel.d
        return self

    def variance(self, method=SUBSAMPLE, **kwargs):
        """Variance tensor by ``"subsample"``, ``"plugin"`` or ``"univariate"``."""
        check_is_fitted(self, "covariance_")
        if method == SUBSAMPLE:
            return var_subsample(self.panel_, self.kernel_, self.k_n_, prep=self.prep_, calibration=self.calibration_, **kwargs)
        if method == PLUGIN:
            tt = empirical_time_transform(self.panel_, self.joint_tolerance)
            return var_plugin(self.panel_, tt, self.kernel_, self.k_n_, prep=self.prep_, calibration=self.calibration_, **kwargs)
        if method == UNIVARIATE:
            return var_univariate(self.panel_, self.kernel_, self.k_n_, prep=self.prep_, **kwargs)
        raise ValidationError(f"unknown variance method {method!r}")

    def confidence_region(self, level=0.95, method=SUBSAMPLE, joint=False, **kwargs):
        V = self.variance(method, **kwargs)
        return confidence_region(self.estimate_, V, self.n_, level, joint)

    def standardize(self, target, method=SUBSAMPLE, **kwargs):
        V = self.variance(method, **kwargs)
        return standardize(self.estimate_, target, V, self.n_)

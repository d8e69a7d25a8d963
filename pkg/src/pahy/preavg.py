"""Window-size rule and pre-averaging in tick time."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ValidationError
from .kernel import _as_kernel

KN_RULES = ("round", "ceil")


def window_size(n, theta, rule="round"):
    """Pre-averaging window ``k_n`` from the pooled sample size.

    ``rule="round"`` rounds half up, ``rule="ceil"`` takes the ceiling of
    ``theta * sqrt(n)``.  The result is never below 2.
    """
    if not theta > 0:
        raise ValidationError(f"theta must be positive, got {theta}")
    if n < 4:
        raise ValidationError(f"need n >= 4 observations, got {n}")
    raw = theta * math.sqrt(n)
    if rule == "round":
        k = math.floor(raw + 0.5)
    elif rule == "ceil":
        k = math.ceil(raw)
    else:
        raise ValidationError(f"kn rule must be one of {KN_RULES}, got {rule!r}")
    return max(int(k), 2)


def preaverage_weights(k_n, kernel=None):
    kernel = _as_kernel(kernel)
    return kernel.g(np.arange(1, k_n) / k_n)


@dataclass(frozen=True, eq=False)
class PreAveraged:
    """Pre-averaged values of one asset, indexed by window start ``i``."""

    values: np.ndarray
    k_n: int
    kernel_name: str

    @property
    def start(self):
        return np.arange(self.values.size)


def preaverage_values(values, k_n, kernel=None):
    """Array form of :func:`preaverage` on raw observation values."""
    values = np.asarray(values, dtype=float)
    n = values.size - 1
    if k_n < 2:
        raise ValidationError(f"k_n must be at least 2, got {k_n}")
    if k_n > n:
        raise ValidationError(f"window k_n={k_n} exceeds the {n} available increments")
    w = preaverage_weights(k_n, kernel)
    return np.correlate(np.diff(values), w, mode="valid")


def preaverage(series, k_n, kernel=None):
    """Weighted sums of ``k_n - 1`` consecutive increments.

    Returns one value per window start ``i = 0, ..., n_k - k_n + 1``:
    ``sum_{j=1}^{k_n-1} g(j / k_n) * (Y_{i+j} - Y_{i+j-1})``.
    """
    kernel = _as_kernel(kernel)
    return PreAveraged(preaverage_values(series.values, k_n, kernel), k_n, kernel.name)

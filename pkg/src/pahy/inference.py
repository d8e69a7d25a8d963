"""Feasible inference: vec-stacking, standardization, confidence intervals.

Also holds the closed-form variance for constant volatility on an
equidistant grid and the window constant that minimizes it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from .exceptions import DomainError, NumericalError, ValidationError
from .kernel import _as_kernel, kappa_constants

EIGEN_FLOOR = 1e-12


def vec_stack(matrix):
    """Stack the columns of a square matrix below one another."""
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {m.shape}")
    return m.reshape(-1, order="F")


def unstack(vector):
    """Inverse of :func:`vec_stack`."""
    v = np.asarray(vector)
    d = math.isqrt(v.size)
    if d * d != v.size:
        raise ValidationError(f"length {v.size} is not a perfect square")
    return v.reshape((d, d), order="F")


def vec_index(k, l, d):
    """Position of entry ``(k, l)`` in the stacked vector."""
    return l * d + k


@dataclass
class StandardizedStats:
    values: np.ndarray
    method: str = "eigh"
    condition: float = float("nan")
    floored: list = field(default_factory=list)

    def to_dict(self):
        return {
            "values": self.values.tolist(),
            "method": self.method,
            "condition": self.condition,
            "floored": self.floored,
        }


def _inverse_sqrt(mat, floor=EIGEN_FLOOR):
    sym = 0.5 * (mat + mat.T)
    w, q = np.linalg.eigh(sym)
    scale = max(float(np.max(np.abs(w))), 1.0)
    # Tiny negatives are rounding; anything clearly below zero is a real failure.
    bad = w < -1e-8 * scale
    if bad.any():
        raise NumericalError(
            f"variance matrix is not positive definite; eigenvalues {w[bad].tolist()}",
            {"eigenvalues": w.tolist()},
        )
    low = w < floor
    if low.any():
        warnings.warn(
            f"{int(low.sum())} eigenvalue(s) below {floor:g} were floored; the variance is ill-conditioned",
            RuntimeWarning,
            stacklevel=3,
        )
    wf = np.maximum(w, floor)
    return (q / np.sqrt(wf)) @ q.T, float(wf.max() / wf.min()), np.flatnonzero(low).tolist()


def standardize(hy, target, V, n=None):
    """Compute ``n**0.25 * V**(-1/2) * (vec(HY) - vec(target))``.

    Parameters
    ----------
    hy : CovEstimate or array_like
    target : array_like
        ``d x d`` matrix, usually the true or hypothesised covariance.
    V : VarianceTensor or array_like
        Either a tensor object or a ``d**2 x d**2`` matrix in stacked order.
    n : int, optional
        Pooled observation count; taken from ``V`` when omitted.

    Notes
    -----
    For a symmetric estimate the stacked matrix repeats each off-diagonal
    row, so it is singular when ``d > 1``.  The floor keeps the inverse
    square root finite and a warning reports it.  Use
    :func:`standardize_entry` for a single coordinate.
    """
    est = np.asarray(getattr(hy, "matrix", hy), dtype=float)
    mat = V.vec if hasattr(V, "vec") else np.asarray(V, dtype=float)
    n = getattr(V, "n", None) if n is None else n
    if n is None or n <= 0:
        raise ValidationError("a positive observation count n is required")
    diff = vec_stack(est - np.asarray(target, dtype=float))
    if mat.shape != (diff.size, diff.size):
        raise ValidationError(f"variance shape {mat.shape} does not match d**2 = {diff.size}")
    root, cond, floored = _inverse_sqrt(mat)
    z = n**0.25 * root @ diff
    if not np.all(np.isfinite(z)):
        raise NumericalError("standardized statistic is not finite", {"z": z.tolist()})
    return StandardizedStats(z, "eigh", cond, floored)


def standardize_entry(hy, target, V, k, l, n=None):
    """Scalar standardized statistic for entry ``(k, l)``."""
    est = np.asarray(getattr(hy, "matrix", hy), dtype=float)
    v = V.entry_variance(k, l) if hasattr(V, "entry_variance") else float(V)
    n = getattr(V, "n", None) if n is None else n
    if not v > 0:
        raise NumericalError(f"variance of entry ({k}, {l}) is not positive: {v}", {"variance": v})
    return n**0.25 * (est[k, l] - np.asarray(target, dtype=float)[k, l]) / math.sqrt(v)


@dataclass
class ConfidenceRegion:
    """Entrywise intervals; refused entries have NaN bounds."""

    lower: np.ndarray
    upper: np.ndarray
    level: float
    refused: list = field(default_factory=list)
    joint: dict | None = None

    def to_dict(self):
        def clean(a):
            return [[None if not np.isfinite(x) else float(x) for x in row] for row in a]

        out = {"level": self.level, "lower": clean(self.lower), "upper": clean(self.upper), "refused": [list(r) for r in self.refused]}
        if self.joint is not None:
            out["joint"] = self.joint
        return out


def confidence_region(hy, V, n=None, level=0.95, joint=False):
    """Intervals ``HY_kl +/- z * sqrt(V_kl,kl) * n**(-1/4)``.

    Entries with a flagged or non-positive variance are refused.  With
    ``joint=True`` the chi-square radius for the ellipsoid over the
    distinct entries is reported as well.
    """
    if not 0.0 <= level < 1.0:
        raise ValidationError(f"level must lie in [0, 1), got {level}")
    est = np.asarray(getattr(hy, "matrix", hy), dtype=float)
    n = getattr(V, "n", None) if n is None else n
    if n is None or n <= 0:
        raise ValidationError("a positive observation count n is required")
    tensor = V.tensor if hasattr(V, "tensor") else np.asarray(V, dtype=float)
    d = est.shape[0]
    z = stats.norm.ppf(0.5 + level / 2.0)
    lower = np.full((d, d), np.nan)
    upper = np.full((d, d), np.nan)
    refused = []
    for k in range(d):
        for l in range(d):
            v = tensor[k, l, k, l]
            flagged = hasattr(V, "is_flagged") and V.is_flagged(k, l)
            if flagged or not v > 0:
                refused.append((k, l))
                continue
            half = z * math.sqrt(v) * n**-0.25
            lower[k, l], upper[k, l] = est[k, l] - half, est[k, l] + half
    info = None
    if joint:
        idx = [(k, l) for k in range(d) for l in range(k, d)]
        info = {"entries": [list(e) for e in idx], "radius": float(stats.chi2.ppf(level, len(idx)))}
    return ConfidenceRegion(lower, upper, level, refused, info)


def parametric_variance(theta, sigma, Psi, kernel=None):
    """Asymptotic variance for constant volatility on an equidistant grid.

    ``(2/psi**4) * (theta*kappa*sigma**4 + 2*Psi*kappa_bar*sigma**2/theta
    + Psi**2*kappa_tilde/theta**3)``
    """
    if not theta > 0 or not sigma > 0:
        raise DomainError(f"theta and sigma must be positive, got {theta}, {sigma}")
    if Psi < 0:
        raise DomainError(f"Psi must be non-negative, got {Psi}")
    kernel = _as_kernel(kernel)
    kc = kappa_constants(kernel)
    return (2.0 / kernel.psi**4) * (
        theta * kc.kappa * sigma**4 + 2.0 * Psi * kc.kappa_bar * sigma**2 / theta + Psi**2 * kc.kappa_tilde / theta**3
    )


def optimal_theta(sigma, Psi, kernel=None, rtol=1e-6):
    """Window constant minimizing :func:`parametric_variance`."""
    if not Psi > 0:
        raise DomainError("Psi must be positive for an interior minimum")
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    kernel = _as_kernel(kernel)
    # Work on theta / scale with scale = sqrt(Psi)/sigma so the bracket is fixed.
    scale = math.sqrt(Psi) / sigma
    res = optimize.minimize_scalar(
        lambda x: parametric_variance(x * scale, sigma, Psi, kernel),
        bracket=(0.1, 1.0, 50.0),
        method="golden",
        tol=rtol,
    )
    return float(res.x * scale)

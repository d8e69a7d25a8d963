"""Pre-averaged Hayashi-Yoshida covariance estimator.

For assets ``k`` and ``l`` the estimator sums products of pre-averaged values
whose windows ``(t_i^k, t_{i+k_n}^k]`` and ``(t_j^l, t_{j+k_n}^l]`` intersect,
scaled by ``1 / (psi * k_n)**2``.  The last window of each asset would end at
``t_{n_k+1}``, which does not exist; its right end is taken as ``t_{n_k}``.

Because both window endpoint sequences are non-decreasing, the windows of
asset ``l`` that meet window ``i`` of asset ``k`` form a contiguous index
range.  The fast path finds the range by binary search and sums it through a
cumulative sum, so a pair costs ``O((n_k + n_l) log n)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ValidationError
from .kernel import _as_kernel
from .preavg import preaverage_values


def window_edges(times, k_n):
    """Left and right ends of every pre-averaging window of one grid."""
    n = times.size - 1
    m = n - k_n + 2
    start = times[:m]
    end = times[np.minimum(np.arange(m) + k_n, n)]
    return start, end


@dataclass(eq=False)
class PreparedPanel:
    """Pre-averaged values and window edges of every asset for fixed ``k_n``."""

    ybar: list
    start: list
    end: list
    k_n: int
    scale: float
    n: int

    @property
    def d(self):
        return len(self.ybar)

    def overlap_ranges(self, k, l, t_max=None):
        """Half-open index ranges ``[lo, hi)`` of grid-``l`` windows meeting each grid-``k`` window."""
        lo = np.searchsorted(self.end[l], self.start[k], side="right")
        hi = np.searchsorted(self.start[l], self.end[k], side="left")
        if t_max is not None:
            hi = np.minimum(hi, np.searchsorted(self.end[l], t_max, side="right"))
        return lo, np.maximum(hi, lo)

    def contributions(self, k, l, t_max=None):
        """Per-window terms ``c_i`` with ``HY_kl = sum_i c_i``.

        With ``t_max`` only grid-``l`` windows ending at or before ``t_max``
        enter the inner sum; the caller restricts ``i``.
        """
        lo, hi = self.overlap_ranges(k, l, t_max)
        cs = np.concatenate(([0.0], np.cumsum(self.ybar[l])))
        return self.scale * self.ybar[k] * (cs[hi] - cs[lo])


def prepare(panel, kernel=None, k_n=None):
    kernel = _as_kernel(kernel)
    if k_n is None:
        raise ValidationError("k_n is required")
    k_n = int(k_n)
    smallest = min(s.n for s in panel.series)
    if k_n > smallest:
        raise ValidationError(f"window k_n={k_n} exceeds the smallest grid size {smallest}")
    ybar, start, end = [], [], []
    for s in panel.series:
        ybar.append(preaverage_values(s.values, k_n, kernel))
        a, b = window_edges(s.times, k_n)
        start.append(a)
        end.append(b)
    return PreparedPanel(ybar, start, end, k_n, 1.0 / (kernel.psi * k_n) ** 2, panel.n_total)


@dataclass
class CovEstimate:
    """Estimated integrated covariance matrix.

    ``matrix`` holds the (optionally calibrated) estimate, ``raw`` the value
    before calibration.  ``theta`` is the effective ``k_n / sqrt(n)``.
    """

    matrix: np.ndarray
    raw: np.ndarray
    k_n: int
    n: int
    theta: float
    kernel: str
    calibration: np.ndarray | None = None
    overlap_counts: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def d(self):
        return self.matrix.shape[0]

    def to_dict(self):
        out = {
            "matrix": self.matrix.tolist(),
            "raw": self.raw.tolist(),
            "k_n": self.k_n,
            "n": self.n,
            "theta_effective": self.theta,
            "kernel": self.kernel,
            "calibration": None if self.calibration is None else self.calibration.tolist(),
        }
        if self.overlap_counts is not None:
            out["overlap_counts"] = self.overlap_counts.tolist()
        return out


def apply_calibration(est, factors):
    """Divide an estimate entrywise by calibration ``factors``."""
    factors = np.asarray(factors, dtype=float)
    if factors.shape != est.raw.shape:
        raise ValidationError(f"calibration shape {factors.shape} does not match estimate {est.raw.shape}")
    est.matrix = est.raw / factors
    est.calibration = factors
    return est


def hy_from_prepared(prep, kernel_name="", calibration=None):
    d = prep.d
    raw = np.zeros((d, d))
    counts = np.zeros((d, d), dtype=np.int64)
    for k in range(d):
        for l in range(d):
            lo, hi = prep.overlap_ranges(k, l)
            cs = np.concatenate(([0.0], np.cumsum(prep.ybar[l])))
            raw[k, l] = prep.scale * float(np.dot(prep.ybar[k], cs[hi] - cs[lo]))
            counts[k, l] = int(np.sum(hi - lo))
    est = CovEstimate(
        matrix=raw.copy(),
        raw=raw,
        k_n=prep.k_n,
        n=prep.n,
        theta=prep.k_n / np.sqrt(prep.n),
        kernel=kernel_name,
        overlap_counts=counts,
    )
    if calibration is not None:
        apply_calibration(est, calibration)
    return est


def hy_matrix(panel, kernel=None, k_n=None, calibration=None):
    """Pre-averaged Hayashi-Yoshida estimate of the integrated covariance.

    Parameters
    ----------
    panel : Panel
    kernel : Kernel or str, optional
    k_n : int
        Window size shared by all assets.
    calibration : array_like, optional
        Multiplicative factors; the returned ``matrix`` is ``raw / calibration``.
    """
    kernel = _as_kernel(kernel)
    return hy_from_prepared(prepare(panel, kernel, k_n), kernel.name, calibration)


def hy_naive_oracle(panel, kernel=None, k_n=None):
    """Direct double loop over all window pairs, for testing only."""
    kernel = _as_kernel(kernel)
    k_n = int(k_n)
    d = panel.d
    if k_n < 2 or k_n > min(s.n for s in panel.series):
        raise ValidationError(f"invalid window k_n={k_n}")
    weights = [float(kernel.g(np.array(j / k_n))) for j in range(1, k_n)]
    pre, spans = [], []
    for s in panel.series:
        y, t, n = s.values.tolist(), s.times.tolist(), s.n
        vals, sp = [], []
        for i in range(n - k_n + 2):
            acc = 0.0
            for j in range(1, k_n):
                acc += weights[j - 1] * (y[i + j] - y[i + j - 1])
            vals.append(acc)
            sp.append((t[i], t[min(i + k_n, n)]))
        pre.append(vals)
        spans.append(sp)
    out = np.zeros((d, d))
    counts = np.zeros((d, d), dtype=np.int64)
    for k in range(d):
        for l in range(d):
            total = 0.0
            for yi, (a, b) in zip(pre[k], spans[k]):
                for yj, (c, e) in zip(pre[l], spans[l]):
                    if max(a, c) < min(b, e):
                        total += yi * yj
                        counts[k, l] += 1
            out[k, l] = total / (kernel.psi * k_n) ** 2
    return CovEstimate(out, out.copy(), k_n, panel.n_total, k_n / np.sqrt(panel.n_total), kernel.name, None, counts)


def hy_block(panel, kernel, k_n, k, l, block, prep=None):
    """Entry ``(k, l)`` restricted to windows of asset ``k`` starting in ``[a, b)``."""
    a, b = block
    if not 0.0 <= a <= b <= 1.0:
        raise ValidationError(f"block must satisfy 0 <= a <= b <= 1, got {block}")
    prep = prep or prepare(panel, kernel, k_n)
    start = prep.start[k]
    mask = (start >= a) & (start < b)
    if not mask.any():
        return 0.0
    return float(np.sum(prep.contributions(k, l)[mask]))


def block_sums(prep, k, l, edges):
    """Entry ``(k, l)`` summed separately over consecutive blocks ``[e_a, e_{a+1})``."""
    start = prep.start[k]
    idx = np.searchsorted(edges, start, side="right") - 1
    keep = (idx >= 0) & (idx < edges.size - 1)
    c = prep.contributions(k, l)
    return np.bincount(idx[keep], weights=c[keep], minlength=edges.size - 1)


def hy_partial(panel, kernel, k_n, t, prep=None):
    """Estimate over ``[0, t]``: only windows ending at or before ``t`` are used."""
    if not 0.0 < t <= 1.0:
        raise ValidationError(f"t must lie in (0, 1], got {t}")
    prep = prep or prepare(panel, kernel, k_n)
    return _partial_from_prepared(prep, t)


def _partial_from_prepared(prep, t):
    d = prep.d
    out = np.zeros((d, d))
    for k in range(d):
        keep = prep.end[k] <= t
        if not keep.any():
            continue
        for l in range(d):
            out[k, l] = float(np.sum(prep.contributions(k, l, t_max=t)[keep]))
    return out

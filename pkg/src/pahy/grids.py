"""Tick data containers, validation and empirical time transforms.

Observation times are assumed normalised to ``[0, 1]``.  Asset ``k`` has
``n_k + 1`` observations at ``t_0 < ... < t_{n_k}``, so ``n_k`` counts
intervals, and the pooled size is ``n = sum(n_k)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import BoundaryWarning, ValidationError


@dataclass(frozen=True, eq=False)
class TickSeries:
    """Observation times and values of one asset."""

    times: np.ndarray
    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        times = np.ascontiguousarray(self.times, dtype=float)
        values = np.ascontiguousarray(self.values, dtype=float)
        label = self.name or "<unnamed>"
        if times.ndim != 1 or values.shape != times.shape:
            raise ValidationError(
                f"asset {label}: times and values must be 1-d of equal length, "
                f"got {times.shape} and {values.shape}"
            )
        if times.size < 2:
            raise ValidationError(f"asset {label}: need at least two observations")
        bad = np.flatnonzero(~np.isfinite(times))
        if bad.size:
            raise ValidationError(f"asset {label}: non-finite time at index {bad[0]}")
        bad = np.flatnonzero(np.isnan(values))
        if bad.size:
            raise ValidationError(f"asset {label}: NaN value at index {bad[0]}")
        bad = np.flatnonzero((times < 0.0) | (times > 1.0))
        if bad.size:
            raise ValidationError(
                f"asset {label}: time {times[bad[0]]!r} at index {bad[0]} outside [0, 1]"
            )
        bad = np.flatnonzero(np.diff(times) <= 0.0)
        if bad.size:
            raise ValidationError(
                f"asset {label}: times not strictly increasing at index {bad[0] + 1}"
            )
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def n(self):
        """Number of observation intervals."""
        return self.times.size - 1

    @property
    def covers_unit_interval(self):
        return self.times[0] == 0.0 and self.times[-1] == 1.0


@dataclass(frozen=True, eq=False)
class Panel:
    """``d`` tick series observed on their own grids."""

    series: tuple

    def __post_init__(self):
        object.__setattr__(self, "series", tuple(self.series))
        if not self.series:
            raise ValidationError("panel needs at least one asset")

    @property
    def d(self):
        return len(self.series)

    @property
    def n_total(self):
        return sum(s.n for s in self.series)

    @property
    def sizes(self):
        return np.array([s.n for s in self.series])

    @property
    def m(self):
        """Observation shares ``n_k / n``."""
        return self.sizes / self.n_total

    @property
    def names(self):
        return [s.name or str(k) for k, s in enumerate(self.series)]


def build_panel(series_list, warn_boundary=True):
    """Validate a list of series into a :class:`Panel`.

    Each element may be a :class:`TickSeries`, a ``(times, values)`` pair or a
    ``(name, times, values)`` triple.  Grids that do not start at 0 or end at 1
    trigger a :class:`BoundaryWarning` but are accepted.
    """
    out = []
    for k, item in enumerate(series_list):
        if isinstance(item, TickSeries):
            ts = item
        elif len(item) == 2:
            ts = TickSeries(np.asarray(item[0]), np.asarray(item[1]), name=str(k))
        elif len(item) == 3:
            ts = TickSeries(np.asarray(item[1]), np.asarray(item[2]), name=str(item[0]))
        else:
            raise ValidationError(f"asset {k}: cannot interpret {type(item).__name__} as a series")
        if warn_boundary and not ts.covers_unit_interval:
            warnings.warn(
                f"asset {ts.name or k}: grid spans [{ts.times[0]}, {ts.times[-1]}], not [0, 1]",
                BoundaryWarning,
                stacklevel=2,
            )
        out.append(ts)
    return Panel(tuple(out))


def read_ticks_csv(path, normalize_time=False):
    """Read long-format ``asset,time,value`` CSV into a :class:`Panel`.

    Asset order follows first appearance.  With ``normalize_time`` the pooled
    time range is mapped affinely onto ``[0, 1]``.
    """
    import pandas as pd

    try:
        df = pd.read_csv(path, dtype={"asset": str}, float_precision="round_trip")
    except (OSError, pd.errors.ParserError) as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    missing = {"asset", "time", "value"} - set(df.columns)
    if missing:
        raise ValidationError(f"{path}: missing columns {sorted(missing)}")
    t = pd.to_numeric(df["time"], errors="coerce").to_numpy(dtype=float)
    if normalize_time:
        lo, hi = np.nanmin(t), np.nanmax(t)
        if not hi > lo:
            raise ValidationError(f"{path}: cannot normalise a degenerate time range")
        t = (t - lo) / (hi - lo)
    df = df.assign(time=t)
    series = []
    for name in pd.unique(df["asset"]):
        sub = df[df["asset"] == name]
        series.append(
            TickSeries(sub["time"].to_numpy(dtype=float), pd.to_numeric(sub["value"], errors="coerce").to_numpy(dtype=float), name=str(name))
        )
    return build_panel(series)


def write_ticks_csv(panel, path):
    import pandas as pd

    frames = [
        pd.DataFrame({"asset": name, "time": s.times, "value": s.values})
        for name, s in zip(panel.names, panel.series)
    ]
    pd.concat(frames, ignore_index=True).to_csv(path, index=False, float_format="%.17g")


def match_times(a, b, tol=0.0):
    """Indices ``(ia, ib)`` of common points of two sorted grids.

    With ``tol > 0`` points closer than ``tol`` are matched by a single merge
    pass; ``tol`` must be below half the smallest spacing of either grid.
    """
    if tol == 0.0:
        _, ia, ib = np.intersect1d(a, b, assume_unique=True, return_indices=True)
        return ia, ib
    for grid in (a, b):
        if grid.size > 1 and np.min(np.diff(grid)) <= 2 * tol:
            raise ValidationError(
                f"joint tolerance {tol} merges neighbouring points into a zero-length interval"
            )
    ia, ib = [], []
    i = j = 0
    while i < a.size and j < b.size:
        diff = a[i] - b[j]
        if abs(diff) <= tol:
            ia.append(i)
            ib.append(j)
            i += 1
            j += 1
        elif diff < 0:
            i += 1
        else:
            j += 1
    return np.array(ia, dtype=int), np.array(ib, dtype=int)


@dataclass(frozen=True, eq=False)
class JointGrid:
    """Common points of grids ``k`` and ``l`` with back-indices into each."""

    times: np.ndarray
    idx_k: np.ndarray
    idx_l: np.ndarray

    @property
    def count(self):
        return self.times.size


def _smoothed_slope(times, levels, x, window):
    """Secant slope of the interpolant ``times -> levels`` over ``window`` intervals."""
    n = times.size - 1
    window = min(max(window, 1), n)
    i = np.clip(np.searchsorted(times, x, side="right") - 1, 0, n - 1)
    lo = np.clip(i - window // 2, 0, n - window)
    hi = lo + window
    return (levels[hi] - levels[lo]) / (times[hi] - times[lo])


@dataclass(frozen=True, eq=False)
class TimeTransform:
    """Empirical time-change maps of a panel and of its pairwise joint grids.

    ``f(k, x)`` interpolates ``(t_i^k, i / n_k)`` linearly and ``f_prime(k, x)``
    is its slope smoothed over ``ceil(sqrt(n_k))`` intervals.  Joint-grid
    counterparts use the same construction on the common points.
    """

    panel: Panel
    joint: dict
    n: int
    joint_tolerance: float = 0.0
    min_joint: int = 10
    _windows: tuple = field(default=(), repr=False)

    @property
    def d(self):
        return self.panel.d

    @property
    def m(self):
        return self.panel.m

    def m_joint(self, k, l):
        # Intervals between joint points, matching the n_k convention.
        return max(self.joint[(k, l)].count - 1, 0) / self.n if k != l else self.m[k]

    @property
    def m_joint_matrix(self):
        d = self.d
        return np.array([[self.m_joint(k, l) for l in range(d)] for k in range(d)])

    def joint_count(self, k, l):
        return self.joint[(k, l)].count if k != l else self.panel.series[k].n

    def _levels(self, k):
        s = self.panel.series[k]
        return np.arange(s.n + 1) / s.n

    def f(self, k, x):
        s = self.panel.series[k]
        return np.interp(x, s.times, self._levels(k))

    def f_prime_raw(self, k):
        """Unsmoothed slope on each interval of grid ``k``."""
        s = self.panel.series[k]
        return (1.0 / s.n) / np.diff(s.times)

    def f_prime(self, k, x):
        s = self.panel.series[k]
        return _smoothed_slope(s.times, self._levels(k), np.asarray(x, dtype=float), self._windows[k])

    def joint_reliable(self, k, l):
        return k == l or self.joint[(k, l)].count >= self.min_joint

    def f_prime_joint(self, k, l, x):
        """Smoothed derivative of ``f_kl``; zero when the joint grid is too sparse."""
        if k == l:
            return self.f_prime(k, x)
        jg = self.joint[(k, l)]
        x = np.asarray(x, dtype=float)
        if jg.count < self.min_joint:
            return np.zeros_like(x)
        nkl = jg.count - 1
        window = math.ceil(math.sqrt(nkl))
        return _smoothed_slope(jg.times, np.arange(jg.count) / nkl, x, window)

    def h(self, k, l, x):
        """``m_k f'_k(x) / (m_l f'_l(x))``."""
        return (self.m[k] * self.f_prime(k, x)) / (self.m[l] * self.f_prime(l, x))


def empirical_time_transform(panel, joint_tolerance=0.0, min_joint=10):
    """Estimate ``f_k``, ``f'_k`` and the joint-grid structure of a panel."""
    if joint_tolerance < 0:
        raise ValidationError(f"joint_tolerance must be non-negative, got {joint_tolerance}")
    joint = {}
    d = panel.d
    for k in range(d):
        for l in range(d):
            if l < k:
                jg = joint[(l, k)]
                joint[(k, l)] = JointGrid(jg.times, jg.idx_l, jg.idx_k)
                continue
            a = panel.series[k].times
            if k == l:
                idx = np.arange(a.size)
                joint[(k, l)] = JointGrid(a, idx, idx)
                continue
            ia, ib = match_times(a, panel.series[l].times, joint_tolerance)
            joint[(k, l)] = JointGrid(a[ia], ia, ib)
    windows = tuple(math.ceil(math.sqrt(s.n)) for s in panel.series)
    return TimeTransform(panel, joint, panel.n_total, joint_tolerance, min_joint, windows)


def joint_points(tt, k, l):
    """Common points of grids ``k`` and ``l`` as ``(p, t, i_k, i_l)`` tuples."""
    jg = tt.joint[(k, l)]
    return [(p, float(t), int(i), int(j)) for p, (t, i, j) in enumerate(zip(jg.times, jg.idx_k, jg.idx_l))]


@dataclass(frozen=True)
class GridDiagnostics:
    """Comparability diagnostics of a panel's sampling grids.

    Attributes
    ----------
    comparability_bound : float
        Smallest ``M`` with ``1/M <= f'_k <= M`` over all smoothed slopes.
    interleaving : ndarray
        ``[k, l]`` is the largest number of grid-``l`` points in one closed
        grid-``k`` interval.
    m_joint : ndarray
        Joint-point shares ``n_kl / n``.
    boundary_ok : list of bool
        Whether each grid starts at 0 and ends at 1.
    """

    comparability_bound: float
    interleaving: np.ndarray
    m_joint: np.ndarray
    boundary_ok: list


def grid_diagnostics(tt):
    panel = tt.panel
    d = panel.d
    bound = 1.0
    for k, s in enumerate(panel.series):
        fp = tt.f_prime(k, s.times)
        bound = max(bound, float(np.max(fp)), float(1.0 / np.min(fp)))
    inter = np.zeros((d, d), dtype=int)
    for k, sk in enumerate(panel.series):
        for l, sl in enumerate(panel.series):
            lo = np.searchsorted(sl.times, sk.times[:-1], side="left")
            hi = np.searchsorted(sl.times, sk.times[1:], side="right")
            inter[k, l] = int(np.max(hi - lo))
    return GridDiagnostics(bound, inter, tt.m_joint_matrix, [s.covers_unit_interval for s in panel.series])

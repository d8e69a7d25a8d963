"""Asymptotic-variance estimators for the pre-averaged Hayashi-Yoshida matrix.

Three routes are provided:

* :func:`var_subsample` compares block-wise estimates on neighbouring time
  blocks and needs no knowledge of the sampling design or the noise law.
* :func:`var_plugin` integrates the limiting variance with spot volatility,
  noise covariance and the ``gamma`` functionals plugged in.
* :func:`var_univariate` is the one-dimensional closed form built from a
  pre-averaged realized quarticity.

All of them return a :class:`VarianceTensor` ``V[k, l, k', l']`` for the
statistic ``n**0.25 * (HY - [X])``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from .exceptions import ValidationError
from .grids import empirical_time_transform
from .hy import _partial_from_prepared, block_sums, hy_from_prepared, prepare
from .kernel import GG, GGP, GPGP, _as_kernel, kappa_constants, overlap_product_integral

logger = logging.getLogger(__name__)

SUBSAMPLE = "subsample"
PLUGIN = "plugin"
UNIVARIATE = "univariate"


@dataclass
class VarianceTensor:
    """Four-index conditional covariance ``V[k, l, k', l']``.

    ``flags`` lists entries ``(k, l)`` whose diagonal variance ``V[k, l, k, l]``
    is negative or non-finite; confidence intervals refuse them.
    """

    tensor: np.ndarray
    method: str
    n: int
    flags: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def d(self):
        return self.tensor.shape[0]

    @property
    def vec(self):
        """``d**2 x d**2`` matrix indexed by column-stacked positions."""
        d = self.d
        return self.tensor.transpose(1, 0, 3, 2).reshape(d * d, d * d)

    def entry_variance(self, k, l):
        return float(self.tensor[k, l, k, l])

    def is_flagged(self, k, l):
        return (k, l) in self.flags

    def to_dict(self):
        return {
            "method": self.method,
            "n": self.n,
            "vec_matrix": self.vec.tolist(),
            "diagonal": [[self.entry_variance(k, l) for l in range(self.d)] for k in range(self.d)],
            "flags": [list(f) for f in self.flags],
            "meta": self.meta,
        }


def _flag_diagonal(tensor):
    d = tensor.shape[0]
    return [(k, l) for k in range(d) for l in range(d) if not tensor[k, l, k, l] >= 0.0]


def _calibrate_tensor(tensor, calibration):
    if calibration is None:
        return tensor
    r = np.asarray(calibration, dtype=float)
    return tensor / np.einsum("kl,mn->klmn", r, r)


@dataclass
class NoiseCov:
    """Noise covariance estimate with joint-point counts per pair."""

    matrix: np.ndarray
    counts: np.ndarray
    flags: list = field(default_factory=list)


def noise_cov(panel, tt=None):
    """Estimate the noise covariance from increments around common points.

    Entry ``(k, l)`` averages ``-dY^k_{i} * dY^l_{j+1}`` over joint points with
    ``t_i^k = t_j^l``, where ``dY_i = Y_i - Y_{i-1}``.  Points lacking either
    increment are skipped and the sum is divided by the number of terms used.
    Pairs without usable joint points are set to zero and flagged.
    """
    tt = tt or empirical_time_transform(panel)
    d = panel.d
    out = np.zeros((d, d))
    counts = np.zeros((d, d), dtype=np.int64)
    flags = []
    incr = [np.diff(s.values) for s in panel.series]
    for k in range(d):
        for l in range(d):
            jg = tt.joint[(k, l)]
            ik, il = jg.idx_k, jg.idx_l
            ok = (ik >= 1) & (il + 1 <= panel.series[l].n)
            counts[k, l] = int(ok.sum())
            if counts[k, l] == 0:
                flags.append((k, l))
                continue
            out[k, l] = -float(np.mean(incr[k][ik[ok] - 1] * incr[l][il[ok]]))
    return NoiseCov(out, counts, flags)


@dataclass
class SpotVol:
    """Spot covariance estimates ``Sigma_{s,n}`` on a grid of times."""

    times: np.ndarray
    matrices: np.ndarray
    bandwidth: float


def default_bandwidth(n):
    return n ** (-1.0 / 3.0)


def spot_vol(panel, kernel=None, k_n=None, l_n=None, times=None, prep=None):
    """Local covariance from differences of the estimator over ``[0, s]``.

    ``Sigma_s = (HY[0, s] - HY[0, s - l_n]) / l_n`` for ``s >= l_n``; earlier
    times reuse the value at ``s = l_n``.
    """
    kernel = _as_kernel(kernel)
    prep = prep or prepare(panel, kernel, k_n)
    n = prep.n
    l_n = default_bandwidth(n) if l_n is None else float(l_n)
    if not 0.0 < l_n < 1.0:
        raise ValidationError(f"bandwidth l_n must lie in (0, 1), got {l_n}")
    if math.sqrt(n) * l_n < 5.0:
        warnings.warn(f"sqrt(n) * l_n = {math.sqrt(n) * l_n:.2f} is small; spot estimates will be noisy", stacklevel=2)
    times = np.linspace(0.0, 1.0, 101) if times is None else np.asarray(times, dtype=float)
    mats = np.empty((times.size, prep.d, prep.d))
    memo = {}

    def partial(t):
        key = round(float(t), 15)
        if key not in memo:
            memo[key] = _partial_from_prepared(prep, t) if t > 0 else np.zeros((prep.d, prep.d))
        return memo[key]

    for idx, s in enumerate(times):
        s_eff = max(float(s), l_n)
        mats[idx] = (partial(s_eff) - partial(s_eff - l_n)) / l_n
    return SpotVol(times, mats, l_n)


def _check_eta(eta, strict):
    if not 0.5 < eta < 2.0 / 3.0:
        msg = f"eta must lie in (1/2, 2/3), got {eta}"
        if strict:
            raise ValidationError(msg)
        warnings.warn(msg, stacklevel=3)


def var_subsample(panel, kernel=None, k_n=None, varpi=1.0, eta=7.0 / 12.0, prep=None, calibration=None, strict=True):
    """Block-subsampling variance estimate.

    Time is cut into blocks of length ``beta_n / n`` with
    ``beta_n = round(varpi * n**eta)``.  Entry-wise block statistics are
    combined as ``sqrt(n)/2 * sum_a (2 A_a B_a - A_a B_{a-1} - A_{a-1} B_a)``.
    Times after the last full block are not used.
    """
    kernel = _as_kernel(kernel)
    _check_eta(eta, strict)
    if not varpi > 0:
        raise ValidationError(f"varpi must be positive, got {varpi}")
    prep = prep or prepare(panel, kernel, k_n)
    n = prep.n
    beta = max(int(round(varpi * n**eta)), 1)
    nblocks = n // beta
    if nblocks < 3:
        raise ValidationError(f"only {nblocks} blocks of size {beta}; need at least 3")
    edges = np.arange(nblocks + 1) * (beta / n)
    d = prep.d
    h = np.empty((d, d, nblocks))
    for k in range(d):
        for l in range(d):
            h[k, l] = block_sums(prep, k, l, edges)
    cur, prev = h[..., 1:], h[..., :-1]
    tensor = 0.5 * math.sqrt(n) * (
        2.0 * np.einsum("kla,mna->klmn", cur, cur)
        - np.einsum("kla,mna->klmn", cur, prev)
        - np.einsum("kla,mna->klmn", prev, cur)
    )
    tensor = _calibrate_tensor(tensor, calibration)
    meta = {"beta_n": beta, "blocks": nblocks, "varpi": varpi, "eta": eta}
    return VarianceTensor(tensor, SUBSAMPLE, n, _flag_diagonal(tensor), meta)


def gamma_functions(tt, kernel, u, k, l, kp, lp):
    """``(gamma, gamma_bar, gamma_tilde)`` for indices ``(kl, k'l')`` at time ``u``.

    The noise-related functionals vanish when the joint grid of ``(k, k')``
    (and, for ``gamma_tilde``, of ``(l, l')``) is too sparse to estimate.
    """
    kernel = _as_kernel(kernel)
    h_kl = float(tt.h(k, l, u))
    h_lk = 1.0 / h_kl
    h_lpl = float(tt.h(lp, l, u))
    h_kplp = float(tt.h(kp, lp, u))
    base = tt.m[l] * float(tt.f_prime(l, u))
    half = 1.0 + h_lk
    args = (h_kl, h_lpl, h_kplp, -half, half)
    g0 = overlap_product_integral(kernel, GG, *args) / base

    dens_kk = tt.m_joint(k, kp) * float(tt.f_prime_joint(k, kp, u)) if tt.joint_reliable(k, kp) else 0.0
    dens_ll = tt.m_joint(l, lp) * float(tt.f_prime_joint(l, lp, u)) if tt.joint_reliable(l, lp) else 0.0
    g1 = dens_kk / base * overlap_product_integral(kernel, GGP, *args) if dens_kk else 0.0
    g2 = dens_kk * dens_ll / base * overlap_product_integral(kernel, GPGP, *args) if dens_kk and dens_ll else 0.0
    return g0, g1, g2


def _plugin_integrand(theta, gam, sig, psi):
    """Integrand of the plug-in variance at one time point.

    ``gam(a, b, c, e)`` returns the gamma triple, ``sig`` is the spot matrix and
    ``psi`` the noise covariance.
    """
    d = sig.shape[0]
    out = np.zeros((d, d, d, d))
    r = range(d)
    for k in r:
        for l in r:
            for kp in r:
                for lp in r:
                    g_a = gam(k, l, kp, lp)
                    g_b = gam(k, l, lp, kp)
                    term = theta * (g_a[0] * sig[k, kp] * sig[l, lp] + g_b[0] * sig[k, lp] * sig[l, kp])
                    term += (
                        psi[l, lp] * gam(l, k, lp, kp)[1] * sig[k, kp]
                        + psi[l, kp] * gam(l, k, kp, lp)[1] * sig[k, lp]
                        + psi[k, lp] * g_b[1] * sig[l, kp]
                        + psi[k, kp] * g_a[1] * sig[l, lp]
                    ) / theta
                    term += (psi[k, kp] * psi[l, lp] * g_a[2] + psi[k, lp] * psi[l, kp] * g_b[2]) / theta**3
                    out[k, l, kp, lp] = term
    return out


def var_plugin(panel, tt=None, kernel=None, k_n=None, l_n=None, u_points=101, prep=None, calibration=None, noise=None):
    """Plug-in variance: spot covariance, noise covariance and gamma functionals.

    The time integral uses composite Simpson on ``u_points`` equidistant
    points, which are also the spot-volatility evaluation times.  ``noise``
    overrides the estimated noise covariance matrix.
    """
    kernel = _as_kernel(kernel)
    if u_points < 101 or u_points % 2 == 0:
        raise ValidationError(f"u_points must be odd and at least 101, got {u_points}")
    tt = tt or empirical_time_transform(panel)
    prep = prep or prepare(panel, kernel, k_n)
    n = prep.n
    theta = prep.k_n / math.sqrt(n)
    grid = np.linspace(0.0, 1.0, u_points)
    sv = spot_vol(panel, kernel, prep.k_n, l_n, grid, prep)
    if noise is None:
        # The estimate is asymmetric in finite samples; the target is not.
        psi_n = noise_cov(panel, tt).matrix
        psi_n = 0.5 * (psi_n + psi_n.T)
    else:
        psi_n = np.asarray(noise, dtype=float)
    d = panel.d
    vals = np.empty((u_points, d, d, d, d))
    for idx, u in enumerate(grid):
        memo = {}

        def gam(a, b, c, e, u=u, memo=memo):
            key = (a, b, c, e)
            if key not in memo:
                memo[key] = gamma_functions(tt, kernel, u, a, b, c, e)
            return memo[key]

        vals[idx] = _plugin_integrand(theta, gam, sv.matrices[idx], psi_n)
    tensor = simpson(vals, x=grid, axis=0) / kernel.psi**4
    tensor = _calibrate_tensor(tensor, calibration)
    meta = {"l_n": sv.bandwidth, "u_points": u_points, "theta_effective": theta}
    return VarianceTensor(tensor, PLUGIN, n, _flag_diagonal(tensor), meta)


def univariate_formula(quarticity, psi_n, hy, theta, kappa, kappa_bar, kappa_tilde, psi, mu, mu_tilde):
    """Closed-form one-dimensional variance from its sufficient statistics.

    Written with plain arithmetic so it also accepts exact rationals.
    """
    return (2 / psi**4) * (
        kappa / (3 * theta * mu**2) * quarticity
        + (2 / theta) * psi_n * hy * (kappa_bar - kappa * mu_tilde / mu)
        + (1 / theta**3) * psi_n**2 * (kappa_tilde - kappa * mu_tilde**2 / mu**2)
    )


def var_univariate(series, kernel=None, k_n=None, theta=None, prep=None):
    """One-dimensional variance from pre-averaged quarticity, noise and HY.

    ``series`` is a :class:`TickSeries` or a one-asset panel.  ``theta``
    defaults to the effective ``k_n / sqrt(n)``.
    """
    from .grids import Panel, TickSeries

    kernel = _as_kernel(kernel)
    panel = Panel((series,)) if isinstance(series, TickSeries) else series
    if panel.d != 1:
        raise ValidationError(f"univariate variance needs d = 1, got d = {panel.d}")
    prep = prep or prepare(panel, kernel, k_n)
    n = prep.n
    theta = prep.k_n / math.sqrt(n) if theta is None else float(theta)
    hy = float(hy_from_prepared(prep, kernel.name).raw[0, 0])
    psi_n = float(noise_cov(panel).matrix[0, 0])
    quart = float(np.sum(prep.ybar[0][1:] ** 4))
    kc = kappa_constants(kernel)
    v = univariate_formula(
        quart, psi_n, hy, theta, kc.kappa, kc.kappa_bar, kc.kappa_tilde, kernel.psi, kernel.mu, kernel.mu_tilde
    )
    tensor = np.full((1, 1, 1, 1), v)
    meta = {"theta": theta, "quarticity": quart, "noise": psi_n, "hy": hy}
    return VarianceTensor(tensor, UNIVARIATE, n, _flag_diagonal(tensor), meta)

"""Bivariate stochastic-volatility simulator, noise and sampling designs.

Log-prices follow

    dX_i = a_i dt + rho_i sigma_i dB_i + sqrt(1 - rho_i^2) sigma_i dW,
    sigma_i = exp(beta0_i + beta1_i * r_i),   dr_i = alpha_i r_i dt + dB_i,

on an equidistant grid of ``N`` steps over ``[0, 1]``.  The OU factor is
stepped exactly and driven by the same ``dB_i`` increments as the price;
prices use an Euler step.  Every random draw comes from a Philox stream keyed
by ``(seed, replication, stream)`` so results do not depend on scheduling.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.signal import lfilter

from .exceptions import ValidationError
from .grids import Panel, TickSeries
from .hy import hy_matrix
from .kernel import _as_kernel
from .preavg import window_size

STREAM_PATH = 0
STREAM_SCHEME = 1
STREAM_NOISE = 2
STREAM_CALIBRATION = 3


def make_rng(seed, rep=0, stream=0):
    """Counter-based generator for one ``(replication, stream)`` pair."""
    if seed is None:
        raise ValidationError("an explicit seed is required")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(rep), int(stream)])))


@dataclass(frozen=True)
class SvModelParams:
    """Parameters shared by both assets unless given per asset as pairs."""

    drift: tuple = (0.03, 0.03)
    beta0: tuple = (-5 / 16, -5 / 16)
    beta1: tuple = (1 / 8, 1 / 8)
    alpha: tuple = (-1 / 40, -1 / 40)
    rho: tuple = (-0.3, -0.3)
    N: int = 23400
    gamma: float = 0.5

    def __post_init__(self):
        for name in ("drift", "beta0", "beta1", "alpha", "rho"):
            val = getattr(self, name)
            if np.isscalar(val):
                val = (float(val), float(val))
            val = tuple(float(v) for v in val)
            if len(val) != 2:
                raise ValidationError(f"{name} needs one value per asset, got {val}")
            object.__setattr__(self, name, val)
        if any(a >= 0 for a in self.alpha):
            raise ValidationError(f"mean reversion alpha must be negative, got {self.alpha}")
        if any(abs(r) > 1 for r in self.rho):
            raise ValidationError(f"|rho| must not exceed 1, got {self.rho}")
        if self.N < 2:
            raise ValidationError(f"N must be at least 2, got {self.N}")
        if self.gamma < 0:
            raise ValidationError(f"noise ratio must be non-negative, got {self.gamma}")

    @property
    def common_correlation(self):
        return math.sqrt(1 - self.rho[0] ** 2) * math.sqrt(1 - self.rho[1] ** 2)

    def to_dict(self):
        return asdict(self)


@dataclass
class LatentPaths:
    """Efficient log-prices and spot volatilities on the simulation grid."""

    X: np.ndarray
    sigma: np.ndarray
    integrated: np.ndarray

    @property
    def N(self):
        return self.X.shape[1] - 1


def simulate_sv(params, seed, rep=0):
    """Simulate one replication of the latent model on ``N + 1`` grid points."""
    rng = make_rng(seed, rep, STREAM_PATH)
    N = params.N
    dt = 1.0 / N
    alpha = np.array(params.alpha)[:, None]
    dB = rng.standard_normal((2, N)) * math.sqrt(dt)
    dW = rng.standard_normal(N) * math.sqrt(dt)
    r0 = rng.standard_normal(2) * np.sqrt(-0.5 / alpha[:, 0])

    # exact OU step, innovation tied to dB
    decay = np.exp(alpha * dt)
    scale = np.sqrt((np.exp(2 * alpha * dt) - 1) / (2 * alpha * dt))
    r = np.empty((2, N + 1))
    r[:, 0] = r0
    innov = scale * dB
    for a in range(2):
        r[a, 1:], _ = lfilter([1.0], [1.0, -decay[a, 0]], innov[a], zi=[decay[a, 0] * r0[a]])

    sigma = np.exp(np.array(params.beta0)[:, None] + np.array(params.beta1)[:, None] * r)
    rho = np.array(params.rho)[:, None]
    drift = np.array(params.drift)[:, None]
    s_left = sigma[:, :-1]
    dX = drift * dt + rho * s_left * dB + np.sqrt(1 - rho**2) * s_left * dW
    X = np.concatenate([np.zeros((2, 1)), np.cumsum(dX, axis=1)], axis=1)

    c = params.common_correlation
    integ = np.empty((2, 2))
    integ[0, 0] = np.sum(s_left[0] ** 2) * dt
    integ[1, 1] = np.sum(s_left[1] ** 2) * dt
    integ[0, 1] = integ[1, 0] = c * np.sum(s_left[0] * s_left[1]) * dt
    return LatentPaths(X, sigma, integ)


NOISE_CONVENTIONS = ("increment", "level")


def noise_variance(sigma_path, gamma_ratio, convention="increment"):
    """Noise variance from the realised average of ``sigma**2``.

    ``"level"`` returns ``gamma**2 * mean(sigma**2)``; ``"increment"`` scales
    this by the grid step ``1/N`` so that ``gamma`` is the ratio of noise to
    one-step return standard deviation.
    """
    s2 = np.asarray(sigma_path, dtype=float)[1:] ** 2
    omega2 = gamma_ratio**2 * float(np.mean(s2))
    if convention == "increment":
        return omega2 / s2.size
    if convention == "level":
        return omega2
    raise ValidationError(f"noise convention must be one of {NOISE_CONVENTIONS}, got {convention!r}")


def add_noise(values, sigma_path, gamma_ratio, seed, rep=0, asset=0, ma_coef=0.0, convention="increment"):
    """Add Gaussian noise with variance computed from the volatility path.

    With ``ma_coef = b`` the noise is MA(1) in tick time,
    ``(e_i + b e_{i-1}) / sqrt(1 + b^2)``, which keeps the marginal variance.
    """
    values = np.asarray(values, dtype=float)
    if gamma_ratio < 0:
        raise ValidationError(f"noise ratio must be non-negative, got {gamma_ratio}")
    if gamma_ratio == 0:
        return values.copy()
    omega = math.sqrt(noise_variance(sigma_path, gamma_ratio, convention))
    rng = make_rng(seed, rep, STREAM_NOISE * 16 + asset)
    return values + omega * ma1_shocks(rng, values.size, ma_coef)


def ma1_shocks(rng, size, ma_coef=0.0):
    """Unit-variance Gaussian shocks, MA(1) when ``ma_coef`` is non-zero."""
    if ma_coef == 0.0:
        return rng.standard_normal(size)
    e = rng.standard_normal(size + 1)
    return (e[1:] + ma_coef * e[:-1]) / math.sqrt(1.0 + ma_coef**2)


SUBSET = "subset"
SHIFTED = "shifted"
POISSON = "poisson"


@dataclass(frozen=True)
class SamplingScheme:
    """Non-synchronous observation design on the simulation grid.

    ``subset``: asset 1 every ``N/n1`` steps, asset 2 every ``N/n2`` steps with
    ``n2 | n1``.  ``shifted``: both every ``N/n1`` steps, asset 2 offset by
    ``(N/n1) // 2`` steps.  ``poisson``: geometric waiting times with means
    ``lam1``, ``lam2`` steps; both endpoints always observed.
    """

    kind: str
    n1: int = 4680
    n2: int = 2340
    lam1: float = 5.0
    lam2: float = 10.0
    N: int = 23400

    def __post_init__(self):
        if self.kind == SUBSET:
            if self.n1 <= 0 or self.n2 <= 0 or self.N % self.n1 or self.n1 % self.n2:
                raise ValidationError(f"subset scheme needs n2 | n1 | N, got n1={self.n1}, n2={self.n2}, N={self.N}")
        elif self.kind == SHIFTED:
            if self.n1 <= 0 or self.N % self.n1 or self.N // self.n1 < 2:
                raise ValidationError(f"shifted scheme needs n1 | N and N/n1 >= 2, got n1={self.n1}, N={self.N}")
        elif self.kind == POISSON:
            if self.lam1 < 1 or self.lam2 < 1:
                raise ValidationError(f"poisson waiting times must be >= 1, got {self.lam1}, {self.lam2}")
        else:
            raise ValidationError(f"unknown scheme {self.kind!r}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


SCENARIOS = {
    1: lambda N=23400: SamplingScheme(SUBSET, n1=4680 * N // 23400, n2=2340 * N // 23400, N=N),
    2: lambda N=23400: SamplingScheme(SHIFTED, n1=4680 * N // 23400, N=N),
    3: lambda N=23400: SamplingScheme(POISSON, lam1=5.0, lam2=10.0, N=N),
}


def scheme_indices(scheme, rng=None):
    """Grid indices observed for each asset."""
    N = scheme.N
    if scheme.kind == SUBSET:
        return np.arange(0, N + 1, N // scheme.n1), np.arange(0, N + 1, N // scheme.n2)
    if scheme.kind == SHIFTED:
        step = N // scheme.n1
        return np.arange(0, N + 1, step), np.arange(step // 2, N + 1, step)
    if rng is None:
        raise ValidationError("poisson scheme needs a random generator")
    out = []
    for lam in (scheme.lam1, scheme.lam2):
        size = int(N / lam + 10 * math.sqrt(N / lam) + 10)
        waits = rng.geometric(1.0 / lam, size=size)
        while waits.sum() < N:
            waits = np.concatenate([waits, rng.geometric(1.0 / lam, size=size)])
        idx = np.concatenate([[0], np.cumsum(waits)])
        idx = idx[idx < N]
        out.append(np.concatenate([idx, [N]]))
    return out[0], out[1]


def apply_scheme(grid_values, scheme, seed=None, rep=0, names=("1", "2")):
    """Extract the non-synchronous panel from full-grid values of shape ``(2, N+1)``."""
    grid_values = np.asarray(grid_values, dtype=float)
    if grid_values.shape[1] != scheme.N + 1:
        raise ValidationError(f"grid has {grid_values.shape[1] - 1} steps, scheme expects {scheme.N}")
    rng = make_rng(seed, rep, STREAM_SCHEME) if scheme.kind == POISSON else None
    idx = scheme_indices(scheme, rng)
    N = scheme.N
    return Panel(tuple(TickSeries(ix / N, grid_values[a, ix], names[a]) for a, ix in enumerate(idx)))


def simulate_panel(params, scheme, seed, rep=0, ma_coef=0.0, convention="increment"):
    """One replication: latent paths, sampled panel with noise."""
    paths = simulate_sv(params, seed, rep)
    rng = make_rng(seed, rep, STREAM_SCHEME) if scheme.kind == POISSON else None
    idx = scheme_indices(scheme, rng)
    N = params.N
    series = []
    for a, ix in enumerate(idx):
        vals = add_noise(paths.X[a, ix], paths.sigma[a], params.gamma, seed, rep, a, ma_coef, convention)
        series.append(TickSeries(ix / N, vals, str(a + 1)))
    return Panel(tuple(series)), paths


@dataclass
class CalibrationTable:
    """Multiplicative finite-sample bias factors per matrix entry."""

    factors: np.ndarray
    reps: int
    rho: float
    scheme: dict
    theta: float
    kernel: str
    kn_rule: str
    seed: int
    meta: dict = field(default_factory=dict)

    @property
    def identity(self):
        return calibration_key(self.scheme, self.theta, self.kernel, self.kn_rule)

    def to_dict(self):
        return {
            "factors": self.factors.tolist(),
            "reps": self.reps,
            "rho": self.rho,
            "scheme": self.scheme,
            "theta": self.theta,
            "kernel": self.kernel,
            "kn_rule": self.kn_rule,
            "seed": self.seed,
            "key": self.identity,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        key = data.pop("key", None)
        table = cls(factors=np.asarray(data.pop("factors"), dtype=float), **data)
        if key is not None and key != table.identity:
            raise ValidationError("calibration file key does not match its contents")
        return table

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def check(self, scheme, theta, kernel, kn_rule):
        """Raise unless the table was produced for exactly this configuration."""
        want = calibration_key(scheme, theta, kernel, kn_rule)
        if want != self.identity:
            raise ValidationError("calibration table was computed for a different scheme or tuning")


def calibration_key(scheme, theta, kernel, kn_rule):
    scheme = scheme.to_dict() if isinstance(scheme, SamplingScheme) else dict(scheme)
    blob = json.dumps({"scheme": scheme, "theta": float(theta), "kernel": kernel, "kn_rule": kn_rule}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def calibrate(scheme, theta=0.15, kernel="triangle", kn_rule="ceil", reps=1000, rho=1.0, seed=None):
    """Estimate ``E[HY] / target`` from correlated Brownian motions on the scheme's grids.

    The target is ``rho`` off the diagonal and 1 on it.
    """
    if reps < 100:
        raise ValidationError(f"calibration needs at least 100 replications, got {reps}")
    if not -1.0 <= rho <= 1.0 or rho == 0.0:
        raise ValidationError(f"rho must lie in [-1, 1] and be non-zero, got {rho}")
    if seed is None:
        raise ValidationError("an explicit seed is required")
    kern = _as_kernel(kernel)
    N = scheme.N
    total = np.zeros((2, 2))
    k_n = None
    for rep in range(reps):
        rng = make_rng(seed, rep, STREAM_CALIBRATION)
        z = rng.standard_normal((2, N)) / math.sqrt(N)
        b1 = z[0]
        b2 = rho * z[0] + math.sqrt(1.0 - rho**2) * z[1]
        grid = np.zeros((2, N + 1))
        grid[0, 1:] = np.cumsum(b1)
        grid[1, 1:] = np.cumsum(b2)
        panel = apply_scheme(grid, scheme, seed, rep)
        k_n = window_size(panel.n_total, theta, kn_rule)
        total += hy_matrix(panel, kern, k_n).raw
    mean = total / reps
    target = np.array([[1.0, rho], [rho, 1.0]])
    factors = mean / target
    if np.any((factors < 0.5) | (factors > 1.5)):
        warnings.warn(f"calibration factors {factors.tolist()} are far from 1", RuntimeWarning, stacklevel=2)
    return CalibrationTable(
        factors=factors,
        reps=reps,
        rho=rho,
        scheme=scheme.to_dict(),
        theta=theta,
        kernel=kern.name,
        kn_rule=kn_rule,
        seed=int(seed),
        meta={"k_n_last": k_n},
    )

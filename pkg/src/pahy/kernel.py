"""Weight functions for pre-averaging and the constants derived from them.

A kernel is a weight function ``g`` on ``[0, 1]`` with ``g(0) = g(1) = 0``,
extended by zero outside the unit interval, together with its analytic
derivative and the locations of its kinks.  Every integral here is computed by
composite Gauss-Legendre quadrature on panels split at all points where the
integrand can lose smoothness, so piecewise polynomial kernels are integrated
exactly up to rounding.

The overlap functionals are

    psi(s, x)       = int_0^1 int_{x(u-1+s)}^{1+x(s+u)} g(u)  g(v)  dv du
    psi_bar(s, x)   = same with g(u)  g'(v)
    psi_tilde(s, x) = same with g'(u) g'(v)

and vanish for ``|s| >= 1 + 1/x``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exceptions import DomainError, NumericalError, ValidationError

GG = "GG"
GGP = "GGp"
GPGP = "GpGp"
VARIANTS = (GG, GGP, GPGP)

DEFAULT_NODES = 10
DEFAULT_TOL = 1e-8


@functools.lru_cache(maxsize=None)
def _leggauss(nodes):
    x, w = np.polynomial.legendre.leggauss(nodes)
    return (x + 1.0) / 2.0, w / 2.0


def _panel_rule(breaks, nodes):
    """Nodes and weights of composite Gauss-Legendre on sorted ``breaks``.

    ``breaks`` has shape ``(..., B)``; the result has shape ``(..., (B-1)*nodes)``.
    Zero-length panels get zero weight.
    """
    x, w = _leggauss(nodes)
    lo = breaks[..., :-1, None]
    width = (breaks[..., 1:] - breaks[..., :-1])[..., None]
    pts = lo + width * x
    wts = width * w
    shape = breaks.shape[:-1] + (-1,)
    return pts.reshape(shape), wts.reshape(shape)


def _extend_by_zero(func):
    def wrapped(x):
        x = np.asarray(x, dtype=float)
        inside = (x >= 0.0) & (x <= 1.0)
        return np.where(inside, func(np.clip(x, 0.0, 1.0)), 0.0)

    return wrapped


def _triangle(x):
    return np.minimum(x, 1.0 - x)


def _triangle_prime(x):
    return np.where(x < 0.5, 1.0, -1.0)


def _sine(x):
    return np.sin(np.pi * x)


def _sine_prime(x):
    return np.pi * np.cos(np.pi * x)


def _quadratic(x):
    return x * (1.0 - x)


def _quadratic_prime(x):
    return 1.0 - 2.0 * x


# name -> (g, g', interior kinks, nodes per panel)
# Six nodes integrate the piecewise linear triangle kernel's products exactly.
KERNELS: dict[str, tuple[Callable, Callable, tuple[float, ...], int]] = {
    "triangle": (_triangle, _triangle_prime, (0.5,), 6),
    "sine": (_sine, _sine_prime, (), DEFAULT_NODES),
    "quadratic": (_quadratic, _quadratic_prime, (), DEFAULT_NODES),
}


def register_kernel(name, g, g_prime, kinks=(), nodes=DEFAULT_NODES):
    """Register a weight function and its analytic derivative under ``name``."""
    KERNELS[name] = (g, g_prime, tuple(float(k) for k in kinks), int(nodes))
    get_kernel.cache_clear()


@dataclass(frozen=True, eq=False)
class Kernel:
    """Weight function with its scalar constants.

    Attributes
    ----------
    name : str
    g, g_prime : callable
        Vectorised, already extended by zero outside ``[0, 1]``.
    kinks : tuple of float
        Interior points where ``g'`` is discontinuous.
    psi, mu, mu_tilde : float
        Integrals of ``g``, ``g**2`` and ``g'**2`` over ``[0, 1]``.
    nodes : int
        Gauss-Legendre nodes per panel.
    tol : float
        Absolute tolerance used by the convergence checks.
    """

    name: str
    g: Callable
    g_prime: Callable
    kinks: tuple = ()
    psi: float = float("nan")
    mu: float = float("nan")
    mu_tilde: float = float("nan")
    nodes: int = DEFAULT_NODES
    tol: float = DEFAULT_TOL
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def knots(self):
        """Breakpoints of ``g`` including the support endpoints."""
        return np.array((0.0, *self.kinks, 1.0))

    def __hash__(self):
        return id(self)


def kernel_constants(g, g_prime=None, kinks=(), name=None, nodes=DEFAULT_NODES, tol=DEFAULT_TOL):
    """Build a :class:`Kernel` and compute ``psi``, ``mu`` and ``mu_tilde``.

    ``g`` may be the name of a registered kernel, in which case the derivative
    and kinks come from the registry.  A callable ``g`` requires an analytic
    ``g_prime``.
    """
    if isinstance(g, str):
        if g not in KERNELS:
            raise ValidationError(f"unknown kernel {g!r}; known: {sorted(KERNELS)}")
        name = g
        g, g_prime, kinks, nodes = KERNELS[g]
    if g_prime is None:
        raise ValidationError("g_prime must be supplied analytically")
    kinks = tuple(sorted(float(k) for k in kinks))
    if any(not 0.0 < k < 1.0 for k in kinks):
        raise ValidationError(f"kinks must lie in (0, 1), got {kinks}")
    g0, g1 = (float(v) for v in np.asarray(g(np.array([0.0, 1.0])), dtype=float))
    if abs(g0) > 1e-12 or abs(g1) > 1e-12:
        raise ValidationError(f"weight function must vanish at 0 and 1, got g(0)={g0}, g(1)={g1}")

    gz = _extend_by_zero(g)
    gpz = _extend_by_zero(g_prime)
    pts, wts = _panel_rule(np.array((0.0, *kinks, 1.0)), nodes)
    psi = float(np.sum(wts * gz(pts)))
    mu = float(np.sum(wts * gz(pts) ** 2))
    mu_tilde = float(np.sum(wts * gpz(pts) ** 2))
    if not psi > 0.0:
        raise ValidationError(f"integral of g must be positive, got {psi}")
    if not mu > 0.0:
        raise ValidationError(f"integral of g^2 must be positive, got {mu}")
    return Kernel(
        name=name or getattr(g, "__name__", "custom"),
        g=gz,
        g_prime=gpz,
        kinks=kinks,
        psi=psi,
        mu=mu,
        mu_tilde=mu_tilde,
        nodes=nodes,
        tol=tol,
    )


@functools.lru_cache(maxsize=None)
def get_kernel(name="triangle"):
    """Registered kernel by name, constants computed once."""
    return kernel_constants(name)


def _as_kernel(kernel):
    if kernel is None:
        return get_kernel("triangle")
    if isinstance(kernel, str):
        return get_kernel(kernel)
    return kernel


def _outer_inner(kernel, variant):
    if variant == GG:
        return kernel.g, kernel.g
    if variant == GGP:
        return kernel.g, kernel.g_prime
    if variant == GPGP:
        return kernel.g_prime, kernel.g_prime
    raise ValidationError(f"variant must be one of {VARIANTS}, got {variant!r}")


def _psi_vec(s, x, variant, kernel, nodes):
    outer, inner = _outer_inner(kernel, variant)
    knots = kernel.knots
    s = np.atleast_1d(np.asarray(s, dtype=float))

    # outer panels: kinks of g plus the u where either inner limit hits a knot
    cand = [np.broadcast_to(knots, s.shape + knots.shape)]
    cand.append(knots[None, :] / x + 1.0 - s[:, None])
    cand.append((knots[None, :] - 1.0) / x - s[:, None])
    ubreaks = np.sort(np.clip(np.concatenate(cand, axis=1), 0.0, 1.0), axis=1)
    u, wu = _panel_rule(ubreaks, nodes)

    a = x * (u - 1.0 + s[:, None])
    b = 1.0 + x * (s[:, None] + u)
    lo = np.clip(a[..., None], knots[:-1], knots[1:])
    hi = np.clip(b[..., None], knots[:-1], knots[1:])
    xi, wi = _leggauss(nodes)
    width = hi - lo
    v = lo[..., None] + width[..., None] * xi
    inner_int = np.sum(width * np.sum(wi * inner(v), axis=-1), axis=-1)
    return np.sum(wu * outer(u) * inner_int, axis=-1)


def psi_overlap(s, x, variant=GG, kernel=None, nodes=None):
    """Overlap functional ``psi``, ``psi_bar`` or ``psi_tilde`` at ``(s, x)``.

    Parameters
    ----------
    s : float or array_like
    x : float
        Must be positive.
    variant : {"GG", "GGp", "GpGp"}
        Integrand pair ``(g, g)``, ``(g, g')`` or ``(g', g')``.
    kernel : Kernel or str, optional
        Defaults to the triangle kernel.

    Returns
    -------
    float or ndarray
        Same shape as ``s``.
    """
    kernel = _as_kernel(kernel)
    x = float(x)
    if not x > 0.0 or not math.isfinite(x):
        raise DomainError(f"x must be positive and finite, got {x}")
    _outer_inner(kernel, variant)
    out = _psi_vec(s, x, variant, kernel, nodes or kernel.nodes)
    return float(out[0]) if np.ndim(s) == 0 else out.reshape(np.shape(s))


def psi_support(x):
    """Half-width of the support of ``psi(., x)``."""
    return 1.0 + 1.0 / x


def psi_breakpoints(x, kernel):
    """Values of ``s`` where ``psi(s, x)`` may lose smoothness."""
    knots = kernel.knots
    c = knots[:, None]
    u = knots[None, :]
    pts = np.concatenate([(c / x + 1.0 - u).ravel(), ((c - 1.0) / x - u).ravel()])
    return np.unique(pts)


def _piecewise_integral(func, lo, hi, breaks, nodes):
    inner = breaks[(breaks > lo) & (breaks < hi)]
    edges = np.concatenate(([lo], np.sort(inner), [hi]))
    pts, wts = _panel_rule(edges, nodes)
    return float(np.sum(wts * func(pts)))


def overlap_product_integral(kernel, variant, x1, y2, x2, lo, hi, nodes=None):
    """``int_lo^hi psi_v(s, x1) * psi_v(y2 * s, x2) ds`` for one variant ``v``.

    Breakpoints of both factors are honoured, so the integral is exact for
    piecewise polynomial kernels.  The result is cached on the kernel.
    """
    kernel = _as_kernel(kernel)
    nodes = nodes or kernel.nodes
    key = (variant, round(x1, 12), round(y2, 12), round(x2, 12), round(lo, 12), round(hi, 12), nodes)
    cached = kernel._cache.get(key)
    if cached is not None:
        return cached
    if not (x1 > 0 and x2 > 0 and y2 > 0):
        raise DomainError(f"overlap arguments must be positive, got {(x1, y2, x2)}")
    breaks = np.concatenate([psi_breakpoints(x1, kernel), psi_breakpoints(x2, kernel) / y2])

    def integrand(s):
        return _psi_vec(s, x1, variant, kernel, nodes) * _psi_vec(y2 * s, x2, variant, kernel, nodes)

    val = _piecewise_integral(integrand, lo, hi, breaks, nodes)
    kernel._cache[key] = val
    return val


@dataclass(frozen=True)
class KappaConstants:
    """Integrals over ``s`` of the squared overlap functionals at ``x = 1``."""

    kappa: float
    kappa_bar: float
    kappa_tilde: float


def kappa_constants(kernel=None):
    """``kappa``, ``kappa_bar`` and ``kappa_tilde`` of a kernel.

    Each integral is evaluated twice, with ``nodes`` and ``2 * nodes`` points
    per panel; a disagreement above ``kernel.tol`` raises
    :class:`NumericalError`.
    """
    kernel = _as_kernel(kernel)
    vals = []
    for variant in VARIANTS:
        coarse = overlap_product_integral(kernel, variant, 1.0, 1.0, 1.0, -2.0, 2.0, kernel.nodes)
        fine = overlap_product_integral(kernel, variant, 1.0, 1.0, 1.0, -2.0, 2.0, 2 * kernel.nodes)
        if not abs(fine - coarse) <= kernel.tol:
            raise NumericalError(
                f"quadrature for {variant} did not converge",
                {"variant": variant, "coarse": coarse, "fine": fine, "tol": kernel.tol},
            )
        vals.append(fine)
    return KappaConstants(*vals)


def kernel_summary(kernel=None):
    """All scalar constants of a kernel as a plain dict."""
    kernel = _as_kernel(kernel)
    k = kappa_constants(kernel)
    return {
        "kernel": kernel.name,
        "psi": kernel.psi,
        "mu": kernel.mu,
        "mu_tilde": kernel.mu_tilde,
        "kappa": k.kappa,
        "kappa_bar": k.kappa_bar,
        "kappa_tilde": k.kappa_tilde,
    }

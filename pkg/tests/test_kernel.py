import numpy as np
import pytest

from pahy.exceptions import DomainError, ValidationError
from pahy.kernel import (
    GG,
    GGP,
    GPGP,
    get_kernel,
    kappa_constants,
    kernel_constants,
    kernel_summary,
    psi_overlap,
)

KERNELS = ("triangle", "sine", "quadratic")


def riemann_psi(s, x, f1, f2, m):
    # Midpoint sums over u in [0,1] and over the inner variable on its own range.
    u = (np.arange(m) + 0.5) / m
    a = (u - 1 + s) * x
    b = 1 + x * (s + u)
    w = (np.arange(m) + 0.5) / m
    y = a[:, None] + (b - a)[:, None] * w[None, :]
    inner = (f2(y) * (b - a)[:, None]).mean(axis=1)
    return float(np.mean(f1(u) * inner))


def test_triangle_scalars():
    k = get_kernel("triangle")
    assert k.psi == pytest.approx(0.25, abs=1e-15)
    assert k.mu == pytest.approx(1 / 12, rel=1e-12)
    assert k.mu_tilde == pytest.approx(1.0, rel=1e-12)


def test_sine_psi_is_two_over_pi():
    assert get_kernel("sine").psi == pytest.approx(2 / np.pi, rel=1e-12)


def test_kappa_triangle_closed_forms():
    kc = kappa_constants("triangle")
    assert kc.kappa == pytest.approx(7585 / 1161216, rel=1e-4)
    assert kc.kappa_bar == pytest.approx(151 / 20160, rel=1e-4)
    assert kc.kappa_tilde == pytest.approx(1 / 24, rel=1e-4)


@pytest.mark.parametrize("name", KERNELS)
def test_kappa_positive(name):
    kc = kappa_constants(name)
    assert kc.kappa > 0 and kc.kappa_bar > 0 and kc.kappa_tilde > 0


@pytest.mark.parametrize("s", [2.0, -2.0, 2.5, -3.0])
def test_psi_vanishes_outside_support(s):
    for variant in (GG, GGP, GPGP):
        assert psi_overlap(s, 1.0, variant) == 0.0


def test_psi_center_matches_midpoint_oracle():
    g = get_kernel("triangle").g
    oracle = riemann_psi(0.0, 1.0, g, g, 2000)
    assert psi_overlap(0.0, 1.0, GG) == pytest.approx(oracle, abs=1e-6)


@pytest.mark.parametrize("s,x", [(0.3, 1.0), (-0.7, 0.5), (1.2, 2.0), (0.0, 0.37)])
def test_psi_generic_points_against_oracle(s, x):
    k = get_kernel("sine")
    oracle = riemann_psi(s, x, k.g, k.g, 1500)
    assert psi_overlap(s, x, GG, kernel=k) == pytest.approx(oracle, abs=1e-5)


def test_psi_rejects_nonpositive_x():
    with pytest.raises(DomainError):
        psi_overlap(0.0, 0.0)
    with pytest.raises(DomainError):
        psi_overlap(0.0, -1.0)


def _riemann_kappa(kernel, m=1200, ms=801):
    # kappa-type integrals over s in [-2, 2] by midpoint sums; inner integral via cumulative sums.
    grid = (np.arange(4 * m) + 0.5) / m - 1.0  # fine grid on [-1, 3]
    h = 1.0 / m
    out = []
    for f1, f2 in ((kernel.g, kernel.g), (kernel.g, kernel.g_prime), (kernel.g_prime, kernel.g_prime)):
        cs = np.concatenate(([0.0], np.cumsum(f2(grid)) * h))
        u = (np.arange(m) + 0.5) / m
        s = -2.0 + 4.0 * (np.arange(ms) + 0.5) / ms
        a = (u[None, :] - 1 + s[:, None])
        b = 1 + s[:, None] + u[None, :]
        ia = np.clip(np.round((a + 1.0) * m).astype(int), 0, cs.size - 1)
        ib = np.clip(np.round((b + 1.0) * m).astype(int), 0, cs.size - 1)
        psi = np.mean(f1(u)[None, :] * (cs[ib] - cs[ia]), axis=1)
        out.append(float(np.mean(psi**2) * 4.0))
    return out


@pytest.mark.parametrize("name", KERNELS)
def test_kappa_matches_riemann_oracle(name):
    k = get_kernel(name)
    kc = kappa_constants(k)
    oracle = _riemann_kappa(k)
    np.testing.assert_allclose([kc.kappa, kc.kappa_bar, kc.kappa_tilde], oracle, rtol=1e-3)


def test_doubling_nodes_is_stable():
    k = get_kernel("sine")
    fine = kernel_constants(k.g, k.g_prime, k.kinks, name="sine-fine", nodes=2 * k.nodes)
    for attr in ("psi", "mu", "mu_tilde"):
        assert abs(getattr(fine, attr) - getattr(k, attr)) < 1e-8
    a, b = kappa_constants(k), kappa_constants(fine)
    assert abs(a.kappa - b.kappa) < 1e-8
    assert abs(a.kappa_tilde - b.kappa_tilde) < 1e-8


def test_boundary_conditions_enforced():
    with pytest.raises(ValidationError):
        kernel_constants(lambda x: np.ones_like(x), lambda x: np.zeros_like(x), name="flat")


def test_callable_kernel_round_trip():
    k = kernel_constants(lambda x: x * (1 - x), lambda x: 1 - 2 * x, name="custom")
    assert k.psi == pytest.approx(1 / 6, rel=1e-12)
    assert k.mu == pytest.approx(1 / 30, rel=1e-12)
    assert k.mu_tilde == pytest.approx(1 / 3, rel=1e-12)


def test_summary_keys():
    assert set(kernel_summary("triangle")) == {"kernel", "psi", "mu", "mu_tilde", "kappa", "kappa_bar", "kappa_tilde"}

import math

import numpy as np
import pytest
from scipy import integrate, special, stats

from rrhplace import kernels
from rrhplace.numerics import (BracketError, ConvergenceError, DomainError, bessel_i0, bisect,
                               gauss_legendre_rule, hyp0f1_reg, integrate_2d, log_bessel_i0,
                               marcum_q1, marcum_q1_pair, rician_power_pdf)


def i0_integral(z, n=4000):
    """(1/pi) int_0^pi exp(z cos t) dt by the trapezoid rule (spectrally accurate here)."""
    t = np.linspace(0.0, math.pi, n + 1)
    f = np.exp(z * np.cos(t))
    return float(np.trapezoid(f, t) / math.pi)


class TestBessel:
    def test_zero(self):
        assert bessel_i0(0.0) == 1.0

    @pytest.mark.parametrize("z", [1e-3, 0.5, 1.5, 4.0, 11.9, 12.1, 29.9, 30.1, 60.0])
    def test_integral_definition(self, z):
        assert bessel_i0(z) == pytest.approx(i0_integral(z), rel=1e-12)

    def test_against_scipy_up_to_700(self):
        z = np.linspace(0.0, 700.0, 5001)
        ref = np.log(special.i0e(z)) + z
        np.testing.assert_allclose(log_bessel_i0(z), ref, rtol=1e-13, atol=1e-13)
        mid = z[z < 700]
        np.testing.assert_allclose(bessel_i0(mid), special.i0(mid), rtol=1e-12)

    def test_log_form_beyond_overflow(self):
        assert math.isfinite(log_bessel_i0(5000.0))
        assert log_bessel_i0(5000.0) == pytest.approx(5000.0 - 0.5 * math.log(2 * math.pi * 5000),
                                                      rel=1e-6)

    @pytest.mark.parametrize("bad", [-1.0, math.inf, math.nan])
    def test_domain(self, bad):
        with pytest.raises(DomainError):
            bessel_i0(bad)

    def test_hyp0f1_identity(self):
        rng = np.random.default_rng(0)
        z = rng.uniform(0.0, 1e4, 1000)
        np.testing.assert_array_equal(hyp0f1_reg(z), bessel_i0(2.0 * np.sqrt(z)))
        assert hyp0f1_reg(0.0) == 1.0
        assert hyp0f1_reg(4.0) == pytest.approx(i0_integral(4.0), rel=1e-12)

    def test_hyp0f1_matches_scipy(self):
        z = np.linspace(0.0, 50.0, 101)
        np.testing.assert_allclose(hyp0f1_reg(z), special.hyp0f1(1.0, z), rtol=1e-12)


class TestMarcum:
    def test_b_zero(self):
        assert marcum_q1(3.0, 0.0) == 1.0

    @pytest.mark.parametrize("b", [0.1, 1.0, 3.0, 8.0])
    def test_rayleigh(self, b):
        assert marcum_q1(0.0, b) == pytest.approx(math.exp(-b * b / 2), rel=1e-12)

    def test_against_ncx2(self):
        a, b = np.meshgrid(np.linspace(0, 40, 41), np.linspace(0, 60, 61))
        q, p = marcum_q1_pair(a, b)
        ref_q = stats.ncx2.sf(b**2, 2, a**2)
        ref_p = stats.ncx2.cdf(b**2, 2, a**2)
        np.testing.assert_allclose(q, ref_q, atol=1e-12)
        np.testing.assert_allclose(p, ref_p, atol=1e-12)

    def test_complement(self):
        a, b = np.meshgrid(np.linspace(0, 30, 31), np.linspace(0, 30, 31))
        q, p = marcum_q1_pair(a, b)
        np.testing.assert_allclose(q + p, 1.0, atol=1e-13)
        assert np.all((q >= 0) & (q <= 1) & (p >= 0) & (p <= 1))

    def test_small_tail_is_not_cancelled(self):
        # outage of a strong LoS link: far below double rounding of 1 - Q1
        _, p = marcum_q1_pair(8.0, 2.0)
        assert 0.0 < p < 1e-8
        assert p == pytest.approx(stats.ncx2.cdf(4.0, 2, 64.0), rel=1e-8)

    def test_monotone_in_b(self):
        b = np.linspace(0, 30, 3001)
        for a in (0.0, 2.0, 8.0, 20.0):
            q, p = marcum_q1_pair(np.full_like(b, a), b)
            # the complement is summed directly and is exactly monotone; Q1 itself
            # carries rounding of order 1e-13 where it is within 1e-13 of one
            assert np.all(np.diff(p) >= 0.0)
            assert np.all(np.diff(q) <= 1e-12)

    @pytest.mark.parametrize("a", [60.0, 100.0, 200.0, 300.0])
    def test_large_a_near_the_median(self, a):
        # large Poisson means: the pmf must not be formed as k log(lam) - lam - log(k!)
        b = a + np.array([-5.0, -1.0, 0.0, 1.0, 5.0])
        q, p = marcum_q1_pair(np.full_like(b, a), b)
        np.testing.assert_allclose(q, stats.ncx2.sf(b**2, 2, a * a), atol=1e-12)
        np.testing.assert_allclose(p, stats.ncx2.cdf(b**2, 2, a * a), atol=1e-12)

    def test_large_arguments(self):
        q, p = marcum_q1_pair(300.0, 310.0)
        assert q == pytest.approx(stats.ncx2.sf(310.0**2, 2, 300.0**2), abs=1e-12)
        assert math.isfinite(p)

    def test_domain(self):
        with pytest.raises(DomainError):
            marcum_q1(-1.0, 1.0)
        with pytest.raises(DomainError):
            marcum_q1(1.0, math.nan)

    @pytest.mark.parametrize("eta1,eta2,b", [(8.0, math.sqrt(2), 9.0), (2.0, 1.0, 1.3),
                                             (5.0, 3.0, 2.2), (0.5, 0.7, 0.4)])
    def test_rician_pdf_quadrature(self, eta1, eta2, b):
        zeta = b * b * eta2 * eta2 / 2.0
        mass, _ = integrate.quad(lambda d: rician_power_pdf(d, eta1, eta2), 0.0, zeta,
                                 epsabs=1e-13, epsrel=1e-13, limit=400)
        a = math.sqrt(2.0) * eta1 / eta2
        assert marcum_q1(a, b) + mass == pytest.approx(1.0, abs=1e-8)

    def test_rician_pdf_normalised(self):
        mass, _ = integrate.quad(lambda d: rician_power_pdf(d, 8.0, math.sqrt(2)), 0.0, np.inf,
                                 limit=400, points=None)
        assert mass == pytest.approx(1.0, abs=1e-9)


class TestBackends:
    def test_kernels_agree(self):
        backends = kernels.available_backends()
        if "numba" not in backends:
            pytest.skip("numba not importable")
        nb, npy = backends["numba"], backends["numpy"]
        rng = np.random.default_rng(3)
        z = rng.uniform(0, 800, 2000)
        np.testing.assert_allclose(nb.log_i0(z), npy.log_i0(z), rtol=1e-14)
        a, b = rng.uniform(0, 40, 500), rng.uniform(0, 50, 500)
        for x, y in zip(nb.marcum_q1(a, b), npy.marcum_q1(a, b)):
            np.testing.assert_allclose(x, y, atol=1e-14)
        nodes = rng.uniform(0, 1000, (64, 2))
        w = np.full(64, 1 / 64)
        rrh = rng.uniform(0, 1000, (3, 2))
        np.testing.assert_allclose(nb.ici_coefficients(nodes, w, rrh, 2.0, 3.0, 0.392, 3.76),
                                   npy.ici_coefficients(nodes, w, rrh, 2.0, 3.0, 0.392, 3.76),
                                   rtol=1e-12)
        src = rng.uniform(-1000, 2000, (12, 2))
        c = rng.uniform(0, 2, 12)
        np.testing.assert_allclose(nb.interference_field(nodes, src, c, 0.392, 3.76),
                                   npy.interference_field(nodes, src, c, 0.392, 3.76), rtol=1e-12)
        ginv = rng.uniform(1e8, 1e12, 64)
        # one node on the owner itself exercises the d_min clamp
        nodes[0] = rrh[1]
        for owner in range(3):
            for x, y in zip(nb.patch_field(nodes, rrh, owner, ginv, w, 0.392, 3.76, 1.0),
                            npy.patch_field(nodes, rrh, owner, ginv, w, 0.392, 3.76, 1.0)):
                np.testing.assert_allclose(x, y, rtol=1e-11)
        h = rng.standard_normal((20, 8, 3)) + 1j * rng.standard_normal((20, 8, 3))
        np.testing.assert_allclose(nb.zf_directions(h), npy.zf_directions(h), rtol=1e-10,
                                   atol=1e-13)


class TestQuadrature:
    def test_rule_shape_and_area(self):
        r = gauss_legendre_rule((0, 1000, 0, 1000), 32)
        assert r.nodes.shape == (1024, 2)
        assert r.weights.sum() == pytest.approx(1e6, rel=1e-12)
        assert np.all(r.weights > 0)
        assert integrate_2d(lambda x, y: np.ones_like(x), r) == pytest.approx(1e6, rel=1e-12)

    def test_unit_square_x(self):
        r = gauss_legendre_rule((0, 1, 0, 1), 4)
        assert integrate_2d(lambda x, y: x, r) == pytest.approx(0.5, abs=1e-15)

    @pytest.mark.parametrize("order", [1, 3, 8])
    def test_polynomial_exactness(self, order):
        deg = 2 * order - 1
        r = gauss_legendre_rule((-1.0, 2.0, 0.5, 3.0), order)
        val = integrate_2d(lambda x, y: x**deg * y ** (deg - 1), r)
        exact = ((2.0 ** (deg + 1) - (-1.0) ** (deg + 1)) / (deg + 1)
                 * (3.0**deg - 0.5**deg) / deg)
        assert val == pytest.approx(exact, rel=1e-10)

    def test_values_array_and_nonfinite(self):
        r = gauss_legendre_rule((0, 1, 0, 1), 3)
        assert integrate_2d(np.full(9, 2.0), r) == pytest.approx(2.0)
        vals = np.ones(9)
        vals[4] = np.nan
        with pytest.raises(FloatingPointError):
            integrate_2d(vals, r)

    def test_shifted(self):
        r = gauss_legendre_rule((0, 1, 0, 1), 3).shifted(10.0, -2.0)
        assert r.bounds == (10.0, 11.0, -2.0, -1.0)
        assert integrate_2d(lambda x, y: x, r) == pytest.approx(10.5)

    def test_bad_rules(self):
        with pytest.raises(ValueError):
            gauss_legendre_rule((0, 0, 0, 1), 3)
        with pytest.raises(ValueError):
            gauss_legendre_rule((0, 1, 0, 1), 0)


class TestBisect:
    def test_linear(self):
        assert bisect(lambda x: x - 3.0, 0.0, 10.0, 1e-10) == pytest.approx(3.0, abs=1e-9)

    def test_decreasing(self):
        assert bisect(lambda x: 2.0 - x * x, 0.0, 2.0, 1e-12) == pytest.approx(math.sqrt(2), abs=1e-11)

    def test_endpoint_root(self):
        assert bisect(lambda x: x, 0.0, 1.0, 1e-9) == 0.0

    def test_bracket_error(self):
        with pytest.raises(BracketError):
            bisect(lambda x: x + 1.0, 0.0, 1.0, 1e-9)

    def test_iteration_cap(self):
        with pytest.raises(ConvergenceError):
            bisect(lambda x: x - math.pi, 0.0, 10.0, 0.0, max_iter=5)

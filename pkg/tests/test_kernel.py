import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quadheat import (
    FormIndex,
    KernelQuery,
    NumericsError,
    QuadratureSpec,
    QuadricForm,
    SpectralData,
    decompose_form,
    epsilon,
    heisenberg,
    inversion_quadspec,
    log_mu_sinh_factor,
    mu_coth,
    rho_hat,
    rho_hat_adapted,
    rho_hat_eta,
    rho_via_inversion,
    weighted_heat_kernel,
)

L_IN = FormIndex([1])
L_OUT = FormIndex([])


def spectral_for_mu(mu_list, lam=None):
    mu = np.asarray(mu_list, dtype=float)
    n = mu.shape[0]
    nz = int(np.count_nonzero(mu))
    return SpectralData(
        mu=mu,
        V=np.eye(n, dtype=complex),
        nu=nz,
        tol=1e-10,
        lam=np.asarray(lam if lam is not None else [1.0], dtype=float),
    )


class TestEpsilon:
    def test_all_in(self):
        S = spectral_for_mu([1.0, 1.0])
        np.testing.assert_array_equal(epsilon(FormIndex([1, 2]), S), [1, 1])

    def test_all_out(self):
        S = spectral_for_mu([1.0, 1.0])
        np.testing.assert_array_equal(epsilon(FormIndex([]), S), [-1, -1])

    def test_mixed_signs(self):
        S = spectral_for_mu([2.0, -3.0])
        np.testing.assert_array_equal(epsilon(FormIndex([2]), S), [-1, -1])

    def test_index_beyond_rank_is_inert(self):
        S = spectral_for_mu([2.0, 0.0])
        assert epsilon(FormIndex([1, 2]), S).shape == (1,)

    def test_form_index_validation(self):
        with pytest.raises(ValueError):
            FormIndex([2, 1])
        with pytest.raises(ValueError):
            FormIndex([0])
        with pytest.raises(ValueError):
            FormIndex([1, 1])


class TestStableFactors:
    def test_reference_value(self):
        want = math.log(2.0 * math.e / math.sinh(1.0))
        assert log_mu_sinh_factor(1.0, 1.0, +1) == pytest.approx(want, rel=1e-13)

    @settings(max_examples=60, deadline=None)
    @given(mu=st.floats(1e-6, 1e3), s=st.floats(1e-4, 50.0),
           eps=st.sampled_from([-1, +1]))
    def test_even_in_mu_bitwise(self, mu, s, eps):
        assert log_mu_sinh_factor(s, -mu, eps) == log_mu_sinh_factor(s, mu, eps)
        assert mu_coth(s, -mu) == mu_coth(s, mu)

    def test_huge_argument_no_overflow(self):
        val = log_mu_sinh_factor(800.0, 1.0, -1)
        assert np.isfinite(val)
        assert val == pytest.approx(math.log(4.0) - 1600.0)

    def test_tiny_argument_matches_exact_branch(self):
        # compare the two branch formulas on either side of the switch
        for x in (0.5e-8, 1.5e-8):
            s, mu = x, 1.0
            taylor = math.log(2.0 / s) + s * mu - (s * mu) ** 2 / 6.0
            exact = math.log(4.0 * mu) + 0.0 - math.log(-math.expm1(-2.0 * s * mu))
            assert abs(taylor - exact) <= 1e-12 * abs(exact)
            assert log_mu_sinh_factor(s, mu, +1) == pytest.approx(exact, rel=1e-12)

    def test_mu_coth_small_argument(self):
        s = 1e-9
        assert mu_coth(s, 1.0) == pytest.approx(1.0 / s + s / 3.0, rel=1e-13)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            log_mu_sinh_factor(1.0, 0.0, +1)
        with pytest.raises(ValueError):
            log_mu_sinh_factor(-1.0, 1.0, +1)
        with pytest.raises(ValueError):
            mu_coth(0.0, 1.0)

    def test_finite_over_extreme_range(self):
        for x in np.logspace(-12, 4, 33):
            for mu in (1e-6, 1.0, 1e6):
                s = x / mu
                assert np.isfinite(log_mu_sinh_factor(s, mu, +1))
                assert np.isfinite(log_mu_sinh_factor(s, mu, -1))
                assert np.isfinite(mu_coth(s, mu))


class TestRhoHat:
    def test_euclidean_reduction(self, rng):
        for _ in range(50):
            n = int(rng.integers(1, 5))
            m = int(rng.integers(1, 4))
            Q = heisenberg(n) if m == 1 else QuadricForm(
                n, m, [np.eye(n, dtype=complex)] * m
            )
            S0 = decompose_form(Q, np.zeros(m))
            s = float(rng.uniform(0.8, 2.5))
            z = 0.5 * (rng.normal(size=n) + 1j * rng.normal(size=n))
            got = rho_hat(KernelQuery(s, z, S0, L_OUT))
            want = (
                2.0**n * (2 * np.pi) ** (-(0.5 * m + n)) * s ** (-n)
                * np.exp(-float(np.sum(z.real**2 + z.imag**2)) / s)
            )
            assert abs(got - want) <= 1e-14 * want

    def test_heisenberg_origin_value(self, heis_spectral):
        got = rho_hat(KernelQuery(1.0, [0.0], heis_spectral, L_IN))
        want = (2 * np.pi) ** (-1.5) * 2.0 * math.e / math.sinh(1.0)
        assert got == pytest.approx(want, rel=1e-14)

    def test_strictly_positive(self, rng, heis_spectral):
        for _ in range(100):
            z = 3.0 * (rng.normal(size=1) + 1j * rng.normal(size=1))
            s = float(rng.uniform(0.05, 5.0))
            assert rho_hat(KernelQuery(s, z, heis_spectral, L_IN)) > 0.0

    def test_evenness_bitwise_in_adapted_coordinates(self, rng):
        S = spectral_for_mu([1.5, -0.5], lam=[1.0])
        L = FormIndex([2])
        c = rng.normal(size=2) + 1j * rng.normal(size=2)
        base = rho_hat_adapted(0.7, c, S, L)
        for j in range(2):
            for flip in (-np.conj(c[j]), np.conj(c[j]), -c[j]):
                c2 = c.copy()
                c2[j] = flip
                assert rho_hat_adapted(0.7, c2, S, L) == base

    def test_gaussian_decay_envelope(self, rng, heis_spectral):
        s = 0.6
        rate = min(1.0 / s, mu_coth(s, 1.0))
        base = rho_hat(KernelQuery(s, [0.0], heis_spectral, L_IN))
        for _ in range(50):
            z = 2.0 * (rng.normal(size=1) + 1j * rng.normal(size=1))
            val = rho_hat(KernelQuery(s, z, heis_spectral, L_IN))
            bound = base * np.exp(-rate * float(np.sum(z.real**2 + z.imag**2)))
            assert val <= bound * (1 + 1e-12)

    def test_abs_mu_substitution_one_ulp(self, rng):
        # flipping mu signs while toggling membership keeps (|mu|, eps) fixed
        S1 = spectral_for_mu([2.0, -3.0], lam=[1.0])
        S2 = spectral_for_mu([2.0, 3.0], lam=[1.0])
        L1 = FormIndex([2])          # eps = (-1, -1)
        L2 = FormIndex([])           # same eps with positive mu
        for _ in range(20):
            c = rng.normal(size=2) + 1j * rng.normal(size=2)
            s = float(rng.uniform(0.1, 2.0))
            a = rho_hat_adapted(s, c, S1, L1)
            b = rho_hat_adapted(s, c, S2, L2)
            assert a == b or abs(a - b) <= np.spacing(float(a))

    def test_rejects_bad_queries(self, heis_spectral):
        with pytest.raises(ValueError):
            KernelQuery(-1.0, [0.0], heis_spectral, L_IN)
        q = KernelQuery(1.0, [0.0], heis_spectral, L_IN, eta=np.array([]))
        with pytest.raises(ValueError):
            rho_hat(q)


class TestRhoHatEta:
    def test_full_rank_matches_rho_hat(self, heis_spectral):
        s = 0.8
        z = np.array([0.4 - 0.3j])
        want = rho_hat(KernelQuery(s, z, heis_spectral, L_IN))
        got = rho_hat_eta(s, [0.4], [-0.3], None, heis_spectral, L_IN)
        assert got == pytest.approx(want, rel=1e-14)

    def test_rank_zero(self):
        S = spectral_for_mu([0.0], lam=[0.0])
        s = 0.5
        eta = np.array([0.7 + 0.1j])
        got = rho_hat_eta(s, [], [], eta, S, L_OUT)
        want = (2 * np.pi) ** (-1.5) * np.exp(-0.25 * s * (0.7**2 + 0.1**2))
        assert got == pytest.approx(want, rel=1e-14)

    def test_fourier_transform_of_rho_hat(self):
        # transforming the kernel-block Gaussian pair reproduces rho_hat_eta
        Q = QuadricForm(2, 1, [np.diag([1.0, 0.0])])
        S = decompose_form(Q, [1.0])
        assert S.nu == 1
        s, xp, yp = 0.6, 0.35, -0.2
        eta = 0.4 + 0.3j
        grid = np.linspace(-6.0, 6.0, 301)
        h = grid[1] - grid[0]
        X2, Y2 = np.meshgrid(grid, grid, indexing="ij")
        c = np.stack(
            [np.full(X2.shape, xp + 1j * yp), X2 + 1j * Y2], axis=-1
        )
        vals = rho_hat_adapted(s, c, S, L_IN)
        ft = np.sum(
            vals * np.exp(-1j * (X2 * eta.real + Y2 * eta.imag))
        ) * h * h / (2 * np.pi)
        want = rho_hat_eta(s, [xp], [yp], [eta], S, L_IN)
        assert abs(ft - want) <= 1e-6
        assert abs(ft.imag) <= 1e-9


class TestWeightedKernel:
    def test_coincident_points_positive(self, heis_q, heis_spectral, rng):
        z = rng.normal(size=1) + 1j * rng.normal(size=1)
        val = weighted_heat_kernel(0.7, z, z, heis_q, heis_spectral, L_IN)
        assert val.imag == pytest.approx(0.0, abs=1e-15)
        assert val.real > 0

    def test_conjugate_symmetry(self, heis_q, heis_spectral, rng):
        for _ in range(100):
            z = rng.normal(size=1) + 1j * rng.normal(size=1)
            zt = rng.normal(size=1) + 1j * rng.normal(size=1)
            s = float(rng.uniform(0.2, 2.0))
            a = weighted_heat_kernel(s, z, zt, heis_q, heis_spectral, L_IN)
            b = weighted_heat_kernel(s, zt, z, heis_q, heis_spectral, L_IN)
            assert abs(a - np.conj(b)) <= 1e-12 * abs(a)

    def test_lambda_zero_is_real_gaussian(self, heis_q, rng):
        S0 = decompose_form(heis_q, [0.0])
        z = rng.normal(size=1) + 1j * rng.normal(size=1)
        zt = rng.normal(size=1) + 1j * rng.normal(size=1)
        s = 0.9
        val = weighted_heat_kernel(s, z, zt, heis_q, S0, L_IN)
        assert val.imag == 0.0
        want = (2 * np.pi) ** 0.5 * rho_hat(KernelQuery(s, z - zt, S0, L_IN))
        assert val.real == pytest.approx(want, rel=1e-14)

    def test_modulus_is_rho_hat(self, heis_q, heis_spectral, rng):
        z = rng.normal(size=1) + 1j * rng.normal(size=1)
        zt = rng.normal(size=1) + 1j * rng.normal(size=1)
        s = 0.4
        val = weighted_heat_kernel(s, z, zt, heis_q, heis_spectral, L_IN)
        want = (2 * np.pi) ** 0.5 * rho_hat(KernelQuery(s, z - zt, heis_spectral, L_IN))
        assert abs(val) == pytest.approx(want, rel=1e-13)


class TestInversionOracle:
    @pytest.mark.parametrize("lam,s,L", [
        (1.0, 0.7, L_IN),
        (1.0, 0.7, L_OUT),
        (0.5, 0.3, L_IN),
        (2.0, 0.3, L_OUT),
    ])
    def test_matches_closed_form(self, heis_q, lam, s, L):
        S = decompose_form(heis_q, [lam])
        for x, y in ((0.3, -0.2), (0.0, 0.0)):
            want = rho_hat_eta(s, [x], [y], None, S, L)
            got = rho_via_inversion(s, [x], [y], None, S, L)
            assert abs(got - want) <= 1e-6
            assert abs(got.imag) <= 1e-8

    def test_origin_has_unit_twist(self, heis_q):
        # at (x, y) = (0, 0) the prefactor exp(-2i mu x y) is exactly 1
        S = decompose_form(heis_q, [1.0])
        got = rho_via_inversion(0.5, [0.0], [0.0], None, S, L_IN)
        want = rho_hat_eta(0.5, [0.0], [0.0], None, S, L_IN)
        assert got.real == pytest.approx(want, rel=1e-9)

    def test_quadspec_rule_sizes_box(self, heis_q):
        S = decompose_form(heis_q, [0.5])
        spec = inversion_quadspec(0.3, S, tol=1e-6)
        Sj = math.exp(-2 * 0.5 * 0.3)
        rate = 0.5 * ((1 - Sj**2) / (1 + Sj**2)) / (4 * 0.5)
        assert spec.tail_rate == pytest.approx(rate)
        assert math.exp(-rate * spec.half_width**2) <= 1e-3 * 1e-6 * 1.0001

    def test_under_resolved_request_refused(self, heis_q):
        S = decompose_form(heis_q, [0.5])
        tiny = QuadratureSpec(half_width=3.0, points=64, tail_rate=0.036)
        with pytest.raises(NumericsError, match="tail"):
            rho_via_inversion(0.3, [0.0], [0.0], None, S, L_IN, quad=tiny)

    def test_requires_rank(self, heis_q):
        S0 = decompose_form(heis_q, [0.0])
        with pytest.raises(ValueError):
            rho_via_inversion(0.5, [], [], None, S0, L_IN)

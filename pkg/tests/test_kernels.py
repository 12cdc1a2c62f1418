import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from volterra_mortality.errors import AccuracyError, DomainError, GridError, InputError
from volterra_mortality.kernels import (
    GridFunction,
    KernelFamily,
    KernelSpec,
    convolve,
    e_b,
    eval_kernel,
    eval_resolvent,
    grid_size,
    integrated_e_b,
    kernel_integral,
    kernel_resolvent,
    mittag_leffler,
    resolvent_second_kind,
)

FAMILIES = [
    KernelSpec.constant(1.0),
    KernelSpec.fractional(1.33),
    KernelSpec.exponential(0.5),
    KernelSpec.gamma(1.33, 0.5),
]


def _ml_reference(alpha, beta, z, dps=80):
    # the Gamma arguments must be formed in extended precision: the
    # alternating series cancels many digits for large |z|
    with mpmath.workdps(dps):
        a, b, zz = mpmath.mpf(alpha), mpmath.mpf(beta), mpmath.mpf(z)
        total = mpmath.mpf(0)
        k = 0
        while True:
            term = zz ** k / mpmath.gamma(a * k + b)
            total += term
            if k > 10 and abs(term) < mpmath.mpf(10) ** (-dps) * max(abs(total), 1):
                break
            k += 1
        return float(total)


class TestMittagLeffler:
    def test_exponential_case(self):
        assert mittag_leffler(1.0, 1.0, 1.0) == pytest.approx(math.e, rel=1e-12)

    def test_zero_argument(self):
        assert mittag_leffler(1.33, 1.33, 0.0) == pytest.approx(1.0 / math.gamma(1.33), rel=1e-14)

    def test_cosh(self):
        # independent 200-term series (every other term of exp vanishes)
        oracle = float(sum(mpmath.mpf(1) / mpmath.factorial(2 * k) for k in range(100)))
        assert mittag_leffler(2.0, 1.0, 1.0) == pytest.approx(oracle, rel=1e-12)
        assert oracle == pytest.approx(1.5430806348, rel=1e-10)

    @pytest.mark.parametrize("z", [-2.0, -1.0, 0.0, 1.0, 2.0])
    def test_alpha_one_is_exp(self, z):
        assert mittag_leffler(1.0, 1.0, z) == pytest.approx(math.exp(z), rel=1e-10, abs=1e-300)

    @pytest.mark.parametrize(
        "alpha,beta,z",
        [(1.33, 1.33, -1.0), (1.33, 1.0, -5.0), (0.7, 0.7, -3.0), (1.6, 1.6, -10.0), (1.33, 1.33, 3.0), (0.8, 1.0, -20.0)],
    )
    def test_matches_high_precision_series(self, alpha, beta, z):
        assert mittag_leffler(alpha, beta, z) == pytest.approx(_ml_reference(alpha, beta, z), rel=1e-10, abs=1e-14)

    @pytest.mark.parametrize("alpha,beta,z", [(1.33, 1.33, -400.0), (1.33, 2.33, -400.0), (0.7, 1.0, -60.0)])
    def test_large_negative_argument(self, alpha, beta, z):
        # asymptotic regime against the series summed at 250 digits
        ref = _ml_reference(alpha, beta, z, dps=250)
        assert mittag_leffler(alpha, beta, z) == pytest.approx(ref, rel=1e-8, abs=1e-15)

    def test_vectorised(self):
        z = np.array([-1.0, 0.0, 1.0])
        out = mittag_leffler(1.0, 1.0, z)
        np.testing.assert_allclose(out, np.exp(z), rtol=1e-12)

    def test_non_finite_input(self):
        with pytest.raises(DomainError):
            mittag_leffler(1.0, 1.0, float("nan"))
        with pytest.raises(DomainError):
            mittag_leffler(-1.0, 1.0, 0.5)

    def test_overflow_reports_accuracy(self):
        with pytest.raises((AccuracyError, DomainError)):
            mittag_leffler(0.6, 1.0, 5000.0)


class TestKernelSpec:
    def test_validation(self):
        with pytest.raises(DomainError):
            KernelSpec.constant(0.0)
        with pytest.raises(DomainError):
            KernelSpec.fractional(2.5)
        with pytest.raises(DomainError):
            KernelSpec.exponential(-1.0)

    def test_flags(self):
        assert KernelSpec.constant().is_markovian
        assert not KernelSpec.fractional(1.33).is_markovian
        assert KernelSpec.fractional(0.7).singular
        assert not KernelSpec.fractional(1.33).singular
        assert KernelSpec.gamma(1.33, 0.5).family is KernelFamily.GAMMA


class TestEvalKernel:
    def test_constant(self):
        assert eval_kernel(KernelSpec.constant(2.0), 5.0) == 2.0

    def test_fractional(self):
        assert eval_kernel(KernelSpec.fractional(1.33), 1.0) == pytest.approx(1.0 / special.gamma(1.33), rel=1e-14)
        assert 1.0 / special.gamma(1.33) == pytest.approx(1.1193, abs=1e-4)

    def test_exponential(self):
        assert eval_kernel(KernelSpec.exponential(0.5), 2.0) == pytest.approx(math.exp(-1.0), rel=1e-14)

    def test_gamma(self):
        t = 1.7
        expected = math.exp(-0.5 * t) * t ** 0.33 / math.gamma(1.33)
        assert eval_kernel(KernelSpec.gamma(1.33, 0.5), t) == pytest.approx(expected, rel=1e-14)

    def test_domain(self):
        with pytest.raises(DomainError):
            eval_kernel(KernelSpec.fractional(0.7), 0.0)
        with pytest.raises(DomainError):
            eval_kernel(KernelSpec.constant(), -1.0)


class TestEvalResolvent:
    def test_constant(self):
        assert eval_resolvent(KernelSpec.constant(1.0), 0.0) == pytest.approx(1.0)
        assert eval_resolvent(KernelSpec.constant(1.0), 1.0) == pytest.approx(math.exp(-1.0), rel=1e-14)

    def test_fractional(self):
        expected = mittag_leffler(1.33, 1.33, -1.0)
        assert eval_resolvent(KernelSpec.fractional(1.33), 1.0) == pytest.approx(expected, rel=1e-13)

    def test_exponential(self):
        t = 0.8
        assert eval_resolvent(KernelSpec.exponential(0.5), t) == pytest.approx(math.exp(-1.5 * t), rel=1e-13)


@pytest.mark.parametrize("spec", FAMILIES, ids=lambda s: s.family.value)
@pytest.mark.parametrize("order", [1, 2, 3])
def test_kernel_integral_matches_quadrature(spec, order):
    t = 1.3

    def iterated(x, k):
        if k == 0:
            return float(eval_kernel(spec, x)) if x > 0 else 0.0
        return integrate.quad(lambda s: iterated(s, k - 1), 0.0, x, limit=200)[0]

    assert float(kernel_integral(spec, t, order)) == pytest.approx(iterated(t, order), rel=1e-8)


class TestGrid:
    def test_grid_size(self):
        assert grid_size(2.0, 1e-3) == 2000
        with pytest.raises(GridError):
            grid_size(1.0, 0.3)

    def test_grid_function_interpolation(self):
        g = GridFunction(0.0, 0.5, np.array([0.0, 1.0, 4.0]))
        assert g(0.75) == pytest.approx(2.5)
        with pytest.raises(InputError):
            g(2.0)

    def test_values_read_only(self):
        g = GridFunction(0.0, 0.5, np.array([0.0, 1.0]))
        with pytest.raises(ValueError):
            g.values[0] = 3.0


class TestConvolve:
    def test_zero_factor(self):
        f = GridFunction(0.0, 0.1, np.linspace(0, 1, 11) ** 2)
        g = GridFunction(0.0, 0.1, np.zeros(11))
        np.testing.assert_array_equal(convolve(f, g).values, 0.0)

    def test_ones(self):
        one = GridFunction(0.0, 0.1, np.ones(21))
        np.testing.assert_allclose(convolve(one, one).values, one.times, atol=1e-14)

    def test_kernel_against_analytic(self):
        dt = 1e-3
        t = dt * np.arange(2001)
        R = GridFunction(0.0, dt, np.exp(-t))
        out = convolve(KernelSpec.constant(1.0), R)
        assert np.max(np.abs(out.values - (1 - np.exp(-t)))) < 1e-5

    def test_mismatched_grids(self):
        with pytest.raises(GridError):
            convolve(GridFunction(0.0, 0.1, np.ones(5)), GridFunction(0.0, 0.2, np.ones(5)))

    @settings(max_examples=30, deadline=None)
    @given(
        a=st.floats(-5, 5),
        b=st.floats(-5, 5),
        seed=st.integers(0, 2 ** 32 - 1),
    )
    def test_bilinear(self, a, b, seed):
        rng = np.random.default_rng(seed)
        f, g, h = (GridFunction(0.0, 0.05, rng.normal(size=40)) for _ in range(3))
        lhs = convolve(GridFunction(0.0, 0.05, a * f.values + b * g.values), h).values
        rhs = a * convolve(f, h).values + b * convolve(g, h).values
        np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + np.max(np.abs(rhs))))


class TestResolvent:
    def test_zero_kernel(self):
        R = resolvent_second_kind(GridFunction(0.0, 0.01, np.zeros(101)))
        np.testing.assert_array_equal(R.values, 0.0)

    def test_constant(self):
        dt = 1e-3
        F = GridFunction(0.0, dt, np.ones(2001))
        R = resolvent_second_kind(F)
        assert np.max(np.abs(R.values - np.exp(-R.times))) < 1e-4

    def test_exponential(self):
        dt = 1e-3
        t = dt * np.arange(2001)
        R = resolvent_second_kind(GridFunction(0.0, dt, np.exp(-0.5 * t)))
        assert np.max(np.abs(R.values - np.exp(-1.5 * t))) < 1e-4

    @pytest.mark.parametrize("spec", FAMILIES, ids=lambda s: s.family.value)
    def test_identity_all_families(self, spec):
        dt = 1e-3
        R = kernel_resolvent(spec, 1.0, 2.0, dt)
        t = R.times[1:]
        KR = convolve(spec, R).values[1:]
        resid = KR - eval_kernel(spec, t) + R.values[1:]
        assert np.max(np.abs(resid)) < 1e-3

    def test_closed_form_fractional(self):
        R = kernel_resolvent(KernelSpec.fractional(1.33), 1.0, 2.0, 1e-3)
        t = np.array([0.5, 1.0, 2.0])
        np.testing.assert_allclose(R(t), eval_resolvent(KernelSpec.fractional(1.33), t), atol=1e-4)


class TestEB:
    def test_zero_coupling(self):
        spec = KernelSpec.fractional(1.33)
        R_B, E_B = e_b(spec, 0.0, 1.0, 1e-2)
        np.testing.assert_array_equal(R_B.values, 0.0)
        np.testing.assert_allclose(E_B.values[1:], eval_kernel(spec, E_B.times[1:]), rtol=1e-14)

    def test_markov_decay(self):
        _, E_B = e_b(KernelSpec.constant(), -0.5, 2.0, 1e-3)
        assert np.max(np.abs(E_B.values - np.exp(-0.5 * E_B.times))) < 1e-4

    def test_fractional_closed_form(self):
        a = 1.33
        _, E_B = e_b(KernelSpec.fractional(a), -0.5, 2.0, 1e-3)
        t = E_B.times[1:]
        closed = t ** (a - 1) * mittag_leffler(a, a, -0.5 * t ** a)
        assert np.max(np.abs(E_B.values[1:] - closed)) < 1e-3

    def test_integrated_against_closed_form(self):
        # int_0^t E_B = t^a E_{a,a+1}(-0.5 t^a)
        a = 1.33
        ie = integrated_e_b(KernelSpec.fractional(a), -0.5, 3.0, 1e-3)
        t = np.array([0.5, 1.5, 3.0])
        closed = t ** a * mittag_leffler(a, a + 1, -0.5 * t ** a)
        np.testing.assert_allclose(ie(t), closed, atol=1e-6)


@settings(max_examples=20, deadline=None)
@given(alpha=st.floats(1.01, 1.9), t=st.floats(0.05, 3.0))
def test_fractional_resolvent_positive_and_bounded(alpha, t):
    # E_{a,a}(-t^a) t^{a-1} lies in (0, K(t)] for 1 < a < 2 on moderate t
    spec = KernelSpec.fractional(alpha)
    r = float(eval_resolvent(spec, t))
    assert r <= float(eval_kernel(spec, t)) + 1e-12

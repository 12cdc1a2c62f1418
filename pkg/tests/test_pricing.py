import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from volterra_mortality.errors import CalibrationError, InputError
from volterra_mortality.kernels import KernelSpec
from volterra_mortality.mortality import (
    AffineVolterraModel,
    ConstantHazard,
    SurvivalCurve,
    solve_psi,
    preset_model,
    validate_affine,
)
from volterra_mortality.pricing import (
    ProductKind,
    ProductSpec,
    _esscher_ratio,
    affine_retaining_apply,
    annuity_maturities,
    annuity_value,
    assurance_value,
    black_scholes_call,
    calibrate_esscher,
    death_benefit,
    endowment_value,
    esscher_mgf,
    initial_path,
    longevity_bond_price,
    longevity_call_price,
    price_product,
    survival_benefit,
)
from volterra_mortality.rates import AffineRateModel, bond_price
from volterra_mortality.simulation import RngPolicy, simulate_rate_batch, simulate_svie, simulate_svie_batch
from volterra_mortality.stepfun import StepFunction

RATES_52 = AffineRateModel(0.01, 0.5, 0.3, 0.01)
ZERO_RATE = AffineRateModel(0.0, 0.5, 0.0, 0.0)


def curve_for(model, t=0.0, T_max=10.0, dt=0.01, path=None, seed=1):
    if path is None:
        path = initial_path(model, dt) if t == 0 else simulate_svie(model, RngPolicy(seed), 0, t, dt)
    psi = solve_psi(model, max(T_max - t, dt), dt)
    return SurvivalCurve(model, psi, path, t, T_max)


def no_death(dt=0.01):
    model = AffineVolterraModel(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    return curve_for(model, T_max=10.0, dt=dt)


def mortality_mc(model, n_paths, T, dt, seed):
    x, _ = simulate_svie_batch(model, RngPolicy(seed), np.arange(n_paths), T, dt, scheme="resolvent")
    times = dt * np.arange(x.shape[1])
    mu = model.m(times)[None, :] + model.eta * x
    cum = np.zeros_like(mu)
    cum[:, 1:] = np.cumsum(0.5 * dt * (mu[:, 1:] + mu[:, :-1]), axis=1)
    return times, cum


def rate_mc(rates, n_paths, T, dt, seed):
    r, _ = simulate_rate_batch(rates, RngPolicy(seed), np.arange(n_paths), T, dt)
    cum = np.zeros_like(r)
    cum[:, 1:] = np.cumsum(0.5 * dt * (r[:, 1:] + r[:, :-1]), axis=1)
    return cum


def row_a_flat(level=0.02):
    return preset_model("A", m=ConstantHazard(level))


class TestSurvivalBenefit:
    def test_no_mortality(self):
        assert survival_benefit(no_death(), RATES_52, 0.01, 5.0) == pytest.approx(float(bond_price(RATES_52, 0, 5, 0.01)), rel=1e-14)

    def test_zero_rate(self):
        curve = curve_for(row_a_flat())
        assert survival_benefit(curve, ZERO_RATE, 0.0, 5.0) == pytest.approx(float(curve(5.0)), rel=1e-14)

    def test_maturity_check(self):
        curve = curve_for(row_a_flat(), t=1.0, T_max=5.0)
        with pytest.raises(InputError):
            survival_benefit(curve, RATES_52, 0.01, 0.5)

    def test_factorized_monte_carlo(self):
        model, n, T, dt = row_a_flat(), 10_000, 5.0, 0.01
        _, cum_mu = mortality_mc(model, n, T, dt, 40)
        cum_r = rate_mc(RATES_52, n, T, dt, 41)
        a, b = np.exp(-cum_r[:, -1]), np.exp(-cum_mu[:, -1])
        est = 2.0 * a.mean() * b.mean()
        se = 2.0 * math.sqrt((b.mean() * a.std(ddof=1)) ** 2 + (a.mean() * b.std(ddof=1)) ** 2) / math.sqrt(n)
        assert abs(survival_benefit(curve_for(model), RATES_52, 0.01, T, C=2.0) - est) < 3 * se

    def test_longevity_bond_joint_monte_carlo(self):
        model, n, T, dt = row_a_flat(), 10_000, 5.0, 0.01
        _, cum_mu = mortality_mc(model, n, T, dt, 42)
        cum_r = rate_mc(RATES_52, n, T, dt, 43)
        joint = np.exp(-cum_r[:, -1] - cum_mu[:, -1])
        se = joint.std(ddof=1) / math.sqrt(n)
        assert abs(longevity_bond_price(curve_for(model), RATES_52, 0.01, T) - joint.mean()) < 3 * se


class TestDeathBenefit:
    def test_no_mortality(self):
        assert death_benefit(no_death(), RATES_52, 0.01, 5.0) == pytest.approx(0.0, abs=1e-14)

    def test_zero_rate(self):
        curve = curve_for(row_a_flat())
        assert death_benefit(curve, ZERO_RATE, 0.0, 5.0) == pytest.approx(1 - float(curve(5.0)), rel=1e-12)

    def test_same_time(self):
        assert death_benefit(curve_for(row_a_flat()), RATES_52, 0.01, 0.0) == 0.0

    def test_death_time_monte_carlo(self):
        model, n, T, dt = row_a_flat(0.05), 10_000, 5.0, 0.01
        rates = AffineRateModel(0.01, 0.5, 0.05, 0.01)
        times, cum_mu = mortality_mc(model, n, T, dt, 44)
        cum_r = rate_mc(rates, n, T, dt, 45)
        thresholds = RngPolicy(46).generator(0).exponential(1.0, n)
        payoff = np.zeros(n)
        for p in range(n):
            if cum_mu[p, -1] >= thresholds[p]:
                tau = np.interp(thresholds[p], cum_mu[p], times)
                payoff[p] = math.exp(-np.interp(tau, times, cum_r[p]))
        se = payoff.std(ddof=1) / math.sqrt(n)
        value = death_benefit(curve_for(model, dt=dt), rates, 0.01, T)
        assert abs(value - payoff.mean()) < 3 * se

    def test_assurance_equals_unit_death_benefit(self):
        curve = curve_for(row_a_flat())
        assert assurance_value(curve, RATES_52, 0.01, 7.0) == pytest.approx(death_benefit(curve, RATES_52, 0.01, 7.0, 1.0), rel=1e-12)

    def test_assurance_trivial(self):
        assert assurance_value(no_death(), RATES_52, 0.01, 5.0) == pytest.approx(0.0, abs=1e-14)
        curve = curve_for(row_a_flat())
        assert assurance_value(curve, ZERO_RATE, 0.0, 5.0) == pytest.approx(1 - float(curve(5.0)), rel=1e-12)


class TestEndowment:
    def test_components(self):
        curve = curve_for(row_a_flat())
        assert endowment_value(curve, RATES_52, 0.01, 5.0, 3.0, 0.0) == survival_benefit(curve, RATES_52, 0.01, 5.0, 3.0)
        assert endowment_value(curve, RATES_52, 0.01, 5.0, 0.0, 2.0) == pytest.approx(death_benefit(curve, RATES_52, 0.01, 5.0, 2.0), rel=1e-14)

    @settings(max_examples=30, deadline=None)
    @given(c1=st.floats(0.0, 100.0), c2=st.floats(0.0, 100.0))
    def test_identity(self, c1, c2):
        curve = _ENDOWMENT_CURVE
        B = float(bond_price(RATES_52, 0.0, 5.0, 0.01))
        expected = c1 * B * float(curve(5.0)) + c2 * assurance_value(curve, RATES_52, 0.01, 5.0)
        assert endowment_value(curve, RATES_52, 0.01, 5.0, c1, c2) == pytest.approx(expected, rel=1e-12, abs=1e-12)

    def test_equal_payments(self):
        curve = curve_for(row_a_flat())
        B = float(bond_price(RATES_52, 0.0, 5.0, 0.01))
        C = 4.0
        expected = C * (assurance_value(curve, RATES_52, 0.01, 5.0) + B * float(curve(5.0)))
        assert endowment_value(curve, RATES_52, 0.01, 5.0, C, C) == pytest.approx(expected, rel=1e-12)


_ENDOWMENT_CURVE = curve_for(row_a_flat())


class TestAnnuity:
    def test_maturities_inclusive(self):
        np.testing.assert_array_equal(annuity_maturities(40.0, 20.0, 109.0), np.arange(60.0, 109.0))

    def test_single_term(self):
        model = preset_model("A")
        curve = curve_for(model, t=1.0, T_max=5.0)
        value = annuity_value(curve, RATES_52, 0.01, 2.0, 4.0)
        assert value == pytest.approx(float(bond_price(RATES_52, 1.0, 3.0, 0.01) * curve(3.0)), rel=1e-14)

    def test_count_when_trivial(self):
        assert annuity_value(no_death(), ZERO_RATE, 0.0, 1.0, 10.0) == pytest.approx(9.0, rel=1e-14)

    def test_empty_range(self):
        with pytest.raises(InputError):
            annuity_maturities(40.0, 20.0, 60.0)

    def test_summation_oracle(self):
        model = preset_model("A")
        dt = 0.01
        path = simulate_svie(model, RngPolicy(3), 0, 40.0, dt, scheme="resolvent")
        psi = solve_psi(model, 69.0, dt)
        curve = SurvivalCurve(model, psi, path, 40.0, 109.0)
        oracle = 0.0
        for T in range(60, 109):
            oracle += float(bond_price(RATES_52, 40.0, float(T), 0.01)) * float(curve(float(T)))
        assert annuity_value(curve, RATES_52, 0.01, 20.0, 109.0) == pytest.approx(oracle, rel=1e-12)


class TestLongevityCall:
    def setup_method(self):
        self.model = preset_model("B", m=ConstantHazard(0.0)).with_kernel(KernelSpec.constant())
        self.psi = solve_psi(self.model, 5.0, 0.001)

    def test_small_strike(self):
        price = longevity_call_price(self.model, self.psi, None, 0.0, 2.0, 5.0, 1e-9, 0.01, bl=0.8)
        assert price == pytest.approx(0.8, abs=1e-8)

    def test_zero_vol(self):
        model = replace(self.model, A0=0.0)
        price = longevity_call_price(model, self.psi, None, 0.0, 2.0, 5.0, 0.7, 0.01, bl=0.8)
        assert price == pytest.approx(0.8 - 0.7 * math.exp(-0.02), rel=1e-14)

    def test_nonpositive_strike(self):
        with pytest.raises(InputError):
            longevity_call_price(self.model, self.psi, None, 0.0, 2.0, 5.0, 0.0, 0.01, bl=0.8)

    def test_expiry_order(self):
        with pytest.raises(InputError):
            longevity_call_price(self.model, self.psi, None, 0.0, 5.0, 5.0, 0.8, 0.01, bl=0.8)

    def test_integrated_against_lognormal_mc(self):
        # dB_L / B_L = r dt + psi(T - s) sigma dW with the Markov psi, exact per-step Gaussian increments
        lam, eta, sigma = 0.5, 0.2, 0.01
        r, T, T1, bl, D, dt, n = 0.01, 5.0, 2.0, 0.8, 0.8, 0.01, 10_000
        steps = int(round(T1 / dt))
        s = dt * np.arange(steps)
        psi_mid = -(eta / lam) * (1 - np.exp(-lam * (T - s - 0.5 * dt)))
        vol2 = psi_mid ** 2 * sigma ** 2 * dt
        z = RngPolicy(50).generator(0).standard_normal((n, steps))
        log_b = math.log(bl) + r * T1 - 0.5 * vol2.sum() + z @ np.sqrt(vol2)
        payoff = math.exp(-r * T1) * np.maximum(np.exp(log_b) - D, 0.0)
        se = payoff.std(ddof=1) / math.sqrt(n)
        price = longevity_call_price(self.model, self.psi, None, 0.0, T1, T, D, r, bl=bl, variant="integrated")
        assert abs(price - payoff.mean()) < 3 * se

    def test_frozen_uses_larger_vol(self):
        frozen = longevity_call_price(self.model, self.psi, None, 0.0, 2.0, 5.0, 0.82, 0.01, bl=0.8)
        integ = longevity_call_price(self.model, self.psi, None, 0.0, 2.0, 5.0, 0.82, 0.01, bl=0.8, variant="integrated")
        # |psi| is increasing in its argument, so freezing at T - t overstates the variance
        assert frozen > integ

    def test_black_scholes_reference(self):
        # textbook value: S=100, K=100, r=5%, one year, 20% volatility
        assert black_scholes_call(100.0, 100.0, 0.05, 1.0, 0.2) == pytest.approx(10.450583572185565, rel=1e-12)


class TestEsscher:
    def setup_method(self):
        self.model = row_a_flat()

    def test_zero_and_one(self):
        assert esscher_mgf(self.model, None, 0.0, 5.0, 0.0) == 1.0
        g = float(curve_for(self.model)(5.0))
        assert esscher_mgf(self.model, None, 0.0, 5.0, 1.0) == pytest.approx(g, rel=1e-12)
        assert _esscher_ratio(self.model, 0.0, 5.0, 0.0, None, 0.01) == pytest.approx(g, rel=1e-12)

    @pytest.mark.parametrize("theta", [0.0, 0.5])
    def test_roundtrip(self, theta):
        ratio = _esscher_ratio(self.model, 0.0, 5.0, theta, None, 0.01)
        assert calibrate_esscher(self.model, 0.0, 5.0, ratio) == pytest.approx(theta, abs=1e-6)

    def test_out_of_range(self):
        with pytest.raises(CalibrationError):
            calibrate_esscher(self.model, 0.0, 5.0, 1.5)

    def test_log_convex(self):
        thetas = np.arange(-1.0, 2.01, 0.5)
        logm = np.log([esscher_mgf(self.model, None, 0.0, 5.0, th) for th in thetas])
        assert np.all(logm[2:] - 2 * logm[1:-1] + logm[:-2] >= -1e-8)


class TestAffineRetaining:
    def test_zero_phi(self):
        model = preset_model("A")
        assert affine_retaining_apply(model, 0.0) == model

    def test_vasicek_shift(self):
        model = AffineVolterraModel.vasicek(0.5, 0.0009, 0.05, 0.2, 0.001)
        out = affine_retaining_apply(model, 0.1)
        assert out.b0 - model.b0 == pytest.approx(2.5e-4, abs=1e-16)
        assert out.B == model.B

    def test_cir_shift(self):
        model = AffineVolterraModel.cir(0.5, 0.01, 0.2, 1.0, 0.01)
        out = affine_retaining_apply(model, 0.3)
        assert out.B == pytest.approx(model.B + 0.04 * 0.3)
        assert out.A1 == model.A1 and out.A0 == 0.0

    def test_step_phi_gaussian(self):
        model = AffineVolterraModel.vasicek(0.5, 0.0009, 0.05, 0.2, 0.001)
        out = affine_retaining_apply(model, StepFunction((1.0,), (0.0, 0.1)))
        assert float(out.b0_at(0.5)) == pytest.approx(model.b0)
        assert float(out.b0_at(1.5)) == pytest.approx(model.b0 + 2.5e-4)

    def test_step_phi_cir_rejected(self):
        model = AffineVolterraModel.cir(0.5, 0.01, 0.2, 1.0, 0.01)
        with pytest.raises(InputError):
            affine_retaining_apply(model, StepFunction((1.0,), (0.0, 0.1)))

    @settings(max_examples=30, deadline=None)
    @given(phi=st.floats(-5.0, 5.0), cir=st.booleans())
    def test_output_is_affine(self, phi, cir):
        model = AffineVolterraModel.cir(0.5, 0.01, 0.2, 1.0, 0.01) if cir else AffineVolterraModel.vasicek(0.5, 0.0009, 0.05, 0.2, 0.001)
        validate_affine(affine_retaining_apply(model, phi))


class TestBounds:
    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 2 ** 32), level=st.floats(0.0, 0.05))
    def test_price_bounds(self, seed, level):
        model = replace(preset_model("A", m=ConstantHazard(0.01)), A0=0.0005 ** 2)
        rates = AffineRateModel(level * 0.5, 0.5, 0.0, level)
        curve = curve_for(model, t=2.0, T_max=30.0, dt=0.05, seed=seed)
        B = float(bond_price(rates, 2.0, 20.0, level))
        lb = longevity_bond_price(curve, rates, level, 20.0)
        assert 0 <= lb <= B
        assert 0 <= assurance_value(curve, rates, level, 20.0) <= 1
        assert annuity_value(curve, rates, level, 1.0, 30.0) <= len(annuity_maturities(2.0, 1.0, 30.0))


class TestProductSpec:
    def test_dispatch(self):
        curve = curve_for(row_a_flat())
        for kind, fn in [
            ("survival_benefit", lambda: survival_benefit(curve, RATES_52, 0.01, 5.0, 2.0)),
            ("death_benefit", lambda: death_benefit(curve, RATES_52, 0.01, 5.0, 2.0)),
        ]:
            assert price_product(ProductSpec(kind, T=5.0, C=2.0), curve, RATES_52, 0.01) == fn()
        assert price_product(ProductSpec("endowment", T=5.0, C=(1.0, 2.0)), curve, RATES_52, 0.01) == endowment_value(curve, RATES_52, 0.01, 5.0, 1.0, 2.0)

    @pytest.mark.parametrize(
        "kw",
        [
            dict(kind="survival_benefit"),
            dict(kind="endowment", T=5.0, C=1.0),
            dict(kind="longevity_call", T=5.0, D=0.8),
            dict(kind="longevity_call", T=5.0, D=0.8, T1=6.0),
            dict(kind="annuity", t_prime=-1.0),
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(InputError):
            ProductSpec(**kw)

    def test_call_through_dispatch_rejected(self):
        spec = ProductSpec(ProductKind.LONGEVITY_CALL, T=5.0, D=0.8, T1=2.0)
        with pytest.raises(InputError):
            price_product(spec, curve_for(row_a_flat()), RATES_52, 0.01)

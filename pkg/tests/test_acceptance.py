"""Acceptance criteria 1 to 10.

Each test records a one-line verdict (printed in the terminal summary by
``conftest.py``) and asserts the criterion at its stated tolerance and
runtime budget.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from volterra_mortality.config import parse_config
from volterra_mortality.experiments import annuity_differences
from volterra_mortality.hedging import (
    HedgeEngine,
    HedgePlan,
    feedback_control,
    hedge_coefficients,
    mv_objective,
    optimal_strategy,
    p_value,
    q_values,
    run_strategy,
    simulate_hedge_scenarios,
)
from volterra_mortality.kernels import KernelSpec, convolve, eval_kernel, kernel_resolvent
from volterra_mortality.mortality import (
    PARAMETER_ROWS,
    SurvivalCurve,
    SurvivalQuery,
    conditional_mean,
    solve_psi,
    survival_probability,
    preset_model,
)
from volterra_mortality.pricing import calibrate_esscher, esscher_mgf, initial_path, longevity_call_price
from volterra_mortality.rates import AffineRateModel, bond_coefficients, bond_price
from volterra_mortality.riccati import solve_affine_odes
from volterra_mortality.simulation import RngPolicy, SamplePath, simulate_svie, simulate_svie_batch

DEFAULTS = parse_config("")
SEED = DEFAULTS.numerics.master_seed
HEDGE_DT = DEFAULTS.numerics.hedge_dt
HEDGE_PATHS = DEFAULTS.numerics.hedge_paths


def verdict(record_property, ok, detail):
    record_property("detail", detail)
    assert ok, detail


def markov_affine(lam, theta, sigma, eta, tau):
    """(A, beta) of E[exp(-eta int X)] for an OU factor by an adaptive ODE solver."""
    sol = solve_ivp(
        lambda t, y: [lam * theta * y[1] + 0.5 * sigma ** 2 * y[1] ** 2, -eta - lam * y[1]],
        (0.0, tau),
        [0.0, 0.0],
        method="DOP853",
        rtol=1e-12,
        atol=1e-15,
    )
    return sol.y[0, -1], sol.y[1, -1]


@pytest.fixture(scope="module")
def hedge_setup():
    start = time.perf_counter()
    plan = HedgePlan.default()
    market = HedgeEngine(plan, HEDGE_DT)
    markov = HedgeEngine(plan.markov(), HEDGE_DT)
    scen = simulate_hedge_scenarios(plan, RngPolicy(SEED), HEDGE_PATHS, HEDGE_DT)
    cv = hedge_coefficients(market, scen)
    cm = hedge_coefficients(markov, scen)
    runs = {
        "volterra": run_strategy(plan, scen, cv, market, name="volterra"),
        "markov": run_strategy(plan, scen, cm, market, name="markov"),
    }
    return dict(plan=plan, market=market, scen=scen, cv=cv, runs=runs, elapsed=time.perf_counter() - start)


def test_criterion_01_resolvent_identities(record_property):
    # K * R by Gauss-Legendre on each grid cell, with the kernel evaluated
    # pointwise and R linear between nodes; independent of the convolution weights
    families = [KernelSpec.constant(1.0), KernelSpec.fractional(1.33), KernelSpec.exponential(0.5), KernelSpec.gamma(1.33, 0.5)]
    nodes, weights = np.polynomial.legendre.leggauss(8)
    dt = 1e-3
    worst = {}
    elapsed = 0.0
    for spec in families:
        start = time.perf_counter()
        R = kernel_resolvent(spec, 1.0, 2.0, dt)
        elapsed += time.perf_counter() - start
        resid = []
        for k in range(50, len(R.times), 50):
            left = R.times[:k, None]
            s = left + 0.5 * dt * (nodes[None, :] + 1.0)
            frac = (s - left) / dt
            r_s = (1 - frac) * R.values[:k, None] + frac * R.values[1 : k + 1, None]
            kr = 0.5 * dt * np.sum(weights[None, :] * eval_kernel(spec, R.times[k] - s) * r_s)
            resid.append(kr - float(eval_kernel(spec, R.times[k])) + R.values[k])
        worst[spec.family.value] = float(np.max(np.abs(resid)))
    ok = max(worst.values()) < 1e-3 and elapsed < 5.0
    detail = "sup residual " + ", ".join(f"{k}={v:.2e}" for k, v in worst.items()) + f" (limit 1e-3), resolvents in {elapsed:.2f}s"
    verdict(record_property, ok, detail)


def test_criterion_02_markov_limit_pricing(record_property):
    start = time.perf_counter()
    p = PARAMETER_ROWS["B"]
    model = preset_model("B").with_kernel(KernelSpec.constant())
    dt, t = 0.01, 40.0
    path = simulate_svie(model, RngPolicy(SEED), 0, t, dt, scheme="resolvent")
    psi = solve_psi(model, 109.0 - t, dt)
    worst = 0.0
    for T in np.arange(41.0, 110.0):
        g = survival_probability(model, psi, SurvivalQuery(t, float(T), path))
        A, beta = markov_affine(p["lam"], p["theta"], p["sigma"], p["eta"], T - t)
        oracle = math.exp(-model.m.integral(t, T) + A + beta * path.x[-1])
        worst = max(worst, abs(g / oracle - 1.0))
    elapsed = time.perf_counter() - start
    verdict(record_property, worst < 1e-4 and elapsed < 10.0, f"max relative error {worst:.2e} (limit 1e-4), {elapsed:.1f}s")


def test_criterion_03_monte_carlo_survival(record_property):
    start = time.perf_counter()
    model = preset_model("A")
    n_paths, dt = 10_000, 0.01
    x, _ = simulate_svie_batch(model, RngPolicy(SEED), np.arange(n_paths), 10.0, dt, scheme="euler")
    times = dt * np.arange(x.shape[1])
    mu = model.m(times)[None, :] + model.eta * x
    cum = np.zeros_like(mu)
    cum[:, 1:] = np.cumsum(0.5 * dt * (mu[:, 1:] + mu[:, :-1]), axis=1)
    curve = SurvivalCurve(model, solve_psi(model, 10.0, dt), initial_path(model, dt), 0.0, 10.0)
    zs = []
    for T in (1.0, 5.0, 10.0):
        disc = np.exp(-cum[:, int(round(T / dt))])
        se = disc.std(ddof=1) / math.sqrt(n_paths)
        zs.append(abs(disc.mean() - float(curve(T))) / se)
    elapsed = time.perf_counter() - start
    ok = max(zs) < 3.0 and elapsed < 120.0
    detail = "|MC - g(0,T)| / SE at T=1,5,10: " + ", ".join(f"{z:.2f}" for z in zs) + f" (limit 3), {elapsed:.1f}s"
    verdict(record_property, ok, detail)


def test_criterion_04_conditional_mean(record_property):
    start = time.perf_counter()
    zs = {}
    for alpha in (1.0, 1.33):
        model = preset_model("A", alpha=alpha)
        if alpha == 1.0:
            model = model.with_kernel(KernelSpec.constant())
        dt = 0.01
        x, _ = simulate_svie_batch(model, RngPolicy(SEED), np.arange(10_000), 1.0, dt, scheme="euler")
        x1 = x[:, -1]
        formula = float(conditional_mean(model, SamplePath(dt, np.array([model.x0]), np.zeros(0)), 0.0, 1.0))
        zs[alpha] = abs(x1.mean() - formula) / (x1.std(ddof=1) / math.sqrt(len(x1)))
    elapsed = time.perf_counter() - start
    ok = max(zs.values()) < 3.0 and elapsed < 60.0
    detail = ", ".join(f"alpha={a}: {z:.2f} SE" for a, z in zs.items()) + f" (limit 3), {elapsed:.1f}s"
    verdict(record_property, ok, detail)


def test_criterion_05_boundary_identities(record_property, hedge_setup):
    plan, market, scen = hedge_setup["plan"], hedge_setup["market"], hedge_setup["scen"]
    model = preset_model("A")
    path = simulate_svie(model, RngPolicy(SEED), 0, 2.0, 0.01)
    g_tt = survival_probability(model, solve_psi(model, 1.0, 0.01), SurvivalQuery(2.0, 2.0, path))
    P_T0 = p_value(plan, plan.T0, 0.07, engine=market)
    c = hedge_setup["cv"].target
    end_path = SamplePath(scen.dt, scen.x[0], scen.dW[0], scen.dWp[0], scen.r[0], scen.int_mu[0])
    _, Q_T0 = q_values(plan, plan.T0, end_path, float(scen.r[0, -1]), c, engine=market)
    rates = AffineRateModel(0.01, 0.5, 0.3, 0.01)
    B_TT = float(bond_price(rates, 7.0, 7.0, 0.05))
    _, beta0 = bond_coefficients(rates, 0.0)
    beta_ode = solve_affine_odes(rates, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0, 0.01).beta_tilde.values[0]
    gap = hedge_setup["runs"]["volterra"].accounting_gap
    checks = {
        "g(t,t)=1": g_tt == 1.0,
        "P(T0)=1": P_T0 == 1.0,
        "Q(T0)=-c": Q_T0 == -c,
        "B(T,T)=1": B_TT == 1.0,
        "beta(T,T)=0": float(beta0) == 0.0 and beta_ode == 0.0,
        "accounting<1e-9": gap < 1e-9,
    }
    detail = ", ".join(f"{k}:{'ok' if v else 'FAIL'}" for k, v in checks.items()) + f" (accounting gap {gap:.1e})"
    verdict(record_property, all(checks.values()), detail)


def test_criterion_06_esscher_roundtrip(record_property):
    start = time.perf_counter()
    model = preset_model("A")
    errors = {}
    for theta in (-0.5, 0.0, 0.5, 1.0):
        ratio = esscher_mgf(model, None, 0.0, 5.0, theta + 1.0) / esscher_mgf(model, None, 0.0, 5.0, theta)
        errors[theta] = abs(calibrate_esscher(model, 0.0, 5.0, ratio) - theta)
    elapsed = time.perf_counter() - start
    ok = max(errors.values()) < 1e-6 and elapsed < 30.0
    detail = "max |theta_hat - theta*| " + f"{max(errors.values()):.1e} (limit 1e-6), {elapsed:.1f}s"
    verdict(record_property, ok, detail)


def test_criterion_07_annuity_dispersion(record_property):
    start = time.perf_counter()
    diff = annuity_differences(DEFAULTS, n_paths=15_000)
    elapsed = time.perf_counter() - start
    mean, peak = float(diff.mean()), float(np.max(np.abs(diff)))
    ok = abs(mean) < 1.0 and peak >= 2.0 and elapsed < 300.0
    detail = f"mean {mean:+.3f}% (limit |.|<1), max |diff| {peak:.3f}% (needs >= 2), {elapsed:.1f}s"
    verdict(record_property, ok, detail)


def test_criterion_08_option_formula(record_property):
    start = time.perf_counter()
    o = DEFAULTS.option
    model = preset_model("B").with_kernel(KernelSpec.constant())
    p = PARAMETER_ROWS["B"]
    psi = solve_psi(model, o.T, 0.001)
    # lognormal oracle: dB_L / B_L = r dt + psi(T - s) sigma dW, exact Gaussian increments per step
    dt, n = 0.01, 100_000
    steps = int(round(o.T1 / dt))
    s = dt * np.arange(steps)
    psi_mid = -(p["eta"] / p["lam"]) * (1 - np.exp(-p["lam"] * (o.T - s - 0.5 * dt)))
    vol2 = psi_mid ** 2 * p["sigma"] ** 2 * dt
    total = np.zeros(n)
    gen = RngPolicy(SEED).generator(0)
    for k in range(steps):
        total += math.sqrt(vol2[k]) * gen.standard_normal(n)
    terminal = o.bl * np.exp(o.r * o.T1 - 0.5 * vol2.sum() + total)
    zs = []
    for D in o.strikes:
        payoff = math.exp(-o.r * o.T1) * np.maximum(terminal - D, 0.0)
        price = longevity_call_price(model, psi, None, 0.0, o.T1, o.T, D, o.r, bl=o.bl, variant="integrated")
        zs.append(abs(price - payoff.mean()) / (payoff.std(ddof=1) / math.sqrt(n)))
    tiny = 1e-12
    d_limit = abs(
        longevity_call_price(model, psi, None, 0.0, o.T1, o.T, tiny, o.r, bl=o.bl, variant="integrated")
        - (o.bl - tiny * math.exp(-o.r * o.T1))
    )
    flat = replace(model, A0=0.0)
    s_limit = max(
        abs(
            longevity_call_price(flat, psi, None, 0.0, o.T1, o.T, D, o.r, bl=o.bl, variant="integrated")
            - max(o.bl - D * math.exp(-o.r * o.T1), 0.0)
        )
        for D in (0.7, 0.8, 0.9)
    )
    elapsed = time.perf_counter() - start
    ok = max(zs) < 3.0 and d_limit < 1e-10 and s_limit < 1e-10 and elapsed < 60.0
    detail = (
        f"max |price - MC| / SE {max(zs):.2f} (limit 3), D->0 gap {d_limit:.1e}, sigma->0 gap {s_limit:.1e} "
        f"(limit 1e-10), {elapsed:.1f}s"
    )
    verdict(record_property, ok, detail)


def test_criterion_09_hedging_optimality_and_ordering(record_property, hedge_setup):
    start = time.perf_counter()
    plan, market, scen, cv = hedge_setup["plan"], hedge_setup["market"], hedge_setup["scen"], hedge_setup["cv"]
    c = cv.target
    base_sq = (hedge_setup["runs"]["volterra"].terminal - c) ** 2
    u1_0, u2_0 = (float(u[0]) for u in cv.controls(0, np.full(scen.n_paths, plan.M0), c))
    d1, d2 = 0.1 * u1_0, 0.1 * u2_0
    shifts = [(d1, 0.0), (-d1, 0.0), (0.0, d2), (0.0, -d2), (d1, d2)]
    beaten, deltas = [], []
    for shift in shifts:
        run = run_strategy(plan, scen, cv, market, shift=shift)
        gain = (run.terminal - c) ** 2 - base_sq
        beaten.append(np.mean(base_sq) <= np.mean((run.terminal - c) ** 2))
        deltas.append(f"{gain.mean():+.0f}+-{gain.std(ddof=1) / math.sqrt(len(gain)):.0f}")
    v, m = hedge_setup["runs"]["volterra"].terminal, hedge_setup["runs"]["markov"].terminal
    mv_v, mv_m = mv_objective(v, plan.phi_RA), mv_objective(m, plan.phi_RA)
    ratio = float(np.var(v) / np.var(m))
    elapsed = time.perf_counter() - start + hedge_setup["elapsed"]
    part_a = all(beaten)
    part_b = mv_v < mv_m and ratio < 1.0
    detail = (
        f"(a) u* beats {sum(beaten)}/5 shifted strategies (excess objective {', '.join(deltas)}); "
        f"(b) mv volterra {mv_v:.1f} vs markov {mv_m:.1f}, variance ratio {ratio:.4f}; {elapsed:.0f}s"
    )
    verdict(record_property, part_a and part_b and elapsed < 300.0, detail)


def test_criterion_10_strategy_form_equivalence(record_property, hedge_setup):
    plan, scen, cv = hedge_setup["plan"], hedge_setup["scen"], hedge_setup["cv"]
    gen = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(1000):
        p = int(gen.integers(scen.n_paths))
        n = int(gen.integers(scen.x.shape[1] - 1))
        M = float(gen.uniform(-5000.0, 10000.0))
        state = cv.state(p, n, M, cv.target, float(scen.r[p, n]))
        a = np.array(optimal_strategy(plan, state, cv.m_bar))
        b = np.array(feedback_control(plan, state))
        worst = max(worst, float(np.max(np.abs(a - b))))
    verdict(record_property, worst < 1e-10, f"max |u_prop - u_feedback| {worst:.1e} over 1000 states (limit 1e-10)")

# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#   kernelspec:
#     display_name: Python 3
#     language: python
#     name: python3
# ---

# %% [markdown]
# # Mean-variance hedging of an insurance portfolio
#
# Scenarios come from the alpha = 1.33 model.  One hedger uses the correct
# kernel, the other assumes a constant kernel; both trade the longevity
# bond and the zero-coupon bond every 1/250 year.

# %%
import numpy as np

from volterra_mortality.hedging import (
    HedgeEngine,
    HedgePlan,
    hedge_coefficients,
    mv_objective,
    objective_closed_form,
    run_strategy,
    simulate_hedge_scenarios,
)
from volterra_mortality.simulation import RngPolicy

plan = HedgePlan.default()
dt, n_paths = 1 / 250, 500
market = HedgeEngine(plan, dt)
markov = HedgeEngine(plan.markov(), dt)
scen = simulate_hedge_scenarios(plan, RngPolicy(20240101), n_paths, dt)

# %%
cv = hedge_coefficients(market, scen)
cm = hedge_coefficients(markov, scen)
print(f"M_bar* = {cv.m_bar:.2f}, target c = {cv.target:.2f}")

# %%
runs = {
    "volterra": run_strategy(plan, scen, cv, market),
    "markov": run_strategy(plan, scen, cm, market),
    "unhedged": run_strategy(plan, scen, None, market),
}
for name, run in runs.items():
    x = run.terminal
    print(f"{name:9s} mean={x.mean():9.2f} var={x.var():10.1f} objective={mv_objective(x, plan.phi_RA):12.1f}")

# %% [markdown]
# ## Inner objective: simulation against the closed form

# %%
sq = (runs["volterra"].terminal - cv.target) ** 2
value, se = objective_closed_form(plan, cv.target, cv, scen)
print(f"simulated {sq.mean():.1f} +- {sq.std(ddof=1) / np.sqrt(n_paths):.1f}, closed form {value:.1f} +- {se:.1f}")

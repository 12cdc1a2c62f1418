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
# # Survival curves and product prices
#
# A fractional-kernel mortality factor (alpha = 1.33) against its
# constant-kernel counterpart, both conditioned on the same simulated
# history up to age 40.

# %%
from pathlib import Path

import numpy as np

from volterra_mortality.config import parse_config
from volterra_mortality.experiments import annuity_differences, option_prices
from volterra_mortality.kernels import KernelSpec
from volterra_mortality.mortality import SurvivalCurve, solve_psi, preset_model
from volterra_mortality.plots import histogram_plot, line_plot
from volterra_mortality.simulation import RngPolicy, simulate_svie

out = Path("notebook_output")
out.mkdir(exist_ok=True)

# %% [markdown]
# ## One history, two models

# %%
t, horizon, dt = 40.0, 109.0, 0.01
vol = preset_model("A")
mk = preset_model("B").with_kernel(KernelSpec.constant())
path = simulate_svie(vol, RngPolicy(20240101), 0, t, dt, scheme="resolvent")
years = t + np.arange(int(horizon - t) + 1)
gv = SurvivalCurve(vol, solve_psi(vol, horizon - t, dt), path, t, horizon)(years)
gm = SurvivalCurve(mk, solve_psi(mk, horizon - t, dt), path, t, horizon)(years)
print(np.column_stack([years, gv, gm])[::10])
line_plot(out / "survival.svg", years, {"volterra": gv, "markov": gm}, "Survival from age 40", "T", "g(40, T)")

# %% [markdown]
# Both curves start at one.  The fractional model reacts to the whole
# history, so the gap can take either sign depending on the path.

# %% [markdown]
# ## Deferred annuity across histories

# %%
cfg = parse_config("")
diff = annuity_differences(cfg, n_paths=2000)
print(f"mean {diff.mean():+.3f}%  sd {diff.std():.3f}%  max |diff| {np.abs(diff).max():.3f}%")
histogram_plot(out / "annuity.svg", diff, title="Annuity percentage difference", xlabel="percent")

# %% [markdown]
# ## Longevity call across strikes

# %%
for strike, pv, pm, pct in option_prices(cfg):
    print(f"D={strike:.3f}  volterra={pv:.6f}  markov={pm:.6f}  gap={pct:+.2f}%")

"""Desk-scale experiments driven by :class:`~volterra_mortality.config.ExperimentConfig`.

Each runner writes CSV files whose last line is a comment recording the
SHA-256 of the configuration and the master seed.  Outputs depend only on
the configuration and the seed.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .errors import InputError
from .hedging import (
    HedgeEngine,
    hedge_coefficients,
    mv_objective,
    run_strategy,
    simulate_hedge_scenarios,
    write_wealth_csv,
)
from .kernels import grid_size
from .mortality import (
    AffineVolterraModel,
    SurvivalCurve,
    log_survival_from_means,
    markov_conditional_mean,
    mean_tables,
    solve_psi,
)
from .plots import histogram_plot, line_plot
from .pricing import annuity_maturities, longevity_call_price, price_product
from .rates import bond_price
from .simulation import RngPolicy, SamplePath, Stream, simulate_svie_batch

__all__ = [
    "write_csv",
    "simulate_history",
    "markov_log_survival",
    "survival_curves",
    "annuity_differences",
    "annuity_histogram",
    "option_gap",
    "hedging_comparison",
    "price_single",
    "run_experiment",
]


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return str(value)


def write_csv(filename, header, rows, cfg: ExperimentConfig) -> Path:
    """Write rows with a header and a trailing metadata comment."""
    filename = Path(filename)
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
        fh.write(f"# config_sha256={cfg.source_hash} seed={cfg.numerics.master_seed}\n")
    return filename


def _append_metadata(filename, cfg: ExperimentConfig) -> None:
    with open(filename, "a") as fh:
        fh.write(f"# config_sha256={cfg.source_hash} seed={cfg.numerics.master_seed}\n")


def simulate_history(model: AffineVolterraModel, rng: RngPolicy, path_index: int, t: float, dt: float) -> SamplePath:
    """One factor history on ``[0, t]``."""
    scheme = "resolvent" if model.A1 == 0.0 else "euler"
    x, dW = simulate_svie_batch(model, rng, [path_index], t, dt, scheme=scheme)
    return SamplePath(dt=dt, x=x[0], dW=dW[0], path_index=path_index)


def markov_log_survival(model: AffineVolterraModel, psi, x_t: float, t: float, T_max: float, dt: float):
    """Log survival of a constant-kernel model restarted at ``x_t``.

    Returns
    -------
    (ndarray, ndarray)
        Maturities ``t + k dt`` and ``log g(t, .)``.
    """
    n = int(math.ceil((T_max - t) / dt - 1e-9))
    s = t + dt * np.arange(n + 1)
    xi = np.asarray(markov_conditional_mean(model, x_t, t, s), dtype=float)
    psi_grid = np.asarray(psi(dt * np.arange(n + 1)))
    return s, log_survival_from_means(model, psi_grid, xi, t, dt)


def survival_curves(cfg: ExperimentConfig, out_dir: Path) -> list:
    """``(history, T, g_volterra, g_markov)`` at whole years from ``t``."""
    m, num = cfg.mortality, cfg.numerics
    vol = m.model(base_dir=cfg.base_dir)
    mk = m.model(alpha=1.0, base_dir=cfg.base_dir)
    horizon = num.horizon - m.t
    psi_v = solve_psi(vol, horizon, num.dt)
    psi_m = solve_psi(mk, horizon, num.dt)
    rng = RngPolicy(num.master_seed)
    years = m.t + np.arange(int(math.floor(horizon + 1e-9)) + 1)
    rows = []
    curves = {}
    for h in range(num.histories):
        path = simulate_history(vol, rng, h, m.t, num.dt)
        gv = SurvivalCurve(vol, psi_v, path, m.t, num.horizon)(years)
        s, lg = markov_log_survival(mk, psi_m, float(path.x[-1]), m.t, num.horizon, num.dt)
        gm = np.exp(np.interp(years, s, lg))
        curves[h] = (gv, gm)
        rows.extend((h, T, a, b) for T, a, b in zip(years, gv, gm))
    out = [write_csv(out_dir / "survival_curves.csv", ["history", "T", "g_volterra", "g_markov"], rows, cfg)]
    if num.plots:
        gv, gm = curves[0]
        svg = out_dir / "survival_curves.svg"
        line_plot(svg, years, {"volterra": gv, "markov": gm}, "Survival probability", "T", "g(t, T)")
        out.append(svg)
    return out


def annuity_differences(cfg: ExperimentConfig, n_paths: int | None = None, block: int = 500) -> np.ndarray:
    """Percentage differences of the deferred annuity, Volterra against Markov.

    Both models see the same history, generated by the Volterra model.  For
    a Gaussian factor the realized ``X_t`` and the integrated conditional
    mean ``int_t^T E[X_s|F_t] ds`` are linear in the noise increments, so
    each block of paths is valued with one matrix product.
    """
    m, num = cfg.mortality, cfg.numerics
    n_paths = num.n_paths if n_paths is None else n_paths
    vol = m.model(base_dir=cfg.base_dir)
    mk = m.model(alpha=1.0, base_dir=cfg.base_dir)
    if vol.A1 != 0.0:
        raise InputError("annuity_histogram needs a Gaussian (vasicek) factor")
    h, t = num.dt, m.t
    rates = cfg.rates.model()
    Ts = annuity_maturities(t, cfg.product.t_prime, cfg.product.x_star)
    bonds = bond_price(rates, t, Ts, rates.z0)
    n_t = grid_size(t, h)
    tv = mean_tables(vol.kernel, vol.B, Ts[-1], h)
    tm = mean_tables(mk.kernel, mk.B, Ts[-1] - t, h)

    def je(tables, tau):
        return np.interp(np.asarray(tau) / h, np.arange(tables.n + 1), tables.je)

    def ie(tables, tau):
        return tables.ie_at(tau)

    b0 = float(vol.b0)
    tj = h * np.arange(n_t)
    C = (
        je(tv, Ts[None, :] - tj[:, None])
        - je(tv, t - tj)[:, None]
        - je(tv, Ts[None, :] - tj[:, None] - h)
        + je(tv, t - tj - h)[:, None]
    ) / h
    det_int = (Ts - t) * vol.x0 + (vol.B * vol.x0 + b0) * (je(tv, Ts) - je(tv, t))
    w = tv.noise_weights(n_t)
    w_now = w[n_t:0:-1]
    x_det = (1.0 + vol.B * ie(tv, t)) * vol.x0 + b0 * ie(tv, t)

    horizon = Ts[-1] - t
    quad = {}
    for key, model in (("v", vol), ("m", mk)):
        psi = solve_psi(model, horizon, h)
        grid = np.asarray(psi.psi.values[: grid_size(horizon, h) + 1]) ** 2
        cum = np.zeros_like(grid)
        cum[1:] = np.cumsum(0.5 * h * (grid[1:] + grid[:-1]))
        quad[key] = np.interp((Ts - t) / h, np.arange(len(cum)), cum)
    base = np.array([vol.m.integral(t, T) for T in Ts])
    log_v_det = -base + 0.5 * vol.A0 * quad["v"]
    log_m_det = -base + 0.5 * mk.A0 * quad["m"]
    je_m = je(tm, Ts - t)

    rng = RngPolicy(num.master_seed)
    sig = math.sqrt(vol.A0)
    out = np.empty(n_paths)
    for start in range(0, n_paths, block):
        idx = np.arange(start, min(start + block, n_paths))
        eps = rng.normals(idx, Stream.MORTALITY, n_t, sig * math.sqrt(h))
        int_v = det_int + eps @ C
        x_t = x_det + eps @ w_now
        int_m = x_t[:, None] * (Ts - t) + (mk.B * x_t[:, None] + b0) * je_m
        a_v = np.exp(log_v_det - vol.eta * int_v) @ bonds
        a_m = np.exp(log_m_det - mk.eta * int_m) @ bonds
        out[idx] = 100.0 * (a_v - a_m) / a_m
    return out


def annuity_histogram(cfg: ExperimentConfig, out_dir: Path) -> list:
    """Per-path percentage differences of the annuity value."""
    diff = annuity_differences(cfg)
    rows = ((p, d) for p, d in enumerate(diff))
    out = [write_csv(out_dir / "annuity_histogram.csv", ["path_id", "pct_diff"], rows, cfg)]
    if cfg.numerics.plots:
        svg = out_dir / "annuity_histogram.svg"
        histogram_plot(svg, diff, title="Annuity percentage difference", xlabel="percent")
        out.append(svg)
    return out


def option_prices(cfg: ExperimentConfig):
    """``(strike, price_volterra, price_markov, pct_diff)`` rows."""
    m, o, num = cfg.mortality, cfg.option, cfg.numerics
    vol = m.model(base_dir=cfg.base_dir)
    mk = m.model(alpha=1.0, base_dir=cfg.base_dir)
    psi_v = solve_psi(vol, o.T, num.dt)
    psi_m = solve_psi(mk, o.T, num.dt)
    rows = []
    for D in o.strikes:
        pv = longevity_call_price(vol, psi_v, None, 0.0, o.T1, o.T, D, o.r, bl=o.bl, variant=o.variant)
        pm = longevity_call_price(mk, psi_m, None, 0.0, o.T1, o.T, D, o.r, bl=o.bl, variant=o.variant)
        rows.append((D, pv, pm, 100.0 * (pv - pm) / pm if pm > 0 else float("nan")))
    return rows


def option_gap(cfg: ExperimentConfig, out_dir: Path) -> list:
    rows = option_prices(cfg)
    out = [write_csv(out_dir / "option_gap.csv", ["strike", "price_volterra", "price_markov", "pct_diff"], rows, cfg)]
    if cfg.numerics.plots:
        svg = out_dir / "option_gap.svg"
        strikes = [r[0] for r in rows]
        line_plot(svg, strikes, {"volterra": [r[1] for r in rows], "markov": [r[2] for r in rows]}, "Longevity call", "strike", "price")
        out.append(svg)
    return out


def hedging_summary(cfg: ExperimentConfig):
    """Run the three strategies on common scenarios.

    Returns
    -------
    (dict, HedgeScenarios)
        Strategy name to :class:`~volterra_mortality.hedging.WealthRun`.
    """
    num = cfg.numerics
    plan = cfg.hedge.plan()
    scen = simulate_hedge_scenarios(plan, RngPolicy(num.master_seed), num.hedge_paths, num.hedge_dt)
    market = HedgeEngine(plan, num.hedge_dt)
    markov = HedgeEngine(plan.markov(), num.hedge_dt)
    runs = {
        "volterra": run_strategy(plan, scen, hedge_coefficients(market, scen, num.threads), market, name="volterra"),
        "markov": run_strategy(plan, scen, hedge_coefficients(markov, scen, num.threads), market, name="markov"),
        "unhedged": run_strategy(plan, scen, None, market, name="unhedged"),
    }
    return runs, scen


def hedging_comparison(cfg: ExperimentConfig, out_dir: Path) -> list:
    runs, scen = hedging_summary(cfg)
    phi = cfg.hedge.phi_RA
    rows = []
    for name, run in runs.items():
        x = run.terminal
        rows.append((name, mv_objective(x, phi), float(np.mean(x)), float(np.var(x)), run.target))
    out = [write_csv(out_dir / "hedging_summary.csv", ["strategy", "objective", "mean", "variance", "target"], rows, cfg)]
    for name, run in runs.items():
        fn = out_dir / f"wealth_{name}.csv"
        write_wealth_csv(run, scen, fn, max_paths=cfg.hedge.max_csv_paths)
        _append_metadata(fn, cfg)
        out.append(fn)
    if cfg.numerics.plots:
        svg = out_dir / "hedging_wealth.svg"
        histogram_plot(svg, runs["volterra"].terminal, title="Terminal wealth (volterra)", xlabel="M(T0)")
        out.append(svg)
    return out


def price_single(cfg: ExperimentConfig, out_dir: Path) -> list:
    """Price the configured product on the seeded history ``0``."""
    m, num = cfg.mortality, cfg.numerics
    vol = m.model(base_dir=cfg.base_dir)
    spec = cfg.product.spec(m.t)
    T_end = spec.x_star - 1.0 if spec.kind.value == "annuity" else spec.T
    psi = solve_psi(vol, T_end - m.t, num.dt)
    path = simulate_history(vol, RngPolicy(num.master_seed), 0, m.t, num.dt)
    curve = SurvivalCurve(vol, psi, path, m.t, T_end)
    rates = cfg.rates.model()
    value = price_product(spec, curve, rates, rates.z0)
    return [write_csv(out_dir / "price.csv", ["product_id", "t", "T", "value"], [(spec.kind.value, m.t, T_end, value)], cfg)]


_RUNNERS = {
    "survival_curves": survival_curves,
    "annuity_histogram": annuity_histogram,
    "option_gap": option_gap,
    "hedging_comparison": hedging_comparison,
    "price_single": price_single,
}


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> list:
    """Run ``cfg.name`` and return the written files."""
    out = Path(cfg.output_dir if out_dir is None else out_dir)
    if cfg.base_dir is not None and not out.is_absolute() and out_dir is None:
        out = cfg.base_dir / out
    out.mkdir(parents=True, exist_ok=True)
    return _RUNNERS[cfg.name](cfg, out)

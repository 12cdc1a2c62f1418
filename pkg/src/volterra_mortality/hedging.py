"""Mean-variance longevity hedging with a longevity bond and a zero-coupon bond.

The insurer's wealth follows

.. math::

    dM = (M r + u^\\top \\nu - \\pi)\\,dt + u^\\top \\sigma_S^\\top dW - z\\,dN ,

with ``u = (u1, u2)`` the amounts held in the longevity bond and the bond,
``pi = k2 exp(-int_0^t mu)`` the annuity outflow and claims arriving at
intensity ``k1 mu``.  The optimal control is affine in ``M``; its
coefficients depend on the factor history through the conditional means
under the measure whose Brownian motion is ``W + int (phi, vartheta) dt``.

All quantities are evaluated on the uniform grid ``t_n = n dt`` of
``[0, T0]``.  :class:`HedgeEngine` precomputes the deterministic tables
once; per-path coefficients are then obtained at ``O(n)`` cost per step.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import InputError, SingularityError
from .kernels import KernelSpec, grid_size
from .mortality import AffineVolterraModel, ConstantHazard, _forced_mean, mean_tables
from .rates import AffineRateModel, bond_coefficients
from .riccati import solve_riccati_volterra
from .simulation import ClaimLaw, RngPolicy, SamplePath, Stream, simulate_rate_batch, simulate_svie_batch
from .stepfun import StepFunction

__all__ = [
    "HedgePlan",
    "HedgeState",
    "HedgeEngine",
    "HedgeScenarios",
    "HedgeCoefficients",
    "WealthRun",
    "Strategy",
    "hedge_vols",
    "p_value",
    "q_values",
    "eta_coeffs",
    "hedge_state",
    "optimal_strategy",
    "feedback_control",
    "m_bar_star",
    "simulate_hedge_scenarios",
    "hedge_coefficients",
    "sigma_s",
    "run_strategy",
    "simulate_hedged_wealth",
    "mv_objective",
    "objective_closed_form",
    "write_wealth_csv",
]


class Strategy(str, Enum):
    VOLTERRA = "volterra"
    MARKOV = "markov"
    UNHEDGED = "unhedged"


def _constant(value, name: str) -> float:
    if isinstance(value, StepFunction):
        if not value.is_constant:
            raise InputError(f"hedging supports constant {name} only")
        return float(value.values[0])
    return float(value)


@dataclass(frozen=True)
class HedgePlan:
    """Data of the hedging problem.

    Parameters
    ----------
    mortality : AffineVolterraModel
        Gaussian factor (``A1 = 0``) with ``m = 0`` and ``eta = 1`` so that
        ``mu = X``.
    rates : AffineRateModel
        Short rate ``r = Z``.
    phi, vartheta : float
        Market prices of mortality and interest-rate risk.
    k1 : float
        Claim intensity scale.
    k2 : float
        Annuity outflow scale.
    claim_law : ClaimLaw
        Claim-size distribution.
    phi_RA : float
        Risk aversion in ``Var(M) - phi_RA / 2 E[M]``.
    T0 : float
        Hedge horizon.
    T : float
        Maturity of both hedging instruments, ``T > T0``.
    M0 : float
        Initial wealth.
    """

    mortality: AffineVolterraModel
    rates: AffineRateModel
    phi: float = 0.1
    vartheta: float = 0.1
    k1: float = 1.0
    k2: float = 10.0
    claim_law: ClaimLaw = field(default_factory=lambda: ClaimLaw("exponential", 2.0))
    phi_RA: float = 3000.0
    T0: float = 5.0
    T: float = 15.0
    M0: float = 2000.0

    def __post_init__(self):
        object.__setattr__(self, "phi", _constant(self.phi, "phi"))
        object.__setattr__(self, "vartheta", _constant(self.vartheta, "vartheta"))
        if not self.T0 < self.T:
            raise InputError("hedge horizon T0 must precede the instrument maturity T")
        if self.T0 <= 0:
            raise InputError("T0 must be positive")
        if self.k1 < 0 or self.k2 < 0:
            raise InputError("k1 and k2 must be non-negative")
        if self.phi_RA < 0:
            raise InputError("phi_RA must be non-negative")
        m = self.mortality
        if m.A1 != 0.0:
            raise InputError("hedging needs a constant factor volatility (A1 = 0)")
        if m.eta != 1.0:
            raise InputError("hedging assumes mu = X (eta = 1)")
        if not isinstance(m.m, ConstantHazard) or m.m.level != 0.0:
            raise InputError("hedging assumes a zero baseline hazard")
        if not m.b0_constant:
            raise InputError("hedging needs a constant b0")
        if self.rates.lambda0 != 0.0 or self.rates.lambda1 != 1.0:
            raise InputError("hedging assumes the short rate equals the rate factor")

    @classmethod
    def default(cls, alpha: float = 1.33, **overrides) -> "HedgePlan":
        """Desk-scale setup: ``mu0 = 0.15, b0 = 0.1, b1 = 0.5, sigma_mu = 0.05``,
        ``r0 = 0.04, b0~ = 0.02, b1~ = 0.6, sigma_r = 0.01``."""
        kernel = KernelSpec.constant() if alpha == 1.0 else KernelSpec.fractional(alpha)
        mortality = AffineVolterraModel(
            x0=0.15, b0=0.1, B=-0.5, A0=0.05 ** 2, A1=0.0, eta=1.0, m=ConstantHazard(0.0), kernel=kernel
        )
        rates = AffineRateModel(b0_tilde=0.02, b1_tilde=0.6, sigma_r=0.01, z0=0.04)
        return cls(mortality=mortality, rates=rates, **overrides)

    @property
    def sigma_mu(self) -> float:
        return math.sqrt(self.mortality.A0)

    @property
    def b1(self) -> float:
        return -self.mortality.B

    @property
    def b0(self) -> float:
        b0 = self.mortality.b0
        return float(b0.values[0]) if isinstance(b0, StepFunction) else float(b0)

    @property
    def claim_mean(self) -> float:
        return self.claim_law.mean

    def with_kernel(self, kernel: KernelSpec) -> "HedgePlan":
        return replace(self, mortality=replace(self.mortality, kernel=kernel))

    def markov(self) -> "HedgePlan":
        """Same plan with the constant kernel ``K = 1``."""
        return self.with_kernel(KernelSpec.constant())


@dataclass(frozen=True)
class HedgeState:
    """Hedge quantities at one time on one path."""

    t: float
    M: float
    r: float
    P: float
    Q: float
    Q0: float
    eta1: tuple
    eta2: tuple
    sigma_l: float
    sigma_b: float
    acute_T0: float
    c: float
    path: object = None
    u: tuple | None = None


def _cumtrapz(y: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(y)
    out[..., 1:] = np.cumsum(0.5 * h * (y[..., 1:] + y[..., :-1]), axis=-1)
    return out


def _trapz(y: np.ndarray, h: float) -> np.ndarray:
    if y.shape[-1] == 1:
        return np.zeros(y.shape[:-1])
    return h * (np.sum(y, axis=-1) - 0.5 * (y[..., 0] + y[..., -1]))


class HedgeEngine:
    """Deterministic tables of the hedge for one plan and grid.

    Parameters
    ----------
    plan : HedgePlan
        Its mortality kernel defines the hedger's model.
    dt : float
        Grid step; ``T0`` and ``T`` must be multiples of it.
    """

    def __init__(self, plan: HedgePlan, dt: float):
        self.plan = plan
        self.dt = h = float(dt)
        self.N = N = grid_size(plan.T0, h)
        self.NT = NT = grid_size(plan.T, h)
        model = plan.mortality
        self.markovian = model.kernel.is_markovian
        self.t = h * np.arange(N + 1)
        psi = solve_riccati_volterra(model.kernel, 1.0, model.B, model.A0, 0.0, plan.T, h)
        self.psi = np.asarray(psi.psi.values)
        tables = mean_tables(model.kernel, model.B, plan.T0, h)
        self.ie = np.asarray(tables.ie[: N + 1])
        self.w = tables.noise_weights(N)
        self.Psi2 = _cumtrapz(self.psi[: N + 1] ** 2, h)
        sm, sr = plan.sigma_mu, plan.rates.sigma_r
        self.sigma_l = -self.psi[NT - np.arange(N + 1)] * sm
        _, beta_T = bond_coefficients(plan.rates, plan.T - self.t)
        self.sigma_b = -beta_T * sr
        rates = plan.rates
        hat = rates.shifted(-2.0 * plan.vartheta * sr)
        self.a1, self.b1 = bond_coefficients(hat, plan.T0 - self.t, lambda0=2 * rates.lambda0, lambda1=2 * rates.lambda1)
        acute = rates.shifted(-plan.vartheta * sr)
        self.a2, self.b2 = bond_coefficients(acute, h * np.arange(N + 1))
        self.p_num = np.exp(-(plan.phi ** 2 + plan.vartheta ** 2) * (plan.T0 - self.t))
        self.det_mean = (1.0 + model.B * self.ie) * model.x0 + _forced_mean(model, tables, self.t)
        self.drift_acute = plan.b0 - plan.phi * sm
        self.kez = plan.k1 * plan.claim_mean

    # -- closed-form pieces -------------------------------------------------

    def index(self, t: float) -> int:
        n = int(round(t / self.dt))
        if n < 0 or n > self.N or abs(n * self.dt - t) > 1e-9 * max(1.0, t):
            raise InputError(f"t={t} is not a grid point of [0, T0]")
        return n

    def p_value(self, n: int, r):
        return self.p_num[n] / np.exp(self.a1[n] + self.b1[n] * np.asarray(r, dtype=float))

    def acute_bonds(self, n: int, r) -> np.ndarray:
        """``B'(t_n, t_i)`` for ``i = n..N``; shape ``r.shape + (N-n+1,)``."""
        k = np.arange(self.N - n + 1)
        r = np.asarray(r, dtype=float)
        return np.exp(self.a2[k] + self.b2[k] * r[..., None])

    def conditional_means(self, n: int, history, x_now):
        """Acute-measure means of ``X_{t_i}``, ``i = n..N``.

        ``history`` is ``H_i = sum_{j<n} w_{i-j} sigma dW_j`` on ``i = n..N``
        (ignored by a Markov engine, which restarts from ``x_now``).
        """
        k = np.arange(self.N - n + 1)
        sm = self.plan.sigma_mu
        if self.markovian:
            x_now = np.asarray(x_now, dtype=float)[..., None]
            return (1.0 + self.plan.mortality.B * self.ie[k]) * x_now + self.drift_acute * self.ie[k]
        return self.det_mean[n:] + history - self.plan.phi * sm * self.ie[k]

    def coefficients(self, n: int, history, x_now, int_mu, r):
        """Control coefficients at ``t_n`` for a batch of states.

        Returns
        -------
        dict
            ``Q0``, ``BT0`` (acute bond to ``T0``), ``P``, ``e21`` (=
            ``eta21 / P``), ``e12`` (= ``eta12 / P``), ``e22_0`` and
            ``e22_c`` (``eta22 / P = e22_0 + c e22_c``).
        """
        h, N, plan = self.dt, self.N, self.plan
        k = np.arange(N - n + 1)
        r = np.asarray(r, dtype=float)
        bac = self.acute_bonds(n, r)
        xi = self.conditional_means(n, history, x_now)
        surv = np.exp(-np.asarray(int_mu, dtype=float)[..., None] - _cumtrapz(xi, h) + 0.5 * plan.sigma_mu ** 2 * self.Psi2[k])
        flow = self.kez * xi + plan.k2 * surv
        q0 = _trapz(bac * flow, h)
        bt0 = bac[..., -1]
        sr, sm = plan.rates.sigma_r, plan.sigma_mu
        die = np.diff(self.ie[: N - n + 1])
        mid = 0.5 * (bac[..., 1:] + bac[..., :-1])
        e21 = -sm * (self.kez * np.sum(mid * die, axis=-1) + plan.k2 * _trapz(bac * surv * self.psi[k], h))
        b1n, b2T = self.b1[n], self.b2[N - n]
        e12 = np.full(r.shape, -b1n * sr)
        e22_0 = -sr * _trapz(bac * flow * self.b2[k], h) + q0 * b1n * sr
        e22_c = bt0 * sr * (b1n - b2T)
        return dict(Q0=q0, BT0=bt0, P=self.p_value(n, r), e21=e21, e12=e12, e22_0=e22_0, e22_c=e22_c)

    def history_from_path(self, path: SamplePath, n: int) -> np.ndarray:
        """``H_i`` for ``i = n..N`` from the increments stored on ``path``."""
        if self.markovian or n == 0:
            return np.zeros(self.N - n + 1)
        eps = self.plan.sigma_mu * np.asarray(path.dW[:n])
        full = np.convolve(self.w, eps)
        return full[n : self.N + 1]

    def int_mu_from_path(self, path: SamplePath, n: int) -> float:
        if path.int_mu is not None:
            return float(path.int_mu[n])
        x = np.asarray(path.x[: n + 1])
        return float(0.5 * self.dt * np.sum(x[1:] + x[:-1])) if n > 0 else 0.0


# ---------------------------------------------------------------------------
# Pointwise operations
# ---------------------------------------------------------------------------


def _engine(plan: HedgePlan, dt: float, engine: HedgeEngine | None) -> HedgeEngine:
    if engine is not None:
        return engine
    return HedgeEngine(plan, dt)


def hedge_vols(plan: HedgePlan, t: float, dt: float = 0.01, engine: HedgeEngine | None = None):
    """Instrument volatilities ``(sigma_l, sigma_b)`` at time ``t``."""
    eng = _engine(plan, dt, engine)
    n = eng.index(t)
    return float(eng.sigma_l[n]), float(eng.sigma_b[n])


def p_value(plan: HedgePlan, t: float, r_t: float, dt: float = 0.01, engine: HedgeEngine | None = None) -> float:
    """``P(t) = exp(-int_t^T0 (phi^2 + vartheta^2)) / E^[exp(-2 int_t^T0 r)]``."""
    eng = _engine(plan, dt, engine)
    return float(eng.p_value(eng.index(t), r_t))


def _path_coefficients(plan, t, path, r_t, dt, engine):
    eng = _engine(plan, dt if path is None else path.dt, engine)
    n = eng.index(t)
    if path is None:
        if n != 0:
            raise InputError("a path is required for t > 0")
        hist, x_now, int_mu = np.zeros(eng.N + 1), plan.mortality.x0, 0.0
    else:
        if len(path.x) - 1 < n:
            raise InputError("path shorter than t")
        hist = eng.history_from_path(path, n)
        x_now = float(path.x[n])
        int_mu = eng.int_mu_from_path(path, n)
    coef = eng.coefficients(n, hist, x_now, int_mu, r_t)
    return eng, n, {k: float(v) for k, v in coef.items()}


def q_values(plan: HedgePlan, t: float, path, r_t: float, c: float, dt: float = 0.01, engine=None):
    """``(Q0(t), Q(t))`` with ``Q = -P (Q0 + c B'(t, T0))``."""
    _, _, co = _path_coefficients(plan, t, path, r_t, dt, engine)
    return co["Q0"], -co["P"] * (co["Q0"] + c * co["BT0"])


def eta_coeffs(plan: HedgePlan, t: float, path, r_t: float, c: float, dt: float = 0.01, engine=None):
    """Diffusion coefficients ``eta1 = (0, eta12)`` and ``eta2 = (eta21, eta22)``."""
    _, _, co = _path_coefficients(plan, t, path, r_t, dt, engine)
    P = co["P"]
    return (0.0, P * co["e12"]), (P * co["e21"], P * (co["e22_0"] + c * co["e22_c"]))


def hedge_state(plan: HedgePlan, t: float, path, r_t: float, M: float, c: float, dt: float = 0.01, engine=None) -> HedgeState:
    """Assemble a :class:`HedgeState`."""
    eng, n, co = _path_coefficients(plan, t, path, r_t, dt, engine)
    P = co["P"]
    return HedgeState(
        t=float(t),
        M=float(M),
        r=float(r_t),
        P=P,
        Q=-P * (co["Q0"] + c * co["BT0"]),
        Q0=co["Q0"],
        eta1=(0.0, P * co["e12"]),
        eta2=(P * co["e21"], P * (co["e22_0"] + c * co["e22_c"])),
        sigma_l=float(eng.sigma_l[n]),
        sigma_b=float(eng.sigma_b[n]),
        acute_T0=co["BT0"],
        c=float(c),
        path=path,
    )


def m_bar_star(plan: HedgePlan, P0: float, Q0_0: float, acuteB0: float) -> float:
    """Optimal mean target of the embedded problem."""
    pb2 = P0 * acuteB0 ** 2
    return (plan.phi_RA / 4.0 * (1.0 - pb2) + P0 * acuteB0 * (plan.M0 - Q0_0)) / pb2


def optimal_strategy(plan: HedgePlan, state: HedgeState, M_bar: float):
    """Explicit optimal amounts ``(u1, u2)`` in the longevity bond and the bond.

    A riskless longevity bond (``sigma_l = 0``) with nothing to hedge
    (``phi = 0`` and ``eta21 = 0``) gets ``u1 = 0``.

    Raises
    ------
    SingularityError
        If the bond volatility vanishes, or the longevity-bond volatility
        vanishes while its numerator does not.
    """
    if state.sigma_b == 0.0:
        raise SingularityError("bond volatility vanishes", state.t)
    bracket = state.M - state.Q0 - (M_bar + plan.phi_RA / 4.0) * state.acute_T0
    num1 = bracket * plan.phi + state.eta2[0] / state.P
    if state.sigma_l == 0.0:
        if num1 != 0.0:
            raise SingularityError("longevity-bond volatility vanishes", state.t)
        u1 = 0.0
    else:
        u1 = -num1 / state.sigma_l
    u2 = -(bracket * plan.vartheta + (state.M * state.eta1[1] + state.eta2[1]) / state.P) / state.sigma_b - u1
    return float(u1), float(u2)


def sigma_s(sigma_l: float, sigma_b: float) -> np.ndarray:
    """Matrix ``sigma_S`` (its transpose maps holdings to Brownian loadings)."""
    return np.array([[sigma_l, 0.0], [sigma_b, sigma_b]])


def feedback_control(plan: HedgePlan, state: HedgeState) -> np.ndarray:
    """General feedback control for target ``state.c``.

    ``u = -Sigma^{-1} [(nu + sigma_S^T eta1 / P) M + (Q nu + sigma_S^T eta2) / P]``
    with ``Sigma = sigma_S^T sigma_S`` and ``nu = sigma_S^T (phi, vartheta)``.
    """
    S = sigma_s(state.sigma_l, state.sigma_b)
    St = S.T
    Sigma = St @ S
    if abs(np.linalg.det(Sigma)) == 0.0:
        raise SingularityError("singular instrument covariance", state.t)
    nu = St @ np.array([plan.phi, plan.vartheta])
    eta1 = np.asarray(state.eta1, dtype=float)
    eta2 = np.asarray(state.eta2, dtype=float)
    rhs = (nu + St @ eta1 / state.P) * state.M + (state.Q * nu + St @ eta2) / state.P
    return -np.linalg.solve(Sigma, rhs)


# ---------------------------------------------------------------------------
# Scenario simulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HedgeScenarios:
    """Market scenarios on ``[0, T0]`` shared by every strategy.

    Attributes
    ----------
    x, r, int_mu : ndarray, shape (paths, N+1)
    dW, dWp, claims : ndarray, shape (paths, N)
        Brownian increments and aggregate claim amount per step.
    claim_counts : ndarray, shape (paths, N)
    """

    dt: float
    x: np.ndarray
    dW: np.ndarray
    dWp: np.ndarray
    r: np.ndarray
    int_mu: np.ndarray
    claims: np.ndarray
    claim_counts: np.ndarray
    path_indices: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.x.shape[0]


def simulate_hedge_scenarios(plan: HedgePlan, rng: RngPolicy, n_paths: int, dt: float, first_index: int = 0) -> HedgeScenarios:
    """Factor, rate and claim scenarios from the ground-truth plan.

    The factor is simulated in variation-of-constants form so that the
    conditional means used by a hedger with the same kernel reproduce the
    realized factor exactly at the current time.  Claim intensities are
    truncated at zero.
    """
    N = grid_size(plan.T0, dt)
    idx = np.arange(first_index, first_index + n_paths)
    x, dW = simulate_svie_batch(plan.mortality, rng, idx, plan.T0, dt, scheme="resolvent")
    r, dWp = simulate_rate_batch(plan.rates, rng, idx, plan.T0, dt)
    mu = np.maximum(x, 0.0)
    int_mu = _cumtrapz(x, dt)
    comp = plan.k1 * _cumtrapz(mu, dt)
    claims = np.zeros((n_paths, N))
    counts = np.zeros((n_paths, N), dtype=np.int64)
    for p, pidx in enumerate(idx):
        gen = rng.generator(int(pidx), Stream.CLAIMS)
        total = comp[p, -1]
        level = gen.exponential(1.0)
        arrivals = []
        while level <= total:
            arrivals.append(level)
            level += gen.exponential(1.0)
        if arrivals:
            steps = np.clip(np.searchsorted(comp[p], arrivals, side="left") - 1, 0, N - 1)
            sizes = plan.claim_law.sample(gen, len(arrivals))
            np.add.at(claims[p], steps, sizes)
            np.add.at(counts[p], steps, 1)
    return HedgeScenarios(dt, x, dW, dWp, r, int_mu, claims, counts, idx)


@dataclass(frozen=True, eq=False)
class HedgeCoefficients:
    """Per-path, per-step control coefficients of one hedger on given scenarios."""

    engine: HedgeEngine
    Q0: np.ndarray
    BT0: np.ndarray
    P: np.ndarray
    e21: np.ndarray
    e12: np.ndarray
    e22_0: np.ndarray
    e22_c: np.ndarray

    @property
    def m_bar(self) -> float:
        """Optimal mean target from the time-0 quantities."""
        return m_bar_star(self.engine.plan, float(self.P[0, 0]), float(self.Q0[0, 0]), float(self.BT0[0, 0]))

    @property
    def target(self) -> float:
        return self.m_bar + self.engine.plan.phi_RA / 4.0

    def controls(self, n: int, M: np.ndarray, c: float):
        """Vectorised explicit controls at step ``n`` for wealth ``M``."""
        plan = self.engine.plan
        sl, sb = self.engine.sigma_l[n], self.engine.sigma_b[n]
        if sl == 0.0 or sb == 0.0:
            raise SingularityError("instrument volatility vanishes", n * self.engine.dt)
        bracket = M - self.Q0[:, n] - c * self.BT0[:, n]
        u1 = -(plan.phi * bracket + self.e21[:, n]) / sl
        u2 = -(plan.vartheta * bracket + M * self.e12[:, n] + self.e22_0[:, n] + c * self.e22_c[:, n]) / sb - u1
        return u1, u2

    def state(self, p: int, n: int, M: float, c: float, r: float) -> HedgeState:
        P = float(self.P[p, n])
        return HedgeState(
            t=n * self.engine.dt,
            M=float(M),
            r=float(r),
            P=P,
            Q=-P * (self.Q0[p, n] + c * self.BT0[p, n]),
            Q0=float(self.Q0[p, n]),
            eta1=(0.0, P * float(self.e12[p, n])),
            eta2=(P * float(self.e21[p, n]), P * float(self.e22_0[p, n] + c * self.e22_c[p, n])),
            sigma_l=float(self.engine.sigma_l[n]),
            sigma_b=float(self.engine.sigma_b[n]),
            acute_T0=float(self.BT0[p, n]),
            c=float(c),
        )


def _coefficient_block(engine: HedgeEngine, scen: HedgeScenarios, rows: slice) -> dict:
    x, dW, int_mu, r = scen.x[rows], scen.dW[rows], scen.int_mu[rows], scen.r[rows]
    P, N = x.shape[0], engine.N
    out = {k: np.empty((P, N + 1)) for k in ("Q0", "BT0", "P", "e21", "e12", "e22_0", "e22_c")}
    hist = np.zeros((P, N + 1))
    sm = engine.plan.sigma_mu
    for n in range(N + 1):
        co = engine.coefficients(n, hist[:, n:], x[:, n], int_mu[:, n], r[:, n])
        for key, val in co.items():
            out[key][:, n] = val
        if not engine.markovian and n < N:
            hist[:, n + 1 :] += np.outer(sm * dW[:, n], engine.w[1 : N - n + 1])
    return out


def hedge_coefficients(engine: HedgeEngine, scen: HedgeScenarios, threads: int = 1) -> HedgeCoefficients:
    """Coefficients at every step ``n = 0..N`` along the scenarios.

    Paths are split into ``threads`` contiguous blocks processed by a thread
    pool; each path's coefficients depend on that path only, so the result
    does not depend on ``threads``.
    """
    if not math.isclose(engine.dt, scen.dt, rel_tol=1e-12):
        raise InputError("engine and scenarios use different grids")
    threads = max(1, min(int(threads), scen.n_paths))
    bounds = np.linspace(0, scen.n_paths, threads + 1).astype(int)
    blocks = [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]
    if threads == 1:
        parts = [_coefficient_block(engine, scen, blocks[0])]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda rows: _coefficient_block(engine, scen, rows), blocks))
    merged = {k: np.concatenate([part[k] for part in parts], axis=0) for k in parts[0]}
    return HedgeCoefficients(engine, **merged)


@dataclass(frozen=True, eq=False)
class WealthRun:
    """Simulated wealth under one strategy.

    Attributes
    ----------
    M : ndarray, shape (paths, N+1)
    u1, u2 : ndarray, shape (paths, N)
        Amounts held over each step.
    bank : ndarray, shape (paths, N+1)
        Bank-account balance net of paid claims and annuities.
    accounting_gap : float
        Largest ``|u0 + u1 + u2 - sum z - Pi - M|`` over paths and steps,
        where ``u0`` is the bank balance gross of payments.
    target : float
        Target ``c`` used by the control (``nan`` when unhedged).
    """

    strategy: str
    M: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    bank: np.ndarray
    accounting_gap: float
    target: float
    dt: float

    @property
    def terminal(self) -> np.ndarray:
        return self.M[:, -1]


def run_strategy(
    plan: HedgePlan,
    scen: HedgeScenarios,
    coeffs: HedgeCoefficients | None,
    market: HedgeEngine,
    scale=(1.0, 1.0),
    target: float | None = None,
    name: str = "volterra",
    shift=(0.0, 0.0),
) -> WealthRun:
    """Euler scheme for the wealth with controls recomputed every step.

    Parameters
    ----------
    coeffs : HedgeCoefficients or None
        Hedger coefficients; ``None`` runs the unhedged position.
    market : HedgeEngine
        Engine of the ground-truth plan; supplies the instrument
        volatilities that drive the wealth.
    scale : pair of float
        Multiplicative perturbation of ``(u1, u2)``.
    shift : pair of float
        Constant amounts added to ``(u1, u2)`` after scaling.
    target : float, optional
        Target ``c``; defaults to the hedger's ``M_bar* + phi_RA / 4``.
    """
    h, N, P = scen.dt, market.N, scen.n_paths
    c = (coeffs.target if target is None else target) if coeffs is not None else float("nan")
    M = np.empty((P, N + 1))
    M[:, 0] = plan.M0
    u1s = np.zeros((P, N))
    u2s = np.zeros((P, N))
    bank = np.empty((P, N + 1))
    bank[:, 0] = plan.M0
    paid = np.zeros(P)
    gap = 0.0
    for n in range(N):
        if coeffs is not None:
            u1, u2 = coeffs.controls(n, M[:, n], c)
            u1, u2 = scale[0] * u1 + shift[0], scale[1] * u2 + shift[1]
        else:
            u1 = u2 = np.zeros(P)
        u1s[:, n], u2s[:, n] = u1, u2
        sl, sb = market.sigma_l[n], market.sigma_b[n]
        nu_b = plan.vartheta * sb
        nu_l = nu_b + plan.phi * sl
        r = scen.r[:, n]
        pi = plan.k2 * np.exp(-scen.int_mu[:, n])
        dW, dWp = scen.dW[:, n], scen.dWp[:, n]
        z = scen.claims[:, n]
        M[:, n + 1] = (
            M[:, n]
            + (M[:, n] * r + u1 * nu_l + u2 * nu_b - pi) * h
            + sl * u1 * dW
            + sb * (u1 + u2) * dWp
            - z
        )
        # account-level bookkeeping: rebalance, accrue, then pay outflows
        cash = (M[:, n] - u1 - u2) * (1.0 + r * h) - pi * h - z
        hold1 = u1 * (1.0 + (r + nu_l) * h + sl * dW + sb * dWp)
        hold2 = u2 * (1.0 + (r + nu_b) * h + sb * dWp)
        paid += pi * h + z
        bank[:, n + 1] = cash
        u0_gross = cash + paid
        gap = max(gap, float(np.max(np.abs(u0_gross + hold1 + hold2 - paid - M[:, n + 1]))))
    return WealthRun(name, M, u1s, u2s, bank, gap, c, h)


def simulate_hedged_wealth(
    plan: HedgePlan,
    strategy: str,
    rng: RngPolicy,
    n_paths: int,
    dt: float,
    scenarios: HedgeScenarios | None = None,
    threads: int = 1,
) -> WealthRun:
    """Simulate terminal wealth under ``strategy`` in {volterra, markov, unhedged}.

    The scenarios are always generated by ``plan`` (the ground truth); the
    Markov strategy recomputes every hedge quantity with ``K = 1``.
    """
    strategy = Strategy(strategy)
    scen = scenarios if scenarios is not None else simulate_hedge_scenarios(plan, rng, n_paths, dt)
    market = HedgeEngine(plan, dt)
    if strategy is Strategy.UNHEDGED:
        return run_strategy(plan, scen, None, market, name=strategy.value)
    hedger = market if strategy is Strategy.VOLTERRA else HedgeEngine(plan.markov(), dt)
    coeffs = hedge_coefficients(hedger, scen, threads=threads)
    return run_strategy(plan, scen, coeffs, market, name=strategy.value)


def mv_objective(terminal_wealth, phi_RA: float) -> float:
    """``Var(M) - phi_RA / 2 E[M]`` with the population variance."""
    x = np.asarray(terminal_wealth, dtype=float)
    if x.size == 0:
        raise InputError("empty wealth sample")
    return float(np.var(x) - 0.5 * phi_RA * np.mean(x))


def objective_closed_form(plan: HedgePlan, c: float, coeffs: HedgeCoefficients, scen: HedgeScenarios):
    """``P(0) (M0 + Q(0)/P(0))^2 + I(0)`` and the Monte Carlo error of ``I(0)``.

    With two traded instruments and two Brownian motions the projection
    ``sigma_perp`` vanishes, so ``I(0) = E int_0^T0 P k1 mu E[z^2] ds``,
    estimated over the scenarios with ``mu`` truncated at zero.

    Returns
    -------
    (float, float)
        Value and standard error.
    """
    P0 = float(coeffs.P[0, 0])
    Q0 = -P0 * (float(coeffs.Q0[0, 0]) + c * float(coeffs.BT0[0, 0]))
    integrand = coeffs.P * plan.k1 * np.maximum(scen.x, 0.0) * plan.claim_law.second_moment
    per_path = _trapz(integrand, scen.dt)
    i0 = float(np.mean(per_path))
    se = float(np.std(per_path) / math.sqrt(len(per_path)))
    return P0 * (plan.M0 + Q0 / P0) ** 2 + i0, se


def write_wealth_csv(run: WealthRun, scen: HedgeScenarios, filename, max_paths: int | None = None) -> None:
    """Per-path wealth trajectories and controls."""
    P = run.M.shape[0] if max_paths is None else min(max_paths, run.M.shape[0])
    N = run.u1.shape[1]
    cum_claims = np.concatenate([np.zeros((scen.n_paths, 1)), np.cumsum(scen.claims, axis=1)], axis=1)
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path_id", "t", "M", "u1", "u2", "claims_to_date"])
        for p in range(P):
            for n in range(N + 1):
                u1 = run.u1[p, n] if n < N else run.u1[p, N - 1]
                u2 = run.u2[p, n] if n < N else run.u2[p, N - 1]
                w.writerow(
                    [int(scen.path_indices[p]), f"{n * run.dt:.10g}", f"{run.M[p, n]:.10g}", f"{u1:.10g}", f"{u2:.10g}", f"{cum_claims[p, n]:.10g}"]
                )

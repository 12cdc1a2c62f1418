"""Affine Volterra mortality model, conditional means and survival curves.

The intensity is ``mu_t = m(t) + eta X_t`` with

.. math::

    X_t = X_0 + \\int_0^t K(t-s)\\,(b^0 + B X_s)\\,ds
              + \\int_0^t K(t-s)\\,\\sigma(X_s)\\,dW_s ,\\qquad
    \\sigma(x)^2 = A^0 + A^1 x .

Conditional means follow from the resolvent representation

.. math::

    E[X_s \\mid F_t] = (1 + B\\,I_B(s))X_0 + \\int_0^s E_B(s-u) b^0(u)\\,du
        + \\int_0^t E_B(s-u)\\,\\sigma(X_u)\\,dW_u ,

with ``I_B`` the running integral of ``E_B``.  Survival probabilities
are evaluated in the form where the realized part of the hazard cancels:

.. math::

    g(t,T) = \\exp\\Bigl(-\\int_t^T m - \\eta\\int_t^T E[X_s|F_t]\\,ds
             + \\tfrac12\\int_t^T \\psi(T-s)^2\\, a(E[X_s|F_t])\\,ds\\Bigr).
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Protocol

import numpy as np

from .errors import DomainError, InputError, ModelError
from .kernels import GridFunction, KernelSpec, integrated_e_b
from .riccati import RiccatiSolution, solve_riccati_volterra
from .stepfun import StepFunction, as_step

__all__ = [
    "Hazard",
    "ConstantHazard",
    "PiecewiseLinearHazard",
    "GompertzMakeham",
    "ScaledHazard",
    "AffineVolterraModel",
    "PARAMETER_ROWS",
    "preset_model",
    "validate_affine",
    "SurvivalQuery",
    "SurvivalCurve",
    "conditional_mean",
    "deterministic_mean",
    "markov_conditional_mean",
    "y_value",
    "survival_probability",
    "solve_psi",
    "mean_tables",
]


# ---------------------------------------------------------------------------
# Baseline hazards
# ---------------------------------------------------------------------------


class Hazard(Protocol):
    def __call__(self, t): ...

    def integral(self, a, b): ...


@dataclass(frozen=True)
class ConstantHazard:
    """``m(t) = level``."""

    level: float = 0.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, float(self.level))
        return out[()] if out.ndim == 0 else out

    def integral(self, a, b):
        return self.level * (np.asarray(b, dtype=float) - np.asarray(a, dtype=float))


@dataclass(frozen=True)
class PiecewiseLinearHazard:
    """Linear interpolation of a hazard table, flat beyond both ends.

    Parameters
    ----------
    ages : tuple of float
        Strictly increasing ages (years).
    rates : tuple of float
        Hazard per year at each age.
    """

    ages: tuple
    rates: tuple

    def __post_init__(self):
        ages = tuple(float(a) for a in self.ages)
        rates = tuple(float(r) for r in self.rates)
        if len(ages) != len(rates) or len(ages) < 2:
            raise InputError("hazard table needs at least two (age, rate) rows")
        if any(b <= a for a, b in zip(ages, ages[1:])):
            raise InputError("hazard table ages must increase strictly")
        if not (all(map(math.isfinite, rates)) and all(map(math.isfinite, ages))):
            raise InputError("hazard table entries must be finite")
        object.__setattr__(self, "ages", ages)
        object.__setattr__(self, "rates", rates)

    @classmethod
    def from_csv(cls, path) -> "PiecewiseLinearHazard":
        """Read a two-column CSV with header ``age_years,hazard_per_year``."""
        with open(path, newline="") as fh:
            rows = [row for row in csv.reader(fh) if row and not row[0].startswith("#")]
        header = [h.strip() for h in rows[0]]
        if header[:2] != ["age_years", "hazard_per_year"]:
            raise InputError("hazard CSV header must be 'age_years,hazard_per_year'")
        body = [(float(r[0]), float(r[1])) for r in rows[1:]]
        return cls(tuple(a for a, _ in body), tuple(m for _, m in body))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["age_years", "hazard_per_year"])
            for a, m in zip(self.ages, self.rates):
                writer.writerow([repr(a), repr(m)])

    @functools.cached_property
    def _cum(self):
        x = np.asarray(self.ages)
        y = np.asarray(self.rates)
        return np.concatenate([[0.0], np.cumsum(0.5 * np.diff(x) * (y[1:] + y[:-1]))])

    def __call__(self, t):
        out = np.interp(np.asarray(t, dtype=float), self.ages, self.rates)
        return out[()] if np.ndim(out) == 0 else out

    def _antiderivative(self, t):
        t = np.asarray(t, dtype=float)
        x = np.asarray(self.ages)
        y = np.asarray(self.rates)
        cum = self._cum
        below = t <= x[0]
        above = t >= x[-1]
        idx = np.clip(np.searchsorted(x, t, side="right") - 1, 0, len(x) - 2)
        frac_x = np.clip(t, x[0], x[-1]) - x[idx]
        slope = (y[idx + 1] - y[idx]) / (x[idx + 1] - x[idx])
        inside = cum[idx] + y[idx] * frac_x + 0.5 * slope * frac_x ** 2
        return np.where(below, y[0] * (t - x[0]), np.where(above, cum[-1] + y[-1] * (t - x[-1]), inside))

    def integral(self, a, b):
        """Exact ``int_a^b m(s) ds``."""
        out = self._antiderivative(b) - self._antiderivative(a)
        return out[()] if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class GompertzMakeham:
    """Parametric hazard ``m(t) = A + B c**t`` (stand-in for a period life table)."""

    A: float = 0.0005
    B: float = 0.00007
    c: float = 1.09

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = self.A + self.B * np.power(self.c, t)
        return out[()] if out.ndim == 0 else out

    def integral(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        lc = math.log(self.c)
        out = self.A * (b - a) + self.B * (np.power(self.c, b) - np.power(self.c, a)) / lc
        return out[()] if np.ndim(out) == 0 else out

    def table(self, ages=None) -> PiecewiseLinearHazard:
        """Tabulate on integer ages (default 0..120)."""
        ages = np.arange(0.0, 121.0) if ages is None else np.asarray(ages, dtype=float)
        return PiecewiseLinearHazard(tuple(ages), tuple(self(ages)))


@dataclass(frozen=True)
class ScaledHazard:
    """``theta * m(t)`` for a base hazard ``m``."""

    base: object
    factor: float

    def __call__(self, t):
        return self.factor * self.base(t)

    def integral(self, a, b):
        return self.factor * self.base.integral(a, b)


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AffineVolterraModel:
    """One-factor affine Volterra mortality model.

    Parameters
    ----------
    x0 : float
        Initial factor value.
    b0 : float or StepFunction
        Constant part of the drift.
    B : float
        Linear drift coefficient (``b(x) = b0 + B x``).
    A0, A1 : float
        Variance ``a(x) = A0 + A1 x``; ``A1 = 0`` is the Volterra Vasicek
        case and ``A0 = 0`` the Volterra CIR case.
    eta : float
        Loading of the factor in the intensity.
    m : hazard
        Baseline hazard with ``__call__`` and ``integral(a, b)``.
    kernel : KernelSpec
    """

    x0: float
    b0: object
    B: float
    A0: float
    A1: float
    eta: float
    m: object = field(default_factory=ConstantHazard)
    kernel: KernelSpec = field(default_factory=KernelSpec.constant)

    def __post_init__(self):
        if not isinstance(self.b0, StepFunction):
            object.__setattr__(self, "b0", float(self.b0))
        for name in ("x0", "B", "A0", "A1", "eta"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @classmethod
    def vasicek(cls, lam: float, theta: float, sigma: float, eta: float, x0: float, m=None, kernel=None):
        """Drift ``lam (theta - x)`` and constant volatility ``sigma``."""
        return cls(
            x0=x0,
            b0=lam * theta,
            B=-lam,
            A0=sigma ** 2,
            A1=0.0,
            eta=eta,
            m=ConstantHazard() if m is None else m,
            kernel=KernelSpec.constant() if kernel is None else kernel,
        )

    @classmethod
    def cir(cls, lam: float, theta: float, sigma: float, eta: float, x0: float, m=None, kernel=None):
        """Drift ``lam (theta - x)`` and volatility ``sigma sqrt(x)``."""
        return cls(
            x0=x0,
            b0=lam * theta,
            B=-lam,
            A0=0.0,
            A1=sigma ** 2,
            eta=eta,
            m=ConstantHazard() if m is None else m,
            kernel=KernelSpec.constant() if kernel is None else kernel,
        )

    @property
    def b0_constant(self) -> bool:
        return not isinstance(self.b0, StepFunction) or self.b0.is_constant

    def b0_at(self, t):
        return self.b0(t) if isinstance(self.b0, StepFunction) else np.full(np.shape(t), self.b0)[()]

    def drift(self, x, t=0.0):
        return self.b0_at(t) + self.B * np.asarray(x, dtype=float)

    def variance(self, x):
        """Full-truncation variance ``max(A0 + A1 x, 0)``."""
        return np.maximum(self.A0 + self.A1 * np.asarray(x, dtype=float), 0.0)

    def sigma(self, x):
        return np.sqrt(self.variance(x))

    def intensity(self, t, x):
        return self.m(t) + self.eta * np.asarray(x, dtype=float)

    def with_kernel(self, kernel: KernelSpec) -> "AffineVolterraModel":
        return replace(self, kernel=kernel)


def validate_affine(model: AffineVolterraModel) -> None:
    """Structural check of the affine coefficient set.

    Raises
    ------
    DomainError
        If a coefficient is non-finite, ``A0`` or ``A1`` is negative, or a
        square-root model (``A1 > 0``) carries a constant variance part.
    """
    values = [model.x0, model.B, model.A0, model.A1, model.eta]
    values += list(model.b0.values) if isinstance(model.b0, StepFunction) else [model.b0]
    if not all(math.isfinite(v) for v in values):
        raise DomainError("model coefficients must be finite")
    if model.A0 < 0 or model.A1 < 0:
        raise DomainError("variance coefficients A0, A1 must be non-negative")
    if model.A1 > 0 and model.A0 != 0:
        raise DomainError("square-root models need A0 = 0 so that a(x) >= 0 for x >= 0")
    if model.A1 > 0 and model.x0 < 0:
        raise DomainError("square-root models need a non-negative initial value")
    if not isinstance(model.kernel, KernelSpec):
        raise DomainError("kernel must be a KernelSpec")


#: Parameter rows of the desk-scale study (lam, theta, sigma, eta, t, x0, alpha).
PARAMETER_ROWS = {
    "A": dict(alpha=1.33, eta=0.2, lam=0.5, theta=0.0009, sigma=0.01, t=40.0, x0=0.001),
    "B": dict(alpha=1.0, eta=0.2, lam=0.5, theta=0.0009, sigma=0.01, t=40.0, x0=0.001),
}


def preset_model(row: str = "A", m=None, alpha: float | None = None) -> AffineVolterraModel:
    """Volterra Vasicek model for a parameter row, fractional kernel.

    ``m`` defaults to the tabulated Gompertz-Makeham stand-in.
    """
    p = PARAMETER_ROWS[row.upper()]
    a = p["alpha"] if alpha is None else alpha
    return AffineVolterraModel.vasicek(
        lam=p["lam"],
        theta=p["theta"],
        sigma=p["sigma"],
        eta=p["eta"],
        x0=p["x0"],
        m=GompertzMakeham().table() if m is None else m,
        kernel=KernelSpec.fractional(a),
    )


def solve_psi(model: AffineVolterraModel, horizon: float, dt: float) -> RiccatiSolution:
    """Riccati-Volterra exponent of ``model`` on ``[0, horizon]``."""
    return solve_riccati_volterra(
        model.kernel, model.eta, model.B, model.A0, model.A1, horizon, dt, model_id=id(model)
    )


# ---------------------------------------------------------------------------
# Conditional means
# ---------------------------------------------------------------------------

_TABLE_BLOCK = 1024


@dataclass(frozen=True, eq=False)
class MeanTables:
    """Running integrals of ``E_B``: ``ie = int_0 E_B`` and ``je = int_0 ie``."""

    dt: float
    ie: np.ndarray
    je: np.ndarray

    @property
    def n(self) -> int:
        return len(self.ie) - 1

    def ie_at(self, tau):
        tau = np.asarray(tau, dtype=float)
        pos = tau / self.dt
        return np.interp(pos, np.arange(self.n + 1), self.ie)

    def noise_weights(self, lags: int) -> np.ndarray:
        """``w_m = (ie_m - ie_{m-1}) / dt`` for ``m = 0..lags`` (``w_0 = 0``)."""
        if lags > self.n:
            raise InputError("mean tables too short")
        w = np.zeros(lags + 1)
        w[1:] = np.diff(self.ie[: lags + 1]) / self.dt
        return w


@functools.lru_cache(maxsize=16)
def _mean_tables(kernel: KernelSpec, B: float, n: int, dt: float) -> MeanTables:
    ie = integrated_e_b(kernel, B, n * dt, dt).values
    je = np.zeros_like(ie)
    je[1:] = np.cumsum(0.5 * dt * (ie[1:] + ie[:-1]))
    je.setflags(write=False)
    return MeanTables(dt, ie, je)


def mean_tables(kernel: KernelSpec, B: float, horizon: float, dt: float) -> MeanTables:
    """Cached :class:`MeanTables` covering at least ``[0, horizon]``."""
    n = int(math.ceil(horizon / dt - 1e-9))
    n = max(_TABLE_BLOCK, _TABLE_BLOCK * int(math.ceil(n / _TABLE_BLOCK)))
    return _mean_tables(kernel, float(B), n, float(dt))


def _forced_mean(model: AffineVolterraModel, tables: MeanTables, s):
    """``int_0^s E_B(s-u) b0(u) du``."""
    s = np.asarray(s, dtype=float)
    if model.b0_constant:
        level = model.b0 if not isinstance(model.b0, StepFunction) else model.b0.values[0]
        return level * tables.ie_at(s)
    out = np.zeros_like(s)
    flat = out.ravel()
    for i, sv in enumerate(s.ravel()):
        if sv <= 0:
            continue
        flat[i] = sum(
            v * (tables.ie_at(sv - lo) - tables.ie_at(sv - hi)) for lo, hi, v in model.b0.pieces(0.0, sv)
        )
    return out


def deterministic_mean(model: AffineVolterraModel, s, dt: float = 0.01):
    """``E[X_s]`` at time 0 (noise-free part of the conditional mean)."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise InputError("s must be non-negative")
    tables = mean_tables(model.kernel, model.B, max(float(np.max(s)), dt), dt)
    out = (1.0 + model.B * tables.ie_at(s)) * model.x0 + _forced_mean(model, tables, s)
    return out[()] if out.ndim == 0 else out


def _path_index(path, t: float) -> int:
    n_t = int(round(t / path.dt))
    if abs(n_t * path.dt - t) > 1e-7 * max(1.0, t):
        raise InputError(f"conditioning time {t} is not on the path grid (dt={path.dt})")
    if n_t > len(path.x) - 1:
        raise InputError(f"path covers [0, {(len(path.x) - 1) * path.dt}] but t={t}")
    return n_t


def _noise(model: AffineVolterraModel, path, n_t: int) -> np.ndarray:
    """Stochastic-integral increments ``sigma(X_j) dW_j`` for ``j < n_t``."""
    return model.sigma(path.x[:n_t]) * np.asarray(path.dW[:n_t])


def conditional_mean(model: AffineVolterraModel, path, t: float, s):
    """``E[X_s | F_t]`` given the path on ``[0, t]``.

    Parameters
    ----------
    model : AffineVolterraModel
    path : SamplePath
        Must carry ``x`` and ``dW`` on a grid containing ``t``.
    t : float
        Conditioning time.
    s : float or array_like
        Target times.  Realized values are returned for ``s <= t``.
    """
    n_t = _path_index(path, t)
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise InputError("s must be non-negative")
    h = path.dt
    grid_t = h * np.arange(n_t + 1)
    out = np.empty(s.shape)
    past = s <= t
    out[past] = np.interp(s[past], grid_t, path.x[: n_t + 1])
    if np.any(~past):
        fut = s[~past]
        tables = mean_tables(model.kernel, model.B, float(fut.max()), h)
        det = (1.0 + model.B * tables.ie_at(fut)) * model.x0 + _forced_mean(model, tables, fut)
        if n_t > 0:
            eps = _noise(model, path, n_t)
            tj = grid_t[:n_t]
            lag_hi = fut[:, None] - tj[None, :]
            weights = (tables.ie_at(lag_hi) - tables.ie_at(lag_hi - h)) / h
            det = det + weights @ eps
        out[~past] = det
    return out[()] if out.ndim == 0 else out


def markov_conditional_mean(model: AffineVolterraModel, x_t: float, t: float, s):
    """Conditional mean of a Markov (constant kernel) model restarted at ``x_t``.

    Raises
    ------
    ModelError
        If the kernel of ``model`` is not constant.
    """
    if not model.kernel.is_markovian:
        raise ModelError("restart from the current value needs a constant kernel")
    s = np.asarray(s, dtype=float)
    tau = s - t
    if np.any(tau < 0):
        raise InputError("s must not precede t")
    dt = 1e-3
    tables = mean_tables(model.kernel, model.B, max(float(np.max(tau)), dt), dt)
    level = model.b0 if not isinstance(model.b0, StepFunction) else float(model.b0(t))
    if isinstance(model.b0, StepFunction) and not model.b0.is_constant:
        raise ModelError("restarted Markov mean needs a constant b0")
    out = (1.0 + model.B * tables.ie_at(tau)) * x_t + level * tables.ie_at(tau)
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Survival probabilities
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SurvivalQuery:
    """Evaluation time ``t``, target ``T`` and the path observed up to ``t``."""

    t: float
    T: float
    path: object

    def __post_init__(self):
        if not 0 <= self.t <= self.T:
            raise InputError("survival query needs 0 <= t <= T")


def _psi_on_grid(psi: RiccatiSolution, n: int, h: float) -> np.ndarray:
    tau = h * np.arange(n + 1)
    if tau[-1] > psi.horizon + 1e-9 * max(1.0, psi.horizon):
        raise InputError(f"psi solved to {psi.horizon} but {tau[-1]} needed")
    if math.isclose(psi.psi.dt, h, rel_tol=1e-12):
        return np.asarray(psi.psi.values[: n + 1])
    return np.asarray(psi(tau))


def log_survival_from_means(model: AffineVolterraModel, psi_grid: np.ndarray, xi: np.ndarray, t: float, h: float):
    """Log survival probabilities ``log g(t, t + k h)`` for ``k = 0..n``.

    Parameters
    ----------
    xi : ndarray
        Conditional means on the future grid, shape ``(n+1,)`` or
        ``(paths, n+1)``.
    psi_grid : ndarray
        ``psi`` at lags ``0..n``.
    """
    n = xi.shape[-1] - 1
    Tk = t + h * np.arange(n + 1)
    base = model.m.integral(t, Tk)
    int_xi = np.zeros_like(xi)
    int_xi[..., 1:] = np.cumsum(0.5 * h * (xi[..., 1:] + xi[..., :-1]), axis=-1)
    psi2 = psi_grid[: n + 1] ** 2
    quad = np.zeros(n + 1)
    quad[1:] = np.cumsum(0.5 * h * (psi2[1:] + psi2[:-1]))
    out = -base - model.eta * int_xi + 0.5 * model.A0 * quad
    if model.A1 != 0.0:
        xi2 = np.atleast_2d(xi)
        conv = np.empty_like(xi2)
        for p in range(xi2.shape[0]):
            full = np.convolve(psi2, xi2[p])[: n + 1]
            full = full - 0.5 * psi2 * xi2[p, 0] - 0.5 * psi2[0] * xi2[p]
            full[0] = 0.0
            conv[p] = h * full
        out = out + 0.5 * model.A1 * conv.reshape(xi.shape)
    out[..., 0] = 0.0
    return out


class SurvivalCurve:
    """Survival probabilities ``g(t, T)`` for all ``T`` in ``[t, T_max]``.

    Conditional means are computed once on the path grid; ``g`` at grid
    maturities comes from cumulative trapezoidal sums and is interpolated
    log-linearly in between.

    Parameters
    ----------
    model : AffineVolterraModel
    psi : RiccatiSolution
        Solved to at least ``T_max - t``.
    path : SamplePath
        Observed on ``[0, t]``.
    t : float
    T_max : float
    """

    def __init__(self, model: AffineVolterraModel, psi: RiccatiSolution, path, t: float, T_max: float):
        if T_max < t:
            raise InputError("T_max must not precede t")
        self.model = model
        self.t = float(t)
        self.dt = float(path.dt)
        n_t = _path_index(path, t)
        h = self.dt
        n = int(math.ceil((T_max - t) / h - 1e-9))
        self.n = n
        if n == 0:
            self._log_g = np.zeros(1)
            return
        tables = mean_tables(model.kernel, model.B, t + n * h, h)
        s = t + h * np.arange(n + 1)
        xi = (1.0 + model.B * tables.ie_at(s)) * model.x0 + _forced_mean(model, tables, s)
        if n_t > 0:
            eps = _noise(model, path, n_t)
            w = tables.noise_weights(n_t + n)
            xi = xi + np.convolve(w, eps)[n_t : n_t + n + 1]
        xi[0] = path.x[n_t]
        self.conditional_means = xi
        psi_grid = _psi_on_grid(psi, n, h)
        self._log_g = log_survival_from_means(model, psi_grid, xi, self.t, h)

    @property
    def maturities(self) -> np.ndarray:
        return self.t + self.dt * np.arange(self.n + 1)

    @property
    def values(self) -> np.ndarray:
        return np.exp(self._log_g)

    def log(self, T):
        T = np.asarray(T, dtype=float)
        if np.any(T < self.t - 1e-12):
            raise InputError("maturity precedes evaluation time")
        pos = (T - self.t) / self.dt
        if np.any(pos > self.n + 1e-7):
            raise InputError("maturity beyond the curve horizon")
        out = np.interp(pos, np.arange(self.n + 1), self._log_g)
        return out[()] if out.ndim == 0 else out

    def __call__(self, T):
        out = np.exp(self.log(T))
        return out[()] if np.ndim(out) == 0 else out


def survival_probability(model: AffineVolterraModel, psi: RiccatiSolution, query: SurvivalQuery) -> float:
    """``g(t, T)`` for one path.

    Examples
    --------
    A deterministic hazard gives ``exp(-M (T - t))``; see the test-suite
    for path-dependent cases.
    """
    if query.T == query.t:
        _path_index(query.path, query.t)
        return 1.0
    return float(SurvivalCurve(model, psi, query.path, query.t, query.T)(query.T))


def y_value(model: AffineVolterraModel, psi: RiccatiSolution, path, t: float, T: float) -> float:
    """``Y_t(T) = -eta int_0^T E[X_s|F_t] ds + 1/2 int_t^T psi(T-s)^2 a(E[X_s|F_t]) ds``."""
    if T < t:
        raise InputError("T must not precede t")
    n_t = _path_index(path, t)
    h = path.dt
    x_past = np.asarray(path.x[: n_t + 1])
    past = 0.5 * h * np.sum(x_past[1:] + x_past[:-1]) if n_t > 0 else 0.0
    if T == t:
        return -model.eta * past
    curve_model = replace(model, m=ConstantHazard(0.0))
    curve = SurvivalCurve(curve_model, psi, path, t, T)
    return float(-model.eta * past + curve.log(T))

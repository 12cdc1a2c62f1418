"""Gaussian (Vasicek) short-rate model and bond-price coefficients.

With drift ``b0 - b1 z`` and volatility ``sigma``, the discount factor for a
loading ``lambda0 + lambda1 z`` is ``exp(alpha(tau) + beta(tau) z)`` where

.. math::

    \\beta(\\tau) = -\\frac{\\lambda_1}{b_1}\\bigl(1 - e^{-b_1\\tau}\\bigr),\\qquad
    \\alpha'(\\tau) = -\\lambda_0 + b_0\\beta + \\tfrac12\\sigma^2\\beta^2 .
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, InputError
from .riccati import solve_affine_odes
from .stepfun import StepFunction

__all__ = [
    "AffineRateModel",
    "bond_coefficients",
    "bond_price",
    "bond_price_maturity_derivative",
    "auxiliary_discounts",
    "auxiliary_coefficients",
]


@dataclass(frozen=True)
class AffineRateModel:
    """Vasicek factor ``dZ = (b0_tilde - b1_tilde Z) dt + sigma_r dW'``.

    The short rate is ``lambda0 + lambda1 Z``; the defaults make ``r = Z``.
    """

    b0_tilde: float
    b1_tilde: float
    sigma_r: float
    z0: float
    lambda0: float = 0.0
    lambda1: float = 1.0

    def __post_init__(self):
        for name in ("b0_tilde", "b1_tilde", "sigma_r", "z0", "lambda0", "lambda1"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise DomainError(f"rate parameter {name} must be finite")
            object.__setattr__(self, name, value)
        if self.b1_tilde <= 0:
            raise DomainError("mean reversion b1_tilde must be positive")
        if self.sigma_r < 0:
            raise DomainError("sigma_r must be non-negative")

    @property
    def long_run_mean(self) -> float:
        return self.b0_tilde / self.b1_tilde

    def short_rate(self, z):
        return self.lambda0 + self.lambda1 * np.asarray(z, dtype=float)

    def mean(self, t, z0: float | None = None):
        """``E[Z_t]`` starting from ``z0`` (default: the model's ``z0``)."""
        z0 = self.z0 if z0 is None else z0
        t = np.asarray(t, dtype=float)
        return self.long_run_mean + (z0 - self.long_run_mean) * np.exp(-self.b1_tilde * t)

    def shifted(self, drift_shift: float) -> "AffineRateModel":
        """Same model with ``b0_tilde`` moved by ``drift_shift``."""
        return replace(self, b0_tilde=self.b0_tilde + drift_shift)


def bond_coefficients(model: AffineRateModel, tau, lambda0=None, lambda1=None):
    """Closed-form ``(alpha(tau), beta(tau))`` for the discount loading.

    Parameters
    ----------
    model : AffineRateModel
    tau : float or array_like
        Time to maturity, non-negative.
    lambda0, lambda1 : float, optional
        Override the model's short-rate loading.
    """
    lam0 = model.lambda0 if lambda0 is None else lambda0
    lam1 = model.lambda1 if lambda1 is None else lambda1
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise InputError("time to maturity must be non-negative")
    b1, b0, var = model.b1_tilde, model.b0_tilde, model.sigma_r ** 2
    a = lam1 / b1
    e1 = -np.expm1(-b1 * tau) / b1  # (1 - e^{-b1 tau}) / b1
    e2 = -np.expm1(-2.0 * b1 * tau) / (2.0 * b1)
    beta = -a * b1 * e1
    int_beta = -a * (tau - e1)
    int_beta_sq = a * a * (tau - 2.0 * e1 + e2)
    alpha = -lam0 * tau + b0 * int_beta + 0.5 * var * int_beta_sq
    return alpha, beta


def _coefficient_derivatives(model: AffineRateModel, tau):
    alpha, beta = bond_coefficients(model, tau)
    dbeta = -model.lambda1 - model.b1_tilde * beta
    dalpha = -model.lambda0 + model.b0_tilde * beta + 0.5 * model.sigma_r ** 2 * beta * beta
    return alpha, beta, dalpha, dbeta


def bond_price(model: AffineRateModel, t, T, z_t):
    """Zero-coupon bond price ``exp(alpha(T-t) + beta(T-t) z_t)``.

    Examples
    --------
    >>> m = AffineRateModel(0.01, 0.5, 0.3, 0.01)
    >>> float(bond_price(m, 2.0, 2.0, 0.01))
    1.0
    """
    tau = np.asarray(T, dtype=float) - np.asarray(t, dtype=float)
    if np.any(tau < 0):
        raise InputError("bond maturity precedes valuation time")
    alpha, beta = bond_coefficients(model, tau)
    out = np.exp(alpha + beta * z_t)
    return out[()] if np.ndim(out) == 0 else out


def bond_price_maturity_derivative(model: AffineRateModel, t, T, z_t):
    """Analytic ``dB(t, T)/dT``."""
    tau = np.asarray(T, dtype=float) - float(t)
    if np.any(tau < 0):
        raise InputError("bond maturity precedes valuation time")
    alpha, beta, dalpha, dbeta = _coefficient_derivatives(model, tau)
    out = np.exp(alpha + beta * z_t) * (dalpha + dbeta * z_t)
    return out[()] if np.ndim(out) == 0 else out


def _shifted_model(model: AffineRateModel, theta, scale: float, maturity: float):
    """Return a model whose drift carries ``-scale * theta * sigma_r``; a
    callable shift is returned instead when ``theta`` varies in time."""
    if isinstance(theta, StepFunction) and not theta.is_constant:
        return model, (lambda s: -scale * float(theta(s)) * model.sigma_r)
    level = float(theta.values[0]) if isinstance(theta, StepFunction) else float(theta)
    return model.shifted(-scale * level * model.sigma_r), None


def auxiliary_coefficients(model: AffineRateModel, theta, t, maturity, loading: float, scale: float, dt: float = 1e-3):
    """Coefficients ``(alpha, beta)`` of ``E[exp(-loading int_t^maturity r)]``
    under the drift shifted by ``-scale * theta * sigma_r``."""
    shifted, shift_fn = _shifted_model(model, theta, scale, maturity)
    tau = maturity - t
    if shift_fn is None:
        return bond_coefficients(
            shifted, tau, lambda0=loading * model.lambda0, lambda1=loading * model.lambda1
        )
    if tau == 0:
        return 0.0, 0.0
    steps = max(1, int(math.ceil(tau / dt)))
    coeffs = solve_affine_odes(
        model,
        loading * model.lambda0,
        loading * model.lambda1,
        0.0,
        0.0,
        0.0,
        tau,
        tau / steps,
        drift_shift=lambda s_rel: shift_fn(t + s_rel),
    )
    return float(coeffs.alpha_tilde.values[-1]), float(coeffs.beta_tilde.values[-1])


def auxiliary_discounts(model: AffineRateModel, phi, theta, t: float, s: float, T0: float, r_t: float):
    """Double discount under the hatted measure and the acute bond price.

    Parameters
    ----------
    model : AffineRateModel
    phi : float or StepFunction
        Market price of mortality risk (does not affect rate quantities;
        accepted for a uniform signature).
    theta : float or StepFunction
        Market price of interest-rate risk.
    t, s, T0 : float
        Valuation time, acute-bond maturity and hedge horizon, ``t <= s <= T0``.
    r_t : float
        Current short rate.

    Returns
    -------
    (float, float)
        ``E^[exp(-2 int_t^T0 r)]`` under the drift shifted by
        ``-2 theta sigma_r``, and ``E'[exp(-int_t^s r)]`` under the drift
        shifted by ``-theta sigma_r``.
    """
    del phi
    if not t <= s <= T0:
        raise InputError("auxiliary discounts need t <= s <= T0")
    z_t = (r_t - model.lambda0) / model.lambda1
    a1, b1 = auxiliary_coefficients(model, theta, t, T0, 2.0, 2.0)
    a2, b2 = auxiliary_coefficients(model, theta, t, s, 1.0, 1.0)
    return float(np.exp(a1 + b1 * z_t)), float(np.exp(a2 + b2 * z_t))

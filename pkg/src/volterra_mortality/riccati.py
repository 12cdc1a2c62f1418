"""Riccati-Volterra equations and backward affine Riccati ODEs.

The transform exponent of the affine Volterra model solves

.. math::

    \\psi = \\bigl(-\\eta + B\\psi + \\tfrac12 A^1 \\psi^2\\bigr) * K ,

a convolution equation solved here by forward stepping with product
trapezoid weights.  The Markov short-rate coefficients solve ordinary
Riccati ODEs integrated backward from maturity with classical RK4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DivergenceError, InputError
from .kernels import GridFunction, KernelSpec, _lag_weights, grid_size, trapezoid_weights

__all__ = [
    "RiccatiSolution",
    "AffineOdeCoefficients",
    "solve_riccati_volterra",
    "solve_affine_odes",
]

BLOWUP_LEVEL = 1e8


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    """Solution ``psi`` of a Riccati-Volterra equation on ``[0, horizon]``.

    Attributes
    ----------
    psi : GridFunction
        Values indexed by time to maturity.
    eta : float
        Loading used as forcing.
    model_id : object
        Identifier of the model the solution belongs to (free-form).
    """

    psi: GridFunction
    eta: float
    model_id: object = None

    @property
    def horizon(self) -> float:
        return self.psi.t_end

    def __call__(self, tau):
        """Linear interpolation in time to maturity."""
        tau = np.asarray(tau, dtype=float)
        if np.any(tau > self.horizon + 1e-9 * max(1.0, self.horizon)):
            raise InputError(f"psi solved only up to {self.horizon}")
        return self.psi(tau)


def solve_riccati_volterra(
    kernel: KernelSpec,
    eta: float,
    B: float,
    A0: float,
    A1: float,
    horizon: float,
    dt: float,
    model_id: object = None,
) -> RiccatiSolution:
    """Solve ``psi = (-eta + B psi + A1 psi**2 / 2) * K``.

    Parameters
    ----------
    kernel : KernelSpec
    eta : float
        Mortality loading (constant forcing ``-eta``).
    B : float
        Linear drift coefficient of the factor.
    A0 : float
        Constant part of the variance.  It does not enter ``psi`` and is
        accepted only so callers can pass a full coefficient set.
    A1 : float
        Linear part of the variance; produces the quadratic term.
    horizon, dt : float
        Grid ``[0, horizon]`` with step ``dt``.

    Returns
    -------
    RiccatiSolution

    Raises
    ------
    DivergenceError
        If ``|psi|`` exceeds 1e8; the message reports the time.

    Notes
    -----
    Step ``i`` sums the known history with the interior product-trapezoid
    weights, predicts the newest node with the forcing frozen at the
    previous node, and corrects once with the forcing evaluated at the
    prediction.
    """
    del A0
    n = grid_size(horizon, dt)
    psi = np.zeros(n + 1)
    if eta != 0.0:
        w = _lag_weights(kernel, n, dt)
        down, up = trapezoid_weights(kernel, n, dt)
        f = np.zeros(n + 1)
        f[0] = -eta

        def forcing(p):
            return -eta + B * p + 0.5 * A1 * p * p

        for i in range(1, n + 1):
            hist = np.dot(w[1:i], f[i - 1:0:-1]) + up[i - 1] * f[0]
            pred = hist + down[0] * f[i - 1]
            psi[i] = hist + down[0] * forcing(pred)
            if not math.isfinite(psi[i]) or abs(psi[i]) > BLOWUP_LEVEL:
                raise DivergenceError("Riccati-Volterra solution blew up", i * dt)
            f[i] = forcing(psi[i])
    return RiccatiSolution(GridFunction(0.0, dt, psi), float(eta), model_id)


@dataclass(frozen=True, eq=False)
class AffineOdeCoefficients:
    """Coefficient functions of an affine Markov transform, indexed by ``tau = T - t``.

    ``exp(alpha_tilde + beta_tilde z)`` is the discounted transform and
    ``(alpha_hat + beta_hat z)`` the linear prefactor of the extended
    transform.
    """

    alpha_tilde: GridFunction
    beta_tilde: GridFunction
    alpha_hat: GridFunction
    beta_hat: GridFunction

    def value(self, tau, z):
        """``exp(alpha_tilde(tau) + beta_tilde(tau) z)``."""
        return np.exp(self.alpha_tilde(tau) + self.beta_tilde(tau) * z)


def solve_affine_odes(
    rate_model,
    lambda0: float,
    lambda1: float,
    c1: float,
    c2: float,
    c3: float,
    T: float,
    dt: float,
    drift_shift: Callable[[float], float] | None = None,
) -> AffineOdeCoefficients:
    """Integrate the one-factor affine Riccati ODEs backward from ``T`` with RK4.

    Parameters
    ----------
    rate_model : AffineRateModel
        Supplies ``b0_tilde``, ``b1_tilde`` and ``sigma_r`` (Gaussian
        factor, so the quadratic coefficient of the variance is zero).
    lambda0, lambda1 : float
        Discounting loading ``lambda0 + lambda1 z``.
    c1, c2, c3 : float
        Terminal values of ``beta_tilde``, ``beta_hat`` and ``alpha_hat``.
    T : float
        Maturity; the solution covers ``tau`` in ``[0, T]``.
    dt : float
        RK4 step in ``tau``.
    drift_shift : callable, optional
        Additive shift ``delta(t)`` of the factor drift as a function of
        calendar time ``t = T - tau``.

    Returns
    -------
    AffineOdeCoefficients
    """
    n = grid_size(T, dt)
    b0 = rate_model.b0_tilde
    b1 = rate_model.b1_tilde
    var = rate_model.sigma_r ** 2

    def rhs(tau, y):
        at, bt, ah, bh = y
        drift0 = b0 + (drift_shift(T - tau) if drift_shift is not None else 0.0)
        return np.array(
            [
                -lambda0 + drift0 * bt + 0.5 * var * bt * bt,
                -lambda1 - b1 * bt,
                drift0 * bh + var * bt * bh,
                -b1 * bh,
            ]
        )

    out = np.zeros((n + 1, 4))
    y = np.array([0.0, c1, c3, c2], dtype=float)
    out[0] = y
    for i in range(n):
        tau = i * dt
        k1 = rhs(tau, y)
        k2 = rhs(tau + 0.5 * dt, y + 0.5 * dt * k1)
        k3 = rhs(tau + 0.5 * dt, y + 0.5 * dt * k2)
        k4 = rhs(tau + dt, y + dt * k3)
        y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise DivergenceError("affine ODE integration diverged", T - (i + 1) * dt)
        out[i + 1] = y
    return AffineOdeCoefficients(*(GridFunction(0.0, dt, out[:, k]) for k in range(4)))

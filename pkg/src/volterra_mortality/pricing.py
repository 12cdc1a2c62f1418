"""Valuation of survival-contingent products and measure changes.

Mortality and interest rates are independent, so every product reduces to
bond prices ``B(t, T)`` and survival probabilities ``g(t, T)``.  Death
benefits use the integrated-by-parts form

.. math::

    DB_t = C\\Bigl[B(t,T)\\,(1 - g(t,T)) + \\int_t^T \\partial_u B(t,u)\\,(g(t,u) - 1)\\,du\\Bigr],

which avoids differentiating ``g`` and is exact in the two degenerate
cases ``mu = 0`` and ``r = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy.stats import norm

from .errors import CalibrationError, InputError
from .mortality import (
    AffineVolterraModel,
    ScaledHazard,
    SurvivalCurve,
    solve_psi,
    validate_affine,
)
from .rates import AffineRateModel, bond_price, bond_price_maturity_derivative
from .riccati import RiccatiSolution
from .stepfun import StepFunction, as_step

__all__ = [
    "ProductKind",
    "ProductSpec",
    "EsscherCalibration",
    "survival_benefit",
    "longevity_bond_price",
    "death_benefit",
    "annuity_value",
    "assurance_value",
    "endowment_value",
    "longevity_call_price",
    "black_scholes_call",
    "price_product",
    "esscher_mgf",
    "calibrate_esscher",
    "affine_retaining_apply",
    "initial_path",
]


class ProductKind(str, Enum):
    SURVIVAL_BENEFIT = "survival_benefit"
    DEATH_BENEFIT = "death_benefit"
    LONGEVITY_BOND = "longevity_bond"
    ANNUITY = "annuity"
    ASSURANCE = "assurance"
    ENDOWMENT = "endowment"
    LONGEVITY_CALL = "longevity_call"


@dataclass(frozen=True)
class ProductSpec:
    """Product description.

    Parameters
    ----------
    kind : ProductKind or str
    T : float
        Maturity (survival/death benefits, bonds, assurance, endowment,
        option underlying).
    C : float or tuple
        Payoff amount; ``(C1, C2)`` for endowments.
    t_prime : float
        Deferral of an annuity, years.
    x_star : float
        Maximum attainable age.
    D : float
        Option strike.
    T1 : float
        Option expiry.
    """

    kind: ProductKind
    T: float | None = None
    C: object = 1.0
    t_prime: float = 0.0
    x_star: float = 109.0
    D: float | None = None
    T1: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ProductKind(self.kind))
        if self.t_prime < 0:
            raise InputError("t_prime must be non-negative")
        needs_T = self.kind is not ProductKind.ANNUITY
        if needs_T and self.T is None:
            raise InputError(f"{self.kind.value} needs a maturity T")
        if self.kind is ProductKind.ENDOWMENT and not (isinstance(self.C, (tuple, list)) and len(self.C) == 2):
            raise InputError("endowment needs C=(C1, C2)")
        if self.kind is ProductKind.LONGEVITY_CALL:
            if self.D is None or self.T1 is None:
                raise InputError("longevity call needs D and T1")
            if not self.T1 < self.T:
                raise InputError("option expiry must precede the bond maturity")


@dataclass(frozen=True)
class EsscherCalibration:
    """Calibrated Esscher parameters keyed by maturity."""

    theta_T: dict


def _check_T(curve: SurvivalCurve, T: float) -> None:
    if T < curve.t:
        raise InputError("maturity precedes valuation time")


def survival_benefit(curve: SurvivalCurve, rates: AffineRateModel, z_t: float, T: float, C: float = 1.0) -> float:
    """``C B(t, T) g(t, T)`` for a policyholder alive at ``t``."""
    _check_T(curve, T)
    return float(C * bond_price(rates, curve.t, T, z_t) * curve(T))


def longevity_bond_price(curve: SurvivalCurve, rates: AffineRateModel, z_t: float, T: float) -> float:
    """Zero-coupon longevity bond ``B(t, T) g(t, T)``."""
    return survival_benefit(curve, rates, z_t, T, 1.0)


def _death_integral(curve: SurvivalCurve, rates: AffineRateModel, z_t: float, T: float) -> float:
    t = curve.t
    n = max(1, int(math.ceil((T - t) / curve.dt - 1e-9)))
    u = np.linspace(t, T, n + 1)
    integrand = bond_price_maturity_derivative(rates, t, u, z_t) * (curve(u) - 1.0)
    return float(np.sum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(u)))


def death_benefit(curve: SurvivalCurve, rates: AffineRateModel, z_t: float, T: float, C: float = 1.0) -> float:
    """Value at ``t`` of ``C`` paid at death if it occurs in ``(t, T]``."""
    _check_T(curve, T)
    if T == curve.t:
        return 0.0
    bT = float(bond_price(rates, curve.t, T, z_t))
    return float(C * (bT * (1.0 - curve(T)) + _death_integral(curve, rates, z_t, T)))


def assurance_value(curve: SurvivalCurve, rates: AffineRateModel, z_t: float, T: float) -> float:
    """Term assurance paying one unit at death before ``T``."""
    return death_benefit(curve, rates, z_t, T, 1.0)


def endowment_value(curve: SurvivalCurve, rates: AffineRateModel, z_t: float, T: float, C1: float, C2: float) -> float:
    """``C1`` on survival to ``T`` plus ``C2`` on earlier death."""
    return survival_benefit(curve, rates, z_t, T, C1) + death_benefit(curve, rates, z_t, T, C2)


def annuity_maturities(t: float, t_prime: float, x_star: float) -> np.ndarray:
    """Payment dates ``t + t', t + t' + 1, ..., x_star - 1``."""
    first = t + t_prime
    last = x_star - 1.0
    if first > last + 1e-9:
        raise InputError("annuity has no payment dates (t + t' > x* - 1)")
    count = int(math.floor(last - first + 1e-9)) + 1
    return first + np.arange(count)


def annuity_value(curve: SurvivalCurve, rates: AffineRateModel, z_t: float, t_prime: float, x_star: float) -> float:
    """Deferred unit annuity ``sum_T B(t, T) g(t, T)`` over whole years."""
    Ts = annuity_maturities(curve.t, t_prime, x_star)
    bonds = bond_price(rates, curve.t, Ts, z_t)
    return float(np.sum(bonds * curve(Ts)))


def black_scholes_call(spot: float, strike: float, rate: float, expiry: float, total_sd: float) -> float:
    """Call on a lognormal asset with total log-volatility ``total_sd``."""
    if strike <= 0:
        raise InputError("strike must be positive")
    disc = math.exp(-rate * expiry)
    if total_sd <= 0 or expiry <= 0:
        return max(spot - strike * disc, 0.0)
    d1 = (math.log(spot / strike) + rate * expiry + 0.5 * total_sd ** 2) / total_sd
    d2 = d1 - total_sd
    return float(spot * norm.cdf(d1) - strike * disc * norm.cdf(d2))


def longevity_call_price(
    model: AffineVolterraModel,
    psi: RiccatiSolution,
    path,
    t: float,
    T1: float,
    T: float,
    D: float,
    r_const: float,
    bl: float | None = None,
    variant: str = "frozen",
) -> float:
    """European call on a zero-coupon longevity bond.

    Parameters
    ----------
    model : AffineVolterraModel
        Gaussian model (``A1 = 0``) with ``sqrt(A0)`` the factor volatility.
    psi : RiccatiSolution
        Exponent solved to at least ``T - t``.
    path : SamplePath or None
        History used to compute the bond price when ``bl`` is not given.
    t, T1, T : float
        Valuation time, option expiry and bond maturity.
    D : float
        Strike.
    r_const : float
        Constant interest rate.
    bl : float, optional
        Current longevity-bond price; computed from the model when omitted.
    variant : {"frozen", "integrated"}
        ``"frozen"`` uses the instantaneous volatility ``|psi(T-t)| sigma``
        over the whole option life; ``"integrated"`` uses the exact
        variance ``int_t^T1 psi(T-s)^2 sigma^2 ds`` of the lognormal bond
        dynamics.
    """
    if D <= 0:
        raise InputError("strike must be positive")
    if not t <= T1 < T:
        raise InputError("need t <= T1 < T")
    if model.A1 != 0.0:
        raise InputError("the lognormal call formula needs a Gaussian factor (A1 = 0)")
    sigma = math.sqrt(model.A0)
    if bl is None:
        if path is None:
            raise InputError("either a path or the bond price bl is required")
        curve = SurvivalCurve(model, psi, path, t, T)
        bl = math.exp(-r_const * (T - t)) * float(curve(T))
    tau = T1 - t
    if variant == "frozen":
        total_sd = abs(float(psi(T - t))) * sigma * math.sqrt(tau)
    elif variant == "integrated":
        n = max(2, int(math.ceil(tau / psi.psi.dt)))
        s = np.linspace(t, T1, n + 1)
        vals = np.asarray(psi(T - s)) ** 2 * sigma ** 2
        total_sd = math.sqrt(max(float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(s))), 0.0))
    else:
        raise InputError(f"unknown variant {variant!r}")
    return black_scholes_call(bl, D, r_const, tau, total_sd)


def price_product(spec: ProductSpec, curve: SurvivalCurve, rates: AffineRateModel, z_t: float) -> float:
    """Dispatch on ``spec.kind`` (options need :func:`longevity_call_price`)."""
    kind = spec.kind
    if kind is ProductKind.SURVIVAL_BENEFIT:
        return survival_benefit(curve, rates, z_t, spec.T, float(spec.C))
    if kind is ProductKind.LONGEVITY_BOND:
        return longevity_bond_price(curve, rates, z_t, spec.T)
    if kind is ProductKind.DEATH_BENEFIT:
        return death_benefit(curve, rates, z_t, spec.T, float(spec.C))
    if kind is ProductKind.ASSURANCE:
        return assurance_value(curve, rates, z_t, spec.T)
    if kind is ProductKind.ENDOWMENT:
        c1, c2 = spec.C
        return endowment_value(curve, rates, z_t, spec.T, float(c1), float(c2))
    if kind is ProductKind.ANNUITY:
        return annuity_value(curve, rates, z_t, spec.t_prime, spec.x_star)
    raise InputError("longevity calls are priced with longevity_call_price")


# ---------------------------------------------------------------------------
# Measure changes
# ---------------------------------------------------------------------------


def initial_path(model: AffineVolterraModel, dt: float = 0.01):
    """A path holding only ``X_0`` (conditioning at time 0)."""
    from .simulation import SamplePath

    return SamplePath(dt, np.array([model.x0]), np.zeros(0))


def _scaled(model: AffineVolterraModel, theta: float) -> AffineVolterraModel:
    return replace(model, m=ScaledHazard(model.m, float(theta)), eta=float(theta) * model.eta)


def esscher_mgf(
    model: AffineVolterraModel,
    psi_scaled: RiccatiSolution | None,
    t: float,
    T: float,
    theta: float,
    path=None,
    dt: float = 0.01,
) -> float:
    """``M(theta) = E[exp(-theta int_t^T mu) | F_t]``.

    This is the survival probability of the model with ``m`` and ``eta``
    multiplied by ``theta``; ``psi_scaled`` must be solved with loading
    ``theta * eta`` (it is solved here when ``None``).
    """
    if T < t:
        raise InputError("T must not precede t")
    if theta == 0.0 or T == t:
        return 1.0
    path = initial_path(model, dt) if path is None else path
    scaled = _scaled(model, theta)
    if psi_scaled is None:
        psi_scaled = solve_psi(scaled, max(T - t, path.dt), path.dt)
    return float(SurvivalCurve(scaled, psi_scaled, path, t, T)(T))


def _esscher_ratio(model, t, T, theta, path, dt):
    return esscher_mgf(model, None, t, T, theta + 1.0, path, dt) / esscher_mgf(model, None, t, T, theta, path, dt)


def calibrate_esscher(
    model: AffineVolterraModel,
    t: float,
    T: float,
    observed_ratio: float,
    path=None,
    dt: float = 0.01,
    bracket: tuple = (-10.0, 10.0),
    tol: float = 1e-8,
) -> float:
    """Esscher parameter matching ``M(theta + 1) / M(theta)`` to a market ratio.

    Raises
    ------
    CalibrationError
        If the ratio does not change sign over ``bracket``.
    """
    if not 0 < observed_ratio <= 1:
        raise CalibrationError("observed ratio must lie in (0, 1]")
    lo, hi = bracket
    f_lo = _esscher_ratio(model, t, T, lo, path, dt) - observed_ratio
    f_hi = _esscher_ratio(model, t, T, hi, path, dt) - observed_ratio
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise CalibrationError(
            f"ratio {observed_ratio} not bracketed on theta in [{lo}, {hi}]"
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = _esscher_ratio(model, t, T, mid, path, dt) - observed_ratio
        if f_mid == 0.0:
            return mid
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def affine_retaining_apply(model: AffineVolterraModel, phi) -> AffineVolterraModel:
    """Drift of the pricing measure: ``b(x) + a(x) phi``.

    A constant ``phi`` maps ``b0 -> b0 + A0 phi`` and ``B -> B + A1 phi``.
    A time-varying ``phi`` is supported when ``A1 = 0``.
    """
    if isinstance(phi, StepFunction) and not phi.is_constant:
        if model.A1 != 0.0:
            raise InputError("time-varying phi with A1 != 0 would make B time dependent")
        out = replace(model, b0=as_step(model.b0) + model.A0 * phi)
    else:
        level = float(phi.values[0]) if isinstance(phi, StepFunction) else float(phi)
        if level == 0.0:
            return model
        b0 = model.b0 + model.A0 * level
        out = replace(model, b0=b0, B=model.B + model.A1 * level)
    validate_affine(out)
    return out

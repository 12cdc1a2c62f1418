"""Volterra mortality modelling: kernels, survival curves, pricing and hedging.

The most used names are re-exported here; submodules hold the rest.
"""

from .errors import (
    AccuracyError,
    CalibrationError,
    ConfigError,
    DivergenceError,
    DomainError,
    GridError,
    InputError,
    ModelError,
    SingularityError,
    VolterraMortalityError,
)
from .hedging import (
    HedgePlan,
    HedgeState,
    feedback_control,
    m_bar_star,
    mv_objective,
    optimal_strategy,
    simulate_hedged_wealth,
)
from .kernels import GridFunction, KernelFamily, KernelSpec, e_b, eval_kernel, eval_resolvent, mittag_leffler
from .mortality import (
    AffineVolterraModel,
    GompertzMakeham,
    PiecewiseLinearHazard,
    SurvivalCurve,
    SurvivalQuery,
    conditional_mean,
    survival_probability,
    preset_model,
)
from .pricing import ProductKind, ProductSpec, calibrate_esscher, longevity_call_price, price_product
from .rates import AffineRateModel, bond_price
from .riccati import RiccatiSolution, solve_affine_odes, solve_riccati_volterra
from .simulation import ClaimLaw, RngPolicy, SamplePath, simulate_svie
from .stepfun import StepFunction

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "AffineRateModel",
    "AffineVolterraModel",
    "CalibrationError",
    "ClaimLaw",
    "ConfigError",
    "DivergenceError",
    "DomainError",
    "GompertzMakeham",
    "GridError",
    "GridFunction",
    "HedgePlan",
    "HedgeState",
    "InputError",
    "KernelFamily",
    "KernelSpec",
    "ModelError",
    "PiecewiseLinearHazard",
    "ProductKind",
    "ProductSpec",
    "RiccatiSolution",
    "RngPolicy",
    "SamplePath",
    "SingularityError",
    "StepFunction",
    "SurvivalCurve",
    "SurvivalQuery",
    "VolterraMortalityError",
    "bond_price",
    "calibrate_esscher",
    "conditional_mean",
    "e_b",
    "eval_kernel",
    "eval_resolvent",
    "feedback_control",
    "longevity_call_price",
    "m_bar_star",
    "mittag_leffler",
    "mv_objective",
    "optimal_strategy",
    "price_product",
    "simulate_hedged_wealth",
    "simulate_svie",
    "solve_affine_odes",
    "solve_riccati_volterra",
    "survival_probability",
    "preset_model",
]

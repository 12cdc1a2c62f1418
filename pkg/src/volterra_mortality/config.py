"""Experiment configuration files.

A configuration is an INI file read with :mod:`configparser`::

    [experiment]
    name = survival_curves
    output_dir = out

    [mortality]
    alpha = 1.33

    [numerics]
    dt = 0.01
    n_paths = 10000
    master_seed = 20240101

Every key has a default (parameter row A for the mortality block, the
desk-scale hedging setup for the hedge block), so an empty file is valid.
Validation collects every offending field before raising.
"""

from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .kernels import KernelSpec
from .mortality import AffineVolterraModel, ConstantHazard, GompertzMakeham, PiecewiseLinearHazard
from .pricing import ProductKind, ProductSpec
from .rates import AffineRateModel
from .simulation import ClaimLaw

__all__ = [
    "EXPERIMENTS",
    "MortalityConfig",
    "RatesConfig",
    "ProductConfig",
    "OptionConfig",
    "HedgeConfig",
    "NumericsConfig",
    "ExperimentConfig",
    "load_config",
    "parse_config",
]

EXPERIMENTS = ("survival_curves", "annuity_histogram", "option_gap", "hedging_comparison", "price_single")


@dataclass
class MortalityConfig:
    alpha: float = 1.33
    eta: float = 0.2
    lam: float = 0.5
    theta: float = 0.0009
    sigma: float = 0.01
    t: float = 40.0
    x0: float = 0.001
    kind: str = "vasicek"
    baseline: str = "gompertz"
    baseline_file: str = ""

    def hazard(self, base_dir: Path | None = None):
        if self.baseline == "gompertz":
            return GompertzMakeham().table()
        if self.baseline == "zero":
            return ConstantHazard(0.0)
        path = Path(self.baseline_file)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return PiecewiseLinearHazard.from_csv(path)

    def model(self, alpha: float | None = None, base_dir: Path | None = None) -> AffineVolterraModel:
        a = self.alpha if alpha is None else alpha
        kernel = KernelSpec.constant() if a == 1.0 else KernelSpec.fractional(a)
        build = AffineVolterraModel.vasicek if self.kind == "vasicek" else AffineVolterraModel.cir
        return build(self.lam, self.theta, self.sigma, self.eta, self.x0, m=self.hazard(base_dir), kernel=kernel)


@dataclass
class RatesConfig:
    b0_tilde: float = 0.01
    b1_tilde: float = 0.5
    sigma_r: float = 0.3
    z0: float = 0.01

    def model(self) -> AffineRateModel:
        return AffineRateModel(self.b0_tilde, self.b1_tilde, self.sigma_r, self.z0)


@dataclass
class ProductConfig:
    kind: str = "annuity"
    T: float = 50.0
    C: float = 1.0
    C2: float = 1.0
    t_prime: float = 20.0
    x_star: float = 109.0

    def spec(self, t: float) -> ProductSpec:
        C = (self.C, self.C2) if self.kind == ProductKind.ENDOWMENT.value else self.C
        return ProductSpec(kind=self.kind, T=self.T, C=C, t_prime=self.t_prime, x_star=self.x_star)


@dataclass
class OptionConfig:
    r: float = 0.01
    T: float = 5.0
    T1: float = 2.0
    bl: float = 0.8
    strikes: tuple = (0.8, 0.808, 0.816, 0.824, 0.832)
    variant: str = "integrated"


@dataclass
class HedgeConfig:
    alpha: float = 1.33
    mu0: float = 0.15
    b0: float = 0.1
    b1: float = 0.5
    sigma_mu: float = 0.05
    r0: float = 0.04
    b0_tilde: float = 0.02
    b1_tilde: float = 0.6
    sigma_r: float = 0.01
    phi: float = 0.1
    vartheta: float = 0.1
    k1: float = 1.0
    k2: float = 10.0
    claim_mean: float = 2.0
    phi_RA: float = 3000.0
    T0: float = 5.0
    T: float = 15.0
    M0: float = 2000.0
    max_csv_paths: int = 20

    def plan(self):
        from .hedging import HedgePlan

        kernel = KernelSpec.constant() if self.alpha == 1.0 else KernelSpec.fractional(self.alpha)
        mortality = AffineVolterraModel(
            x0=self.mu0, b0=self.b0, B=-self.b1, A0=self.sigma_mu ** 2, A1=0.0, eta=1.0, m=ConstantHazard(0.0), kernel=kernel
        )
        rates = AffineRateModel(self.b0_tilde, self.b1_tilde, self.sigma_r, self.r0)
        return HedgePlan(
            mortality=mortality,
            rates=rates,
            phi=self.phi,
            vartheta=self.vartheta,
            k1=self.k1,
            k2=self.k2,
            claim_law=ClaimLaw("exponential", self.claim_mean),
            phi_RA=self.phi_RA,
            T0=self.T0,
            T=self.T,
            M0=self.M0,
        )


@dataclass
class NumericsConfig:
    dt: float = 0.01
    hedge_dt: float = 1.0 / 250.0
    horizon: float = 109.0
    n_paths: int = 10000
    hedge_paths: int = 2000
    master_seed: int = 20240101
    histories: int = 1
    threads: int = 1
    plots: bool = False


@dataclass
class ExperimentConfig:
    """Parsed configuration; ``source_hash`` is the SHA-256 of the file bytes."""

    name: str = "survival_curves"
    output_dir: str = "out"
    mortality: MortalityConfig = field(default_factory=MortalityConfig)
    rates: RatesConfig = field(default_factory=RatesConfig)
    product: ProductConfig = field(default_factory=ProductConfig)
    option: OptionConfig = field(default_factory=OptionConfig)
    hedge: HedgeConfig = field(default_factory=HedgeConfig)
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    source_hash: str = hashlib.sha256(b"").hexdigest()
    base_dir: Path | None = None


def _convert(raw: str, default, key: str, problems: list):
    try:
        if isinstance(default, bool):
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            if "/" in raw:
                num, den = raw.split("/", 1)
                return float(num) / float(den)
            return float(raw)
        if isinstance(default, tuple):
            items = [s.strip() for s in raw.split(",") if s.strip()]
            if default and isinstance(default[0], float):
                return tuple(float(s) for s in items)
            return tuple(items)
        return raw.strip()
    except ValueError:
        problems.append(f"{key}: cannot parse {raw!r} as {type(default).__name__}")
        return default


def _fill(section_obj, parser: configparser.ConfigParser, section: str, problems: list) -> None:
    if not parser.has_section(section):
        return
    known = {f.name for f in fields(section_obj)}
    for key, raw in parser.items(section):
        if key not in known:
            problems.append(f"{section}.{key}: unknown key")
            continue
        setattr(section_obj, key, _convert(raw, getattr(section_obj, key), f"{section}.{key}", problems))


def _positive(problems, name, value):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        problems.append(f"{name}: must be positive (got {value!r})")


def _nonneg(problems, name, value):
    if not (math.isfinite(value) and value >= 0):
        problems.append(f"{name}: must be non-negative (got {value!r})")


def _validate(cfg: ExperimentConfig) -> list:
    p: list = []
    if cfg.name not in EXPERIMENTS:
        p.append(f"experiment.name: must be one of {', '.join(EXPERIMENTS)} (got {cfg.name!r})")
    m = cfg.mortality
    if not 0.5 < m.alpha < 2.0:
        p.append(f"mortality.alpha: must lie in (0.5, 2) (got {m.alpha})")
    _positive(p, "mortality.lam", m.lam)
    _nonneg(p, "mortality.sigma", m.sigma)
    _nonneg(p, "mortality.t", m.t)
    if not math.isfinite(m.eta):
        p.append("mortality.eta: must be finite")
    if m.kind not in ("vasicek", "cir"):
        p.append(f"mortality.kind: must be vasicek or cir (got {m.kind!r})")
    if m.kind == "cir" and m.x0 < 0:
        p.append("mortality.x0: must be non-negative for the cir kind")
    if m.baseline not in ("gompertz", "zero", "file"):
        p.append(f"mortality.baseline: must be gompertz, zero or file (got {m.baseline!r})")
    if m.baseline == "file":
        path = Path(m.baseline_file)
        if cfg.base_dir is not None and not path.is_absolute():
            path = cfg.base_dir / path
        if not m.baseline_file or not path.is_file():
            p.append(f"mortality.baseline_file: file not found ({m.baseline_file!r})")
    r = cfg.rates
    _positive(p, "rates.b1_tilde", r.b1_tilde)
    _nonneg(p, "rates.sigma_r", r.sigma_r)
    pr = cfg.product
    if pr.kind not in {k.value for k in ProductKind} or pr.kind == ProductKind.LONGEVITY_CALL.value:
        p.append(f"product.kind: unsupported product {pr.kind!r}")
    if pr.T < m.t:
        p.append(f"product.T: maturity {pr.T} precedes valuation time {m.t}")
    _nonneg(p, "product.t_prime", pr.t_prime)
    if pr.x_star <= m.t:
        p.append("product.x_star: must exceed the valuation age")
    o = cfg.option
    _nonneg(p, "option.T1", o.T1)
    _positive(p, "option.bl", o.bl)
    if not o.T1 < o.T:
        p.append("option.T1: expiry must precede the bond maturity option.T")
    if not o.strikes:
        p.append("option.strikes: at least one strike required")
    for k in o.strikes:
        _positive(p, "option.strikes", k)
    if o.variant not in ("frozen", "integrated"):
        p.append(f"option.variant: must be frozen or integrated (got {o.variant!r})")
    h = cfg.hedge
    if not 0.5 < h.alpha < 2.0:
        p.append(f"hedge.alpha: must lie in (0.5, 2) (got {h.alpha})")
    _positive(p, "hedge.T0", h.T0)
    if not h.T0 < h.T:
        p.append("hedge.T: instrument maturity must exceed T0")
    for name in ("k1", "k2", "phi_RA", "sigma_mu", "sigma_r"):
        _nonneg(p, f"hedge.{name}", getattr(h, name))
    _positive(p, "hedge.b1_tilde", h.b1_tilde)
    _positive(p, "hedge.claim_mean", h.claim_mean)
    n = cfg.numerics
    _positive(p, "numerics.dt", n.dt)
    _positive(p, "numerics.hedge_dt", n.hedge_dt)
    _positive(p, "numerics.horizon", n.horizon)
    _positive(p, "numerics.n_paths", n.n_paths)
    _positive(p, "numerics.hedge_paths", n.hedge_paths)
    _positive(p, "numerics.threads", n.threads)
    _positive(p, "numerics.histories", n.histories)
    if n.master_seed < 0:
        p.append("numerics.master_seed: must be non-negative")
    if n.dt > 0 and m.t >= 0 and abs(round(m.t / n.dt) * n.dt - m.t) > 1e-9:
        p.append("numerics.dt: valuation time mortality.t must be a multiple of dt")
    if n.hedge_dt > 0 and h.T0 > 0 and h.T > h.T0:
        for name, val in (("hedge.T0", h.T0), ("hedge.T", h.T)):
            if abs(round(val / n.hedge_dt) * n.hedge_dt - val) > 1e-9 * max(1.0, val):
                p.append(f"{name}: must be a multiple of numerics.hedge_dt")
    return p


def parse_config(text: str, base_dir: Path | None = None) -> ExperimentConfig:
    """Parse and validate configuration text.

    Raises
    ------
    ConfigError
        Listing every offending field.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys such as T0 and phi_RA are case-sensitive
    problems: list = []
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"syntax: {exc}"]) from exc
    cfg = ExperimentConfig(source_hash=hashlib.sha256(text.encode()).hexdigest(), base_dir=base_dir)
    known_sections = {"experiment", "mortality", "rates", "product", "option", "hedge", "numerics"}
    for section in parser.sections():
        if section not in known_sections:
            problems.append(f"{section}: unknown section")
    if parser.has_section("experiment"):
        for key, raw in parser.items("experiment"):
            if key == "name":
                cfg.name = raw.strip()
            elif key == "output_dir":
                cfg.output_dir = raw.strip()
            else:
                problems.append(f"experiment.{key}: unknown key")
    _fill(cfg.mortality, parser, "mortality", problems)
    _fill(cfg.rates, parser, "rates", problems)
    _fill(cfg.product, parser, "product", problems)
    _fill(cfg.option, parser, "option", problems)
    _fill(cfg.hedge, parser, "hedge", problems)
    _fill(cfg.numerics, parser, "numerics", problems)
    problems.extend(_validate(cfg))
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path) -> ExperimentConfig:
    """Read a configuration file; the hash covers the exact file bytes."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ConfigError([f"config: cannot read {path}: {exc}"]) from exc
    cfg = parse_config(data.decode("utf-8"), base_dir=path.parent)
    cfg.source_hash = hashlib.sha256(data).hexdigest()
    return cfg

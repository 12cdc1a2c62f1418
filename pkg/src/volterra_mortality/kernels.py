"""Volterra kernels, resolvents, Mittag-Leffler functions and grid convolutions.

Every kernel family used here admits closed-form iterated antiderivatives

.. math::

    K_n(t) = \\int_0^t \\frac{(t-u)^{n-1}}{(n-1)!} K(u)\\,du ,

which are the building blocks of the product-integration weights.  A
piecewise-linear interpolant of the integrand is integrated exactly against
``K`` (product trapezoid); for kernels that are singular at the origin the
integrand is taken piecewise constant instead (product rectangle), which
keeps first-order accuracy across the singularity.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from enum import Enum

import mpmath
import numpy as np
from scipy import special

from .errors import AccuracyError, DivergenceError, DomainError, GridError, InputError

__all__ = [
    "KernelFamily",
    "KernelSpec",
    "GridFunction",
    "mittag_leffler",
    "eval_kernel",
    "eval_resolvent",
    "kernel_integral",
    "cell_integrals",
    "trapezoid_weights",
    "convolve",
    "resolvent_second_kind",
    "kernel_resolvent",
    "e_b",
    "integrated_e_b",
    "grid_size",
]


class KernelFamily(str, Enum):
    CONSTANT = "constant"
    FRACTIONAL = "fractional"
    EXPONENTIAL = "exponential"
    GAMMA = "gamma"


@dataclass(frozen=True)
class KernelSpec:
    """A scalar convolution kernel.

    Parameters
    ----------
    family : {"constant", "fractional", "exponential", "gamma"}
        Kernel family.
    c : float
        Positive scale.
    alpha : float
        Fractional order in (0.5, 2).  Ignored by the constant and
        exponential families.
    lam : float
        Non-negative decay rate.  Ignored by the constant and fractional
        families.
    """

    family: KernelFamily
    c: float = 1.0
    alpha: float = 1.0
    lam: float = 0.0

    def __post_init__(self):
        try:
            fam = KernelFamily(self.family)
        except ValueError as exc:
            raise DomainError(f"unknown kernel family {self.family!r}") from exc
        object.__setattr__(self, "family", fam)
        for name in ("c", "alpha", "lam"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise DomainError(f"kernel parameter {name} must be finite")
            object.__setattr__(self, name, value)
        if self.c <= 0:
            raise DomainError("kernel scale c must be positive")
        if not 0.5 < self.alpha < 2.0:
            raise DomainError("kernel order alpha must lie in (0.5, 2)")
        if self.lam < 0:
            raise DomainError("kernel decay rate lam must be non-negative")

    @classmethod
    def constant(cls, c: float = 1.0) -> "KernelSpec":
        return cls(KernelFamily.CONSTANT, c=c)

    @classmethod
    def fractional(cls, alpha: float, c: float = 1.0) -> "KernelSpec":
        return cls(KernelFamily.FRACTIONAL, c=c, alpha=alpha)

    @classmethod
    def exponential(cls, lam: float, c: float = 1.0) -> "KernelSpec":
        return cls(KernelFamily.EXPONENTIAL, c=c, lam=lam)

    @classmethod
    def gamma(cls, alpha: float, lam: float, c: float = 1.0) -> "KernelSpec":
        return cls(KernelFamily.GAMMA, c=c, alpha=alpha, lam=lam)

    @property
    def order(self) -> float:
        """Effective power-law order (1 for the constant and exponential families)."""
        if self.family in (KernelFamily.FRACTIONAL, KernelFamily.GAMMA):
            return self.alpha
        return 1.0

    @property
    def decay(self) -> float:
        """Effective exponential decay rate."""
        if self.family in (KernelFamily.EXPONENTIAL, KernelFamily.GAMMA):
            return self.lam
        return 0.0

    @property
    def singular(self) -> bool:
        """True when the kernel is unbounded at the origin."""
        return self.order < 1.0

    @property
    def is_markovian(self) -> bool:
        """True when the kernel is a constant, so the Volterra equation is an SDE."""
        return self.order == 1.0 and self.decay == 0.0


@dataclass(frozen=True, eq=False)
class GridFunction:
    """A function sampled on the uniform grid ``t0 + i*dt``.

    ``values`` may be one-dimensional or carry a trailing axis for
    vector-valued functions.
    """

    t0: float
    dt: float
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 0 or values.shape[0] == 0:
            raise GridError("grid function needs at least one value")
        if not self.dt > 0:
            raise GridError("grid step must be positive")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "dt", float(self.dt))

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * (len(self) - 1)

    def __call__(self, t):
        """Linear interpolation; raises :class:`InputError` outside the grid."""
        t = np.asarray(t, dtype=float)
        tol = 1e-9 * max(1.0, abs(self.t_end))
        if np.any(t < self.t0 - tol) or np.any(t > self.t_end + tol):
            raise InputError(
                f"evaluation point outside grid [{self.t0}, {self.t_end}]"
            )
        pos = np.clip((t - self.t0) / self.dt, 0.0, len(self) - 1)
        lo = np.minimum(np.floor(pos).astype(int), len(self) - 2) if len(self) > 1 else np.zeros_like(pos, dtype=int)
        if len(self) == 1:
            out = np.broadcast_to(self.values[0], t.shape + self.values.shape[1:]).copy()
        else:
            frac = pos - lo
            if self.values.ndim > 1:
                frac = frac[..., None]
            out = (1.0 - frac) * self.values[lo] + frac * self.values[lo + 1]
        return out[()] if out.ndim == 0 else out

    def cumulative_integral(self) -> "GridFunction":
        """Running trapezoidal integral from ``t0``."""
        v = self.values
        out = np.zeros_like(v)
        out[1:] = np.cumsum(0.5 * self.dt * (v[1:] + v[:-1]), axis=0)
        return GridFunction(self.t0, self.dt, out)


def grid_size(horizon: float, dt: float) -> int:
    """Number of steps of a uniform grid covering ``[0, horizon]``."""
    if not (dt > 0 and math.isfinite(dt)):
        raise GridError("dt must be positive and finite")
    if not (horizon > 0 and math.isfinite(horizon)):
        raise GridError("horizon must be positive and finite")
    n = int(round(horizon / dt))
    if n < 1 or abs(n * dt - horizon) > 1e-6 * dt:
        raise GridError(f"horizon {horizon} is not a multiple of dt={dt}")
    return n


# ---------------------------------------------------------------------------
# Mittag-Leffler function
# ---------------------------------------------------------------------------

_FLOAT_CANCELLATION_LIMIT = 1e4
_SERIES_RADIUS = 50.0  # switch to the asymptotic expansion beyond |z|^(1/alpha)


def _ml_float_series(alpha, beta, z):
    """Vectorised power series; returns (value, sum of |terms|)."""
    out = np.zeros_like(z)
    total_abs = np.zeros_like(z)
    logz = np.log(np.abs(z))
    neg = z < 0
    active = np.ones(z.shape, dtype=bool)
    n0 = 0
    block = 64
    while np.any(active):
        n = np.arange(n0, n0 + block, dtype=float)
        logt = n[None, :] * logz[active, None] - special.gammaln(alpha * n[None, :] + beta)
        mag = np.exp(logt)
        sign = np.where(neg[active, None] & (n[None, :] % 2 == 1), -1.0, 1.0)
        out[active] += np.sum(sign * mag, axis=1)
        total_abs[active] += np.sum(mag, axis=1)
        last = logt[:, -1]
        decreasing = last < logt[:, -2]
        small = mag[:, -1] <= 1e-17 * np.maximum(np.abs(out[active]), 1e-300)
        done = decreasing & small
        idx = np.flatnonzero(active)
        active[idx[done]] = False
        n0 += block
        if n0 > 20000:
            raise AccuracyError("Mittag-Leffler series did not converge")
    return out, total_abs


def _ml_mp_series(alpha, beta, z, total_abs):
    """Extended-precision series for arguments with heavy cancellation."""
    digits = 30 + 2 * max(math.log10(max(total_abs, 1.0)), 0.0)
    for _ in range(4):
        with mpmath.workdps(int(digits)):
            a = mpmath.mpf(alpha)
            b = mpmath.mpf(beta)
            zz = mpmath.mpf(z)
            s = mpmath.mpf(0)
            term_abs_max = mpmath.mpf(0)
            power = mpmath.mpf(1)
            eps = mpmath.mpf(10) ** (-int(digits))
            prev = None
            for n in range(100000):
                term = power * mpmath.rgamma(a * n + b)
                s += term
                mag = abs(term)
                term_abs_max = max(term_abs_max, mag)
                if n > 2 and prev is not None and mag < prev and mag <= eps * abs(s):
                    break
                prev = mag
                power *= zz
            else:
                raise AccuracyError("Mittag-Leffler extended series did not converge")
            if s == 0:
                digits *= 2
                continue
            lost = float(mpmath.log10(term_abs_max / abs(s))) if term_abs_max > 0 else 0.0
            if lost + 18 <= digits:
                return float(s)
            digits = lost + 30
    raise AccuracyError("Mittag-Leffler evaluation lost too much precision")


def _ml_asymptotic(alpha, beta, z):
    """Large negative argument: algebraic expansion plus the residues of the
    poles ``s**alpha = z`` lying on the principal sheet."""
    x = -z
    logx = math.log(x)
    total = 0.0
    for k in range(1, 400):
        # |1/Gamma(beta - alpha k)| <= Gamma(alpha k - beta + 1) / pi bounds every term
        log_env = -k * logx + special.gammaln(max(alpha * k - beta + 1.0, 1e-300)) - math.log(math.pi)
        if k > 1 and log_env > prev_env:
            break
        prev_env = log_env
        total -= (-x) ** (-k) * special.rgamma(beta - alpha * k)
        if log_env < math.log(1e-18 * max(abs(total), 1e-300)):
            break
    radius = x ** (1.0 / alpha)
    kmax = int(alpha) + 2
    for k in range(-kmax, kmax + 1):
        angle = (math.pi + 2.0 * math.pi * k) / alpha
        if abs(angle) < math.pi:
            s = radius * complex(math.cos(angle), math.sin(angle))
            total += ((s ** (1.0 - beta)) * np.exp(s) / alpha).real
    return total


def mittag_leffler(alpha: float, beta: float, z):
    """Two-parameter Mittag-Leffler function :math:`E_{\\alpha,\\beta}(z)`.

    Parameters
    ----------
    alpha, beta : float
        Positive parameters.
    z : float or array_like
        Real argument(s).

    Returns
    -------
    float or ndarray
        :math:`\\sum_{n\\ge 0} z^n / \\Gamma(\\alpha n + \\beta)` to about
        ten significant digits.

    Notes
    -----
    Double-precision series when cancellation is mild, an
    extended-precision series for moderately large negative arguments and,
    beyond ``|z|**(1/alpha) > 50``, the asymptotic expansion including the
    exponentially damped oscillating pole terms present for ``alpha > 1``.

    Examples
    --------
    >>> round(mittag_leffler(1.0, 1.0, 1.0), 9)
    2.718281828
    """
    if not (math.isfinite(alpha) and math.isfinite(beta)) or alpha <= 0 or beta <= 0:
        raise DomainError("Mittag-Leffler parameters must be positive and finite")
    zarr = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(zarr)):
        raise DomainError("Mittag-Leffler argument must be finite")
    flat = zarr.ravel()
    out = np.empty_like(flat)
    radius = np.abs(flat) ** (1.0 / alpha)
    if np.any((flat > 0) & (radius > 650.0)):
        raise AccuracyError("Mittag-Leffler argument beyond the overflow bound")
    zero = flat == 0.0
    out[zero] = special.rgamma(beta)
    if alpha == 1.0 and beta == 1.0:
        return float(np.exp(zarr)) if zarr.ndim == 0 else np.exp(zarr)
    asym = (flat < 0) & (radius > _SERIES_RADIUS) & (alpha != 1.0)
    for i in np.flatnonzero(asym):
        out[i] = _ml_asymptotic(alpha, beta, float(flat[i]))
    series = ~zero & ~asym
    if np.any(series):
        idx = np.flatnonzero(series)
        val, tot = _ml_float_series(alpha, beta, flat[idx])
        ok = tot <= _FLOAT_CANCELLATION_LIMIT * np.abs(val)
        out[idx[ok]] = val[ok]
        for j in np.flatnonzero(~ok):
            out[idx[j]] = _ml_mp_series(alpha, beta, float(flat[idx[j]]), float(tot[j]))
    out = out.reshape(zarr.shape)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Kernel and resolvent closed forms
# ---------------------------------------------------------------------------


def _check_times(spec: KernelSpec, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t < 0):
        raise DomainError("kernel argument must be finite and non-negative")
    if spec.singular and np.any(t == 0):
        raise DomainError("kernel is singular at t=0 for alpha < 1")
    return t


def _power(t, p):
    """t**p with the convention 0**0 = 1."""
    with np.errstate(divide="ignore"):
        return np.where(t == 0, 1.0 if p == 0 else (0.0 if p > 0 else np.inf), np.power(t, p))


def eval_kernel(spec: KernelSpec, t):
    """Evaluate K(t) in closed form.

    Examples
    --------
    >>> eval_kernel(KernelSpec.exponential(0.5), 2.0)  # doctest: +ELLIPSIS
    0.36787944...
    """
    t = _check_times(spec, t)
    a, lam = spec.order, spec.decay
    out = spec.c * _power(t, a - 1.0) * special.rgamma(a) * np.exp(-lam * t)
    return out[()] if out.ndim == 0 else out


def eval_resolvent(spec: KernelSpec, t):
    """Evaluate the resolvent R of K (``K*R = K - R``) in closed form."""
    t = _check_times(spec, t)
    a, lam, c = spec.order, spec.decay, spec.c
    if a == 1.0:
        out = c * np.exp(-(lam + c) * t)
    else:
        ml = mittag_leffler(a, a, -c * np.power(t, a))
        out = c * _power(t, a - 1.0) * np.exp(-lam * t) * ml
    out = np.asarray(out, dtype=float)
    return out[()] if out.ndim == 0 else out


def kernel_integral(spec: KernelSpec, t, order: int = 1):
    """Iterated antiderivative ``K_n(t) = int_0^t (t-u)^(n-1)/(n-1)! K(u) du``.

    Parameters
    ----------
    spec : KernelSpec
    t : float or array_like
        Non-negative times.
    order : int
        ``n`` in 1..3 (``order=0`` returns the kernel itself).
    """
    if order == 0:
        return eval_kernel(spec, t)
    if order not in (1, 2, 3):
        raise DomainError("antiderivative order must be between 0 and 3")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(~np.isfinite(t)):
        raise DomainError("kernel argument must be finite and non-negative")
    a, lam, c = spec.order, spec.decay, spec.c
    if lam == 0.0:
        out = c * np.power(t, a - 1.0 + order) * special.rgamma(a + order)
    else:
        out = np.zeros_like(t)
        x = lam * t
        for k in range(order):
            coef = math.comb(order - 1, k) * (-1) ** k * special.poch(a, k)
            out = out + coef * np.power(t, order - 1 - k) * lam ** (-(a + k)) * special.gammainc(a + k, x)
        out = c * out / math.factorial(order - 1)
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Product-integration weights
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=64)
def _weights(spec: KernelSpec, n: int, dt: float):
    nodes = dt * np.arange(n + 1)
    k1 = kernel_integral(spec, nodes, 1)
    k2 = kernel_integral(spec, nodes, 2)
    cells = np.diff(k1)
    dk2 = np.diff(k2) / dt
    down = dk2 - k1[:-1]
    up = k1[1:] - dk2
    for arr in (cells, down, up):
        arr.setflags(write=False)
    return cells, down, up


def cell_integrals(spec: KernelSpec, n: int, dt: float) -> np.ndarray:
    """Exact cell integrals ``G_m = int_{m dt}^{(m+1) dt} K``, ``m = 0..n-1``."""
    return _weights(spec, int(n), float(dt))[0]


def trapezoid_weights(spec: KernelSpec, n: int, dt: float):
    """Product-trapezoid moments ``(down_m, up_m)`` for ``m = 0..n-1``.

    ``down_m`` weights the integrand node nearer the evaluation time in cell
    ``m`` (counted backwards from the evaluation time) and ``up_m`` the
    farther node.
    """
    _, down, up = _weights(spec, int(n), float(dt))
    return down, up


def _lag_weights(spec: KernelSpec, n: int, dt: float) -> np.ndarray:
    """Interior lag weights ``w_l = down_l + up_{l-1}`` for ``l = 0..n-1``."""
    down, up = trapezoid_weights(spec, n, dt)
    w = down.copy()
    w[1:] += up[:-1]
    return w


def _kernel_convolve_values(spec: KernelSpec, g: np.ndarray, dt: float) -> np.ndarray:
    """``(K*g)(t_i)`` for all grid nodes with exact kernel moments."""
    n = len(g)
    if n == 1:
        return np.zeros(1)
    if spec.singular or not np.isfinite(g[0]):
        cells = cell_integrals(spec, n - 1, dt)
        gg = np.array(g, dtype=float)
        gg[0] = 0.0
        out = np.zeros(n)
        out[1:] = np.convolve(cells, gg[1:])[: n - 1]
        return out
    down, up = trapezoid_weights(spec, n - 1, dt)
    w = np.zeros(n)
    w[: n - 1] = down
    w[1:] += up
    out = np.convolve(w, g)[:n]
    # the oldest node only receives the far-node moment of its cell
    out[1 : n - 1] -= down[1:] * g[0]
    out[0] = 0.0
    return out


def convolve(f, g: GridFunction) -> GridFunction:
    """Convolution ``(f*g)(t_i) = int_0^{t_i} f(t_i - s) g(s) ds``.

    Parameters
    ----------
    f : GridFunction or KernelSpec
        Sampled function (trapezoidal rule on the product) or a kernel
        (exact product integration of a piecewise-linear ``g``).
    g : GridFunction
        Sampled integrand on a grid starting at 0.

    Returns
    -------
    GridFunction
        On the common grid, truncated to the shorter length.
    """
    if g.t0 != 0.0:
        raise GridError("convolution requires grids starting at 0")
    if isinstance(f, KernelSpec):
        return GridFunction(0.0, g.dt, _kernel_convolve_values(f, g.values, g.dt))
    if f.t0 != 0.0 or not math.isclose(f.dt, g.dt, rel_tol=1e-12):
        raise GridError("convolution operands must share t0=0 and dt")
    n = min(len(f), len(g))
    fv, gv = f.values[:n], g.values[:n]
    if not (np.all(np.isfinite(fv)) and np.all(np.isfinite(gv))):
        raise DomainError("sampled convolution needs finite values; pass a KernelSpec for singular kernels")
    full = np.convolve(fv, gv)[:n]
    full = full - 0.5 * fv * gv[0] - 0.5 * fv[0] * gv
    full[0] = 0.0
    return GridFunction(0.0, g.dt, g.dt * full)


def resolvent_second_kind(F: GridFunction) -> GridFunction:
    """Solve ``R = F - F*R`` by trapezoidal forward stepping.

    Raises
    ------
    DivergenceError
        When a step produces a non-finite value.
    """
    if F.t0 != 0.0:
        raise GridError("resolvent equation needs a grid starting at 0")
    f = F.values
    if not np.isfinite(f[0]):
        raise DomainError("trapezoidal resolvent needs a finite F(0); use kernel_resolvent")
    h = F.dt
    n = len(f)
    r = np.zeros(n)
    r[0] = f[0]
    denom = 1.0 + 0.5 * h * f[0]
    if denom == 0:
        raise DivergenceError("singular trapezoidal step", 0.0)
    for i in range(1, n):
        hist = 0.5 * f[i] * r[0] + np.dot(f[i - 1:0:-1], r[1:i])
        r[i] = (f[i] - h * hist) / denom
        if not math.isfinite(r[i]):
            raise DivergenceError("resolvent stepping diverged", i * h)
    return GridFunction(0.0, h, r)


def kernel_resolvent(spec: KernelSpec, scale: float, horizon: float, dt: float) -> GridFunction:
    """Resolvent of ``scale*K`` using exact kernel moments.

    For singular kernels the value at ``t=0`` is stored as ``inf``.
    """
    n = grid_size(horizon, dt)
    return GridFunction(0.0, dt, _kernel_resolvent_values(spec, float(scale), n, float(dt)))


@functools.lru_cache(maxsize=32)
def _kernel_resolvent_values(spec: KernelSpec, scale: float, n: int, dt: float) -> np.ndarray:
    times = dt * np.arange(n + 1)
    r = np.zeros(n + 1)
    if scale == 0.0:
        r.setflags(write=False)
        return r
    if spec.singular:
        kv = np.empty(n + 1)
        kv[0] = np.inf
        kv[1:] = eval_kernel(spec, times[1:])
        cells = cell_integrals(spec, n, dt)
        r[0] = np.inf
        denom = 1.0 + scale * cells[0]
        for i in range(1, n + 1):
            hist = np.dot(cells[1:i], r[i - 1:0:-1]) if i > 1 else 0.0
            r[i] = scale * (kv[i] - hist) / denom
            if not math.isfinite(r[i]):
                raise DivergenceError("resolvent stepping diverged", i * dt)
    else:
        kv = eval_kernel(spec, times)
        w = _lag_weights(spec, n, dt)
        down, up = trapezoid_weights(spec, n, dt)
        r[0] = scale * kv[0]
        denom = 1.0 + scale * down[0]
        for i in range(1, n + 1):
            hist = np.dot(w[1:i], r[i - 1:0:-1]) + up[i - 1] * r[0]
            r[i] = scale * (kv[i] - hist) / denom
            if not math.isfinite(r[i]):
                raise DivergenceError("resolvent stepping diverged", i * dt)
    r.setflags(write=False)
    return r


def e_b(spec: KernelSpec, B: float, horizon: float, dt: float):
    """Resolvent ``R_B`` of ``-K B`` and ``E_B = K - R_B*K`` on ``[0, horizon]``.

    Returns
    -------
    (GridFunction, GridFunction)
        ``R_B`` and ``E_B``.  For singular kernels both carry ``inf`` at 0.
    """
    n = grid_size(horizon, dt)
    rb = kernel_resolvent(spec, -B, horizon, dt)
    times = dt * np.arange(n + 1)
    if spec.singular:
        kv = np.empty(n + 1)
        kv[0] = np.inf
        kv[1:] = eval_kernel(spec, times[1:])
    else:
        kv = eval_kernel(spec, times)
    if B == 0.0:
        return rb, GridFunction(0.0, dt, kv)
    conv = _kernel_convolve_values(spec, rb.values, dt)
    eb = kv - conv
    return rb, GridFunction(0.0, dt, eb)


def integrated_e_b(spec: KernelSpec, B: float, horizon: float, dt: float) -> GridFunction:
    """Running integral ``IE(t) = int_0^t E_B(s) ds``.

    ``IE`` solves the regular Volterra equation ``IE = K_1 + B (K*IE)`` with
    ``K_1`` the first antiderivative of ``K``; it is bounded even for
    singular kernels.  The integrated resolvent follows as
    ``int_0^t R_B = -B IE(t)``.
    """
    n = grid_size(horizon, dt)
    return GridFunction(0.0, dt, _integrated_e_b_values(spec, float(B), n, float(dt)))


@functools.lru_cache(maxsize=32)
def _integrated_e_b_values(spec: KernelSpec, B: float, n: int, dt: float) -> np.ndarray:
    k1 = kernel_integral(spec, dt * np.arange(n + 1), 1)
    if B == 0.0:
        out = np.array(k1, dtype=float)
        out.setflags(write=False)
        return out
    w = _lag_weights(spec, n, dt)
    down, _ = trapezoid_weights(spec, n, dt)
    ie = np.zeros(n + 1)
    denom = 1.0 - B * down[0]
    for i in range(1, n + 1):
        hist = np.dot(w[1:i], ie[i - 1:0:-1])
        ie[i] = (k1[i] + B * hist) / denom
        if not math.isfinite(ie[i]):
            raise DivergenceError("integrated E_B stepping diverged", i * dt)
    ie.setflags(write=False)
    return ie

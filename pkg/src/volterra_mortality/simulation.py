"""Monte Carlo simulation of the mortality factor, short rate and claims.

Random numbers come from independent substreams keyed by
``(master_seed, path_index, stream)``, so a path is reproduced bit for bit
regardless of how many paths are generated or in which order.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import InputError, ModelError
from .kernels import cell_integrals, grid_size
from .mortality import AffineVolterraModel, mean_tables
from .rates import AffineRateModel

__all__ = [
    "Stream",
    "RngPolicy",
    "ClaimLaw",
    "SamplePath",
    "simulate_svie",
    "simulate_svie_batch",
    "simulate_rate",
    "simulate_rate_batch",
    "integrate_hazard",
    "simulate_claims",
    "write_path_csv",
    "pairwise_mean",
]


class Stream(IntEnum):
    """Substream identifiers."""

    MORTALITY = 0
    RATE = 1
    CLAIMS = 2


@dataclass(frozen=True)
class RngPolicy:
    """Seed policy: one independent generator per ``(path_index, stream)``."""

    master_seed: int = 20240601

    def __post_init__(self):
        seed = int(self.master_seed)
        if not 0 <= seed < 2 ** 64:
            raise InputError("master_seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "master_seed", seed)

    def generator(self, path_index: int, stream: int = Stream.MORTALITY) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(int(path_index), int(stream)))
        return np.random.Generator(np.random.PCG64(seq))

    def normals(self, path_indices, stream: int, n: int, scale: float = 1.0) -> np.ndarray:
        """Standard normals scaled by ``scale``, one row per path index."""
        idx = np.atleast_1d(np.asarray(path_indices, dtype=np.int64))
        out = np.empty((len(idx), n))
        for row, p in enumerate(idx):
            out[row] = self.generator(int(p), stream).standard_normal(n)
        out *= scale
        return out


@dataclass(frozen=True)
class ClaimLaw:
    """Claim-size distribution.

    Parameters
    ----------
    kind : {"exponential", "constant", "gamma"}
    mean : float
        ``E[z]``.
    shape : float
        Gamma shape (``kind="gamma"`` only).
    """

    kind: str = "exponential"
    mean: float = 2.0
    shape: float = 1.0

    def __post_init__(self):
        if self.kind not in ("exponential", "constant", "gamma"):
            raise InputError(f"unknown claim law {self.kind!r}")
        if not self.mean > 0 or not self.shape > 0:
            raise InputError("claim law parameters must be positive")

    @property
    def second_moment(self) -> float:
        """``E[z^2]``."""
        if self.kind == "constant":
            return self.mean ** 2
        shape = 1.0 if self.kind == "exponential" else self.shape
        return self.mean ** 2 * (1.0 + 1.0 / shape)

    def sample(self, gen: np.random.Generator, size) -> np.ndarray:
        if self.kind == "constant":
            return np.full(size, self.mean)
        if self.kind == "exponential":
            return gen.exponential(self.mean, size)
        return gen.gamma(self.shape, self.mean / self.shape, size)


@dataclass(frozen=True, eq=False)
class SamplePath:
    """One simulated scenario on the grid ``t_i = i dt``, ``i = 0..n``.

    ``dW[i]`` and ``dWp[i]`` are the increments over ``[t_i, t_{i+1}]``.
    ``claims`` is a tuple of ``(time, size)`` pairs.
    """

    dt: float
    x: np.ndarray
    dW: np.ndarray
    dWp: np.ndarray | None = None
    r: np.ndarray | None = None
    int_mu: np.ndarray | None = None
    claims: tuple = ()
    path_index: int = 0

    def __post_init__(self):
        n = len(self.x) - 1
        if len(self.dW) != n:
            raise InputError("dW must have one entry fewer than x")
        for name in ("dWp",):
            arr = getattr(self, name)
            if arr is not None and len(arr) != n:
                raise InputError(f"{name} must have one entry fewer than x")
        for name in ("r", "int_mu"):
            arr = getattr(self, name)
            if arr is not None and len(arr) != n + 1:
                raise InputError(f"{name} must match the length of x")

    @property
    def n(self) -> int:
        return len(self.x) - 1

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n + 1)

    def truncated(self, t: float) -> "SamplePath":
        """Copy restricted to ``[0, t]``."""
        k = int(round(t / self.dt))
        if k > self.n or abs(k * self.dt - t) > 1e-9 * max(1.0, t):
            raise InputError("truncation time must be a grid point inside the path")
        return SamplePath(
            self.dt,
            self.x[: k + 1],
            self.dW[:k],
            None if self.dWp is None else self.dWp[:k],
            None if self.r is None else self.r[: k + 1],
            None if self.int_mu is None else self.int_mu[: k + 1],
            tuple(c for c in self.claims if c[0] <= t),
            self.path_index,
        )


def _euler_weights(model: AffineVolterraModel, n: int, dt: float) -> np.ndarray:
    return cell_integrals(model.kernel, n, dt) / dt


def simulate_svie_batch(
    model: AffineVolterraModel,
    rng: RngPolicy,
    path_indices,
    horizon: float,
    dt: float,
    scheme: str = "euler",
    dW: np.ndarray | None = None,
):
    """Simulate several factor paths.

    Parameters
    ----------
    scheme : {"euler", "resolvent"}
        ``"euler"`` steps ``X_i = X_0 + sum_j G_{i-j} [b(X_j) + sigma(X_j)
        dW_j / dt]`` with exact cell integrals ``G``.  ``"resolvent"``
        steps the variation-of-constants form ``X_i = D_i + sum_j w_{i-j}
        sigma(X_j) dW_j`` whose weights are those used by
        :func:`~volterra_mortality.mortality.conditional_mean`.
    dW : ndarray, optional
        Brownian increments (paths x steps); drawn from ``rng`` otherwise.

    Returns
    -------
    (ndarray, ndarray)
        Factor values ``(paths, n+1)`` and increments ``(paths, n)``.
    """
    n = grid_size(horizon, dt)
    idx = np.atleast_1d(np.asarray(path_indices, dtype=np.int64))
    if dW is None:
        dW = rng.normals(idx, Stream.MORTALITY, n, math.sqrt(dt))
    else:
        dW = np.asarray(dW, dtype=float)
        if dW.shape != (len(idx), n):
            raise InputError("dW has the wrong shape")
    P = len(idx)
    x = np.empty((P, n + 1))
    x[:, 0] = model.x0
    times = dt * np.arange(n + 1)
    b0 = model.b0_at(times)
    if scheme == "euler":
        G = _euler_weights(model, n, dt)
        drive = np.empty((P, n))
        for i in range(1, n + 1):
            j = i - 1
            drive[:, j] = (b0[j] + model.B * x[:, j]) * dt + model.sigma(x[:, j]) * dW[:, j]
            x[:, i] = model.x0 + drive[:, :i] @ G[i - 1 :: -1]
    elif scheme == "resolvent":
        tables = mean_tables(model.kernel, model.B, horizon, dt)
        from .mortality import _forced_mean

        det = (1.0 + model.B * tables.ie[: n + 1]) * model.x0 + _forced_mean(model, tables, times)
        w = tables.noise_weights(n)
        if model.A1 == 0.0:
            eps = math.sqrt(model.A0) * dW
            for p in range(P):
                x[p, 1:] = det[1:] + np.convolve(w[1:], eps[p])[:n]
        else:
            eps = np.empty((P, n))
            for i in range(1, n + 1):
                j = i - 1
                eps[:, j] = model.sigma(x[:, j]) * dW[:, j]
                x[:, i] = det[i] + eps[:, :i] @ w[i:0:-1]
    else:
        raise InputError(f"unknown scheme {scheme!r}")
    return x, dW


def simulate_svie(
    model: AffineVolterraModel,
    rng: RngPolicy,
    path_index: int,
    horizon: float,
    dt: float,
    scheme: str = "euler",
) -> SamplePath:
    """Simulate one factor path; see :func:`simulate_svie_batch`."""
    x, dW = simulate_svie_batch(model, rng, [path_index], horizon, dt, scheme)
    return SamplePath(dt, x[0], dW[0], path_index=int(path_index))


def simulate_rate_batch(rate_model: AffineRateModel, rng: RngPolicy, path_indices, horizon: float, dt: float):
    """Euler-Maruyama short-rate paths; returns ``(r, dW')``."""
    n = grid_size(horizon, dt)
    idx = np.atleast_1d(np.asarray(path_indices, dtype=np.int64))
    dWp = rng.normals(idx, Stream.RATE, n, math.sqrt(dt))
    z = np.empty((len(idx), n + 1))
    z[:, 0] = rate_model.z0
    a, b, s = rate_model.b0_tilde, rate_model.b1_tilde, rate_model.sigma_r
    for i in range(n):
        z[:, i + 1] = z[:, i] + (a - b * z[:, i]) * dt + s * dWp[:, i]
    return rate_model.short_rate(z), dWp


def simulate_rate(rate_model: AffineRateModel, rng: RngPolicy, path_index: int, horizon: float, dt: float):
    """One Euler-Maruyama short-rate path ``(r, dW')``."""
    r, dWp = simulate_rate_batch(rate_model, rng, [path_index], horizon, dt)
    return r[0], dWp[0]


def integrate_hazard(path: SamplePath, model: AffineVolterraModel) -> SamplePath:
    """Fill ``int_mu`` with the trapezoidal integral of ``m(t) + eta X``."""
    mu = model.intensity(path.times, path.x)
    cum = np.zeros(path.n + 1)
    cum[1:] = np.cumsum(0.5 * path.dt * (mu[1:] + mu[:-1]))
    return replace(path, int_mu=cum)


def simulate_claims(
    path: SamplePath,
    k1: float,
    claim_law: ClaimLaw,
    rng: RngPolicy,
    path_index: int | None = None,
    model: AffineVolterraModel | None = None,
    clamp: bool = False,
) -> SamplePath:
    """Claim arrivals by inverting the compensator ``k1 int mu``.

    Parameters
    ----------
    path : SamplePath
        With ``int_mu`` populated.
    k1 : float
        Intensity scale.
    claim_law : ClaimLaw
    rng : RngPolicy
    path_index : int, optional
        Defaults to ``path.path_index``.
    model : AffineVolterraModel, optional
        Used to check the sign of the intensity on the grid; without it the
        increments of ``int_mu`` are checked.
    clamp : bool
        Replace negative intensity by zero instead of raising.

    Raises
    ------
    ModelError
        On a negative intensity when ``clamp`` is false.
    """
    if path.int_mu is None:
        raise InputError("integrate_hazard must run before simulate_claims")
    if k1 < 0:
        raise InputError("k1 must be non-negative")
    idx = path.path_index if path_index is None else path_index
    if model is not None:
        mu = model.intensity(path.times, path.x)
    else:
        mu = np.concatenate([[0.0], np.diff(path.int_mu) / path.dt])
    if np.any(mu < 0):
        if not clamp:
            bad = float(path.times[np.argmax(mu < 0)])
            raise ModelError(f"negative claim intensity on the path (first at t={bad:.4g})")
        mu = np.maximum(mu, 0.0)
        comp = np.zeros(path.n + 1)
        comp[1:] = np.cumsum(0.5 * path.dt * (mu[1:] + mu[:-1]))
    elif model is not None:
        comp = np.zeros(path.n + 1)
        comp[1:] = np.cumsum(0.5 * path.dt * (mu[1:] + mu[:-1]))
    else:
        comp = np.asarray(path.int_mu, dtype=float) - path.int_mu[0]
    comp = k1 * comp
    gen = rng.generator(idx, Stream.CLAIMS)
    total = comp[-1]
    arrivals = []
    level = gen.exponential(1.0)
    while level <= total:
        arrivals.append(level)
        level += gen.exponential(1.0)
    if not arrivals:
        return replace(path, claims=())
    times = np.interp(arrivals, comp, path.times)
    sizes = claim_law.sample(gen, len(arrivals))
    return replace(path, claims=tuple(zip(times.tolist(), sizes.tolist())))


def write_path_csv(path: SamplePath, filename) -> None:
    """Dump ``t, X, r, int_mu`` with a header row."""
    filename = Path(filename)
    n = path.n
    r = path.r if path.r is not None else np.full(n + 1, np.nan)
    im = path.int_mu if path.int_mu is not None else np.full(n + 1, np.nan)
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "X", "r", "int_mu"])
        for row in zip(path.times, path.x, r, im):
            w.writerow([f"{v:.12g}" for v in row])


def pairwise_mean(values: np.ndarray) -> float:
    """Mean with numpy's pairwise summation along the first axis."""
    values = np.asarray(values, dtype=float)
    return float(np.add.reduce(values, axis=0) / len(values))

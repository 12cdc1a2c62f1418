"""Right-continuous piecewise-constant functions of time."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError

__all__ = ["StepFunction", "as_step"]


@dataclass(frozen=True)
class StepFunction:
    """Piecewise-constant function.

    ``values[k]`` applies on ``[breaks[k], breaks[k+1])``; the first value
    extends to ``-inf`` and the last to ``+inf``.

    Parameters
    ----------
    breaks : tuple of float
        Strictly increasing break points, ``len(values) - 1`` of them.
    values : tuple of float
        Levels.

    Examples
    --------
    >>> f = StepFunction((1.0,), (0.1, 0.2))
    >>> float(f(0.5)), float(f(1.0))
    (0.1, 0.2)
    """

    breaks: tuple
    values: tuple

    def __post_init__(self):
        breaks = tuple(float(b) for b in self.breaks)
        values = tuple(float(v) for v in self.values)
        if len(values) != len(breaks) + 1:
            raise InputError("step function needs one more value than break points")
        if any(b2 <= b1 for b1, b2 in zip(breaks, breaks[1:])):
            raise InputError("step function break points must increase strictly")
        if not all(np.isfinite(values)) or not all(np.isfinite(breaks)):
            raise InputError("step function entries must be finite")
        object.__setattr__(self, "breaks", breaks)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, value: float) -> "StepFunction":
        return cls((), (value,))

    @property
    def is_constant(self) -> bool:
        return len(set(self.values)) == 1

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(np.asarray(self.breaks), t, side="right")
        out = np.asarray(self.values)[idx]
        return out[()] if out.ndim == 0 else out

    def pieces(self, a: float, b: float):
        """Yield ``(lo, hi, value)`` for the pieces intersecting ``[a, b]``."""
        edges = [a] + [x for x in self.breaks if a < x < b] + [b]
        for lo, hi in zip(edges[:-1], edges[1:]):
            yield lo, hi, float(self(0.5 * (lo + hi)))

    def integral(self, a: float, b: float, power: int = 1) -> float:
        """Exact ``int_a^b f(s)**power ds``."""
        if b < a:
            return -self.integral(b, a, power)
        return sum((hi - lo) * v ** power for lo, hi, v in self.pieces(a, b))

    def _combine(self, other, op):
        other = as_step(other)
        breaks = tuple(sorted(set(self.breaks) | set(other.breaks)))
        probes = [breaks[0] - 1.0] if breaks else [0.0]
        probes += list(breaks)
        values = tuple(float(op(self(p), other(p))) for p in probes)
        return StepFunction(breaks, values)

    def __add__(self, other):
        return self._combine(other, lambda x, y: x + y)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, lambda x, y: x - y)

    def __rsub__(self, other):
        return as_step(other) - self

    def __mul__(self, other):
        return self._combine(other, lambda x, y: x * y)

    __rmul__ = __mul__

    def __neg__(self):
        return StepFunction(self.breaks, tuple(-v for v in self.values))


def as_step(value) -> StepFunction:
    """Promote a number to a constant :class:`StepFunction`."""
    if isinstance(value, StepFunction):
        return value
    return StepFunction.constant(float(value))

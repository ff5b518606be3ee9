"""Boxes and vectorized interval arithmetic.

`Interval` holds arrays of lower and upper bounds, so one evaluation of a map
over a batch of boxes costs a handful of numpy calls. Ordinary numpy ufuncs
(``np.sin``, ``np.sqrt``, ...) dispatch to the interval versions through
``__array_ufunc__``, which lets a model be written once and evaluated both
pointwise and over boxes.

No directed rounding is performed; consumers that need soundness against
floating-point error add a tolerance when snapping boxes to grid cells.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UnsupportedOperationError

_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class IntervalBox:
    """Axis-aligned closed hyperrectangle ``[lower, upper]``."""

    lower: tuple
    upper: tuple

    def __init__(self, lower, upper):
        lo = np.atleast_1d(np.asarray(lower, dtype=float))
        hi = np.atleast_1d(np.asarray(upper, dtype=float))
        if lo.ndim != 1 or lo.shape != hi.shape or lo.size == 0:
            raise DomainError(f"malformed box bounds {lower!r}, {upper!r}")
        if np.any(lo > hi) or not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise DomainError(f"invalid box: lower={lo.tolist()} upper={hi.tolist()}")
        object.__setattr__(self, "lower", tuple(lo.tolist()))
        object.__setattr__(self, "upper", tuple(hi.tolist()))

    @property
    def dim(self):
        return len(self.lower)

    @property
    def lo(self):
        return np.array(self.lower)

    @property
    def hi(self):
        return np.array(self.upper)

    @property
    def width(self):
        return self.hi - self.lo

    @property
    def center(self):
        return 0.5 * (self.lo + self.hi)

    def contains(self, point, tol=0.0):
        p = np.asarray(point, dtype=float)
        return bool(np.all(p >= self.lo - tol) and np.all(p <= self.hi + tol))

    def contains_box(self, other, tol=0.0):
        return bool(np.all(other.lo >= self.lo - tol) and np.all(other.hi <= self.hi + tol))

    def intersection(self, other):
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        if np.any(lo > hi):
            return None
        return IntervalBox(lo, hi)

    def sample(self, rng, n):
        """``n`` uniform random points, shape ``(n, dim)``."""
        return rng.uniform(self.lo, self.hi, size=(n, self.dim))

    def __repr__(self):
        parts = " x ".join(f"[{a:.6g}, {b:.6g}]" for a, b in zip(self.lower, self.upper))
        return f"IntervalBox({parts})"


def _as_interval(v):
    if isinstance(v, Interval):
        return v
    return Interval(v, v)


class Interval:
    """Array-valued closed interval ``[lo, hi]``.

    Supports ``+ - *``, division by intervals not containing zero, integer
    powers (even powers are tight), and the ufuncs sin, cos, sqrt, arctan,
    exp, square, absolute. Anything else raises `UnsupportedOperationError`.
    """

    __slots__ = ("lo", "hi")
    __array_priority__ = 1000

    def __init__(self, lo, hi=None):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = self.lo if hi is None else np.asarray(hi, dtype=float)

    def __repr__(self):
        return f"Interval({self.lo!r}, {self.hi!r})"

    @property
    def width(self):
        return self.hi - self.lo

    def __add__(self, other):
        o = _as_interval(other)
        return Interval(self.lo + o.lo, self.hi + o.hi)

    __radd__ = __add__

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __pos__(self):
        return self

    def __sub__(self, other):
        o = _as_interval(other)
        return Interval(self.lo - o.hi, self.hi - o.lo)

    def __rsub__(self, other):
        return _as_interval(other) - self

    def __mul__(self, other):
        if not isinstance(other, Interval):
            c = np.asarray(other, dtype=float)
            a, b = self.lo * c, self.hi * c
            return Interval(np.minimum(a, b), np.maximum(a, b))
        p = np.stack([self.lo * other.lo, self.lo * other.hi,
                      self.hi * other.lo, self.hi * other.hi])
        return Interval(p.min(axis=0), p.max(axis=0))

    __rmul__ = __mul__

    def reciprocal(self):
        if np.any((self.lo <= 0) & (self.hi >= 0)):
            raise UnsupportedOperationError("interval division by an interval containing zero")
        return Interval(1.0 / self.hi, 1.0 / self.lo)

    def __truediv__(self, other):
        if not isinstance(other, Interval):
            c = np.asarray(other, dtype=float)
            if np.any(c == 0):
                raise UnsupportedOperationError("interval division by zero")
            return self * (1.0 / c)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return _as_interval(other) * self.reciprocal()

    def __pow__(self, n):
        if not (isinstance(n, (int, np.integer)) and n >= 0):
            raise UnsupportedOperationError(f"interval power with exponent {n!r}")
        n = int(n)
        if n == 0:
            return Interval(np.ones_like(self.lo), np.ones_like(self.hi))
        a, b = self.lo ** n, self.hi ** n
        if n % 2:
            return Interval(a, b)
        lo = np.where((self.lo <= 0) & (self.hi >= 0), 0.0, np.minimum(a, b))
        return Interval(lo, np.maximum(a, b))

    def square(self):
        return self ** 2

    def __abs__(self):
        lo = np.where(self.lo >= 0, self.lo, np.where(self.hi <= 0, -self.hi, 0.0))
        return Interval(lo, np.maximum(np.abs(self.lo), np.abs(self.hi)))

    def sqrt(self):
        if np.any(self.lo < 0):
            raise UnsupportedOperationError("interval sqrt of a negative range")
        return Interval(np.sqrt(self.lo), np.sqrt(self.hi))

    def exp(self):
        return Interval(np.exp(self.lo), np.exp(self.hi))

    def arctan(self):
        return Interval(np.arctan(self.lo), np.arctan(self.hi))

    def sin(self):
        return self._periodic(np.sin, np.pi / 2)

    def cos(self):
        return self._periodic(np.cos, 0.0)

    def _periodic(self, fn, peak):
        # peak: an argument where fn attains +1; the trough sits half a period later
        a, b = fn(self.lo), fn(self.hi)
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        has_peak = np.ceil((self.lo - peak) / _TWO_PI) <= np.floor((self.hi - peak) / _TWO_PI)
        trough = peak + np.pi
        has_trough = np.ceil((self.lo - trough) / _TWO_PI) <= np.floor((self.hi - trough) / _TWO_PI)
        full = self.width >= _TWO_PI
        hi = np.where(has_peak | full, 1.0, hi)
        lo = np.where(has_trough | full, -1.0, lo)
        return Interval(lo, hi)

    _UFUNCS = {
        np.add: lambda a, b: _as_interval(a) + b,
        np.subtract: lambda a, b: _as_interval(a) - b,
        np.multiply: lambda a, b: _as_interval(a) * b,
        np.true_divide: lambda a, b: _as_interval(a) / b,
        np.negative: lambda a: -a,
        np.positive: lambda a: a,
        np.square: lambda a: a ** 2,
        np.absolute: abs,
        np.sqrt: lambda a: a.sqrt(),
        np.exp: lambda a: a.exp(),
        np.arctan: lambda a: a.arctan(),
        np.sin: lambda a: a.sin(),
        np.cos: lambda a: a.cos(),
    }

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        impl = self._UFUNCS.get(ufunc)
        if method != "__call__" or impl is None or kwargs:
            raise UnsupportedOperationError(f"no interval extension for numpy.{ufunc.__name__}")
        return impl(*inputs)

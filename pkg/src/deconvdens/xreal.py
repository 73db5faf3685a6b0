"""Exact extended-real arithmetic for the rate calculus.

The rate exponents are built from finite sums of ratios of the class
parameters, so as long as the inputs are rational every exponent is an
exact ``Fraction``.  Two extra values are needed: +inf (integrability
index r_j = infinity, or omega when every r_j is infinite) and -inf
(kappa evaluated at s = infinity).  The conventions baked in here are
the ones the formulas rely on:

* ``x / inf == 0`` for finite x,
* ``0 / 0 == 0``,
* ``inf * 0 == 0`` (an exact statement here, not a limit: the factor
  that vanishes does so identically in the parameters).

Anything genuinely undefined (``inf - inf``, ``inf / inf``, division of
a nonzero finite value by zero) raises instead of silently producing a
value.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Union

_Number = Union[int, float, Fraction, "XR"]

__all__ = ["XR", "INF", "NEG_INF", "xr"]


class XR:
    """A Fraction, +infinity or -infinity, with explicit conventions."""

    __slots__ = ("v",)

    def __init__(self, value: _Number):
        if isinstance(value, XR):
            self.v = value.v
        elif isinstance(value, Fraction):
            self.v = value
        elif isinstance(value, int):
            self.v = Fraction(value)
        elif isinstance(value, float):
            if value == float("inf"):
                self.v = float("inf")
            elif value == float("-inf"):
                self.v = float("-inf")
            else:
                # exact: binary floats are rationals
                self.v = Fraction(value)
        else:
            raise TypeError(f"cannot build XR from {value!r}")

    # -- predicates ---------------------------------------------------
    @property
    def is_inf(self) -> bool:
        return isinstance(self.v, float)

    @property
    def is_pos_inf(self) -> bool:
        return isinstance(self.v, float) and self.v > 0

    @property
    def is_neg_inf(self) -> bool:
        return isinstance(self.v, float) and self.v < 0

    @property
    def sign(self) -> int:
        if self.is_pos_inf:
            return 1
        if self.is_neg_inf:
            return -1
        return (self.v > 0) - (self.v < 0)

    # -- arithmetic ---------------------------------------------------
    def __add__(self, other: _Number) -> "XR":
        o = XR(other)
        if self.is_inf and o.is_inf:
            if self.sign != o.sign:
                raise ArithmeticError("inf - inf is undefined")
            return self
        if self.is_inf:
            return self
        if o.is_inf:
            return o
        return XR(self.v + o.v)

    __radd__ = __add__

    def __neg__(self) -> "XR":
        if self.is_inf:
            return NEG_INF if self.is_pos_inf else INF
        return XR(-self.v)

    def __sub__(self, other: _Number) -> "XR":
        return self + (-XR(other))

    def __rsub__(self, other: _Number) -> "XR":
        return XR(other) + (-self)

    def __mul__(self, other: _Number) -> "XR":
        o = XR(other)
        if self.is_inf or o.is_inf:
            s = self.sign * o.sign
            if s == 0:
                return XR(0)  # inf * 0 == 0 by convention
            return INF if s > 0 else NEG_INF
        return XR(self.v * o.v)

    __rmul__ = __mul__

    def __truediv__(self, other: _Number) -> "XR":
        o = XR(other)
        if o.is_inf:
            if self.is_inf:
                raise ArithmeticError("inf / inf is undefined")
            return XR(0)
        if o.v == 0:
            if not self.is_inf and self.v == 0:
                return XR(0)  # 0 / 0 == 0 by convention
            raise ZeroDivisionError("nonzero / 0 in extended-real arithmetic")
        if self.is_inf:
            s = self.sign * o.sign
            return INF if s > 0 else NEG_INF
        return XR(self.v / o.v)

    def __rtruediv__(self, other: _Number) -> "XR":
        return XR(other) / self

    # -- comparison ---------------------------------------------------
    def _cmp(self, other: _Number) -> int:
        o = XR(other)
        a = self.v if not self.is_inf else self.v
        b = o.v if not o.is_inf else o.v
        # Fraction and float inf compare correctly with each other
        if a == b:
            return 0
        return -1 if a < b else 1

    def __eq__(self, other) -> bool:
        try:
            return self._cmp(other) == 0
        except TypeError:
            return NotImplemented

    def __lt__(self, other) -> bool:
        return self._cmp(other) < 0

    def __le__(self, other) -> bool:
        return self._cmp(other) <= 0

    def __gt__(self, other) -> bool:
        return self._cmp(other) > 0

    def __ge__(self, other) -> bool:
        return self._cmp(other) >= 0

    def __hash__(self):
        return hash(self.v)

    # -- conversion ---------------------------------------------------
    def __float__(self) -> float:
        return float(self.v)

    @property
    def frac(self) -> Fraction:
        if self.is_inf:
            raise OverflowError("infinite XR has no Fraction value")
        return self.v

    def __repr__(self) -> str:
        if self.is_inf:
            return "XR(inf)" if self.is_pos_inf else "XR(-inf)"
        return f"XR({self.v})"


INF = XR.__new__(XR)
INF.v = float("inf")
NEG_INF = XR.__new__(XR)
NEG_INF.v = float("-inf")


def xr(value: _Number) -> XR:
    """Shorthand constructor."""
    return XR(value)

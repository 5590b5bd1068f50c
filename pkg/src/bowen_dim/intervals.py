from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class Interval:
    """Closed real interval with the arithmetic needed for image enclosures."""

    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    def __add__(self, other):
        if isinstance(other, Interval):
            return Interval(self.lo + other.lo, self.hi + other.hi)
        return Interval(self.lo + other, self.hi + other)

    __radd__ = __add__

    def __mul__(self, other):
        if isinstance(other, Interval):
            products = (self.lo * other.lo, self.lo * other.hi, self.hi * other.lo, self.hi * other.hi)
            return Interval(min(products), max(products))
        a, b = self.lo * other, self.hi * other
        return Interval(min(a, b), max(a, b))

    __rmul__ = __mul__

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other):
        return self + (-other)

    @property
    def width(self):
        return self.hi - self.lo

    def hull(self, other):
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def contains(self, other, strict=False):
        if strict:
            return self.lo < other.lo and other.hi < self.hi
        return self.lo <= other.lo and other.hi <= self.hi


def sin2pi(iv: Interval) -> Interval:
    """Exact range of ``sin(2 pi x)`` over ``iv``."""
    if iv.width >= 1.0:
        return Interval(-1.0, 1.0)
    lo = min(math.sin(2 * math.pi * iv.lo), math.sin(2 * math.pi * iv.hi))
    hi = max(math.sin(2 * math.pi * iv.lo), math.sin(2 * math.pi * iv.hi))
    # maxima at x = 1/4 + k, minima at x = 3/4 + k
    if math.floor(iv.hi - 0.25) >= math.ceil(iv.lo - 0.25):
        hi = 1.0
    if math.floor(iv.hi - 0.75) >= math.ceil(iv.lo - 0.75):
        lo = -1.0
    return Interval(lo, hi)

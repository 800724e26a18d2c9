"""Exact complex-rational scalars backing the symbolic layers.

Uses gmpy2.mpq when available (much faster), falling back to
fractions.Fraction.  A QQi is immutable and hashable.
"""

from __future__ import annotations

try:
    from gmpy2 import mpq as _Q
except ImportError:  # pragma: no cover
    from fractions import Fraction as _Q

RatType = type(_Q(0))


def rat(x) -> "RatType":
    """Coerce ints, strings like '3/4', or rationals to the backend type."""
    if isinstance(x, RatType):
        return x
    return _Q(x)


class QQi:
    """A Gaussian rational re + im*i with exact arithmetic."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        object.__setattr__(self, "re", rat(re))
        object.__setattr__(self, "im", rat(im))

    def __setattr__(self, *a):
        raise AttributeError("QQi is immutable")

    # -- arithmetic ---------------------------------------------------------
    def __add__(self, other):
        other = as_qqi(other)
        return QQi(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __sub__(self, other):
        other = as_qqi(other)
        return QQi(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        return as_qqi(other) - self

    def __mul__(self, other):
        other = as_qqi(other)
        return QQi(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def __neg__(self):
        return QQi(-self.re, -self.im)

    def __truediv__(self, other):
        other = as_qqi(other)
        d = other.re * other.re + other.im * other.im
        if d == 0:
            raise ZeroDivisionError("division by zero QQi")
        return QQi(
            (self.re * other.re + self.im * other.im) / d,
            (self.im * other.re - self.re * other.im) / d,
        )

    def __rtruediv__(self, other):
        return as_qqi(other) / self

    def __pow__(self, k: int):
        if k < 0:
            return QQI_ONE / self ** (-k)
        out = QQI_ONE
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    # -- predicates ---------------------------------------------------------
    def __bool__(self):
        return self.re != 0 or self.im != 0

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def is_rational(self) -> bool:
        return self.im == 0

    def __eq__(self, other):
        if isinstance(other, (int, RatType)):
            return self.im == 0 and self.re == other
        if not isinstance(other, QQi):
            return NotImplemented
        return self.re == other.re and self.im == other.im

    def __hash__(self):
        return hash((self.re, self.im))

    # -- conversions --------------------------------------------------------
    def to_complex(self) -> complex:
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        if self.im == 0:
            return f"QQi({self.re})"
        return f"QQi({self.re}, {self.im})"


def as_qqi(x) -> QQi:
    if isinstance(x, QQi):
        return x
    if isinstance(x, (int, RatType)):
        return QQi(x)
    if isinstance(x, str):
        return QQi(rat(x))
    raise TypeError(f"cannot coerce {x!r} to QQi")


QQI_ZERO = QQi(0)
QQI_ONE = QQi(1)


def parse_rational(text: str) -> QQi:
    """Parse 'p/q' or 'p' (CLI parameter syntax) into an exact rational."""
    return QQi(rat(text.strip()))

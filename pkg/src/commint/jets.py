"""Truncated multivariate Taylor jets: the numeric coefficient backend.

A Jet holds the Taylor coefficients (not derivatives) of a function at a
base point, up to a fixed total order.  Operator composition at a sample
point only ever needs finitely many coefficient derivatives, which jets
provide without any symbolic growth.
"""

from __future__ import annotations

from functools import lru_cache
from math import factorial


@lru_cache(maxsize=None)
def monomials_upto(nvars: int, order: int):
    """All exponent tuples with total degree <= order, graded order."""
    res = []

    def rec(prefix, remaining, budget):
        if remaining == 0:
            res.append(tuple(prefix))
            return
        for e in range(budget + 1):
            prefix.append(e)
            rec(prefix, remaining - 1, budget - e)
            prefix.pop()

    rec([], nvars, order)
    res.sort(key=lambda m: (sum(m), m))
    return tuple(res)


@lru_cache(maxsize=None)
def _mono_factorial(m):
    f = 1
    for e in m:
        f *= factorial(e)
    return f


class JetRing:
    __slots__ = ("nvars", "order")

    def __init__(self, nvars: int, order: int):
        self.nvars = nvars
        self.order = order

    def zero(self):
        return Jet(self, {})

    def one(self):
        return Jet(self, {(0,) * self.nvars: 1.0 + 0j})

    def const(self, c):
        c = complex(c)
        if c == 0:
            return self.zero()
        return Jet(self, {(0,) * self.nvars: c})

    def from_univariate(self, derivs, coeffs, t0_unused=None):
        """Jet of t -> f(t) composed with the affine map t = <coeffs,x> + c.

        derivs[m] is f^(m) at the base value of the argument; coeffs are the
        (complex) linear-form coefficients.  Taylor coefficient at gamma is
        f^(|gamma|) * prod a^gamma / gamma!.
        """
        vals = {}
        for m in monomials_upto(self.nvars, self.order):
            tot = sum(m)
            d = derivs[tot]
            if d == 0:
                continue
            v = d
            ok = True
            for a, e in zip(coeffs, m):
                if e:
                    if a == 0:
                        ok = False
                        break
                    v *= a ** e
            if not ok or v == 0:
                continue
            vals[m] = v / _mono_factorial(m)
        return Jet(self, vals)


class Jet:
    __slots__ = ("ring", "vals")

    def __init__(self, ring: JetRing, vals: dict):
        self.ring = ring
        self.vals = vals  # mono -> complex, zero entries omitted

    def value(self) -> complex:
        return self.vals.get((0,) * self.ring.nvars, 0j)

    def deriv(self, mono) -> complex:
        """The actual partial derivative (Taylor coefficient * gamma!)."""
        return self.vals.get(tuple(mono), 0j) * _mono_factorial(tuple(mono))

    def max_abs(self, upto: int | None = None) -> float:
        best = 0.0
        for m, c in self.vals.items():
            if upto is not None and sum(m) > upto:
                continue
            a = abs(c * _mono_factorial(m))
            if a > best:
                best = a
        return best

    def __add__(self, other):
        if not isinstance(other, Jet):
            return NotImplemented
        out = dict(self.vals)
        for m, c in other.vals.items():
            s = out.get(m, 0j) + c
            if s == 0:
                out.pop(m, None)
            else:
                out[m] = s
        return Jet(self.ring, out)

    def __neg__(self):
        return Jet(self.ring, {m: -c for m, c in self.vals.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return NotImplemented
        order = self.ring.order
        out: dict = {}
        for ma, ca in self.vals.items():
            sa = sum(ma)
            for mb, cb in other.vals.items():
                if sa + sum(mb) > order:
                    continue
                m = tuple(x + y for x, y in zip(ma, mb))
                s = out.get(m, 0j) + ca * cb
                if s == 0:
                    out.pop(m, None)
                else:
                    out[m] = s
        return Jet(self.ring, out)

    def scale(self, k):
        k = complex(k)
        if k == 0:
            return Jet(self.ring, {})
        return Jet(self.ring, {m: c * k for m, c in self.vals.items()})

    def __pow__(self, k: int):
        out = self.ring.one()
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base if k > 1 else base
            k >>= 1
        return out

    def xdiff(self, k: int):
        """Jet of the k-th partial derivative (order drops by one)."""
        out = {}
        for m, c in self.vals.items():
            e = m[k]
            if e == 0:
                continue
            mm = m[:k] + (e - 1,) + m[k + 1:]
            out[mm] = out.get(mm, 0j) + c * e
        return Jet(self.ring, out)

    def iszero(self) -> bool:
        return not self.vals

    def ring_one(self):
        return self.ring.one()

    def __repr__(self):
        return f"Jet(order<={self.ring.order}, {len(self.vals)} coeffs)"

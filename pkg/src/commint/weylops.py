"""Differential-operator algebra with pluggable coefficient rings.

A DiffOp maps derivative multi-indices to coefficients.  Coefficients may be
symbolic trees (coeffring.Node), exact chart elements (lpoly.FracEl) or
numeric jets (jets.Jet); all three implement +, *, unary -, scale(int),
xdiff(k), iszero() and ring_one(), which is everything the algebra needs.
"""

from __future__ import annotations

from functools import lru_cache

from .coeffring import Chart, Node, jet_of, to_rational
from .jets import JetRing


class DimensionMismatch(ValueError):
    pass


@lru_cache(maxsize=None)
def _binom(n: int, k: int) -> int:
    if k < 0 or k > n:
        return 0
    out = 1
    for i in range(k):
        out = out * (n - i) // (i + 1)
    return out


def mi_binom(alpha, gamma) -> int:
    out = 1
    for a, g in zip(alpha, gamma):
        out *= _binom(a, g)
    return out


def mi_add(a, b):
    return tuple(x + y for x, y in zip(a, b))


def mi_sub(a, b):
    return tuple(x - y for x, y in zip(a, b))


def mi_le(a, b) -> bool:
    return all(x <= y for x, y in zip(a, b))


def sub_indices(alpha):
    """All gamma <= alpha, smallest first."""
    ranges = [range(a + 1) for a in alpha]
    out = [()]
    for r in ranges:
        out = [m + (e,) for m in out for e in r]
    return out


class DiffOp:
    """Sum of coeff * d^alpha terms in normal order (coefficients left)."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: dict | None = None):
        self.nvars = nvars
        self.terms = {}
        if terms:
            for mi, c in terms.items():
                if not c.iszero():
                    self.terms[tuple(mi)] = c

    # -- constructors ---------------------------------------------------------
    @staticmethod
    def zero(nvars: int) -> "DiffOp":
        return DiffOp(nvars)

    @staticmethod
    def from_coeff(c, nvars: int) -> "DiffOp":
        return DiffOp(nvars, {(0,) * nvars: c})

    @staticmethod
    def partial(k: int, nvars: int, one) -> "DiffOp":
        mi = tuple(1 if i == k else 0 for i in range(nvars))
        return DiffOp(nvars, {mi: one})

    def is_zero(self) -> bool:
        return not self.terms

    def order(self):
        if not self.terms:
            return None
        return max(sum(mi) for mi in self.terms)

    def _one(self):
        for c in self.terms.values():
            return c.ring_one()
        raise ValueError("zero operator has no coefficient ring handle")

    # -- linear structure -------------------------------------------------------
    def __add__(self, other: "DiffOp") -> "DiffOp":
        if self.nvars != other.nvars:
            raise DimensionMismatch
        out = dict(self.terms)
        for mi, c in other.terms.items():
            if mi in out:
                s = out[mi] + c
                if s.iszero():
                    del out[mi]
                else:
                    out[mi] = s
            else:
                out[mi] = c
        op = DiffOp(self.nvars)
        op.terms = out
        return op

    def __neg__(self) -> "DiffOp":
        op = DiffOp(self.nvars)
        op.terms = {mi: -c for mi, c in self.terms.items()}
        return op

    def __sub__(self, other: "DiffOp") -> "DiffOp":
        return self + (-other)

    def scale_coeff(self, c) -> "DiffOp":
        out = DiffOp(self.nvars)
        for mi, v in self.terms.items():
            p = c * v
            if not p.iszero():
                out.terms[mi] = p
        return out

    def scale_int(self, k: int) -> "DiffOp":
        if k == 0:
            return DiffOp(self.nvars)
        out = DiffOp(self.nvars)
        out.terms = {mi: c.scale(k) for mi, c in self.terms.items()}
        return out

    def map_coefficients(self, fn) -> "DiffOp":
        out = DiffOp(self.nvars)
        for mi, c in self.terms.items():
            v = fn(c)
            if not v.iszero():
                out.terms[mi] = v
        return out

    def __eq__(self, other):
        if not isinstance(other, DiffOp):
            return NotImplemented
        return (self - other).is_zero()

    def __hash__(self):  # pragma: no cover
        raise TypeError("DiffOp is unhashable")

    def __repr__(self):
        return f"DiffOp(n={self.nvars}, {len(self.terms)} terms, order={self.order()})"


def op_mul(a: DiffOp, b: DiffOp) -> DiffOp:
    """Composition a o b by the Leibniz rule."""
    if a.nvars != b.nvars:
        raise DimensionMismatch
    out: dict = {}
    # cache derivatives of b's coefficients
    dcache: dict = {}

    def deriv(beta, gamma):
        key = (beta, gamma)
        got = dcache.get(key)
        if got is not None:
            return got
        if all(g == 0 for g in gamma):
            v = b.terms[beta]
        else:
            # peel one derivative off the first nonzero slot
            k = next(i for i, g in enumerate(gamma) if g)
            prev = gamma[:k] + (gamma[k] - 1,) + gamma[k + 1:]
            v = deriv(beta, prev).xdiff(k)
        dcache[key] = v
        return v

    for alpha, ca in a.terms.items():
        for beta, cb in b.terms.items():
            for gamma in sub_indices(alpha):
                d = deriv(beta, gamma)
                if d.iszero():
                    continue
                coeff = ca * d
                m = mi_binom(alpha, gamma)
                if m != 1:
                    coeff = coeff.scale(m)
                if coeff.iszero():
                    continue
                mi = mi_add(mi_sub(alpha, gamma), beta)
                if mi in out:
                    s = out[mi] + coeff
                    if s.iszero():
                        del out[mi]
                    else:
                        out[mi] = s
                else:
                    out[mi] = coeff
    op = DiffOp(a.nvars)
    op.terms = out
    return op


def commutator(a: DiffOp, b: DiffOp) -> DiffOp:
    return op_mul(a, b) - op_mul(b, a)


def formal_adjoint(a: DiffOp) -> DiffOp:
    """Sum of (-1)^|alpha| d^alpha o (coeff .) expanded to normal order."""
    out = DiffOp(a.nvars)
    for alpha, c in a.terms.items():
        sign = -1 if sum(alpha) % 2 else 1
        for gamma in sub_indices(alpha):
            d = c
            for k, g in enumerate(gamma):
                for _ in range(g):
                    d = d.xdiff(k)
            if d.iszero():
                continue
            m = mi_binom(alpha, gamma) * sign
            term = DiffOp(a.nvars, {mi_sub(alpha, gamma): d.scale(m)})
            out = out + term
    return out


# ---------------------------------------------------------------------------
# symbols
# ---------------------------------------------------------------------------

class SymbolPoly(DiffOp):
    """Polynomial in xi_1..xi_n with coefficient functions of x (same storage)."""

    __slots__ = ()

    def xi_diff(self, k: int) -> "SymbolPoly":
        out = SymbolPoly(self.nvars)
        for mi, c in self.terms.items():
            e = mi[k]
            if not e:
                continue
            out.terms[mi[:k] + (e - 1,) + mi[k + 1:]] = c.scale(e)
        return out

    def x_diff(self, k: int) -> "SymbolPoly":
        out = SymbolPoly(self.nvars)
        for mi, c in self.terms.items():
            d = c.xdiff(k)
            if not d.iszero():
                out.terms[mi] = d
        return out


def principal_symbol(a: DiffOp) -> SymbolPoly:
    out = SymbolPoly(a.nvars)
    if a.is_zero():
        return out
    top = a.order()
    out.terms = {mi: c for mi, c in a.terms.items() if sum(mi) == top}
    return out


def classical_symbol(a: DiffOp) -> SymbolPoly:
    out = SymbolPoly(a.nvars)
    out.terms = dict(a.terms)
    return out


def poisson_bracket(f: SymbolPoly, g: SymbolPoly) -> SymbolPoly:
    if f.nvars != g.nvars:
        raise DimensionMismatch
    out = SymbolPoly(f.nvars)
    acc = DiffOp(f.nvars)
    for k in range(f.nvars):
        fk = f.xi_diff(k)
        gk = g.xi_diff(k)
        if not fk.is_zero():
            gx = g.x_diff(k)
            for mi, c in fk.terms.items():
                for mj, d in gx.terms.items():
                    acc = acc + DiffOp(f.nvars, {mi_add(mi, mj): c * d})
        if not gk.is_zero():
            fx = f.x_diff(k)
            for mi, c in gk.terms.items():
                for mj, d in fx.terms.items():
                    acc = acc + DiffOp(f.nvars, {mi_add(mi, mj): -(c * d)})
    out.terms = acc.terms
    return out


# ---------------------------------------------------------------------------
# gauge conjugation
# ---------------------------------------------------------------------------

class NotAGradient(ValueError):
    pass


def conjugate_by_exp(a: DiffOp, grads, lap_term=None, check=None) -> DiffOp:
    """e^{-phi} o a o e^{phi}: replace d_k by d_k + grads[k] and expand.

    grads[k] must be the symbolic gradient of one function phi; verified
    NotAGradient by cross-differentiation when `check` says how (either
    'exact' with a chart via check=(chart,), or None to skip).  lap_term,
    when given, is cross-checked against sum(d_k g_k + g_k^2)/2.
    """
    n = a.nvars
    if len(grads) != n:
        raise ValueError("need one gradient component per variable")
    if check is not None:
        chart = check[0]
        for j in range(n):
            for k in range(j + 1, n):
                djk = grads[k].xdiff(j) - grads[j].xdiff(k)
                if isinstance(djk, Node):
                    zero = to_rational(djk, chart).is_zero()
                else:
                    zero = djk.iszero()
                if not zero:
                    raise NotAGradient(f"d_{j} g_{k} != d_{k} g_{j}")
        if lap_term is not None:
            acc = None
            for k in range(n):
                piece = grads[k].xdiff(k) + grads[k] * grads[k]
                acc = piece if acc is None else acc + piece
            diff = acc.scale(1) - lap_term - lap_term
            if isinstance(diff, Node):
                if not to_rational(diff, chart).is_zero():
                    raise ValueError("supplied laplacian term is inconsistent with the gradient")
            elif not diff.iszero():
                raise ValueError("supplied laplacian term is inconsistent with the gradient")

    one = a._one()
    out = DiffOp(n)
    for alpha, c in a.terms.items():
        term = DiffOp.from_coeff(c, n)
        for k, e in enumerate(alpha):
            if not e:
                continue
            dk = DiffOp.partial(k, n, one) + DiffOp.from_coeff(grads[k], n)
            for _ in range(e):
                term = op_mul(term, dk)
        out = out + term
    return out


# ---------------------------------------------------------------------------
# backend conversions
# ---------------------------------------------------------------------------

def to_exact(a: DiffOp, chart: Chart, cache: dict | None = None) -> DiffOp:
    """Convert symbolic coefficients into the chart's exact ring."""
    if cache is None:
        cache = {}
    return a.map_coefficients(lambda c: to_rational(c, chart, cache))


def to_jets(a: DiffOp, jring: JetRing, point, bindings=None, cache=None) -> DiffOp:
    if cache is None:
        cache = {}
    return a.map_coefficients(lambda c: jet_of(c, jring, point, bindings, cache))

"""Symbolic coefficient functions on C^n, closed under differentiation.

Expression trees over a small fixed set of node kinds (rational, exponential,
hyperbolic and Weierstrass generators).  Three consumers:

* numeric evaluation (values and truncated Taylor jets at a point),
* exact conversion into a chart's Laurent-fraction ring,
* s-expression serialization.

Trees are normalized on construction (flatten, fold constants, merge like
terms, canonical ordering) but products are never expanded over sums.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from typing import Optional

from . import elliptic
from .elliptic import Lattice
from .jets import Jet, JetRing
from .lpoly import EXPONENTIAL, RATIONAL, ExactRing, FracEl
from .rationals import QQi, QQI_ONE, QQI_ZERO, as_qqi, rat


class ChartError(ValueError):
    pass


class IncompatibleChart(ChartError):
    def __init__(self, node, reason):
        super().__init__(f"{reason}: {node!r}")
        self.node = node


class MissingParam(ChartError):
    pass


class NearSingular(ValueError):
    def __init__(self, form, value):
        super().__init__(f"point too close to the singular set of {form} (|.|={value:.3g})")
        self.form = form


# ---------------------------------------------------------------------------
# linear forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearForm:
    """<coeffs, x> + shift with exact rational coefficients."""

    coeffs: tuple  # tuple[QQi]
    shift: object = None  # None | QQi | complex

    @property
    def nvars(self):
        return len(self.coeffs)

    def is_const(self):
        return all(c.is_zero() for c in self.coeffs)

    def value(self, point) -> complex:
        v = 0j
        for c, x in zip(self.coeffs, point):
            if c:
                v += c.to_complex() * x
        if self.shift is not None:
            v += self.shift.to_complex() if isinstance(self.shift, QQi) else complex(self.shift)
        return v

    def scaled(self, c) -> "LinearForm":
        c = as_qqi(c)
        sh = self.shift
        if isinstance(sh, QQi):
            sh = c * sh
        elif sh is not None:
            sh = c.to_complex() * complex(sh)
        return LinearForm(tuple(c * a for a in self.coeffs), sh)

    def shifted(self, delta) -> "LinearForm":
        """Add a constant to the form (QQi stays exact, complex goes numeric)."""
        sh = self.shift
        if isinstance(delta, QQi):
            if sh is None:
                sh = delta if delta else None
            elif isinstance(sh, QQi):
                s2 = sh + delta
                sh = s2 if s2 else None
            else:
                sh = complex(sh) + delta.to_complex()
        else:
            delta = complex(delta)
            if delta != 0:
                base = 0j if sh is None else (sh.to_complex() if isinstance(sh, QQi) else complex(sh))
                sh = base + delta
        return LinearForm(self.coeffs, sh)

    def composed(self, forms) -> "LinearForm":
        """Substitute x_k -> forms[k]; forms share a common variable count."""
        nv = forms[0].nvars if forms else 0
        acc = [QQI_ZERO] * nv
        shift_q = self.shift if isinstance(self.shift, QQi) else QQI_ZERO
        shift_c = 0j if not isinstance(self.shift, complex) else self.shift
        for c, f in zip(self.coeffs, forms):
            if not c:
                continue
            for i, a in enumerate(f.coeffs):
                acc[i] = acc[i] + c * a
            if isinstance(f.shift, QQi):
                shift_q = shift_q + c * f.shift
            elif f.shift is not None:
                shift_c += c.to_complex() * complex(f.shift)
        if shift_c != 0:
            shift = shift_c + shift_q.to_complex()
        else:
            shift = shift_q if shift_q else None
        return LinearForm(tuple(acc), shift)

    def _key(self):
        sh = self.shift
        if sh is None:
            tag = ("n",)
        elif isinstance(sh, QQi):
            tag = ("q", str(sh.re), str(sh.im))
        else:
            tag = ("c", repr(complex(sh)))
        return tuple((str(c.re), str(c.im)) for c in self.coeffs) + tag


def form(coeffs, shift=None, n=None) -> LinearForm:
    """Build a form from a {index: rational} map or a sequence."""
    if isinstance(coeffs, dict):
        assert n is not None
        vec = [QQI_ZERO] * n
        for k, c in coeffs.items():
            vec[k] = as_qqi(c)
        coeffs = vec
    return LinearForm(tuple(as_qqi(c) for c in coeffs),
                      shift if (shift is None or isinstance(shift, complex)) else as_qqi(shift))


def eform(k: int, n: int, c=1) -> LinearForm:
    return form({k: c}, n=n)


# ---------------------------------------------------------------------------
# nodes
# ---------------------------------------------------------------------------

class Node:
    __slots__ = ()

    def __add__(self, other):
        return add(self, _co(other))

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(CST_MINUS_ONE, _co(other)))

    def __rsub__(self, other):
        return add(_co(other), mul(CST_MINUS_ONE, self))

    def __mul__(self, other):
        return mul(self, _co(other))

    __rmul__ = __mul__

    def __neg__(self):
        return mul(CST_MINUS_ONE, self)

    def xdiff(self, k: int):
        return differentiate(self, k)

    def iszero(self) -> bool:
        return isinstance(self, Cst) and _cval_zero(self.v)

    def scale(self, k):
        return mul(cst(k), self)

    def ring_one(self):
        return CST_ONE


def _cval_zero(v):
    return (v.is_zero() if isinstance(v, QQi) else v == 0)


@dataclass(frozen=True)
class Cst(Node):
    v: object  # QQi or complex


@dataclass(frozen=True)
class Par(Node):
    name: str


@dataclass(frozen=True)
class Lin(Node):
    form: LinearForm


@dataclass(frozen=True)
class Expn(Node):
    form: LinearForm


@dataclass(frozen=True)
class Recip(Node):
    form: LinearForm
    m: int


@dataclass(frozen=True)
class Sinh(Node):
    form: LinearForm
    p: int


@dataclass(frozen=True)
class Cosh(Node):
    form: LinearForm
    p: int


@dataclass(frozen=True)
class Wp(Node):
    form: LinearForm
    j: int
    lat: Lattice
    zero_mean: bool = True


@dataclass(frozen=True)
class WpP(Node):
    form: LinearForm
    j: int
    lat: Lattice


@dataclass(frozen=True)
class Sum(Node):
    terms: tuple


@dataclass(frozen=True)
class Prod(Node):
    factors: tuple


@dataclass(frozen=True)
class Ipow(Node):
    base: Node
    k: int


def _co(x):
    if isinstance(x, Node):
        return x
    if isinstance(x, (int, QQi)):
        return cst(x)
    if isinstance(x, (float, complex)):
        return cst(x)
    raise TypeError(f"cannot coerce {x!r} into a coefficient expression")


# ---------------------------------------------------------------------------
# canonical ordering
# ---------------------------------------------------------------------------

_RANK = {Cst: 0, Par: 1, Lin: 2, Expn: 3, Recip: 4, Sinh: 5, Cosh: 6,
         Wp: 7, WpP: 8, Ipow: 9, Prod: 10, Sum: 11}


def _key(e) -> tuple:
    r = _RANK[type(e)]
    if isinstance(e, Cst):
        v = e.v
        if isinstance(v, QQi):
            return (r, 0, str(v.re), str(v.im))
        return (r, 1, repr(complex(v)), "")
    if isinstance(e, Par):
        return (r, e.name)
    if isinstance(e, (Lin, Expn)):
        return (r, e.form._key())
    if isinstance(e, (Recip, Sinh, Cosh)):
        return (r, e.form._key(), e.m if isinstance(e, Recip) else e.p)
    if isinstance(e, Wp):
        return (r, e.form._key(), e.j, e.zero_mean, repr(e.lat.omega1), repr(e.lat.omega2))
    if isinstance(e, WpP):
        return (r, e.form._key(), e.j, repr(e.lat.omega1), repr(e.lat.omega2))
    if isinstance(e, Ipow):
        return (r, _key(e.base), e.k)
    if isinstance(e, Prod):
        return (r,) + tuple(_key(f) for f in e.factors)
    return (r,) + tuple(_key(t) for t in e.terms)


# ---------------------------------------------------------------------------
# smart constructors
# ---------------------------------------------------------------------------

def cst(v) -> Cst:
    if isinstance(v, (int, str)):
        v = as_qqi(v)
    elif isinstance(v, float):
        v = as_qqi(int(v)) if v == int(v) else complex(v)
    elif isinstance(v, complex):
        pass
    elif not isinstance(v, QQi):
        raise TypeError(f"bad constant {v!r}")
    if isinstance(v, complex) and v == 0:
        v = QQI_ZERO
    return Cst(v)


CST_ZERO = cst(0)
CST_ONE = cst(1)
CST_MINUS_ONE = cst(-1)


def _cmul(a, b):
    if isinstance(a, QQi) and isinstance(b, QQi):
        return a * b
    av = a.to_complex() if isinstance(a, QQi) else a
    bv = b.to_complex() if isinstance(b, QQi) else b
    return av * bv


def _cadd(a, b):
    if isinstance(a, QQi) and isinstance(b, QQi):
        return a + b
    av = a.to_complex() if isinstance(a, QQi) else a
    bv = b.to_complex() if isinstance(b, QQi) else b
    return av + bv


def var(k: int, n: int) -> Lin:
    return Lin(eform(k, n))


def add(*es) -> Node:
    terms = {}  # base-key -> [coeff, base]
    const = QQI_ZERO
    stack = [_co(e) for e in es]
    for e in stack:
        parts = e.terms if isinstance(e, Sum) else (e,)
        for t in parts:
            if isinstance(t, Cst):
                const = _cadd(const, t.v)
                continue
            coeff, base = _split_const(t)
            k = _key(base)
            slot = terms.get(k)
            if slot is None:
                terms[k] = [coeff, base]
            else:
                slot[0] = _cadd(slot[0], coeff)
    out = []
    for k in sorted(terms):
        coeff, base = terms[k]
        if _cval_zero(coeff):
            continue
        out.append(base if coeff == QQI_ONE else _attach_const(coeff, base))
    if not _cval_zero(const):
        out.insert(0, Cst(const))
    if not out:
        return CST_ZERO
    if len(out) == 1:
        return out[0]
    return Sum(tuple(out))


def _split_const(t):
    if isinstance(t, Prod) and isinstance(t.factors[0], Cst):
        rest = t.factors[1:]
        base = rest[0] if len(rest) == 1 else Prod(rest)
        return t.factors[0].v, base
    return QQI_ONE, t


def _attach_const(coeff, base):
    if isinstance(base, Prod):
        return Prod((Cst(coeff),) + base.factors)
    return Prod((Cst(coeff), base))


def mul(*es) -> Node:
    const = QQI_ONE
    factors = {}  # key -> [base, power]
    for e in es:
        e = _co(e)
        parts = e.factors if isinstance(e, Prod) else (e,)
        for f in parts:
            if isinstance(f, Cst):
                const = _cmul(const, f.v)
                if _cval_zero(const):
                    return CST_ZERO
                continue
            base, k = (f.base, f.k) if isinstance(f, Ipow) else (f, 1)
            key = _key(base)
            slot = factors.get(key)
            if slot is None:
                factors[key] = [base, k]
            else:
                slot[1] += k
    out = []
    for key in sorted(factors):
        base, k = factors[key]
        if k == 0:
            continue
        out.append(base if k == 1 else ipow(base, k))
    if not out:
        return Cst(const)
    if not (const == QQI_ONE):
        out.insert(0, Cst(const))
    if len(out) == 1:
        return out[0]
    return Prod(tuple(out))


def ipow(e: Node, k: int) -> Node:
    e = _co(e)
    if k == 0:
        return CST_ONE
    if k == 1:
        return e
    if k < 0:
        raise ValueError("negative powers only via recip/sinh/cosh nodes")
    if isinstance(e, Cst):
        v = e.v
        return Cst(v ** k) if isinstance(v, QQi) else cst(complex(v) ** k)
    if isinstance(e, Ipow):
        return ipow(e.base, e.k * k)
    if isinstance(e, Recip):
        return Recip(e.form, e.m * k)
    if isinstance(e, Sinh):
        return Sinh(e.form, e.p * k)
    if isinstance(e, Cosh):
        return Cosh(e.form, e.p * k)
    if isinstance(e, Expn):
        return Expn(e.form.scaled(k))
    if isinstance(e, Prod):
        return mul(*[ipow(f, k) for f in e.factors])
    return Ipow(e, k)


def expn(f: LinearForm) -> Node:
    if f.is_const():
        if f.shift is None:
            return CST_ONE
        return cst(cmath.exp(complex(f.shift) if not isinstance(f.shift, QQi) else f.shift.to_complex()))
    return Expn(f)


def recip(f: LinearForm, m: int = 1) -> Node:
    if f.is_const():
        raise ValueError("degenerate linear form in recip")
    return Recip(f, m)


def sinh_pow(f: LinearForm, p: int) -> Node:
    if f.is_const():
        raise ValueError("degenerate linear form in sinh")
    if p == 0:
        return CST_ONE
    return Sinh(f, p)


def cosh_pow(f: LinearForm, p: int) -> Node:
    if f.is_const():
        raise ValueError("degenerate linear form in cosh")
    if p == 0:
        return CST_ONE
    return Cosh(f, p)


def wp_node(f: LinearForm, lat: Lattice, j: int = 0, zero_mean: bool = True) -> Node:
    return Wp(f, j, lat, zero_mean)


def wpp_node(f: LinearForm, lat: Lattice, j: int = 0) -> Node:
    return WpP(f, j, lat)


# ---------------------------------------------------------------------------
# differentiation
# ---------------------------------------------------------------------------

def differentiate(e: Node, k: int) -> Node:
    if isinstance(e, (Cst, Par)):
        return CST_ZERO
    if isinstance(e, Lin):
        return Cst(e.form.coeffs[k])
    a = None
    if isinstance(e, (Expn, Recip, Sinh, Cosh, Wp, WpP)):
        a = e.form.coeffs[k]
        if not a:
            return CST_ZERO
    if isinstance(e, Expn):
        return mul(Cst(a), e)
    if isinstance(e, Recip):
        return mul(cst(-e.m), Cst(a), Recip(e.form, e.m + 1))
    if isinstance(e, Sinh):
        return mul(cst(e.p), Cst(a), sinh_pow(e.form, e.p - 1), Cosh(e.form, 1))
    if isinstance(e, Cosh):
        return mul(cst(e.p), Cst(a), cosh_pow(e.form, e.p - 1), Sinh(e.form, 1))
    if isinstance(e, Wp):
        return mul(Cst(a), WpP(e.form, e.j, e.lat))
    if isinstance(e, WpP):
        # (wp')' = 6 wp^2 - g2/2 with the plain (non-zero-mean) wp
        base = Wp(e.form, e.j, e.lat, zero_mean=False)
        return mul(Cst(a), add(mul(cst(6), ipow(base, 2)), cst(-e.lat.g2 / 2)))
    if isinstance(e, Sum):
        return add(*[differentiate(t, k) for t in e.terms])
    if isinstance(e, Prod):
        out = []
        fs = e.factors
        for i, f in enumerate(fs):
            d = differentiate(f, k)
            if d.iszero():
                continue
            out.append(mul(*(fs[:i] + (d,) + fs[i + 1:])))
        return add(*out) if out else CST_ZERO
    if isinstance(e, Ipow):
        d = differentiate(e.base, k)
        if d.iszero():
            return CST_ZERO
        return mul(cst(e.k), ipow(e.base, e.k - 1), d)
    raise TypeError(f"cannot differentiate {e!r}")


# ---------------------------------------------------------------------------
# numeric evaluation
# ---------------------------------------------------------------------------

def evaluate(e: Node, point, bindings: Optional[dict] = None) -> complex:
    b = bindings or {}
    return _ev(e, tuple(complex(x) for x in point), b)


def _ev(e, pt, b) -> complex:
    if isinstance(e, Cst):
        return e.v.to_complex() if isinstance(e.v, QQi) else complex(e.v)
    if isinstance(e, Par):
        try:
            v = b[e.name]
        except KeyError:
            raise MissingParam(e.name) from None
        return v.to_complex() if isinstance(v, QQi) else complex(v)
    if isinstance(e, Lin):
        return e.form.value(pt)
    if isinstance(e, Expn):
        return cmath.exp(e.form.value(pt))
    if isinstance(e, Recip):
        return e.form.value(pt) ** (-e.m)
    if isinstance(e, Sinh):
        return cmath.sinh(e.form.value(pt)) ** e.p
    if isinstance(e, Cosh):
        return cmath.cosh(e.form.value(pt)) ** e.p
    if isinstance(e, Wp):
        return elliptic.wp(e.form.value(pt), e.lat, shift=e.j, zero_mean=e.zero_mean)
    if isinstance(e, WpP):
        return elliptic.wp_prime(e.form.value(pt), e.lat, shift=e.j)
    if isinstance(e, Sum):
        return sum(_ev(t, pt, b) for t in e.terms)
    if isinstance(e, Prod):
        v = 1.0 + 0j
        for f in e.factors:
            v *= _ev(f, pt, b)
        return v
    if isinstance(e, Ipow):
        return _ev(e.base, pt, b) ** e.k
    raise TypeError(f"cannot evaluate {e!r}")


def _univ_derivs_recip(t0: complex, m: int, order: int):
    d = [t0 ** (-m)]
    for j in range(order):
        d.append(d[-1] * (-(m + j)) / t0)
    return d


def _univ_derivs_hyp(t0: complex, p: int, start_sinh: bool, order: int):
    """Derivatives of sinh^p (or cosh^p) as polynomials in (sinh, cosh)."""
    sh, ch = cmath.sinh(t0), cmath.cosh(t0)
    cur = {(p, 0): 1.0} if start_sinh else {(0, p): 1.0}
    out = []
    for _ in range(order + 1):
        out.append(sum(c * sh ** a * ch ** bb for (a, bb), c in cur.items()))
        nxt = {}
        for (a, bb), c in cur.items():
            if a:
                key = (a - 1, bb + 1)
                nxt[key] = nxt.get(key, 0.0) + c * a
            if bb:
                key = (a + 1, bb - 1)
                nxt[key] = nxt.get(key, 0.0) + c * bb
        cur = nxt
    return out


def jet_of(e: Node, jring: JetRing, point, bindings: Optional[dict] = None,
           cache: Optional[dict] = None) -> Jet:
    pt = tuple(complex(x) for x in point)
    b = bindings or {}
    if cache is None:
        cache = {}
    return _jet(e, jring, pt, b, cache)


def _jet(e, R: JetRing, pt, b, cache) -> Jet:
    got = cache.get(e)
    if got is not None:
        return got
    K = R.order
    if isinstance(e, Cst):
        out = R.const(e.v.to_complex() if isinstance(e.v, QQi) else e.v)
    elif isinstance(e, Par):
        v = b.get(e.name)
        if v is None:
            raise MissingParam(e.name)
        out = R.const(v.to_complex() if isinstance(v, QQi) else v)
    elif isinstance(e, Lin):
        vals = {(0,) * R.nvars: e.form.value(pt)}
        for k, c in enumerate(e.form.coeffs):
            if c and K >= 1:
                mono = tuple(1 if i == k else 0 for i in range(R.nvars))
                vals[mono] = c.to_complex()
        out = Jet(R, {m: v for m, v in vals.items() if v != 0})
    else:
        cplx = [c.to_complex() for c in getattr(e, "form", LinearForm(())).coeffs] \
            if isinstance(e, (Expn, Recip, Sinh, Cosh, Wp, WpP)) else None
        if isinstance(e, Expn):
            t0 = e.form.value(pt)
            v = cmath.exp(t0)
            out = R.from_univariate([v] * (K + 1), cplx)
        elif isinstance(e, Recip):
            out = R.from_univariate(_univ_derivs_recip(e.form.value(pt), e.m, K), cplx)
        elif isinstance(e, Sinh):
            out = R.from_univariate(_univ_derivs_hyp(e.form.value(pt), e.p, True, K), cplx)
        elif isinstance(e, Cosh):
            out = R.from_univariate(_univ_derivs_hyp(e.form.value(pt), e.p, False, K), cplx)
        elif isinstance(e, Wp):
            tc = elliptic.wp_taylor(e.form.value(pt), e.lat, K, shift=e.j, zero_mean=e.zero_mean)
            fact = 1
            derivs = []
            for m, c in enumerate(tc):
                derivs.append(c * fact)
                fact *= m + 1
            out = R.from_univariate(derivs, cplx)
        elif isinstance(e, WpP):
            tc = elliptic.wp_prime_taylor(e.form.value(pt), e.lat, K, shift=e.j)
            fact = 1
            derivs = []
            for m, c in enumerate(tc):
                derivs.append(c * fact)
                fact *= m + 1
            out = R.from_univariate(derivs, cplx)
        elif isinstance(e, Sum):
            out = R.zero()
            for t in e.terms:
                out = out + _jet(t, R, pt, b, cache)
        elif isinstance(e, Prod):
            out = R.one()
            for f in e.factors:
                out = out * _jet(f, R, pt, b, cache)
        elif isinstance(e, Ipow):
            out = _jet(e.base, R, pt, b, cache) ** e.k
        else:
            raise TypeError(f"cannot jet-evaluate {e!r}")
    cache[e] = out
    return out


# ---------------------------------------------------------------------------
# charts and exact conversion
# ---------------------------------------------------------------------------

class Chart:
    """Exact-arithmetic realization: RATIONAL in x_k or EXPONENTIAL in s_k."""

    def __init__(self, kind: str, n: int, lam=1, bindings: Optional[dict] = None,
                 extra: tuple = ()):
        assert kind in (RATIONAL, EXPONENTIAL)
        self.kind = kind
        self.n = n
        self.lam = as_qqi(lam)
        self.extra = tuple(extra)
        self.bindings = dict(bindings or {})
        self.ring = ExactRing(n + len(self.extra), n, kind, self.lam)

    def extra_index(self, name: str) -> int:
        return self.n + self.extra.index(name)

    def param_el(self, name: str) -> FracEl:
        if name in self.bindings:
            return self.ring.const(as_qqi(self.bindings[name]))
        if name in self.extra:
            return self.ring.var(self.extra_index(name))
        raise MissingParam(name)

    def with_bindings(self, **kw) -> "Chart":
        b = dict(self.bindings)
        b.update(kw)
        return Chart(self.kind, self.n, self.lam, b, self.extra)


def _int_exponents(f: LinearForm, lam: QQi, node):
    out = []
    for c in f.coeffs:
        r = c / lam
        if not r.is_rational():
            raise IncompatibleChart(node, "complex exponent ratio")
        rr = r.re
        if rr != int(rr):
            raise IncompatibleChart(node, f"non-integer exponent {rr} in exponential chart")
        out.append(int(rr))
    return out


def _hyp_factor(chart: Chart, evec):
    """Canonical binomial for sinh/cosh of the argument with exponents evec.

    Returns (sign, mono_shift, p1, p2) with sinh = sign * s^mono * (s^p1 - s^p2)/2
    and cosh = s^mono * (s^p1 + s^p2)/2.
    """
    nv = chart.ring.nvars
    e = list(evec) + [0] * (nv - len(evec))
    mono = tuple(-abs(x) for x in e)
    p1 = tuple(x - m for x, m in zip(e, mono))
    p2 = tuple(-x - m for x, m in zip(e, mono))
    if p1 > p2:
        return 1, mono, p1, p2
    return -1, mono, p2, p1


def to_rational(e: Node, chart: Chart, cache: Optional[dict] = None) -> FracEl:
    if cache is None:
        cache = {}
    return _conv(e, chart, cache)


def _conv(e, chart: Chart, cache) -> FracEl:
    got = cache.get(e)
    if got is not None:
        return got
    R = chart.ring
    if isinstance(e, Cst):
        if not isinstance(e.v, QQi):
            raise IncompatibleChart(e, "non-exact constant in exact chart")
        out = R.const(e.v)
    elif isinstance(e, Par):
        out = chart.param_el(e.name)
    elif isinstance(e, Lin):
        if chart.kind != RATIONAL:
            raise IncompatibleChart(e, "polynomial variable in exponential chart")
        out = _form_poly(e.form, chart)
    elif isinstance(e, Expn):
        if chart.kind != EXPONENTIAL:
            raise IncompatibleChart(e, "exponential in rational chart")
        if e.form.shift is not None:
            raise IncompatibleChart(e, "shifted exponential argument")
        ev = _int_exponents(e.form, chart.lam, e)
        out = R.monomial(tuple(ev) + (0,) * (R.nvars - len(ev)))
    elif isinstance(e, Recip):
        if chart.kind != RATIONAL:
            raise IncompatibleChart(e, "reciprocal power of x in exponential chart")
        out = _recip_el(e, chart)
    elif isinstance(e, (Sinh, Cosh)):
        if chart.kind != EXPONENTIAL:
            raise IncompatibleChart(e, "hyperbolic node in rational chart")
        if e.form.shift is not None:
            raise IncompatibleChart(e, "shifted hyperbolic argument")
        ev = _int_exponents(e.form, chart.lam, e)
        if not any(ev):
            raise IncompatibleChart(e, "constant hyperbolic argument")
        sign, mono, p1, p2 = _hyp_factor(chart, ev)
        half = QQi(rat("1/2"))
        if isinstance(e, Sinh):
            fac_poly = {p1: QQI_ONE, p2: QQi(-1)}
            unit = half if sign == 1 else -half
        else:
            fac_poly = {p1: QQI_ONE, p2: QQI_ONE}
            unit = half
        p = e.p
        if p > 0:
            poly = {tuple(x * p for x in mono): unit ** p}
            out = R.from_poly(poly) * R.from_poly(fac_poly) ** p
        else:
            fid = R.register_factor(fac_poly)
            q = -p
            num = {tuple(-x * q for x in mono): (QQI_ONE / unit) ** q}
            out = FracEl(R, num, ((fid, q),))
    elif isinstance(e, (Wp, WpP)):
        raise IncompatibleChart(e, "elliptic node has no exact chart")
    elif isinstance(e, Sum):
        out = R.zero()
        for t in e.terms:
            out = out + _conv(t, chart, cache)
    elif isinstance(e, Prod):
        out = R.one()
        for f in e.factors:
            out = out * _conv(f, chart, cache)
    elif isinstance(e, Ipow):
        out = _conv(e.base, chart, cache) ** e.k
    else:
        raise TypeError(f"cannot convert {e!r}")
    cache[e] = out
    return out


def _form_poly(f: LinearForm, chart: Chart) -> FracEl:
    R = chart.ring
    poly = {}
    for k, c in enumerate(f.coeffs):
        if c:
            mono = tuple(1 if i == k else 0 for i in range(R.nvars))
            poly[mono] = c
    if f.shift is not None:
        if not isinstance(f.shift, QQi):
            raise IncompatibleChart(Lin(f), "non-exact shift in exact chart")
        poly[(0,) * R.nvars] = f.shift
    return R.from_poly(poly)


def _recip_el(e: Recip, chart: Chart) -> FracEl:
    R = chart.ring
    f = e.form
    nz = [(k, c) for k, c in enumerate(f.coeffs) if c]
    if not nz:
        raise IncompatibleChart(e, "degenerate form in recip")
    if len(nz) == 1 and f.shift is None:
        k, c = nz[0]
        mono = tuple(-e.m if i == k else 0 for i in range(R.nvars))
        return R.monomial(mono, (QQI_ONE / c) ** e.m)
    lead = nz[0][1]
    poly = {}
    for k, c in nz:
        mono = tuple(1 if i == k else 0 for i in range(R.nvars))
        poly[mono] = c / lead
    if f.shift is not None:
        if not isinstance(f.shift, QQi):
            raise IncompatibleChart(e, "non-exact shift in exact chart")
        poly[(0,) * R.nvars] = f.shift / lead
    fid = R.register_factor(poly)
    num = {(0,) * R.nvars: (QQI_ONE / lead) ** e.m}
    return FracEl(R, num, ((fid, e.m),))


def is_zero(e: Node, chart: Chart) -> bool:
    return to_rational(e, chart).is_zero()


# ---------------------------------------------------------------------------
# tree transforms
# ---------------------------------------------------------------------------

def map_forms(e: Node, fn) -> Node:
    """Rebuild e with every linear form replaced by fn(form)."""
    if isinstance(e, (Cst, Par)):
        return e
    if isinstance(e, Lin):
        f = fn(e.form)
        if not f.is_const():
            return Lin(f)
        return cst(f.shift) if f.shift is not None else CST_ZERO
    if isinstance(e, Expn):
        return expn(fn(e.form))
    if isinstance(e, Recip):
        return Recip(fn(e.form), e.m)
    if isinstance(e, Sinh):
        return Sinh(fn(e.form), e.p)
    if isinstance(e, Cosh):
        return Cosh(fn(e.form), e.p)
    if isinstance(e, Wp):
        return Wp(fn(e.form), e.j, e.lat, e.zero_mean)
    if isinstance(e, WpP):
        return WpP(fn(e.form), e.j, e.lat)
    if isinstance(e, Sum):
        return add(*[map_forms(t, fn) for t in e.terms])
    if isinstance(e, Prod):
        return mul(*[map_forms(f, fn) for f in e.factors])
    if isinstance(e, Ipow):
        return ipow(map_forms(e.base, fn), e.k)
    raise TypeError(f"cannot transform {e!r}")


def scale_args(e: Node, c) -> Node:
    """u(t) -> u(c*t): scale every linear form."""
    return map_forms(e, lambda f: f.scaled(c))


def subst_vars(e: Node, forms) -> Node:
    """Substitute x_k -> forms[k] (linear forms over the new variables)."""
    return map_forms(e, lambda f: f.composed(forms))


def shift_vars(e: Node, deltas) -> Node:
    """Substitute x_k -> x_k + deltas[k] (exact or complex constants)."""
    n = len(deltas)

    def fn(f: LinearForm) -> LinearForm:
        total_q = QQI_ZERO
        total_c = 0j
        for c, d in zip(f.coeffs, deltas):
            if not c:
                continue
            if isinstance(d, QQi):
                total_q = total_q + c * d
            elif d:
                total_c += c.to_complex() * complex(d)
        out = f
        if total_q:
            out = out.shifted(total_q)
        if total_c != 0:
            out = out.shifted(total_c)
        return out

    return map_forms(e, fn)


def map_params(e: Node, mapping: dict) -> Node:
    """Substitute parameters by expressions/constants (for param scalings)."""
    if isinstance(e, Par) and e.name in mapping:
        return _co(mapping[e.name])
    if isinstance(e, Sum):
        return add(*[map_params(t, mapping) for t in e.terms])
    if isinstance(e, Prod):
        return mul(*[map_params(f, mapping) for f in e.factors])
    if isinstance(e, Ipow):
        return ipow(map_params(e.base, mapping), e.k)
    return e


def singular_forms(e: Node, acc=None):
    """Collect (kind, form, lattice_or_None, shift_idx) that can blow up."""
    if acc is None:
        acc = []
    if isinstance(e, Recip):
        acc.append(("poly", e.form, None, 0))
    elif isinstance(e, Sinh) and e.p < 0:
        acc.append(("sinh", e.form, None, 0))
    elif isinstance(e, Cosh) and e.p < 0:
        acc.append(("cosh", e.form, None, 0))
    elif isinstance(e, (Wp, WpP)):
        acc.append(("wp", e.form, e.lat, e.j))
    elif isinstance(e, Sum):
        for t in e.terms:
            singular_forms(t, acc)
    elif isinstance(e, Prod):
        for f in e.factors:
            singular_forms(f, acc)
    elif isinstance(e, Ipow):
        singular_forms(e.base, acc)
    return acc

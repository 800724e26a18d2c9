"""Exact function-field arithmetic for the two charts.

Elements are fractions  p / (F_1^{m_1} ... F_r^{m_r})  where p is a Laurent
polynomial over the Gaussian rationals and the F_j are canonical denominator
factors (linear forms in the rational chart, binomials s^a - c*s^b in the
exponential chart).  Multiplication only adds exponents; addition expands the
needed factor powers; reduction is trial exact division by the registered
factors, so a fraction is zero iff its numerator is the zero polynomial.
"""

from __future__ import annotations

from .rationals import QQi, QQI_ONE, as_qqi

Mono = tuple
Poly = dict  # Mono -> QQi, no zero values


# ---------------------------------------------------------------------------
# raw Laurent polynomial helpers (dict based)
# ---------------------------------------------------------------------------

def padd(a: Poly, b: Poly) -> Poly:
    out = dict(a)
    for m, c in b.items():
        s = out.get(m)
        if s is None:
            out[m] = c
        else:
            s = s + c
            if s:
                out[m] = s
            else:
                del out[m]
    return out


def pneg(a: Poly) -> Poly:
    return {m: -c for m, c in a.items()}

def pscale(a: Poly, c: QQi) -> Poly:
    if not c:
        return {}
    return {m: c * v for m, v in a.items()}


def pmul(a: Poly, b: Poly) -> Poly:
    if len(a) > len(b):
        a, b = b, a
    out: Poly = {}
    for ma, ca in a.items():
        for mb, cb in b.items():
            m = tuple(x + y for x, y in zip(ma, mb))
            c = ca * cb
            s = out.get(m)
            if s is None:
                out[m] = c
            else:
                s = s + c
                if s:
                    out[m] = s
                else:
                    del out[m]
    return out


def ppow(a: Poly, k: int) -> Poly:
    if k < 0:
        raise ValueError("negative power of a polynomial")
    nv = None
    for m in a:
        nv = len(m)
        break
    out = {(0,) * (nv or 0): QQI_ONE} if nv is not None else {(): QQI_ONE}
    base = a
    while k:
        if k & 1:
            out = pmul(out, base)
        base = pmul(base, base) if k > 1 else base
        k >>= 1
    return out


def pdiff(a: Poly, k: int) -> Poly:
    out: Poly = {}
    for m, c in a.items():
        e = m[k]
        if e == 0:
            continue
        mm = m[:k] + (e - 1,) + m[k + 1:]
        c2 = c * QQi(e)
        s = out.get(mm)
        out[mm] = c2 if s is None else s + c2
    return {m: c for m, c in out.items() if c}


def pmulvar(a: Poly, k: int) -> Poly:
    """Multiply by variable k (used by the exponential-chart derivative)."""
    return {m[:k] + (m[k] + 1,) + m[k + 1:]: c for m, c in a.items()}


def peval(a: Poly, point) -> complex:
    tot = 0j
    for m, c in a.items():
        v = c.to_complex()
        for x, e in zip(point, m):
            if e:
                v *= x ** e
        tot += v
    return tot


def _shift_nonneg(a: Poly):
    """Return (shifted poly with min exponent 0 per var, shift vector)."""
    it = iter(a)
    first = next(it)
    mins = list(first)
    for m in it:
        for i, e in enumerate(m):
            if e < mins[i]:
                mins[i] = e
    if all(e >= 0 for e in mins):
        mins = [min(e, 0) for e in mins]
    shift = tuple(mins)
    if all(e == 0 for e in shift):
        return a, shift
    return {tuple(x - s for x, s in zip(m, shift)): c for m, c in a.items()}, shift


def pdivexact(f: Poly, g: Poly):
    """Quotient f/g if g divides f exactly, else None (Laurent-aware)."""
    if not f:
        return {}
    if not g:
        raise ZeroDivisionError
    fs, sf = _shift_nonneg(f)
    gs, sg = _shift_nonneg(g)
    ltg = max(gs)
    cg = gs[ltg]
    q: Poly = {}
    r = dict(fs)
    while r:
        ltr = max(r)
        if any(x < y for x, y in zip(ltr, ltg)):
            return None
        qm = tuple(x - y for x, y in zip(ltr, ltg))
        qc = r[ltr] / cg
        q[qm] = qc
        for m, c in gs.items():
            mm = tuple(x + y for x, y in zip(qm, m))
            s = r.get(mm)
            v = qc * c
            if s is None:
                r[mm] = -v
            else:
                s = s - v
                if s:
                    r[mm] = s
                else:
                    del r[mm]
    delta = tuple(x - y for x, y in zip(sf, sg))
    if any(delta):
        q = {tuple(x + d for x, d in zip(m, delta)): c for m, c in q.items()}
    return q


# ---------------------------------------------------------------------------
# ring with registered denominator factors
# ---------------------------------------------------------------------------

class _Factor:
    __slots__ = ("poly", "key", "idx", "_pows", "_diffs")

    def __init__(self, poly: Poly, key, idx: int):
        self.poly = poly
        self.key = key
        self.idx = idx
        self._pows = [None, poly]
        self._diffs = {}

    def power(self, k: int) -> Poly:
        while len(self._pows) <= k:
            self._pows.append(pmul(self._pows[-1], self.poly))
        if k == 0:
            nv = len(next(iter(self.poly)))
            return {(0,) * nv: QQI_ONE}
        return self._pows[k]

    def diff(self, k: int) -> Poly:
        d = self._diffs.get(k)
        if d is None:
            d = pdiff(self.poly, k)
            self._diffs[k] = d
        return d


RATIONAL = "rational"
EXPONENTIAL = "exponential"


class ExactRing:
    """Laurent-fraction ring bound to a chart.

    nvars      -- total ring variables (coordinates first, then constants)
    ncoords    -- how many leading variables are coordinates x_k / s_k
    kind       -- RATIONAL (d/dx_k plain) or EXPONENTIAL (d/dx_k = lam*s_k*d/ds_k)
    lam        -- exact rational lambda for the exponential chart
    """

    def __init__(self, nvars: int, ncoords: int, kind: str = RATIONAL, lam: QQi | None = None):
        self.nvars = nvars
        self.ncoords = ncoords
        self.kind = kind
        self.lam = lam if lam is not None else QQI_ONE
        self._factors: list[_Factor] = []
        self._factor_index: dict = {}
        self._zero_mono = (0,) * nvars

    # -- factor registry ----------------------------------------------------
    def register_factor(self, poly: Poly) -> int:
        key = tuple(sorted((m, c.re, c.im) for m, c in poly.items()))
        idx = self._factor_index.get(key)
        if idx is None:
            idx = len(self._factors)
            f = _Factor(poly, key, idx)
            self._factors.append(f)
            self._factor_index[key] = idx
        return idx

    def factor(self, idx: int) -> _Factor:
        return self._factors[idx]

    # -- element constructors -------------------------------------------------
    def zero(self) -> "FracEl":
        return FracEl(self, {}, ())

    def one(self) -> "FracEl":
        return FracEl(self, {self._zero_mono: QQI_ONE}, ())

    def const(self, c) -> "FracEl":
        c = as_qqi(c)
        if not c:
            return self.zero()
        return FracEl(self, {self._zero_mono: c}, ())

    def var(self, k: int, power: int = 1) -> "FracEl":
        m = [0] * self.nvars
        m[k] = power
        return FracEl(self, {tuple(m): QQI_ONE}, ())

    def monomial(self, expo, coeff=QQI_ONE) -> "FracEl":
        coeff = as_qqi(coeff)
        if not coeff:
            return self.zero()
        return FracEl(self, {tuple(expo): coeff}, ())

    def from_poly(self, poly: Poly) -> "FracEl":
        return FracEl(self, poly, ())


class FracEl:
    """Element of an ExactRing: Laurent polynomial over factored denominator."""

    __slots__ = ("ring", "num", "den")

    def __init__(self, ring: ExactRing, num: Poly, den: tuple):
        self.ring = ring
        self.num = num
        self.den = den  # sorted tuple of (factor_idx, exp>0)

    # -- helpers --------------------------------------------------------------
    def _reduced(self) -> "FracEl":
        if not self.num:
            return FracEl(self.ring, {}, ())
        if not self.den:
            return self
        num = self.num
        den = []
        for fid, e in self.den:
            fac = self.ring.factor(fid).poly
            while e > 0:
                q = pdivexact(num, fac)
                if q is None:
                    break
                num = q
                e -= 1
            if e:
                den.append((fid, e))
        return FracEl(self.ring, num, tuple(den))

    def is_zero(self) -> bool:
        return not self.num

    iszero = is_zero

    def __bool__(self):
        return bool(self.num)

    # -- arithmetic -----------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, FracEl):
            return NotImplemented
        r = self.ring
        if self.den == other.den:
            s = padd(self.num, other.num)
            return FracEl(r, s, self.den if s else ())._reduced()
        da = dict(self.den)
        db = dict(other.den)
        united = {}
        for fid in set(da) | set(db):
            united[fid] = max(da.get(fid, 0), db.get(fid, 0))
        numa = self.num
        numb = other.num
        for fid, e in united.items():
            ea = e - da.get(fid, 0)
            eb = e - db.get(fid, 0)
            if ea:
                numa = pmul(numa, r.factor(fid).power(ea))
            if eb:
                numb = pmul(numb, r.factor(fid).power(eb))
        s = padd(numa, numb)
        den = tuple(sorted((fid, e) for fid, e in united.items() if e))
        return FracEl(r, s, den if s else ())._reduced()

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return FracEl(self.ring, pneg(self.num), self.den)

    def __mul__(self, other):
        if not isinstance(other, FracEl):
            return NotImplemented
        if not self.num or not other.num:
            return FracEl(self.ring, {}, ())
        da = dict(self.den)
        for fid, e in other.den:
            da[fid] = da.get(fid, 0) + e
        return FracEl(self.ring, pmul(self.num, other.num),
                      tuple(sorted(da.items())))._reduced()

    def scale(self, k) -> "FracEl":
        c = as_qqi(k)
        if not c:
            return FracEl(self.ring, {}, ())
        return FracEl(self.ring, pscale(self.num, c), self.den)

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power of FracEl")
        out = self.ring.one()
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base if k > 1 else base
            k >>= 1
        return out

    def ring_one(self):
        return self.ring.one()

    def __eq__(self, other):
        if not isinstance(other, FracEl):
            return NotImplemented
        return (self - other).is_zero()

    def __hash__(self):  # pragma: no cover
        raise TypeError("FracEl is unhashable")

    # -- calculus -------------------------------------------------------------
    def _d_dv(self, k: int) -> "FracEl":
        """Plain d/dv_k by the quotient rule on the factored denominator."""
        r = self.ring
        if not self.den:
            return FracEl(r, pdiff(self.num, k), ())
        dn = pdiff(self.num, k)
        parts = dn
        extra = []
        for fid, e in self.den:
            fac = r.factor(fid)
            dfac = fac.diff(k)
            if dfac:
                extra.append((fid, e, dfac))
        if not extra:
            return FracEl(r, parts, self.den)._reduced()
        # d(p * prod F^-e) = p' prod F^-e - p * sum e_j F_j' F_j^-(e_j+1) prod_{i!=j} F_i^-e_i
        # over the common denominator prod F^(e_j + [j hit])
        den = dict(self.den)
        for fid, e, _ in extra:
            den[fid] = e + 1
        num = parts
        for fid, e, _ in extra:
            num = pmul(num, r.factor(fid).poly)
        num_total = num
        for fid, e, dfac in extra:
            piece = pmul(self.num, pscale(dfac, QQi(e)))
            for fid2, e2, _ in extra:
                if fid2 != fid:
                    piece = pmul(piece, r.factor(fid2).poly)
            num_total = padd(num_total, pneg(piece))
        return FracEl(r, num_total, tuple(sorted(den.items())))._reduced()

    def xdiff(self, k: int) -> "FracEl":
        """Derivative with respect to coordinate x_k in the chart's sense."""
        if k >= self.ring.ncoords:
            raise ValueError("xdiff only defined for coordinate variables")
        d = self._d_dv(k)
        if self.ring.kind == EXPONENTIAL:
            # d/dx_k = lam * s_k * d/ds_k
            d = FracEl(self.ring, pmulvar(pscale(d.num, self.ring.lam), k), d.den)
        return d

    # -- evaluation -----------------------------------------------------------
    def eval(self, point) -> complex:
        v = peval(self.num, point)
        for fid, e in self.den:
            v /= peval(self.ring.factor(fid).poly, point) ** e
        return v

    def __repr__(self):
        return f"FracEl({len(self.num)} terms / {self.den})"

"""Weierstrass p-function engine: q-series evaluation, invariants, limits.

Conventions: a Lattice stores the half-periods omega1, omega2 (periods are
2*omega1, 2*omega2).  omega2 may be INFINITE (hyperbolic limit) or the whole
lattice may be rational (both periods infinite).  lam = pi/(2i*omega1) and
q = exp(-2*lam*omega2).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

INFINITE = "inf"

_TRUNC = 1e-16
_MAX_TERMS = 10_000
POLE_RADIUS = 1e-9


class EllipticError(ValueError):
    pass


class PoleAt(EllipticError):
    def __init__(self, z):
        super().__init__(f"argument {z} lies on the period lattice")
        self.z = z


class SeriesDiverged(EllipticError):
    pass


@dataclass(frozen=True)
class Lattice:
    """Period data with derived quantities (lam, q, eta1, e_nu, g2, g3)."""

    omega1: complex = -0.5j * math.pi
    omega2: object = 2.0  # complex, or INFINITE
    both_infinite: bool = False
    _cache: dict = field(default_factory=dict, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.both_infinite:
            return
        w1 = complex(self.omega1)
        if (1j * w1).real <= 0:
            raise EllipticError("require Re(i*omega1) > 0")
        if self.omega2 is not INFINITE:
            q = self.q
            if abs(q) >= 1:
                raise EllipticError(f"|q| = {abs(q)} >= 1; bad period ratio")

    # -- derived scalars ------------------------------------------------------
    @property
    def lam(self) -> complex:
        if self.both_infinite:
            raise EllipticError("lambda undefined for the rational lattice")
        return math.pi / (2j * complex(self.omega1))

    @property
    def q(self) -> complex:
        if self.both_infinite or self.omega2 is INFINITE:
            return 0j
        return cmath.exp(-2 * self.lam * complex(self.omega2))

    def half_period(self, j: int) -> complex:
        if j == 0:
            return 0j
        if j == 1:
            return complex(self.omega1)
        if self.omega2 is INFINITE or self.both_infinite:
            raise EllipticError("omega2 shift needs a finite omega2")
        if j == 2:
            return complex(self.omega2)
        if j == 3:
            return -complex(self.omega1) - complex(self.omega2)
        raise EllipticError(f"half-period index {j} out of range")

    @property
    def eta1(self) -> complex:
        v = self._cache.get("eta1")
        if v is None:
            v = _eta1(self)
            self._cache["eta1"] = v
        return v

    @property
    def e_values(self):
        v = self._cache.get("e")
        if v is None:
            if self.both_infinite:
                v = (0j, 0j, 0j)
            elif self.omega2 is INFINITE:
                l2 = self.lam ** 2
                v = (-2 * l2 / 3, l2 / 3, l2 / 3)
            else:
                v = tuple(wp(self.half_period(j), self) for j in (1, 2, 3))
            self._cache["e"] = v
        return v

    @property
    def g2(self) -> complex:
        e1, e2, e3 = self.e_values
        return -4 * (e1 * e2 + e2 * e3 + e3 * e1)

    @property
    def g3(self) -> complex:
        e1, e2, e3 = self.e_values
        return 4 * e1 * e2 * e3

    # -- lattice geometry -----------------------------------------------------
    def reduce(self, z: complex) -> complex:
        """Reduce z modulo the period lattice into the centered cell."""
        z = complex(z)
        if self.both_infinite:
            return z
        p1 = 2 * complex(self.omega1)
        if self.omega2 is INFINITE:
            # project on p1 direction only
            t = (z.real * p1.real + z.imag * p1.imag) / abs(p1) ** 2
            n = math.floor(t + 0.5)
            return z - n * p1
        p2 = 2 * complex(self.omega2)
        det = p1.real * p2.imag - p1.imag * p2.real
        if abs(det) < 1e-300:
            raise EllipticError("degenerate period lattice")
        a = (z.real * p2.imag - z.imag * p2.real) / det
        b = (p1.real * z.imag - p1.imag * z.real) / det
        a -= math.floor(a + 0.5)
        b -= math.floor(b + 0.5)
        return a * p1 + b * p2

    def dist_to_lattice(self, z: complex) -> float:
        zr = self.reduce(z)
        if self.both_infinite:
            return abs(zr)
        best = abs(zr)
        p1 = 2 * complex(self.omega1)
        periods = [p1, -p1]
        if self.omega2 is not INFINITE:
            p2 = 2 * complex(self.omega2)
            periods += [p2, -p2, p1 + p2, p1 - p2, -p1 + p2, -p1 - p2]
        for p in periods:
            d = abs(zr - p)
            if d < best:
                best = d
        return best


def default_lattice(omega2: float = 2.0) -> Lattice:
    """lam = 1 test lattice: omega1 = -i*pi/2, real omega2."""
    return Lattice(-0.5j * math.pi, omega2)


RATIONAL_LATTICE = Lattice(omega2=INFINITE, both_infinite=True)


def trig_lattice(lam: complex = 1.0) -> Lattice:
    return Lattice(math.pi / (2j * lam), INFINITE)


# ---------------------------------------------------------------------------
# series evaluation
# ---------------------------------------------------------------------------

def _eta1(lat: Lattice) -> complex:
    if lat.both_infinite:
        return 0j
    w1 = complex(lat.omega1)
    if lat.omega2 is INFINITE:
        return math.pi ** 2 / (12 * w1)
    q2 = lat.q ** 2
    s = 0j
    term_n = 1
    qn = q2
    while True:
        t = term_n * qn / (1 - qn)
        s += t
        if abs(t) < _TRUNC * (abs(s) + 1):
            break
        term_n += 1
        qn *= q2
        if term_n > _MAX_TERMS:
            raise SeriesDiverged("eta1 series did not converge")
    return (math.pi ** 2 / w1) * (1.0 / 12.0 - 2 * s)


def _wp0_series(z: complex, lat: Lattice) -> complex:
    """wp0(z) = lam^2 sinh^-2(lam z) + sum 8 n lam^2 q^2n/(1-q^2n) cosh(2 n lam z)."""
    lam = lat.lam
    t = lam * z
    sh = cmath.sinh(t)
    if abs(sh) < 1e-150:
        raise PoleAt(z)
    total = lam * lam / (sh * sh)
    q = lat.q
    if q == 0:
        return total
    q2 = q * q
    qn = q2
    n = 1
    while True:
        term = 8 * n * lam * lam * qn / (1 - qn) * cmath.cosh(2 * n * t)
        total += term
        if abs(term) < _TRUNC * (abs(total) + 1):
            break
        n += 1
        qn *= q2
        if n > _MAX_TERMS:
            raise SeriesDiverged(f"wp series did not converge at z={z}")
    return total


def wp(z: complex, lat: Lattice, shift: int = 0, zero_mean: bool = False) -> complex:
    """Weierstrass p (or p0 = p + eta1/omega1 when zero_mean) at z + omega_shift."""
    z = complex(z)
    if shift:
        z = z + lat.half_period(shift)
    if lat.both_infinite:
        if abs(z) < POLE_RADIUS:
            raise PoleAt(z)
        return 1.0 / (z * z)
    zr = lat.reduce(z)
    if abs(zr) < POLE_RADIUS:
        raise PoleAt(z)
    v = _wp0_series(zr, lat)
    if not zero_mean:
        v -= lat.eta1 / complex(lat.omega1)
    return v


def wp0(z: complex, lat: Lattice, shift: int = 0) -> complex:
    return wp(z, lat, shift, zero_mean=True)


def wp_prime(z: complex, lat: Lattice, shift: int = 0) -> complex:
    """d/dz of wp (same for wp0)."""
    z = complex(z)
    if shift:
        z = z + lat.half_period(shift)
    if lat.both_infinite:
        if abs(z) < POLE_RADIUS:
            raise PoleAt(z)
        return -2.0 / (z * z * z)
    zr = lat.reduce(z)
    if abs(zr) < POLE_RADIUS:
        raise PoleAt(z)
    lam = lat.lam
    t = lam * zr
    sh = cmath.sinh(t)
    total = -2 * lam ** 3 * cmath.cosh(t) / sh ** 3
    q = lat.q
    if q == 0:
        return total
    q2 = q * q
    qn = q2
    n = 1
    while True:
        term = 16 * n * n * lam ** 3 * qn / (1 - qn) * cmath.sinh(2 * n * t)
        total += term
        if abs(term) < _TRUNC * (abs(total) + 1):
            break
        n += 1
        qn *= q2
        if n > _MAX_TERMS:
            raise SeriesDiverged(f"wp' series did not converge at z={z}")
    return total


def eta1(lat: Lattice) -> complex:
    if lat.omega2 is INFINITE and not lat.both_infinite:
        return _eta1(lat)
    if lat.both_infinite:
        raise EllipticError("eta1 undefined for the rational lattice")
    return lat.eta1


def wp_shift(z: complex, j: int, lat: Lattice) -> complex:
    """wp(z + omega_j) by direct series at the shifted argument."""
    return wp(z, lat, shift=j)


def wp_taylor(z0: complex, lat: Lattice, order: int, shift: int = 0,
              zero_mean: bool = False):
    """Taylor coefficients c_0..c_order of wp (or wp0) at z0 + omega_shift.

    Seeds c0, c1 from the series and extends with the ODE
    wp'' = 6 wp^2 - g2/2; returns coefficients of the chosen variant.
    """
    c0 = wp(z0, lat, shift=shift, zero_mean=False)
    c1 = wp_prime(z0, lat, shift=shift)
    g2 = lat.g2
    c = [c0, c1]
    for m in range(order - 1):
        conv = sum(c[i] * c[m - i] for i in range(m + 1))
        nxt = (6 * conv - (g2 / 2 if m == 0 else 0)) / ((m + 1) * (m + 2))
        c.append(nxt)
    c = c[: order + 1]
    if zero_mean and not lat.both_infinite:
        c[0] = c[0] + lat.eta1 / complex(lat.omega1)
    return c


def wp_prime_taylor(z0: complex, lat: Lattice, order: int, shift: int = 0):
    c = wp_taylor(z0, lat, order + 1, shift=shift, zero_mean=False)
    return [(m + 1) * c[m + 1] for m in range(order + 1)]

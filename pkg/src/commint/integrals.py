"""Constructors for the commuting operator towers.

Type A towers are sums over partial matchings (pair potentials times
derivative monomials); type B towers come from the generating operator
P_n(C) = sum_K q_K(C) Delta_{K^c}^2 whose C-coefficients give P_n..P_1;
type D towers swap the top operator for Delta_{1..n}.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from .coeffring import (
    CST_ONE, CST_ZERO, Lin, Node, Par, add, cst, form, ipow, mul, recip, var,
)
from .potentials import (
    FamilySpec, PotentialData, family_info, make_family, partitions_into,
    set_partitions, UnknownFamily,
)
from .rationals import QQi, as_qqi
from .weylops import DiffOp, op_mul


@dataclass
class IntegralTower:
    spec: FamilySpec
    data: PotentialData
    ops: list          # P_1 .. P_n (type A/B); P_1..P_{n-1} for type D
    kind: str          # 'A' | 'B' | 'D'
    delta: DiffOp | None = None   # Delta_{1..n} for type D

    def schrodinger(self) -> DiffOp:
        """-1/2 Laplacian + R as a DiffOp."""
        n = self.spec.n
        out = DiffOp(n)
        half = QQi(Fraction(-1, 2))
        for k in range(n):
            mi = tuple(2 if i == k else 0 for i in range(n))
            out = out + DiffOp(n, {mi: cst(half)})
        R = self.data.potential()
        if not R.iszero():
            out = out + DiffOp.from_coeff(R, n)
        return out


# ---------------------------------------------------------------------------
# type A
# ---------------------------------------------------------------------------

def _partial_matchings(elems):
    """All (pairs, singles) splittings of the tuple elems into disjoint
    unordered pairs plus leftover singletons."""
    if not elems:
        return [((), ())]
    first, rest = elems[0], elems[1:]
    out = []
    for pairs, singles in _partial_matchings(rest):
        out.append((pairs, (first,) + singles))
    for i, other in enumerate(rest):
        remaining = rest[:i] + rest[i + 1:]
        for pairs, singles in _partial_matchings(remaining):
            out.append((((first, other),) + pairs, singles))
    return out


def build_A(data: PotentialData, extra_shift: Node | None = None) -> IntegralTower:
    """eq-AnHInt towers: P_k = sum over matchings of k-subsets."""
    n = data.spec.n
    ops = []
    for k in range(1, n + 1):
        acc = DiffOp(n)
        for subset in itertools.combinations(range(n), k):
            for pairs, singles in _partial_matchings(subset):
                factors = []
                dead = False
                for (i, j) in pairs:
                    u = data.u_minus.get((i, j), CST_ZERO)
                    if extra_shift is not None:
                        u = add(u, extra_shift)
                    if u.iszero():
                        dead = True
                        break
                    factors.append(u)
                if dead:
                    continue
                coeff = mul(*factors) if factors else CST_ONE
                mi = tuple(1 if i in singles else 0 for i in range(n))
                acc = acc + DiffOp(n, {mi: coeff})
        ops.append(acc)
    return IntegralTower(data.spec, data, ops, "A")


# ---------------------------------------------------------------------------
# type B: Delta, q, P_n(C)
# ---------------------------------------------------------------------------

def build_Delta(data: PotentialData, I) -> DiffOp:
    """Delta_I over partial matchings with w- = u(e_i-e_j) - u(e_i+e_j)."""
    n = data.spec.n
    I = tuple(sorted(I))
    acc = DiffOp(n)
    for pairs, singles in _partial_matchings(I):
        factors = []
        dead = False
        for (i, j) in pairs:
            w = add(data.u_term(i, j, False), mul(cst(-1), data.u_term(i, j, True)))
            if w.iszero():
                dead = True
                break
            factors.append(w)
        if dead:
            continue
        coeff = mul(*factors) if factors else CST_ONE
        mi = tuple(1 if i in singles else 0 for i in range(n))
        acc = acc + DiffOp(n, {mi: coeff})
    return acc


def delta_weyl_sum(data: PotentialData, I) -> DiffOp:
    """Literal signed W(B_k) sum for Delta_I (cross-check, #I small)."""
    n = data.spec.n
    I = tuple(sorted(I))
    k = len(I)
    acc = DiffOp(n)
    fact = [1] * (k + 1)
    for m in range(2, k + 1):
        fact[m] = fact[m - 1] * m
    for perm in itertools.permutations(I):
        for signs in itertools.product((1, -1), repeat=k):
            eps = 1
            for s in signs:
                eps *= s
            for j2 in range(0, k // 2 + 1):
                # w(u_{i1-i2} ... u_{i(2j-1)-i(2j)} d_{i(2j+1)} .. d_{ik})
                denom = (2 ** k) * fact[j2] * fact[k - 2 * j2]
                factors = []
                dead = False
                sgn = eps
                for t in range(j2):
                    a, b = perm[2 * t], perm[2 * t + 1]
                    sa, sb = signs[2 * t], signs[2 * t + 1]
                    u = data.u_term(min(a, b), max(a, b), plus=(sa != sb))
                    if u.iszero():
                        dead = True
                        break
                    factors.append(u)
                if dead:
                    continue
                mi = [0] * n
                for t in range(2 * j2, k):
                    mi[perm[t]] += 1
                    sgn *= signs[t]
                coeff = mul(*factors) if factors else CST_ONE
                coeff = coeff.scale(QQi(Fraction(sgn, denom)))
                acc = acc + DiffOp(n, {tuple(mi): coeff})
    return acc


def t_parts(data: PotentialData, I):
    """T_I = t1 * C + t0 split into C-coefficients."""
    I = tuple(sorted(I))
    key = ("tparts", I)
    got = data._cache.get(key)
    if got is not None:
        return got
    sgn = 1 if (len(I) - 1) % 2 == 0 else -1
    t1 = data.S0(I).scale(sgn)
    terms = []
    for j in sorted(data.v):
        t0j = data.T0(I, j)
        if not t0j.iszero():
            terms.append(mul(Par(f"C{j}"), t0j))
    t0 = add(*terms).scale(-sgn) if terms else CST_ZERO
    data._cache[key] = (t0, t1)
    return t0, t1


def q_coeffs(data: PotentialData, I):
    """q_I(C) as a list of C-power coefficients [q_0, .., q_{#I}]."""
    I = tuple(sorted(I))
    key = ("qc", I)
    got = data._cache.get(key)
    if got is not None:
        return got
    if not I:
        out = [CST_ONE]
    else:
        out = [CST_ZERO] * (len(I) + 1)
        acc = {}
        for parts in set_partitions(I):
            # product over parts of (t0 + t1*C), collected by C-degree
            poly = {0: CST_ONE}
            for p in parts:
                t0, t1 = t_parts(data, p)
                nxt = {}
                for deg, c in poly.items():
                    if not t0.iszero():
                        nxt[deg] = add(nxt.get(deg, CST_ZERO), mul(c, t0))
                    if not t1.iszero():
                        nxt[deg + 1] = add(nxt.get(deg + 1, CST_ZERO), mul(c, t1))
                poly = nxt
            for deg, c in poly.items():
                acc[deg] = add(acc.get(deg, CST_ZERO), c)
        for deg, c in acc.items():
            out[deg] = c
    data._cache[key] = out
    return out


def build_B(data: PotentialData) -> IntegralTower:
    """Tower P_1..P_n from the C-coefficients of P_n(C)."""
    n = data.spec.n
    universe = tuple(range(n))
    coeff_ops = [DiffOp(n) for _ in range(n + 1)]  # index = C-degree
    for r in range(n + 1):
        for K in itertools.combinations(universe, r):
            comp = tuple(x for x in universe if x not in K)
            delta = build_Delta(data, comp)
            d2 = op_mul(delta, delta) if comp else DiffOp.from_coeff(CST_ONE, n)
            qs = q_coeffs(data, K)
            for deg, q in enumerate(qs):
                if q.iszero():
                    continue
                coeff_ops[deg] = coeff_ops[deg] + d2.map_coefficients(lambda c: mul(q, c))
    # P_n(C) = sum_j C^j P_{n-j}  =>  coefficient of C^j is P_{n-j}
    ops = [coeff_ops[n - k] for k in range(1, n + 1)]
    return IntegralTower(data.spec, data, ops, "B")


def build_B_generating(data: PotentialData):
    """P_n(C) as the list of its C-power coefficient operators."""
    tower = build_B(data)
    n = data.spec.n
    out = [None] * (n + 1)
    for k in range(1, n + 1):
        out[n - k] = tower.ops[k - 1]
    out[n] = DiffOp.from_coeff(CST_ONE, n)
    return out


def build_B_direct(data: PotentialData, j: int) -> DiffOp:
    """P_{n-j} by the direct subset formula (cross-check for the generator).

    P_{n-j} = sum over partitions (U, V, W) of {1..n} with the S-blocks on U:
    (-1)^(|U|-j) [sum over j-block partitions of U, prod S0] q0_V Delta_W^2.
    """
    n = data.spec.n
    universe = tuple(range(n))
    acc = DiffOp(n)
    for i in range(j, n + 1):
        for U in itertools.combinations(universe, i):
            rest = tuple(x for x in universe if x not in U)
            if j == 0:
                sfactor = CST_ONE if not U else CST_ZERO
            else:
                sterms = [mul(*[data.S0(p) for p in parts])
                          for parts in partitions_into(U, j)]
                sfactor = add(*sterms) if sterms else CST_ZERO
            if sfactor.iszero():
                continue
            sign = 1 if (i - j) % 2 == 0 else -1
            for m in range(len(rest) + 1):
                for V in itertools.combinations(rest, m):
                    W = tuple(x for x in rest if x not in V)
                    q0 = q_coeffs(data, V)[0]
                    if q0.iszero():
                        continue
                    delta = build_Delta(data, W)
                    d2 = op_mul(delta, delta) if W else DiffOp.from_coeff(CST_ONE, n)
                    pre = mul(sfactor, q0).scale(sign)
                    acc = acc + d2.map_coefficients(lambda c: mul(pre, c))
    return acc


def build_D(data: PotentialData) -> IntegralTower:
    """Type D towers: P_1..P_{n-1} plus Delta_{1..n} (P_n = Delta^2)."""
    if any(data.v.values() if data.v else []):
        raise UnknownFamily("type D requires all boundary couplings zero")
    tower = build_B(data)
    n = data.spec.n
    delta = build_Delta(data, tuple(range(n)))
    return IntegralTower(data.spec, data, tower.ops[: n - 1], "D", delta=delta)


# ---------------------------------------------------------------------------
# rank-2 pairs
# ---------------------------------------------------------------------------

def build_B2_pair(pair) -> tuple:
    """(P, P2) from a rank-2 table: P2 per the normal form."""
    um, up, vx, wy = pair.at_xy()
    n = 2
    core = DiffOp(n, {(1, 1): CST_ONE})
    off = add(um, mul(cst(-1), up))
    if not off.iszero():
        core = core + DiffOp.from_coeff(off, n)
    P2 = op_mul(core, core)
    if not wy.iszero():
        P2 = P2 + DiffOp(n, {(2, 0): wy.scale(-2)})
    if not vx.iszero():
        P2 = P2 + DiffOp(n, {(0, 2): vx.scale(-2)})
    zero_term = add(mul(cst(4), vx, wy), pair.T)
    if not zero_term.iszero():
        P2 = P2 + DiffOp.from_coeff(zero_term, n)
    half = QQi(Fraction(-1, 2))
    P = DiffOp(n, {(2, 0): cst(half), (0, 2): cst(half)})
    R = add(um, up, vx, wy)
    if not R.iszero():
        P = P + DiffOp.from_coeff(R, n)
    return P, P2


# ---------------------------------------------------------------------------
# one-variable catalog
# ---------------------------------------------------------------------------

@dataclass
class OdeRecord:
    family: str
    classical_name: str
    op: DiffOp          # the operator P - C (C left symbolic as parameter _E)
    note: str = ""


_ODE_TABLE = {
    "Ellip-B1": ("Heun", "four regular singular points"),
    "Ellip-A1": ("Lame", ""),
    "Trig-BC1-reg": ("Gauss hypergeometric", ""),
    "Trig-A1": ("Legendre", ""),
    "Trig-B1": ("Mathieu", "modified; C0=C1=C3=0"),
    "Rat-B1-2": ("paraboloid of revolution", "Weber when C0=0; Whittaker after s=t^2"),
    "Rat-A0-bry2": ("Weber", "Stokes when C1=0 (reduces to Bessel); Airy when C=C1=0"),
    "Toda-BC1": ("reduces to Rat-B1-2", "via s=e^{-t}"),
    "Toda-A1": ("Bessel", ""),
    "Rat-A1": ("Bessel", "via the t^(1/2) gauge"),
}


def ode_specialize(name: str, lam=1, lattice=None) -> OdeRecord:
    if name not in _ODE_TABLE:
        raise UnknownFamily(f"{name} is not in the one-variable catalog")
    classical, note = _ODE_TABLE[name]
    lamq = as_qqi(lam)
    t = form([1])
    half = cst(QQi(Fraction(-1, 2)))
    terms = []
    C0, C1, C2, C3, A = Par("C0"), Par("C1"), Par("C2"), Par("C3"), Par("A")
    from .coeffring import cosh_pow, expn, sinh_pow, wp_node
    from .elliptic import default_lattice
    if name == "Ellip-B1":
        lat = lattice or default_lattice()
        terms = [mul(Par(f"C{j}"), wp_node(t, lat, j=j, zero_mean=False)) for j in range(4)]
    elif name == "Ellip-A1":
        lat = lattice or default_lattice()
        terms = [mul(A, wp_node(t, lat, zero_mean=False))]
    elif name == "Trig-BC1-reg":
        terms = [mul(C0, sinh_pow(form([lamq]), -2)),
                 mul(C1, sinh_pow(form([as_qqi(2) * lamq]), -2))]
    elif name == "Trig-A1":
        terms = [mul(C0, sinh_pow(form([lamq]), -2))]
    elif name == "Trig-B1":
        terms = [mul(C2, cosh_pow(form([as_qqi(2) * lamq]), 1))]
    elif name == "Rat-B1-2":
        terms = [mul(C0, recip(t, 2)), mul(C1, ipow(Lin(t), 2))]
    elif name == "Rat-A0-bry2":
        terms = [mul(C0, Lin(t)), mul(C1, ipow(Lin(t), 2))]
    elif name == "Toda-BC1":
        terms = [mul(C0, expn(form([as_qqi(-2) * lamq]))),
                 mul(C1, expn(form([as_qqi(-4) * lamq])))]
    elif name == "Toda-A1":
        terms = [mul(C0, expn(form([as_qqi(-2) * lamq])))]
    elif name == "Rat-A1":
        terms = [mul(C0, recip(t, 2))]
    op = DiffOp(1, {(2,): half, (0,): add(*terms, mul(cst(-1), Par("_E")))})
    return OdeRecord(name, classical, op, note)

"""Rotation numbers as exact objects, Diophantine helpers, and Liouville-scale parameter selection.

Nothing here uses floating point for a decision.  Rationals are ``Fraction``; quadratic
irrationals are handled through exact surd arithmetic; Liouville generators expose exact
truncations plus rational enclosures of the tail.  Quantities involving fractional powers
such as p^tau are compared through certified interval enclosures (see ``bigint``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Union

from mpmath import iv

from .bigint import (Int, Q, SparseInt, Undecidable, certified_cmp, ceil_q, divmod_int, floor_q,
                     fmt_int, fmt_real, gcd_int, int_to_iv, isgn, iv_endpoints, iv_log10, ivprec, parse_int, parse_real,
                     qdiv, qnorm, real_to_iv, sci)
from .lattice import elementary_pair

# ------------------------------------------------------------------- surds


class Surd:
    """r + s*sqrt(d) with rational r, s and a positive non-square integer d."""

    __slots__ = ("r", "s", "d")

    def __init__(self, r, s, d: int):
        if d <= 0 or math.isqrt(d) ** 2 == d:
            raise ValueError(f"d={d} must be a positive non-square")
        self.r, self.s, self.d = Fraction(r), Fraction(s), int(d)

    def _lift(self, o) -> "Surd":
        if isinstance(o, Surd):
            if o.d != self.d:
                raise ValueError("surds with different radicands")
            return o
        return Surd(Fraction(o), 0, self.d)

    def __add__(self, o):
        o = self._lift(o)
        return Surd(self.r + o.r, self.s + o.s, self.d)

    __radd__ = __add__

    def __neg__(self):
        return Surd(-self.r, -self.s, self.d)

    def __sub__(self, o):
        return self + (-self._lift(o))

    def __rsub__(self, o):
        return (-self) + o

    def __mul__(self, o):
        o = self._lift(o)
        return Surd(self.r * o.r + self.s * o.s * self.d, self.r * o.s + self.s * o.r, self.d)

    __rmul__ = __mul__

    def inverse(self) -> "Surd":
        n = self.r * self.r - self.s * self.s * self.d
        if n == 0:
            raise ZeroDivisionError
        return Surd(self.r / n, -self.s / n, self.d)

    def __truediv__(self, o):
        return self * self._lift(o).inverse()

    def __rtruediv__(self, o):
        return self._lift(o) * self.inverse()

    def sign(self) -> int:
        rs = (self.r > 0) - (self.r < 0)
        ss = (self.s > 0) - (self.s < 0)
        if ss == 0:
            return rs
        if rs == 0 or rs == ss:
            return ss
        # opposite signs: the larger magnitude wins
        return rs if self.r * self.r > self.s * self.s * self.d else ss

    def floor(self) -> int:
        C = math.lcm(self.r.denominator, self.s.denominator)
        A, B = int(self.r * C), int(self.s * C)
        if B == 0:
            fb = 0
        elif B > 0:
            fb = math.isqrt(B * B * self.d)
        else:
            fb = -math.isqrt(B * B * self.d) - 1
        return (A + fb) // C

    def ceil(self) -> int:
        return -(-self).floor()

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def __float__(self):
        return float(self.r) + float(self.s) * math.sqrt(self.d)

    def to_iv(self):
        return real_to_iv(self.r) + real_to_iv(self.s) * iv.sqrt(int_to_iv(self.d))

    def __str__(self):
        return f"{self.r}+{self.s}*sqrt({self.d})"


# ---------------------------------------------------------- rotation specs


def _hull(lo, hi):
    return iv.make_mpf((real_to_iv(lo)._mpi_[0], real_to_iv(hi)._mpi_[1]))


class RotationSpec:
    kind = "abstract"

    @property
    def is_rational(self) -> bool:
        return False

    def label(self) -> str:
        raise NotImplementedError

    def enclosure(self, level: int):
        """Exact rationals lo < omega < hi (lo = hi = omega for rationals)."""
        raise NotImplementedError

    def cmp(self, x) -> int:
        """Sign of omega - x for an exact rational x."""
        raise NotImplementedError

    def approx_fraction(self, bits: int) -> Fraction:
        raise NotImplementedError

    def __float__(self):
        return float(self.approx_fraction(64))

    def to_iv(self):
        lo, hi = self.enclosure(max(4, iv.prec // 8))
        return _hull(lo, hi)

    def __repr__(self):
        return f"RotationSpec({self.label()})"


class RationalRotation(RotationSpec):
    kind = "rational"

    def __init__(self, value):
        self.value = Fraction(value) if not isinstance(value, Q) else value

    @property
    def is_rational(self):
        return True

    def label(self):
        return fmt_real(self.value)

    def enclosure(self, level):
        return self.value, self.value

    def cmp(self, x):
        d = self.value - x
        return d.sign() if isinstance(d, Q) else isgn(d)

    def approx_fraction(self, bits):
        return Fraction(self.value) if isinstance(self.value, Fraction) else Fraction(floor_q(self.value * 2 ** bits), 2 ** bits)

    def to_iv(self):
        return real_to_iv(self.value)


class QuadraticRotation(RotationSpec):
    """(a + b*sqrt(d)) / c."""

    kind = "quadratic"

    def __init__(self, a: int, b: int, d: int, c: int):
        if c == 0 or b == 0:
            raise ValueError("need b != 0 and c != 0")
        self.a, self.b, self.d, self.c = int(a), int(b), int(d), int(c)
        self.value = Surd(Fraction(a, c), Fraction(b, c), d)

    def label(self):
        if (self.a, self.b, self.d, self.c) == (-1, 1, 5, 2):
            return "golden"
        return f"quadratic:{self.a},{self.b},{self.d},{self.c}"

    def enclosure(self, level):
        scale = 2 ** level
        lo = Fraction((self.value * scale).floor(), scale)
        return lo, lo + Fraction(1, scale)

    def cmp(self, x):
        if isinstance(x, Q):
            # only small rationals meet quadratic irrationals in practice
            x = Fraction(int(x.num), int(x.den))
        return (self.value - Fraction(x)).sign()

    def approx_fraction(self, bits):
        return self.enclosure(bits)[0]

    def to_iv(self):
        return self.value.to_iv()


class LiouvilleRotation(RotationSpec):
    """omega = sum_{j>=1} base^(-j!)."""

    kind = "liouville"

    def __init__(self, base: int = 10, max_depth: int = 40):
        if base < 2:
            raise ValueError("base must be >= 2")
        self.base, self.max_depth = int(base), int(max_depth)

    def label(self):
        return f"liouville:{self.base}" + ("" if self.max_depth == 40 else f":{self.max_depth}")

    def truncation(self, j: int):
        """(p_j, q_j) with q_j/p_j = sum_{i<=j} base^(-i!), p_j = base^(j!)."""
        fj = math.factorial(j)
        p = SparseInt.power(self.base, fj)
        q = SparseInt.power(self.base, 0, 0)
        for i in range(1, j + 1):
            q = q + SparseInt.power(self.base, fj - math.factorial(i))
        return p, q

    def enclosure(self, level):
        J = max(1, min(int(level), self.max_depth))
        p, q = self.truncation(J)
        tail = SparseInt.power(self.base, math.factorial(J + 1))
        t = qnorm(q, p)
        return t + qdiv(1, tail), t + qdiv(2, tail)

    def cmp(self, x):
        for J in range(1, self.max_depth + 1):
            lo, hi = self.enclosure(J)
            if x <= lo:
                return 1
            if x >= hi:
                return -1
        raise Undecidable(f"{self.label()} vs {x}: enclosures at depth {self.max_depth} cannot decide")

    def depth_for_bits(self, bits: int) -> int:
        j = 1
        while math.factorial(j + 1) * math.log2(self.base) < bits and j < self.max_depth:
            j += 1
        return j

    def approx_fraction(self, bits):
        lo, _ = self.enclosure(self.depth_for_bits(bits))
        return Fraction(lo)

    def to_iv(self):
        lo, hi = self.enclosure(self.depth_for_bits(iv.prec + 8))
        return _hull(lo, hi)


def as_rotation(w) -> RotationSpec:
    """RotationSpec from a spec string, Fraction, int, float, or an existing spec."""
    if isinstance(w, RotationSpec):
        return w
    if isinstance(w, (int, Fraction, Q)):
        return RationalRotation(w)
    if isinstance(w, float):
        return RationalRotation(Fraction(w))
    if isinstance(w, str):
        s = w.strip().lower()
        if s == "golden":
            return QuadraticRotation(-1, 1, 5, 2)
        if s.startswith("liouville"):
            parts = s.split(":")
            base = int(parts[1]) if len(parts) > 1 else 10
            depth = int(parts[2]) if len(parts) > 2 else 40
            return LiouvilleRotation(base, depth)
        if s.startswith("quadratic:"):
            a, b, d, c = (int(t) for t in s.split(":", 1)[1].split(","))
            return QuadraticRotation(a, b, d, c)
        return RationalRotation(parse_real(s))
    raise TypeError(f"cannot interpret {w!r} as a rotation number")


# --------------------------------------------------------------- convergents


def _cf_terms(x: Fraction) -> list[int]:
    out = []
    while True:
        a = math.floor(x)
        out.append(a)
        x -= a
        if x == 0:
            return out
        x = 1 / x


def _convergents_from_terms(terms) -> Iterator[tuple[int, int]]:
    h0, h1, k0, k1 = 0, 1, 1, 0
    for a in terms:
        h0, h1 = h1, a * h1 + h0
        k0, k1 = k1, a * k1 + k0
        yield k1, h1


def _surd_terms(x: Surd) -> Iterator[int]:
    while True:
        a = x.floor()
        yield a
        x = (x - a).inverse()


def _certified_terms(om: RotationSpec, n: int) -> list[int]:
    """Partial quotients shared by both ends of an enclosure, hence certified for omega."""
    liou = isinstance(om, LiouvilleRotation)
    level = 1 if liou else 8
    common: list[int] = []
    while True:
        lo, hi = om.enclosure(level)
        if isinstance(lo, Q) or isinstance(hi, Q):
            return common
        tl, th = _cf_terms(Fraction(lo)), _cf_terms(Fraction(hi))
        common = []
        # the final quotient of a finite expansion is not shared by nearby reals
        for a, b in zip(tl[:-1], th[:-1]):
            if a != b:
                break
            common.append(a)
        if len(common) >= n + 2 or (liou and level >= om.max_depth) or level > 1 << 16:
            return common
        level = level + 1 if liou else level * 2


def convergents(omega, n: int) -> list[tuple[int, int]]:
    """First n continued-fraction convergents (p, q) of omega with p >= 2, lowest terms."""
    if n < 1:
        raise ValueError("n must be >= 1")
    om = as_rotation(omega)
    if isinstance(om, RationalRotation):
        terms = iter(_cf_terms(Fraction(om.value)))
    elif isinstance(om, QuadraticRotation):
        terms = _surd_terms(om.value)
    else:
        terms = iter(_certified_terms(om, n + 4))
    out = []
    for p, q in _convergents_from_terms(terms):
        if p >= 2:
            out.append((p, q))
        if len(out) >= n:
            break
    return out


def extended_euclid(p: int, q: int) -> tuple[int, int]:
    """(s, t) with p t - q s = 1 and 0 <= s < p."""
    if p < 1:
        raise ValueError("p must be >= 1")
    return elementary_pair(p, q)


# -------------------------------------------------------------- p', reduction


def _delta_bounds(om: RotationSpec, p: Int, q: Int, level: int):
    lo, hi = om.enclosure(level)
    qp = qnorm(q, p)
    return lo - qp, hi - qp


def _check_band(om: RotationSpec, p: Int, q: Int):
    if om.cmp(qnorm(q, p)) <= 0 or om.cmp(qnorm(q + 1, p)) >= 0:
        raise ValueError(f"omega is not strictly between q/p and (q+1)/p for (p,q)=({fmt_int(p)},{fmt_int(q)})")


def p_prime(omega, p: Int, q: Int) -> Int:
    """The integer p' >= 2 with 1/(p' p) < omega - q/p < 1/((p'-1) p)."""
    om = as_rotation(omega)
    _check_band(om, p, q)
    if isinstance(om, RationalRotation):
        V = qdiv(1, (om.value - qnorm(q, p)) * p)
        f = floor_q(V)
        if V == f:
            raise ValueError("1/(p(omega - q/p)) is an integer; no p' satisfies the strict bounds")
        return f + 1
    if isinstance(om, QuadraticRotation):
        if not (isinstance(p, int) and isinstance(q, int)):
            raise ValueError("quadratic rotations need materializable (p, q)")
        V = ((om.value - Fraction(q, p)) * p).inverse()
        return V.floor() + 1
    for level in range(1, getattr(om, "max_depth", 60) + 1):
        dlo, dhi = _delta_bounds(om, p, q, level)
        if not dlo > 0:
            continue
        v_lo, v_hi = qdiv(1, dhi * p), qdiv(1, dlo * p)
        for n in _floor_candidates(v_lo, om):
            if n <= v_lo and v_hi <= n + 1:
                return n + 1
    raise Undecidable("enclosures of omega too loose to determine p'")


def _floor_candidates(v, om):
    try:
        yield floor_q(v)
        return
    except (NotImplementedError, OverflowError):
        pass
    base = getattr(om, "base", None)
    if base is None:
        return
    with ivprec(256):
        lg = iv.log(real_to_iv(v)) / iv.log(iv.mpf(base))
        E = int(round(float(lg.mid)))
    for e in (E, E - 1, E + 1):
        for c in (-2, -1, 0, 1):
            n = SparseInt.power(base, e) + c
            yield n


def reduce_tilde(P: Int, Qn: Int):
    """(m, p~, q~) with P = m p~, Qn = m q~ and gcd(p~, q~) = 1."""
    if isgn(P) <= 0 or isgn(Qn) <= 0:
        raise ValueError("inputs must be positive")
    m = gcd_int(P, Qn)
    if m == 1:
        return 1, P, Qn
    out = []
    for x in (P, Qn):
        if isinstance(x, int):
            out.append(x // m)
        else:
            y = x.div_small_exact(m)
            if y is None:
                qq, rr = divmod_int(x, m)
                if isgn(rr):
                    raise ArithmeticError("gcd does not divide")
                y = qq
            out.append(y)
    return m, out[0], out[1]


def budget_a(p: Int, q: Int, omega, n: Int) -> Int:
    """a = ceil(n |q - omega p|), exact."""
    if isgn(n) == 0:
        return 0
    om = as_rotation(omega)
    if isinstance(om, RationalRotation):
        return ceil_q(abs(q - om.value * p) * n)
    if isinstance(om, QuadraticRotation):
        if not all(isinstance(v, int) for v in (p, q, n)):
            raise ValueError("quadratic rotations need materializable integers")
        return abs((om.value * (-p) + q) * n).ceil()
    last = None
    for level in range(1, getattr(om, "max_depth", 60) + 1):
        lo, hi = om.enclosure(level)
        a1, a2 = (q - lo * p) * n, (q - hi * p) * n
        if isgn(_num(a1)) * isgn(_num(a2)) <= 0:
            continue  # sign of q - omega p not yet known
        v_lo, v_hi = (a1, a2) if abs(a1) <= abs(a2) else (a2, a1)
        v_lo, v_hi = abs(v_lo), abs(v_hi)
        f = floor_q(v_lo)
        if v_hi <= f + 1:
            return f + 1
        last = (v_lo, v_hi)
    raise Undecidable(f"interval {last} too wide to decide the ceiling")


def _num(x):
    if isinstance(x, Q):
        return x.num
    if isinstance(x, Fraction):
        return x.numerator
    return x


# ------------------------------------------------------ certified quantities


class X:
    """A positive real built from exact data, possibly through fractional powers.

    Exact when every ingredient is exact; otherwise carries a closure producing a
    rigorous mpmath interval at the ambient precision.
    """

    __slots__ = ("exact", "_enc", "text")

    def __init__(self, exact=None, enc=None, text: str = ""):
        self.exact = exact
        self._enc = enc
        self.text = text

    @staticmethod
    def of(v, text: str = "") -> "X":
        if isinstance(v, X):
            return v
        if isinstance(v, float):
            v = Fraction(str(v))
        return X(exact=v, text=text or fmt_real(v))

    def enc(self):
        if self.exact is not None:
            return real_to_iv(self.exact)
        return self._enc()

    def _bin(self, o, op, sym):
        o = X.of(o)
        if self.exact is not None and o.exact is not None:
            return X(exact=op(self.exact, o.exact))
        a, b = self, o
        return X(enc=lambda: op(a.enc(), b.enc()))

    def __add__(self, o):
        return self._bin(o, lambda a, b: a + b, "+")

    __radd__ = __add__

    def __sub__(self, o):
        return self._bin(o, lambda a, b: a - b, "-")

    def __rsub__(self, o):
        return X.of(o) - self

    def __mul__(self, o):
        return self._bin(o, lambda a, b: a * b, "*")

    __rmul__ = __mul__

    def __truediv__(self, o):
        return self._bin(o, lambda a, b: qdiv(a, b) if not hasattr(a, "a") else a / b, "/")

    def __rtruediv__(self, o):
        return X.of(o) / self

    def pow(self, e) -> "X":
        e = Fraction(e)
        if self.exact is not None and e.denominator == 1:
            n = int(e)
            v = self.exact
            return X(exact=(v ** n if n >= 0 else qdiv(1, v ** -n)))
        base = self
        return X(enc=lambda: iv.exp(real_to_iv(e) * iv.log(base.enc())))

    def cmp(self, o) -> int:
        o = X.of(o)
        if self.exact is not None and o.exact is not None:
            d = self.exact - o.exact
            return d.sign() if isinstance(d, Q) else isgn(d)
        return certified_cmp(self.enc, o.enc)

    def log10(self) -> float:
        return iv_log10(self.enc)

    def display(self) -> str:
        if self.exact is not None:
            s = fmt_real(self.exact)
            if len(s) <= 120:
                return s
        return sci(self.enc)

    @property
    def kind(self) -> str:
        return "exact" if self.exact is not None else "certified"


_REL = {"<": lambda s: s < 0, "<=": lambda s: s <= 0, ">": lambda s: s > 0, ">=": lambda s: s >= 0,
        "==": lambda s: s == 0}


@dataclass
class Check:
    name: str
    lhs: str
    relation: str
    rhs: str
    passed: bool
    kind: str = "exact"  # exact | certified | float
    scale_mode: str = "exact"  # exact | relaxed
    exact_scale_passed: Optional[bool] = None
    lhs_log10: Optional[float] = None
    rhs_log10: Optional[float] = None
    note: str = ""

    def to_dict(self) -> dict:
        d = {"name": self.name, "lhs": self.lhs, "relation": self.relation, "rhs": self.rhs,
             "pass": self.passed, "kind": self.kind, "scale_mode": self.scale_mode}
        if self.exact_scale_passed is not None:
            d["exact_scale_pass"] = self.exact_scale_passed
        if self.lhs_log10 is not None:
            d["lhs_log10"] = self.lhs_log10
            d["rhs_log10"] = self.rhs_log10
        if self.note:
            d["note"] = self.note
        return d


def compare_check(name: str, lhs, rel: str, rhs, scale_mode: str = "exact",
                  exact_pair=None, note: str = "") -> Check:
    """Evaluate lhs REL rhs exactly or by certified enclosure and record both sides."""
    L, R = X.of(lhs), X.of(rhs)
    try:
        ok = _REL[rel](L.cmp(R))
    except Undecidable:
        ok = False
        note = (note + "; " if note else "") + "undecidable at maximum precision"
    kind = "exact" if L.exact is not None and R.exact is not None else "certified"
    c = Check(name, L.display(), rel, R.display(), ok, kind, scale_mode, note=note)
    if kind == "certified" or len(c.lhs) > 60 or len(c.rhs) > 60:
        c.lhs_log10, c.rhs_log10 = _safe_log10(L), _safe_log10(R)
    if exact_pair is not None:
        eL, eR = X.of(exact_pair[0]), X.of(exact_pair[1])
        try:
            c.exact_scale_passed = _REL[rel](eL.cmp(eR))
        except Undecidable:
            c.exact_scale_passed = False
    return c


def _safe_log10(x: X):
    try:
        return x.log10()
    except (ValueError, ZeroDivisionError, ArithmeticError):
        return None


# --------------------------------------------------------- parameter selection


def exact(v) -> Fraction:
    """Fraction from decimal-looking input; floats go through their shortest repr."""
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, float):
        return Fraction(repr(v))
    if isinstance(v, str):
        return Fraction(v.strip())
    raise TypeError(f"cannot make an exact rational from {v!r}")


@dataclass
class ParamSelection:
    omega: str
    gamma: Fraction
    sigma: Fraction
    tau: Fraction
    p: Int
    q: Int
    candidate: int
    p_prime: Int
    m: Int
    p_tilde: Int
    q_tilde: Int
    k: int
    r: int
    eps: Fraction
    C: Fraction
    C_k: Fraction
    C_kr: Fraction
    a: Int
    N_range: tuple
    N: Int
    relax: Fraction = Fraction(1)
    N_window_exact: bool = True

    @property
    def rotation(self) -> RotationSpec:
        return as_rotation(self.omega)

    @property
    def relaxed(self) -> bool:
        return self.relax != 1

    def omega_window(self):
        """(Omega_1, Omega_2) = (q/p + 1/(p'p), q/p + 1/((p'-1)p))."""
        qp = qnorm(self.q, self.p)
        return qp + qdiv(1, self.p_prime * self.p), qp + qdiv(1, (self.p_prime - 1) * self.p)

    def gap2_bound(self):
        """eps / (C_kr p^{k+1}), the guaranteed second-stage gap length."""
        return qdiv(self.eps, self.C_kr * self.p ** (self.k + 1))

    def to_dict(self) -> dict:
        return {
            "omega": self.omega, "gamma": fmt_real(self.gamma), "sigma": fmt_real(self.sigma),
            "tau": fmt_real(self.tau), "p": fmt_int(self.p), "q": fmt_int(self.q),
            "candidate": self.candidate, "p_prime": fmt_int(self.p_prime), "m": fmt_int(self.m),
            "p_tilde": fmt_int(self.p_tilde), "q_tilde": fmt_int(self.q_tilde), "k": self.k, "r": self.r,
            "eps": fmt_real(self.eps), "C": fmt_real(self.C), "C_k": fmt_real(self.C_k),
            "C_kr": fmt_real(self.C_kr), "a": fmt_int(self.a),
            "N_range": [fmt_int(self.N_range[0]), fmt_int(self.N_range[1])], "N": fmt_int(self.N),
            "N_window_exact": self.N_window_exact, "relax": fmt_real(self.relax),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ParamSelection":
        fr = lambda s: Fraction(s)
        return cls(
            omega=d["omega"], gamma=fr(d["gamma"]), sigma=fr(d["sigma"]), tau=fr(d["tau"]),
            p=parse_int(d["p"]), q=parse_int(d["q"]), candidate=int(d["candidate"]),
            p_prime=parse_int(d["p_prime"]), m=parse_int(d["m"]), p_tilde=parse_int(d["p_tilde"]),
            q_tilde=parse_int(d["q_tilde"]), k=int(d["k"]), r=int(d["r"]), eps=fr(d["eps"]),
            C=fr(d["C"]), C_k=fr(d["C_k"]), C_kr=fr(d["C_kr"]), a=parse_int(d["a"]),
            N_range=(parse_int(d["N_range"][0]), parse_int(d["N_range"][1])), N=parse_int(d["N"]),
            relax=fr(d.get("relax", "1")), N_window_exact=bool(d.get("N_window_exact", True)),
        )

    def invariants(self) -> list[Check]:
        return invariant_checks(self)


@dataclass
class NoSelection:
    reason: str  # "not-liouville-enough" | "search-bound-too-small"
    examined: int
    best_tau: Optional[Fraction]
    log: list = field(default_factory=list)

    def __bool__(self):
        return False

    def to_dict(self) -> dict:
        return {"selected": False, "reason": self.reason, "examined": self.examined,
                "best_tau": None if self.best_tau is None else str(self.best_tau), "log": self.log}


def C_kr_of(C: Fraction, C_k: Fraction, r: int) -> Fraction:
    return 12 * C * C_k * (2 * r + 1) ** 2


def _candidates(om: RotationSpec, search_bound: int):
    if isinstance(om, LiouvilleRotation):
        for j in range(1, min(search_bound, om.max_depth - 2) + 1):
            p, q = om.truncation(j)
            yield j, p, q
        return
    for idx, (p, q) in enumerate(convergents(om, search_bound), 1):
        if om.cmp(Fraction(q, p)) > 0:
            yield idx, p, q


def _delta_enclosure(om: RotationSpec, p: Int, q: Int, j: int):
    """Rational lo < omega - q/p < hi, tight relative to the size of the difference."""
    if isinstance(om, LiouvilleRotation):
        return _delta_bounds(om, p, q, min(j + 2, om.max_depth))
    bits = 2 * int(p).bit_length() + 160
    return _delta_bounds(om, p, q, bits)


def _tau_for(gamma: Fraction, p: Int, dlo, dhi) -> Fraction:
    """Largest multiple of 1/1000 strictly below log_p(gamma / delta)."""
    with ivprec(256):
        L = (iv.log(real_to_iv(gamma)) - iv.log(real_to_iv(dhi))) / iv.log(real_to_iv(p))
        lo, _ = iv_endpoints(L)
    return Fraction(math.ceil(1000 * lo) - 1, 1000)


def n_window(C_kr: Fraction, eps: Fraction, p: Int, k: int):
    """(lo, hi, exact): integers in [3R p^{k(k+1)}, (33/10) R p^{k(k+1)}] with R = (C_kr/eps)^{k+1}."""
    R = (C_kr / eps) ** (k + 1)
    P = p ** (k * (k + 1))
    lo_q, hi_q = 3 * R * P, Fraction(33, 10) * R * P
    try:
        return ceil_q(lo_q), floor_q(hi_q), True
    except (NotImplementedError, OverflowError):
        return math.ceil(3 * R) * P, math.floor(Fraction(33, 10) * R) * P, False


def select_parameters(omega, gamma, sigma, k: int, r: int, eps, C, search_bound: int = 20,
                      C_k=None, relax=1):
    """First candidate approximant (p, q) satisfying A1-A3 with tau >= sigma.

    ``relax`` < 1 scales the right-hand side of A2 down by that factor.  Returns a
    ParamSelection, or a falsy NoSelection carrying the reason.
    """
    om = as_rotation(omega)
    if om.is_rational:
        raise ValueError("omega must be irrational")
    gamma, sigma, eps, C, relax = exact(gamma), exact(sigma), exact(eps), exact(C), exact(relax)
    if not sigma > 1 + 2 * k * (k + 1):
        raise ValueError(f"sigma must exceed 1 + 2k(k+1) = {1 + 2 * k * (k + 1)}")
    if k < 2 or r < 1 or eps <= 0 or gamma <= 0 or C <= 0 or relax <= 0:
        raise ValueError("need k >= 2, r >= 1 and positive gamma, eps, C, relax")
    if C_k is None:
        from .perturbation import certified_Ck
        C_k = certified_Ck(k)
    C_k = exact(C_k)
    C_kr = C_kr_of(C, C_k, r)
    log, best, reached_sigma = [], None, False
    examined = 0
    for j, p, q in _candidates(om, search_bound):
        examined += 1
        dlo, dhi = _delta_enclosure(om, p, q, j)
        if not dlo > 0:
            log.append({"candidate": j, "p": fmt_int(p), "status": "enclosure-too-loose"})
            continue
        tau = _tau_for(gamma, p, dlo, dhi)
        best = tau if best is None else max(best, tau)
        entry = {"candidate": j, "p": fmt_int(p), "tau": str(tau)}
        if tau < sigma:
            log.append({**entry, "status": "tau-below-sigma"})
            continue
        reached_sigma = True
        sel_checks = _a_checks(gamma, tau, p, k, r, eps, C_kr, relax, dlo, dhi)
        failed = [c.name for c in sel_checks if not c.passed]
        if failed:
            log.append({**entry, "status": "failed:" + ",".join(failed)})
            continue
        pp = p_prime(om, p, q)
        m, pt, qt = reduce_tilde(pp * p, pp * q + 1)
        lo, hi, ex = n_window(C_kr, eps, p, k)
        N = lo
        Om2 = qnorm(q, p) + qdiv(1, (pp - 1) * p)
        a = budget_a(pt, qt, RationalRotation(Om2) if isinstance(Om2, Fraction) else _QRot(Om2), (N + 3) * pt)
        log.append({**entry, "status": "selected"})
        return ParamSelection(om.label(), gamma, sigma, tau, p, q, j, pp, m, pt, qt, k, r, eps, C,
                              C_k, C_kr, a, (lo, hi), N, relax, ex)
    if reached_sigma or isinstance(om, LiouvilleRotation):
        reason = "search-bound-too-small"
    else:
        reason = "not-liouville-enough"
    return NoSelection(reason, examined, best, log)


class _QRot(RationalRotation):
    def __init__(self, v):
        self.value = v


def _a_checks(gamma, tau, p, k, r, eps, C_kr, relax, dlo, dhi, scale_mode="exact") -> list[Check]:
    P = X.of(p)
    g = X.of(gamma)
    kk = 2 * k * (k + 1)
    relaxed = relax != 1
    out = [
        compare_check("A1-left", g / P.pow(tau + 1), "<=", dlo),
        compare_check("A1-right", dhi, "<", g / P.pow(tau)),
        compare_check("A2", P.pow(tau - 1 - kk), ">=", X.of(relax * 10 * gamma * (C_kr / eps) ** (2 + 2 * k)),
                      "relaxed" if relaxed else "exact",
                      exact_pair=(P.pow(tau - 1 - kk), X.of(10 * gamma * (C_kr / eps) ** (2 + 2 * k))) if relaxed else None),
        compare_check("A3-eps", eps, "<=", C_kr / 10),
        compare_check("A3-p-gamma", P.pow(tau - 1), ">=", 10 * gamma),
        compare_check("A3-p-r", P.pow(tau - 1), ">=", r * gamma),
    ]
    return out


def invariant_checks(sel: ParamSelection) -> list[Check]:
    """A1-A3, the p' bracket, and the reduction identities, re-derived from the stored fields."""
    om = sel.rotation
    dlo, dhi = _delta_enclosure(om, sel.p, sel.q, sel.candidate)
    out = _a_checks(sel.gamma, sel.tau, sel.p, sel.k, sel.r, sel.eps, sel.C_kr, sel.relax, dlo, dhi)
    out.append(compare_check("tau>=sigma", sel.tau, ">=", sel.sigma))
    out.append(compare_check("C_kr-definition", sel.C_kr, "==", C_kr_of(sel.C, sel.C_k, sel.r)))
    P, PP = sel.p, sel.p_prime
    out.append(compare_check("p'-lower", qdiv(1, PP * P), "<", dlo, note="1/(p'p) < omega - q/p"))
    out.append(compare_check("p'-upper", dhi, "<", qdiv(1, (PP - 1) * P), note="omega - q/p < 1/((p'-1)p)"))
    out.append(compare_check("reduce-p", PP * P, "==", sel.m * sel.p_tilde))
    out.append(compare_check("reduce-q", PP * sel.q + 1, "==", sel.m * sel.q_tilde))
    try:
        g = gcd_int(sel.p_tilde, sel.q_tilde)
        out.append(compare_check("gcd(p~,q~)", g, "==", 1))
    except NotImplementedError:
        out.append(Check("gcd(p~,q~)", "?", "==", "1", False, note="gcd out of reach"))
    return out


def number_checks(sel: ParamSelection) -> list[Check]:
    """Every inequality of the destruction argument that involves only number-theoretic data."""
    out = invariant_checks(sel)
    p, pp, pt, qt = sel.p, sel.p_prime, sel.p_tilde, sel.q_tilde
    k, r, eps, C, C_k, C_kr, g, tau = sel.k, sel.r, sel.eps, sel.C, sel.C_k, sel.C_kr, sel.gamma, sel.tau
    f = sel.relax
    relaxed = f != 1
    mode = "relaxed" if relaxed else "exact"
    P = X.of(p)
    ptm1 = P.pow(tau - 1)
    small = X.of(g) / ptm1  # gamma / p^{tau-1}
    unit = X.of(eps) / (X.of(C_kr) * P.pow(k + 1))  # eps / (C_kr p^{k+1})
    N = sel.N
    lo, hi = sel.N_range

    out.append(compare_check("bothestimates1-lower", ptm1 / g, "<", pp))
    out.append(compare_check("bothestimates1-upper", pp, "<", 1 + P.pow(tau) / g))
    out.append(compare_check("bothestimates2-lower", ptm1 / g, "<", pt))
    out.append(compare_check("bothestimates2-upper", pt, "<", X.of(p) * (1 + P.pow(tau) / g)))

    R = (C_kr / eps) ** (k + 1)
    base_N = X.of(3 * R) * P.pow(k * (k + 1))
    out.append(compare_check("choiceN2-lower", base_N, "<=", lo))
    out.append(compare_check("choiceN2-upper", hi, "<=", X.of(Fraction(33, 10) * R) * P.pow(k * (k + 1))))
    out.append(compare_check("choiceN2-nonempty", lo, "<=", hi))
    out.append(compare_check("N-in-window", N, ">=", lo))
    out.append(compare_check("N-in-window-upper", N, "<=", hi))
    out.append(compare_check("N>=30", N, ">=", 30))

    out.append(compare_check("p'p>=r", pp * p, ">=", r))
    out.append(compare_check("p'<=p~", pp, "<=", pt))
    out.append(compare_check("p~<=p'p", pt, "<=", pp * p))
    out.append(_lcm_check(sel))

    Om1, Om2 = sel.omega_window()
    om = sel.rotation
    # the window brackets omega: Omega_1 < omega < Omega_2
    out.append(Check("omega-window", fmt_real(Om1) if len(fmt_real(Om1)) < 120 else "Omega_1", "<",
                     "omega < Omega_2", om.cmp(Om1) > 0 and om.cmp(Om2) < 0, "exact"))
    for label, Om in (("Omega_1", Om1), ("Omega_2", Om2)):
        dev = abs(qt - Om * pt)
        out.append(compare_check(f"qp-QP[{label}]-1", dev, "<=", qdiv(pt, pp * (pp - 1) * p)))
        out.append(compare_check(f"qp-QP[{label}]-2", qdiv(pt, pp * (pp - 1) * p), "<=", qdiv(1, pp - 1)))
        out.append(compare_check(f"qp-QP[{label}]-3", qdiv(1, pp - 1), "<", qdiv(Fraction(11, 10), pp)))
        out.append(compare_check(f"qp-QP[{label}]-4", qdiv(Fraction(11, 10), pp), "<", X.of(Fraction(11, 10)) * small))
        out.append(compare_check(f"qp-QP[{label}]", dev, "<=", X.of(Fraction(11, 10)) * small))
        out.append(compare_check(f"estimate2[{label}]", qdiv(1, pt) + (N + 3) * dev, "<",
                                 X.of(Fraction(5, 4) * N) * small))
        a_here = budget_a(pt, qt, _rat(Om), (N + 3) * pt)
        out.append(compare_check(f"case2-a[{label}]", qdiv(a_here, pt), "<", X.of(Fraction(5, 4) * N) * small))
        # Case-1 closeness and the Case-2 allowance depend on A2
        c1_l = X.of(dev * (N + 1))
        out.append(compare_check(f"case1-closeness[{label}]", Fraction(5, 2) + X.of(f) * c1_l, "<", 3, mode,
                                 exact_pair=(Fraction(5, 2) + c1_l, 3) if relaxed else None))
        allowance = X.of(r * eps / C_kr) * unit.pow(k)
        budget = X.of(2 * r) * X.of(qdiv(a_here, pt))
        out.append(compare_check(f"case2-budget[{label}]", X.of(f) * budget, "<=", allowance, mode,
                                 exact_pair=(budget, allowance) if relaxed else None))
    out.append(compare_check("stored-a", sel.a, "==", budget_a(pt, qt, _rat(Om2), (N + 3) * pt)))

    a2alt_r = X.of(Fraction(1, 10) * (eps / C_kr) ** 2) * unit.pow(2 * k)
    out.append(compare_check("A2alternative", X.of(f) * small, "<=", a2alt_r, mode,
                             exact_pair=(small, a2alt_r) if relaxed else None))
    bc_l = X.of(Fraction(10, 4) * N * r) * small
    bc_r = X.of(r * eps / C_kr) * unit.pow(k)
    out.append(compare_check("basicclosenessestimate", X.of(f) * bc_l, "<=", bc_r, mode,
                             exact_pair=(bc_l, bc_r) if relaxed else None))
    out.append(compare_check("orderoneaction", X.of(Fraction(1, 6) * N) * X.of(eps / C_k) * unit.pow(k), ">",
                             12 * C * r * (2 * r + 1)))
    out.append(compare_check("A3-eps-window", C_kr / eps, ">=", 10, note="N window nonempty needs C_kr/eps >= 10"))
    return out


def _rat(v) -> RationalRotation:
    return RationalRotation(v) if isinstance(v, Fraction) else _QRot(v)


def _lcm_check(sel: ParamSelection) -> Check:
    p, pt, target = sel.p, sel.p_tilde, sel.p_prime * sel.p
    # a pure power of the base divides p~ when every term of p~ carries that power; then lcm = p~
    if isinstance(p, SparseInt) and len(p.terms) == 1 and isinstance(pt, SparseInt):
        e0 = p.terms[0][0]
        if p.terms[0][1] == 1 and pt.base == p.base and all(e >= e0 for e, _ in pt.terms):
            return compare_check("lcm(p,p~)=p'p", pt, "==", target, note="p divides p~")
    try:
        g = gcd_int(p, pt)
        if isinstance(p, int) and isinstance(pt, int):
            l = p * pt // g
            return compare_check("lcm(p,p~)=p'p", l, "==", target)
        if g == 1:
            return compare_check("lcm(p,p~)=p'p", p * pt, "==", target)
    except NotImplementedError:
        pass
    return Check("lcm(p,p~)=p'p", "?", "==", fmt_real(target), False, note="lcm out of reach")


def delta_lower(sel: ParamSelection, level: Optional[int] = None):
    """Certified rational lower bound for min(Omega_2 - omega, omega - Omega_1), plus a float estimate."""
    om = sel.rotation
    Om1, Om2 = sel.omega_window()
    if isinstance(om, QuadraticRotation):
        d1, d2 = Surd(Fraction(Om2), 0, om.d) - om.value, om.value - Fraction(Om1)
        d = d1 if (d1 - d2).sign() < 0 else d2
        lo = Fraction((d * 2 ** 128).floor(), 2 ** 128)
        return lo, str(d)
    if isinstance(om, RationalRotation):
        d = min(Om2 - om.value, om.value - Om1)
        return d, fmt_real(d)
    lvl = level or min(sel.candidate + 2, om.max_depth)
    lo, hi = om.enclosure(lvl)
    c1, c2 = Om2 - hi, lo - Om1
    d = c1 if c1 <= c2 else c2
    return d, sci(lambda: real_to_iv(d))


__all__ = [
    "Surd", "RotationSpec", "RationalRotation", "QuadraticRotation", "LiouvilleRotation", "as_rotation",
    "convergents", "extended_euclid", "p_prime", "reduce_tilde", "budget_a", "X", "Check", "compare_check",
    "exact", "ParamSelection", "NoSelection", "C_kr_of", "select_parameters", "n_window",
    "invariant_checks", "number_checks", "delta_lower",
]

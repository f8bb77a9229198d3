"""Exact integers too large to materialize, and rationals built from them.

A ``SparseInt`` is a finite sum c_i * b^{e_i} in a fixed small base b.  Numbers such as
10^(14!) stay cheap because only exponents and coefficients are stored.  Whenever a value
is small enough it collapses back to a Python ``int`` (``Q`` likewise to ``Fraction``), so
ordinary-sized problems never touch this module's slow paths.

Comparisons are exact.  Fractional powers are compared through rigorous mpmath interval
enclosures whose precision is raised until the answer is decided.
"""
from __future__ import annotations

import math
import re
import threading
from contextlib import contextmanager
from fractions import Fraction
from typing import Callable, Union

from mpmath import iv
from mpmath.libmp import from_man_exp, round_ceiling, round_floor

SMALL_BITS = 1 << 16
MAX_PREC = 4096
_iv_lock = threading.RLock()


class Undecidable(ArithmeticError):
    """Raised when certified enclosures cannot separate two quantities."""


@contextmanager
def ivprec(bits: int):
    with _iv_lock:
        old = iv.prec
        iv.prec = bits
        try:
            yield iv
        finally:
            iv.prec = old


def _flog2(b: int) -> int:
    return b.bit_length() - 1


class SparseInt:
    """Integer sum(c * base**e) with arbitrary (possibly huge) exponents."""

    __slots__ = ("base", "terms")

    def __init__(self, base: int, terms):
        if base < 2:
            raise ValueError("base must be >= 2")
        acc: dict[int, int] = {}
        for e, c in terms:
            e, c = int(e), int(c)
            if e < 0:
                raise ValueError("negative exponent")
            if c:
                acc[e] = acc.get(e, 0) + c
        self.base = base
        self.terms = tuple(sorted(((e, c) for e, c in acc.items() if c), reverse=True))

    # -- construction and collapse
    @classmethod
    def power(cls, base: int, e: int, coef: int = 1):
        return wrap(cls(base, [(e, coef)]))

    def bits_upper(self) -> int:
        if not self.terms:
            return 0
        e0 = self.terms[0][0]
        return (e0 + 1) * base_bits(self.base) + sum(abs(c) for _, c in self.terms).bit_length()

    def is_small(self) -> bool:
        return self.bits_upper() <= SMALL_BITS

    def to_int(self) -> int:
        if not self.is_small():
            raise OverflowError("integer too large to materialize")
        return sum(c * self.base ** e for e, c in self.terms)

    # -- arithmetic
    def __truediv__(self, other):
        return Q.of(self) / other

    def __rtruediv__(self, other):
        return Q.of(other) / Q.of(self)

    def _coerce(self, other) -> "SparseInt":
        if isinstance(other, (Fraction, Q)):
            raise _Lift()
        if isinstance(other, SparseInt):
            if other.base != self.base:
                if other.is_small():
                    return SparseInt(self.base, [(0, other.to_int())])
                if self.is_small():
                    raise _Rebase(other.base)
                raise ValueError("mixed bases")
            return other
        if isinstance(other, int):
            return SparseInt(self.base, [(0, other)])
        return NotImplemented

    def __add__(self, other):
        try:
            o = self._coerce(other)
        except _Lift:
            return Q.of(self) + other
        except _Rebase as r:
            return SparseInt(r.base, [(0, self.to_int())]) + other
        if o is NotImplemented:
            return NotImplemented
        return wrap(SparseInt(self.base, self.terms + o.terms))

    __radd__ = __add__

    def __neg__(self):
        return wrap(SparseInt(self.base, [(e, -c) for e, c in self.terms]))

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        try:
            o = self._coerce(other)
        except _Lift:
            return Q.of(self) * other
        except _Rebase as r:
            return SparseInt(r.base, [(0, self.to_int())]) * other
        if o is NotImplemented:
            return NotImplemented
        return wrap(SparseInt(self.base, [(e1 + e2, c1 * c2) for e1, c1 in self.terms for e2, c2 in o.terms]))

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            return NotImplemented
        if len(self.terms) == 1:
            e, c = self.terms[0]
            return wrap(SparseInt(self.base, [(e * n, c ** n)]))
        out: Union[int, SparseInt] = 1
        for _ in range(n):
            out = out * self
        return out

    # -- order
    def _folded(self, extra: int = 1) -> list:
        """Terms after exactly merging leading terms until the top one dominates the rest.

        On return |c0| b^(e0) exceeds the sum of the remaining magnitudes by a factor of
        at least 2^extra (or a single term is left).
        """
        terms = list(self.terms)
        fl = _flog2(self.base)
        while len(terms) > 1:
            (e0, c0), (e1, c1) = terms[0], terms[1]
            rest = sum(abs(c) for _, c in terms[1:])
            d = e0 - e1
            if d * fl + abs(c0).bit_length() - 1 >= rest.bit_length() + extra:
                break
            merged = c0 * self.base ** d + c1
            terms = ([(e1, merged)] if merged else []) + terms[2:]
        return terms

    def sign(self) -> int:
        terms = self._folded(1)
        if not terms:
            return 0
        return 1 if terms[0][1] > 0 else -1

    def _diffsign(self, other) -> int:
        d = self - other
        return d.sign() if isinstance(d, Q) else isgn(d)

    def __eq__(self, other):
        if isinstance(other, (int, SparseInt, Fraction, Q)):
            return self._diffsign(other) == 0
        return NotImplemented

    def __hash__(self):
        return hash(("SparseInt", self.base, self.terms))

    def __lt__(self, other):
        return self._diffsign(other) < 0

    def __le__(self, other):
        return self._diffsign(other) <= 0

    def __gt__(self, other):
        return self._diffsign(other) > 0

    def __ge__(self, other):
        return self._diffsign(other) >= 0

    def __abs__(self):
        return -self if self.sign() < 0 else self

    # -- modular and divisibility helpers
    def mod_small(self, d: int) -> int:
        return sum(c * pow(self.base, e, d) for e, c in self.terms) % d

    def div_small_exact(self, d: int):
        """self / d when d divides every term separately; None otherwise."""
        out = []
        for e, c in self.terms:
            t, num = 0, c
            # smallest t with d | c * b^t; t is bounded by the b-adic content of d
            while num % d and t < 64 and t < e:
                num *= self.base
                t += 1
            if num % d:
                return None
            out.append((e - t, num // d))
        return wrap(SparseInt(self.base, out))

    def to_iv(self):
        acc = iv.mpf(0)
        b = iv.mpf(self.base)
        for e, c in self._folded(iv.prec + 8):
            acc = acc + int_to_iv(c) * b ** e
        return acc

    def __repr__(self):
        return f"SparseInt({self})"

    def __str__(self):
        return fmt_int(self)


class _Lift(Exception):
    pass


class _Rebase(Exception):
    def __init__(self, base):
        self.base = base


def base_bits(b: int) -> int:
    return max(1, (b - 1).bit_length())


Int = Union[int, SparseInt]


def wrap(x: SparseInt) -> Int:
    return x.to_int() if x.is_small() else x


def isgn(x: Int) -> int:
    if isinstance(x, SparseInt):
        return x.sign()
    return (x > 0) - (x < 0)


def to_sparse(x: Int, base: int) -> SparseInt:
    if isinstance(x, SparseInt):
        if x.base != base:
            raise ValueError("mixed bases")
        return x
    return SparseInt(base, [(0, int(x))])


def divmod_int(a: Int, b: Int, max_steps: int = 100000):
    """Floor division for Int values; sparse long division when either side is huge."""
    if isinstance(a, int) and isinstance(b, int):
        return divmod(a, b)
    if isgn(b) == 0:
        raise ZeroDivisionError
    base = a.base if isinstance(a, SparseInt) else b.base
    if isgn(b) < 0:
        qq, rr = divmod_int(-a, -b, max_steps)
        return qq, -rr
    B = to_sparse(b, base)
    eb, cb = B.terms[0]
    quot: Int = 0
    rem: Int = a
    steps = 0
    while isinstance(rem, SparseInt) or (isinstance(B, SparseInt) and rem != 0):
        R = to_sparse(rem, base)
        if not R.terms:
            break
        er, cr = R.terms[0]
        if er < eb:
            break
        if cr % cb:
            if er == eb:
                break
            # push the top term one digit lower and try again
            rem = wrap(SparseInt(base, [(er - 1, cr * base)] + list(R.terms[1:])))
        else:
            t = SparseInt.power(base, er - eb, cr // cb)
            quot = quot + t
            rem = rem - t * B
        steps += 1
        if steps > max_steps:
            raise NotImplementedError("sparse long division did not terminate in budget")
    # fix the remainder into [0, b)
    for _ in range(max_steps):
        if isgn(rem) < 0:
            rem, quot = rem + b, quot - 1
        elif isgn(rem - b) >= 0:
            if isinstance(rem, int) and isinstance(b, int):
                qq, rem = divmod(rem, b)
                quot = quot + qq
            else:
                rem, quot = rem - b, quot + 1
        else:
            return quot, rem
    raise NotImplementedError("remainder normalization did not converge")


def gcd_int(a: Int, b: Int) -> int:
    """gcd where at least one argument is small or a single term c*base^e."""
    a, b = abs_int(a), abs_int(b)
    if isinstance(a, int) and isinstance(b, int):
        return math.gcd(a, b)
    if isinstance(a, int):
        return math.gcd(a, b.mod_small(a)) if a else _gcd_zero(b)
    if isinstance(b, int):
        return math.gcd(b, a.mod_small(b)) if b else _gcd_zero(a)
    for mono, other in ((a, b), (b, a)):
        if len(mono.terms) == 1:
            return _gcd_mono(mono, other)
    raise NotImplementedError("gcd of two multi-term huge integers")


def _gcd_zero(x):
    raise NotImplementedError("gcd(0, huge) would be huge")


def _prime_factors(n: int) -> list[int]:
    out, d = [], 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


def _valuation(n: int, pr: int) -> int:
    v = 0
    while n and n % pr == 0:
        n //= pr
        v += 1
    return v


def _gcd_mono(mono: SparseInt, other: SparseInt) -> int:
    e, c = mono.terms[0]
    base = mono.base
    result = 1
    # part coprime to the base
    cc = c
    for pr in _prime_factors(base):
        while cc % pr == 0:
            cc //= pr
    result *= math.gcd(cc, other.mod_small(cc)) if cc > 1 else 1
    # prime-by-prime valuations for primes of the base
    for pr in _prime_factors(base):
        vb = _valuation(base, pr)
        v_mono = _valuation(c, pr) + e * vb
        v_other = _sparse_valuation(other, pr, vb)
        v = min(v_mono, v_other)
        if v > SMALL_BITS:
            raise NotImplementedError("gcd would be a huge prime power")
        result *= pr ** v
    return result


def _sparse_valuation(x: SparseInt, pr: int, vb: int) -> int:
    terms = sorted(x.terms)  # ascending exponent
    while terms:
        e0, c0 = terms[0]
        v0 = _valuation(c0, pr) + e0 * vb
        if len(terms) == 1:
            return v0
        e1 = terms[1][0]
        if e1 * vb > v0:
            # every other term is divisible by a strictly higher power
            return v0
        merged = c0 + terms[1][1] * x.base ** (e1 - e0)
        terms = ([(e0, merged)] if merged else []) + terms[2:]
    raise ValueError("valuation of zero")


def abs_int(x: Int) -> Int:
    return abs(x)


def int_to_iv(x: Int):
    """Tight outward-rounded interval around an integer of any size."""
    if isinstance(x, SparseInt):
        return x.to_iv()
    x = int(x)
    lo = from_man_exp(x, 0, iv.prec, round_floor)
    hi = from_man_exp(x, 0, iv.prec, round_ceiling)
    return iv.make_mpf((lo, hi))


def fmt_int(x: Int) -> str:
    """Decimal string for materializable integers; 'c*b^e+...' for huge sparse ones."""
    if not isinstance(x, SparseInt):
        x = int(x)
        if x.bit_length() < 12000:
            return str(x)
        x = SparseInt(10, _decimal_groups(x))
    parts = []
    for e, c in x.terms:
        s = f"{_sdec(c)}*{x.base}^{e}" if e else _sdec(c)
        parts.append(s if not parts or c < 0 else "+" + s)
    return "".join(parts) or "0"


def _sdec(n: int) -> str:
    return "-" + _dec_str(-n) if n < 0 else _dec_str(n)


def _dec_str(n: int) -> str:
    # chunked conversion sidesteps the interpreter's digit limit for str(int)
    if n.bit_length() < 12000:
        return str(n)
    half = n.bit_length() * 3 // 20
    hi, lo = divmod(n, 10 ** half)
    return _dec_str(hi) + _dec_str(lo).rjust(half, "0")


def _decimal_groups(x: int) -> list:
    """Nonzero runs of decimal digits as (exponent, coefficient) pairs, highest first."""
    sgn = -1 if x < 0 else 1
    digits = _dec_str(abs(x))
    n = len(digits)
    return [(n - m.end(), sgn * _parse_dec(m.group()))
            for m in re.finditer(r"[1-9]\d*?(?=0{8,}|$)", digits)]


def _parse_dec(s: str) -> int:
    if len(s) < 4000:
        return int(s)
    neg = s.startswith("-")
    s = s.lstrip("+-")
    half = len(s) // 2
    v = _parse_dec(s[:-half]) * 10 ** half + _parse_dec(s[-half:])
    return -v if neg else v


_TERM = re.compile(r"([+-]?\d+)(?:\*(\d+)\^(\d+))?")


def parse_int(s: str) -> Int:
    s = s.strip()
    if re.fullmatch(r"[+-]?\d+", s):
        return _parse_dec(s)
    terms, base, pos = [], None, 0
    while pos < len(s):
        m = _TERM.match(s, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse integer expression {s!r}")
        c = _parse_dec(m.group(1))
        if m.group(2):
            b = int(m.group(2))
            if base is not None and b != base:
                raise ValueError("mixed bases in integer expression")
            base = b
            terms.append((int(m.group(3)), c))
        else:
            terms.append((0, c))
        pos = m.end()
    return wrap(SparseInt(base or 10, terms))


# ---------------------------------------------------------------- rationals

class Q:
    """num/den over Int with den > 0; not reduced (gcd of huge numbers is out of reach)."""

    __slots__ = ("num", "den")

    def __init__(self, num: Int, den: Int = 1):
        s = isgn(den)
        if s == 0:
            raise ZeroDivisionError("Q with zero denominator")
        if s < 0:
            num, den = -num, -den
        self.num, self.den = num, den

    @staticmethod
    def of(x) -> "Q":
        if isinstance(x, Q):
            return x
        if isinstance(x, Fraction):
            return Q(x.numerator, x.denominator)
        if isinstance(x, (int, SparseInt)):
            return Q(x, 1)
        raise TypeError(f"cannot make an exact rational from {type(x).__name__}")

    def __add__(self, o):
        o = _q(o)
        if o is NotImplemented:
            return o
        return qnorm(self.num * o.den + o.num * self.den, self.den * o.den)

    __radd__ = __add__

    def __neg__(self):
        return qnorm(-self.num, self.den)

    def __sub__(self, o):
        o = _q(o)
        if o is NotImplemented:
            return o
        return qnorm(self.num * o.den - o.num * self.den, self.den * o.den)

    def __rsub__(self, o):
        return (-self) + o

    def __mul__(self, o):
        o = _q(o)
        if o is NotImplemented:
            return o
        return qnorm(self.num * o.num, self.den * o.den)

    __rmul__ = __mul__

    def __truediv__(self, o):
        o = _q(o)
        if o is NotImplemented:
            return o
        return qnorm(self.num * o.den, self.den * o.num)

    def __rtruediv__(self, o):
        return Q.of(o) / self

    def __pow__(self, n: int):
        return qnorm(self.num ** n, self.den ** n) if n >= 0 else qnorm(self.den ** -n, self.num ** -n)

    def sign(self) -> int:
        return isgn(self.num)

    def _cmp(self, o) -> int:
        o = _q(o)
        return isgn(self.num * o.den - o.num * self.den)

    def __eq__(self, o):
        if isinstance(o, (int, Fraction, Q, SparseInt)):
            return self._cmp(o) == 0
        return NotImplemented

    def __hash__(self):
        return hash(("Q", str(self.num), str(self.den)))

    def __lt__(self, o):
        return self._cmp(o) < 0

    def __le__(self, o):
        return self._cmp(o) <= 0

    def __gt__(self, o):
        return self._cmp(o) > 0

    def __ge__(self, o):
        return self._cmp(o) >= 0

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def __floor__(self):
        return divmod_int(self.num, self.den)[0]

    def __ceil__(self):
        qq, rr = divmod_int(self.num, self.den)
        return qq + (1 if isgn(rr) else 0)

    def to_iv(self):
        return int_to_iv(self.num) / int_to_iv(self.den)

    def __repr__(self):
        return f"Q({fmt_int(self.num)}/{fmt_int(self.den)})"

    def __str__(self):
        return f"{fmt_int(self.num)}/{fmt_int(self.den)}"


def _q(o):
    try:
        return Q.of(o)
    except TypeError:
        return NotImplemented


Real = Union[int, Fraction, Q]


def qnorm(num: Int, den: Int):
    """Fraction when both parts are small; Q otherwise."""
    if isinstance(num, int) and isinstance(den, int):
        return Fraction(num, den)
    return Q(num, den)


def qdiv(a, b):
    """Exact a/b for Int/Fraction/Q inputs."""
    if isinstance(a, (int, Fraction)) and isinstance(b, (int, Fraction)):
        return Fraction(a) / Fraction(b)
    return Q.of(a) / Q.of(b)


def floor_q(x) -> Int:
    if isinstance(x, (int, Fraction)):
        return math.floor(x)
    return math.floor(Q.of(x))


def ceil_q(x) -> Int:
    if isinstance(x, (int, Fraction)):
        return math.ceil(x)
    return math.ceil(Q.of(x))


def fmt_real(x) -> str:
    if isinstance(x, int):
        return fmt_int(x)
    if isinstance(x, Fraction):
        if x.denominator == 1:
            return fmt_int(x.numerator)
        return fmt_int(x.numerator) + "/" + fmt_int(x.denominator)
    if isinstance(x, SparseInt):
        return fmt_int(x)
    return str(x)


def parse_real(s: str):
    s = s.strip()
    if "/" in s:
        a, b = s.split("/", 1)
        n, d = parse_int(a), parse_int(b)
        return qnorm(n, d)
    if re.fullmatch(r"[+-]?\d*\.\d+(e[+-]?\d+)?|[+-]?\d+e[+-]?\d+", s, re.I):
        return Fraction(s)
    return parse_int(s)


def real_to_iv(x):
    if isinstance(x, Q):
        return x.to_iv()
    if isinstance(x, Fraction):
        return int_to_iv(x.numerator) / int_to_iv(x.denominator)
    if isinstance(x, (int, SparseInt)):
        return int_to_iv(x)
    raise TypeError(f"not an exact real: {type(x).__name__}")


# ------------------------------------------------------ certified comparisons

Enclosure = Callable[[], object]


def certified_cmp(lhs: Enclosure, rhs: Enclosure, max_prec: int = MAX_PREC) -> int:
    """Sign of lhs - rhs from interval enclosures evaluated at rising precision.

    ``lhs`` and ``rhs`` are zero-argument callables building mpmath intervals using the
    ambient precision.  Raises Undecidable if they still overlap at ``max_prec`` bits.
    """
    prec = 64
    while prec <= max_prec:
        with ivprec(prec):
            a, b = lhs(), rhs()
            if a.b < b.a:
                return -1
            if a.a > b.b:
                return 1
            if a.a == a.b == b.a == b.b:
                return 0
        prec *= 2
    raise Undecidable("enclosures overlap at maximum precision")


def _raw_fraction(raw) -> Fraction:
    sign, man, exp, _ = raw
    if not man:
        return Fraction(0)
    v = Fraction(int(man)) * (Fraction(2) ** int(exp))
    return -v if sign else v


def iv_endpoints(x) -> tuple[Fraction, Fraction]:
    """Exact rational endpoints of an mpmath interval."""
    lo, hi = x._mpi_
    return _raw_fraction(lo), _raw_fraction(hi)


def iv_log10(enc: Enclosure, prec: int = 128) -> float:
    with ivprec(prec):
        v = iv.log10(enc())
        return float(v.mid)


def sci(enc: Enclosure, digits: int = 17) -> str:
    """Decimal scientific notation of an enclosure's midpoint, safe for huge exponents."""
    with ivprec(max(96, 4 * digits + 64)):
        x = enc()
        if x.a == 0 and x.b == 0:
            return "0"
        sgn = "-" if x.b < 0 else ""
        ax = -x if x.b < 0 else x
        lg = iv.log10(ax)
        e = int(math.floor(float(lg.mid)))
        mant = iv.mpf(10) ** (lg - e)
        m = float(mant.mid)
        if m >= 10:
            m, e = m / 10, e + 1
        return f"{sgn}{m:.{digits - 1}f}e{e}"


__all__ = [
    "SparseInt", "Q", "Int", "Real", "Undecidable", "wrap", "isgn", "to_sparse", "divmod_int",
    "gcd_int", "int_to_iv", "fmt_int", "parse_int", "qnorm", "qdiv", "floor_q", "ceil_q",
    "fmt_real", "parse_real", "real_to_iv", "certified_cmp", "iv_endpoints", "iv_log10", "sci", "ivprec",
]

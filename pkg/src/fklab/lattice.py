"""Periodic configurations, finite windows, the shift action and order relations."""
from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

DEFAULT_TOL = 1e-9


class WindowError(ValueError):
    """Raised when a finite window does not cover the requested indices."""


def _as_values(values) -> np.ndarray:
    vals = list(values) if not isinstance(values, np.ndarray) else values
    if isinstance(vals, np.ndarray):
        arr = vals.astype(float) if vals.dtype != object else vals.copy()
    elif any(isinstance(v, Fraction) for v in vals):
        arr = np.array([Fraction(v) for v in vals], dtype=object)
    else:
        arr = np.array(vals, dtype=float)
    arr.setflags(write=False)
    return arr


class PeriodicConfig:
    """An element of X_{p,q}: x_{i+p} = x_i + q, stored on slots 1..p.

    Values may be floats or Fractions; Fraction input keeps every
    derived quantity exact.
    """

    __slots__ = ("p", "q", "values")

    def __init__(self, p: int, q: int, values):
        p, q = int(p), int(q)
        if p < 1:
            raise ValueError("period p must be >= 1")
        arr = _as_values(values)
        if arr.shape != (p,):
            raise ValueError(f"expected {p} values, got shape {arr.shape}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):
        raise AttributeError("PeriodicConfig is immutable")

    @property
    def exact(self) -> bool:
        return self.values.dtype == object

    def at(self, i):
        """Value at integer index i (scalar or integer array)."""
        if np.ndim(i) == 0:
            i = int(i)
            n, slot = divmod(i - 1, self.p)
            return self.values[slot] + self.q * n
        idx = np.asarray(i, dtype=np.int64)
        n, slot = np.divmod(idx - 1, self.p)
        return self.values[slot] + self.q * n

    def __getitem__(self, i):
        return self.at(i)

    def span(self, lo: int, hi: int) -> np.ndarray:
        """Values at indices lo..hi inclusive."""
        return self.at(np.arange(lo, hi + 1))

    def window(self, lo: int, hi: int) -> "SeqWindow":
        return SeqWindow(lo, self.span(lo, hi))

    def extend(self, n: int) -> "PeriodicConfig":
        """The same sequence viewed in X_{np,nq}."""
        return PeriodicConfig(n * self.p, n * self.q, self.span(1, n * self.p))

    def reduced(self) -> "PeriodicConfig":
        """Restriction to the gcd-reduced period (p/g, q/g)."""
        g = math.gcd(self.p, self.q)
        return PeriodicConfig(self.p // g, self.q // g, self.values[: self.p // g])

    def __add__(self, c) -> "PeriodicConfig":
        return PeriodicConfig(self.p, self.q, self.values + c)

    def __sub__(self, c) -> "PeriodicConfig":
        return PeriodicConfig(self.p, self.q, self.values - c)

    def __eq__(self, other) -> bool:
        return (isinstance(other, PeriodicConfig) and self.p == other.p
                and self.q == other.q and bool(np.all(self.values == other.values)))

    def __hash__(self):
        return hash((self.p, self.q, tuple(self.values.tolist())))

    def __repr__(self) -> str:
        return f"PeriodicConfig(p={self.p}, q={self.q}, values={self.values.tolist()!r})"

    # serialization
    def to_dict(self) -> dict:
        if self.exact:
            vals = [str(v) for v in self.values]
        else:
            vals = [float(v) for v in self.values]
        return {"p": self.p, "q": self.q, "values": vals}

    @classmethod
    def from_dict(cls, d: dict) -> "PeriodicConfig":
        vals = d["values"]
        if any(isinstance(v, str) for v in vals):
            vals = [Fraction(v) for v in vals]
        return cls(int(d["p"]), int(d["q"]), vals)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "PeriodicConfig":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "value"])
        for i, v in enumerate(self.values, start=1):
            w.writerow([i, str(v) if self.exact else repr(float(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, q: int = 0) -> "PeriodicConfig":
        """Parse `i,value` rows. The height q is not part of the CSV form."""
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["i", "value"]:
            raise ValueError("CSV must start with header 'i,value'")
        body = [r for r in rows[1:] if r]
        idx = [int(r[0]) for r in body]
        if idx != list(range(1, len(body) + 1)):
            raise ValueError("CSV rows must list slots 1..p in order")
        raw = [r[1].strip() for r in body]
        vals = [Fraction(s) if "/" in s else float(s) for s in raw]
        return cls(len(vals), q, vals)


@dataclass(frozen=True)
class SeqWindow:
    """Finite restriction of a sequence: values[t] sits at index lo + t."""

    lo: int
    values: np.ndarray

    def __post_init__(self):
        arr = _as_values(self.values)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("window must be a nonempty 1-d sequence")
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "lo", int(self.lo))

    @property
    def hi(self) -> int:
        return self.lo + len(self.values) - 1

    def covers(self, a: int, b: int) -> bool:
        return self.lo <= a and b <= self.hi

    def at(self, i):
        if np.ndim(i) == 0:
            i = int(i)
            if not self.lo <= i <= self.hi:
                raise WindowError(f"index {i} outside window [{self.lo}, {self.hi}]")
            return self.values[i - self.lo]
        idx = np.asarray(i, dtype=np.int64)
        if idx.size and (idx.min() < self.lo or idx.max() > self.hi):
            raise WindowError(
                f"indices [{idx.min()}, {idx.max()}] outside window [{self.lo}, {self.hi}]")
        return self.values[idx - self.lo]

    def __getitem__(self, i):
        return self.at(i)

    def span(self, lo: int, hi: int) -> np.ndarray:
        return self.at(np.arange(lo, hi + 1))


class RigidRotation:
    """Generator for the rigid rotation x_i = xi0 + omega*i (never materialized)."""

    def __init__(self, omega: float, xi0: float = 0.0):
        self.omega = float(omega)
        self.xi0 = float(xi0)

    def at(self, i):
        if np.ndim(i) == 0:
            return self.xi0 + self.omega * int(i)
        return self.xi0 + self.omega * np.asarray(i, dtype=np.int64)

    def __getitem__(self, i):
        return self.at(i)

    def span(self, lo: int, hi: int) -> np.ndarray:
        return self.at(np.arange(lo, hi + 1))

    def window(self, lo: int, hi: int) -> SeqWindow:
        return SeqWindow(lo, self.span(lo, hi))


class Ordering(enum.Enum):
    EQUAL = "Equal"
    STRICTLY_BELOW = "StrictlyBelow"
    WEAKLY_BELOW = "WeaklyBelow"
    WEAKLY_ABOVE = "WeaklyAbove"
    STRICTLY_ABOVE = "StrictlyAbove"
    INCOMPARABLE = "Incomparable"

    def flipped(self) -> "Ordering":
        return _FLIP[self]

    @property
    def below(self) -> bool:
        return self in (Ordering.STRICTLY_BELOW, Ordering.WEAKLY_BELOW)

    @property
    def above(self) -> bool:
        return self in (Ordering.STRICTLY_ABOVE, Ordering.WEAKLY_ABOVE)


_FLIP = {
    Ordering.EQUAL: Ordering.EQUAL,
    Ordering.STRICTLY_BELOW: Ordering.STRICTLY_ABOVE,
    Ordering.WEAKLY_BELOW: Ordering.WEAKLY_ABOVE,
    Ordering.WEAKLY_ABOVE: Ordering.WEAKLY_BELOW,
    Ordering.STRICTLY_ABOVE: Ordering.STRICTLY_BELOW,
    Ordering.INCOMPARABLE: Ordering.INCOMPARABLE,
}


def shift(x, k: int, l: int):
    """(tau_{k,l} x)_i = x_{i-k} + l."""
    k, l = int(k), int(l)
    if isinstance(x, PeriodicConfig):
        return PeriodicConfig(x.p, x.q, x.span(1 - k, x.p - k) + l)
    if isinstance(x, SeqWindow):
        return SeqWindow(x.lo + k, x.values + l)
    raise TypeError(f"cannot shift {type(x).__name__}")


def classify_differences(d: np.ndarray, tol: float = DEFAULT_TOL) -> Ordering:
    """Ordering of x relative to y given d = y - x sampled over a full period."""
    big = d > tol
    small = d < -tol
    if not big.any() and not small.any():
        return Ordering.EQUAL
    if not small.any():
        return Ordering.STRICTLY_BELOW if big.all() else Ordering.WEAKLY_BELOW
    if not big.any():
        return Ordering.STRICTLY_ABOVE if small.all() else Ordering.WEAKLY_ABOVE
    return Ordering.INCOMPARABLE


def compare(x: PeriodicConfig, y: PeriodicConfig, tol: float = DEFAULT_TOL) -> Ordering:
    """Where x sits relative to y, decided on one period of the common refinement."""
    if Fraction(x.q, x.p) != Fraction(y.q, y.p):
        # different rotation numbers always cross eventually
        return Ordering.INCOMPARABLE
    n = x.p * y.p // math.gcd(x.p, y.p)
    idx = np.arange(1, n + 1)
    d = y.at(idx) - x.at(idx)
    if d.dtype == object:
        d = np.array([float(v) for v in d]) if tol > 0 else d
    return classify_differences(d, tol)


def birkhoff_band(p: int, q: int):
    """The (k,l) pairs whose translates have to be checked for the Birkhoff property."""
    for k in range(p):
        base = Fraction(k * q, p)
        for l in range(math.floor(base) - 1, math.ceil(base) + 2):
            yield k, l


def is_birkhoff_bruteforce(x: PeriodicConfig, tol: float = DEFAULT_TOL):
    """Check every translate in the band; O(p^2) and only meant for small p."""
    for k, l in birkhoff_band(x.p, x.q):
        if compare(shift(x, k, l), x, tol) is Ordering.INCOMPARABLE:
            return False, (k, l)
    return True, None


def elementary_pair(p: int, q: int) -> tuple[int, int]:
    """(s,t) with p*t - q*s = 1 and 0 <= s < p."""
    if p < 1 or math.gcd(p, q) != 1:
        raise ValueError(f"need p >= 1 and gcd(p, q) = 1, got ({p}, {q})")
    if p == 1:
        return 0, 1
    s = (-pow(q, -1, p)) % p
    t = (1 + q * s) // p
    return s, t


def is_birkhoff(x: PeriodicConfig, tol: float = DEFAULT_TOL):
    """Birkhoff test with witness.

    Every translate tau_{k,l} acts on X_{p,q} as a power of the elementary
    translate U (or fixes x when pl = qk), so it suffices to check that x is
    periodic for the reduced pair and that Ux >= x. The witness, when one is
    returned, lies in the band checked by `is_birkhoff_bruteforce`.
    """
    g = math.gcd(x.p, x.q)
    p0, q0 = x.p // g, x.q // g
    if g > 1:
        d = shift(x, p0, q0).values - x.values
        d = np.asarray(d, dtype=float)
        if np.abs(d).max() > tol:
            return False, (p0, q0)
    s, t = elementary_pair(p0, q0)
    d = np.asarray(shift(x, s, t).values - x.values, dtype=float)
    if d.min() < -tol:
        return False, (s, t)
    return True, None


def rotation_bound_check(x: PeriodicConfig) -> float:
    """max over i in [0,p) of |x_i - x_0 - (q/p) i|."""
    i = np.arange(0, x.p)
    vals = np.asarray(x.at(i), dtype=float)
    return float(np.max(np.abs(vals - vals[0] - (x.q / x.p) * i)))


def l1_window(x, y, a: int, b: int):
    """Sum over j in [a,b] of |x_j - y_j|."""
    d = x.span(a, b) - y.span(a, b)
    return sum(abs(v) for v in d) if d.dtype == object else float(np.abs(d).sum())


def l1_period(x: PeriodicConfig, y: PeriodicConfig):
    """l1 norm of x - y over one period."""
    return l1_window(x, y, 1, x.p)


def _check_same_space(x: PeriodicConfig, y: PeriodicConfig):
    if (x.p, x.q) != (y.p, y.q):
        raise ValueError("configs live in different spaces X_{p,q}")


def min_config(x: PeriodicConfig, y: PeriodicConfig) -> PeriodicConfig:
    _check_same_space(x, y)
    return PeriodicConfig(x.p, x.q, np.minimum(x.values, y.values))


def max_config(x: PeriodicConfig, y: PeriodicConfig) -> PeriodicConfig:
    _check_same_space(x, y)
    return PeriodicConfig(x.p, x.q, np.maximum(x.values, y.values))


def linear_config(p: int, q: int, xi0=0.0) -> PeriodicConfig:
    """x_i = xi0 + (q/p) i."""
    if isinstance(xi0, Fraction):
        return PeriodicConfig(p, q, [xi0 + Fraction(q * i, p) for i in range(1, p + 1)])
    return PeriodicConfig(p, q, xi0 + (q / p) * np.arange(1, p + 1))


__all__: Sequence[str] = [
    "DEFAULT_TOL", "WindowError", "PeriodicConfig", "SeqWindow", "RigidRotation",
    "Ordering", "shift", "compare", "classify_differences", "birkhoff_band",
    "is_birkhoff", "is_birkhoff_bruteforce", "elementary_pair", "rotation_bound_check",
    "l1_window", "l1_period", "min_config", "max_config", "linear_config",
]

"""Extended orbits and their gaps, the elementary translate U, near-periodicity and confinement."""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .lattice import (PeriodicConfig, SeqWindow, WindowError, elementary_pair,
                      is_birkhoff, l1_period, shift)

ORBIT_TOL = 1e-12


def _frac(v):
    return v - math.floor(v)


@dataclass(frozen=True)
class ExtendedOrbit:
    """Sigma_x mod 1: sorted distinct points in [0, 1)."""

    base: PeriodicConfig
    points: tuple

    @property
    def exact(self) -> bool:
        return bool(self.points) and isinstance(self.points[0], Fraction)

    def to_dict(self) -> dict:
        pts = [str(v) for v in self.points] if self.exact else [float(v) for v in self.points]
        return {"base": self.base.to_dict(), "points": pts}


@dataclass(frozen=True)
class GapInterval:
    lo: float  # xi_minus
    hi: float  # xi_plus, possibly above 1 for the wrap-around gap
    endpoints_in_orbit: bool = True

    @property
    def length(self):
        return self.hi - self.lo

    @property
    def middle_half(self):
        w = self.length
        return self.lo + w / 4, self.hi - w / 4

    def contains(self, xi, strict: bool = True) -> bool:
        """xi mod 1 inside the gap (as a subset of the circle)."""
        t = _frac(xi - self.lo)
        return 0 < t < self.length if strict else 0 <= t <= self.length

    def to_dict(self) -> dict:
        if isinstance(self.lo, Fraction):
            return {"xi_minus": str(self.lo), "xi_plus": str(self.hi),
                    "length": str(self.length), "endpoints_in_orbit": self.endpoints_in_orbit}
        return {"xi_minus": float(self.lo), "xi_plus": float(self.hi),
                "length": float(self.length), "endpoints_in_orbit": self.endpoints_in_orbit}

    @classmethod
    def from_dict(cls, d: dict) -> "GapInterval":
        conv = Fraction if isinstance(d["xi_minus"], str) else float
        return cls(conv(d["xi_minus"]), conv(d["xi_plus"]), bool(d.get("endpoints_in_orbit", True)))


def extended_orbit(x: PeriodicConfig, tol: float = ORBIT_TOL) -> ExtendedOrbit:
    """{x_i mod 1 : i in [1, p]}, merged within tol (exactly for Fraction input)."""
    if x.exact:
        pts = sorted({_frac(v) for v in x.values})
        return ExtendedOrbit(x, tuple(pts))
    vals = np.sort(np.mod(np.asarray(x.values, dtype=float), 1.0))
    keep = [float(vals[0])]
    for v in vals[1:]:
        if v - keep[-1] > tol:
            keep.append(float(v))
    # the circle closes up: a point just below 1 may coincide with 0
    if len(keep) > 1 and keep[0] + 1.0 - keep[-1] <= tol:
        keep.pop()
    return ExtendedOrbit(x, tuple(keep))


def find_gaps(o: ExtendedOrbit) -> list[GapInterval]:
    """Complementary intervals of the orbit on the circle, longest first."""
    pts = list(o.points)
    one = Fraction(1) if o.exact else 1.0
    gaps = []
    for a, b in zip(pts, pts[1:] + [pts[0] + one]):
        gaps.append(GapInterval(a, b, True))
    gaps.sort(key=lambda g: (-g.length, g.lo))
    return gaps


def max_gap(x: PeriodicConfig) -> GapInterval:
    return find_gaps(extended_orbit(x))[0]


def translate_U(p: int, q: int, x: PeriodicConfig, power: int = 1) -> PeriodicConfig:
    """U^power x with U = tau_{s,t}, p t - q s = 1."""
    s, t = elementary_pair(p, q)
    return shift(x, power * s, power * t)


def tauaction_check(x: PeriodicConfig, k: int, l: int):
    """(||tau_{k,l} x - x||_{l1(p)}, |p l - q k|)."""
    return l1_period(shift(x, k, l), x), abs(x.p * l - x.q * k)


# ------------------------------------------------------ near-periodicity

def _values(x, lo: int, hi: int) -> np.ndarray:
    try:
        return np.asarray(x.span(lo, hi), dtype=float)
    except WindowError:
        raise
    except AttributeError:
        return np.asarray([x(i) for i in range(lo, hi + 1)], dtype=float)


@dataclass
class NearPeriodicity:
    i0: int
    achieved: float
    bound: float
    a: int
    pairs: int
    scan: list  # (i0, achieved) for every i0 in (-p, 0]

    @property
    def ok(self) -> bool:
        return self.achieved <= self.bound

    def to_dict(self) -> dict:
        return {"i0": self.i0, "achieved": self.achieved, "bound": self.bound, "a": self.a,
                "pairs": self.pairs, "ok": self.ok,
                "scan": [{"i0": i, "achieved": v} for i, v in self.scan]}


def near_periodicity_verify(x, omega, p: int, q: int, r: int, i1: int, i2: int) -> NearPeriodicity:
    """Smallest i0 in (-p, 0] with max_{m,n} ||tau^{-m} x - tau^{-n} x||_{l1[i0-r, i0+r-1]} <= 2 r a / p.

    The admissible m are those for which [i0 - r + m p, i0 + r - 1 + m p] lies in [i1, i2].
    """
    from .numbertheory import as_rotation, budget_a
    elementary_pair(p, q)
    om = as_rotation(omega)
    a = int(budget_a(p, q, om, i2 - i1))
    bound = 2 * r * a / p
    vals = _values(x, i1, i2)
    scan = []
    best = None
    pairs_total = 0
    for i0 in range(-p + 1, 1):
        ms = [m for m in range(math.ceil((i1 - i0 + r) / p), math.floor((i2 - i0 - r + 1) / p) + 1)]
        if len(ms) < 1:
            continue
        js = np.arange(i0 - r, i0 + r)
        # z_m(j) = x_{j + m p} - m q
        Z = np.array([vals[js + m * p - i1] - m * q for m in ms])
        diff = np.abs(Z[:, None, :] - Z[None, :, :]).sum(axis=2)
        achieved = float(diff.max())
        pairs_total = max(pairs_total, len(ms) * len(ms))
        scan.append((i0, achieved))
        if best is None and achieved <= bound:
            best = (i0, achieved)
    if not scan:
        raise ValueError(f"window [{i1}, {i2}] too short for any admissible (m, n) at r = {r}")
    if best is None:
        i0, achieved = min(scan, key=lambda t: (t[1], t[0]))
    else:
        i0, achieved = best
    return NearPeriodicity(i0, achieved, bound, a, pairs_total, scan)


def ul_allowance_scan(y: PeriodicConfig, a: int, r: int):
    """Pigeonhole check: min over i0 in (-p, 0] of sum_{j=i0-r}^{i0+r-1} |(U^a y)_j - y_j|."""
    Uy = translate_U(y.p, y.q, y, a)
    out = []
    for i0 in range(-y.p + 1, 1):
        d = np.abs(np.asarray(Uy.span(i0 - r, i0 + r - 1), dtype=float)
                   - np.asarray(y.span(i0 - r, i0 + r - 1), dtype=float))
        out.append((i0, float(d.sum())))
    return min(out, key=lambda t: (t[1], t[0])), 2 * r * a / y.p


# ------------------------------------------------------------- confinement

@dataclass
class PsiTable:
    """Nondecreasing psi on one period: psi(x_i1 + phase) for phase in [0, 1)."""

    origin: float
    phases: list  # Fractions in [0, 1), sorted
    values: list  # floats, psi(origin + phase)
    extension: str = "step"

    def __call__(self, phase) -> float:
        """psi(origin + phase) for an exact phase (Fraction)."""
        n = math.floor(phase)
        f = phase - n
        t = bisect.bisect_right(self.phases, f) - 1
        if self.extension == "step" or t == len(self.phases) - 1 and f == self.phases[t]:
            return self.values[t] + n
        if self.phases[t] == f:
            return self.values[t] + n
        # linear interpolation towards the next breakpoint (wrapping to the next period)
        if t + 1 < len(self.phases):
            p0, p1, v0, v1 = self.phases[t], self.phases[t + 1], self.values[t], self.values[t + 1]
        else:
            p0, p1, v0, v1 = self.phases[t], self.phases[0] + 1, self.values[t], self.values[0] + 1
        lam = float((f - p0) / (p1 - p0))
        return v0 + lam * (v1 - v0) + n

    def monotone(self) -> bool:
        v = self.values
        return all(a <= b for a, b in zip(v, v[1:])) and (not v or v[-1] <= v[0] + 1)

    def rows(self) -> list:
        return [(float(self.origin + ph), float(ph), val) for ph, val in zip(self.phases, self.values)]

    def to_csv(self) -> str:
        lines = ["xi,phase,psi"]
        lines += [f"{a!r},{b!r},{c!r}" for a, b, c in self.rows()]
        return "\n".join(lines) + "\n"


@dataclass
class ConfinementResult:
    y: PeriodicConfig
    a: int
    psi_table: PsiTable
    slack: float
    lower_slack: float
    upper_slack: float
    mirrored: bool

    @property
    def ok(self) -> bool:
        return self.slack >= -1e-12

    def to_dict(self) -> dict:
        return {"y": self.y.to_dict(), "a": self.a, "slack": self.slack,
                "lower_slack": self.lower_slack, "upper_slack": self.upper_slack,
                "mirrored": self.mirrored, "birkhoff": is_birkhoff(self.y)[0],
                "psi_breakpoints": len(self.psi_table.phases), "ok": self.ok}


def _omega_fraction(om, bits: int = 96) -> Fraction:
    """Exact rational within 2^-bits of omega, used to order the phases."""
    return om.approx_fraction(bits)


def confine(x, omega, p: int, q: int, i1: int, i2: int, extension: str = "step") -> ConfinementResult:
    """Periodic Birkhoff y with y_j <= x_j <= (U^a y)_j on [i1, i2].

    psi sends x_i1 + omega (k - i1) + l to x_k + l for the sampled k in [i1, i2]
    and is extended to the circle either as a left-continuous step ("step")
    or by linear interpolation ("linear").
    """
    from .numbertheory import as_rotation, budget_a
    elementary_pair(p, q)
    if extension not in ("step", "linear"):
        raise ValueError("extension must be 'step' or 'linear'")
    om = as_rotation(omega)
    try:
        vals = _values(x, i1, i2)
    except WindowError as e:
        raise WindowError(f"sampled window does not cover [{i1}, {i2}]: {e}") from None
    a = int(budget_a(p, q, om, i2 - i1))
    w = _omega_fraction(om)
    # table on one period, keyed by the phase omega (k - i1) mod 1
    table = {}
    for k in range(i1, i2 + 1):
        lift = w * (k - i1)
        n = math.floor(lift)
        ph = lift - n
        v = float(vals[k - i1]) - n
        table.setdefault(ph, v)
    phases = sorted(table)
    psi = PsiTable(float(vals[0]), phases, [table[ph] for ph in phases], extension)
    mirrored = Fraction(q, p) > w
    # base linear sequence x_i1 + (q/p)(j - i1), shifted down by a/p in the mirrored case
    offset = Fraction(-a, p) if mirrored else Fraction(0)

    def y_at(j: int) -> float:
        return psi(Fraction(q * (j - i1), p) + offset)

    y = PeriodicConfig(p, q, [y_at(j) for j in range(1, p + 1)])
    Uy = translate_U(p, q, y, a)
    js = np.arange(i1, i2 + 1)
    lower = vals - np.asarray(y.at(js), dtype=float)
    upper = np.asarray(Uy.at(js), dtype=float) - vals
    lo_s, up_s = float(lower.min()), float(upper.min())
    return ConfinementResult(y, a, psi, min(lo_s, up_s), lo_s, up_s, mirrored)


def proxy_defect(x: PeriodicConfig, p: int, q: int) -> float:
    """How far a high-period proxy is from being (p, q)-periodic over one of its periods."""
    d = np.asarray(shift(x, p, q).values, dtype=float) - np.asarray(x.values, dtype=float)
    return float(np.abs(d).max())


__all__ = [
    "ExtendedOrbit", "GapInterval", "extended_orbit", "find_gaps", "max_gap", "translate_U",
    "tauaction_check", "NearPeriodicity", "near_periodicity_verify", "ul_allowance_scan",
    "PsiTable", "ConfinementResult", "confine", "proxy_defect",
]

"""Smooth bumps supported on an orbit gap, perturbed families, and periodic destruction.

The transition function is h(s) = expit(1/(1-s) - 1/s) on (0, 1), extended by 0 and 1.
Its derivatives come from Faa di Bruno's formula: the derivatives of expit are
polynomials in expit itself, and those of u(s) = 1/(1-s) - 1/s are explicit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from mpmath import iv
from scipy.special import expit

from .bigint import ivprec
from .birkhoff import GapInterval, extended_orbit, find_gaps
from .lattice import PeriodicConfig, linear_config, shift
from .minimize import (MinimizeResult, canonical_translate, minimize_periodic, minimizer_set,
                       tau_witness)
from .potentials import LocalPotentialFamily, OnsiteSplit, periodic_action

# below this argument the step is smaller than the least positive double
UNDERFLOW_S = 1.0 / 740.0


# ------------------------------------------------------------ polynomials

@lru_cache(maxsize=None)
def expit_poly(m: int) -> tuple:
    """Integer coefficients c with d^m/du^m expit(u) = sum_i c_i expit(u)^i."""
    if m < 1:
        raise ValueError("m >= 1")
    c = [0, 1, -1]
    for _ in range(m - 1):
        der = [i * c[i] for i in range(1, len(c))]  # P'(sigma), index shifted down
        out = [0] * (len(der) + 2)
        for i, a in enumerate(der):
            out[i + 1] += a
            out[i + 2] -= a
        c = out
    while len(c) > 1 and c[-1] == 0:
        c.pop()
    return tuple(c)


def _poly_eval(coefs, x):
    acc = 0 * x
    for c in reversed(coefs):
        acc = acc * x + c
    return acc


def bell_table(n: int, xs):
    """Partial Bell polynomials B[j][m](x_1..x_{j-m+1}) for j, m <= n.

    xs[i] holds x_{i+1}; the entries may be floats, arrays or intervals.
    """
    zero = 0 * xs[0]
    B = [[zero for _ in range(n + 1)] for _ in range(n + 1)]
    B[0][0] = zero + 1
    for j in range(1, n + 1):
        for m in range(1, j + 1):
            acc = zero
            for i in range(1, j - m + 2):
                acc = acc + math.comb(j - 1, i - 1) * xs[i - 1] * B[j - i][m - 1]
            B[j][m] = acc
    return B


# --------------------------------------------------------- the step function

def _u_derivs_left(t: np.ndarray, n: int) -> list:
    """u^{(j)}(t), j = 1..n, for u(t) = 1/(1-t) - 1/t."""
    out = []
    for j in range(1, n + 1):
        out.append(math.factorial(j) * ((1 - t) ** (-j - 1) - (-1) ** j * t ** (-j - 1)))
    return out


def _h_left(t: np.ndarray, n: int) -> np.ndarray:
    """h^{(0..n)} at points t in [UNDERFLOW_S, 1/2]."""
    u = 1.0 / (1.0 - t) - 1.0 / t
    sig = expit(u)
    res = np.zeros((n + 1,) + t.shape)
    res[0] = sig
    if n == 0:
        return res
    xs = _u_derivs_left(t, n)
    B = bell_table(n, xs)
    P = [None] + [_poly_eval(expit_poly(m), sig) for m in range(1, n + 1)]
    for j in range(1, n + 1):
        res[j] = sum(P[m] * B[j][m] for m in range(1, j + 1))
    return res


def smooth_step(s, n: int = 0) -> np.ndarray:
    """Rows h, h', ..., h^{(n)} of the C-infinity step (0 for s <= 0, 1 for s >= 1)."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.zeros((n + 1,) + s.shape)
    out[0][s >= 1] = 1.0
    left = (s > 0) & (s <= 0.5)
    right = (s > 0.5) & (s < 1)
    lt = left & (s >= UNDERFLOW_S)
    if lt.any():
        out[:, lt] = _h_left(s[lt], n)
    rt = right & (1 - s >= UNDERFLOW_S)
    if rt.any():
        vals = _h_left(1 - s[rt], n)
        out[0, rt] = 1 - vals[0]
        for j in range(1, n + 1):
            out[j, rt] = (-1) ** (j + 1) * vals[j]
    tiny = right & (1 - s < UNDERFLOW_S)
    out[0, tiny] = 1.0
    return out


def unit_bump(t, n: int = 0) -> np.ndarray:
    """Rows of psi(t) = h(4t) h(4 - 4t) and its derivatives; 1 on [1/4, 3/4], 0 off (0, 1)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros((n + 1,) + t.shape)
    lo = (t > 0) & (t < 0.25)
    hi = (t > 0.75) & (t < 1)
    mid = (t >= 0.25) & (t <= 0.75)
    out[0, mid] = 1.0
    if lo.any():
        v = smooth_step(4 * t[lo], n)
        for j in range(n + 1):
            out[j, lo] = 4.0 ** j * v[j]
    if hi.any():
        v = smooth_step(4 - 4 * t[hi], n)
        for j in range(n + 1):
            out[j, hi] = (-4.0) ** j * v[j]
    return out


# ------------------------------------------------------ certified constant

def _iv_expit(u):
    return 1 / (1 + iv.exp(-u))


def _h_cell_bound(a: float, b: float, n: int) -> float:
    """Upper bound of |h^{(n)}| on [a, b], 0 < a < b <= 1/2, by interval arithmetic."""
    A, Bv = iv.mpf(a), iv.mpf(b)
    u = iv.mpf([(1 / (1 - A) - 1 / A).a, (1 / (1 - Bv) - 1 / Bv).b])
    sig = iv.mpf([_iv_expit(u.a).a, _iv_expit(u.b).b])
    xs = []
    for j in range(1, n + 1):
        t1 = iv.mpf([((1 - A) ** (-j - 1)).a, ((1 - Bv) ** (-j - 1)).b])
        t2 = iv.mpf([(Bv ** (-j - 1)).a, (A ** (-j - 1)).b])
        xs.append(math.factorial(j) * (t1 - (-1) ** j * t2))
    B = bell_table(n, xs)
    total = iv.mpf(0)
    for m in range(1, n + 1):
        total = total + _poly_eval(expit_poly(m), sig) * B[n][m]
    return _up(max(abs(total.a), abs(total.b)))


def _up(v) -> float:
    # round an mpf outward to the next double
    return float(np.nextafter(float(v), np.inf))


def _h_point(s: float, n: int) -> float:
    S = iv.mpf(s)
    u = 1 / (1 - S) - 1 / S
    sig = _iv_expit(u)
    xs = [math.factorial(j) * ((1 - S) ** (-j - 1) - (-1) ** j * S ** (-j - 1)) for j in range(1, n + 1)]
    B = bell_table(n, xs)
    total = iv.mpf(0)
    for m in range(1, n + 1):
        total = total + _poly_eval(expit_poly(m), sig) * B[n][m]
    return float(min(abs(total.a), abs(total.b)))


def _tail_bound(n: int, v0: float) -> float:
    """Upper bound of |h^{(n)}(s)| on (0, 1/v0], valid when v0 >= 2n and v0 >= 2."""
    # |u^{(j)}| <= 2 j! v^{j+1}; Bell polynomials are homogeneous of degree n+m in v
    consts = [2 * math.factorial(j) for j in range(1, n + 1)]
    B = bell_table(n, consts)
    V = iv.mpf(v0)
    total = iv.mpf(0)
    for m in range(1, n + 1):
        l1 = sum(abs(c) for c in expit_poly(m))
        total = total + l1 * B[n][m] * V ** (n + m)
    pref = iv.exp(1 / (1 - 1 / V)) * iv.exp(-V)
    return _up((pref * total).b)


@dataclass(frozen=True)
class CkCertificate:
    k: int
    C_k: Fraction
    sup_bounds: tuple  # per n: certified upper bound of sup |h^{(n)}|
    lower_bounds: tuple  # per n: attained lower bound from point evaluations
    cells: int
    tail_start: float

    def to_dict(self) -> dict:
        return {"k": self.k, "C_k": str(self.C_k), "C_k_float": float(self.C_k),
                "sup_bounds": list(self.sup_bounds), "lower_bounds": list(self.lower_bounds),
                "cells": self.cells, "tail_start": self.tail_start,
                "method": "interval arithmetic over adaptive cells plus analytic tail"}


@lru_cache(maxsize=None)
def certify_Ck(k: int, rel_tol: float = 1e-2) -> CkCertificate:
    """C_k >= max_{n<=k} 4^n sup|h^{(n)}|, certified, rounded up to four significant digits."""
    if k < 0:
        raise ValueError("k >= 0")
    ups, lows, ncells, v_tail = [1.0], [1.0], 0, 0.0
    with ivprec(80):
        for n in range(1, k + 1):
            grid = np.linspace(0.02, 0.5, 401)
            lower = max(_h_point(float(s), n) for s in grid)
            v0 = max(64.0, 2.0 * n)
            while _tail_bound(n, v0) > rel_tol * lower:
                v0 *= 1.5
            v_tail = max(v_tail, v0)
            stack = [(1 / v0, 0.5)]
            upper = _tail_bound(n, v0)
            while stack:
                a, b = stack.pop()
                ub = _h_cell_bound(a, b, n)
                ncells += 1
                if ub <= lower * (1 + rel_tol):
                    upper = max(upper, ub)
                    continue
                mid = 0.5 * (a + b)
                lower = max(lower, _h_point(mid, n))
                if b - a < 1e-9:
                    upper = max(upper, ub)
                    continue
                stack.extend([(a, mid), (mid, b)])
            ups.append(upper)
            lows.append(lower)
    raw = max(4.0 ** n * ups[n] for n in range(k + 1))
    e = math.floor(math.log10(raw)) - 3
    scale = Fraction(10) ** e
    C = math.ceil(Fraction(raw) / scale) * scale
    if C < Fraction(raw):
        C += scale
    return CkCertificate(k, C, tuple(ups), tuple(lows), ncells, 1.0 / v_tail)


def certified_Ck(k: int) -> Fraction:
    return certify_Ck(k).C_k


# ------------------------------------------------------------------- bumps

@dataclass(frozen=True)
class BumpSpec:
    """phi(xi) = (eps w^k / C_k) psi(((xi - xi_minus) mod 1) / w), w = xi_plus - xi_minus."""

    xi_minus: float
    xi_plus: float
    eps: float
    k: int
    C_k: Fraction

    @property
    def width(self) -> float:
        return self.xi_plus - self.xi_minus

    @property
    def amplitude(self) -> float:
        return self.eps * self.width ** self.k / float(self.C_k)

    @property
    def plateau(self) -> tuple:
        w = self.width
        return self.xi_minus + w / 4, self.xi_plus - w / 4

    def _t(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.mod(xi - self.xi_minus, 1.0) / self.width

    def derivs(self, xi, n: int) -> np.ndarray:
        """Rows phi, phi', ..., phi^{(n)} at xi."""
        t = self._t(xi)
        rows = unit_bump(np.ravel(t), n)
        scale = self.amplitude * self.width ** -np.arange(n + 1, dtype=float)
        return (rows * scale[:, None]).reshape((n + 1,) + np.shape(t))

    def __call__(self, xi, n: int = 0):
        out = self.derivs(xi, n)[n]
        return float(out) if np.ndim(xi) == 0 else out

    def cnorm(self, n_grid: int = 10000) -> float:
        return sampled_cnorm(self, self.k, n_grid)

    def support_contains(self, xi) -> np.ndarray:
        t = self._t(xi)
        return (t > 0) & (t < 1)

    def to_dict(self) -> dict:
        return {"xi_minus": float(self.xi_minus), "xi_plus": float(self.xi_plus), "eps": float(self.eps),
                "k": self.k, "C_k": str(self.C_k), "amplitude": self.amplitude}

    @classmethod
    def from_dict(cls, d: dict) -> "BumpSpec":
        return cls(float(d["xi_minus"]), float(d["xi_plus"]), float(d["eps"]), int(d["k"]), Fraction(d["C_k"]))

    def to_csv(self, n_grid: int = 1000) -> str:
        return bump_csv(self, self.k, n_grid)


@dataclass(frozen=True)
class SumBump:
    """Sum of bumps with pairwise disjoint supports (the Cantor-set construction)."""

    bumps: tuple
    k: int
    eps: float

    def derivs(self, xi, n: int) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        out = np.zeros((n + 1,) + xi.shape)
        for b in self.bumps:
            out = out + b.derivs(xi, n)
        return out

    def __call__(self, xi, n: int = 0):
        out = self.derivs(xi, n)[n]
        return float(out) if np.ndim(xi) == 0 else out

    def cnorm(self, n_grid: int = 10000) -> float:
        return sampled_cnorm(self, self.k, n_grid)

    def to_dict(self) -> dict:
        return {"kind": "sum", "k": self.k, "eps": self.eps, "bumps": [b.to_dict() for b in self.bumps]}

    def to_csv(self, n_grid: int = 1000) -> str:
        return bump_csv(self, self.k, n_grid)


@dataclass(frozen=True)
class ZeroBump:
    k: int = 2

    def derivs(self, xi, n: int) -> np.ndarray:
        return np.zeros((n + 1,) + np.shape(xi))

    def __call__(self, xi, n: int = 0):
        return 0.0 if np.ndim(xi) == 0 else np.zeros(np.shape(xi))

    def cnorm(self, n_grid: int = 10000) -> float:
        return 0.0

    def to_dict(self) -> dict:
        return {"kind": "zero", "k": self.k}


def zero_bump(k: int = 2) -> ZeroBump:
    return ZeroBump(k)


def sampled_cnorm(phi, k: int, n_grid: int = 10000, extra=()) -> float:
    """max_{n<=k} max over a uniform grid on [0, 1) (plus extra points) of |phi^{(n)}|."""
    xi = np.concatenate([np.arange(n_grid) / n_grid, np.asarray(extra, dtype=float)])
    return float(np.abs(phi.derivs(xi, k)).max())


def bump_csv(phi, k: int, n_grid: int = 1000) -> str:
    xi = np.arange(n_grid) / n_grid
    rows = phi.derivs(xi, k)
    head = "xi," + ",".join(["phi"] + [f"phi_d{j}" for j in range(1, k + 1)])
    lines = [head] + [",".join(repr(float(v)) for v in (x, *rows[:, i])) for i, x in enumerate(xi)]
    return "\n".join(lines) + "\n"


def make_bump(xi_minus: float, xi_plus: float, eps: float, k: int) -> BumpSpec:
    xi_minus, xi_plus = float(xi_minus), float(xi_plus)
    if not (xi_minus < xi_plus < xi_minus + 1):
        raise ValueError("need xi_minus < xi_plus < xi_minus + 1")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if k < 2:
        raise ValueError("k must be >= 2")
    return BumpSpec(xi_minus, xi_plus, float(eps), int(k), certified_Ck(int(k)))


def bump_from_dict(d: dict):
    kind = d.get("kind", "bump")
    if kind == "zero":
        return ZeroBump(int(d.get("k", 2)))
    if kind == "sum":
        return SumBump(tuple(BumpSpec.from_dict(b) for b in d["bumps"]), int(d["k"]), float(d["eps"]))
    return BumpSpec.from_dict(d)


def _overlap(g: GapInterval, h: GapInterval) -> bool:
    a0 = float(g.lo) % 1.0
    b0 = float(h.lo) % 1.0
    la, lb = float(g.length), float(h.length)
    d = (b0 - a0) % 1.0
    return d < la or (1.0 - d) < lb


def cantor_bump(gaps: Sequence[GapInterval], eps: float, k: int, G: int = 64) -> SumBump:
    """Bumps on the G longest gaps; the gap of rank i (0-based) gets size eps * 2^-i."""
    ranked = sorted(gaps, key=lambda g: (-float(g.length), float(g.lo)))[:G]
    for i, g in enumerate(ranked):
        for h in ranked[:i]:
            if _overlap(g, h):
                raise ValueError(f"gaps {g} and {h} overlap")
    bumps = tuple(make_bump(float(g.lo), float(g.hi), eps * 2.0 ** -i, k) for i, g in enumerate(ranked))
    return SumBump(bumps, int(k), float(eps))


# -------------------------------------------------------- perturbed families

def perturb(F: LocalPotentialFamily, phi) -> LocalPotentialFamily:
    """Family with S_j + phi(x_j); phi acts on the centre coordinate only."""
    r = F.r

    def s0(w):
        w = np.asarray(w, dtype=float)
        return F.s0(w) + phi(w[..., r])

    def grad(w):
        w = np.asarray(w, dtype=float)
        g = np.array(F.window_grad(w), dtype=float, copy=True)
        g[..., r] += phi.derivs(w[..., r], 1)[1]
        return g

    def hess(w):
        w = np.asarray(w, dtype=float)
        h = np.array(F.window_hess(w), dtype=float, copy=True)
        h[..., r, r] += phi.derivs(w[..., r], 2)[2]
        return h

    split = None
    if F.split is not None:
        U, dU = F.split.onsite, F.split.onsite_prime
        split = OnsiteSplit(lambda x: U(x) + phi(x), lambda x: dU(x) + phi.derivs(x, 1)[1])

    bound = None
    if F.derivative_bound is not None:
        extra = phi.cnorm(2000) if not isinstance(phi, ZeroBump) else 0.0
        base_bound = F.derivative_bound
        bound = lambda D: (base_bound(D)[0] + extra, base_bound(D)[1] + extra)
    params = dict(F.params)
    params["bumps"] = list(params.get("bumps", [])) + [phi.to_dict()]
    return LocalPotentialFamily(F.name, F.r, s0, grad, hess, params, split, F.builtin, bound)


def family_with_bumps(spec: dict) -> LocalPotentialFamily:
    """Rebuild a (possibly perturbed) built-in family from its spec."""
    from .potentials import family_from_spec
    base = {k: v for k, v in spec.items() if k != "bumps"}
    F = family_from_spec(base)
    for b in spec.get("bumps", []):
        F = perturb(F, bump_from_dict(b))
    return F


# ---------------------------------------------------- periodic destruction

def tau_distance(x: PeriodicConfig, y: PeriodicConfig) -> tuple[float, tuple[int, int]]:
    """min over shifts (k, l) of sup |tau_{k,l} y - x| over one period."""
    xv = np.asarray(x.values, dtype=float)
    best = (math.inf, (0, 0))
    for k in range(-x.p + 1, x.p):
        sy = np.asarray(shift(y, k, 0).values, dtype=float)
        l = int(round(float(np.mean(xv - sy))))
        for ll in (l - 1, l, l + 1):
            d = float(np.abs(sy + ll - xv).max())
            if d < best[0]:
                best = (d, (k, ll))
    return best


def plateau_probe(y: PeriodicConfig, gap: GapInterval, M: int, sites: Sequence[int], frac: float = 0.5):
    """y extended to M periods with the given sites moved to a plateau point of the gap."""
    Y = y.extend(M) if hasattr(y, "extend") else y
    vals = np.array(np.asarray(Y.values, dtype=float), copy=True)
    w = float(gap.length)
    target = float(gap.lo) + w / 4 + frac * (w / 2)
    for s in sites:
        idx = (s - 1) % Y.p
        v = vals[idx]
        vals[idx] = target + round(v - target)
    return PeriodicConfig(Y.p, Y.q, vals)


@dataclass
class DestructionReport:
    family: dict
    p: int
    q: int
    eps: float
    k: int
    C_k: str
    y_min: PeriodicConfig
    y_action: float
    gap: GapInterval
    bump: BumpSpec
    action_unchanged: float
    reminimization: list
    max_tau_distance: float
    all_translates: bool
    identification_tol: float
    probes: list
    seed: int
    n_starts: int

    @property
    def ok(self) -> bool:
        return self.all_translates and all(p["ok"] for p in self.probes)

    def to_dict(self) -> dict:
        return {
            "family": self.family, "p": self.p, "q": self.q, "eps": self.eps, "k": self.k, "C_k": self.C_k,
            "y_min": self.y_min.to_dict(), "y_min_action": self.y_action, "gap": self.gap.to_dict(),
            "bump": self.bump.to_dict(), "action_change_at_y_min": self.action_unchanged,
            "reminimization": self.reminimization, "max_tau_distance": self.max_tau_distance,
            "identification_tol": self.identification_tol, "all_tau_translates": self.all_translates,
            "probes": self.probes, "seed": self.seed, "n_starts": self.n_starts, "ok": self.ok,
        }


def destroy_periodic(F: LocalPotentialFamily, p: int, q: int, eps: float, k: int, tol: float = 1e-10,
                     n_starts: int = 50, seed: int = 0, M: int = 2, n_sites: int = 1,
                     identification_tol: float = 1e-6, max_iter: int = 500,
                     action_tol: float = 1e-9) -> DestructionReport:
    """Bump the largest gap of a (p, q)-minimizer's orbit and test that the minimizer is isolated."""
    ms = minimizer_set(F, p, q, n_starts=max(1, min(n_starts, 20)), seed=seed, tol=tol, max_iter=max_iter)
    if not ms.members:
        raise RuntimeError(f"no converged ({p},{q}) minimizer: {ms.failures}")
    y = ms.members[0].config
    gap = find_gaps(extended_orbit(y))[0]
    phi = make_bump(float(gap.lo), float(gap.hi), eps, k)
    Fe = perturb(F, phi)
    W0 = periodic_action(F, y)
    dW = periodic_action(Fe, y) - W0

    from .minimize import initial_configs
    rows = []
    Wy = periodic_action(Fe, y)
    for i, x0 in enumerate(initial_configs(p, q, n_starts, seed + 1)):
        res = minimize_periodic(Fe, p, q, init=x0, tol=tol, max_iter=max_iter)
        d, (kk, ll) = tau_distance(y, res.config)
        rows.append({"start": i, "converged": res.converged, "grad_norm": res.grad_norm,
                     "action_excess": periodic_action(Fe, res.config) - Wy,
                     "tau_distance": d, "shift": [kk, ll]})
    # runs at the lowest action are the minimizers; the rest are higher stationary points
    conv = [r for r in rows if r["converged"]]
    wmin = min([r["action_excess"] for r in conv] + [0.0])
    cut = wmin + action_tol * max(1.0, abs(Wy))
    for r in rows:
        r["class"] = "minimal" if r["converged"] and r["action_excess"] <= cut else (
            "higher-stationary" if r["converged"] else "unconverged")
    worst = max((r["tau_distance"] for r in rows if r["class"] == "minimal"), default=math.inf)
    if any(r["class"] == "unconverged" for r in rows):
        worst = math.inf
    probes = []
    bound = eps * float(gap.length) ** k / float(phi.C_k)
    Y = y.extend(M)
    WY = periodic_action(Fe, Y)
    sites = list(range(1, n_sites + 1))
    x = plateau_probe(y, gap, M, sites)
    excess = periodic_action(Fe, x) - WY
    probes.append({"M": M, "sites": sites, "excess": excess, "bound": n_sites * bound,
                   "ok": excess >= n_sites * bound - 1e-9})
    probes.append({"M": M, "sites": [], "excess": periodic_action(Fe, Y) - WY, "bound": 0.0, "ok": True})
    return DestructionReport(F.spec(), p, q, float(eps), int(k), str(phi.C_k), y, W0, gap, phi, dW, rows, worst,
                             worst <= identification_tol, identification_tol, probes, seed, n_starts)


__all__ = [
    "expit_poly", "bell_table", "smooth_step", "unit_bump", "CkCertificate", "certify_Ck", "certified_Ck",
    "BumpSpec", "SumBump", "ZeroBump", "zero_bump", "sampled_cnorm", "bump_csv", "make_bump", "bump_from_dict",
    "cantor_bump", "perturb", "family_with_bumps", "tau_distance", "plateau_probe", "DestructionReport",
    "destroy_periodic",
]

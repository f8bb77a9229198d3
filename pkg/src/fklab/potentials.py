"""Finite-range local potentials S_j built from one window function s0."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .lattice import PeriodicConfig, SeqWindow

FD_STEP = 1e-5
SPARSE_THRESHOLD = 400

Array = np.ndarray


@dataclass(frozen=True)
class OnsiteSplit:
    """Generating function S(x, X) = (X - x)^2 / 2 + U(x) of a nearest-neighbour family.

    The associated twist map is T(x, y) = (x + y + U'(x), y + U'(x)).
    """

    onsite: Callable[[Array], Array]
    onsite_prime: Callable[[Array], Array]

    def S(self, x, X):
        return 0.5 * (X - x) ** 2 + self.onsite(x)

    def momentum(self, x, X):
        # y = -dS/dx(x, X)
        return (X - x) - self.onsite_prime(x)

    def twist_map(self, x, y):
        kick = self.onsite_prime(x)
        return x + y + kick, y + kick


@dataclass(frozen=True)
class LocalPotentialFamily:
    """S_j(x) = s0(x_{j-r}, ..., x_{j+r}); s0 acts on arrays of shape (..., 2r+1)."""

    name: str
    r: int
    s0: Callable[[Array], Array]
    grad_s0: Optional[Callable[[Array], Array]] = None
    hess_s0: Optional[Callable[[Array], Array]] = None
    params: dict = field(default_factory=dict)
    split: Optional[OnsiteSplit] = None
    builtin: bool = False
    # D -> (first-derivative bound, second-derivative bound) on |dx| <= D
    derivative_bound: Optional[Callable[[float], tuple[float, float]]] = None

    @property
    def width(self) -> int:
        return 2 * self.r + 1

    @property
    def analytic(self) -> bool:
        return self.grad_s0 is not None and self.hess_s0 is not None

    def spec(self) -> dict:
        d = {"family": self.name if self.builtin else "custom", "range": self.r}
        d.update(self.params)
        return d

    # window-level derivatives, falling back to central differences
    def window_grad(self, w: Array) -> Array:
        w = np.asarray(w, dtype=float)
        if self.grad_s0 is not None:
            return self.grad_s0(w)
        out = np.empty_like(w)
        for t in range(self.width):
            e = np.zeros(self.width)
            e[t] = FD_STEP
            out[..., t] = (self.s0(w + e) - self.s0(w - e)) / (2 * FD_STEP)
        return out

    def window_hess(self, w: Array) -> Array:
        w = np.asarray(w, dtype=float)
        if self.hess_s0 is not None:
            return self.hess_s0(w)
        n = self.width
        out = np.empty(w.shape + (n,))
        for t in range(n):
            e = np.zeros(n)
            e[t] = FD_STEP
            out[..., t, :] = (self.window_grad(w + e) - self.window_grad(w - e)) / (2 * FD_STEP)
        return 0.5 * (out + np.swapaxes(out, -1, -2))


# ---------------------------------------------------------------- built-ins

def _sine(lam: float):
    c = lam / (2 * math.pi)

    def V(x):
        return c * np.sin(2 * math.pi * x)

    def dV(x):
        return lam * np.cos(2 * math.pi * x)

    def d2V(x):
        return -2 * math.pi * lam * np.sin(2 * math.pi * x)

    return V, dV, d2V


def fk_nn(lam: float = 1.0) -> LocalPotentialFamily:
    """Nearest-neighbour Frenkel-Kontorova / standard-map potential."""
    lam = float(lam)
    V, dV, d2V = _sine(lam)

    def s0(w):
        a = w[..., 1] - w[..., 0]
        b = w[..., 2] - w[..., 1]
        return 0.25 * a * a + 0.25 * b * b + V(w[..., 1])

    def grad(w):
        a = w[..., 1] - w[..., 0]
        b = w[..., 2] - w[..., 1]
        return np.stack([-0.5 * a, 0.5 * a - 0.5 * b + dV(w[..., 1]), 0.5 * b], axis=-1)

    def hess(w):
        h = np.zeros(w.shape + (3,))
        h[..., 0, 0] = 0.5
        h[..., 2, 2] = 0.5
        h[..., 1, 1] = 1.0 + d2V(w[..., 1])
        h[..., 0, 1] = h[..., 1, 0] = -0.5
        h[..., 1, 2] = h[..., 2, 1] = -0.5
        return h

    def bound(D):
        return D + abs(lam), 1.0 + 2 * math.pi * abs(lam)

    return LocalPotentialFamily("fk_nn", 1, s0, grad, hess, {"lambda": lam},
                                OnsiteSplit(V, dV), True, bound)


def fk_nnn(lam: float = 1.0) -> LocalPotentialFamily:
    """Next-nearest-neighbour model: sum over |t - j| <= 2 of (x_t - x_j)^2/4 + V(x_j)."""
    lam = float(lam)
    V, dV, d2V = _sine(lam)
    others = [0, 1, 3, 4]

    def s0(w):
        c = w[..., 2]
        return 0.25 * sum((w[..., t] - c) ** 2 for t in others) + V(c)

    def grad(w):
        c = w[..., 2]
        g = np.empty_like(w)
        for t in others:
            g[..., t] = 0.5 * (w[..., t] - c)
        g[..., 2] = -0.5 * sum(w[..., t] - c for t in others) + dV(c)
        return g

    def hess(w):
        h = np.zeros(w.shape + (5,))
        for t in others:
            h[..., t, t] = 0.5
            h[..., t, 2] = h[..., 2, t] = -0.5
        h[..., 2, 2] = 2.0 + d2V(w[..., 2])
        return h

    def bound(D):
        return 3 * D + abs(lam), 2.0 + 2 * math.pi * abs(lam)

    return LocalPotentialFamily("fk_nnn", 2, s0, grad, hess, {"lambda": lam},
                                None, True, bound)


BUILTINS = {"fk_nn": fk_nn, "fk_nnn": fk_nnn}


def builtin(name: str, **params) -> LocalPotentialFamily:
    if name not in BUILTINS:
        raise ValueError(f"unknown family {name!r}; choose from {sorted(BUILTINS)}")
    lam = params.get("lam", params.get("lambda", 1.0))
    return BUILTINS[name](lam)


def family_from_spec(spec: dict) -> LocalPotentialFamily:
    """Build a family from its JSON spec {"family": ..., "lambda": ...}."""
    name = spec.get("family")
    if name == "custom":
        raise ValueError("custom families can only be registered programmatically")
    fam = builtin(name, lam=spec.get("lambda", 1.0))
    if "range" in spec and int(spec["range"]) != fam.r:
        raise ValueError(f"{name} has range {fam.r}, spec says {spec['range']}")
    return fam


def custom(name: str, r: int, s0, grad_s0=None, hess_s0=None, params=None) -> LocalPotentialFamily:
    return LocalPotentialFamily(name, r, s0, grad_s0, hess_s0, dict(params or {}))


# ---------------------------------------------------------- site evaluation

def _windows(x, centers: Array, r: int) -> Array:
    offs = np.arange(-r, r + 1)
    return np.asarray(x.at(centers[:, None] + offs[None, :]), dtype=float)


def local_energy(F: LocalPotentialFamily, j: int, x) -> float:
    """S_j(x); x must be known on [j-r, j+r]."""
    return float(F.s0(np.asarray(x.span(j - F.r, j + F.r), dtype=float)))


def grad_component(F: LocalPotentialFamily, i: int, x) -> float:
    """Recurrence residual sum_j d_i S_j(x); needs x on [i-2r, i+2r]."""
    r = F.r
    x.span(i - 2 * r, i + 2 * r)  # window check up front
    js = np.arange(i - r, i + r + 1)
    G = F.window_grad(_windows(x, js, r))
    return float(sum(G[n, i - j + r] for n, j in enumerate(js)))


def residuals(F: LocalPotentialFamily, x, lo: int, hi: int) -> Array:
    """Residuals at every site in [lo, hi]."""
    r = F.r
    js = np.arange(lo - r, hi + r + 1)
    G = F.window_grad(_windows(x, js, r))
    out = np.zeros(hi - lo + 1)
    for t in range(2 * r + 1):
        # window centred at j contributes to site j - r + t
        sites = js - r + t
        ok = (sites >= lo) & (sites <= hi)
        np.add.at(out, sites[ok] - lo, G[ok, t])
    return out


def hessian_entry(F: LocalPotentialFamily, i: int, k: int, x) -> float:
    """Mixed partial d_i d_k of sum_j S_j, restricted to the terms that see both sites."""
    r = F.r
    if abs(i - k) > 2 * r:
        return 0.0
    lo, hi = max(i, k) - r, min(i, k) + r
    js = np.arange(lo, hi + 1)
    H = F.window_hess(_windows(x, js, r))
    return float(sum(H[n, i - j + r, k - j + r] for n, j in enumerate(js)))


def window_action(F: LocalPotentialFamily, x, i1: int, i2: int) -> float:
    """W_{[i1,i2]}(x) = sum_{j=i1}^{i2} S_j(x)."""
    if i2 < i1:
        return 0.0
    js = np.arange(i1, i2 + 1)
    return float(np.sum(F.s0(_windows(x, js, F.r))))


# ------------------------------------------------------ periodic evaluation

def _periodic_windows(F: LocalPotentialFamily, x: PeriodicConfig):
    js = np.arange(1, x.p + 1)
    offs = np.arange(-F.r, F.r + 1)
    idx = js[:, None] + offs[None, :]
    return np.asarray(x.at(idx), dtype=float), (idx - 1) % x.p


def periodic_action(F: LocalPotentialFamily, x: PeriodicConfig) -> float:
    """W_p(x) = sum_{j=1}^p S_j(x)."""
    W, _ = _periodic_windows(F, x)
    return float(np.sum(F.s0(W)))


def periodic_gradient(F: LocalPotentialFamily, x: PeriodicConfig) -> Array:
    """Gradient of W_p with respect to the slot values; equals the residual at sites 1..p."""
    W, slots = _periodic_windows(F, x)
    g = np.zeros(x.p)
    np.add.at(g, slots.ravel(), F.window_grad(W).ravel())
    return g


def periodic_hessian(F: LocalPotentialFamily, x: PeriodicConfig, sparse: Optional[bool] = None):
    """Hessian of W_p; scipy CSC matrix for large p, dense array otherwise."""
    W, slots = _periodic_windows(F, x)
    H = F.window_hess(W)
    n = F.width
    rows = np.repeat(slots, n, axis=1).ravel()
    cols = np.tile(slots, (1, n)).ravel()
    if sparse is None:
        sparse = x.p > SPARSE_THRESHOLD
    if sparse:
        return sp.coo_matrix((H.ravel(), (rows, cols)), shape=(x.p, x.p)).tocsc()
    out = np.zeros((x.p, x.p))
    np.add.at(out, (rows, cols), H.ravel())
    return out


# ------------------------------------------------------ condition checking

@dataclass
class ConditionStatus:
    status: str  # holds-by-construction | verified-on-sample | violated | restricted
    detail: str = ""
    witness: Optional[list] = None
    value: Optional[float] = None

    def to_dict(self) -> dict:
        d = {"status": self.status, "detail": self.detail}
        if self.witness is not None:
            d["witness"] = self.witness
        if self.value is not None:
            d["value"] = self.value
        return d


@dataclass
class ConditionReport:
    family: dict
    conditions: dict
    domain: str
    reduced_precision: bool
    C: Optional[float] = None
    C_second: Optional[float] = None

    @property
    def ok(self) -> bool:
        return all(c.status != "violated" for c in self.conditions.values())

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "domain": self.domain,
            "reduced_precision": self.reduced_precision,
            "C": self.C,
            "C_second": self.C_second,
            "conditions": {k: v.to_dict() for k, v in self.conditions.items()},
            "ok": self.ok,
        }


def sample_windows(F: LocalPotentialFamily, D: float, n: int, rng: np.random.Generator,
                   length: Optional[int] = None) -> list[SeqWindow]:
    """Random windows whose consecutive differences lie in [-D, D]."""
    length = length or 4 * F.r + 3
    out = []
    for _ in range(n):
        steps = rng.uniform(-D, D, size=length - 1)
        vals = rng.uniform(0, 1) + np.concatenate([[0.0], np.cumsum(steps)])
        out.append(SeqWindow(-(length // 2), vals))
    return out


def _sample_rows(F: LocalPotentialFamily, sample) -> Array:
    rows = []
    for x in sample:
        lo, hi = (x.lo, x.hi) if isinstance(x, SeqWindow) else (1, x.p)
        if isinstance(x, SeqWindow):
            centers = np.arange(lo + F.r, hi - F.r + 1)
        else:
            centers = np.arange(1, x.p + 1)
        if centers.size:
            rows.append(_windows(x, centers, F.r))
    return np.concatenate(rows) if rows else np.zeros((0, F.width))


def verify_conditions(F: LocalPotentialFamily, sample=None, D: float = 3.0,
                      seed: int = 0, n_samples: int = 200) -> ConditionReport:
    """Report on conditions A-E; never raises for a failing condition."""
    if sample is None:
        sample = sample_windows(F, D, n_samples, np.random.default_rng(seed))
    W = _sample_rows(F, sample)
    diffs = np.abs(np.diff(W, axis=1))
    if W.size and diffs.max() > D + 1e-12:
        keep = diffs.max(axis=1) <= D + 1e-12
        W = W[keep]
    conds: dict[str, ConditionStatus] = {}
    fd = not F.analytic

    conds["A"] = ConditionStatus("holds-by-construction", f"range r = {F.r}")

    if F.builtin:
        conds["B"] = ConditionStatus("holds-by-construction",
                                     "all S_j come from one s0 with s0(w + 1) = s0(w)")
    else:
        dev = np.abs(F.s0(W + 1.0) - F.s0(W)) if len(W) else np.zeros(0)
        if dev.size and dev.max() > 1e-10:
            t = int(np.argmax(dev))
            conds["B"] = ConditionStatus("violated", "s0(w + 1) != s0(w)",
                                         W[t].tolist(), float(dev[t]))
        else:
            conds["B"] = ConditionStatus("verified-on-sample",
                                         "shift invariance by construction; vertical period sampled")

    conds["C"] = _coercivity_probe(F, W)
    conds["D"] = _twist_check(F, W)

    C1 = C2 = None
    g = np.abs(F.window_grad(W)) if len(W) else np.zeros((0, F.width))
    h = np.abs(F.window_hess(W)) if len(W) else np.zeros((0, F.width, F.width))
    sup1 = float(g.max()) if g.size else 0.0
    sup2 = float(h.max()) if h.size else 0.0
    if F.derivative_bound is not None:
        C1, C2 = F.derivative_bound(D)
        if sup1 > C1 + 1e-9 or sup2 > C2 + 1e-9:
            conds["E"] = ConditionStatus("violated", f"sampled sup exceeds bound on |dx| <= {D}",
                                         None, max(sup1, sup2))
        else:
            conds["E"] = ConditionStatus(
                "restricted",
                f"|dx| <= {D}: first derivatives <= C = {C1:.6g}, "
                f"second derivatives <= {C2:.6g}; sampled sups {sup1:.6g}, {sup2:.6g}",
                None, sup1)
    else:
        C1, C2 = sup1, sup2
        conds["E"] = ConditionStatus("restricted",
                                     f"|dx| <= {D}: sampled sups {sup1:.6g}, {sup2:.6g} (no analytic bound)",
                                     None, sup1)
    return ConditionReport(F.spec(), conds, f"|x_(i+1) - x_i| <= {D}", fd, C1, C2)


def _coercivity_probe(F: LocalPotentialFamily, W: Array) -> ConditionStatus:
    base = W[0] if len(W) else np.zeros(F.width)
    c = F.r
    for side in (+1, -1):
        energies = []
        for t in (10.0, 100.0, 1000.0):
            w = base.copy()
            if side > 0:
                w[c + 1:] = w[c] + t
            else:
                w[:c] = w[c] - t
            energies.append(float(F.s0(w)))
        if not (energies[0] < energies[1] < energies[2]):
            return ConditionStatus("violated", f"energy not increasing along ray (side {side})",
                                   base.tolist(), energies[-1])
    return ConditionStatus("verified-on-sample", "energy increases along |dx| in {10, 100, 1000}")


def _twist_check(F: LocalPotentialFamily, W: Array) -> ConditionStatus:
    """Off-diagonal Hessian signs of the summed potential, from window Hessians."""
    if not len(W):
        return ConditionStatus("verified-on-sample", "empty sample")
    H = F.window_hess(W)
    n = F.width
    worst, worst_nn = -np.inf, -np.inf
    arg, arg_nn = None, None
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            vals = H[:, a, b]
            t = int(np.argmax(vals))
            if vals[t] > worst:
                worst, arg = float(vals[t]), t
            if a == F.r and abs(a - b) == 1 and vals[t] > worst_nn:
                worst_nn, arg_nn = float(vals[t]), t
    if worst > 1e-12:
        return ConditionStatus("violated", "positive mixed derivative", W[arg].tolist(), worst)
    if worst_nn >= 0:
        return ConditionStatus("violated", "nearest-neighbour mixed derivative not negative",
                               W[arg_nn].tolist(), worst_nn)
    return ConditionStatus("verified-on-sample",
                           f"max off-diagonal {worst:.6g}, max nearest-neighbour {worst_nn:.6g}",
                           None, worst_nn)


# -------------------------------------------------------------- twist maps

@dataclass
class TwistOrbit:
    points: Array  # rows (x_i mod 1, y_i)
    defects: Array  # |T(x_i, y_i) - (x_{i+1}, y_{i+1})|, sup over both components

    @property
    def max_defect(self) -> float:
        return float(self.defects.max()) if self.defects.size else 0.0


def twist_orbit_reconstruct(F: LocalPotentialFamily, x, lo: int, hi: int) -> TwistOrbit:
    """Phase-space orbit (x_i mod 1, y_i) for i in [lo, hi-1], y_i = -dS/dx(x_i, x_{i+1})."""
    if F.split is None or F.r != 1:
        raise ValueError(f"family {F.name!r} has no generating-function split")
    xs = np.asarray(x.span(lo, hi), dtype=float)
    y = F.split.momentum(xs[:-1], xs[1:])
    X, Y = F.split.twist_map(xs[:-2], y[:-1])
    defects = np.maximum(np.abs(X - xs[1:-1]), np.abs(Y - y[1:]))
    pts = np.column_stack([np.mod(xs[:-1], 1.0), y])
    return TwistOrbit(pts, defects)

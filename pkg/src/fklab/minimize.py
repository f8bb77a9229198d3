"""Minimization of the periodic action W_p over X_{p,q} and checks on the minimizers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.optimize as sopt
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .lattice import (PeriodicConfig, Ordering, SeqWindow, compare, is_birkhoff, max_config, rotation_bound_check,
                      min_config, shift)
from .potentials import (LocalPotentialFamily, periodic_action, periodic_gradient,
                         periodic_hessian, window_action)
from .runtime import parallel_map, rng

DEFAULT_TOL = 1e-10
DEDUP_TOL = 1e-7


@dataclass
class MinimizeResult:
    config: PeriodicConfig
    action: float
    grad_norm: float
    iterations: int
    converged: bool
    trace: list = field(default_factory=list, repr=False)
    method: str = "newton"

    def to_dict(self, with_trace: bool = False) -> dict:
        d = {
            "config": self.config.to_dict(),
            "action": self.action,
            "grad_norm": self.grad_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "method": self.method,
        }
        if with_trace:
            d["trace"] = list(self.trace)
        return d


def normalize(x: PeriodicConfig) -> PeriodicConfig:
    """Vertical translate with x_0 in [0, 1)."""
    c = math.floor(float(x.at(0)))
    return x - c if c else x


def _as_values(p: int, q: int, init) -> np.ndarray:
    if isinstance(init, PeriodicConfig):
        if (init.p, init.q) != (p, q):
            raise ValueError(f"initial config lives in X_{init.p},{init.q}, not X_{p},{q}")
        return np.asarray(init.values, dtype=float).copy()
    if init is None:
        init = 0
    return initial_configs(p, q, 1, int(init))[0].values.copy()


def initial_configs(p: int, q: int, n: int, seed: int) -> list[PeriodicConfig]:
    """Linear profiles xi0 + (q/p) i, xi0 stratified over [0,1), plus per-site jitter 0.25."""
    out = []
    for s in range(n):
        g = rng(seed, s)
        xi0 = (s + g.uniform()) / n
        vals = xi0 + (q / p) * np.arange(1, p + 1) + g.uniform(-0.25, 0.25, size=p)
        out.append(PeriodicConfig(p, q, vals))
    return out


class _Shifted:
    """Factorization of H + mu*I that reports whether the shift made it positive definite."""

    def __init__(self, H, mu: float):
        n = H.shape[0]
        self.ok = False
        if sp.issparse(H):
            band = _folded_band(H, mu)
            if band is not None:
                ab, perm = band
                try:
                    c = sla.cholesky_banded(ab, lower=False, check_finite=False)
                except sla.LinAlgError:
                    return
                self.ok = True
                inv = np.empty_like(perm)
                inv[perm] = np.arange(n)

                def solve(b, c=c, perm=perm, inv=inv):
                    return sla.cho_solve_banded((c, False), b[perm], check_finite=False)[inv]

                self._solve = solve
                return
            A = (H + mu * sp.identity(n, format="csc")).tocsc()
            try:
                lu = spla.splu(A, permc_spec="NATURAL", diag_pivot_thresh=0.0,
                               options={"SymmetricMode": True})
            except RuntimeError:
                return
            d = lu.U.diagonal()
            if np.all(d > 0) and np.array_equal(lu.perm_r, np.arange(n)):
                self.ok = True
                self._solve = lu.solve
        else:
            try:
                c = sla.cho_factor(H + mu * np.eye(n), lower=False, check_finite=False)
            except sla.LinAlgError:
                return
            self.ok = True
            self._solve = lambda b: sla.cho_solve(c, b, check_finite=False)

    def solve(self, b):
        return self._solve(b)


MAX_FOLDED_BAND = 16


def _folded_band(H, mu: float):
    """Upper band storage of H + mu*I in the order 0, n-1, 1, n-2, ...

    A periodic chain coupling i to i +- r (mod n) has bandwidth 2r in that order,
    so a banded Cholesky both factors it and certifies positive definiteness.
    Returns None when the band is too wide to pay off.
    """
    n = H.shape[0]
    perm = np.empty(n, dtype=int)
    perm[0::2] = np.arange((n + 1) // 2)
    perm[1::2] = n - 1 - np.arange(n // 2)
    pos = np.empty(n, dtype=int)
    pos[perm] = np.arange(n)
    C = H.tocoo()
    i, j = pos[C.row], pos[C.col]
    up = j >= i
    i, j, v = i[up], j[up], C.data[up]
    u = int((j - i).max()) if j.size else 0
    if u > MAX_FOLDED_BAND:
        return None
    ab = np.zeros((u + 1, n))
    np.add.at(ab, (u + i - j, j), v)
    ab[u] += mu
    return ab, perm


def _accept(W_new, W_old, slope, alpha, gn_new, gn_old, n: int = 1) -> bool:
    if W_new <= W_old + 1e-4 * alpha * slope:
        return True
    # rounding in a sum of n site energies; below it only the gradient is informative
    noise = 1e-13 * (1.0 + abs(W_old)) * math.sqrt(n)
    if -alpha * slope < noise:
        return gn_new < gn_old
    return W_new <= W_old + noise and gn_new < gn_old


def _pin(H, fixed: np.ndarray):
    """Hessian restricted to the free slots, identity on the pinned ones."""
    if not fixed.size:
        return H
    n = H.shape[0]
    keep = np.ones(n)
    keep[fixed] = 0.0
    if sp.issparse(H):
        K = sp.diags(keep)
        return (K @ H @ K + sp.diags(1.0 - keep)).tocsc()
    H = H * keep[:, None] * keep[None, :]
    H[fixed, fixed] = 1.0
    return H


def minimize_periodic(F: LocalPotentialFamily, p: int, q: int, init=None,
                      tol: float = DEFAULT_TOL, max_iter: int = 500,
                      fixed: Sequence[int] = (), max_step: Optional[float] = None) -> MinimizeResult:
    """Modified Newton on W_p with a positive-definite shift; never returns silently unconverged.

    Slots listed in ``fixed`` (0-based, slot i holds site i+1) keep their initial values,
    so the result is a constrained minimizer and the gradient is reported on the free slots.
    ``max_step`` caps the per-site move of each Newton step, which keeps sites from
    hopping over tall barriers into a neighbouring well.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = _as_values(p, q, init)
    fixed = np.unique(np.asarray(fixed, dtype=int) % p)
    if not F.analytic:
        return _minimize_lbfgs(F, p, q, x, tol, max_iter, fixed)

    def cfg(v):
        return PeriodicConfig(p, q, v)

    def grad(v):
        g = periodic_gradient(F, cfg(v))
        g[fixed] = 0.0
        return g

    W = periodic_action(F, cfg(x))
    g = grad(x)
    gn = float(np.abs(g).max())
    trace = [W]
    mu = 0.0
    raised = False
    it = 0
    while gn > tol and it < max_iter:
        it += 1
        H = _pin(periodic_hessian(F, cfg(x)), fixed)
        scale = float(np.abs(H).max()) if not sp.issparse(H) else float(abs(H).max())
        if not raised:
            mu = mu / 4 if mu > 1e-12 * scale else 0.0
        raised = False
        fac = _Shifted(H, mu)
        while not fac.ok:
            mu = max(4 * mu, 1e-8 * max(scale, 1.0))
            raised = True
            fac = _Shifted(H, mu)
        d = -fac.solve(g)
        if max_step is not None:
            big = float(np.abs(d).max())
            if big > max_step:
                d *= max_step / big
        slope = float(g @ d)
        if slope >= 0:
            d, slope = -g, -float(g @ g)
        alpha = 1.0
        accepted = False
        for _ in range(60):
            xn = x + alpha * d
            Wn = periodic_action(F, cfg(xn))
            gnew = grad(xn)
            gnn = float(np.abs(gnew).max())
            if _accept(Wn, W, slope, alpha, gnn, gn, p):
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            # shift harder and try again next round
            mu = max(4 * mu, 1e-6 * max(scale, 1.0))
            raised = True
            continue
        x, W, g, gn = xn, min(Wn, W), gnew, gnn
        trace.append(Wn)
    conf = normalize(cfg(x)) if not fixed.size else cfg(x)
    return MinimizeResult(conf, periodic_action(F, conf), gn, it, gn <= tol, trace, "newton")


def _minimize_lbfgs(F, p, q, x0, tol, max_iter, fixed=np.zeros(0, dtype=int)) -> MinimizeResult:
    trace = []

    def fun(v):
        c = PeriodicConfig(p, q, v)
        W = periodic_action(F, c)
        return W, periodic_gradient(F, c)

    bounds = [(v, v) if i in set(fixed.tolist()) else (None, None) for i, v in enumerate(x0)]
    res = sopt.minimize(fun, x0, jac=True, method="L-BFGS-B", bounds=bounds if fixed.size else None,
                        callback=lambda v: trace.append(fun(v)[0]),
                        options={"gtol": tol, "ftol": 0.0, "maxiter": max_iter})
    conf = PeriodicConfig(p, q, res.x)
    conf = normalize(conf) if not fixed.size else conf
    g = periodic_gradient(F, conf)
    g[fixed] = 0.0
    gn = float(np.abs(g).max())
    return MinimizeResult(conf, periodic_action(F, conf), gn, int(res.nit), gn <= tol, trace, "l-bfgs")


# ------------------------------------------------------- orbit bookkeeping

def canonical_translate(x: PeriodicConfig) -> tuple[PeriodicConfig, tuple[int, int]]:
    """Translate tau_{k,l} x with x_0 in [0,1) as small as possible, and its (k, l)."""
    vals = np.asarray(x.at(np.arange(0, x.p)), dtype=float)
    frac = vals - np.floor(vals)
    i = int(np.argmin(frac))
    k, l = -i, -int(math.floor(vals[i]))
    return shift(x, k, l), (k, l)


def tau_witness(x: PeriodicConfig, y: PeriodicConfig, tol: float = DEDUP_TOL):
    """(k, l) with shift(x, k, l) equal to y within tol, or None."""
    if (x.p, x.q) != (y.p, y.q):
        return None
    vals = np.asarray(x.at(np.arange(0, x.p)), dtype=float)
    y0 = float(y.at(0))
    gap = y0 - vals
    near = np.abs(gap - np.round(gap)) <= tol
    yv = np.asarray(y.values, dtype=float)
    for i in np.flatnonzero(near):
        k, l = -int(i), int(round(gap[i]))
        if np.abs(np.asarray(shift(x, k, l).values, dtype=float) - yv).max() <= tol:
            return k, l
    return None


@dataclass
class MinimizerSet:
    members: list  # MinimizeResult, one per tau-orbit
    witnesses: list  # per member: list of (start index, (k, l)) merged into it
    non_minimal: list  # converged stationary points with higher action
    failures: list  # unconverged runs
    starts: int
    seed: int

    @property
    def configs(self) -> list[PeriodicConfig]:
        return [m.config for m in self.members]

    def to_dict(self) -> dict:
        return {
            "starts": self.starts,
            "seed": self.seed,
            "minimizers": [m.to_dict() for m in self.members],
            "merged": [[{"start": s, "k": k, "l": l} for s, (k, l) in w] for w in self.witnesses],
            "non_minimal_stationary": [m.to_dict() for m in self.non_minimal],
            "unconverged": [m.to_dict() for m in self.failures],
        }


def minimizer_set(F: LocalPotentialFamily, p: int, q: int, n_starts: int = 10, seed: int = 0,
                  tol: float = DEFAULT_TOL, max_iter: int = 500,
                  inits: Optional[Sequence[PeriodicConfig]] = None,
                  dedup_tol: float = DEDUP_TOL, action_tol: float = 1e-9,
                  max_step: Optional[float] = None) -> MinimizerSet:
    """Multi-start minimization, kept at the lowest action and merged modulo tau."""
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    starts = list(inits) if inits is not None else initial_configs(p, q, n_starts, seed)
    results = parallel_map(lambda c: minimize_periodic(F, p, q, c, tol, max_iter, max_step=max_step), starts)
    good = [(i, r) for i, r in enumerate(results) if r.converged]
    failures = [r for r in results if not r.converged]
    if not good:
        return MinimizerSet([], [], [], failures, len(starts), seed)
    wmin = min(r.action for _, r in good)
    cut = wmin + action_tol * max(1.0, abs(wmin))
    low = [(i, r) for i, r in good if r.action <= cut]
    non_minimal = [r for _, r in good if r.action > cut]

    reps: list[tuple[int, MinimizeResult]] = []
    merged: list[list] = []
    for i, r in low:
        for n, (_, rep) in enumerate(reps):
            w = tau_witness(r.config, rep.config, dedup_tol)
            if w is not None:
                merged[n].append((i, w))
                break
        else:
            canon, _ = canonical_translate(r.config)
            reps.append((i, MinimizeResult(canon, r.action, r.grad_norm, r.iterations,
                                           r.converged, r.trace, r.method)))
            merged.append([])
    order = sorted(range(len(reps)), key=lambda n: (float(reps[n][1].config.at(0)), reps[n][1].action))
    return MinimizerSet([reps[n][1] for n in order], [merged[n] for n in order],
                        non_minimal, failures, len(starts), seed)


def pairwise_orderings(configs: Sequence[PeriodicConfig], tol: float = 1e-9) -> list:
    """compare() on all pairs, with tau-equivalent pairs reported as 'EqualModTau'."""
    out = []
    for a in range(len(configs)):
        for b in range(a + 1, len(configs)):
            if tau_witness(configs[a], configs[b], DEDUP_TOL) is not None:
                out.append((a, b, "EqualModTau"))
            else:
                out.append((a, b, compare(configs[a], configs[b], tol).value))
    return out


# ------------------------------------------------------------- checks

def max_principle_check(F: LocalPotentialFamily, x: PeriodicConfig, y: PeriodicConfig):
    """(W_p(x^y) + W_p(xvy), W_p(x) + W_p(y))."""
    lhs = periodic_action(F, min_config(x, y)) + periodic_action(F, max_config(x, y))
    rhs = periodic_action(F, x) + periodic_action(F, y)
    return lhs, rhs


@dataclass
class ProbeReport:
    probes: int
    amplitude: float
    min_change: float
    decreases: int
    worst_support: Optional[list]

    @property
    def minimal(self) -> bool:
        return self.decreases == 0

    def to_dict(self) -> dict:
        return {"probes": self.probes, "amplitude": self.amplitude,
                "min_change": self.min_change, "decreases": self.decreases,
                "minimal": self.minimal}


def minimality_probe(F: LocalPotentialFamily, x: PeriodicConfig, n_probes: int = 100,
                     amplitude: float = 0.1, seed: int = 0, noise: float = 1e-12,
                     max_support: int = 12) -> ProbeReport:
    """Random finite-support perturbations; the action change must never be negative."""
    g = rng(seed, 0x9B0B)
    r = F.r
    worst, worst_sup, dec = math.inf, None, 0
    for _ in range(n_probes):
        n = int(g.integers(1, max_support + 1))
        start = int(g.integers(0, x.p))
        v = g.uniform(-amplitude, amplitude, size=n)
        lo, hi = start - 2 * r, start + n - 1 + 2 * r
        base = np.asarray(x.span(lo, hi), dtype=float)
        vals = base.copy()
        vals[2 * r: 2 * r + n] += v
        before = window_action(F, SeqWindow(lo, base), start - r, start + n - 1 + r)
        after = window_action(F, SeqWindow(lo, vals), start - r, start + n - 1 + r)
        change = after - before
        if change < worst:
            worst, worst_sup = change, [start, v.tolist()]
        if change < -noise:
            dec += 1
    return ProbeReport(n_probes, amplitude, float(worst), dec, worst_sup)


def reembed_check(F: LocalPotentialFamily, res: MinimizeResult, n: int) -> dict:
    """A (p,q)-minimizer viewed in X_{np,nq}: stationarity and W_{np} = n W_p."""
    big = res.config.extend(n)
    return {
        "n": n,
        "grad_norm": float(np.abs(periodic_gradient(F, big)).max()),
        "action": periodic_action(F, big),
        "expected": n * res.action,
    }


def check_minimizer(F: LocalPotentialFamily, res: MinimizeResult, tol: float = DEFAULT_TOL) -> dict:
    ok, witness = is_birkhoff(res.config)
    g = periodic_gradient(F, res.config)
    return {
        "birkhoff": ok,
        "witness": witness,
        "max_residual": float(np.abs(g).max()),
        "stationary": bool(np.abs(g).max() <= tol),
        "rotation_bound": rotation_bound_check(res.config),
    }


__all__ = [
    "MinimizeResult", "MinimizerSet", "ProbeReport", "minimize_periodic", "minimizer_set",
    "initial_configs", "normalize", "canonical_translate", "tau_witness",
    "pairwise_orderings", "max_principle_check", "minimality_probe", "reembed_check",
    "check_minimizer", "Ordering",
]

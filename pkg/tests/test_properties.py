"""Randomized invariants over configurations, orbits, number theory and serialization."""
import json
import math
from fractions import Fraction

import numpy as np
from hypothesis import assume, given, settings, strategies as st

from fklab.birkhoff import extended_orbit, find_gaps
from fklab.lattice import (
    PeriodicConfig, compare, elementary_pair, is_birkhoff, is_birkhoff_bruteforce, max_config, min_config, shift,
)
from fklab.minimize import max_principle_check
from fklab.numbertheory import budget_a, reduce_tilde
from fklab.perturbation import make_bump, perturb, sampled_cnorm
from fklab.potentials import fk_nn, fk_nnn, periodic_action
from fklab.report import dumps

FAST = settings(max_examples=60, deadline=None)

coprime = st.tuples(st.integers(1, 13), st.integers(-20, 20)).filter(lambda t: math.gcd(*t) == 1)


@st.composite
def configs(draw, p=None, q=None):
    if p is None:
        p, q = draw(coprime)
    vals = draw(st.lists(st.floats(-3, 3, allow_nan=False), min_size=p, max_size=p))
    return PeriodicConfig(p, q, np.asarray(vals) + (q / p) * np.arange(1, p + 1))


shifts = st.tuples(st.integers(-15, 15), st.integers(-6, 6))


@FAST
@given(configs(), shifts, shifts)
def test_shift_composition(x, a, b):
    lhs = shift(shift(x, *a), *b)
    rhs = shift(x, a[0] + b[0], a[1] + b[1])
    assert np.allclose(lhs.values, rhs.values, atol=1e-12)
    assert np.allclose(shift(x, x.p, x.q).values, x.values)


@FAST
@given(configs(), shifts)
def test_action_is_shift_invariant(x, kl):
    for F in (fk_nn(1.0), fk_nnn(0.5)):
        assert abs(periodic_action(F, shift(x, *kl)) - periodic_action(F, x)) <= 1e-10 * (1 + abs(periodic_action(F, x)))


@FAST
@given(configs(8, 5), configs(8, 5))
def test_min_max_never_raise_action(x, y):
    lhs, rhs = max_principle_check(fk_nn(1.0), x, y)
    assert lhs <= rhs + 1e-12 * (1 + abs(rhs))


@FAST
@given(configs(8, 5), configs(8, 5))
def test_compare_is_antisymmetric_and_lattice_ordered(x, y):
    assert compare(y, x) is compare(x, y).flipped()
    lo, hi = min_config(x, y), max_config(x, y)
    assert np.all(np.asarray(lo.values) <= np.asarray(hi.values))


@FAST
@given(configs())
def test_fast_birkhoff_matches_enumeration(x):
    assert is_birkhoff(x)[0] == is_birkhoff_bruteforce(x)[0]


@FAST
@given(configs())
def test_gap_lengths_sum_to_one_and_pigeonhole(x):
    o = extended_orbit(x)
    gaps = find_gaps(o)
    assert math.isclose(sum(float(g.length) for g in gaps), 1.0, abs_tol=1e-12)
    assert float(gaps[0].length) >= 1 / len(o.points) - 1e-12


@FAST
@given(coprime)
def test_elementary_pair_solves_bezout(pq):
    p, q = pq
    s, t = elementary_pair(p, q)
    assert p * t - q * s == 1 and 0 <= s < max(p, 1)


@FAST
@given(st.integers(1, 60), st.integers(1, 60), st.integers(2, 200))
def test_reduce_tilde_identities(p, q, pp):
    m, pt, qt = reduce_tilde(pp * p, pp * q + 1)
    assert m * pt == pp * p and m * qt == pp * q + 1 and math.gcd(pt, qt) == 1


@FAST
@given(coprime, st.fractions(0, 1, max_denominator=10 ** 6), st.integers(0, 10 ** 6))
def test_budget_a_rational_oracle(pq, om, n):
    p, q = pq
    expect = math.ceil(n * abs(q - om * p))
    assert budget_a(p, q, om, n) == expect


@FAST
@given(st.floats(0, 0.9), st.floats(0.05, 0.95), st.floats(1e-4, 1.0), st.integers(2, 3))
def test_bump_norm_within_eps(lo, w, eps, k):
    assume(w < 1)
    phi = make_bump(lo, lo + w, eps, k)
    assert sampled_cnorm(phi, k, 2000) <= eps


@FAST
@given(configs(5, 3), st.floats(1e-3, 0.5))
def test_bump_on_orbit_gap_leaves_action(x, eps):
    gap = find_gaps(extended_orbit(x))[0]
    assume(float(gap.length) > 1e-6)
    F = fk_nn(0.8)
    G = perturb(F, make_bump(float(gap.lo), float(gap.hi), eps, 2))
    assert periodic_action(G, x) == periodic_action(F, x)


@FAST
@given(st.recursive(
    st.one_of(st.floats(allow_nan=False, allow_infinity=False), st.integers(-10 ** 30, 10 ** 30),
              st.booleans(), st.none(), st.text(max_size=8)),
    lambda kids: st.one_of(st.lists(kids, max_size=4), st.dictionaries(st.text(max_size=5), kids, max_size=4)),
    max_leaves=20))
def test_report_json_round_trip(obj):
    back = json.loads(dumps(obj))

    def same(a, b):
        if isinstance(a, bool) or a is None:
            return a == b
        if isinstance(a, int):
            return (int(b) if isinstance(b, str) else b) == a
        if isinstance(a, float):
            return isinstance(b, float) and (a == b) and math.copysign(1, a) == math.copysign(1, b)
        if isinstance(a, list):
            return len(a) == len(b) and all(same(u, v) for u, v in zip(a, b))
        if isinstance(a, dict):
            return list(a) == list(b) and all(same(a[k], b[k]) for k in a)
        return a == b

    assert same(obj, back)

import dataclasses
import math
from fractions import Fraction

import mpmath
import pytest

from fklab.bigint import Undecidable
from fklab.numbertheory import (
    ParamSelection, as_rotation, budget_a, convergents, extended_euclid, invariant_checks, number_checks,
    p_prime, reduce_tilde, select_parameters,
)

mpmath.mp.dps = 60
GOLDEN = (mpmath.sqrt(5) - 1) / 2


def test_golden_convergents():
    assert convergents("golden", 5) == [(2, 1), (3, 2), (5, 3), (8, 5), (13, 8)]


def test_rational_convergents_terminate():
    assert convergents(Fraction(3, 5), 10)[-1] == (5, 3)


def test_liouville_convergents_include_truncations():
    cs = convergents("liouville:10", 6)
    dens = {p for p, _ in cs}
    assert 10 in dens or 100 in dens
    assert 10 ** 6 in dens
    p, q = next(c for c in cs if c[0] == 10 ** 6)
    assert Fraction(q, p) == Fraction(1, 10) + Fraction(1, 100) + Fraction(1, 10 ** 6)


@pytest.mark.parametrize("p,q,st", [(5, 3, (3, 2)), (1, 0, (0, 1)), (2, 1, (1, 1))])
def test_extended_euclid(p, q, st):
    s, t = extended_euclid(p, q)
    assert (s, t) == st and p * t - q * s == 1


def test_p_prime_rational():
    assert p_prime(Fraction(3, 10), 1, 0) == 4


def test_p_prime_golden_against_high_precision():
    d = GOLDEN - mpmath.mpf(3) / 5
    expect = int(mpmath.floor(1 / (5 * d))) + 1
    got = p_prime("golden", 5, 3)
    assert got == expect
    assert 1 / mpmath.mpf(got * 5) < d < 1 / mpmath.mpf((got - 1) * 5)


def test_p_prime_refuses_to_guess():
    with pytest.raises(Undecidable):
        p_prime("liouville:10:1", 100, 11)


def test_p_prime_outside_band_rejected():
    with pytest.raises(ValueError):
        p_prime("golden", 5, 2)


def test_reduce_tilde():
    assert reduce_tilde(6, 4) == (2, 3, 2)
    assert reduce_tilde(35, 11)[0] == 1


def test_lcm_identity_for_small_parameters():
    for p, q in [(5, 3), (8, 5), (7, 2), (13, 8)]:
        for pp in range(2, 30):
            m, pt, qt = reduce_tilde(pp * p, pp * q + 1)
            assert math.gcd(pt, qt) == 1
            assert p * pt // math.gcd(p, pt) == pp * p


def test_budget_a_examples():
    assert budget_a(5, 3, Fraction(61, 100), 10) == 1
    assert budget_a(5, 3, Fraction(3, 5), 10) == 0
    expect = int(mpmath.ceil(100 * abs(8 - 13 * GOLDEN)))
    assert budget_a(13, 8, "golden", 100) == expect


def test_liouville_selection_is_exact(liouville_selection):
    sel = liouville_selection
    assert sel
    assert sel.tau >= 14
    assert all(c.passed for c in invariant_checks(sel))
    assert all(c.kind in ("exact", "certified") for c in invariant_checks(sel))


def test_selection_survives_serialization(liouville_selection):
    sel = liouville_selection
    back = ParamSelection.from_dict(sel.to_dict())
    assert back.to_dict() == sel.to_dict()
    assert all(c.passed for c in number_checks(back))


def test_golden_mean_is_not_liouville():
    res = select_parameters("golden", 1, 14, 2, 1, Fraction(1, 100), 3, search_bound=12)
    assert not res
    assert res.reason == "not-liouville-enough"


def test_sigma_threshold_is_strict():
    with pytest.raises(ValueError):
        select_parameters("liouville:10", 1, 13, 2, 1, Fraction(1, 100), 3)


def test_rational_omega_rejected():
    with pytest.raises(ValueError):
        select_parameters(Fraction(1, 3), 1, 14, 2, 1, Fraction(1, 100), 3)


def test_relaxed_selection_flags_scale(relaxed_selection):
    sel = relaxed_selection
    assert sel and sel.relaxed
    checks = number_checks(sel)
    assert all(c.passed for c in checks), [c.name for c in checks if not c.passed]
    relaxed = [c for c in checks if c.scale_mode == "relaxed"]
    assert {c.name for c in relaxed} >= {"A2", "A2alternative", "basicclosenessestimate"}
    assert all(c.exact_scale_passed is False for c in relaxed if c.name == "A2")


def test_half_relaxation_breaks_a2_alternative(relaxed_selection):
    weak = dataclasses.replace(relaxed_selection, relax=Fraction(1, 2))
    chk = {c.name: c for c in number_checks(weak)}["A2alternative"]
    assert not chk.passed
    assert chk.lhs and chk.rhs and chk.relation == "<="


def test_n_window_nonempty(liouville_selection, relaxed_selection):
    for sel in (liouville_selection, relaxed_selection):
        lo, hi = sel.N_range
        assert {c.name: c for c in number_checks(sel)}["choiceN2-nonempty"].passed
        assert sel.C_kr / sel.eps >= 10


def test_as_rotation_spellings():
    assert as_rotation("golden").label() == "golden"
    assert as_rotation("3/7").is_rational
    # 1/2 + 1/4 + 1/64 + ... exceeds 3/4
    assert as_rotation("liouville:2").cmp(Fraction(3, 4)) == 1

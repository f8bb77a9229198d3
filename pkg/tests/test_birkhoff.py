import math
from fractions import Fraction

import numpy as np
import pytest

from fklab.birkhoff import (
    confine, extended_orbit, find_gaps, max_gap, near_periodicity_verify, tauaction_check, translate_U,
)
from fklab.lattice import PeriodicConfig, RigidRotation, SeqWindow, is_birkhoff, l1_period, linear_config
from fklab.numbertheory import as_rotation, budget_a

GOLD = float(as_rotation("golden"))


def test_orbit_of_line_exact():
    x = PeriodicConfig(5, 3, [Fraction(3 * i, 5) + Fraction(1, 7) for i in range(1, 6)])
    pts = extended_orbit(x).points
    assert set(pts) == {(Fraction(1, 7) + Fraction(k, 5)) % 1 for k in range(5)}
    gaps = find_gaps(extended_orbit(x))
    assert all(g.length == Fraction(1, 5) for g in gaps)


def test_constant_orbit_single_point_single_gap():
    o = extended_orbit(PeriodicConfig(1, 0, [0.3]))
    assert o.points == (0.3,)
    (g,) = find_gaps(o)
    assert g.length == pytest.approx(1.0)


def test_minimizer_orbit_matches_enumeration(minimizers_5_3):
    x = minimizers_5_3.members[0].config
    brute = sorted({round(float(x.at(k)) % 1.0, 9) for k in range(-20, 21)})
    pts = [round(v, 9) for v in extended_orbit(x).points]
    assert len(pts) == 5 and pts == brute


def test_max_gap_pigeonhole(minimizers_5_3):
    for m in minimizers_5_3.members:
        assert float(max_gap(m.config).length) >= 1 / 5 - 1e-12
    rng = np.random.default_rng(1)
    for p in range(1, 12):
        x = PeriodicConfig(p, 1, rng.uniform(0, 3, p))
        assert float(max_gap(x).length) >= 1 / p - 1e-12


def test_gap_contains_wraps_around():
    (g,) = find_gaps(extended_orbit(PeriodicConfig(1, 0, [0.9])))
    assert g.contains(0.1) and not g.contains(0.9)


def test_elementary_translate_powers(minimizers_5_3):
    x = minimizers_5_3.members[0].config
    assert np.allclose(translate_U(5, 3, x, 5).values, x.values + 1)
    assert np.allclose(translate_U(5, 3, x, 0).values, x.values)
    assert l1_period(translate_U(5, 3, x, 1), x) == pytest.approx(1.0, abs=1e-9)


def test_tau_norm_exceeds_lattice_number_for_spike():
    x = PeriodicConfig(5, 3, [0.0, 10.0, 1.3, 1.8, 2.4])
    norm, lower = tauaction_check(x, 3, 2)
    assert norm > lower


def _scan_oracle(x, p, q, r, i1, i2):
    """Independent re-implementation of the i0 scan with plain loops."""
    out = []
    for i0 in range(-p + 1, 1):
        ms = [m for m in range(-1000, 1000) if i1 <= i0 - r + m * p and i0 + r - 1 + m * p <= i2]
        if not ms:
            continue
        worst = 0.0
        for m in ms:
            for n in ms:
                s = sum(abs((x.at(j + m * p) - m * q) - (x.at(j + n * p) - n * q)) for j in range(i0 - r, i0 + r))
                worst = max(worst, s)
        out.append((i0, worst))
    return out


def test_near_periodicity_golden_rotation():
    x = RigidRotation(GOLD, 0.0)
    res = near_periodicity_verify(x, "golden", 13, 8, 2, 0, 500)
    assert res.a == budget_a(13, 8, "golden", 500)
    assert res.bound == pytest.approx(2 * 2 * res.a / 13)
    scan = _scan_oracle(x, 13, 8, 2, 0, 500)
    first_ok = next(i0 for i0, v in scan if v <= res.bound)
    assert res.i0 == first_ok and res.ok
    assert res.achieved == pytest.approx(dict(scan)[res.i0], rel=1e-9)


def test_near_periodicity_rigid_rotation_every_witness():
    x = RigidRotation(GOLD, 0.25)
    res = near_periodicity_verify(x, "golden", 8, 5, 1, 0, 200)
    assert all(v <= res.bound + 1e-12 for _, v in res.scan)


def test_near_periodicity_rational_is_exact():
    x = RigidRotation(3 / 5, 0.1)
    res = near_periodicity_verify(x, Fraction(3, 5), 5, 3, 1, 0, 100)
    assert res.a == 0 and res.achieved == pytest.approx(0.0, abs=1e-12)


def test_near_periodicity_short_window_rejected():
    with pytest.raises(ValueError):
        near_periodicity_verify(RigidRotation(GOLD), "golden", 13, 8, 2, 0, 2)


@pytest.mark.parametrize("side", [1, -1])
def test_confine_line(side):
    om = Fraction(2, 5) + side * Fraction(1, 1000)
    x = RigidRotation(float(om), 0.0)
    # linear interpolation makes psi the identity shift for a rigid rotation
    res = confine(x, om, 5, 2, 0, 50, extension="linear")
    y = res.y
    js = np.arange(0, 51)
    assert np.allclose(np.diff(np.asarray(y.at(js), dtype=float)), 2 / 5, atol=1e-9)
    Uy = translate_U(5, 2, y, res.a)
    assert np.allclose(np.asarray(Uy.at(js), dtype=float), np.asarray(y.at(js), dtype=float) + res.a / 5)
    assert res.mirrored == (side < 0)
    assert res.ok


def test_confine_single_site():
    x = RigidRotation(GOLD, 0.2)
    res = confine(x, "golden", 5, 3, 4, 4)
    assert res.a == 0
    assert float(res.y.at(4)) == pytest.approx(x.at(4))


def test_confine_golden_sandwich():
    x = RigidRotation(GOLD, 0.0)
    res = confine(x, "golden", 8, 5, 0, 200)
    assert res.slack >= -1e-12
    assert is_birkhoff(res.y)[0]
    js = np.arange(0, 201)
    xv = x.at(js)
    assert np.all(np.asarray(res.y.at(js), dtype=float) <= xv + 1e-12)
    assert np.all(xv <= np.asarray(translate_U(8, 5, res.y, res.a).at(js), dtype=float) + 1e-12)


def test_confine_validates_extension():
    with pytest.raises(ValueError):
        confine(RigidRotation(GOLD), "golden", 5, 3, 0, 10, extension="cubic")


def test_confine_needs_the_window():
    w = SeqWindow(0, np.arange(10) * GOLD)
    with pytest.raises(ValueError):
        confine(w, "golden", 5, 3, 0, 40)

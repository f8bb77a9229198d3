import numpy as np
import pytest

from fklab.birkhoff import GapInterval, extended_orbit, find_gaps
from fklab.lattice import PeriodicConfig, SeqWindow
from fklab.perturbation import (
    bump_from_dict, cantor_bump, certify_Ck, certified_Ck, destroy_periodic, family_with_bumps, make_bump,
    perturb, plateau_probe, sampled_cnorm, smooth_step, unit_bump, zero_bump,
)
from fklab.potentials import (
    fk_nn, fk_nnn, grad_component, hessian_entry, local_energy, periodic_action,
)


def test_bump_edges_and_plateau():
    phi = make_bump(0.2, 0.5, 0.01, 3)
    Ck = float(certified_Ck(3))
    assert phi(0.5) == 0.0 and phi(0.2) == 0.0
    assert phi(0.35) == pytest.approx(0.01 * 0.3 ** 3 / Ck, rel=1e-15)
    assert sampled_cnorm(phi, 3, 10000) <= 0.01


def test_bump_width_scaling():
    a = make_bump(0.1, 0.5, 0.02, 2)
    b = make_bump(0.1, 0.3, 0.02, 2)
    assert a.C_k == b.C_k
    assert b(0.2) == pytest.approx(a(0.3) * 2.0 ** -2, rel=1e-14)


def test_bump_rejects_bad_input():
    for args in [(0.5, 0.2, 0.01, 2), (0.1, 0.3, 0.0, 2), (0.1, 0.3, 0.01, 1), (0.0, 1.5, 0.01, 2)]:
        with pytest.raises(ValueError):
            make_bump(*args)


def test_bump_wraps_around_the_circle():
    phi = make_bump(0.9, 1.2, 0.01, 2)
    assert phi(0.05) > 0 and phi(0.5) == 0.0
    assert phi(0.05) == pytest.approx(phi(1.05))


def test_certified_constant_dominates_sampled_derivatives():
    t = np.linspace(0, 1, 20001)
    for k in (2, 3):
        rows = unit_bump(t, k)
        assert np.abs(rows).max() <= float(certified_Ck(k))
        cert = certify_Ck(k)
        assert all(lo <= up * (1 + 1e-12) for lo, up in zip(cert.lower_bounds, cert.sup_bounds))


def test_step_derivatives_match_finite_differences():
    s = np.linspace(0.05, 0.95, 37)
    h = 1e-6
    rows = smooth_step(s, 2)
    fd1 = (smooth_step(s + h)[0] - smooth_step(s - h)[0]) / (2 * h)
    assert np.allclose(rows[1], fd1, atol=1e-6)
    fd2 = (smooth_step(s + h, 1)[1] - smooth_step(s - h, 1)[1]) / (2 * h)
    assert np.allclose(rows[2], fd2, atol=1e-4)


def test_zero_bump_leaves_family_unchanged():
    F = fk_nn(0.7)
    G = perturb(F, zero_bump(2))
    x = SeqWindow(-4, np.linspace(-1, 2, 9))
    assert local_energy(G, 0, x) == local_energy(F, 0, x)
    assert grad_component(G, 0, x) == grad_component(F, 0, x)


def test_perturbed_gradient_is_local():
    F = fk_nnn(0.3)
    phi = make_bump(0.1, 0.6, 0.05, 2)
    G = perturb(F, phi)
    x = SeqWindow(-6, np.linspace(-1.1, 2.3, 13))
    for i in (-1, 0, 2):
        d = grad_component(G, i, x) - grad_component(F, i, x)
        assert d == pytest.approx(phi(x.at(i), 1), abs=1e-13)
    for i, k in [(0, 1), (0, 2), (-1, 1)]:
        assert hessian_entry(G, i, k, x) == hessian_entry(F, i, k, x)


def test_perturbed_family_rebuilds_from_spec():
    phi = make_bump(0.1, 0.6, 0.05, 2)
    G = perturb(fk_nn(1), phi)
    H = family_with_bumps(G.spec())
    x = SeqWindow(-3, np.linspace(0, 1.3, 7))
    assert local_energy(H, 0, x) == local_energy(G, 0, x)
    assert bump_from_dict(phi.to_dict())(0.3) == phi(0.3)


def test_cantor_bump_single_gap_reduces():
    g = GapInterval(0.2, 0.6)
    s = cantor_bump([g], 0.01, 2)
    b = make_bump(0.2, 0.6, 0.01, 2)
    xs = np.linspace(0, 1, 101)
    assert np.array_equal(s(xs), b(xs))


def test_cantor_bump_two_gaps(minimizers_5_3):
    y = minimizers_5_3.members[0].config
    gaps = find_gaps(extended_orbit(y))[:2]
    s = cantor_bump(gaps, 0.01, 2)
    for g in gaps:
        lo, hi = g.middle_half
        assert s((lo + hi) / 2) > 0
    pts = np.asarray(extended_orbit(y).points, dtype=float)
    assert np.all(s(pts) == 0.0)
    F = fk_nn(1)
    G = perturb(F, s)
    assert periodic_action(G, y) == periodic_action(F, y)
    assert s.cnorm() <= 0.01 * 2


def test_cantor_bump_rejects_overlap():
    with pytest.raises(ValueError):
        cantor_bump([GapInterval(0.1, 0.5), GapInterval(0.3, 0.7)], 0.01, 2)


def test_plateau_probe_moves_one_site(minimizers_5_3):
    y = minimizers_5_3.members[0].config
    gap = find_gaps(extended_orbit(y))[0]
    z = plateau_probe(y, gap, 2, [1])
    lo, hi = gap.middle_half
    v = float(z.at(1)) % 1.0
    assert gap.contains(v)
    assert z.p == 10 and np.count_nonzero(np.asarray(z.values) != np.asarray(y.extend(2).values)) == 1


def test_periodic_destruction_small_run():
    rep = destroy_periodic(fk_nn(0), 3, 2, 0.01, 2, n_starts=8, seed=0)
    assert abs(rep.action_unchanged) <= 1e-12
    assert all(p["ok"] for p in rep.probes)
    assert rep.bump.cnorm() <= 0.01
    assert float(rep.gap.length) >= 1 / 3 - 1e-12
    d = rep.to_dict()
    assert d["p"] == 3 and "reminimization" in d

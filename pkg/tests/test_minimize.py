import numpy as np
import pytest

from fklab.lattice import Ordering, PeriodicConfig, compare, is_birkhoff, linear_config, rotation_bound_check, shift
from fklab.minimize import (
    canonical_translate, initial_configs, max_principle_check, minimality_probe, minimize_periodic,
    minimizer_set, pairwise_orderings, reembed_check, tau_witness,
)
from fklab.potentials import fk_nn, fk_nnn, periodic_action, periodic_gradient, window_action


def test_free_chain_action_of_line():
    p, q = 7, 3
    assert periodic_action(fk_nn(0), linear_config(p, q)) == pytest.approx(p * (q / p) ** 2 / 2, rel=1e-14)


def test_action_translation_invariance():
    F = fk_nn(1)
    rng = np.random.default_rng(2)
    x = PeriodicConfig(6, 4, np.sort(rng.uniform(0, 4, 6)))
    for k, l in [(1, 0), (2, 5), (-3, 1), (6, 4)]:
        assert abs(periodic_action(F, shift(x, k, l)) - periodic_action(F, x)) <= 1e-12


def test_action_of_extended_period(minimizers_5_3):
    F = fk_nn(1)
    res = minimizers_5_3.members[0]
    chk = reembed_check(F, res, 3)
    assert chk["action"] == pytest.approx(chk["expected"], rel=1e-12)
    assert chk["grad_norm"] <= 1e-9


def test_window_action_lipschitz_and_additive():
    F = fk_nn(1)
    D = 3.0
    C = D + 1.0
    rng = np.random.default_rng(4)
    from fklab.lattice import SeqWindow
    for _ in range(30):
        vals = np.cumsum(rng.uniform(-1, 1, 30))
        x = SeqWindow(0, vals)
        h = rng.uniform(-0.2, 0.2)
        i = int(rng.integers(5, 25))
        moved = vals.copy()
        moved[i] += h
        y = SeqWindow(0, moved)
        diff = abs(window_action(F, x, 2, 27) - window_action(F, y, 2, 27))
        assert diff <= C * (2 * F.r + 1) * abs(h) + 1e-12
        assert window_action(F, x, 2, 10) + window_action(F, x, 11, 27) == pytest.approx(
            window_action(F, x, 2, 27), abs=1e-12)


def test_free_chain_minimizer_is_a_line():
    res = minimize_periodic(fk_nn(0), 6, 1, init=3, tol=1e-10)
    assert res.converged
    d = np.diff(np.asarray(res.config.span(0, 6), dtype=float))
    assert np.allclose(d, 1 / 6, atol=1e-9)


def test_free_chain_starts_give_vertical_shifts_of_one_line():
    ms = minimizer_set(fk_nn(0), 5, 3, n_starts=6, seed=1)
    base = np.asarray(ms.members[0].config.values, dtype=float)
    for m in ms.members:
        v = np.asarray(m.config.values, dtype=float)
        assert np.allclose(np.diff(v), 3 / 5, atol=1e-8)
        assert np.allclose(v - base, (v - base)[0], atol=1e-8)


def test_standard_family_minimizer(minimizers_5_3):
    F = fk_nn(1)
    res = minimizers_5_3.members[0]
    assert res.converged
    assert np.abs(periodic_gradient(F, res.config)).max() <= 1e-10
    assert is_birkhoff(res.config)[0]
    assert rotation_bound_check(res.config) <= 1


def test_minimizer_survives_random_probes(minimizers_5_3):
    rep = minimality_probe(fk_nn(1), minimizers_5_3.members[0].config, n_probes=100, amplitude=0.1)
    assert rep.minimal, rep.to_dict()


def test_nnn_minimizer_is_birkhoff():
    res = minimize_periodic(fk_nnn(1), 5, 2, init=0, tol=1e-10)
    assert res.converged and is_birkhoff(res.config)[0]


def test_aubry_ordering_all_starts():
    F = fk_nn(1.5)
    starts = initial_configs(8, 5, 20, 0)
    runs = [minimize_periodic(F, 8, 5, s, 1e-10) for s in starts]
    assert all(r.converged for r in runs)
    wmin = min(r.action for r in runs)
    # some starts settle on higher, non-Birkhoff stationary points; only minimizers are compared
    low = [r for r in runs if r.action <= wmin + 1e-9]
    high = [r for r in runs if r.action > wmin + 1e-9]
    assert all(is_birkhoff(r.config)[0] for r in low)
    assert all(r.action > wmin + 1e-4 for r in high)
    for a, b, rel in pairwise_orderings([r.config for r in low]):
        assert rel in ("EqualModTau", Ordering.STRICTLY_BELOW.value, Ordering.STRICTLY_ABOVE.value)


def test_translates_of_a_minimizer_are_strictly_ordered():
    ms = minimizer_set(fk_nn(1.5), 8, 5, n_starts=4, seed=3)
    x = ms.members[0].config
    for k in range(1, 8):
        for l in range(-2, 7):
            assert compare(shift(x, k, l), x) in (Ordering.STRICTLY_BELOW, Ordering.STRICTLY_ABOVE)


def test_dedup_records_witnesses():
    ms = minimizer_set(fk_nn(1.5), 8, 5, n_starts=6, seed=0)
    assert len(ms.members) == 1
    rep = ms.members[0].config
    for start, (k, l) in ms.witnesses[0]:
        assert isinstance(k, int) and isinstance(l, int)
    y = shift(rep, 3, 2)
    k, l = tau_witness(rep, y)
    assert np.allclose(shift(rep, k, l).values, y.values)


def test_canonical_translate_lands_in_unit_interval(minimizers_5_3):
    x = shift(minimizers_5_3.members[0].config, 2, 7)
    c, (k, l) = canonical_translate(x)
    assert 0 <= float(c.at(0)) < 1
    assert np.allclose(shift(x, k, l).values, c.values)


def test_max_principle_equality_for_ordered_pair(minimizers_5_3):
    x = minimizers_5_3.members[0].config
    lhs, rhs = max_principle_check(fk_nn(1), x, x + 1)
    assert lhs == rhs


def test_max_principle_on_crossing_pairs():
    F = fk_nn(1)
    rng = np.random.default_rng(9)
    for _ in range(50):
        x = PeriodicConfig(8, 5, rng.uniform(0, 5, 8))
        y = PeriodicConfig(8, 5, rng.uniform(0, 5, 8))
        lhs, rhs = max_principle_check(F, x, y)
        assert lhs <= rhs + 1e-12


def test_rejects_wrong_class_and_bad_count():
    with pytest.raises(ValueError):
        minimize_periodic(fk_nn(1), 5, 3, init=linear_config(4, 3))
    with pytest.raises(ValueError):
        minimizer_set(fk_nn(1), 5, 3, n_starts=0)


def test_pinned_site_stays_put():
    F = fk_nn(1)
    init = initial_configs(7, 3, 1, 2)[0]
    res = minimize_periodic(F, 7, 3, init=init, fixed=(6,))
    assert float(res.config.values[6]) == float(init.values[6])

from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from corpus import corpus
from mflab.conditionals import (
    ZeroProbabilityError,
    birkhoff_coefficient,
    conditional_table,
    contraction_upper_bound,
    empirical_conditional,
    factor_cylinder_probability,
    find_bad_configuration,
    fit_decay,
    g_n,
    markov_order_probe,
    strong_lumpability,
    variation_estimate,
)
from mflab.sft import allowed_words
from mflab.zoo import furstenberg, positive_merge_3state, symmetric_xor, weak_lumpable_4state

WL4 = weak_lumpable_4state()
SYMMETRIC_POS3 = (("1/2", "1/4", "1/4"), ("1/4", "1/2", "1/4"), ("1/4", "1/4", "1/2"))


def test_wl4_two_letter_cylinder():
    assert factor_cylinder_probability(WL4.model, WL4.system, ("a", "b")) == F(1, 6)


def test_disallowed_word_has_mass_zero():
    assert factor_cylinder_probability(WL4.model, WL4.system, ("b", "b")) == 0


def test_unknown_symbol_is_value_error():
    with pytest.raises(ValueError):
        factor_cylinder_probability(WL4.model, WL4.system, ("z",))


@pytest.mark.parametrize("idx", range(0, 50, 5))
def test_forward_matches_enumeration(idx):
    m, fs = corpus()[idx]
    for n in (1, 2, 5):
        brute = oracles.fibre_masses(m, fs, n)
        for y in allowed_words(fs.image, n):
            assert factor_cylinder_probability(m, fs, y) == brute.get(y, 0)


def test_double_mode_matches_exact():
    for m, fs in corpus()[:10]:
        f = m.as_float()
        for y in allowed_words(fs.image, 6):
            assert abs(factor_cylinder_probability(f, fs, y) - float(factor_cylinder_probability(m, fs, y))) <= 1e-12


def test_g_n_matches_enumeration_and_normalizes():
    for m, fs in corpus()[:15]:
        for tail in allowed_words(fs.image, 3):
            if oracles.fibre_mass(m, fs, tail) == 0:
                with pytest.raises(ZeroProbabilityError):
                    g_n(m, fs, ("A",) + tail)
                continue
            total = 0
            for b in fs.image.alphabet:
                y = (b,) + tail
                g = g_n(m, fs, y)
                assert g == oracles.fibre_mass(m, fs, y) / oracles.fibre_mass(m, fs, tail)
                total += g
            assert total == 1


def test_g_n_length_one_is_marginal():
    assert g_n(WL4.model, WL4.system, ("a",)) == F(2, 3)


def test_strong_lumpability_wl4_fails_with_witness():
    res = strong_lumpability(WL4.model.transition, WL4.system.map)
    assert not res.lumpable
    assert res.witness[:2] == ("1", "3")


def test_symmetric_three_state_merge_is_lumpable():
    nm = positive_merge_3state(SYMMETRIC_POS3)
    res = strong_lumpability(nm.model.transition, nm.system.map)
    assert res.lumpable
    assert res.matrix == ((F(3, 4), F(1, 4)), (F(1, 2), F(1, 2)))
    # a lumpable factor is Markov, so every variation vanishes
    for n in (1, 2, 3):
        assert variation_estimate(nm.model.as_float(), nm.system, n, 4).lower < 1e-12


def test_default_pos3_is_not_lumpable():
    nm = positive_merge_3state()
    assert not strong_lumpability(nm.model.transition, nm.system.map).lumpable


def test_non_positive_pos3_rejected():
    with pytest.raises(ValueError):
        positive_merge_3state((("1/2", "1/2", "0"), ("1/4", "1/2", "1/4"), ("1/4", "1/4", "1/2")))


def test_markov_order_wl4():
    r = markov_order_probe(WL4.model, WL4.system, depth=8)
    assert r.exact
    assert r.order == 1
    assert r.matrix == ((F(1, 2), F(1, 4), F(1, 4)), (F(1), F(0), F(0)), (F(1), F(0), F(0)))


def test_markov_order_xor_is_zero():
    nm = symmetric_xor(F(1, 4))
    assert markov_order_probe(nm.model, nm.system, depth=6).order == 0


def test_markov_order_furstenberg_not_finite():
    nm = furstenberg(F(7, 10))
    r = markov_order_probe(nm.model, nm.system, depth=6)
    assert r.order is None
    assert r.violation is not None


def test_birkhoff_coefficient():
    assert birkhoff_coefficient([[1, 1], [1, 1]]) == 0
    assert birkhoff_coefficient([[1, 0], [1, 1]]) == 1
    assert 0 < birkhoff_coefficient([[2, 1], [1, 2]]) < 1


def test_variation_bounds_pos3():
    nm = positive_merge_3state()
    f = nm.model.as_float()
    prev = None
    for n in range(1, 6):
        vb = variation_estimate(f, nm.system, n, 6)
        assert 0 < vb.lower <= vb.upper
        assert not vb.sampled
        if prev is not None:
            assert vb.lower < prev
        prev = vb.lower


def test_variation_lower_bound_is_a_realized_gap():
    nm = positive_merge_3state()
    vb = variation_estimate(nm.model, nm.system, 3, 5)
    w = vb.witness
    hi = g_n(nm.model, nm.system, w.center + w.upper)
    lo = g_n(nm.model, nm.system, w.center + w.lower)
    assert abs(float(hi - lo) - vb.lower) < 1e-12


def test_lower_bound_monotone_in_extension():
    nm = positive_merge_3state()
    f = nm.model.as_float()
    values = [variation_estimate(f, nm.system, 2, k).lower for k in (1, 2, 4, 6)]
    assert values == sorted(values)


def test_contraction_bound_is_one_without_positivity():
    nm = furstenberg(0.7)
    assert contraction_upper_bound(nm.model, nm.system, 5) == 1.0


def test_bad_configuration_furstenberg():
    nm = furstenberg(0.7)
    w = find_bad_configuration(nm.model.as_float(), nm.system, 3, 40, 0.39)
    assert w is not None and w.gap >= 0.39
    assert len(w.center) == 4 and len(w.upper) == 40


def test_no_bad_configuration_for_fair_coin():
    nm = furstenberg(0.5)
    assert find_bad_configuration(nm.model, nm.system, 3, 20, 1e-9) is None


def test_find_bad_configuration_validates():
    with pytest.raises(ValueError):
        find_bad_configuration(WL4.model, WL4.system, 2, 2, 0)


def test_fit_decay_exact_geometric():
    fit = fit_decay([1, 2, 3, 4], [0.5**n for n in (1, 2, 3, 4)])
    assert abs(fit.rate - 0.5) < 1e-12 and abs(fit.r_squared - 1) < 1e-12
    assert fit_decay([1, 2], [0.1, 0.01]) is None


def test_conditional_table_pos3():
    nm = positive_merge_3state()
    t = conditional_table(nm.model.as_float(), nm.system, ("a", "a", "b", "a", "a", "b"), m_ext=5)
    assert len(t.values) == 6 and len(t.variation) == 5
    assert t.fit.rate < 1


def test_empirical_is_deterministic_and_close():
    nm = furstenberg(0.5)
    a = empirical_conditional(nm.model, nm.system, ("+1", "-1", "+1"), 50_000, seed=5)
    b = empirical_conditional(nm.model, nm.system, ("+1", "-1", "+1"), 50_000, seed=5)
    assert a == b
    assert abs(a.estimate - 0.5) < 4 * a.stderr


def test_empirical_flags_zero_hits():
    est = empirical_conditional(WL4.model, WL4.system, ("a", "b", "b"), 1000, seed=0)
    assert est.flagged and est.estimate is None


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 49), st.integers(2, 6), st.randoms(use_true_random=False))
def test_g_chain_telescopes_to_cylinder(idx, n, rnd):
    m, fs = corpus()[idx]
    words = [y for y in allowed_words(fs.image, n) if factor_cylinder_probability(m, fs, y) > 0]
    if not words:
        return
    y = rnd.choice(words)
    prod = F(1)
    for k in range(len(y)):
        prod *= g_n(m, fs, y[k:])
    assert prod == factor_cylinder_probability(m, fs, y)

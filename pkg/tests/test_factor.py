import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpus import corpus
from mflab.factor import (
    FactorMap,
    FactorSystem,
    check_assumptions,
    fibre_window,
    induced_image_adjacency,
    is_fibre_mixing,
    reachability,
    transitivity_index,
    verify_image_sft,
)
from mflab.sft import SubshiftSpec, allowed_words, is_irreducible
from mflab.zoo import furstenberg, positive_merge_3state, symmetric_xor, weak_lumpable_4state

EVEN = SubshiftSpec.from_matrix("123", [[1, 1, 0], [0, 0, 1], [1, 1, 0]])
GOLDEN2 = SubshiftSpec.from_matrix("12", [[1, 1], [1, 0]])


def system(shift, mapping, image_adjacency=None):
    return FactorSystem.build(shift, FactorMap.from_mapping(shift.alphabet, mapping), image_adjacency)


def rectangular(r):
    rows = [i for i, row in enumerate(r) if any(row)]
    cols = [j for j in range(len(r[0])) if any(row[j] for row in r)]
    return all(r[i][j] for i in rows for j in cols)


def test_factor_map_orders_targets_by_first_appearance():
    f = FactorMap.from_mapping(EVEN.alphabet, {"1": "x", "2": "y", "3": "y"})
    assert f.target.symbols == ("x", "y")
    assert f.preimage(1) == (1, 2)
    assert f.apply(("3", "1")) == ("y", "x")
    assert not f.is_injective()


def test_factor_map_must_be_surjective_and_total():
    with pytest.raises(ValueError, match="surjective"):
        FactorMap.from_mapping(EVEN.alphabet, {"1": "x", "2": "x", "3": "x"}, target=("x", "y"))
    with pytest.raises(ValueError, match="does not assign"):
        FactorMap.from_mapping(EVEN.alphabet, {"1": "x"})
    with pytest.raises(ValueError, match="unknown"):
        FactorMap.from_mapping(EVEN.alphabet, {"1": "x", "2": "x", "3": "x", "9": "x"})


def test_identity_is_injective():
    assert FactorMap.identity(EVEN.alphabet).is_injective()


def test_induced_adjacency():
    fs = system(EVEN, {"1": "1", "2": "0", "3": "0"})
    assert induced_image_adjacency(EVEN, fs.map).adjacency == ((1, 1), (1, 1))


def test_image_forbidding_realized_pair_rejected():
    with pytest.raises(ValueError, match="forbids"):
        system(EVEN, {"1": "1", "2": "0", "3": "0"}, image_adjacency=[[1, 0], [1, 1]])


def test_even_shift_image_is_not_an_sft():
    fs = system(EVEN, {"1": "1", "2": "0", "3": "0"})
    check = verify_image_sft(fs)
    assert not check.ok
    assert check.witness == ("1", "0", "1")
    assert check.complete


def test_presets_satisfy_image_condition():
    for nm in (furstenberg(0.7), weak_lumpable_4state(), positive_merge_3state(), symmetric_xor(0.4)):
        check = check_assumptions(nm.system)
        assert check.ok and check.complete


def test_shortest_witness_is_really_unrealized():
    for m, fs in corpus():
        check = verify_image_sft(fs)
        if check.ok:
            continue
        w = check.witness
        assert fs.image.allows(w)
        realized = {fs.map.apply(x) for x in allowed_words(fs.domain, len(w))}
        assert w not in realized
        shorter = {fs.map.apply(x) for x in allowed_words(fs.domain, len(w) - 1)}
        assert all(v in shorter for v in allowed_words(fs.image, len(w) - 1))


def test_fibre_window_trims_inside_window():
    nm = weak_lumpable_4state()
    fw = fibre_window(nm.system, ("a", "a", "b"))
    # only state 1 precedes b, so the a-run is forced onto 1
    assert fw.sets == ((0,), (0,), (1,))
    assert fw.removed[0] == (2,)


def test_fibre_window_rejects_disallowed():
    nm = weak_lumpable_4state()
    with pytest.raises(ValueError):
        fibre_window(nm.system, ("b", "b"))


def test_transitivity_index_positive_and_golden():
    pos = positive_merge_3state()
    assert transitivity_index(fibre_window(pos.system, ("a", "a", "b", "a"))) == 1
    golden = system(GOLDEN2, {"1": "A", "2": "A"})
    assert transitivity_index(fibre_window(golden, ("A",) * 5)) == 2


def test_transitivity_index_absent_for_furstenberg():
    nm = furstenberg(0.7)
    assert transitivity_index(fibre_window(nm.system, ("+1",) * 6)) is None


def test_reachability_wl4():
    nm = weak_lumpable_4state()
    assert reachability(nm.system, ("a", "a")) == ((1, 0), (0, 1))


@pytest.mark.parametrize(
    "nm, verdict",
    [
        (positive_merge_3state(), "mixing"),
        (furstenberg(0.7), "not_mixing"),
        (symmetric_xor(0.4), "not_mixing"),
        (weak_lumpable_4state(), "not_mixing"),
    ],
)
def test_mixing_verdicts_with_verified_witness(nm, verdict):
    v = is_fibre_mixing(nm.system)
    assert v.verdict == verdict
    if verdict == "mixing":
        assert v.index == 1
        return
    r = reachability(nm.system, v.witness_word)
    assert not rectangular(r)
    names = nm.model.alphabet.symbols
    src = nm.system.preimages[nm.system.image.alphabet.index(v.witness_word[0])]
    dst = nm.system.preimages[nm.system.image.alphabet.index(v.witness_word[-1])]
    i, j = src.index(names.index(v.witness_pair[0])), dst.index(names.index(v.witness_pair[1]))
    assert any(r[i]) and any(row[j] for row in r) and not r[i][j]


def test_golden_fibre_mixing_index_two():
    golden = system(GOLDEN2, {"1": "A", "2": "A"})
    v = is_fibre_mixing(golden)
    assert v.verdict == "mixing" and v.index == 2


def test_injective_factor_is_mixing():
    fs = FactorSystem.build(EVEN, FactorMap.identity(EVEN.alphabet))
    assert is_fibre_mixing(fs).verdict == "mixing"


def _brute_mixing(fs, index, extra=4):
    for n in range(index + 1, index + 1 + extra):
        for y in allowed_words(fs.image, n):
            r = reachability(fs, y)
            if any(any(row) for row in r) and not rectangular(r):
                return False
    return True


def _brute_long_nonrect(fs, length):
    return any(
        not rectangular(r)
        for y in allowed_words(fs.image, length)
        for r in [reachability(fs, y)]
        if any(any(row) for row in r)
    )


def test_mixing_decision_matches_enumeration_on_corpus():
    for _, fs in corpus():
        v = is_fibre_mixing(fs)
        if v.verdict == "mixing":
            assert _brute_mixing(fs, v.index)
            if v.index > 1:
                assert _brute_long_nonrect(fs, v.index)  # index is tight
        else:
            assert v.verdict == "not_mixing"
            assert _brute_long_nonrect(fs, 9)


@settings(max_examples=80, deadline=None)
@given(
    st.lists(st.lists(st.integers(0, 1), min_size=4, max_size=4), min_size=4, max_size=4),
    st.lists(st.integers(0, 1), min_size=4, max_size=4),
)
def test_mixing_decision_matches_enumeration(adj, labels):
    shift = SubshiftSpec.from_matrix("1234", adj)
    if not is_irreducible(shift) or len(set(labels)) < 2:
        return
    fs = system(shift, {str(i + 1): "AB"[b] for i, b in enumerate(labels)})
    v = is_fibre_mixing(fs)
    if v.verdict == "mixing":
        assert _brute_mixing(fs, v.index, extra=3)
    else:
        assert _brute_long_nonrect(fs, 8)


def test_semigroup_cap_gives_inconclusive():
    nm = furstenberg(0.7)
    assert is_fibre_mixing(nm.system, cap=1).verdict == "inconclusive"

import itertools

import numpy as np
import pytest

from catalan_sat.combinatorics import count_classes, stirling2
from catalan_sat.patterns import (
    AmbiguityError,
    GrammarLang,
    builtin,
    census,
    classify_simple_x,
    decompose,
    expansion_preserves_key,
    generate_expansions,
    index_structure,
    is_simple_contradiction,
    is_simple_tautology,
    random_expansion,
    repetition_histogram,
    repetitions,
    restrictions,
    simple_x_counts,
    st_count_exact,
)
from catalan_sat.trees import canonicalize, dual, enumerate_classes, enumerate_structures, key_of, parse_class, truth_table

from conftest import as_pair, brute_classes, is_simple_taut, leaves_on_path

FIG1_LEFT = parse_class("(((1:+ | (1:- | 2:+)) | 3:+) | (4:+ & 1:+))")
FIG1_RIGHT = parse_class("((1:+ & 2:+) | ((3:+ | 1:-) | 1:+))")


def cls(text):
    return parse_class(text)


def test_builtin_examples():
    s, n = builtin("S"), builtin("N")
    assert decompose(s, cls("(1:+ | 1:-)")).pattern_leaves == {0, 1}
    assert len(decompose(n, FIG1_LEFT).pattern_leaves) == 5
    d = decompose(s, cls("((1:+ & 2:+) | 3:+)"))
    assert d.pattern_leaves == {2}
    nodes = index_structure(cls("((1:+ & 2:+) | 3:+)").structure)
    assert {nodes[i].leaf for i in d.placeholder_roots} == {0, 1}
    for name in ("P", "N_pow(2)", "N_pow(3)", "N_oplus_P", "R(1)"):
        assert builtin(name).name
    with pytest.raises(ValueError):
        builtin("Q")


def test_decompose_examples():
    for name in ("N", "P", "S"):
        assert decompose(builtin(name), cls("1:+")).pattern_leaves == {0}
    d = decompose(builtin("N"), FIG1_LEFT)
    assert len(d.placeholder_roots) == 1
    nodes = index_structure(FIG1_LEFT.structure)
    (root,) = d.placeholder_roots
    assert nodes[root].op == "." and FIG1_LEFT.blocks[nodes[root].leaf] == 1


@pytest.mark.parametrize("name", ["N", "P", "S", "N_pow(2)", "N_oplus_P", "R(1)"])
def test_partition_property(name):
    lang = builtin(name)
    for n in range(1, 6):
        for s in enumerate_structures(n):
            nodes = index_structure(s)
            d = decompose(lang, s)
            under = [set(range(nodes[r].lo, nodes[r].hi)) for r in d.placeholder_roots]
            covered = set(d.pattern_leaves)
            for u in under:
                assert not covered & u
                covered |= u
            assert covered == set(range(n))
            assert sum(len(u) for u in under) + len(d.pattern_leaves) == n


def test_s_leaves_match_oracle():
    for n in range(1, 6):
        for s in enumerate_structures(n):
            assert decompose(builtin("S"), s).pattern_leaves == set(leaves_on_path(s, "|"))


def test_ambiguous_grammar_detected():
    amb = GrammarLang("amb", [("|", "rec", "rec"), ("|", "rec", "hole")])
    with pytest.raises(AmbiguityError):
        decompose(amb, cls("(1:+ | 2:+)"))


def test_repetition_examples():
    n = builtin("N")
    assert repetitions(n, FIG1_LEFT) == 1
    assert repetitions(n, cls("(1:+ | 2:+)")) == 0
    assert repetitions(n, cls("((1:+ | 1:+) | 1:+)")) == 2
    assert restrictions(n, FIG1_LEFT, {2}) == 2
    assert restrictions(n, cls("(1:+ | 2:+)"), set()) == 0
    assert restrictions(n, cls("((1:+ | 2:+) | 1:+)"), {2}) == 2


def test_restrictions_dominate_repetitions():
    n = builtin("N")
    for c in enumerate_classes(4, 4):
        r = repetitions(n, c)
        assert r >= 0
        assert restrictions(n, c, {1}) >= r


def test_simple_recognizers_examples():
    assert is_simple_tautology(cls("(1:+ | 1:-)"))
    assert is_simple_tautology(FIG1_RIGHT)
    assert not is_simple_tautology(cls("(1:+ & 1:-)"))
    assert is_simple_contradiction(cls("(1:+ & 1:-)"))
    assert not is_simple_contradiction(cls("(1:+ | 1:-)"))
    assert is_simple_contradiction(dual(FIG1_RIGHT))


def test_simple_recognizers_sound_and_match_oracle():
    for n in range(1, 6):
        for c in enumerate_classes(n, min(n, 3)):
            t = truth_table(c)
            full = (1 << (1 << t.m)) - 1
            st = is_simple_tautology(c)
            assert st == is_simple_taut(*as_pair(c), "|")
            assert is_simple_contradiction(c) == is_simple_taut(*as_pair(c), "&")
            if st:
                assert t.bits == full
            if is_simple_contradiction(c):
                assert t.bits == 0


def test_classify_examples():
    assert classify_simple_x(cls("(1:+ & (2:+ | 2:-))")) == "typeT"
    assert classify_simple_x(cls("(1:+ | (1:+ & 2:+))")) == "typeX"
    assert classify_simple_x(cls("(1:+ | 2:+)")) == "none"
    # the absorption shape of the figure: x or (a and (x and b))
    assert classify_simple_x(cls("(1:+ | (2:+ & (1:+ & 3:+)))")) == "typeX"
    # type T wins over type X
    assert classify_simple_x(cls("(1:+ & (1:+ | 1:-))")) == "typeT"


def test_simple_x_computes_projection():
    for n in range(2, 6):
        for c in enumerate_classes(n, 3):
            if classify_simple_x(c) != "none":
                assert key_of(c).essential == 1 and str(key_of(c)) == "1:01"


def test_census_examples():
    n = builtin("N")
    assert census(2, 2, n, 1) == (2, 2)
    assert census(3, 2, n, 0)[1] == count_classes(3, 2)
    assert sum(repetition_histogram(4, 4, n).values()) == count_classes(4, 4)


def test_census_matches_direct_count():
    for name in ("N", "P", "S", "N_pow(2)"):
        lang = builtin(name)
        for n in range(1, 5):
            hist: dict = {}
            for c in enumerate_classes(n, n):
                r = repetitions(lang, c)
                hist[r] = hist.get(r, 0) + 1
            assert repetition_histogram(n, n, lang) == hist


def test_census_side_symmetry():
    # swapping connectives maps N-repetitions to P-repetitions
    for n in range(1, 6):
        assert repetition_histogram(n, n, builtin("N")) == repetition_histogram(n, n, builtin("P"))


def test_placeholder_side_does_not_change_census():
    left = GrammarLang("N_left", [("|", "rec", "rec"), ("&", "hole", "rec")])
    for n in range(1, 6):
        for k in (1, 2, n):
            assert repetition_histogram(n, k, left) == repetition_histogram(n, k, builtin("N"))


def test_st_count_examples():
    assert st_count_exact(2, 2) == 1
    assert st_count_exact(1, 1) == 0
    for n in range(1, 5):
        for k in range(1, n + 1):
            expected = sum(1 for t, lab in brute_classes(n, k) if is_simple_taut(t, lab))
            assert st_count_exact(n, k) == expected


def test_simple_x_counts_match_formula():
    # type T: leaf next to a simple tautology (and-root) or contradiction (or-root),
    # on either side; the leaf takes one of 2q old literals or a new block
    for n in range(3, 6):
        for k in range(1, n + 1):
            per_q = st_count_exact(n - 1, k, by_blocks=True)
            formula = 4 * sum(cnt * (2 * q + (q < k)) for q, cnt in per_q.items())
            assert simple_x_counts(n, k)["typeT"] == formula


def test_expansion_examples():
    x = cls("1:+")
    got = set(generate_expansions(x, "T", 3, 2))
    assert canonicalize(("&", ".", ("|", ".", ".")), [(1, False), (2, False), (2, True)]) in got
    got2 = {str(c) for c in generate_expansions(x, "X", 2, 2)}
    assert {"(1:+ | 1:+)", "(1:+ & 1:+)"} <= got2
    assert list(generate_expansions(x, "T", 1, 2)) == []


@pytest.mark.parametrize("base", ["1:+", "(1:+ & 2:+)", "(1:+ | 1:-)"])
@pytest.mark.parametrize("kind", ["T", "X"])
def test_expansions_preserve_key(base, kind):
    b = cls(base)
    for target in range(b.size + 1, 6):
        out = list(generate_expansions(b, kind, target, 4))
        # a T-expansion tree needs two leaves
        assert bool(out) == (kind == "X" or target - b.size >= 2)
        assert len(out) == len(set(out))
        assert all(c.size == target and expansion_preserves_key(b, c) for c in out)


def test_random_expansion():
    rng = np.random.default_rng(1)
    b = cls("(1:+ & 2:+)")
    made = 0
    for _ in range(300):
        c = random_expansion(b, "T" if rng.random() < 0.5 else "X", 8, 6, rng)
        if c is not None:
            made += 1
            assert c.size == 8 and expansion_preserves_key(b, c)
    assert made > 50

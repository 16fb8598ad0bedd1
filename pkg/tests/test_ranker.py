import pytest
from hypothesis import given, settings, strategies as st

from exguard.errors import UnknownNameError
from exguard.javatext import content_terms
from exguard.ranker import (
    RankConfig,
    RankedException,
    grade,
    mock_scores,
    rank,
    score,
    select,
)

from conftest import failing_gateway


def ranked(type_name, g, ref="r"):
    return RankedException(
        type_name=type_name, likelihood=g, suitability=g, grade=g,
        strategy=None, segment_ref=ref,
    )


# --- score ---------------------------------------------------------------------


def test_mock_score_filereader_segment(tree, gateway):
    segment = "FileReader reader = new FileReader(path);"
    likelihood, suitability = score("IOException", segment, tree, gateway)
    assert likelihood > 0
    assert suitability == 1.0
    # the mock backend must agree with the published fallback formula
    assert (likelihood, suitability) == mock_scores("IOException", segment, tree)
    prop_terms = content_terms(tree.node("IOException").property)
    seg_terms = content_terms(segment)
    assert likelihood == pytest.approx(len(prop_terms & seg_terms) / len(prop_terms))


def test_score_unknown_type(tree, gateway):
    with pytest.raises(UnknownNameError):
        score("NoSuchException", "x();", tree, gateway)


def test_score_degrades_to_mock_formula(tree):
    gw = failing_gateway()
    segment = "FileReader reader = new FileReader(path);"
    assert score("IOException", segment, tree, gw) == mock_scores("IOException", segment, tree)
    assert gw.degraded_calls == 1


def test_score_clamps_out_of_range(tree):
    class OverEagerBackend:
        name = "over"
        is_mock = False

        def complete_text(self, prompt, timeout_s):
            return (
                '{"Exceptions": [{"ExceptionType": "IOException",'
                ' "LikelihoodScore": 1.7, "SuitabilityScore": -0.2}]}'
            )

    from exguard.gateway import BackendConfig, Gateway

    gw = Gateway(OverEagerBackend(), BackendConfig(backoff_s=0.0))
    likelihood, suitability = score("IOException", "x();", tree, gw)
    assert likelihood == 1.0
    assert suitability == 0.0


# --- grade ---------------------------------------------------------------------


def test_grade_examples():
    config = RankConfig(alpha=0.5, beta=0.5, gamma=0.6)
    assert grade(0.8, 0.6, config) == pytest.approx(0.7)
    assert grade(0.0, 0.0, config) == 0.0
    assert grade(0.3, 0.9, RankConfig(alpha=1.0, beta=0.0)) == pytest.approx(0.3)


def test_config_rejects_degenerate_weights():
    with pytest.raises(ValueError):
        RankConfig(alpha=0.0, beta=0.0)
    with pytest.raises(ValueError):
        RankConfig(alpha=-1.0, beta=2.0)


@given(
    st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1),
)
def test_grade_monotone(l1, l2, u1, u2):
    config = RankConfig()
    if l1 <= l2:
        assert grade(l1, u1, config) <= grade(l2, u1, config) + 1e-12
    if u1 <= u2:
        assert grade(l1, u1, config) <= grade(l1, u2, config) + 1e-12


# --- rank ----------------------------------------------------------------------


def test_rank_descending():
    out = rank([ranked("A", 0.7), ranked("B", 0.9), ranked("C", 0.1)])
    assert [c.grade for c in out] == [0.9, 0.7, 0.1]


def test_rank_tie_break_by_name():
    out = rank([ranked("SQLException", 0.5), ranked("IOException", 0.5)])
    assert [c.type_name for c in out] == ["IOException", "SQLException"]


def test_rank_empty():
    assert rank([]) == []


grades_strategy = st.lists(
    st.tuples(st.sampled_from("ABCDE"), st.floats(0, 1)), max_size=8
)


@settings(max_examples=200)
@given(grades_strategy)
def test_rank_is_permutation(items):
    candidates = [ranked(name, g) for name, g in items]
    out = rank(candidates)
    assert sorted(out, key=id if False else lambda c: (c.type_name, c.grade)) == sorted(
        candidates, key=lambda c: (c.type_name, c.grade)
    )
    assert [c.grade for c in out] == sorted((c.grade for c in out), reverse=True)


@settings(max_examples=200)
@given(
    st.lists(st.tuples(st.sampled_from("ABCDE"), st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=8),
    st.floats(min_value=0.01, max_value=50),
)
def test_scaling_weights_preserves_order_and_argmax(items, c):
    base = RankConfig(alpha=0.5, beta=0.5)
    scaled = RankConfig(alpha=0.5 * c, beta=0.5 * c)

    def build(config):
        return rank([
            RankedException(
                type_name=name, likelihood=l, suitability=u,
                grade=grade(l, u, config), strategy=None, segment_ref="r",
            )
            for name, l, u in items
        ])

    order_a = [(x.type_name, x.segment_ref) for x in build(base)]
    order_b = [(x.type_name, x.segment_ref) for x in build(scaled)]
    assert order_a == order_b


# --- select --------------------------------------------------------------------


def test_select_strict_threshold():
    out = select(rank([ranked("A", 0.7), ranked("B", 0.5)]), gamma=0.6)
    assert [c.grade for c in out] == [0.7]


def test_select_excludes_exact_gamma():
    assert select([ranked("A", 0.6)], gamma=0.6) == []


def test_select_keeps_all_above_zero():
    out = select(rank([ranked("A", 0.2), ranked("B", 0.9)]), gamma=0.0)
    assert len(out) == 2


@settings(max_examples=200)
@given(grades_strategy, st.floats(0, 1))
def test_select_is_downward_closed(items, gamma):
    out = rank([ranked(name, g) for name, g in items])
    kept = select(out, gamma)
    assert all(c.grade > gamma for c in kept)
    # if an item is kept, everything with a strictly higher grade is kept too
    kept_ids = {id(c) for c in kept}
    for item in kept:
        for other in out:
            if other.grade > item.grade:
                assert id(other) in kept_ids
    # selection preserves ranked order
    assert kept == [c for c in out if c.grade > gamma]

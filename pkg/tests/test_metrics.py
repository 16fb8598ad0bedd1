import pytest
from hypothesis import given, settings, strategies as st

from exguard.errors import ExguardError
from exguard.metrics import (
    AcrsRule,
    Detections,
    GeneratedBlock,
    GroundTruth,
    acc,
    acrs,
    cov,
    cov_p,
    crs,
    default_acrs_rules,
    edit_similarity,
    evaluate,
    judge,
    levenshtein,
    normalize_code,
)

from conftest import failing_gateway


def lev_oracle(a: str, b: str, memo=None) -> int:
    """Exhaustive recursion on suffixes (independent of the DP implementation)."""
    if memo is None:
        memo = {}
    key = (a, b)
    if key in memo:
        return memo[key]
    if not a:
        result = len(b)
    elif not b:
        result = len(a)
    else:
        cost = 0 if a[0] == b[0] else 1
        result = min(
            lev_oracle(a[1:], b, memo) + 1,
            lev_oracle(a, b[1:], memo) + 1,
            lev_oracle(a[1:], b[1:], memo) + cost,
        )
    memo[key] = result
    return result


# --- levenshtein ---------------------------------------------------------------


def test_levenshtein_examples():
    assert levenshtein("kitten", "sitting") == 3
    assert lev_oracle("kitten", "sitting") == 3
    assert levenshtein("abc", "abc") == 0
    assert levenshtein("", "abc") == 3


@settings(max_examples=300)
@given(st.text("abc", max_size=8), st.text("abc", max_size=8), st.text("abc", max_size=8))
def test_levenshtein_is_a_metric(a, b, c):
    assert levenshtein(a, b) == levenshtein(b, a)
    assert (levenshtein(a, b) == 0) == (a == b)
    assert levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c)


# --- edit similarity -------------------------------------------------------------


def test_edit_similarity_examples():
    assert edit_similarity("same", "same") == 1.0
    assert edit_similarity("abc", "abd") == pytest.approx(2 / 3)
    assert edit_similarity("", "abc") == 0.0
    assert edit_similarity("", "") == 1.0


def test_edit_similarity_symmetric_and_bounded():
    pairs = [("abc", "xyz"), ("try { }", "try{}"), ("", "x")]
    for g, a in pairs:
        assert edit_similarity(g, a) == edit_similarity(a, g)
        assert 0.0 <= edit_similarity(g, a) <= 1.0


def test_normalization_ignores_incidental_whitespace():
    a = "int a = 1;   \n\n\n\nint b = 2;\n"
    b = "int a = 1;\n\nint b = 2;"
    assert normalize_code(a) == normalize_code(b)
    assert edit_similarity(a, b) == 1.0
    assert edit_similarity(a, b, raw=True) < 1.0


# --- coverage metrics -------------------------------------------------------------


def test_cov_examples():
    spans = [(1, 2), (4, 6), (9, 9), (12, 14)]
    assert cov(spans, spans) == 100.0
    assert cov(spans, spans[:3]) == 75.0
    # over-detection is not penalized
    assert cov(spans, spans + [(20, 22)]) == 100.0
    assert cov([], [(1, 1)]) is None


def test_cov_requires_exact_span_match():
    assert cov([(5, 7)], [(5, 8)]) == 0.0


def test_cov_p_examples():
    actual = [(1, 1), (3, 3), (5, 5), (7, 7)]
    detected = [(1, 1), (3, 3), (5, 5), (10, 10), (12, 12)]
    assert cov_p(actual, detected) == pytest.approx(50.0)  # TP=3, FP=2, P=4
    assert cov_p(actual, actual) == 100.0
    off_by_one = [(s + 1, e + 1) for s, e in actual]
    assert cov_p(actual, off_by_one) == 0.0
    assert cov_p([], [(1, 1)]) is None


def test_acc_examples(tree):
    assert acc({"IOException"}, {"FileNotFoundException"}, tree) == 100.0
    assert acc({"FileNotFoundException"}, {"IOException"}, tree) == 0.0
    assert acc({"IOException"}, {"IOException"}, tree) == 100.0
    assert acc({"IOException"}, set(), tree) is None


def test_acc_never_increases_with_unrelated_type(tree):
    base = acc({"IOException"}, {"FileNotFoundException"}, tree)
    widened = acc({"IOException"}, {"FileNotFoundException", "AssertionError"}, tree)
    assert widened < base


# --- acrs --------------------------------------------------------------------------


def test_acrs_examples():
    assert acrs([AcrsRule("r", 1.0, 1.0, 1.0)]) == 1.0
    rules = [AcrsRule("a", 2.0, 1.0, 2.0), AcrsRule("b", 1.0, 1.0, 1.0)]
    assert acrs(rules) == pytest.approx(2 / 3)
    zeros = [AcrsRule("a", 2.0, 0.0, 2.0), AcrsRule("b", 1.0, 0.0, 1.0)]
    assert acrs(zeros) == 0.0
    with pytest.raises(ExguardError):
        acrs([])


def test_default_rule_table_weights(tree):
    block = GeneratedBlock(
        text="try {\n    x();\n} catch (IOException ex) {\n    System.err.println(ex);\n}",
        hints={"IOException"},
    )
    rules = default_acrs_rules([block], [block.text], tree)
    by_id = {r.rule_id: r for r in rules}
    assert by_id["specific-catch"].weight == 3.0
    assert by_id["non-empty-catch"].weight == 2.0
    assert by_id["catch-order"].weight == 2.0
    assert set(by_id) == {
        "specific-catch", "non-empty-catch", "catch-order",
        "logging-present", "no-swallowed-rethrow", "brace-balance",
    }
    assert acrs(rules) == 1.0


# --- judge and crs ------------------------------------------------------------------


def test_judge_empty_catch_is_bad(tree, gateway):
    block = GeneratedBlock(text="try {\n    x();\n} catch (Exception e) {}", hints=set())
    assert judge(block, tree, gateway) == "bad"


def test_judge_bundled_handle_code_is_good(tree, gateway):
    node = tree.node("IOException")
    block = GeneratedBlock(text=node.handle_code, hints={"IOException"})
    assert judge(block, tree, gateway) == "good"


def test_judge_generic_catch_bad_when_specific_available(tree, gateway):
    block = GeneratedBlock(
        text="try {\n    x();\n} catch (Exception e) {\n    log(e);\n}",
        hints={"IOException"},
    )
    assert judge(block, tree, gateway) == "bad"


def test_judge_degrades_to_local_rules(tree):
    gw = failing_gateway()
    node = tree.node("IOException")
    block = GeneratedBlock(text=node.handle_code, hints={"IOException"})
    assert judge(block, tree, gw) == "good"
    assert gw.degraded_calls == 1


def test_crs_examples():
    assert crs(["good", "good", "good", "bad"]) == 75.0
    assert crs(["good"] * 3) == 100.0
    assert crs(["bad"] * 2) == 0.0
    assert crs([]) is None


# --- evaluate ------------------------------------------------------------------------


def _gt(spans, types, reference):
    return GroundTruth(
        sensitive_spans=spans, try_spans=spans,
        exception_types=types, reference_text=reference,
    )


def _det(spans, types, text, blocks=()):
    return Detections(
        segments=list(spans), try_spans=list(spans),
        exception_types=set(types), generated_text=text, blocks=list(blocks),
    )


def test_evaluate_perfect_match(tree, gateway):
    block_text = "try {\n    x();\n} catch (IOException ex) {\n    System.err.println(ex);\n}"
    gt = {"A.java": _gt([(2, 2)], {"IOException"}, block_text)}
    det = {
        "A.java": _det(
            [(2, 2)], {"IOException"}, block_text,
            blocks=[GeneratedBlock(text=block_text, hints={"IOException"})],
        )
    }
    report = evaluate(gt, det, tree, gateway)
    assert report.cov == 100.0
    assert report.cov_p == 100.0
    assert report.acc == 100.0
    assert report.es == 1.0
    assert report.crs == 100.0
    assert report.counts["tp"] == 1


def test_evaluate_empty_detections(tree, gateway):
    gt = {"A.java": _gt([(2, 2)], {"IOException"}, "ref")}
    det = {"A.java": _det([], set(), "")}
    report = evaluate(gt, det, tree, gateway)
    assert report.cov == 0.0
    assert report.cov_p == 0.0
    assert report.acc is None
    assert "acc" in report.not_applicable


def test_evaluate_key_mismatch(tree, gateway):
    gt = {"A.java": _gt([(1, 1)], set(), "")}
    with pytest.raises(ExguardError, match="B.java"):
        evaluate(gt, {"B.java": _det([], set(), "")}, tree, gateway)


def test_micro_average_equals_per_file_for_single_file(tree, gateway):
    gt = {"A.java": _gt([(1, 1), (3, 3)], {"IOException"}, "x")}
    det = {"A.java": _det([(1, 1)], {"IOException"}, "x")}
    report = evaluate(gt, det, tree, gateway)
    assert report.cov == report.per_file["A.java"]["cov"] == 50.0


@settings(max_examples=200)
@given(
    st.lists(st.tuples(st.integers(1, 12), st.integers(1, 12)), min_size=1, max_size=8),
    st.lists(st.tuples(st.integers(1, 12), st.integers(1, 12)), max_size=8),
)
def test_cov_p_bounded_and_exact_iff(actual, detected):
    value = cov_p(actual, detected)
    assert value is not None
    assert 0.0 <= value <= 100.0
    if set(actual) == set(detected):
        assert value == 100.0
    if value == 100.0:
        assert set(actual) == set(detected)

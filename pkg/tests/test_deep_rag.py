import json

import pytest
from hypothesis import given, settings, strategies as st

from exguard.cee import load_bundled, loads, node_terms
from exguard.deep_rag import (
    EnvContext,
    Query,
    VerificationSample,
    activate,
    assign_labels,
    load_samples,
    refine_labels,
    retrieve,
    verify,
    verify_branches,
)
from exguard.javatext import content_terms
from exguard.planner import FunctionSummary

from conftest import failing_gateway


def sample(sid, text, branch, types):
    return VerificationSample(
        sample_id=sid, text=text, expected_branch=branch, expected_types=frozenset(types)
    )


# --- labels --------------------------------------------------------------------


def test_labels_one_per_branch_with_scenario_terms(tree, gateway):
    labels = assign_labels(tree, gateway)
    assert [l.branch for l in labels] == [b.name for b in tree.branch_roots]
    io_label = next(l for l in labels if l.branch == "IOException")
    assert {"file", "stream"} <= io_label.keywords
    assert all(l.revision == 0 for l in labels)
    assert all(l.keywords for l in labels)


def test_labels_empty_for_two_level_tree(gateway):
    doc = {"name": "Throwable", "children": [
        {"name": "Exception", "children": [], "scenario": "s", "property": "p",
         "info": {"handle_logic": "h"}}], "scenario": "s", "property": "p"}
    tree = loads(json.dumps(doc))
    assert assign_labels(tree, gateway) == []


def test_degraded_labels_equal_scenario_terms(tree):
    gw = failing_gateway()
    labels = assign_labels(tree, gw)
    for label in labels:
        node = tree.node(label.branch)
        assert label.degraded
        assert label.text == node.scenario
        assert label.keywords == content_terms(node.scenario)


# --- activation ----------------------------------------------------------------


def test_activation_by_keyword_overlap(tree, gateway):
    labels = assign_labels(tree, gateway)
    query = Query(unit_id="u", text="read bytes from socket")
    # independent oracle: branches whose keywords overlap the query terms
    expected = {
        l.branch for l in labels if content_terms(query.text) & l.keywords
    }
    assert activate(query, labels) == expected
    assert "IOException" in expected


def test_hints_always_activate(tree, gateway):
    labels = assign_labels(tree, gateway)
    query = Query(unit_id="u", text="zzz qqq", hinted_branches=frozenset({"SQLException"}))
    assert "SQLException" in activate(query, labels)


def test_empty_query_text_rejected():
    with pytest.raises(ValueError):
        Query(unit_id="u", text="   ")


@given(st.sampled_from(["read file", "socket write", "parse number text", "zzz"]))
def test_activation_superset_of_hints(query_text):
    tree = load_bundled()
    labels = [
        # deterministic fallback labels are enough for the property
    ]
    from conftest import failing_gateway as fg

    labels = assign_labels(tree, fg())
    hints = frozenset({"RuntimeException", "SQLException"})
    query = Query(unit_id="u", text=query_text, hinted_branches=hints)
    assert hints <= activate(query, labels)


# --- verification --------------------------------------------------------------


def _labels(tree, gateway):
    return assign_labels(tree, gateway)


def test_verify_perfect_sample(tree, gateway):
    labels = _labels(tree, gateway)
    env = EnvContext()
    good = sample(
        "s1",
        "reading from a file stream with FileReader when the file at the given "
        "path does not exist; opening a missing file for reading",
        "IOException",
        {"FileNotFoundException"},
    )
    report = verify("IOException", [good], 0.7, labels, env, tree, delta=0.05)
    assert report.pass_rates == [1.0]
    assert report.accuracies == [1.0]
    assert env.records == []


def test_verify_failing_sample_records_pattern(tree, gateway):
    labels = _labels(tree, gateway)
    env = EnvContext()
    bad = sample("s2", "zorply quaxing blemwort", "IOException", {"IOException"})
    report = verify("IOException", [bad], 0.7, labels, env, tree)
    assert report.pass_rates == [0.0]
    assert len(env.records) == 1
    assert env.records[0].branch == "IOException"
    assert "zorply" in env.records[0].missing_keywords


def test_verify_mean_is_arithmetic(tree, gateway):
    labels = _labels(tree, gateway)
    env = EnvContext()
    rich = (
        "reading and writing a file or stream with FileReader, FileWriter and "
        "BufferedReader; the network connection to the server may be closed"
    )
    samples = [
        sample("a", rich, "IOException", {"IOException"}),
        sample("b", rich + " while opening a socket", "IOException", {"IOException"}),
        sample("c", "zorply quaxing", "IOException", {"IOException"}),
    ]
    report = verify("IOException", samples, 0.7, labels, env, tree, delta=0.05)
    assert report.pass_rates == [1.0, 1.0, 0.0]
    assert report.mean_pass == pytest.approx(2 / 3)


def test_verify_empty_samples_insufficient(tree, gateway):
    labels = _labels(tree, gateway)
    report = verify("IOException", [], 0.7, labels, EnvContext(), tree)
    assert report.insufficient_data
    assert report.mean_pass is None


# --- refinement ----------------------------------------------------------------


def test_refinement_grows_keywords_and_revision(tree, gateway):
    labels = _labels(tree, gateway)
    env = EnvContext()
    bad = sample("s", "zorply quaxing socketish", "IOException", {"IOException"})
    verify("IOException", [bad], 0.7, labels, env, tree)
    before = next(l for l in labels if l.branch == "IOException")
    old_keywords = set(before.keywords)
    refined = refine_labels("IOException", env, labels, gateway)
    assert refined.revision == before.revision + 1
    assert old_keywords < refined.keywords
    assert "zorply" in refined.keywords
    # the refined label replaces the old one in place
    assert next(l for l in labels if l.branch == "IOException") is refined


def test_refinement_without_records_is_noop_plus_revision(tree, gateway):
    labels = _labels(tree, gateway)
    before = next(l for l in labels if l.branch == "SQLException")
    old_keywords = set(before.keywords)
    refined = refine_labels("SQLException", EnvContext(), labels, gateway)
    assert refined.keywords == old_keywords
    assert refined.revision == 1


def test_refinement_idempotent_keywords(tree, gateway):
    labels = _labels(tree, gateway)
    env = EnvContext()
    bad = sample("s", "zorply quaxing", "IOException", {"IOException"})
    verify("IOException", [bad], 0.7, labels, env, tree)
    first = refine_labels("IOException", env, labels, gateway)
    second = refine_labels("IOException", env, labels, gateway)
    assert second.keywords == first.keywords
    assert second.revision == first.revision + 1


# --- retrieval -----------------------------------------------------------------


def overlap_oracle(tree, name, gathered):
    """Independent recomputation of a node's relevance."""
    terms = node_terms(tree.node(name))
    return len(terms & gathered) / len(terms)


def test_retrieve_filereader_summary(tree):
    summary = FunctionSummary(
        unit_id="u", text="Code unit using FileReader.", identifiers={"FileReader"}
    )
    query = Query(unit_id="u", text="FileReader reader = new FileReader(path);")
    out = retrieve(summary, [query], {"IOException"}, tree, delta=0.05)
    names = [r.node for r in out]
    assert "IOException" in names
    gathered = (
        content_terms(query.text)
        | content_terms(summary.text)
        | content_terms("FileReader")
    )
    for r in out:
        assert r.relevance == pytest.approx(overlap_oracle(tree, r.node, gathered))
        assert r.relevance >= 0.05
        assert r.branch == "IOException"
    assert out == sorted(out, key=lambda r: (-r.relevance, r.node))


def test_retrieve_delta_one_empty(tree):
    query = Query(unit_id="u", text="unrelated words entirely")
    assert retrieve(None, [query], {"IOException"}, tree, delta=1.0) == []


def test_retrieve_depth_bound(tree):
    summary = FunctionSummary(unit_id="u", text="file stream read write network connection")
    query = Query(unit_id="u", text="file stream read write network connection open")
    out = retrieve(summary, [query], {"IOException"}, tree, delta=0.0, max_depth=2)
    assert out
    assert all(r.depth == 2 for r in out)


@settings(max_examples=60)
@given(
    st.sampled_from(
        [
            "FileReader reader = new FileReader(path);",
            "file stream network connection read write",
            "parse number text integer value",
            "socket host connection reset",
        ]
    ),
    st.floats(min_value=0.0, max_value=0.5),
    st.floats(min_value=0.0, max_value=0.5),
)
def test_retrieve_monotone_in_delta(text, d1, d2):
    tree = load_bundled()
    lo, hi = min(d1, d2), max(d1, d2)
    query = Query(unit_id="u", text=text)
    branches = {b.name for b in tree.branch_roots}
    loose = {(r.node, r.relevance) for r in retrieve(None, [query], branches, tree, delta=lo)}
    tight = {(r.node, r.relevance) for r in retrieve(None, [query], branches, tree, delta=hi)}
    assert tight <= loose
    for _, relevance in tight:
        assert relevance >= hi


def test_retrievals_stay_in_activated_branches(tree):
    query = Query(unit_id="u", text="file stream connection read write parse number")
    out = retrieve(None, [query], {"IOException", "RuntimeException"}, tree, delta=0.01)
    from exguard.cee import branch_of

    for r in out:
        assert r.branch in {"IOException", "RuntimeException"}
        assert branch_of(r.node, tree) == r.branch


# --- parallel equivalence ------------------------------------------------------


def test_parallel_and_sequential_verification_agree(tree, gateway):
    samples = load_samples(
        __import__("exguard").__path__[0] + "/data/samples.json"
    )
    labels_a = _labels(tree, gateway)
    labels_b = _labels(tree, gateway)
    env_a, env_b = EnvContext(), EnvContext()
    seq = verify_branches(samples, 0.7, labels_a, env_a, tree, workers=1)
    par = verify_branches(samples, 0.7, labels_b, env_b, tree, workers=8)
    assert {b: r.as_dict() for b, r in seq.items()} == {
        b: r.as_dict() for b, r in par.items()
    }
    assert set(env_a.records) == set(env_b.records)

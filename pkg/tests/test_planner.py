import pytest
from hypothesis import given, settings

from exguard.errors import SegmentationError
from exguard.javatext import brace_profile, mask_code
from exguard.planner import nesting_level, segment, summarize, unit_identifiers

from conftest import failing_gateway, make_file, make_unit
from genjava import java_source


def method_span_oracle(lines: list[str]) -> list[tuple[int, int]]:
    """Independent method-boundary recovery: signature line + brace matching."""
    masked = mask_code("\n".join(lines)).splitlines()
    profile = brace_profile(masked)
    spans = []
    i = 0
    while i < len(masked):
        line = masked[i]
        if "(" in line and ")" in line and "{" in line and ";" not in line \
                and not line.strip().startswith(("if", "while", "for", "switch", "try", "catch", "}")):
            base = profile[i][0]
            j = i
            while j < len(masked) and (j == i or profile[j][2] > base):
                j += 1
            spans.append((i + 1, j))
            i = j
        else:
            i += 1
    return spans


def _method(name: str, body_lines: int) -> list[str]:
    lines = [f"    void {name}() {{"]
    lines += [f"        stmt{k}();" for k in range(body_lines - 2)]
    lines.append("    }")
    return lines


def test_empty_file_gives_no_units():
    assert segment(make_file("")) == []


def test_three_methods_split_at_boundaries():
    body = ["class Big {"]
    for name, size in (("alpha", 180), ("beta", 150), ("gamma", 170)):
        body += _method(name, size)
    body.append("}")
    file = make_file("\n".join(body), "Big.java")
    units = segment(file, limit=200)
    assert len(units) == 3
    # every boundary the oracle finds lies inside exactly one unit
    for start, end in method_span_oracle(list(file.lines)):
        owners = [u for u in units if u.start <= start and end <= u.end]
        assert len(owners) == 1
    # units are disjoint and cover the file
    covered = []
    for u in units:
        covered.extend(range(u.start, u.end + 1))
    assert covered == list(range(1, file.line_count + 1))


def test_single_oversize_method_kept_whole():
    lines = ["class Big {"] + _method("huge", 250) + ["}"]
    units = segment(make_file("\n".join(lines)), limit=200)
    oversize = [u for u in units if u.oversize]
    assert len(oversize) == 1
    assert oversize[0].end - oversize[0].start + 1 == 250
    assert oversize[0].kind == "method"


def test_unbalanced_braces_error():
    with pytest.raises(SegmentationError) as err:
        segment(make_file("void f() {\n  g();"))
    assert err.value.line is not None


@settings(max_examples=150)
@given(java_source())
def test_segmentation_covers_and_is_deterministic(code):
    file = make_file(code)
    units = segment(file, limit=10)
    covered = []
    for u in units:
        covered.extend(range(u.start, u.end + 1))
    assert covered == list(range(1, file.line_count + 1))
    assert segment(file, limit=10) == units


@settings(max_examples=150)
@given(java_source())
def test_raising_limit_never_adds_units(code):
    file = make_file(code)
    counts = [len(segment(file, limit=n)) for n in (5, 10, 20, 200)]
    assert counts == sorted(counts, reverse=True)


def test_nesting_level_examples():
    assert nesting_level(make_unit("void f(){}")) == 1
    assert nesting_level(make_unit("void f(){ if(x){ while(y){ } } }")) == 3
    assert nesting_level(make_unit('String s = "{{{";')) == 0


def test_summarize_extracts_identifiers(gateway):
    unit = make_unit("void f() {\n    Reader r = new FileReader(path);\n}")
    summary = summarize(unit, gateway)
    assert "FileReader" in summary.identifiers
    assert summary.identifiers <= set(unit_identifiers(unit))
    assert not summary.degraded
    assert len(summary.text.split()) <= 120


def test_summarize_whitespace_unit(gateway):
    unit = make_unit("   \n\t\n")
    summary = summarize(unit, gateway)
    assert summary.text == "empty unit"
    assert summary.identifiers == set()


def test_summarize_degrades_without_hard_failure():
    unit = make_unit("void f() { new FileReader(p); }")
    gw = failing_gateway()
    summary = summarize(unit, gw)
    assert summary.degraded
    assert "FileReader" in summary.text
    assert "FileReader" in summary.identifiers
    assert gw.degraded_calls == 1

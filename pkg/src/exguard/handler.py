"""Try-catch patch synthesis and application.

One try per target span, with catches ordered most-specific-first and bodies
instantiated from the knowledge base's handling templates (or from a live
backend when its output survives validation). Application is purely textual:
lines outside the wrapped spans are preserved byte for byte.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .cee import CODE_PLACEHOLDER, CeeTree, catch_body, strategy_of
from .detector import Cfg, SensitiveSegment
from .errors import BackendError, MalformedOutputError, PatchError
from .javatext import first_unbalanced_line, mask_code
from .planner import CodeUnit
from .ranker import RankedException
from .review import catch_order_violations, scan_try_blocks

INDENT_UNIT = "    "


@dataclass(frozen=True)
class Patch:
    unit_id: str
    target_span: tuple[int, int]  # inclusive file-absolute lines
    prefix_lines: tuple[str, ...]
    suffix_lines: tuple[str, ...]
    caught_types: tuple[str, ...]

    def as_dict(self) -> dict:
        return {"span": list(self.target_span), "caught": list(self.caught_types)}


@dataclass
class OptimizedUnit:
    unit_id: str
    text: str
    patches: list[Patch] = field(default_factory=list)


def segment_ref(segment: SensitiveSegment) -> str:
    return f"{segment.unit_id}@{segment.span[0]}-{segment.span[1]}"


def _brace_intervals(masked_lines: list[str]) -> list[tuple[int, int]]:
    """(open_line, close_line) pairs, 1-based, innermost discoverable last."""
    intervals: list[tuple[int, int]] = []
    stack: list[int] = []
    for idx, line in enumerate(masked_lines, start=1):
        for ch in line:
            if ch == "{":
                stack.append(idx)
            elif ch == "}" and stack:
                intervals.append((stack.pop(), idx))
    return intervals


def plan_tryspan(segment: SensitiveSegment, cfg: Cfg, masked_lines: list[str] | None = None) -> tuple[int, int]:
    """Smallest statement-aligned span covering the segment.

    Partial statements expand to whole statements; the span never crosses the
    segment's enclosing brace block. Returns file-absolute lines.
    """
    unit_start, unit_end = cfg.unit_span
    if segment.span[0] < unit_start or segment.span[1] > unit_end:
        raise PatchError(
            f"segment {segment.span} lies outside unit span {cfg.unit_span}"
        )
    rel = (segment.span[0] - unit_start + 1, segment.span[1] - unit_start + 1)
    n_lines = unit_end - unit_start + 1

    lo, hi = 1, n_lines
    if masked_lines is not None:
        intervals = [
            iv for iv in _brace_intervals(masked_lines)
            if iv[0] < rel[0] and iv[1] > rel[0]  # block interior holds the start
        ]
        if intervals:
            inner = max(intervals, key=lambda iv: iv[0])
            lo, hi = inner[0] + 1, inner[1] - 1
        clipped = (max(rel[0], lo), min(rel[1], hi))
        if clipped[0] > clipped[1]:
            raise PatchError(f"segment {segment.span} cannot fit inside its block")
        rel = clipped

    start, end = rel
    for s_start, s_end in cfg.statements:
        if s_start <= rel[1] and s_end >= rel[0]:  # statement intersects segment
            start = min(start, s_start)
            end = max(end, s_end)
    start, end = max(start, lo), min(end, hi)
    if start > end or not (start <= rel[0] and rel[1] <= end):
        raise PatchError(
            f"segment {segment.span} cannot be statement-aligned inside its block"
        )
    return (unit_start + start - 1, unit_start + end - 1)


def _order_specific_first(types: list[str], tree: CeeTree) -> list[str]:
    """Subtypes before supertypes (deeper nodes first, name-stable)."""
    return sorted(
        dict.fromkeys(types),
        key=lambda t: (-(tree.node(t).depth if t in tree else 0), t),
    )


def _catch_sections(
    types: list[str], tree: CeeTree, base_indent: str
) -> list[str]:
    lines: list[str] = []
    for type_name in types:
        strategy = strategy_of(type_name, tree)
        body, var = catch_body(strategy.handle_code)
        lines.append(f"{base_indent}}} catch ({type_name} {var}) {{")
        lines.extend(f"{base_indent}{INDENT_UNIT}{b}" for b in body)
    lines.append(f"{base_indent}}}")
    return lines


def _adopt_backend_bodies(
    reply_code: str, types: list[str], tree: CeeTree
) -> dict[str, list[str]] | None:
    """Catch bodies from a live backend reply, if they survive validation."""
    blocks = scan_try_blocks(reply_code)
    if len(blocks) != 1:
        return None
    block = blocks[0]
    got = [c.type_name for c in block.catches]
    if got != types or catch_order_violations(block, tree):
        return None
    bodies: dict[str, list[str]] = {}
    for clause in block.catches:
        body_lines = [ln.strip() for ln in clause.body.splitlines() if ln.strip()]
        if not body_lines:
            return None
        bodies[clause.type_name] = body_lines
    return bodies


def generate(
    unit: CodeUnit,
    selected: list[RankedException],
    tree: CeeTree,
    cfg: Cfg,
    backend=None,
) -> list[Patch]:
    """One patch per distinct target span for the selected exceptions.

    Multiple exceptions on one span become a single try with ordered catches
    (most specific first); catch bodies come from the handling templates, or
    from the backend when its reply validates.
    """
    if not selected:
        raise ValueError("selected exceptions must be non-empty")
    masked = mask_code(unit.text).splitlines()
    while len(masked) < len(unit.lines):
        masked.append("")

    by_span: dict[tuple[int, int], list[str]] = {}
    for item in selected:
        m = re.search(r"@(\d+)-(\d+)$", item.segment_ref)
        if not m:
            raise PatchError(f"unparsable segment reference: {item.segment_ref}")
        seg = SensitiveSegment(
            unit_id=unit.unit_id,
            span=(int(m.group(1)), int(m.group(2))),
            origin=frozenset({"static"}),
            hints=frozenset(),
        )
        span = plan_tryspan(seg, cfg, masked_lines=masked)
        by_span.setdefault(span, []).append(item.type_name)

    patches: list[Patch] = []
    for span in sorted(by_span):
        types = _order_specific_first(by_span[span], tree)
        for type_name in types:
            strategy_of(type_name, tree)  # raises NoStrategyError early
        first_line = unit.lines[span[0] - unit.start]
        base_indent = first_line[: len(first_line) - len(first_line.lstrip())] \
            if first_line.strip() else ""
        suffix = _catch_sections(types, tree, base_indent)
        if backend is not None and not getattr(backend, "is_mock", True):
            adopted = _live_suffix(unit, span, types, tree, base_indent, backend)
            if adopted is not None:
                suffix = adopted
        patches.append(
            Patch(
                unit_id=unit.unit_id,
                target_span=span,
                prefix_lines=(f"{base_indent}try {{",),
                suffix_lines=tuple(suffix),
                caught_types=tuple(types),
            )
        )
    return patches


def _live_suffix(unit, span, types, tree, base_indent, backend) -> list[str] | None:
    span_text = "\n".join(unit.lines[span[0] - unit.start: span[1] - unit.start + 1])
    template_lines = [f"try {{", CODE_PLACEHOLDER]
    template_lines += _catch_sections(types, tree, "")
    try:
        payload = backend.call(
            "handler",
            {"code_unit": span_text, "strategy1": "\n".join(template_lines)},
            phase="handle",
        )
    except (BackendError, MalformedOutputError) as exc:
        backend.record_degraded(f"generate({unit.unit_id}): {exc}")
        return None
    bodies = _adopt_backend_bodies(str(payload["optimized_code"]), types, tree)
    if bodies is None:
        return None
    lines: list[str] = []
    for type_name in types:
        strategy = strategy_of(type_name, tree)
        _, var = catch_body(strategy.handle_code)
        lines.append(f"{base_indent}}} catch ({type_name} {var}) {{")
        lines.extend(f"{base_indent}{INDENT_UNIT}{b}" for b in bodies[type_name])
    lines.append(f"{base_indent}}}")
    return lines


def apply_patches(unit: CodeUnit, patches: list[Patch]) -> OptimizedUnit:
    """Wrap each target span with its prefix/suffix, indenting wrapped lines.

    Lines outside all target spans are preserved verbatim and in order.
    Overlapping patches are rejected.
    """
    ordered = sorted(patches, key=lambda p: p.target_span)
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.target_span[0] <= prev.target_span[1]:
            raise PatchError(
                f"overlapping patches: {prev.target_span} and {cur.target_span}"
            )
    for patch in ordered:
        if patch.target_span[0] < unit.start or patch.target_span[1] > unit.end:
            raise PatchError(
                f"patch span {patch.target_span} outside unit {unit.span}"
            )

    out: list[str] = []
    cursor = unit.start
    for patch in ordered:
        start, end = patch.target_span
        out.extend(unit.lines[cursor - unit.start: start - unit.start])
        out.extend(patch.prefix_lines)
        for line in unit.lines[start - unit.start: end - unit.start + 1]:
            out.append(INDENT_UNIT + line if line.strip() else line)
        out.extend(patch.suffix_lines)
        cursor = end + 1
    out.extend(unit.lines[cursor - unit.start:])
    return OptimizedUnit(unit_id=unit.unit_id, text="\n".join(out), patches=list(patches))


def validate(optimized: OptimizedUnit, tree: CeeTree) -> list[str]:
    """Syntactic safety net over a patched unit; violations are data.

    Empty iff braces balance, every catch names a resolvable type, no catch
    body is empty, and no catch is shadowed by an earlier supertype catch.
    """
    return validate_text(optimized.text, tree)


def validate_text(text: str, tree: CeeTree) -> list[str]:
    violations: list[str] = []
    bad = first_unbalanced_line(text.splitlines())
    if bad is not None:
        violations.append(f"unbalanced braces near line {bad}")
    for block in scan_try_blocks(text):
        for clause in block.catches:
            if clause.type_name not in tree:
                violations.append(f"catch of unknown type {clause.type_name}")
            if not mask_code(clause.body).replace("{", " ").replace("}", " ").strip():
                violations.append(f"empty catch body for {clause.type_name}")
        violations.extend(catch_order_violations(block, tree))
    return violations

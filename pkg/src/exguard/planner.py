"""Segmentation of Java sources into bounded, self-contained code units.

Method boundaries are recovered lexically (signature regex plus brace
matching over masked text), which is enough to cut at sensible places
without a full Java grammar. Units never split a method; a method longer
than the limit becomes a single oversize unit.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import SegmentationError
from .javatext import brace_profile, first_unbalanced_line, identifier_tokens, mask_code

DEFAULT_LIMIT = 200

# Heuristic method signature: optional modifiers, return type or constructor
# name, identifier, parameter list, then an opening brace on the same or a
# following line. Runs over one masked line.
_SIGNATURE_RE = re.compile(
    r"^\s*(?:(?:public|protected|private|static|final|abstract|synchronized|native|strictfp|default)\s+)*"
    r"(?:<[^>]*>\s*)?"
    r"(?:[\w$<>\[\],.\s]+?\s+)?"
    r"([A-Za-z_$][\w$]*)\s*\([^;{}]*\)\s*(?:throws\s+[\w.,\s]+)?\s*\{?\s*$"
)
_CONTROL_WORDS = frozenset(
    "if else for while switch catch try do return new synchronized".split()
)


@dataclass(frozen=True)
class SourceFile:
    path: str
    lines: tuple[str, ...]

    @property
    def line_count(self) -> int:
        return len(self.lines)

    @classmethod
    def read(cls, path: str | Path) -> "SourceFile":
        text = Path(path).read_text(encoding="utf-8")
        return cls(path=str(path), lines=tuple(text.splitlines()))

    @classmethod
    def from_text(cls, text: str, path: str = "<memory>") -> "SourceFile":
        return cls(path=path, lines=tuple(text.splitlines()))


@dataclass
class CodeUnit:
    unit_id: str
    path: str
    span: tuple[int, int]  # inclusive, 1-based file coordinates
    lines: tuple[str, ...]
    kind: str  # method | class-fragment | file-fragment
    oversize: bool = False

    @property
    def text(self) -> str:
        return "\n".join(self.lines)

    @property
    def start(self) -> int:
        return self.span[0]

    @property
    def end(self) -> int:
        return self.span[1]

    def relative(self, file_line: int) -> int:
        """Translate a 1-based file line to a 1-based line inside the unit."""
        return file_line - self.start + 1


@dataclass
class FunctionSummary:
    unit_id: str
    text: str
    identifiers: set[str] = field(default_factory=set)
    degraded: bool = False


def _method_spans(masked: list[str]) -> list[tuple[int, int]]:
    """(start, end) line spans of method bodies, via signature + brace match."""
    profile = brace_profile(masked)
    spans: list[tuple[int, int]] = []
    i = 0
    n = len(masked)
    while i < n:
        line = masked[i]
        m = _SIGNATURE_RE.match(line)
        if m and m.group(1) not in _CONTROL_WORDS:
            # The body starts at the first `{` on or after the signature line.
            open_line = None
            j = i
            while j < n and j - i <= 2:
                if "{" in masked[j]:
                    open_line = j
                    break
                if masked[j].strip() and j > i:
                    break
                j += 1
            if open_line is not None:
                base = profile[open_line][0]
                end = open_line
                while end < n and profile[end][2] > base:
                    end += 1
                if end < n:
                    spans.append((i + 1, end + 1))
                    i = end + 1
                    continue
        i += 1
    return spans


def segment(file: SourceFile, limit: int = DEFAULT_LIMIT) -> list[CodeUnit]:
    """Split a file into disjoint units covering every line.

    Atoms are whole methods and the filler between them; atoms pack greedily
    into units of at most `limit` lines. A single method above the limit is
    kept whole and flagged oversize; oversized filler is chunked.
    """
    if limit < 1:
        raise ValueError("limit must be >= 1")
    if file.line_count == 0:
        return []
    masked = mask_code("\n".join(file.lines)).splitlines()
    while len(masked) < file.line_count:
        masked.append("")
    bad = first_unbalanced_line(masked)
    if bad is not None:
        raise SegmentationError("unbalanced braces", line=bad)

    methods = _method_spans(masked)
    atoms: list[tuple[int, int, bool]] = []  # (start, end, is_method)
    cursor = 1
    for start, end in methods:
        if start > cursor:
            atoms.append((cursor, start - 1, False))
        atoms.append((start, end, True))
        cursor = end + 1
    if cursor <= file.line_count:
        atoms.append((cursor, file.line_count, False))

    groups: list[list[tuple[int, int, bool]]] = []
    current: list[tuple[int, int, bool]] = []

    def size(span):
        return span[1] - span[0] + 1

    def flush():
        if current:
            groups.append(list(current))
            current.clear()

    for atom in atoms:
        if size(atom) > limit:
            if atom[2]:  # an oversize method stays whole
                flush()
                groups.append([atom])
            else:  # filler can be chunked at the limit
                flush()
                start, end, _ = atom
                while start <= end:
                    stop = min(start + limit - 1, end)
                    groups.append([(start, stop, False)])
                    start = stop + 1
            continue
        held = sum(size(a) for a in current)
        if current and held + size(atom) > limit:
            flush()
        current.append(atom)
    flush()

    units: list[CodeUnit] = []
    for group in groups:
        start = group[0][0]
        end = group[-1][1]
        has_method = any(a[2] for a in group)
        only_method = len(group) == 1 and group[0][2]
        kind = "method" if only_method else ("class-fragment" if has_method else "file-fragment")
        oversize = end - start + 1 > limit
        units.append(
            CodeUnit(
                unit_id=f"{file.path}:{start}-{end}",
                path=file.path,
                span=(start, end),
                lines=file.lines[start - 1:end],
                kind=kind,
                oversize=oversize,
            )
        )
    return units


def nesting_level(unit: CodeUnit) -> int:
    """Maximum open-brace depth reached inside the unit.

    Braces in strings, chars and comments are ignored; an unbalanced prefix
    reports the depth actually reached.
    """
    masked = mask_code(unit.text)
    depth = 0
    peak = 0
    for ch in masked:
        if ch == "{":
            depth += 1
            peak = max(peak, depth)
        elif ch == "}":
            depth = max(0, depth - 1)
    return peak


def unit_identifiers(unit: CodeUnit) -> set[str]:
    """Deterministic API/type token extraction, independent of any backend."""
    return identifier_tokens(unit.text)


def summarize(unit: CodeUnit, backend) -> FunctionSummary:
    """Function-level summary of a unit, at most 120 words.

    The identifier set always comes from the local tokenizer; only the prose
    comes from the backend. On backend failure the summary degrades to the
    identifier list joined as prose.
    """
    from .errors import BackendError, MalformedOutputError

    identifiers = unit_identifiers(unit)
    if not unit.text.strip():
        return FunctionSummary(unit_id=unit.unit_id, text="empty unit", identifiers=set())
    try:
        payload = backend.call(
            "planner",
            {"limit": DEFAULT_LIMIT, "codebase": unit.text},
            phase="plan",
        )
        units = payload.get("units") or []
        text = str(units[0]["summary"]) if units else ""
        if not text:
            raise MalformedOutputError("planner reply carried no summary")
        words = text.split()
        if len(words) > 120:
            text = " ".join(words[:120])
        return FunctionSummary(unit_id=unit.unit_id, text=text, identifiers=identifiers)
    except (BackendError, MalformedOutputError) as exc:
        backend.record_degraded(f"summarize({unit.unit_id}): {exc}")
        fallback = "Code unit mentioning " + ", ".join(sorted(identifiers)) + "." \
            if identifiers else "Code unit without notable identifiers."
        return FunctionSummary(
            unit_id=unit.unit_id, text=fallback, identifiers=identifiers, degraded=True
        )

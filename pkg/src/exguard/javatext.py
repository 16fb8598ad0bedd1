"""Lexical utilities for Java source text.

Everything here is deliberately sub-grammar: masking, brace counting,
tokenization. The goal is line-accurate structure recovery without a parser
dependency. Nested block comments are not supported (Java forbids them).
"""

from __future__ import annotations

import re

JAVA_KEYWORDS = frozenset(
    """abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package private
    protected public return short static strictfp super switch synchronized
    this throw throws transient try void volatile while var record yield
    sealed permits""".split()
)

# Terms carrying no retrieval signal: standard English glue, the prose
# boilerplate that appears in every node of the knowledge base, Java
# keywords, and tokens ubiquitous in any Java snippet.
STOP_WORDS = frozenset(
    """a an the and or of to in on at is are was were be been being that this
    these those it its with as by for from when while where which who whom
    whose what why how might may can could should would will shall must there
    here not no nor such any all some than then but if else than also just
    only own same so too very via etc into out up down over under after
    before between during without within again further more most less least
    one two other another each either neither both because until upon about
    against through do does did done has have had having get gets got i you
    we they he she your our their them his her us me my
    exception exceptions error errors thrown throw throws throwing raise
    raised raises raising occur occurs occurred occurring cause caused causes
    causing typically include includes including several operation operations
    attempt attempting attempted code codes java method methods call calls
    calling called due like reason reasons kind type types class classes
    abstract assert boolean break byte case catch char const continue default
    double enum extends final finally float goto implements import instanceof
    int interface long native package private protected public return short
    static strictfp super switch synchronized transient try void volatile
    var record yield sealed permits new null true false
    string system err println print main args object util lang""".split()
)

_LINE_COMMENT = "//"
_TOKEN_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_CAMEL_RE = re.compile(r"[A-Z]+(?=[A-Z][a-z0-9])|[A-Z]?[a-z0-9]+|[A-Z]+")


def mask_code(text: str) -> str:
    """Replace string/char literals and comments with spaces.

    Line structure and character offsets are preserved, so masked text can be
    scanned for braces and keywords without literal noise.
    """
    out = []
    mode = None  # None | "str" | "char" | "block"
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        nxt = text[i + 1] if i + 1 < n else ""
        if mode is None:
            if ch == '"':
                mode = "str"
                out.append(" ")
            elif ch == "'":
                mode = "char"
                out.append(" ")
            elif ch == "/" and nxt == "/":
                j = text.find("\n", i)
                j = n if j == -1 else j
                out.append(" " * (j - i))
                i = j
                continue
            elif ch == "/" and nxt == "*":
                mode = "block"
                out.append("  ")
                i += 2
                continue
            else:
                out.append(ch)
        elif mode in ("str", "char"):
            if ch == "\\":
                out.append("  " if nxt != "\n" else " \n")
                i += 2
                continue
            if (mode == "str" and ch == '"') or (mode == "char" and ch == "'"):
                mode = None
            out.append("\n" if ch == "\n" else " ")
        else:  # block comment
            if ch == "*" and nxt == "/":
                mode = None
                out.append("  ")
                i += 2
                continue
            out.append("\n" if ch == "\n" else " ")
        i += 1
    return "".join(out)


def brace_profile(masked_lines: list[str]) -> list[tuple[int, int, int, int]]:
    """Per-line (depth_before, max_reached, depth_after, min_reached).

    The minimum matters for lines like ``} else {`` whose depth dips and
    recovers within the line. Depth never drops below zero; a stray close
    brace is surfaced by :func:`first_unbalanced_line` instead.
    """
    profile = []
    depth = 0
    for line in masked_lines:
        before = depth
        peak = depth
        trough = depth
        for ch in line:
            if ch == "{":
                depth += 1
                peak = max(peak, depth)
            elif ch == "}":
                depth = max(0, depth - 1)
                trough = min(trough, depth)
        profile.append((before, peak, depth, trough))
    return profile


def first_unbalanced_line(masked_lines: list[str]) -> int | None:
    """1-based line where braces first go negative, or the last line if the
    file ends with unclosed braces. None when balanced."""
    depth = 0
    for idx, line in enumerate(masked_lines, start=1):
        for ch in line:
            if ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth < 0:
                    return idx
    if depth != 0:
        return len(masked_lines)
    return None


def camel_parts(token: str) -> list[str]:
    """Split an identifier on camel-case humps and underscores."""
    parts: list[str] = []
    for chunk in token.split("_"):
        parts.extend(m.group(0) for m in _CAMEL_RE.finditer(chunk))
    return parts


def content_terms(text: str) -> set[str]:
    """Lowercased content terms of prose or code.

    Each identifier contributes its full lowercase form plus its camel-case
    parts; stop words and single characters are dropped.
    """
    terms: set[str] = set()
    for tok in _TOKEN_RE.findall(text):
        candidates = [tok.lower()]
        candidates.extend(p.lower() for p in camel_parts(tok))
        for cand in candidates:
            if len(cand) >= 2 and cand not in STOP_WORDS:
                terms.add(cand)
    return terms


def identifier_tokens(code: str) -> set[str]:
    """API/type tokens mentioned in a piece of code.

    A token qualifies if it is capitalized (type-like) or directly invoked
    (followed by an open paren). Keywords and literals are excluded; literals
    and comments are masked before scanning.
    """
    masked = mask_code(code)
    found: set[str] = set()
    for m in _TOKEN_RE.finditer(masked):
        tok = m.group(0)
        if tok in JAVA_KEYWORDS:
            continue
        rest = masked[m.end():]
        called = rest.lstrip(" \t").startswith("(")
        if tok[0].isupper() or called:
            found.add(tok)
    return found


def line_of_offset(text: str, offset: int) -> int:
    """1-based line number containing the character at `offset`."""
    return text.count("\n", 0, offset) + 1


class ApiPattern:
    """One dangerous-operation keyword with its match rule.

    kind:
      "type"        CamelCase type token, matched as a whole word
      "member"      Qualified member access like `Integer.parseInt`
      "constructor" `new X(` mention
    """

    __slots__ = ("kind", "text", "_re")

    def __init__(self, kind: str, text: str):
        self.kind = kind
        self.text = text
        if kind == "type":
            self._re = re.compile(rf"\b{re.escape(text)}\b")
        elif kind == "member":
            owner, member = text.split(".", 1)
            self._re = re.compile(rf"\b{re.escape(owner)}\s*\.\s*{re.escape(member)}\b")
        elif kind == "constructor":
            self._re = re.compile(rf"\bnew\s+{re.escape(text)}\s*\(")
        else:
            raise ValueError(f"unknown pattern kind: {kind}")

    def matches(self, masked_line: str) -> bool:
        return bool(self._re.search(masked_line))

    def key(self) -> str:
        return f"{self.kind}:{self.text}"

    def __repr__(self) -> str:
        return f"ApiPattern({self.kind}:{self.text})"


_CAMEL_TYPE_RE = re.compile(r"\b([A-Z][a-z0-9]+(?:[A-Z][a-z0-9]*)+)\b")
_MEMBER_RE = re.compile(r"\b([A-Z][A-Za-z0-9]*\.[a-z]\w*)\b")
_CTOR_RE = re.compile(r"\bnew\s+([A-Z][A-Za-z0-9]*)\s*\(")


def extract_api_patterns(prose: str) -> list[ApiPattern]:
    """Derive API match patterns from dangerous-operation prose.

    Picks up CamelCase type names (FileReader), qualified member mentions
    (Integer.parseInt) and constructor mentions (new Socket(...)), in source
    order without duplicates.
    """
    hits: list[ApiPattern] = []
    seen: set[str] = set()
    events: list[tuple[int, ApiPattern]] = []
    for m in _MEMBER_RE.finditer(prose):
        events.append((m.start(), ApiPattern("member", m.group(1))))
    for m in _CTOR_RE.finditer(prose):
        events.append((m.start(), ApiPattern("constructor", m.group(1))))
    member_spans = [m.span(1) for m in _MEMBER_RE.finditer(prose)]
    for m in _CAMEL_TYPE_RE.finditer(prose):
        if any(s <= m.start(1) < e for s, e in member_spans):
            continue
        events.append((m.start(), ApiPattern("type", m.group(1))))
    for _, pat in sorted(events, key=lambda ev: (ev[0], ev[1].key())):
        if pat.key() not in seen:
            seen.add(pat.key())
            hits.append(pat)
    return hits

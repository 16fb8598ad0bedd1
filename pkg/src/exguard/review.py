"""Structural scanning and rule review of try-catch blocks.

Shared by the handler's validator, the metrics judge and the mock backend,
so that "good practice" means the same thing everywhere.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .cee import CeeTree, branch_of, is_subtype
from .javatext import first_unbalanced_line, mask_code

_CATCH_RE = re.compile(r"\bcatch\s*\(\s*([A-Za-z_][\w.]*)(?:\s*\|\s*[A-Za-z_][\w.]*)*\s+(\w+)\s*\)\s*\{")
_TRY_RE = re.compile(r"\btry\b")

GENERIC_TYPES = ("Exception", "Throwable")


@dataclass
class CatchClause:
    type_name: str
    var_name: str
    body: str


@dataclass
class TryBlock:
    body: str
    catches: list[CatchClause] = field(default_factory=list)


def _matching_brace(masked: str, open_idx: int) -> int:
    depth = 0
    for i in range(open_idx, len(masked)):
        if masked[i] == "{":
            depth += 1
        elif masked[i] == "}":
            depth -= 1
            if depth == 0:
                return i
    return len(masked)


def scan_try_blocks(text: str) -> list[TryBlock]:
    """All try blocks (outermost first) with their catch clauses."""
    masked = mask_code(text)
    blocks: list[TryBlock] = []
    for m in _TRY_RE.finditer(masked):
        open_idx = masked.find("{", m.end())
        if open_idx == -1:
            continue
        between = masked[m.end():open_idx]
        if between.strip() and not between.strip().startswith("("):
            continue  # try-with-resources keeps "(...)": anything else is not a try
        close_idx = _matching_brace(masked, open_idx)
        block = TryBlock(body=text[open_idx + 1:close_idx])
        pos = close_idx + 1
        while True:
            cm = _CATCH_RE.match(masked, pos) or _CATCH_RE.match(masked, _skip_ws(masked, pos))
            if not cm:
                break
            body_open = masked.find("{", cm.start())
            body_close = _matching_brace(masked, body_open)
            block.catches.append(
                CatchClause(
                    type_name=cm.group(1),
                    var_name=cm.group(2),
                    body=text[body_open + 1:body_close],
                )
            )
            pos = body_close + 1
        blocks.append(block)
    return blocks


def _skip_ws(text: str, pos: int) -> int:
    while pos < len(text) and text[pos] in " \t\r\n":
        pos += 1
    return pos


def _body_is_empty(body: str) -> bool:
    return not mask_code(body).replace("{", " ").replace("}", " ").strip()


def catch_order_violations(block: TryBlock, tree: CeeTree) -> list[str]:
    """Catches unreachable because a supertype catch precedes them."""
    out = []
    for i, clause in enumerate(block.catches):
        for earlier in block.catches[:i]:
            if clause.type_name in tree and earlier.type_name in tree:
                if is_subtype(clause.type_name, earlier.type_name, tree):
                    out.append(
                        f"unreachable catch: {clause.type_name} follows its "
                        f"supertype {earlier.type_name}"
                    )
    return out


def review_block(text: str, hints: set[str], tree: CeeTree) -> bool:
    """Binary good/bad assessment of one generated try-catch block.

    Bad when: braces do not balance, a catch body is empty, catch order is
    illegal, or a generic Exception/Throwable catch is used although the
    hinted branch offers a more specific type.
    """
    lines = text.splitlines()
    if first_unbalanced_line(lines) is not None:
        return False
    blocks = scan_try_blocks(text)
    if not blocks or not any(b.catches for b in blocks):
        return False
    for block in blocks:
        for clause in block.catches:
            if _body_is_empty(clause.body):
                return False
            if clause.type_name in GENERIC_TYPES and _has_specific_alternative(hints, tree):
                return False
        if catch_order_violations(block, tree):
            return False
    return True


def _has_specific_alternative(hints: set[str], tree: CeeTree) -> bool:
    for hint in hints:
        if hint in tree:
            try:
                branch_of(hint, tree)
            except Exception:
                continue
            return True
    return False

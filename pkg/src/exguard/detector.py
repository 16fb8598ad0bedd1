"""Fragile-region detection: statement-level CFG, exception propagation,
and scenario/property matching, unioned into sensitive segments.

The static arm and the matching arm are independent and read-only over the
unit and the exception tree, so a caller may run them concurrently and merge
afterwards.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .cee import CeeTree, branch_of, build_keyword_table, is_subtype, keyword_patterns
from .errors import BackendError, MalformedOutputError
from .javatext import brace_profile, mask_code
from .planner import CodeUnit

_CONTROL_RE = re.compile(r"^\}?\s*(if|while|for|switch|try|do)\b")
_CONT_RE = re.compile(r"^\}?\s*(else|catch|finally)\b")
_DO_WHILE_RE = re.compile(r"^\}\s*while\b.*;\s*$")
_THROW_NEW_RE = re.compile(r"\bthrow\s+new\s+([A-Za-z_][\w.]*)\s*\(")
_THROWS_RE = re.compile(r"\)\s*throws\s+([\w.,\s]+?)\s*\{?\s*$")
_SKIP_LINE_RE = re.compile(r"^\s*(import|package)\b")


@dataclass(frozen=True)
class BasicBlock:
    block_id: int
    span: tuple[int, int]  # inclusive unit-relative 1-based lines
    kind: str  # cond | body | header | join


@dataclass(frozen=True)
class CfgEdge:
    src: int
    dst: int
    kind: str  # sequence | branch-true | branch-false | loop-back | throw-exit | return-exit


@dataclass
class Cfg:
    unit_id: str
    unit_span: tuple[int, int]
    blocks: list[BasicBlock]
    edges: list[CfgEdge]
    entry_id: int
    exit_id: int
    statements: list[tuple[int, int]]  # unit-relative statement line spans

    def block_of_line(self, rel_line: int) -> BasicBlock:
        for block in self.blocks:
            if block.span[0] <= rel_line <= block.span[1]:
                return block
        raise ValueError(f"line {rel_line} outside all blocks")


@dataclass(frozen=True)
class EpgSite:
    rel_line: int
    exception_type: str
    origin: str  # throw-stmt | throws-clause | api-call


@dataclass(frozen=True)
class EpgEdge:
    site: EpgSite
    target: str  # "exit" or "catch:<try_index>:<catch_index>"


@dataclass
class Epg:
    unit_id: str
    sites: list[EpgSite]
    edges: list[EpgEdge]

    def unhandled_sites(self) -> list[EpgSite]:
        exits = {e.site for e in self.edges if e.target == "exit"}
        return [s for s in self.sites if s in exits]


@dataclass(frozen=True)
class SensitiveSegment:
    unit_id: str
    span: tuple[int, int]  # inclusive file-absolute lines
    origin: frozenset[str]  # subset of {static, scenario-match, property-match}
    hints: frozenset[str]  # branch root names

    def as_dict(self) -> dict:
        return {
            "span": list(self.span),
            "origin": sorted(self.origin),
            "hints": sorted(self.hints),
        }


# --- Control flow graph -----------------------------------------------------


class _Region:
    """One control construct: header lines, sections, and its close line."""

    def __init__(self, kind, header):
        self.kind = kind
        self.header = header  # (start, end) header line span
        self.sections: list[tuple[str, int | None, list]] = []  # (kind, cont_line, nodes)
        self.close_line: int | None = None


def _split_statements(masked_lines: list[str]) -> list[tuple[int, int]]:
    """Statement line spans: terminated by ';', '{' or '}'."""
    spans: list[tuple[int, int]] = []
    start: int | None = None
    for idx, line in enumerate(masked_lines, start=1):
        if start is None and line.strip():
            start = idx
        if start is None:
            continue
        if any(ch in line for ch in ";{}"):
            spans.append((start, idx))
            start = None
    if start is not None:
        spans.append((start, len(masked_lines)))
    return spans


def _open_brace_line(masked: list[str], i: int) -> int | None:
    """Line index (0-based) where the construct headed at line i opens."""
    for j in range(i, min(i + 3, len(masked))):
        line = masked[j]
        if "{" in line:
            return j
        if ";" in line:
            return None
        if j > i and line.strip() and not line.strip().startswith("{"):
            return None
    return None


def _section_close(profile, open_line: int, n: int) -> int:
    """Line (0-based) whose '}' closes the brace opened on open_line.

    A line such as ``} else {`` closes the section even though its depth
    recovers by the end of the line, so the per-line minimum is what counts.
    """
    base = profile[open_line][2]  # depth after the opening line
    for j in range(open_line + 1, n):
        if profile[j][3] < base:
            return j
    return n - 1


def _parse_nodes(masked: list[str], profile, lo: int, hi: int) -> list:
    """Node list for masked lines lo..hi (0-based, inclusive)."""
    nodes: list = []
    run_start: int | None = None
    i = lo
    while i <= hi:
        stripped = masked[i].strip()
        m = _CONTROL_RE.match(stripped)
        open_line = _open_brace_line(masked, i) if m else None
        if m and open_line is not None and open_line <= hi:
            if stripped.startswith("}") and run_start is None:
                pass  # close braces folded into the header line
            if run_start is not None:
                nodes.append(("run", (run_start, i - 1)))
                run_start = None
            region = _Region(m.group(1), (i, open_line))
            close = _section_close(profile, open_line, hi + 1)
            body = _parse_nodes(masked, profile, open_line + 1, close - 1)
            region.sections.append(("body", None, body))
            # continuations share the close line: '} else {', '} catch (..) {'
            while close <= hi:
                cont = _CONT_RE.match(masked[close].strip())
                if not cont:
                    break
                c_open = _open_brace_line(masked, close)
                if c_open is None or c_open > hi:
                    break
                c_close = _section_close(profile, c_open, hi + 1)
                c_body = _parse_nodes(masked, profile, c_open + 1, c_close - 1)
                region.sections.append((cont.group(1), close, c_body))
                close = c_close
            region.close_line = close
            nodes.append(("region", region))
            if close <= hi and _DO_WHILE_RE.match(masked[close].strip()):
                i = close + 1
            elif close <= hi and not _CONT_RE.match(masked[close].strip()):
                # the close line starts the following join run
                run_start = close
                i = close + 1
            else:
                i = close + 1
            continue
        if run_start is None and masked[i] is not None:
            run_start = i
        i += 1
    if run_start is not None and run_start <= hi:
        nodes.append(("run", (run_start, hi)))
    return nodes


def build_cfg(unit: CodeUnit) -> Cfg:
    """Intra-unit statement-level control flow graph.

    Lines are partitioned into blocks; if/else/while/for/switch/try produce
    branch and loop edges, throw/return produce exit edges to the unit's
    exit block.
    """
    masked = mask_code(unit.text).splitlines()
    while len(masked) < len(unit.lines):
        masked.append("")
    if not masked:
        masked = [""]
    profile = brace_profile(masked)
    n = len(masked)
    nodes = _parse_nodes(masked, profile, 0, n - 1)

    blocks: list[BasicBlock] = []
    edges: list[CfgEdge] = []
    exit_edges: list[tuple[int, str]] = []  # (src block, kind) resolved later

    def add_block(span0: tuple[int, int], kind: str) -> int:
        bid = len(blocks)
        blocks.append(BasicBlock(bid, (span0[0] + 1, span0[1] + 1), kind))
        return bid

    def run_exits(span0: tuple[int, int]) -> tuple[list[str], bool]:
        """Exit-edge kinds present in a run, and whether control falls through.

        A throw or return anywhere in the run yields an exit edge; the
        fallthrough is suppressed only when the run's last real statement
        (close braces aside) is the diverting one.
        """
        kinds: list[str] = []
        falls_through = True
        last_real: str | None = None
        for j in range(span0[0], span0[1] + 1):
            s = masked[j].strip().lstrip("}").strip()
            if not s:
                continue
            if re.match(r"^throw\b", s):
                kinds.append("throw-exit")
            elif re.match(r"^return\b", s):
                kinds.append("return-exit")
            last_real = s
        if last_real is not None and re.match(r"^(throw|return)\b", last_real):
            falls_through = False
        seen = set()
        kinds = [k for k in kinds if not (k in seen or seen.add(k))]
        return kinds, falls_through

    def emit(node_list) -> tuple[int | None, list[tuple[int, str]]]:
        """Emit blocks for a node sequence; returns (first block, open outs)."""
        first: int | None = None
        outs: list[tuple[int, str]] = []
        for node in node_list:
            if node[0] == "run":
                span0 = node[1]
                if span0[1] < span0[0]:
                    continue
                bid = add_block(span0, "body")
                for src, kind in outs:
                    edges.append(CfgEdge(src, bid, kind))
                outs = []
                kinds, falls_through = run_exits(span0)
                for kind in kinds:
                    exit_edges.append((bid, kind))
                if falls_through:
                    outs = [(bid, "sequence")]
                if first is None:
                    first = bid
            else:
                region: _Region = node[1]
                hdr = add_block(region.header, "cond" if region.kind in ("if", "while", "for", "switch", "do") else "header")
                for src, kind in outs:
                    edges.append(CfgEdge(src, hdr, kind))
                outs = []
                if first is None:
                    first = hdr
                outs.extend(_emit_region(region, hdr))
        return first, outs

    def _emit_region(region: _Region, hdr: int) -> list[tuple[int, str]]:
        outs: list[tuple[int, str]] = []
        if region.kind == "if":
            has_else = False
            for sec_kind, cont_line, sec_nodes in region.sections:
                sec_nodes = _with_cont_line(cont_line, sec_nodes)
                sfirst, souts = emit(sec_nodes)
                edge_kind = "branch-true" if sec_kind == "body" else "branch-false"
                if sec_kind == "else":
                    has_else = True
                if sfirst is not None:
                    edges.append(CfgEdge(hdr, sfirst, edge_kind))
                    outs.extend(souts)
                else:
                    outs.append((hdr, edge_kind))
            if not has_else:
                outs.append((hdr, "branch-false"))
        elif region.kind in ("while", "for", "do", "switch"):
            body_nodes = _with_cont_line(None, region.sections[0][2])
            sfirst, souts = emit(body_nodes)
            if sfirst is not None:
                edges.append(CfgEdge(hdr, sfirst, "branch-true"))
                back = "loop-back" if region.kind != "switch" else "sequence"
                for src, _ in souts:
                    edges.append(CfgEdge(src, hdr, back) if region.kind != "switch" else CfgEdge(src, hdr, "sequence"))
                if region.kind == "switch":
                    outs.extend(souts)
            outs.append((hdr, "branch-false"))
        elif region.kind == "try":
            for sec_kind, cont_line, sec_nodes in region.sections:
                sec_nodes = _with_cont_line(cont_line, sec_nodes)
                sfirst, souts = emit(sec_nodes)
                if sfirst is not None:
                    kind = "sequence" if sec_kind in ("body", "finally") else "branch-true"
                    edges.append(CfgEdge(hdr, sfirst, kind))
                    outs.extend(souts)
                else:
                    outs.append((hdr, "sequence"))
        else:
            sfirst, souts = emit(region.sections[0][2])
            if sfirst is not None:
                edges.append(CfgEdge(hdr, sfirst, "sequence"))
                outs.extend(souts)
            else:
                outs.append((hdr, "sequence"))
        return outs

    def _with_cont_line(cont_line: int | None, sec_nodes: list) -> list:
        """Fold a continuation line ('} else {') into its section's first run."""
        if cont_line is None:
            return sec_nodes
        if sec_nodes and sec_nodes[0][0] == "run":
            (start, end) = sec_nodes[0][1]
            return [("run", (cont_line, end))] + sec_nodes[1:]
        return [("run", (cont_line, cont_line))] + sec_nodes

    first, outs = emit(nodes)
    if not blocks:
        add_block((0, max(0, n - 1)), "body")
        first = 0
    # stitch uncovered lines (defensive; partition should already be total)
    covered = set()
    for b in blocks:
        covered.update(range(b.span[0], b.span[1] + 1))
    missing = [ln for ln in range(1, n + 1) if ln not in covered]
    for ln in missing:
        blocks.append(BasicBlock(len(blocks), (ln, ln), "body"))
    blocks.sort(key=lambda b: b.span)
    remap = {}
    resorted = []
    for new_id, b in enumerate(blocks):
        remap[b.block_id] = new_id
        resorted.append(BasicBlock(new_id, b.span, b.kind))
    blocks = resorted
    edges = [CfgEdge(remap[e.src], remap[e.dst], e.kind) for e in edges]
    outs = [(remap[src], kind) for src, kind in outs]
    exit_edges_resolved = [(remap[src], kind) for src, kind in exit_edges]

    exit_id = blocks[-1].block_id
    for src, kind in outs:
        if src != exit_id:
            edges.append(CfgEdge(src, exit_id, kind))
    for src, kind in exit_edges_resolved:
        edges.append(CfgEdge(src, exit_id, kind))

    return Cfg(
        unit_id=unit.unit_id,
        unit_span=unit.span,
        blocks=blocks,
        edges=edges,
        entry_id=blocks[0].block_id,
        exit_id=exit_id,
        statements=_split_statements(masked),
    )


# --- Exception propagation graph --------------------------------------------


@dataclass
class _TryRegion:
    body_span: tuple[int, int]  # unit-relative lines guarded by the try
    catches: list[tuple[str, int]]  # (type name, catch header line)


def _try_regions(masked: list[str], profile) -> list[_TryRegion]:
    regions: list[_TryRegion] = []
    n = len(masked)
    for i, line in enumerate(masked):
        if not re.match(r"^\}?\s*try\b", line.strip()):
            continue
        open_line = _open_brace_line(masked, i)
        if open_line is None:
            continue
        close = _section_close(profile, open_line, n)
        catches: list[tuple[str, int]] = []
        pos = close
        while pos < n:
            cm = re.match(r"^\}?\s*catch\s*\(\s*([A-Za-z_][\w.]*)", masked[pos].strip())
            if not cm:
                fm = re.match(r"^\}?\s*finally\b", masked[pos].strip())
                if fm:
                    c_open = _open_brace_line(masked, pos)
                    if c_open is None:
                        break
                    pos = _section_close(profile, c_open, n)
                    continue
                break
            catches.append((cm.group(1), pos + 1))
            c_open = _open_brace_line(masked, pos)
            if c_open is None:
                break
            pos = _section_close(profile, c_open, n)
        regions.append(_TryRegion(body_span=(open_line + 2, close), catches=catches))
    return regions


def build_epg(unit: CodeUnit, tree: CeeTree, table: list[dict] | None = None) -> Epg:
    """Exception sites and their propagation targets.

    Sites come from throw statements, throws clauses, and calls matching the
    dangerous-operation keyword table. Each site routes to the nearest
    enclosing catch of a supertype, else to the unit exit.
    """
    masked = mask_code(unit.text).splitlines()
    while len(masked) < len(unit.lines):
        masked.append("")
    profile = brace_profile(masked)
    patterns = keyword_patterns(table if table is not None else build_keyword_table(tree))

    sites: list[EpgSite] = []
    for idx, line in enumerate(masked, start=1):
        if _SKIP_LINE_RE.match(line):
            continue
        for m in _THROW_NEW_RE.finditer(line):
            sites.append(EpgSite(idx, m.group(1).split(".")[-1], "throw-stmt"))
        tm = _THROWS_RE.search(line)
        if tm:
            for name in tm.group(1).split(","):
                name = name.strip().split(".")[-1]
                if name:
                    sites.append(EpgSite(idx, name, "throws-clause"))
        seen_here: set[str] = set()
        for pattern, node_name in patterns:
            if node_name not in seen_here and pattern.matches(line):
                seen_here.add(node_name)
                sites.append(EpgSite(idx, node_name, "api-call"))

    regions = _try_regions(masked, profile)
    edges: list[EpgEdge] = []
    for site in sites:
        target = "exit"
        enclosing = [
            (ri, r) for ri, r in enumerate(regions)
            if r.body_span[0] <= site.rel_line <= r.body_span[1]
        ]
        # innermost first: smaller body span is nested deeper
        enclosing.sort(key=lambda pair: pair[1].body_span[1] - pair[1].body_span[0])
        for ri, region in enclosing:
            caught = None
            for ci, (catch_type, _) in enumerate(region.catches):
                if catch_type == site.exception_type:
                    caught = ci
                    break
                if (
                    site.exception_type in tree
                    and catch_type in tree
                    and is_subtype(site.exception_type, catch_type, tree)
                ):
                    caught = ci
                    break
            if caught is not None:
                target = f"catch:{ri}:{caught}"
                break
        edges.append(EpgEdge(site, target))
    return Epg(unit_id=unit.unit_id, sites=sites, edges=edges)


# --- Detection arms ----------------------------------------------------------


def _runs(lines: list[int]) -> list[tuple[int, int]]:
    """Maximal runs of consecutive line numbers."""
    runs: list[tuple[int, int]] = []
    for line in sorted(set(lines)):
        if runs and line == runs[-1][1] + 1:
            runs[-1] = (runs[-1][0], line)
        else:
            runs.append((line, line))
    return runs


def _hint_of(type_name: str, tree: CeeTree) -> str | None:
    if type_name not in tree:
        return None
    try:
        return branch_of(type_name, tree)
    except Exception:
        return None


def detect_static(
    unit: CodeUnit, tree: CeeTree, table: list[dict] | None = None
) -> list[SensitiveSegment]:
    """Segments whose exception sites propagate unhandled to the unit exit."""
    epg = build_epg(unit, tree, table=table)
    unhandled = epg.unhandled_sites()
    by_line: dict[int, set[str]] = {}
    for site in unhandled:
        by_line.setdefault(site.rel_line, set()).add(site.exception_type)
    segments = []
    for start, end in _runs(list(by_line)):
        hints = set()
        for line in range(start, end + 1):
            for type_name in by_line.get(line, ()):
                hint = _hint_of(type_name, tree)
                if hint:
                    hints.add(hint)
        segments.append(
            SensitiveSegment(
                unit_id=unit.unit_id,
                span=(unit.start + start - 1, unit.start + end - 1),
                origin=frozenset({"static"}),
                hints=frozenset(hints),
            )
        )
    return segments


def scenario_doc(tree: CeeTree, table: list[dict]) -> str:
    return _doc_of(tree, table, "scenario")


def property_doc(tree: CeeTree, table: list[dict]) -> str:
    return _doc_of(tree, table, "property")


def _doc_of(tree: CeeTree, table: list[dict], field_name: str) -> str:
    by_node: dict[str, list[str]] = {}
    for row in table:
        by_node.setdefault(row["node"], []).append(f"{row['kind']}:{row['pattern']}")
    lines = []
    for node in tree.root.walk():
        text = getattr(node, field_name)
        if not text or node.name not in by_node:
            continue
        pats = "; ".join(by_node[node.name])
        lines.append(f"- {node.name}: {text} [APIs: {pats}]")
    return "\n".join(lines)


def _catch_covers(rel_line: int, name: str, regions: list[_TryRegion], tree: CeeTree) -> bool:
    """True when an enclosing try already catches `name` or a supertype."""
    for region in regions:
        if not region.body_span[0] <= rel_line <= region.body_span[1]:
            continue
        for catch_type, _ in region.catches:
            if catch_type == name:
                return True
            if name in tree and catch_type in tree and is_subtype(name, catch_type, tree):
                return True
    return False


def detect_match(
    unit: CodeUnit,
    tree: CeeTree,
    backend,
    table: list[dict] | None = None,
) -> list[SensitiveSegment]:
    """Scenario- and property-matching arm via the labeling prompts.

    Labeled lines already guarded by a covering catch are dropped, mirroring
    the static arm's handledness rule. Backend failure or persistently
    malformed output degrades to an empty result; the static arm still flows.
    """
    table = table if table is not None else build_keyword_table(tree)
    masked = mask_code(unit.text).splitlines()
    while len(masked) < len(unit.lines):
        masked.append("")
    regions = _try_regions(masked, brace_profile(masked))
    segments: list[SensitiveSegment] = []
    for template, doc, origin in (
        ("detector-scenario", scenario_doc(tree, table), "scenario-match"),
        ("detector-property", property_doc(tree, table), "property-match"),
    ):
        bindings = {template.split("-")[1]: doc, "code": unit.text}
        try:
            payload = backend.call(template, bindings, phase="detect")
        except (BackendError, MalformedOutputError) as exc:
            backend.record_degraded(f"detect_match({unit.unit_id}, {template}): {exc}")
            continue
        labeled: dict[int, set[str]] = {}
        for entry in payload["code_with_label"]:
            rel = int(entry["line"])
            if rel < 1 or rel > len(unit.lines):
                continue
            if _SKIP_LINE_RE.match(unit.lines[rel - 1]):
                continue
            names = {
                str(x) for x in entry["labels"]
                if str(x) != "None" and not _catch_covers(rel, str(x), regions, tree)
            }
            if names:
                labeled.setdefault(rel, set()).update(names)
        for start, end in _runs(list(labeled)):
            hints = set()
            for line in range(start, end + 1):
                for name in labeled.get(line, ()):
                    hint = _hint_of(name, tree)
                    if hint:
                        hints.add(hint)
            segments.append(
                SensitiveSegment(
                    unit_id=unit.unit_id,
                    span=(unit.start + start - 1, unit.start + end - 1),
                    origin=frozenset({origin}),
                    hints=frozenset(hints),
                )
            )
    return segments


def merge(
    static: list[SensitiveSegment], matched: list[SensitiveSegment]
) -> list[SensitiveSegment]:
    """Union of the two arms: overlapping or adjacent (gap <= 1 line) spans
    coalesce, origins and hints union, output sorted by start line."""
    segments = list(static) + list(matched)
    if not segments:
        return []
    unit_ids = {s.unit_id for s in segments}
    if len(unit_ids) > 1:
        raise ValueError(f"segments from multiple units: {sorted(unit_ids)}")
    segments.sort(key=lambda s: s.span)
    out: list[SensitiveSegment] = []
    for seg in segments:
        if out and seg.span[0] <= out[-1].span[1] + 2:
            prev = out[-1]
            out[-1] = SensitiveSegment(
                unit_id=prev.unit_id,
                span=(prev.span[0], max(prev.span[1], seg.span[1])),
                origin=prev.origin | seg.origin,
                hints=prev.hints | seg.hints,
            )
        else:
            out.append(seg)
    return out

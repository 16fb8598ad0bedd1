"""Hierarchical exception knowledge base: load, validate, query, enrich.

The tree mirrors the Java exception class hierarchy. The root is always
``Throwable``; its grandchildren (depth 2) are the branch roots used for
scenario-driven retrieval. Each node carries a payload describing when the
exception arises, what characterizes it, and how to handle it.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import (
    CeeParseError,
    CeeValidationError,
    DepthError,
    NoStrategyError,
    UnknownNameError,
)
from .javatext import ApiPattern, extract_api_patterns, mask_code

logger = logging.getLogger(__name__)

ROOT_NAME = "Throwable"
MAX_DEPTH = 5
CODE_PLACEHOLDER = "{{code}}"

_INFO_FIELDS = (
    "definition",
    "reasons",
    "dangerous_operations",
    "sample_code",
    "handle_code",
    "handle_logic",
)
_NODE_FIELDS = {"name", "children", "info", "scenario", "property"}


@dataclass
class CeeNode:
    name: str
    children: list["CeeNode"] = field(default_factory=list)
    definition: str = ""
    reasons: str = ""
    dangerous_operations: str = ""
    sample_code: str = ""
    handle_code: str = ""
    handle_logic: str = ""
    scenario: str = ""
    property: str = ""
    parent: "CeeNode | None" = field(default=None, repr=False, compare=False)
    depth: int = field(default=0, compare=False)

    def is_leaf(self) -> bool:
        return not self.children

    def ancestors(self) -> list["CeeNode"]:
        """Path from this node's parent up to the root."""
        out = []
        node = self.parent
        while node is not None:
            out.append(node)
            node = node.parent
        return out

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass
class BranchLabel:
    """Development-scenario label attached to one branch root."""

    branch: str
    text: str
    keywords: set[str]
    revision: int = 0
    degraded: bool = False


@dataclass(frozen=True)
class HandlingStrategy:
    """How to wrap fragile code for one exception type.

    ``handle_code`` is a template: it contains exactly one occurrence of
    ``{{code}}`` (the fragile statements) and at least one catch clause.
    """

    type_name: str
    handle_logic: str
    handle_code: str


class CeeTree:
    """Validated, immutable exception hierarchy with a name index."""

    def __init__(self, root: CeeNode):
        self.root = root
        self.index: dict[str, CeeNode] = {}
        self._register(root, None, 0)
        self.branch_roots: list[CeeNode] = [
            n for n in root.walk() if n.depth == 2
        ]

    def _register(self, node: CeeNode, parent: CeeNode | None, depth: int) -> None:
        node.parent = parent
        node.depth = depth
        if node.name in self.index:
            raise CeeValidationError("duplicate name", node=node.name)
        self.index[node.name] = node
        for child in node.children:
            self._register(child, node, depth + 1)

    def node(self, name: str) -> CeeNode:
        try:
            return self.index[name]
        except KeyError:
            raise UnknownNameError(name) from None

    def __contains__(self, name: str) -> bool:
        return name in self.index

    def __len__(self) -> int:
        return len(self.index)


def _parse_node(obj: object, strict: bool, path: str) -> CeeNode:
    if not isinstance(obj, dict):
        raise CeeParseError(f"node at {path} is not an object")
    name = obj.get("name")
    if not isinstance(name, str) or not name:
        raise CeeParseError(f"node at {path} has no name")
    unknown = set(obj) - _NODE_FIELDS
    if unknown:
        msg = f"unknown field(s) {sorted(unknown)} on node {name!r}"
        if strict:
            raise CeeParseError(msg)
        logger.warning("%s", msg)
    info = obj.get("info", {})
    if not isinstance(info, dict):
        raise CeeParseError(f"info of node {name!r} is not an object")
    unknown_info = set(info) - set(_INFO_FIELDS)
    if unknown_info:
        msg = f"unknown info field(s) {sorted(unknown_info)} on node {name!r}"
        if strict:
            raise CeeParseError(msg)
        logger.warning("%s", msg)
    children_raw = obj.get("children", [])
    if not isinstance(children_raw, list):
        raise CeeParseError(f"children of node {name!r} is not a list")
    children = [
        _parse_node(c, strict, f"{path}.children[{i}]")
        for i, c in enumerate(children_raw)
    ]
    return CeeNode(
        name=name,
        children=children,
        definition=str(info.get("definition", "")),
        reasons=str(info.get("reasons", "")),
        dangerous_operations=str(info.get("dangerous_operations", "")),
        sample_code=str(info.get("sample_code", "")),
        handle_code=str(info.get("handle_code", "")),
        handle_logic=str(info.get("handle_logic", "")),
        scenario=str(obj.get("scenario", "")),
        property=str(obj.get("property", "")),
    )


def _validate(tree: CeeTree) -> None:
    if tree.root.name != ROOT_NAME:
        raise CeeValidationError("root must be Throwable", node=tree.root.name)
    for node in tree.root.walk():
        if node.depth > MAX_DEPTH:
            raise CeeValidationError(
                f"depth {node.depth} exceeds {MAX_DEPTH}", node=node.name
            )
        if node.is_leaf():
            for fld in ("scenario", "property", "handle_logic"):
                if not getattr(node, fld).strip():
                    raise CeeValidationError(
                        f"leaf node missing {fld}", node=node.name
                    )
        if node.handle_code:
            caught = _catch_types(node.handle_code)
            if not caught:
                raise CeeValidationError(
                    "handle_code has no catch clause", node=node.name
                )
            allowed = {node.name} | {a.name for a in node.ancestors()}
            if not any(t in allowed for t in caught):
                raise CeeValidationError(
                    "handle_code catches neither the node's type nor an ancestor",
                    node=node.name,
                )


def _catch_types(code: str) -> list[str]:
    import re

    masked = mask_code(code)
    return re.findall(r"\bcatch\s*\(\s*([A-Za-z_][\w.]*)", masked)


def loads(text: str, strict: bool = False) -> CeeTree:
    """Parse and validate an exception-tree document from a JSON string."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CeeParseError(f"malformed JSON: {exc}") from exc
    root = _parse_node(doc, strict, "$")
    tree = CeeTree(root)
    _validate(tree)
    return tree


def load_cee(path: str | Path, strict: bool = False) -> CeeTree:
    """Load and validate an exception-tree document from a file."""
    p = Path(path)
    if not p.exists():
        raise CeeParseError(f"no such file: {p}")
    return loads(p.read_text(encoding="utf-8"), strict=strict)


def dumps(tree: CeeTree) -> str:
    """Serialize a tree back to its document form."""

    def node_obj(node: CeeNode) -> dict:
        info = {
            "definition": node.definition,
            "reasons": node.reasons,
            "dangerous_operations": node.dangerous_operations,
            "sample_code": node.sample_code,
            "handle_code": node.handle_code,
            "handle_logic": node.handle_logic,
        }
        return {
            "name": node.name,
            "children": [node_obj(c) for c in node.children],
            "info": {k: v for k, v in info.items() if v},
            "scenario": node.scenario,
            "property": node.property,
        }

    return json.dumps(node_obj(tree.root), indent=2)


def bundled_cee_path() -> Path:
    return Path(str(resources.files("exguard").joinpath("data/cee.json")))


def load_bundled() -> CeeTree:
    return load_cee(bundled_cee_path())


def is_subtype(child: str, ancestor: str, tree: CeeTree) -> bool:
    """True iff `ancestor` lies strictly on the root path of `child`."""
    child_node = tree.node(child)
    tree.node(ancestor)  # surfaces UnknownNameError for the second name too
    return any(a.name == ancestor for a in child_node.ancestors())


def branch_of(name: str, tree: CeeTree) -> str:
    """The depth-2 ancestor owning `name` (the node itself when at depth 2)."""
    node = tree.node(name)
    if node.depth < 2:
        raise DepthError(
            f"{name!r} is at depth {node.depth}; branches start at depth 2"
        )
    while node.depth > 2:
        node = node.parent
    return node.name


def stats(tree: CeeTree) -> dict[str, int]:
    """Node count, branch count (depth-2 nodes) and max depth (root = 0)."""
    max_depth = max(n.depth for n in tree.root.walk())
    return {
        "node_count": len(tree.index),
        "branch_count": len(tree.branch_roots),
        "max_depth": max_depth,
    }


def strategy_of(name: str, tree: CeeTree) -> HandlingStrategy:
    """Resolve the handling strategy for a type.

    A node without handle_code inherits the nearest ancestor's template;
    the returned strategy always names the requested type. Searching stops
    at depth 1 (the Exception/Error level).
    """
    node = tree.node(name)
    donor = node
    while donor is not None and not donor.handle_code.strip():
        donor = donor.parent
    if donor is None or donor.depth < 1 or not donor.handle_logic.strip():
        raise NoStrategyError(
            f"no ancestor of {name!r} down to depth 1 carries a handling strategy"
        )
    logic = node.handle_logic.strip() or donor.handle_logic.strip()
    template = _templatize(donor.handle_code, name)
    return HandlingStrategy(type_name=name, handle_logic=logic, handle_code=template)


def _templatize(handle_code: str, type_name: str) -> str:
    """Canonical try/catch template from a concrete handled sample.

    The try body is replaced by the fragile-code placeholder; the first
    catch clause's body is kept and re-typed to `type_name`.
    """
    body, var = catch_body(handle_code)
    lines = [f"try {{", CODE_PLACEHOLDER, f"}} catch ({type_name} {var}) {{"]
    lines.extend("    " + b if b.strip() else b for b in body)
    lines.append("}")
    return "\n".join(lines)


def catch_body(handle_code: str) -> tuple[list[str], str]:
    """Body lines and variable name of the first catch clause in a sample."""
    import re

    masked = mask_code(handle_code)
    m = re.search(r"\bcatch\s*\(\s*[A-Za-z_][\w.]*\s+(\w+)\s*\)\s*\{", masked)
    if not m:
        raise CeeValidationError("handle_code has no catch clause")
    var = m.group(1)
    depth = 1
    i = m.end()
    while i < len(masked) and depth > 0:
        if masked[i] == "{":
            depth += 1
        elif masked[i] == "}":
            depth -= 1
        i += 1
    raw = handle_code[m.end(): i - 1]
    body = [ln.strip() for ln in raw.splitlines() if ln.strip()]
    return body, var


def enrich_node(name: str, sample_description: str, backend) -> dict[str, str]:
    """Produce scenario and property text for a node via the two-step chain.

    The first call drafts a scenario at the granularity of the supplied
    sample description; the second refines it and adds the property.
    """
    if not sample_description.strip():
        raise ValueError("sample description must be non-empty")
    first = backend.call("cee-genscenario", {"sample_desc": sample_description, "ename": name})
    scenario = str(first["scenario"])
    second = backend.call(
        "cee-genproperty",
        {"sample_desc": sample_description, "ename": name, "scenario": scenario},
    )
    return {"scenario": str(second["scenario"]), "property": str(second["property"])}


def build_keyword_table(tree: CeeTree) -> list[dict[str, str]]:
    """Dangerous-operation keyword table derived from node prose.

    Each row maps an API pattern to the node whose dangerous_operations
    mention it. Rows are ordered by node (document order) then pattern.
    """
    rows: list[dict[str, str]] = []
    seen: set[tuple[str, str]] = set()
    for node in tree.root.walk():
        if not node.dangerous_operations:
            continue
        for pat in extract_api_patterns(node.dangerous_operations):
            key = (pat.key(), node.name)
            if key not in seen:
                seen.add(key)
                rows.append({"kind": pat.kind, "pattern": pat.text, "node": node.name})
    return rows


def keyword_patterns(table: list[dict[str, str]]) -> list[tuple[ApiPattern, str]]:
    """Compile a keyword table into (pattern, node name) pairs."""
    return [(ApiPattern(row["kind"], row["pattern"]), row["node"]) for row in table]


def bundled_keyword_table() -> list[dict[str, str]]:
    path = Path(str(resources.files("exguard").joinpath("data/cee_keywords.json")))
    return json.loads(path.read_text(encoding="utf-8"))


def node_terms(node: CeeNode) -> set[str]:
    """Content terms of a node's scenario, property and dangerous operations."""
    from .javatext import content_terms

    return (
        content_terms(node.scenario)
        | content_terms(node.property)
        | content_terms(node.dangerous_operations)
    )

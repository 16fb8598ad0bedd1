"""Prompt templates, completion backends and structured-output parsing.

Every model-dependent step in the pipeline goes through a :class:`Gateway`,
which owns retries, bounded concurrency and JSON extraction. Two backends
exist: a remote chat-completion endpoint and a deterministic offline mock.
All other modules depend only on the gateway surface, so the full pipeline
runs (and is tested) without a network.
"""

from __future__ import annotations

import json
import logging
import re
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass

from .errors import (
    BackendError,
    MalformedOutputError,
    SchemaMismatchError,
    UnboundPlaceholderError,
)
from .javatext import content_terms, identifier_tokens, mask_code

logger = logging.getLogger(__name__)

_MARKER_RE = re.compile(r"^<<exguard:([a-z-]+)>>")
_SECTION_RE = re.compile(r"^\[([A-Za-z][A-Za-z -]*)\]$")


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str
    placeholders: tuple[str, ...]
    schema: str  # human-readable shape of the required JSON reply


@dataclass
class BackendConfig:
    endpoint: str = ""
    model: str = ""
    timeout_s: float = 60.0
    max_retries: int = 3
    max_concurrency: int = 8
    backoff_s: float = 0.5
    temperature: float = 0.0
    credential_env: str = "EXGUARD_API_KEY"

    def __post_init__(self):
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


@dataclass
class Completion:
    text: str
    payload: dict | None = None
    attempts: int = 1
    degraded: bool = False


def _tpl(name: str, body: str, placeholders: tuple[str, ...], schema: str) -> PromptTemplate:
    return PromptTemplate(name, f"<<exguard:{name}>>\n" + body.strip() + "\n", placeholders, schema)


TEMPLATES: dict[str, PromptTemplate] = {}

for _t in (
    _tpl(
        "planner",
        """
You are a software engineer tasked with analyzing a codebase. Segment the
given codebase into manageable units for further analysis. The criteria for
segmentation are:

- Each unit should have a length within {limit} lines.
- The function nesting level should be low.
- The logical flow should be clear and self-contained.
- The segment should be complete and readable.

[Codebase]
{codebase}

[Output Format]
List the units, each with a one-sentence function-level summary, in this
JSON format:
{
    "units": [
        {"span": [1, 10], "summary": "..."}
    ]
}
Ensure that each unit complies with the criteria specified above.
""",
        ("limit", "codebase"),
        '{"units": [{"span": [start, end], "summary": str}]}',
    ),
    _tpl(
        "detector-scenario",
        """
You are a java code auditor. You will be given a doc describing different
exception scenarios and a java code snippet.

Your task is to label each line of the code snippet with the exception
scenario that it belongs to. If a line does not belong to any scenario, label
it with "None". If a line belongs to several of the given scenarios, label it
with all the scenarios it belongs to.

[Scenario description]
{scenario}

[Java code]
{code}

[Output Format]
Output the labeling result in this JSON format, with one entry per labeled
line (1-based line numbers; lines labeled "None" are omitted):
{
    "code_with_label": [
        {"line": 1, "labels": ["ScenarioName"]}
    ]
}
""",
        ("scenario", "code"),
        '{"code_with_label": [{"line": int, "labels": [str]}]}',
    ),
    _tpl(
        "detector-property",
        """
You are a java code auditor. You will be given a doc describing different
exception properties and a java code snippet.

Your task is to label each line of the code snippet with the exception
property that it belongs to. If a line does not belong to any property, label
it with "None". If a line belongs to several of the given properties, label it
with all the properties it belongs to.

[Property description]
{property}

[Java code]
{code}

[Output Format]
Output the labeling result in this JSON format, with one entry per labeled
line (1-based line numbers; lines labeled "None" are omitted):
{
    "code_with_label": [
        {"line": 1, "labels": ["PropertyName"]}
    ]
}
""",
        ("property", "code"),
        '{"code_with_label": [{"line": int, "labels": [str]}]}',
    ),
    _tpl(
        "predator",
        """
You are a code analysis assistant. Your task is to process the given code
unit and identify specific exception types that may be thrown.

[Code Unit]
{code_unit}

[Code Summary]
{code_summary}

Based on the code summary and the potential exception branches provided,
identify the specific exception nodes that may be thrown.

[Potential Exception Branches]
{exception_branches}

[Output Format]
Answer in the following JSON format:
{
    "ExceptionNodes": [
        {"ExceptionType": "ExceptionType1"},
        {"ExceptionType": "ExceptionType2"}
    ]
}
Ensure that your response strictly follows the specified format.
""",
        ("code_unit", "code_summary", "exception_branches"),
        '{"ExceptionNodes": [{"ExceptionType": str}]}',
    ),
    _tpl(
        "ranker",
        """
You are an exception ranking assistant. Your task is to assign grades to the
identified exceptions based on their likelihood and the suitability of their
handling strategies.

For each exception, please calculate:

- Exception Likelihood Score (from 0 to 1) based on its attributes and impact.
- Suitability Score (from 0 to 1) of the proposed handling strategy.

[Identified Exceptions and Handling Strategies]
{exception_nodes}

[Output Format]
Provide your calculations and the final grades in the following JSON format:
{
    "Exceptions": [
        {
            "ExceptionType": "ExceptionType1",
            "LikelihoodScore": 0.0,
            "SuitabilityScore": 0.0
        }
    ]
}
Please ensure your response adheres to the specified format.
""",
        ("exception_nodes",),
        '{"Exceptions": [{"ExceptionType": str, "LikelihoodScore": float, "SuitabilityScore": float}]}',
    ),
    _tpl(
        "handler",
        """
You are a software engineer specializing in exception handling. Your task is
to optimize the given code unit by applying appropriate exception handling
strategies.

[Code Unit]
{code_unit}

[Handling Strategy]
{strategy1}

[Output Format]
Generate the optimized code with the applied exception handling strategies,
in the following JSON format:
{
    "optimized_code": "..."
}
Ensure that the code is syntactically correct and adheres to best practices
in exception handling.
""",
        ("code_unit", "strategy1"),
        '{"optimized_code": str}',
    ),
    _tpl(
        "judge",
        """
You are a strict java code reviewer. Assess whether the following generated
try-catch block meets engineering best practices: exception types as specific
as the context allows, no empty catch bodies, and no catch clause made
unreachable by an earlier catch of one of its supertypes.

[Try-Catch Block]
{block}

[Branch Hints]
{hints}

[Output Format]
Provide a binary assessment in the following JSON format, with "good" or
"bad" as the verdict:
{
    "verdict": "good"
}
""",
        ("block", "hints"),
        '{"verdict": "good"|"bad"}',
    ),
    _tpl(
        "cee-genscenario",
        """
Below is a kind of exception in java. Please, according to the sample
description of the scenario of the error type, provide a scenario description
of the exception in java just like the sample description. Note that the
granularity of the scenario description you generate should be consistent
with the example.

[Sample Description]
{sample_desc}

[Exception]
{ename}

[Output Format]
Output in the following JSON format, keeping the scenario granularity
consistent with the example:
{
    "scenario": "..."
}
""",
        ("sample_desc", "ename"),
        '{"scenario": str}',
    ),
    _tpl(
        "cee-genproperty",
        """
Below is a kind of exception in java and its scenario description. Please,
according to the sample description of the scenario and property of the error
type, provide a property description of the exception in java just like the
sample description. You can also adjust the given scenario description to
make them consistent. Note that the granularity of the property description
you generate should be consistent with the example.

[Sample Description]
{sample_desc}

[Exception]
{ename}

[Scenario Description]
{scenario}

[Output Format]
Output in the following JSON format, keeping the property granularity
consistent with the example:
{
    "scenario": "...",
    "property": "..."
}
""",
        ("sample_desc", "ename", "scenario"),
        '{"scenario": str, "property": str}',
    ),
):
    TEMPLATES[_t.name] = _t


def render(name: str, bindings: dict[str, object]) -> str:
    """Substitute bindings into a template in a single pass.

    Brace characters inside binding values are passed through verbatim; only
    the template's declared placeholders are substituted.
    """
    template = TEMPLATES[name]
    missing = [p for p in template.placeholders if p not in bindings]
    if missing:
        raise UnboundPlaceholderError(missing[0])
    pattern = re.compile(r"\{(" + "|".join(map(re.escape, template.placeholders)) + r")\}")
    return pattern.sub(lambda m: str(bindings[m.group(1)]), template.body)


def _balanced_from(text: str, start: int) -> str | None:
    """Balanced {...} substring starting at `start`, string-aware."""
    depth = 0
    in_str = False
    escape = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_str:
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                in_str = False
            continue
        if ch == '"':
            in_str = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start:i + 1]
    return None


def _json_candidates(text: str):
    """Balanced {...} substrings, earliest start first.

    Every open brace is a potential start, so an object preceded by a stray
    unmatched brace is still recovered.
    """
    for i, ch in enumerate(text):
        if ch == "{":
            candidate = _balanced_from(text, i)
            if candidate is not None:
                yield candidate


_VALIDATORS = {}


def _validator(name):
    def deco(fn):
        _VALIDATORS[name] = fn
        return fn
    return deco


def _require(payload: dict, field_name: str, kind=None):
    if field_name not in payload:
        raise SchemaMismatchError(f"missing field: {field_name}")
    if kind is not None and not isinstance(payload[field_name], kind):
        raise SchemaMismatchError(f"field {field_name} has wrong type")
    return payload[field_name]


@_validator("planner")
def _v_planner(payload):
    units = _require(payload, "units", list)
    for u in units:
        _require(u, "span", list)
        _require(u, "summary", str)


@_validator("detector-scenario")
@_validator("detector-property")
def _v_detector(payload):
    entries = _require(payload, "code_with_label", list)
    for e in entries:
        _require(e, "line", int)
        _require(e, "labels", list)


@_validator("predator")
def _v_predator(payload):
    nodes = _require(payload, "ExceptionNodes", list)
    for e in nodes:
        _require(e, "ExceptionType", str)


@_validator("ranker")
def _v_ranker(payload):
    entries = _require(payload, "Exceptions", list)
    for e in entries:
        _require(e, "ExceptionType", str)
        _require(e, "LikelihoodScore", (int, float))
        _require(e, "SuitabilityScore", (int, float))


@_validator("handler")
def _v_handler(payload):
    _require(payload, "optimized_code", str)


@_validator("judge")
def _v_judge(payload):
    verdict = _require(payload, "verdict", str)
    if verdict not in ("good", "bad"):
        raise SchemaMismatchError("field verdict must be 'good' or 'bad'")


@_validator("cee-genscenario")
def _v_genscenario(payload):
    _require(payload, "scenario", str)


@_validator("cee-genproperty")
def _v_genproperty(payload):
    _require(payload, "scenario", str)
    _require(payload, "property", str)


def extract_json(text: str, template_name: str | None = None) -> dict:
    """First balanced JSON object in `text`, optionally schema-checked.

    Surrounding prose and code fences are tolerated; the first balanced
    candidate that parses wins.
    """
    for candidate in _json_candidates(text):
        try:
            payload = json.loads(candidate)
        except json.JSONDecodeError:
            continue
        if not isinstance(payload, dict):
            continue
        if template_name is not None:
            _VALIDATORS[template_name](payload)
        return payload
    raise MalformedOutputError("no parseable JSON object found in reply")


def template_of_prompt(prompt: str) -> str:
    m = _MARKER_RE.match(prompt)
    if not m:
        raise MalformedOutputError("prompt carries no template marker")
    name = m.group(1)
    if name not in TEMPLATES:
        raise MalformedOutputError(f"unknown template marker: {name}")
    return name


def prompt_sections(prompt: str) -> dict[str, str]:
    """Bracket-headed sections of a rendered prompt, header -> content."""
    sections: dict[str, str] = {}
    current = None
    buf: list[str] = []
    for line in prompt.splitlines():
        m = _SECTION_RE.match(line.strip())
        if m:
            if current is not None:
                sections[current] = "\n".join(buf).strip("\n")
            current = m.group(1)
            buf = []
        elif current is not None:
            buf.append(line)
    if current is not None:
        sections[current] = "\n".join(buf).strip("\n")
    return sections


class HttpBackend:
    """Chat-completion endpoint speaking the common JSON wire format."""

    def __init__(self, config: BackendConfig):
        if not config.endpoint:
            raise BackendError("no endpoint configured for live mode")
        self.config = config
        self.name = "http"

    def complete_text(self, prompt: str, timeout_s: float) -> str:
        import os

        body = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        }
        headers = {"Content-Type": "application/json"}
        credential = os.environ.get(self.config.credential_env, "")
        if credential:
            headers["Authorization"] = f"Bearer {credential}"
        request = urllib.request.Request(
            self.config.endpoint,
            data=json.dumps(body).encode("utf-8"),
            headers=headers,
            method="POST",
        )
        try:
            with urllib.request.urlopen(request, timeout=timeout_s) as resp:
                reply = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, json.JSONDecodeError, TimeoutError) as exc:
            raise BackendError(f"endpoint failure: {exc}") from exc
        try:
            return reply["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError("endpoint reply missing message content") from exc


class MockBackend:
    """Deterministic keyword rule engine standing in for a remote model.

    Routes on the template marker, reads only the rendered prompt plus a
    fixed exception tree, and always answers with schema-valid JSON. The
    same prompt bytes therefore always produce the same completion bytes.
    """

    def __init__(self, tree=None, latency_s: float = 0.0):
        from . import cee

        self.tree = tree if tree is not None else cee.load_bundled()
        self.latency_s = latency_s
        self.name = "mock"

    def complete_text(self, prompt: str, timeout_s: float) -> str:
        if self.latency_s:
            time.sleep(self.latency_s)
        name = template_of_prompt(prompt)
        sections = prompt_sections(prompt)
        rule = getattr(self, "_rule_" + name.replace("-", "_"))
        return json.dumps(rule(sections), sort_keys=True)

    # -- per-template rules ------------------------------------------------

    def _rule_planner(self, sections):
        code = sections.get("Codebase", "")
        line_count = len(code.splitlines())
        idents = sorted(identifier_tokens(code))
        if not code.strip():
            summary = "empty unit"
        else:
            summary = "Code unit using " + ", ".join(idents[:12]) + "." if idents else "Plain code unit."
        return {"units": [{"span": [1, max(1, line_count)], "summary": summary}]}

    @staticmethod
    def parse_doc_entries(doc: str) -> list[tuple[str, list]]:
        """Entries of a detector doc: `- Name: text [APIs: kind:pat; ...]`."""
        from .javatext import ApiPattern

        entries = []
        for line in doc.splitlines():
            m = re.match(r"^- (\w+): .*\[APIs: (.*)\]\s*$", line.strip())
            if not m:
                continue
            pats = []
            for part in m.group(2).split(";"):
                part = part.strip()
                if not part or ":" not in part:
                    continue
                kind, text = part.split(":", 1)
                pats.append(ApiPattern(kind.strip(), text.strip()))
            entries.append((m.group(1), pats))
        return entries

    def _label_lines(self, doc: str, code: str) -> list[dict]:
        entries = self.parse_doc_entries(doc)
        masked_lines = mask_code(code).splitlines()
        out = []
        for i, line in enumerate(masked_lines, start=1):
            labels = sorted(
                name for name, pats in entries if any(p.matches(line) for p in pats)
            )
            if labels:
                out.append({"line": i, "labels": labels})
        return out

    def _rule_detector_scenario(self, sections):
        return {
            "code_with_label": self._label_lines(
                sections.get("Scenario description", ""), sections.get("Java code", "")
            )
        }

    def _rule_detector_property(self, sections):
        return {
            "code_with_label": self._label_lines(
                sections.get("Property description", ""), sections.get("Java code", "")
            )
        }

    def _rule_predator(self, sections):
        names = []
        for line in sections.get("Potential Exception Branches", "").splitlines():
            m = re.match(r"^- (\w+)", line.strip())
            if m and m.group(1) not in names:
                names.append(m.group(1))
        return {"ExceptionNodes": [{"ExceptionType": n} for n in names]}

    def _rule_ranker(self, sections):
        content = sections.get("Identified Exceptions and Handling Strategies", "")
        segment_lines = [
            line[4:] for line in content.splitlines() if line.startswith("    ")
        ]
        segment_terms = content_terms("\n".join(segment_lines))
        out = []
        for line in content.splitlines():
            m = re.match(
                r"^- type: (\w+) \| property: (.*) \| has_strategy: (yes|no)$",
                line.strip(),
            )
            if not m:
                continue
            prop_terms = content_terms(m.group(2))
            likelihood = (
                len(prop_terms & segment_terms) / len(prop_terms) if prop_terms else 0.0
            )
            out.append(
                {
                    "ExceptionType": m.group(1),
                    "LikelihoodScore": round(min(1.0, likelihood), 6),
                    "SuitabilityScore": 1.0 if m.group(3) == "yes" else 0.5,
                }
            )
        return {"Exceptions": out}

    def _rule_handler(self, sections):
        from .cee import CODE_PLACEHOLDER

        unit = sections.get("Code Unit", "")
        strategy = sections.get("Handling Strategy", "")
        if CODE_PLACEHOLDER in strategy:
            indented = "\n".join(
                "    " + ln if ln.strip() else ln for ln in unit.splitlines()
            )
            code = strategy.replace(CODE_PLACEHOLDER, indented)
        else:
            code = unit
        return {"optimized_code": code}

    def _rule_judge(self, sections):
        from .review import review_block

        block = sections.get("Try-Catch Block", "")
        hints = {
            h.strip() for h in sections.get("Branch Hints", "").split(",") if h.strip()
        }
        return {"verdict": "good" if review_block(block, hints, self.tree) else "bad"}

    def _scenario_terms_for(self, ename: str, sample_desc: str) -> list[str]:
        if ename in self.tree:
            node = self.tree.node(ename)
            source = node.dangerous_operations or node.definition or sample_desc
        else:
            source = sample_desc
        return sorted(content_terms(source))[:10]

    def _rule_cee_genscenario(self, sections):
        ename = sections.get("Exception", "").strip()
        terms = self._scenario_terms_for(ename, sections.get("Sample Description", ""))
        return {"scenario": f"attempt an operation involving {', '.join(terms)}"}

    def _rule_cee_genproperty(self, sections):
        ename = sections.get("Exception", "").strip()
        scenario = sections.get("Scenario Description", "").strip()
        if ename in self.tree:
            node = self.tree.node(ename)
            source = node.reasons or node.definition
        else:
            source = sections.get("Sample Description", "")
        terms = sorted(content_terms(source))[:10]
        return {
            "scenario": scenario,
            "property": f"a condition involving {', '.join(terms)}",
        }


class Gateway:
    """Backend façade: render, complete with retries, parse, count failures.

    `call` retries both transport failures and malformed replies up to the
    configured attempt budget. A semaphore bounds in-flight requests, so the
    gateway is safe to share across worker threads.
    """

    def __init__(self, backend, config: BackendConfig | None = None):
        self.backend = backend
        self.config = config or BackendConfig()
        self._slots = threading.BoundedSemaphore(self.config.max_concurrency)
        self._lock = threading.Lock()
        self.calls = 0
        self.successes = 0
        self.degraded_calls = 0
        self.phase_calls: dict[str, int] = {}

    @property
    def is_mock(self) -> bool:
        return isinstance(self.backend, MockBackend)

    def render(self, name: str, bindings: dict[str, object]) -> str:
        return render(name, bindings)

    def complete(self, prompt: str) -> Completion:
        """Raw completion with exponential backoff on transport failures."""
        attempts = self.config.max_retries + 1
        last_error: Exception | None = None
        for attempt in range(1, attempts + 1):
            try:
                with self._lock:
                    self.calls += 1
                with self._slots:
                    text = self.backend.complete_text(prompt, self.config.timeout_s)
                with self._lock:
                    self.successes += 1
                return Completion(text=text, attempts=attempt)
            except BackendError as exc:
                last_error = exc
                if attempt <= self.config.max_retries:
                    time.sleep(self.config.backoff_s * (2 ** (attempt - 1)))
        raise BackendError(
            f"backend failed after {attempts} attempts: {last_error}"
        ) from last_error

    def call(self, name: str, bindings: dict[str, object], phase: str = "") -> dict:
        """Render, complete and parse one template; returns the payload."""
        prompt = self.render(name, bindings)
        if phase:
            with self._lock:
                self.phase_calls[phase] = self.phase_calls.get(phase, 0) + 1
        attempts = self.config.max_retries + 1
        last_error: Exception | None = None
        for attempt in range(1, attempts + 1):
            completion = self.complete(prompt)
            try:
                completion.payload = extract_json(completion.text, template_name=name)
                return completion.payload
            except (MalformedOutputError, SchemaMismatchError) as exc:
                last_error = exc
                logger.debug("malformed %s reply (attempt %d): %s", name, attempt, exc)
        raise MalformedOutputError(
            f"{name} reply stayed malformed after {attempts} attempts: {last_error}"
        ) from last_error

    def record_degraded(self, what: str) -> None:
        with self._lock:
            self.degraded_calls += 1
        logger.warning("degraded: %s", what)


def mock_gateway(tree=None, config: BackendConfig | None = None, latency_s: float = 0.0) -> Gateway:
    return Gateway(MockBackend(tree=tree, latency_s=latency_s), config=config)


def mock_complete(prompt: str, tree=None) -> str:
    """Deterministic completion for a rendered prompt (offline rule engine)."""
    return MockBackend(tree=tree).complete_text(prompt, timeout_s=0.0)

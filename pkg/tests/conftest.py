from __future__ import annotations

from pathlib import Path

import pytest

from exguard.cee import load_bundled
from exguard.errors import BackendError
from exguard.gateway import BackendConfig, Gateway, MockBackend
from exguard.planner import CodeUnit, SourceFile


@pytest.fixture(scope="session")
def tree():
    return load_bundled()


@pytest.fixture()
def gateway(tree):
    return Gateway(MockBackend(tree=tree), BackendConfig(backoff_s=0.0))


@pytest.fixture(scope="session")
def corpus_dir():
    import exguard

    return Path(exguard.__file__).parent / "data" / "corpus"


def make_unit(code: str, path: str = "T.java", start: int = 1) -> CodeUnit:
    lines = tuple(code.splitlines())
    return CodeUnit(
        unit_id=f"{path}:{start}-{start + len(lines) - 1}",
        path=path,
        span=(start, start + len(lines) - 1),
        lines=lines,
        kind="method",
    )


def make_file(code: str, path: str = "T.java") -> SourceFile:
    return SourceFile.from_text(code, path)


class FailingBackend:
    """Backend that always raises, for degraded-path tests."""

    name = "failing"
    is_mock = False

    def complete_text(self, prompt: str, timeout_s: float) -> str:
        raise BackendError("synthetic outage")


class NonJsonBackend:
    """Backend that replies with prose lacking any JSON object."""

    name = "nonjson"
    is_mock = False

    def complete_text(self, prompt: str, timeout_s: float) -> str:
        return "I would rather describe the answer in free text."


class FlakyBackend:
    """Fails a fixed number of times, then delegates to the mock."""

    name = "flaky"
    is_mock = False

    def __init__(self, failures: int, tree=None):
        self.remaining = failures
        self.mock = MockBackend(tree=tree)
        self.attempts = 0

    def complete_text(self, prompt: str, timeout_s: float) -> str:
        self.attempts += 1
        if self.remaining > 0:
            self.remaining -= 1
            raise BackendError("synthetic 500")
        return self.mock.complete_text(prompt, timeout_s)


def failing_gateway() -> Gateway:
    return Gateway(FailingBackend(), BackendConfig(max_retries=1, backoff_s=0.0))


def nonjson_gateway() -> Gateway:
    return Gateway(NonJsonBackend(), BackendConfig(max_retries=2, backoff_s=0.0))

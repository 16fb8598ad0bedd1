"""Exception hierarchy shared across exguard modules."""

from __future__ import annotations


class ExguardError(Exception):
    """Base class for all errors raised by this package."""


class CeeParseError(ExguardError):
    """The exception-knowledge document is not well-formed."""


class CeeValidationError(ExguardError):
    """A structural invariant of the exception tree is violated.

    Carries the name of the offending node when one can be identified.
    """

    def __init__(self, message: str, node: str | None = None):
        super().__init__(message if node is None else f"{message} (node: {node})")
        self.node = node


class UnknownNameError(ExguardError):
    """A type name does not resolve in the exception tree."""

    def __init__(self, name: str):
        super().__init__(f"unknown exception type: {name!r}")
        self.name = name


class DepthError(ExguardError):
    """A node is too shallow for a branch-level operation."""


class NoStrategyError(ExguardError):
    """No handling strategy is available for a type or any ancestor."""


class SegmentationError(ExguardError):
    """Source text cannot be segmented (e.g. unbalanced braces)."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"{message} (line {line})")
        self.line = line


class BackendError(ExguardError):
    """The completion backend failed after all retries."""


class MalformedOutputError(ExguardError):
    """The backend reply never yielded schema-valid output within retries."""


class UnboundPlaceholderError(ExguardError):
    """A prompt template placeholder was not bound at render time."""

    def __init__(self, placeholder: str):
        super().__init__(f"unbound placeholder: {{{placeholder}}}")
        self.placeholder = placeholder


class SchemaMismatchError(ExguardError):
    """Extracted JSON does not match the template's output schema."""


class PatchError(ExguardError):
    """A patch cannot be planned or applied to a unit."""

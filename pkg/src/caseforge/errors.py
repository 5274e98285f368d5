"""Exception hierarchy shared across the package."""

from __future__ import annotations


class CaseforgeError(Exception):
    """Base class for all domain errors; the CLI maps these to exit code 1."""


class TemplateError(CaseforgeError):
    """Prompt template could not be loaded, validated, or rendered."""


class BackendNotConfiguredError(CaseforgeError):
    """No usable LLM backend: neither credentials nor a replay corpus."""


class MissingFixtureError(CaseforgeError):
    """Strict replay mode found no fixture for the request fingerprint."""

    def __init__(self, fingerprint: str, directory: str) -> None:
        super().__init__(f"no replay fixture {fingerprint}.json under {directory}")
        self.fingerprint = fingerprint
        self.directory = directory


class StoreError(CaseforgeError):
    """Workspace persistence failure."""


class NotFoundError(StoreError):
    def __init__(self, kind: str, entity_id: str) -> None:
        super().__init__(f"{kind} {entity_id!r} not found")
        self.kind = kind
        self.entity_id = entity_id


class CorruptFileError(StoreError):
    """A stored JSON document failed to parse; carries the byte offset."""

    def __init__(self, path: str, offset: int, reason: str) -> None:
        super().__init__(f"corrupt file {path} at byte offset {offset}: {reason}")
        self.path = path
        self.offset = offset
        self.reason = reason


class LockError(StoreError):
    """Another writer holds the advisory lock."""


class StoryImportError(StoreError):
    """Story import failed wholesale (unreadable file or unknown format)."""


class ExportError(CaseforgeError):
    """Export preconditions violated, e.g. a case referencing a missing story."""


class PipelineError(CaseforgeError):
    """Generation cannot start, e.g. no requirements selected."""


class InvalidProjectError(CaseforgeError):
    """Operation requires a project that passes validation."""

    def __init__(self, violations) -> None:
        lines = "; ".join(f"{v.entity_id}: {v.rule}" for v in violations[:5])
        more = "" if len(violations) <= 5 else f" (+{len(violations) - 5} more)"
        super().__init__(f"project fails validation: {lines}{more}")
        self.violations = list(violations)

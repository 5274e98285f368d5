"""caseforge: requirements to user stories to structured test-case scenarios.

The package is a library first: `model` holds the domain types, `prompting`
builds LLM message sequences, `client` talks to (or replays) the backend,
`extraction` recovers structured records from raw responses, `pipeline` ties
those into generation sessions, and `analysis`/`export` turn the resulting
aggregates into reports and interchange files. `cli` and `service` are thin
drivers over the same functions.
"""

from caseforge.errors import (
    BackendNotConfiguredError,
    CaseforgeError,
    CorruptFileError,
    ExportError,
    InvalidProjectError,
    LockError,
    MissingFixtureError,
    NotFoundError,
    PipelineError,
    StoreError,
    StoryImportError,
    TemplateError,
)
from caseforge.model import (
    Epic,
    GenerationSession,
    Priority,
    Project,
    Requirement,
    SessionKind,
    SessionOutcome,
    TestCase,
    UserStory,
    Violation,
    new_id,
    validate_project,
)

__version__ = "0.1.0"

__all__ = [
    "BackendNotConfiguredError",
    "CaseforgeError",
    "CorruptFileError",
    "Epic",
    "ExportError",
    "GenerationSession",
    "InvalidProjectError",
    "LockError",
    "MissingFixtureError",
    "NotFoundError",
    "PipelineError",
    "Priority",
    "Project",
    "Requirement",
    "SessionKind",
    "SessionOutcome",
    "StoreError",
    "StoryImportError",
    "TemplateError",
    "TestCase",
    "UserStory",
    "Violation",
    "__version__",
    "new_id",
    "validate_project",
]

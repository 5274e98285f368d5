"""Domain vocabulary: requirements, epics, stories, test cases, projects, sessions.

Types are immutable values. Constructors are permissive on content so that
invalid aggregates can be represented; `validate_project` reports every breach
instead of raising.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Any, Iterable, Mapping

ID_PREFIXES = {
    "requirement": "RQ",
    "story": "US",
    "test_case": "TC",
    "epic": "EP",
    "session": "GS",
    "project": "PJ",
}

_ID_WIDTH = 4


class Priority(str, Enum):
    HIGH = "high"
    MEDIUM = "medium"
    LOW = "low"

    @classmethod
    def parse(cls, text: str) -> "Priority":
        """Case-folded parse of the three canonical levels."""
        folded = text.strip().casefold()
        for member in cls:
            if member.value == folded:
                return member
        raise ValueError(f"unknown priority {text!r}")


class SessionKind(str, Enum):
    STORIES = "stories"
    TEST_CASES = "test_cases"


class SessionOutcome(str, Enum):
    SUCCESS = "success"
    PARSE_FAILED = "parse_failed"
    BACKEND_ERROR = "backend_error"


@dataclass(frozen=True)
class Violation:
    entity_id: str
    rule: str
    message: str


@dataclass(frozen=True)
class Requirement:
    id: str
    text: str
    created_at: datetime
    extra: Mapping[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "id": self.id,
            "text": self.text,
            "created_at": self.created_at.isoformat(),
        }
        _merge_extra(out, self.extra)
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Requirement":
        return cls(
            id=data["id"],
            text=data["text"],
            created_at=datetime.fromisoformat(data["created_at"]),
            extra=_collect_extra(data, ("id", "text", "created_at")),
        )


@dataclass(frozen=True)
class Epic:
    id: str
    title: str
    story_ids: tuple[str, ...] = ()
    extra: Mapping[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "id": self.id,
            "title": self.title,
            "story_ids": list(self.story_ids),
        }
        _merge_extra(out, self.extra)
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Epic":
        return cls(
            id=data["id"],
            title=data["title"],
            story_ids=tuple(data.get("story_ids", ())),
            extra=_collect_extra(data, ("id", "title", "story_ids")),
        )


@dataclass(frozen=True)
class UserStory:
    id: str
    as_a: str
    i_want: str
    so_that: str = ""
    acceptance_criteria: tuple[str, ...] = ()
    priority: Priority = Priority.MEDIUM
    extra: Mapping[str, Any] = field(default_factory=dict)

    def narrative(self) -> str:
        goal = self.i_want.strip()
        if goal.casefold().startswith(("i want", "i aim", "i need", "i would")):
            head = f"As a {self.as_a}, {goal}"
        else:
            head = f"As a {self.as_a}, I want {goal}"
        reason = self.so_that.strip()
        if not reason:
            return head + "."
        if reason.casefold().startswith(("so that", "in order to")):
            return f"{head}, {reason}."
        return f"{head}, so that {reason}."

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "id": self.id,
            "as_a": self.as_a,
            "i_want": self.i_want,
            "so_that": self.so_that,
            "acceptance_criteria": list(self.acceptance_criteria),
            "priority": self.priority.value,
        }
        _merge_extra(out, self.extra)
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "UserStory":
        return cls(
            id=data["id"],
            as_a=data["as_a"],
            i_want=data["i_want"],
            so_that=data.get("so_that", ""),
            acceptance_criteria=tuple(data.get("acceptance_criteria", ())),
            priority=Priority.parse(data.get("priority", "medium")),
            extra=_collect_extra(
                data,
                ("id", "as_a", "i_want", "so_that", "acceptance_criteria", "priority"),
            ),
        )


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # domain type, not a pytest class

    id: str
    story_id: str
    title: str
    preconditions: tuple[str, ...] = ()
    steps: tuple[str, ...] = ()
    expected_result: str = ""
    priority: Priority = Priority.MEDIUM
    tags: tuple[str, ...] = ()
    extra: Mapping[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "id": self.id,
            "story_id": self.story_id,
            "title": self.title,
            "preconditions": list(self.preconditions),
            "steps": list(self.steps),
            "expected_result": self.expected_result,
            "priority": self.priority.value,
            "tags": list(self.tags),
        }
        _merge_extra(out, self.extra)
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TestCase":
        return cls(
            id=data["id"],
            story_id=data["story_id"],
            title=data["title"],
            preconditions=tuple(data.get("preconditions", ())),
            steps=tuple(data.get("steps", ())),
            expected_result=data.get("expected_result", ""),
            priority=Priority.parse(data.get("priority", "medium")),
            tags=tuple(data.get("tags", ())),
            extra=_collect_extra(
                data,
                (
                    "id",
                    "story_id",
                    "title",
                    "preconditions",
                    "steps",
                    "expected_result",
                    "priority",
                    "tags",
                ),
            ),
        )


@dataclass(frozen=True)
class Project:
    id: str
    name: str
    requirements: tuple[Requirement, ...] = ()
    epics: tuple[Epic, ...] = ()
    stories: tuple[UserStory, ...] = ()
    test_cases: tuple[TestCase, ...] = ()
    sessions: tuple[str, ...] = ()
    extra: Mapping[str, Any] = field(default_factory=dict)

    def story_by_id(self, story_id: str) -> UserStory | None:
        for story in self.stories:
            if story.id == story_id:
                return story
        return None

    def existing_ids(self) -> set[str]:
        ids: set[str] = {self.id}
        for coll in (self.requirements, self.epics, self.stories, self.test_cases):
            ids.update(item.id for item in coll)
        ids.update(self.sessions)
        return ids

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "id": self.id,
            "name": self.name,
            "requirements": [r.to_dict() for r in self.requirements],
            "epics": [e.to_dict() for e in self.epics],
            "stories": [s.to_dict() for s in self.stories],
            "test_cases": [t.to_dict() for t in self.test_cases],
            "sessions": list(self.sessions),
        }
        _merge_extra(out, self.extra)
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Project":
        return cls(
            id=data["id"],
            name=data.get("name", ""),
            requirements=tuple(Requirement.from_dict(d) for d in data.get("requirements", ())),
            epics=tuple(Epic.from_dict(d) for d in data.get("epics", ())),
            stories=tuple(UserStory.from_dict(d) for d in data.get("stories", ())),
            test_cases=tuple(TestCase.from_dict(d) for d in data.get("test_cases", ())),
            sessions=tuple(data.get("sessions", ())),
            extra=_collect_extra(
                data,
                ("id", "name", "requirements", "epics", "stories", "test_cases", "sessions"),
            ),
        )


@dataclass(frozen=True)
class GenerationSession:
    """One generation attempt: the analysis unit for conformance reporting.

    `exchanges` holds ChatExchange ids; the exchange records themselves are
    persisted next to the session by the store.
    """

    id: str
    kind: SessionKind
    params: Mapping[str, Any]
    exchanges: tuple[str, ...] = ()
    outcome: SessionOutcome = SessionOutcome.SUCCESS
    method: str | None = None
    retries: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "params": dict(self.params),
            "exchanges": list(self.exchanges),
            "outcome": self.outcome.value,
            "method": self.method,
            "retries": self.retries,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "GenerationSession":
        return cls(
            id=data["id"],
            kind=SessionKind(data["kind"]),
            params=dict(data.get("params", {})),
            exchanges=tuple(data.get("exchanges", ())),
            outcome=SessionOutcome(data.get("outcome", "success")),
            method=data.get("method"),
            retries=int(data.get("retries", 0)),
        )


def _merge_extra(out: dict[str, Any], extra: Mapping[str, Any]) -> None:
    for key in sorted(extra):
        if key not in out:
            out[key] = extra[key]


def _collect_extra(data: Mapping[str, Any], known: tuple[str, ...]) -> dict[str, Any]:
    return {k: v for k, v in data.items() if k not in known}


def new_id(kind: str, existing: Iterable[str]) -> str:
    """Next free human-readable id, e.g. ("test_case", {"TC-0001"}) -> "TC-0002".

    Counters continue from the highest numeric suffix already present, so
    deleting an entity never recycles its id.
    """
    try:
        prefix = ID_PREFIXES[kind]
    except KeyError:
        raise ValueError(f"unknown entity kind {kind!r}") from None
    taken = set(existing)
    pattern = re.compile(rf"^{prefix}-(\d+)$")
    highest = 0
    for eid in taken:
        m = pattern.match(eid)
        if m:
            highest = max(highest, int(m.group(1)))
    n = highest + 1
    while f"{prefix}-{n:0{_ID_WIDTH}d}" in taken:
        n += 1
    return f"{prefix}-{n:0{_ID_WIDTH}d}"


def _blank(text: str) -> bool:
    return not text.strip()


def validate_project(project: Project) -> list[Violation]:
    """Every referential-integrity and field-invariant breach in the project.

    Never raises; an empty list means the project is valid. Output is sorted
    so collection order cannot influence the result.
    """
    violations: list[Violation] = []
    story_ids = {s.id for s in project.stories}

    for coll_name, coll in (
        ("requirement", project.requirements),
        ("epic", project.epics),
        ("story", project.stories),
        ("test_case", project.test_cases),
    ):
        seen: set[str] = set()
        for item in coll:
            if item.id in seen:
                violations.append(
                    Violation(item.id, "duplicate-id", f"{coll_name} id {item.id!r} appears more than once")
                )
            seen.add(item.id)

    for req in project.requirements:
        if _blank(req.text):
            violations.append(Violation(req.id, "blank-text", "requirement text is blank"))

    for epic in project.epics:
        if _blank(epic.title):
            violations.append(Violation(epic.id, "blank-title", "epic title is blank"))
        for sid in epic.story_ids:
            if sid not in story_ids:
                violations.append(
                    Violation(epic.id, "dangling-story", f"epic references missing story {sid!r}")
                )

    for story in project.stories:
        if _blank(story.as_a):
            violations.append(Violation(story.id, "blank-as-a", "story actor is blank"))
        if _blank(story.i_want):
            violations.append(Violation(story.id, "blank-i-want", "story goal is blank"))
        for i, criterion in enumerate(story.acceptance_criteria):
            if _blank(criterion):
                violations.append(
                    Violation(story.id, "blank-criterion", f"acceptance criterion {i + 1} is blank")
                )

    for case in project.test_cases:
        if case.story_id not in story_ids:
            violations.append(
                Violation(case.id, "dangling-story", f"test case references missing story {case.story_id!r}")
            )
        if _blank(case.title):
            violations.append(Violation(case.id, "blank-title", "test case title is blank"))
        if len(case.steps) < 1:
            violations.append(Violation(case.id, "empty-steps", "test case has no steps"))
        else:
            for i, step in enumerate(case.steps):
                if _blank(step):
                    violations.append(Violation(case.id, "blank-step", f"step {i + 1} is blank"))
        if _blank(case.expected_result):
            violations.append(
                Violation(case.id, "blank-expected-result", "test case has no expected result")
            )

    violations.sort(key=lambda v: (v.entity_id, v.rule, v.message))
    return violations

"""Workspace persistence: projects, sessions, and story imports.

Layout under the workspace root:

    workspace.json                      marker written by init
    projects/<id>/project.json          one aggregate per project
    projects/<id>/sessions/<sid>.json   session + its exchange records
    fixtures/                           replay fixtures for --mock runs
    reports/<id>/                       analysis output

Writes are atomic (temp file + rename) and serialized per project by an
advisory lock file, so a reader never sees a torn document.
"""

from __future__ import annotations

import contextlib
import csv
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Iterator, Sequence

from caseforge.client import ChatExchange
from caseforge.clock import Clock, SystemClock
from caseforge.errors import (
    CorruptFileError,
    LockError,
    NotFoundError,
    StoreError,
    StoryImportError,
)
from caseforge.extraction import StoryDraft, TestCaseDraft, group_story_drafts, normalize_priority
from caseforge.model import (
    Epic,
    GenerationSession,
    Priority,
    Project,
    Requirement,
    TestCase,
    UserStory,
    new_id,
)

_MARKER = "workspace.json"
_LOCK_TIMEOUT_S = 5.0
_LOCK_POLL_S = 0.02

CSV_IMPORT_COLUMNS = ("id", "as_a", "i_want", "so_that", "acceptance_criteria", "priority")


@dataclass
class ImportResult:
    stories: list[UserStory]
    diagnostics: list[str]


class Workspace:
    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)

    # -- layout ------------------------------------------------------------

    @property
    def projects_dir(self) -> Path:
        return self.root / "projects"

    @property
    def fixtures_dir(self) -> Path:
        return self.root / "fixtures"

    @property
    def reports_dir(self) -> Path:
        return self.root / "reports"

    def project_dir(self, project_id: str) -> Path:
        return self.projects_dir / project_id

    def project_path(self, project_id: str) -> Path:
        return self.project_dir(project_id) / "project.json"

    def sessions_dir(self, project_id: str) -> Path:
        return self.project_dir(project_id) / "sessions"

    # -- lifecycle ----------------------------------------------------------

    def init(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        self.projects_dir.mkdir(exist_ok=True)
        self.fixtures_dir.mkdir(exist_ok=True)
        self.reports_dir.mkdir(exist_ok=True)
        marker = self.root / _MARKER
        if not marker.exists():
            _write_json_atomic(marker, {"schema": "caseforge-workspace", "version": 1})

    def is_initialized(self) -> bool:
        return (self.root / _MARKER).exists()

    def require_initialized(self) -> None:
        if not self.is_initialized():
            raise StoreError(f"{self.root} is not an initialized workspace (run init first)")

    # -- locking ------------------------------------------------------------

    @contextlib.contextmanager
    def lock(self, name: str, timeout_s: float = _LOCK_TIMEOUT_S) -> Iterator[None]:
        """Advisory single-writer lock; concurrent readers need no lock."""
        import time

        lock_path = self.root / f".{name}.lock"
        deadline = time.monotonic() + timeout_s
        while True:
            try:
                fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
                break
            except FileExistsError:
                if time.monotonic() >= deadline:
                    raise LockError(f"lock {lock_path} held by another writer") from None
                time.sleep(_LOCK_POLL_S)
        try:
            os.write(fd, str(os.getpid()).encode("ascii"))
            os.close(fd)
            yield
        finally:
            with contextlib.suppress(FileNotFoundError):
                os.unlink(lock_path)

    def project_lock(self, project_id: str, timeout_s: float = _LOCK_TIMEOUT_S):
        return self.lock(f"project-{project_id}", timeout_s)

    # -- projects -----------------------------------------------------------

    def list_project_ids(self) -> list[str]:
        if not self.projects_dir.exists():
            return []
        return sorted(
            p.name for p in self.projects_dir.iterdir() if (p / "project.json").exists()
        )

    def create_project(self, name: str) -> Project:
        self.require_initialized()
        with self.lock("projects"):
            project_id = new_id("project", self.list_project_ids())
            project = Project(id=project_id, name=name)
            self.save_project_unlocked(project)
        return project

    def save_project(self, project: Project) -> None:
        self.require_initialized()
        with self.project_lock(project.id):
            self.save_project_unlocked(project)

    def save_project_unlocked(self, project: Project) -> None:
        """For callers already holding the project lock around a larger unit."""
        self.project_dir(project.id).mkdir(parents=True, exist_ok=True)
        _write_json_atomic(self.project_path(project.id), project.to_dict())

    def load_project(self, project_id: str) -> Project:
        path = self.project_path(project_id)
        if not path.exists():
            raise NotFoundError("project", project_id)
        return Project.from_dict(_read_json(path))

    def find_project(self, ref: str) -> Project:
        """Resolve a project by id, falling back to name lookup."""
        path = self.project_path(ref)
        if path.exists():
            return self.load_project(ref)
        for project_id in self.list_project_ids():
            project = self.load_project(project_id)
            if project.name == ref:
                return project
        raise NotFoundError("project", ref)

    # -- sessions -----------------------------------------------------------

    def save_session(
        self, project_id: str, session: GenerationSession, exchanges: Sequence[ChatExchange]
    ) -> None:
        self.sessions_dir(project_id).mkdir(parents=True, exist_ok=True)
        payload = {
            "session": session.to_dict(),
            "exchange_records": [e.to_dict() for e in exchanges],
        }
        _write_json_atomic(self.sessions_dir(project_id) / f"{session.id}.json", payload)

    def load_sessions(
        self, project_id: str
    ) -> list[tuple[GenerationSession, list[ChatExchange]]]:
        directory = self.sessions_dir(project_id)
        if not directory.exists():
            return []
        out = []
        for path in sorted(directory.glob("*.json")):
            data = _read_json(path)
            session = GenerationSession.from_dict(data["session"])
            exchanges = [ChatExchange.from_dict(e) for e in data.get("exchange_records", ())]
            out.append((session, exchanges))
        return out

    def session_ids(self, project_id: str) -> set[str]:
        directory = self.sessions_dir(project_id)
        if not directory.exists():
            return set()
        return {p.stem for p in directory.glob("*.json")}


def _write_json_atomic(path: Path, payload: Any) -> None:
    """Write JSON so a crash leaves either the old file or the new, never a hybrid."""
    text = json.dumps(payload, ensure_ascii=False, indent=2) + "\n"
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp_name)
        raise


def _read_json(path: Path) -> Any:
    text = path.read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        byte_offset = len(text[: exc.pos].encode("utf-8"))
        raise CorruptFileError(str(path), byte_offset, exc.msg) from exc


# ---------------------------------------------------------------------------
# Aggregate construction: new project versions from immutable pieces.


def with_requirement(
    project: Project, text: str, clock: Clock | None = None
) -> tuple[Project, Requirement]:
    if not text.strip():
        raise StoreError("requirement text is blank")
    clock = clock or SystemClock()
    req = Requirement(
        id=new_id("requirement", project.existing_ids()),
        text=text.strip(),
        created_at=clock.now(),
    )
    return (
        _replace(project, requirements=project.requirements + (req,)),
        req,
    )


def with_story_drafts(
    project: Project, drafts: Sequence[StoryDraft]
) -> tuple[Project, list[UserStory]]:
    """Materialize story drafts with fresh ids, creating or extending epics."""
    existing = project.existing_ids()
    stories = list(project.stories)
    epics = list(project.epics)
    epics_by_title = {epic.title: i for i, epic in enumerate(epics)}
    created: list[UserStory] = []

    for epic_title, epic_drafts in group_story_drafts(drafts):
        new_ids: list[str] = []
        for draft in epic_drafts:
            story_id = new_id("story", existing)
            existing.add(story_id)
            story = UserStory(
                id=story_id,
                as_a=draft.as_a,
                i_want=draft.i_want,
                so_that=draft.so_that,
                acceptance_criteria=draft.acceptance_criteria,
                priority=draft.priority,
            )
            stories.append(story)
            created.append(story)
            new_ids.append(story_id)
        if epic_title in epics_by_title:
            index = epics_by_title[epic_title]
            epic = epics[index]
            epics[index] = Epic(
                id=epic.id,
                title=epic.title,
                story_ids=epic.story_ids + tuple(new_ids),
                extra=epic.extra,
            )
        else:
            epic_id = new_id("epic", existing)
            existing.add(epic_id)
            epics_by_title[epic_title] = len(epics)
            epics.append(Epic(id=epic_id, title=epic_title, story_ids=tuple(new_ids)))

    return (
        _replace(project, stories=tuple(stories), epics=tuple(epics)),
        created,
    )


def with_testcase_drafts(
    project: Project, story_id: str, drafts: Sequence[TestCaseDraft]
) -> tuple[Project, list[TestCase]]:
    if project.story_by_id(story_id) is None:
        raise NotFoundError("story", story_id)
    existing = project.existing_ids()
    cases = list(project.test_cases)
    created: list[TestCase] = []
    for draft in drafts:
        case_id = new_id("test_case", existing)
        existing.add(case_id)
        case = TestCase(
            id=case_id,
            story_id=story_id,
            title=draft.title,
            preconditions=draft.preconditions,
            steps=draft.steps,
            expected_result=draft.expected_result,
            priority=draft.priority,
            tags=draft.tags,
        )
        cases.append(case)
        created.append(case)
    return _replace(project, test_cases=tuple(cases)), created


def with_imported_stories(project: Project, stories: Sequence[UserStory]) -> Project:
    return _replace(project, stories=project.stories + tuple(stories))


def with_session_ref(project: Project, session_id: str) -> Project:
    return _replace(project, sessions=project.sessions + (session_id,))


def with_case_priority(project: Project, case_id: str, priority: Priority) -> Project:
    cases = []
    found = False
    for case in project.test_cases:
        if case.id == case_id:
            found = True
            case = TestCase(
                id=case.id,
                story_id=case.story_id,
                title=case.title,
                preconditions=case.preconditions,
                steps=case.steps,
                expected_result=case.expected_result,
                priority=priority,
                tags=case.tags,
                extra=case.extra,
            )
        cases.append(case)
    if not found:
        raise NotFoundError("test_case", case_id)
    return _replace(project, test_cases=tuple(cases))


def _replace(project: Project, **changes: Any) -> Project:
    import dataclasses

    return dataclasses.replace(project, **changes)


# ---------------------------------------------------------------------------
# Story import


def import_stories(
    path: str | Path,
    fmt: str,
    existing_ids: Iterable[str] = (),
) -> ImportResult:
    """Read upstream user stories from a JSON or CSV file.

    Lenient by design: rows that fail validation are skipped with a per-row
    diagnostic instead of aborting the batch.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise StoryImportError(f"cannot read {path}: {exc}") from exc
    return import_stories_text(text, fmt, existing_ids)


def import_stories_text(
    text: str,
    fmt: str,
    existing_ids: Iterable[str] = (),
) -> ImportResult:
    """import_stories for documents already in memory (file uploads)."""
    if fmt == "json":
        return _import_json(text, set(existing_ids))
    if fmt == "csv":
        return _import_csv(text, set(existing_ids))
    raise StoryImportError(f"unknown import format {fmt!r} (expected json or csv)")


def _import_json(text: str, taken: set[str]) -> ImportResult:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StoryImportError(f"not valid JSON: {exc.msg} at position {exc.pos}") from exc
    if not isinstance(payload, list):
        raise StoryImportError("JSON import expects a top-level array of story objects")
    result = ImportResult(stories=[], diagnostics=[])
    for index, record in enumerate(payload, start=1):
        if not isinstance(record, dict):
            result.diagnostics.append(f"entry {index}: not an object, skipped")
            continue
        _build_story(
            where=f"entry {index}",
            raw_id=str(record.get("id", "") or ""),
            as_a=record.get("as_a"),
            i_want=record.get("i_want"),
            so_that=record.get("so_that") or "",
            criteria=[c for c in record.get("acceptance_criteria", ()) if isinstance(c, str)],
            priority_text=record.get("priority"),
            taken=taken,
            result=result,
        )
    return result


def _import_csv(text: str, taken: set[str]) -> ImportResult:
    reader = csv.DictReader(text.splitlines())
    fieldnames = reader.fieldnames or []
    for required in ("as_a", "i_want"):
        if required not in fieldnames:
            raise StoryImportError(f"CSV import is missing required column {required!r}")
    result = ImportResult(stories=[], diagnostics=[])
    for index, row in enumerate(reader, start=1):
        criteria_text = (row.get("acceptance_criteria") or "").strip()
        criteria = [part.strip() for part in criteria_text.split(";") if part.strip()]
        _build_story(
            where=f"row {index}",
            raw_id=(row.get("id") or "").strip(),
            as_a=row.get("as_a"),
            i_want=row.get("i_want"),
            so_that=(row.get("so_that") or "").strip(),
            criteria=criteria,
            priority_text=row.get("priority") if "priority" in fieldnames else None,
            taken=taken,
            result=result,
        )
    return result


def _build_story(
    where: str,
    raw_id: str,
    as_a: Any,
    i_want: Any,
    so_that: str,
    criteria: list[str],
    priority_text: Any,
    taken: set[str],
    result: ImportResult,
) -> None:
    if not isinstance(as_a, str) or not as_a.strip():
        result.diagnostics.append(f"{where}: blank as_a, skipped")
        return
    if not isinstance(i_want, str) or not i_want.strip():
        result.diagnostics.append(f"{where}: blank i_want, skipped")
        return

    if priority_text is None or (isinstance(priority_text, str) and not priority_text.strip()):
        priority = Priority.MEDIUM
    else:
        normalized = normalize_priority(priority_text)
        if normalized == "reject" or normalized is None:
            result.diagnostics.append(f"{where}: unknown priority {priority_text!r}, skipped")
            return
        priority = normalized

    if raw_id:
        if raw_id in taken:
            result.diagnostics.append(f"{where}: duplicate id {raw_id!r}, skipped")
            return
        story_id = raw_id
    else:
        story_id = new_id("story", taken)
    taken.add(story_id)

    result.stories.append(
        UserStory(
            id=story_id,
            as_a=as_a.strip(),
            i_want=i_want.strip(),
            so_that=so_that.strip(),
            acceptance_criteria=tuple(c.strip() for c in criteria if c.strip()),
            priority=priority,
        )
    )

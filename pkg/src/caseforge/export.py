"""Delimited and JSON export of test cases.

The CSV shape is the stable interchange contract: RFC 4180 quoting, CRLF
record separators, LF-only newlines inside quoted cells, so the file loads
cleanly into issue trackers and requirements tools.
"""

from __future__ import annotations

import csv
import io
import json
import re
from typing import Mapping, Sequence

from caseforge.errors import ExportError
from caseforge.model import Priority, Project, TestCase

CSV_COLUMNS = (
    "test_case_id",
    "story_id",
    "title",
    "preconditions",
    "steps",
    "expected_result",
    "priority",
    "tags",
)

_STEP_RE = re.compile(r"^\s*\d+\.\s*(.*)$")
_PRECONDITION_RE = re.compile(r"^\s*-\s*(.*)$")


def serialize_steps(steps: Sequence[str]) -> str:
    return "\n".join(f"{i}. {step}" for i, step in enumerate(steps, start=1))


def parse_steps(cell: str) -> tuple[str, ...]:
    out = []
    for line in cell.split("\n"):
        if not line.strip():
            continue
        match = _STEP_RE.match(line)
        out.append(match.group(1) if match else line.strip())
    return tuple(out)


def serialize_preconditions(preconditions: Sequence[str]) -> str:
    return "\n".join(f"- {item}" for item in preconditions)


def parse_preconditions(cell: str) -> tuple[str, ...]:
    out = []
    for line in cell.split("\n"):
        if not line.strip():
            continue
        match = _PRECONDITION_RE.match(line)
        out.append(match.group(1) if match else line.strip())
    return tuple(out)


def serialize_tags(tags: Sequence[str]) -> str:
    return ";".join(tags)


def parse_tags(cell: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in cell.split(";") if part.strip())


def _case_row(case: TestCase) -> list[str]:
    return [
        case.id,
        case.story_id,
        case.title,
        serialize_preconditions(case.preconditions),
        serialize_steps(case.steps),
        case.expected_result,
        case.priority.value,
        serialize_tags(case.tags),
    ]


def export_csv(
    project: Project, columns: Mapping[str, str] | None = None
) -> str:
    """Render the project's test cases as CSV text.

    `columns` optionally renames headers (e.g. {"test_case_id": "Issue Key"})
    without changing order or cell content, for tools with fixed import
    templates.
    """
    story_ids = {story.id for story in project.stories}
    dangling = sorted(
        {case.story_id for case in project.test_cases if case.story_id not in story_ids}
    )
    if dangling:
        raise ExportError(f"test cases reference unknown stories: {', '.join(dangling)}")
    if columns:
        unknown = sorted(set(columns) - set(CSV_COLUMNS))
        if unknown:
            raise ExportError(f"unknown export columns: {', '.join(unknown)}")

    header = [columns.get(name, name) if columns else name for name in CSV_COLUMNS]
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    writer.writerow(header)
    ordered = sorted(project.test_cases, key=lambda c: (c.story_id, c.id))
    for case in ordered:
        writer.writerow(_case_row(case))
    return buffer.getvalue()


def write_csv(project: Project, path, columns: Mapping[str, str] | None = None) -> None:
    """Write CSV bytes without newline translation so CRLF survives on any OS."""
    text = export_csv(project, columns=columns)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)


def import_cases_csv(text: str) -> tuple[TestCase, ...]:
    """Inverse of export_csv for the default column set."""
    reader = csv.reader(io.StringIO(text, newline=""))
    rows = list(reader)
    if not rows:
        raise ExportError("empty CSV document")
    header = rows[0]
    if tuple(header) != CSV_COLUMNS:
        raise ExportError(f"unexpected CSV header: {header!r}")
    cases = []
    for row in rows[1:]:
        if not row:
            continue
        if len(row) != len(CSV_COLUMNS):
            raise ExportError(f"row has {len(row)} cells, expected {len(CSV_COLUMNS)}")
        record = dict(zip(CSV_COLUMNS, row))
        try:
            priority = Priority.parse(record["priority"])
        except ValueError as exc:
            raise ExportError(str(exc)) from None
        cases.append(
            TestCase(
                id=record["test_case_id"],
                story_id=record["story_id"],
                title=record["title"],
                preconditions=parse_preconditions(record["preconditions"]),
                steps=parse_steps(record["steps"]),
                expected_result=record["expected_result"],
                priority=priority,
                tags=parse_tags(record["tags"]),
            )
        )
    return tuple(cases)


def export_json(project: Project, indent: int = 2) -> str:
    """Canonical JSON document for the whole project aggregate."""
    return json.dumps(project.to_dict(), ensure_ascii=False, indent=indent) + "\n"

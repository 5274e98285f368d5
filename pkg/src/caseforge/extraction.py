"""Recovery of structured stories and test cases from raw LLM response text.

A response is pushed through five stages, cheapest first:

  strict       whole text is the JSON document
  fenced       any ``` / ```json block is the document
  balanced     largest balanced {...} substring is the document
  repaired     the balanced candidate after mechanical JSON repair
  line_grammar heading-based parse of plain prose

The first stage that yields at least one schema-valid record wins. Every
stage failure and every rejected record is kept as a diagnostic so callers
can show the user exactly why a response was unusable.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable

from caseforge.model import Priority

# The JSON contracts requested from the model. Prompt templates interpolate
# these, and schema validation below enforces them, so prompt and parser can
# never drift apart.
STORY_SCHEMA = (
    '{"epics": [{"title": "...", "stories": [{"as_a": "...", "i_want": "...", '
    '"so_that": "...", "acceptance_criteria": ["..."], '
    '"priority": "high|medium|low"}]}]}'
)
TESTCASE_SCHEMA = (
    '{"test_cases": [{"title": "...", "preconditions": ["..."], "steps": ["..."], '
    '"expected_result": "...", "priority": "high|medium|low", "tags": ["..."]}]}'
)

SYNTHETIC_STEP = "Execute the scenario as titled"

# MoSCoW-style vocabulary the model may use instead of the canonical levels.
_PRIORITY_SYNONYMS = {
    "high": Priority.HIGH,
    "medium": Priority.MEDIUM,
    "low": Priority.LOW,
    "critical": Priority.HIGH,
    "must": Priority.HIGH,
    "should": Priority.MEDIUM,
    "could": Priority.LOW,
}
_PRIORITY_REJECT = {"won't", "wont"}

_TESTCASE_KEYS = ("title", "preconditions", "steps", "expected_result", "priority", "tags")
_STORY_KEYS = ("as_a", "i_want", "so_that", "acceptance_criteria", "priority")


class ExtractionMethod(str, Enum):
    STRICT = "strict"
    FENCED = "fenced"
    BALANCED = "balanced"
    REPAIRED = "repaired"
    LINE_GRAMMAR = "line_grammar"


@dataclass(frozen=True)
class Diagnostic:
    stage: str
    message: str

    def to_dict(self) -> dict[str, str]:
        return {"stage": self.stage, "message": self.message}


@dataclass(frozen=True)
class TestCaseDraft:
    """Test case record before id assignment."""

    __test__ = False  # domain type, not a pytest class

    title: str
    preconditions: tuple[str, ...] = ()
    steps: tuple[str, ...] = ()
    expected_result: str = ""
    priority: Priority = Priority.MEDIUM
    tags: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "title": self.title,
            "preconditions": list(self.preconditions),
            "steps": list(self.steps),
            "expected_result": self.expected_result,
            "priority": self.priority.value,
            "tags": list(self.tags),
        }


@dataclass(frozen=True)
class StoryDraft:
    """User story record before id assignment; carries its epic's title."""

    as_a: str
    i_want: str
    so_that: str = ""
    acceptance_criteria: tuple[str, ...] = ()
    priority: Priority = Priority.MEDIUM
    epic_title: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "epic_title": self.epic_title,
            "as_a": self.as_a,
            "i_want": self.i_want,
            "so_that": self.so_that,
            "acceptance_criteria": list(self.acceptance_criteria),
            "priority": self.priority.value,
        }


@dataclass(frozen=True)
class ExtractionResult:
    items: tuple[Any, ...]
    method: ExtractionMethod | None
    diagnostics: tuple[Diagnostic, ...]
    ok: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "ok": self.ok,
            "method": self.method.value if self.method else None,
            "items": [item.to_dict() for item in self.items],
            "diagnostics": [d.to_dict() for d in self.diagnostics],
        }


def normalize_priority(value: Any) -> Priority | None | str:
    """Map model priority vocabulary onto the three levels.

    Returns a Priority, the string "reject" for won't-style values, or None
    when the value is unrecognized (caller defaults it).
    """
    if not isinstance(value, str):
        return None
    folded = value.strip().replace("’", "'").casefold()
    if folded in _PRIORITY_REJECT:
        return "reject"
    return _PRIORITY_SYNONYMS.get(folded)


def extract(text: str, kind: str) -> ExtractionResult:
    """Run the five-stage fallback parse over raw response text.

    Pure function: equal inputs give equal results. Never raises; when all
    stages fail the result has ok=False and the accumulated diagnostics.
    """
    if kind not in ("stories", "test_cases"):
        raise ValueError(f"unknown extraction kind {kind!r}")
    diagnostics: list[Diagnostic] = []

    # Stage 1: the whole text is the document.
    payload = _try_parse(text, "strict", diagnostics)
    if payload is not None:
        items = _validate_payload(payload, kind, "strict", diagnostics)
        if items:
            return _success(items, ExtractionMethod.STRICT, diagnostics)

    # Stage 2: fenced code blocks, in order of appearance.
    blocks = _fenced_blocks(text)
    if not blocks:
        diagnostics.append(Diagnostic("fenced", "no fenced code blocks found"))
    for index, block in enumerate(blocks, start=1):
        payload = _try_parse(block, "fenced", diagnostics, label=f"block {index}")
        if payload is None:
            continue
        items = _validate_payload(payload, kind, "fenced", diagnostics, label=f"block {index}")
        if items:
            return _success(items, ExtractionMethod.FENCED, diagnostics)

    # Stage 3: largest balanced {...} substring.
    candidate = _largest_balanced_object(text)
    if candidate is None:
        diagnostics.append(Diagnostic("balanced", "no balanced {...} substring found"))
    else:
        payload = _try_parse(candidate, "balanced", diagnostics)
        if payload is not None:
            items = _validate_payload(payload, kind, "balanced", diagnostics)
            if items:
                return _success(items, ExtractionMethod.BALANCED, diagnostics)

    # Stage 4: repair the balanced candidate, then parse.
    if candidate is None:
        diagnostics.append(Diagnostic("repaired", "no candidate to repair"))
    else:
        repaired = repair_json(candidate)
        payload = _try_parse(repaired, "repaired", diagnostics)
        if payload is not None:
            items = _validate_payload(payload, kind, "repaired", diagnostics)
            if items:
                return _success(items, ExtractionMethod.REPAIRED, diagnostics)

    # Stage 5: heading-based prose parse.
    records, grammar_diags = _line_grammar(text, kind)
    diagnostics.extend(grammar_diags)
    if records:
        return _success(records, ExtractionMethod.LINE_GRAMMAR, diagnostics)
    if not grammar_diags:
        diagnostics.append(Diagnostic("line_grammar", "no recognizable headings or records"))

    return ExtractionResult(items=(), method=None, diagnostics=tuple(diagnostics), ok=False)


def _success(items: list[Any], method: ExtractionMethod, diagnostics: list[Diagnostic]) -> ExtractionResult:
    return ExtractionResult(
        items=tuple(items), method=method, diagnostics=tuple(diagnostics), ok=True
    )


def _try_parse(text: str, stage: str, diagnostics: list[Diagnostic], label: str = "") -> Any:
    prefix = f"{label}: " if label else ""
    stripped = text.strip()
    if not stripped:
        diagnostics.append(Diagnostic(stage, f"{prefix}empty text"))
        return None
    try:
        return json.loads(stripped)
    except json.JSONDecodeError as exc:
        diagnostics.append(Diagnostic(stage, f"{prefix}invalid JSON: {exc.msg} at position {exc.pos}"))
        return None


# ---------------------------------------------------------------------------
# Schema validation


def _validate_payload(
    payload: Any, kind: str, stage: str, diagnostics: list[Diagnostic], label: str = ""
) -> list[Any]:
    prefix = f"{label}: " if label else ""
    if not isinstance(payload, dict):
        diagnostics.append(Diagnostic(stage, f"{prefix}top level is not a JSON object"))
        return []
    if kind == "test_cases":
        return _validate_testcases(payload, stage, diagnostics, prefix)
    return _validate_stories(payload, stage, diagnostics, prefix)


def _validate_testcases(
    payload: dict[str, Any], stage: str, diagnostics: list[Diagnostic], prefix: str
) -> list[TestCaseDraft]:
    records = payload.get("test_cases")
    if not isinstance(records, list):
        diagnostics.append(Diagnostic(stage, f"{prefix}missing \"test_cases\" array"))
        return []
    for key in payload:
        if key != "test_cases":
            diagnostics.append(Diagnostic(stage, f"{prefix}unknown key {key!r} ignored"))
    drafts: list[TestCaseDraft] = []
    for index, record in enumerate(records, start=1):
        draft = _validate_testcase_record(record, index, stage, diagnostics, prefix)
        if draft is not None:
            drafts.append(draft)
    if not drafts:
        diagnostics.append(Diagnostic(stage, f"{prefix}no schema-valid test case records"))
    return drafts


def _validate_testcase_record(
    record: Any, index: int, stage: str, diagnostics: list[Diagnostic], prefix: str
) -> TestCaseDraft | None:
    where = f"{prefix}test case {index}"
    if not isinstance(record, dict):
        diagnostics.append(Diagnostic(stage, f"{where}: not an object, rejected"))
        return None
    for key in record:
        if key not in _TESTCASE_KEYS:
            diagnostics.append(Diagnostic(stage, f"{where}: unknown key {key!r} ignored"))

    title = record.get("title")
    if not isinstance(title, str) or not title.strip():
        diagnostics.append(Diagnostic(stage, f"{where}: missing title, rejected"))
        return None
    expected = record.get("expected_result")
    if not isinstance(expected, str) or not expected.strip():
        diagnostics.append(Diagnostic(stage, f"{where}: missing expected_result, rejected"))
        return None

    steps = _string_list(record.get("steps"), f"{where}: steps", stage, diagnostics)
    if not steps:
        diagnostics.append(
            Diagnostic(stage, f"{where}: no usable steps, substituted synthetic step")
        )
        steps = [SYNTHETIC_STEP]

    preconditions = _string_list(
        record.get("preconditions"), f"{where}: preconditions", stage, diagnostics
    )
    tags = _string_list(record.get("tags"), f"{where}: tags", stage, diagnostics)

    priority = _record_priority(record, where, stage, diagnostics)
    if priority is None:
        return None

    return TestCaseDraft(
        title=title.strip(),
        preconditions=tuple(preconditions),
        steps=tuple(steps),
        expected_result=expected.strip(),
        priority=priority,
        tags=tuple(tags),
    )


def _validate_stories(
    payload: dict[str, Any], stage: str, diagnostics: list[Diagnostic], prefix: str
) -> list[StoryDraft]:
    epics = payload.get("epics")
    if not isinstance(epics, list):
        diagnostics.append(Diagnostic(stage, f"{prefix}missing \"epics\" array"))
        return []
    for key in payload:
        if key != "epics":
            diagnostics.append(Diagnostic(stage, f"{prefix}unknown key {key!r} ignored"))
    drafts: list[StoryDraft] = []
    for e_index, epic in enumerate(epics, start=1):
        if not isinstance(epic, dict):
            diagnostics.append(Diagnostic(stage, f"{prefix}epic {e_index}: not an object, skipped"))
            continue
        title = epic.get("title")
        epic_title: str | None
        if isinstance(title, str) and title.strip():
            epic_title = title.strip()
        else:
            epic_title = None
            diagnostics.append(Diagnostic(stage, f"{prefix}epic {e_index}: blank title"))
        for key in epic:
            if key not in ("title", "stories"):
                diagnostics.append(
                    Diagnostic(stage, f"{prefix}epic {e_index}: unknown key {key!r} ignored")
                )
        stories = epic.get("stories")
        if not isinstance(stories, list):
            diagnostics.append(
                Diagnostic(stage, f"{prefix}epic {e_index}: missing \"stories\" array")
            )
            continue
        for s_index, record in enumerate(stories, start=1):
            where = f"{prefix}epic {e_index} story {s_index}"
            draft = _validate_story_record(record, where, epic_title, stage, diagnostics)
            if draft is not None:
                drafts.append(draft)
    if not drafts:
        diagnostics.append(Diagnostic(stage, f"{prefix}no schema-valid story records"))
    return drafts


def _validate_story_record(
    record: Any,
    where: str,
    epic_title: str | None,
    stage: str,
    diagnostics: list[Diagnostic],
) -> StoryDraft | None:
    if not isinstance(record, dict):
        diagnostics.append(Diagnostic(stage, f"{where}: not an object, rejected"))
        return None
    for key in record:
        if key not in _STORY_KEYS:
            diagnostics.append(Diagnostic(stage, f"{where}: unknown key {key!r} ignored"))
    as_a = record.get("as_a")
    i_want = record.get("i_want")
    if not isinstance(as_a, str) or not as_a.strip():
        diagnostics.append(Diagnostic(stage, f"{where}: missing as_a, rejected"))
        return None
    if not isinstance(i_want, str) or not i_want.strip():
        diagnostics.append(Diagnostic(stage, f"{where}: missing i_want, rejected"))
        return None
    so_that = record.get("so_that")
    if not isinstance(so_that, str):
        so_that = ""
    criteria = _string_list(
        record.get("acceptance_criteria"), f"{where}: acceptance_criteria", stage, diagnostics
    )
    priority = _record_priority(record, where, stage, diagnostics)
    if priority is None:
        return None
    return StoryDraft(
        as_a=as_a.strip(),
        i_want=i_want.strip(),
        so_that=so_that.strip(),
        acceptance_criteria=tuple(criteria),
        priority=priority,
        epic_title=epic_title,
    )


def _string_list(value: Any, where: str, stage: str, diagnostics: list[Diagnostic]) -> list[str]:
    if value is None:
        return []
    if not isinstance(value, list):
        diagnostics.append(Diagnostic(stage, f"{where}: not a list, ignored"))
        return []
    out: list[str] = []
    for entry in value:
        if isinstance(entry, str) and entry.strip():
            out.append(entry.strip())
        else:
            diagnostics.append(Diagnostic(stage, f"{where}: dropped blank or non-text entry"))
    return out


def _record_priority(
    record: dict[str, Any], where: str, stage: str, diagnostics: list[Diagnostic]
) -> Priority | None:
    """Priority for a record, or None when the record must be rejected."""
    if "priority" not in record:
        return Priority.MEDIUM
    normalized = normalize_priority(record["priority"])
    if normalized == "reject":
        diagnostics.append(
            Diagnostic(stage, f"{where}: priority {record['priority']!r} marks it out of scope, rejected")
        )
        return None
    if normalized is None:
        diagnostics.append(
            Diagnostic(stage, f"{where}: unknown priority {record['priority']!r}, defaulted to medium")
        )
        return Priority.MEDIUM
    return normalized


# ---------------------------------------------------------------------------
# Stage 2: fenced blocks


def _fenced_blocks(text: str) -> list[str]:
    """Bodies of every ```-fenced block, in order of appearance."""
    blocks: list[str] = []
    current: list[str] | None = None
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.startswith("```"):
            if current is None:
                current = []
            else:
                blocks.append("\n".join(current))
                current = None
            continue
        if current is not None:
            current.append(line)
    return blocks


# ---------------------------------------------------------------------------
# Stage 3: balanced-brace candidate


def _largest_balanced_object(text: str) -> str | None:
    """Largest {...} substring whose braces balance, tracking JSON strings."""
    best: tuple[int, int] | None = None
    pos = 0
    length = len(text)
    while pos < length:
        start = text.find("{", pos)
        if start == -1:
            break
        end = _matching_brace(text, start)
        if end is None:
            pos = start + 1
            continue
        if best is None or (end - start) > (best[1] - best[0]):
            best = (start, end)
        pos = end + 1
    if best is None:
        return None
    return text[best[0] : best[1] + 1]


def _matching_brace(text: str, start: int) -> int | None:
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return i
    return None


# ---------------------------------------------------------------------------
# Stage 4: mechanical JSON repair

_CURLY_DOUBLE = {"“": "open", "”": "close"}
_CURLY_SINGLE = ("‘", "’")


def repair_json(text: str) -> str:
    """Best-effort mechanical repair of almost-JSON text.

    Applies, in order: strip // and /* */ comments outside strings; remove
    trailing commas before } and ]; normalize curly quotes to straight quotes;
    quote bare identifier keys. Content inside string literals is never
    touched, so valid JSON is a fixpoint.
    """
    out = _strip_comments(text)
    out = _strip_trailing_commas(out)
    out = _normalize_curly_quotes(out)
    out = _quote_bare_keys(out)
    return out


class _StringTracker:
    """Tracks whether a scan position is inside a string literal.

    Both straight quotes and curly double quotes open a string, since repair
    input may use either; a string closes on the matching family.
    """

    def __init__(self) -> None:
        self.delimiter: str | None = None
        self.escaped = False

    @property
    def in_string(self) -> bool:
        return self.delimiter is not None

    def feed(self, ch: str) -> None:
        if self.delimiter is not None:
            if self.escaped:
                self.escaped = False
            elif ch == "\\":
                self.escaped = True
            elif ch == '"' and self.delimiter == '"':
                self.delimiter = None
            elif ch == "”" and self.delimiter == "“":
                self.delimiter = None
            return
        if ch == '"' or ch == "“":
            self.delimiter = ch


def _strip_comments(text: str) -> str:
    out: list[str] = []
    tracker = _StringTracker()
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if not tracker.in_string and ch == "/" and i + 1 < n:
            nxt = text[i + 1]
            if nxt == "/":
                end = text.find("\n", i)
                i = n if end == -1 else end
                continue
            if nxt == "*":
                end = text.find("*/", i + 2)
                i = n if end == -1 else end + 2
                continue
        tracker.feed(ch)
        out.append(ch)
        i += 1
    return "".join(out)


def _strip_trailing_commas(text: str) -> str:
    out: list[str] = []
    tracker = _StringTracker()
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if not tracker.in_string and ch == ",":
            j = i + 1
            while j < n and text[j] in " \t\r\n":
                j += 1
            if j < n and text[j] in "}]":
                i += 1
                continue
        tracker.feed(ch)
        out.append(ch)
        i += 1
    return "".join(out)


def _normalize_curly_quotes(text: str) -> str:
    out: list[str] = []
    tracker = _StringTracker()
    for ch in text:
        if ch in _CURLY_DOUBLE:
            # Content inside a straight-quoted string stays untouched.
            if tracker.in_string and tracker.delimiter == '"':
                out.append(ch)
                continue
            tracker.feed(ch)
            out.append('"')
            continue
        if ch in _CURLY_SINGLE and not tracker.in_string:
            out.append("'")
            continue
        tracker.feed(ch)
        out.append(ch)
    return "".join(out)


_IDENT_START = re.compile(r"[A-Za-z_]")
_IDENT_CHAR = re.compile(r"[A-Za-z0-9_]")


def _quote_bare_keys(text: str) -> str:
    out: list[str] = []
    tracker = _StringTracker()
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if (
            not tracker.in_string
            and _IDENT_START.match(ch)
            and (not out or not (_IDENT_CHAR.match(out[-1]) or out[-1] == '"'))
        ):
            j = i
            while j < n and _IDENT_CHAR.match(text[j]):
                j += 1
            k = j
            while k < n and text[k] in " \t\r\n":
                k += 1
            if k < n and text[k] == ":":
                out.append(f'"{text[i:j]}"')
                i = j
                continue
        tracker.feed(ch)
        out.append(ch)
        i += 1
    return "".join(out)


# ---------------------------------------------------------------------------
# Stage 5: line grammar

_TC_HEADING_RE = re.compile(r"^(?:test\s*case)\s*(\d+)?\s*[:.]?\s*(.*)$", re.IGNORECASE)
_SCENARIO_HEADING_RE = re.compile(r"^scenario\s*(\d+)?\s*[:.]?\s*(.*)$", re.IGNORECASE)
_STORY_HEADING_RE = re.compile(r"^(?:user\s+)?story\s*(\d+)?\s*[:.]?\s*(.*)$", re.IGNORECASE)

_PRECONDITIONS_LABEL_RE = re.compile(r"^pre-?conditions?\s*:\s*(.*)$", re.IGNORECASE)
_STEPS_LABEL_RE = re.compile(r"^(?:test\s+)?steps?\s*:\s*(.*)$", re.IGNORECASE)
_EXPECTED_LABEL_RE = re.compile(r"^expected\s*(?:result|output)?\s*:\s*(.*)$", re.IGNORECASE)
_PRIORITY_LABEL_RE = re.compile(r"^priority\s*:\s*(.*)$", re.IGNORECASE)
_CRITERIA_LABEL_RE = re.compile(r"^acceptance\s+criteria\s*:\s*(.*)$", re.IGNORECASE)

_LIST_ITEM_RE = re.compile(r"^\s*(?:\d+\s*[.)]\s*|[-*]\s+)(.*)$")

_NARRATIVE_RE = re.compile(
    r"^as\s+an?\s+(?P<as_a>.+?)\s*,\s*i\s+(?:want|aim|need|would\s+like)\s+"
    r"(?P<i_want>.+?)"
    r"(?:\s*,?\s*(?:so\s+that|in\s+order\s+to)\s+(?P<so_that>.+?))?\s*\.?$",
    re.IGNORECASE,
)


def line_grammar_parse(text: str, kind: str) -> list[Any]:
    """Heading-based prose parse; see `extract` for the grammar it recognizes."""
    records, _ = _line_grammar(text, kind)
    return records


def _clean_line(line: str) -> str:
    """Strip markdown decoration that models sprinkle over plain prose."""
    stripped = line.strip()
    stripped = re.sub(r"^#{1,6}\s*", "", stripped)
    if stripped.startswith("**") and stripped.count("**") >= 2:
        stripped = stripped.replace("**", "")
    return stripped.strip()


def _line_grammar(text: str, kind: str) -> tuple[list[Any], list[Diagnostic]]:
    if kind == "test_cases":
        return _line_grammar_cases(text)
    return _line_grammar_stories(text)


class _CaseAccumulator:
    def __init__(self, inline_title: str) -> None:
        self.title_parts: list[str] = [inline_title] if inline_title else []
        self.title_done = False
        self.preconditions: list[str] = []
        self.steps: list[str] = []
        self.expected_parts: list[str] = []
        self.priority_text: str | None = None
        self.section: str | None = None

    def finish(self, diagnostics: list[Diagnostic]) -> TestCaseDraft | None:
        title = " ".join(part for part in self.title_parts if part).strip()
        expected = " ".join(self.expected_parts).strip()
        if not title:
            diagnostics.append(Diagnostic("line_grammar", "record rejected: no title text"))
            return None
        if not expected:
            diagnostics.append(
                Diagnostic("line_grammar", f"record {title!r} rejected: missing expected result")
            )
            return None
        steps = list(self.steps)
        if not steps:
            diagnostics.append(
                Diagnostic(
                    "line_grammar", f"record {title!r}: no steps, substituted synthetic step"
                )
            )
            steps = [SYNTHETIC_STEP]
        priority = Priority.MEDIUM
        if self.priority_text is not None:
            normalized = normalize_priority(self.priority_text)
            if normalized == "reject":
                diagnostics.append(
                    Diagnostic(
                        "line_grammar",
                        f"record {title!r} rejected: priority {self.priority_text!r}",
                    )
                )
                return None
            if normalized is None:
                diagnostics.append(
                    Diagnostic(
                        "line_grammar",
                        f"record {title!r}: unknown priority {self.priority_text!r}, defaulted",
                    )
                )
            else:
                priority = normalized
        return TestCaseDraft(
            title=title,
            preconditions=tuple(self.preconditions),
            steps=tuple(steps),
            expected_result=expected,
            priority=priority,
        )


def _line_grammar_cases(text: str) -> tuple[list[TestCaseDraft], list[Diagnostic]]:
    diagnostics: list[Diagnostic] = []
    records: list[TestCaseDraft] = []
    current: _CaseAccumulator | None = None

    for raw_line in text.splitlines():
        line = _clean_line(raw_line)
        heading = _TC_HEADING_RE.match(line) or _SCENARIO_HEADING_RE.match(line)
        if heading:
            if current is not None:
                record = current.finish(diagnostics)
                if record is not None:
                    records.append(record)
            current = _CaseAccumulator(heading.group(2).strip())
            continue
        if current is None:
            continue
        if not line:
            current.title_done = True
            continue

        m = _PRECONDITIONS_LABEL_RE.match(line)
        if m:
            current.title_done = True
            current.section = "preconditions"
            if m.group(1).strip():
                current.preconditions.append(m.group(1).strip())
            continue
        m = _STEPS_LABEL_RE.match(line)
        if m:
            current.title_done = True
            current.section = "steps"
            if m.group(1).strip():
                current.steps.append(m.group(1).strip())
            continue
        m = _EXPECTED_LABEL_RE.match(line)
        if m:
            current.title_done = True
            current.section = "expected"
            if m.group(1).strip():
                current.expected_parts.append(m.group(1).strip())
            continue
        m = _PRIORITY_LABEL_RE.match(line)
        if m:
            current.title_done = True
            current.section = None
            current.priority_text = m.group(1).strip()
            continue

        item = _LIST_ITEM_RE.match(line)
        if current.section == "preconditions" and item:
            current.preconditions.append(item.group(1).strip())
            continue
        if current.section == "steps" and item:
            current.steps.append(item.group(1).strip())
            continue
        if current.section == "expected":
            current.expected_parts.append(line)
            continue
        if not current.title_done:
            current.title_parts.append(line)
            continue
        # Unlabeled text after a section ended; nothing to attach it to.

    if current is not None:
        record = current.finish(diagnostics)
        if record is not None:
            records.append(record)
    if not records and not diagnostics:
        diagnostics.append(Diagnostic("line_grammar", "no recognizable headings or records"))
    return records, diagnostics


class _StoryAccumulator:
    def __init__(self) -> None:
        self.as_a = ""
        self.i_want = ""
        self.so_that = ""
        self.criteria: list[str] = []
        self.priority_text: str | None = None
        self.section: str | None = None

    def finish(self, diagnostics: list[Diagnostic]) -> StoryDraft | None:
        if not self.as_a or not self.i_want:
            diagnostics.append(
                Diagnostic("line_grammar", "story rejected: no as-a / i-want narrative found")
            )
            return None
        priority = Priority.MEDIUM
        if self.priority_text is not None:
            normalized = normalize_priority(self.priority_text)
            if normalized == "reject":
                diagnostics.append(
                    Diagnostic("line_grammar", f"story rejected: priority {self.priority_text!r}")
                )
                return None
            if normalized is None:
                diagnostics.append(
                    Diagnostic(
                        "line_grammar",
                        f"story: unknown priority {self.priority_text!r}, defaulted",
                    )
                )
            else:
                priority = normalized
        return StoryDraft(
            as_a=self.as_a,
            i_want=self.i_want,
            so_that=self.so_that,
            acceptance_criteria=tuple(self.criteria),
            priority=priority,
        )


def _line_grammar_stories(text: str) -> tuple[list[StoryDraft], list[Diagnostic]]:
    diagnostics: list[Diagnostic] = []
    records: list[StoryDraft] = []
    current: _StoryAccumulator | None = None
    saw_marker = False

    def flush() -> None:
        nonlocal current
        if current is not None:
            record = current.finish(diagnostics)
            if record is not None:
                records.append(record)
        current = None

    for raw_line in text.splitlines():
        line = _clean_line(raw_line)
        if not line:
            continue
        if _STORY_HEADING_RE.match(line):
            saw_marker = True
            flush()
            current = _StoryAccumulator()
            continue
        narrative = _NARRATIVE_RE.match(line)
        if narrative:
            saw_marker = True
            if current is None or current.as_a:
                flush()
                current = _StoryAccumulator()
            current.as_a = narrative.group("as_a").strip()
            current.i_want = narrative.group("i_want").strip()
            current.so_that = (narrative.group("so_that") or "").strip()
            current.section = None
            continue
        if current is None:
            continue
        m = _CRITERIA_LABEL_RE.match(line)
        if m:
            current.section = "criteria"
            if m.group(1).strip():
                current.criteria.append(m.group(1).strip())
            continue
        m = _PRIORITY_LABEL_RE.match(line)
        if m:
            current.section = None
            current.priority_text = m.group(1).strip()
            continue
        item = _LIST_ITEM_RE.match(line)
        if current.section == "criteria" and item:
            current.criteria.append(item.group(1).strip())
            continue

    flush()
    if not records and not diagnostics and not saw_marker:
        diagnostics.append(Diagnostic("line_grammar", "no recognizable story narrative"))
    return records, diagnostics


def group_story_drafts(drafts: Iterable[StoryDraft]) -> list[tuple[str, list[StoryDraft]]]:
    """Group drafts by epic title, preserving first-seen epic order."""
    order: list[str] = []
    grouped: dict[str, list[StoryDraft]] = {}
    for draft in drafts:
        title = draft.epic_title or "Ungrouped"
        if title not in grouped:
            grouped[title] = []
            order.append(title)
        grouped[title].append(draft)
    return [(title, grouped[title]) for title in order]

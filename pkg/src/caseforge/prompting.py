"""Prompt construction from versioned template files.

Templates are plain {{name}} substitution with no conditionals or loops; list
content (requirement lists, acceptance criteria) is formatted by the builder
functions so the exact prompt text stays auditable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from caseforge.errors import TemplateError
from caseforge.extraction import STORY_SCHEMA, TESTCASE_SCHEMA
from caseforge.model import UserStory

ROLE_SYSTEM = "system"
ROLE_USER = "user"
ROLE_ASSISTANT = "assistant"

_PLACEHOLDER_RE = re.compile(r"\{\{([A-Za-z_][A-Za-z0-9_]*)\}\}")
_SECTION_RE = re.compile(r"^\[(metadata|system|user)\]\s*$")

DEFAULT_MODEL = "gpt-3.5-turbo"
DEFAULT_TEMPERATURE = 0.2


@dataclass(frozen=True)
class GenerationParams:
    model: str = DEFAULT_MODEL
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = 1024
    target_case_count: int = 5
    max_parse_retries: int = 2

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0.0, 2.0]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")
        if self.target_case_count < 1:
            raise ValueError("target_case_count must be >= 1")
        if self.max_parse_retries < 0:
            raise ValueError("max_parse_retries must be >= 0")

    def to_dict(self) -> dict[str, object]:
        return {
            "model": self.model,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "target_case_count": self.target_case_count,
            "max_parse_retries": self.max_parse_retries,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "GenerationParams":
        return cls(
            model=str(data.get("model", DEFAULT_MODEL)),
            temperature=float(data.get("temperature", DEFAULT_TEMPERATURE)),  # type: ignore[arg-type]
            max_tokens=int(data.get("max_tokens", 1024)),  # type: ignore[arg-type]
            target_case_count=int(data.get("target_case_count", 5)),  # type: ignore[arg-type]
            max_parse_retries=int(data.get("max_parse_retries", 2)),  # type: ignore[arg-type]
        )


@dataclass(frozen=True)
class Message:
    role: str
    content: str

    def to_dict(self) -> dict[str, str]:
        return {"role": self.role, "content": self.content}


MessageList = tuple[Message, ...]


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    version: str
    system_text: str
    user_text: str
    required_placeholders: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        scanned = scan_placeholders(self.system_text) | scan_placeholders(self.user_text)
        if scanned != set(self.required_placeholders):
            raise TemplateError(
                f"template {self.name}-{self.version}: declared placeholders "
                f"{sorted(self.required_placeholders)} disagree with scanned {sorted(scanned)}"
            )


def scan_placeholders(text: str) -> set[str]:
    return set(_PLACEHOLDER_RE.findall(text))


def parse_template_file(text: str, source: str = "<string>") -> PromptTemplate:
    """Parse the three-section template container: [metadata], [system], [user]."""
    sections: dict[str, list[str]] = {}
    current: str | None = None
    for line in text.splitlines():
        m = _SECTION_RE.match(line.strip())
        if m:
            current = m.group(1)
            if current in sections:
                raise TemplateError(f"{source}: duplicate [{current}] section")
            sections[current] = []
            continue
        if current is None:
            if line.strip():
                raise TemplateError(f"{source}: content before first section header")
            continue
        sections[current].append(line)

    for required in ("metadata", "system", "user"):
        if required not in sections:
            raise TemplateError(f"{source}: missing [{required}] section")

    metadata: dict[str, str] = {}
    for line in sections["metadata"]:
        if not line.strip():
            continue
        if "=" not in line:
            raise TemplateError(f"{source}: bad metadata line {line!r}")
        key, _, value = line.partition("=")
        metadata[key.strip()] = value.strip()

    for required_key in ("name", "version"):
        if required_key not in metadata:
            raise TemplateError(f"{source}: metadata missing {required_key!r}")

    declared = frozenset(
        token.strip()
        for token in metadata.get("required_placeholders", "").split(",")
        if token.strip()
    )
    return PromptTemplate(
        name=metadata["name"],
        version=metadata["version"],
        system_text="\n".join(sections["system"]).strip("\n"),
        user_text="\n".join(sections["user"]).strip("\n"),
        required_placeholders=declared,
    )


def load_template_file(path: Path) -> PromptTemplate:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise TemplateError(f"cannot read template {path}: {exc}") from exc
    return parse_template_file(text, source=str(path))


@lru_cache(maxsize=None)
def load_shipped_template(name: str, version: str) -> PromptTemplate:
    """Load a template shipped as package data, e.g. ("stories", "v1")."""
    resource = resources.files("caseforge").joinpath("prompts", f"{name}-{version}.prompt")
    try:
        text = resource.read_text(encoding="utf-8")
    except (FileNotFoundError, OSError) as exc:
        raise TemplateError(f"shipped template {name}-{version} not found") from exc
    template = parse_template_file(text, source=f"{name}-{version}.prompt")
    if (template.name, template.version) != (name, version):
        raise TemplateError(
            f"template file {name}-{version}.prompt declares itself "
            f"{template.name}-{template.version}"
        )
    return template


def render(template: PromptTemplate, context: Mapping[str, str]) -> MessageList:
    """Substitute every {{name}} slot literally; strict about the context keys.

    Pure: identical inputs give byte-identical output. Sections that render
    to empty text produce no message.
    """
    missing = set(template.required_placeholders) - set(context)
    if missing:
        raise TemplateError(
            f"template {template.name}-{template.version}: context missing "
            f"placeholder(s) {sorted(missing)}"
        )
    unknown = set(context) - set(template.required_placeholders)
    if unknown:
        raise TemplateError(
            f"template {template.name}-{template.version}: unknown context "
            f"key(s) {sorted(unknown)}"
        )

    def substitute(text: str) -> str:
        return _PLACEHOLDER_RE.sub(lambda m: context[m.group(1)], text)

    messages: list[Message] = []
    system = substitute(template.system_text)
    if system.strip():
        messages.append(Message(ROLE_SYSTEM, system))
    user = substitute(template.user_text)
    if user.strip():
        messages.append(Message(ROLE_USER, user))
    return tuple(messages)


def build_story_prompt(
    requirement_texts: Sequence[str], params: GenerationParams
) -> MessageList:
    """Messages asking the backend to turn requirements into epics and stories.

    Every requirement text is embedded verbatim as a numbered list entry.
    """
    if not requirement_texts:
        raise ValueError("requirements must be non-empty")
    numbered = "\n".join(f"{i}. {text}" for i, text in enumerate(requirement_texts, start=1))
    template = load_shipped_template("stories", "v1")
    return render(template, {"schema": STORY_SCHEMA, "requirements": numbered})


def build_testcase_prompt(story: UserStory, params: GenerationParams) -> MessageList:
    """Messages asking the backend for test case scenarios covering one story."""
    if story.acceptance_criteria:
        criteria = "\n".join(f"- {criterion}" for criterion in story.acceptance_criteria)
    else:
        criteria = "(no acceptance criteria provided)"
    template = load_shipped_template("testcases", "v1")
    return render(
        template,
        {
            "schema": TESTCASE_SCHEMA,
            "story_narrative": story.narrative(),
            "acceptance_criteria": criteria,
            "target_case_count": str(params.target_case_count),
        },
    )


def build_reprompt_message(kind: str, first_diagnostic: str) -> Message:
    """Corrective user message sent after an unparseable response."""
    schema = TESTCASE_SCHEMA if kind == "test_cases" else STORY_SCHEMA
    template = load_shipped_template("reprompt", "v1")
    messages = render(template, {"schema": schema, "diagnostic": first_diagnostic})
    if len(messages) != 1 or messages[0].role != ROLE_USER:
        raise TemplateError("reprompt-v1 must render exactly one user message")
    return messages[0]


def validate_message_list(messages: Iterable[Message]) -> None:
    """Enforce the wire invariants: leading system message, no empty content."""
    items = list(messages)
    if not items:
        raise ValueError("message list is empty")
    if items[0].role != ROLE_SYSTEM:
        raise ValueError("first message must have role system")
    for msg in items:
        if msg.role not in (ROLE_SYSTEM, ROLE_USER, ROLE_ASSISTANT):
            raise ValueError(f"unknown role {msg.role!r}")
        if not msg.content.strip():
            raise ValueError("message content must be non-empty")

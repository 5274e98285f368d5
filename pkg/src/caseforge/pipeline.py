"""Generation orchestration: prompt, complete, extract, re-prompt, persist-ready.

Functions here are pure with respect to the project aggregate: they take a
Project and return an updated copy plus the session and exchange records, and
leave persistence to the caller (CLI or service).
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from caseforge.client import ChatExchange, ChatRequest, LlmClient
from caseforge.errors import NotFoundError, PipelineError
from caseforge.extraction import ExtractionResult, extract
from caseforge.model import (
    GenerationSession,
    Project,
    SessionKind,
    SessionOutcome,
    TestCase,
    UserStory,
    new_id,
)
from caseforge.prompting import (
    GenerationParams,
    Message,
    MessageList,
    build_reprompt_message,
    build_story_prompt,
    build_testcase_prompt,
)
from caseforge.store import with_session_ref, with_story_drafts, with_testcase_drafts

STORIES = "stories"
TEST_CASES = "test_cases"


@dataclass(frozen=True)
class GenerationOutcome:
    """One session's worth of work. `project` is unchanged on failure except
    for the appended session reference."""

    project: Project
    session: GenerationSession
    exchanges: tuple[ChatExchange, ...]
    result: ExtractionResult | None
    created_stories: tuple[UserStory, ...] = ()
    created_cases: tuple[TestCase, ...] = ()

    @property
    def ok(self) -> bool:
        return self.session.outcome == SessionOutcome.SUCCESS

    def summary(self) -> dict:
        """Session summary dict shared by the API and the CLI."""
        return {
            "id": self.session.id,
            "kind": self.session.kind.value,
            "outcome": self.session.outcome.value,
            "method": self.session.method,
            "retries": self.session.retries,
            "exchange_count": len(self.exchanges),
            "latency_ms": sum(e.latency_ms for e in self.exchanges),
        }


def _converse(
    client: LlmClient, params: GenerationParams, messages: MessageList, kind: str
) -> tuple[list[ChatExchange], ExtractionResult | None, SessionOutcome, int]:
    """complete -> extract loop with corrective re-prompts.

    Re-prompts at most params.max_parse_retries times, so a run that never
    parses produces exactly 1 + max_parse_retries exchanges.
    """
    convo = list(messages)
    exchanges: list[ChatExchange] = []
    retries = 0
    while True:
        request = ChatRequest(
            model=params.model,
            messages=tuple(convo),
            temperature=params.temperature,
            max_tokens=params.max_tokens,
        )
        exchange = client.complete(request)
        exchanges.append(exchange)
        if not exchange.ok:
            return exchanges, None, SessionOutcome.BACKEND_ERROR, retries
        result = extract(exchange.raw_text, kind)
        if result.ok:
            return exchanges, result, SessionOutcome.SUCCESS, retries
        if retries >= params.max_parse_retries:
            return exchanges, result, SessionOutcome.PARSE_FAILED, retries
        retries += 1
        first = result.diagnostics[0]
        convo.append(Message(role="assistant", content=exchange.raw_text))
        convo.append(build_reprompt_message(kind, f"{first.stage}: {first.message}"))


def _finish(
    project: Project,
    kind: SessionKind,
    params: GenerationParams,
    exchanges: list[ChatExchange],
    result: ExtractionResult | None,
    outcome: SessionOutcome,
    retries: int,
) -> tuple[Project, GenerationSession, tuple[ChatExchange, ...]]:
    session_id = new_id("session", project.existing_ids())
    tagged = tuple(
        dataclasses.replace(ex, id=f"{session_id}-E{i}")
        for i, ex in enumerate(exchanges, start=1)
    )
    session = GenerationSession(
        id=session_id,
        kind=kind,
        params=params.to_dict(),
        exchanges=tuple(ex.id for ex in tagged),
        outcome=outcome,
        method=result.method.value if result is not None and result.method else None,
        retries=retries,
    )
    return with_session_ref(project, session_id), session, tagged


def generate_stories(
    project: Project,
    client: LlmClient,
    params: GenerationParams | None = None,
    requirement_ids: Sequence[str] | None = None,
) -> GenerationOutcome:
    """Turn the project's requirements into epics and user stories."""
    params = params or GenerationParams()
    if requirement_ids is None:
        requirements = list(project.requirements)
    else:
        by_id = {r.id: r for r in project.requirements}
        missing = [rid for rid in requirement_ids if rid not in by_id]
        if missing:
            raise NotFoundError("requirement", missing[0])
        requirements = [by_id[rid] for rid in requirement_ids]
    if not requirements:
        raise PipelineError("no requirements to generate stories from")

    messages = build_story_prompt([r.text for r in requirements], params)
    exchanges, result, outcome, retries = _converse(client, params, messages, STORIES)
    updated, session, tagged = _finish(
        project, SessionKind.STORIES, params, exchanges, result, outcome, retries
    )
    created: tuple[UserStory, ...] = ()
    if outcome == SessionOutcome.SUCCESS:
        assert result is not None
        updated, created_list = with_story_drafts(updated, result.items)
        created = tuple(created_list)
    return GenerationOutcome(
        project=updated,
        session=session,
        exchanges=tagged,
        result=result,
        created_stories=created,
    )


def generate_testcases(
    project: Project,
    story_id: str,
    client: LlmClient,
    params: GenerationParams | None = None,
) -> GenerationOutcome:
    """Turn one story plus its acceptance criteria into test-case scenarios."""
    params = params or GenerationParams()
    story = project.story_by_id(story_id)
    if story is None:
        raise NotFoundError("story", story_id)

    messages = build_testcase_prompt(story, params)
    exchanges, result, outcome, retries = _converse(client, params, messages, TEST_CASES)
    updated, session, tagged = _finish(
        project, SessionKind.TEST_CASES, params, exchanges, result, outcome, retries
    )
    created: tuple[TestCase, ...] = ()
    if outcome == SessionOutcome.SUCCESS:
        assert result is not None
        updated, created_list = with_testcase_drafts(updated, story_id, result.items)
        created = tuple(created_list)
    return GenerationOutcome(
        project=updated,
        session=session,
        exchanges=tagged,
        result=result,
        created_cases=created,
    )


@dataclass(frozen=True)
class BulkOutcome:
    project: Project
    outcomes: tuple[GenerationOutcome, ...]

    @property
    def ok(self) -> bool:
        return all(o.ok for o in self.outcomes)


def generate_testcases_bulk(
    project: Project,
    client: LlmClient,
    params: GenerationParams | None = None,
    story_ids: Sequence[str] | None = None,
    max_workers: int = 4,
) -> BulkOutcome:
    """Fan test-case generation out across stories.

    Conversations run concurrently up to the client's in-flight bound, but
    results are applied to the aggregate in story order so id assignment is
    deterministic regardless of completion order.
    """
    params = params or GenerationParams()
    targets = list(story_ids) if story_ids is not None else [s.id for s in project.stories]
    by_id = {s.id: s for s in project.stories}
    for sid in targets:
        if sid not in by_id:
            raise NotFoundError("story", sid)
    if not targets:
        return BulkOutcome(project=project, outcomes=())

    prompts = {sid: build_testcase_prompt(by_id[sid], params) for sid in targets}
    with ThreadPoolExecutor(max_workers=max(1, min(max_workers, len(targets)))) as pool:
        futures = {
            sid: pool.submit(_converse, client, params, prompts[sid], TEST_CASES)
            for sid in targets
        }
        raw = {sid: futures[sid].result() for sid in targets}

    outcomes: list[GenerationOutcome] = []
    current = project
    for sid in targets:
        exchanges, result, outcome, retries = raw[sid]
        current, session, tagged = _finish(
            current, SessionKind.TEST_CASES, params, exchanges, result, outcome, retries
        )
        created: tuple[TestCase, ...] = ()
        if outcome == SessionOutcome.SUCCESS:
            assert result is not None
            current, created_list = with_testcase_drafts(current, sid, result.items)
            created = tuple(created_list)
        outcomes.append(
            GenerationOutcome(
                project=current,
                session=session,
                exchanges=tagged,
                result=result,
                created_cases=created,
            )
        )
    return BulkOutcome(project=current, outcomes=tuple(outcomes))

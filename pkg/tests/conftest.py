"""Shared builders: projects, scripted clients, and the replay demo corpus."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from caseforge.client import (
    ChatRequest,
    LlmClient,
    ReplayBackend,
    RetryPolicy,
    ScriptedBackend,
    ScriptedResponse,
    make_wire_response,
    write_fixture,
)
from caseforge.clock import FakeTimer
from caseforge.model import Priority, Project, Requirement, TestCase, UserStory
from caseforge.prompting import GenerationParams, build_story_prompt, build_testcase_prompt
from caseforge.store import Workspace

FIXTURES_DIR = Path(__file__).parent / "fixtures"

REQUIREMENT_TEXT = (
    "The tool shall help a researcher plan a literature review: define review "
    "questions aligned with research objectives, identify machine learning "
    "techniques for image recognition as a candidate topic, and check ethical "
    "considerations in AI applications under GDPR regulations."
)

RESEARCHER_STORY = {
    "as_a": "researcher",
    "i_want": "I aim to formulate questions that align with my research objectives",
    "so_that": "in order to direct the focus of the review towards pertinent topics",
    "acceptance_criteria": [
        "Machine learning techniques for image recognition are identified as a pertinent topic",
        "Ethical considerations in AI applications under GDPR regulations are recorded",
        "Questions can be revised before the search phase begins",
        "Each question maps to at least one research objective",
        "Out-of-scope topics are explicitly excluded from the question list",
    ],
    "priority": "high",
}

RESEARCHER_CASES = [
    {
        "title": "Identify machine learning techniques for image recognition",
        "preconditions": ["A research objective about image recognition exists"],
        "steps": [
            "Open the question planner",
            "Enter the image recognition objective",
            "Ask for candidate techniques",
        ],
        "expected_result": "Machine learning techniques for image recognition are listed as a pertinent topic",
        "priority": "high",
        "tags": ["nominal"],
    },
    {
        "title": "Formulate a question from a research objective",
        "steps": [
            "Select a research objective",
            "Draft a review question for it",
        ],
        "expected_result": "The question maps to at least one research objective",
        "priority": "high",
        "tags": ["nominal"],
    },
    {
        "title": "Revise a question before the search phase",
        "steps": [
            "Open a saved question",
            "Edit the wording",
            "Save the revision",
        ],
        "expected_result": "The revised question is stored and the search phase has not begun",
        "priority": "medium",
        "tags": ["nominal"],
    },
    {
        "title": "Reject a question without a mapped objective",
        "steps": [
            "Draft a question with no objective selected",
            "Try to save it",
        ],
        "expected_result": "Saving is blocked until the question maps to a research objective",
        "priority": "medium",
        "tags": ["negative"],
    },
    {
        "title": "Check ethical considerations in AI applications under GDPR regulations",
        "preconditions": ["A dataset containing personal data is in scope"],
        "steps": [
            "Open the ethics checklist",
            "Review GDPR items for the planned AI application",
        ],
        "expected_result": "Ethical considerations in AI applications are recorded as GDPR compliant or flagged",
        "priority": "high",
        "tags": ["compliance"],
    },
]


def default_params() -> GenerationParams:
    return GenerationParams()


def request_for(messages, params: GenerationParams) -> ChatRequest:
    return ChatRequest(
        model=params.model,
        messages=messages,
        temperature=params.temperature,
        max_tokens=params.max_tokens,
    )


def build_researcher_corpus(directory: Path) -> dict:
    """Replay fixtures for the demo flow: one requirement, one story, five cases.

    Fingerprints are derived with the same prompt builders the pipeline uses,
    so the corpus stays valid when templates change.
    """
    directory.mkdir(parents=True, exist_ok=True)
    params = default_params()

    story_payload = {
        "epics": [{"title": "Review planning", "stories": [RESEARCHER_STORY]}]
    }
    story_request = request_for(build_story_prompt([REQUIREMENT_TEXT], params), params)
    write_fixture(
        directory,
        story_request,
        make_wire_response(json.dumps(story_payload)),
        latency_ms=150,
    )

    story = UserStory(
        id="US-0001",
        as_a=RESEARCHER_STORY["as_a"],
        i_want=RESEARCHER_STORY["i_want"],
        so_that=RESEARCHER_STORY["so_that"],
        acceptance_criteria=tuple(RESEARCHER_STORY["acceptance_criteria"]),
        priority=Priority.HIGH,
    )
    case_payload = {"test_cases": RESEARCHER_CASES}
    case_request = request_for(build_testcase_prompt(story, params), params)
    write_fixture(
        directory,
        case_request,
        make_wire_response(json.dumps(case_payload)),
        latency_ms=210,
    )
    return {
        "requirement": REQUIREMENT_TEXT,
        "story_id": "US-0001",
        "story": story,
        "case_titles": [c["title"] for c in RESEARCHER_CASES],
    }


def scripted_client(script: list[ScriptedResponse], **policy_overrides) -> LlmClient:
    policy = RetryPolicy(**policy_overrides) if policy_overrides else RetryPolicy()
    return LlmClient(ScriptedBackend(script), policy=policy, timer=FakeTimer())


def replay_client(directory: Path) -> LlmClient:
    return LlmClient(ReplayBackend(directory, strict=True), timer=FakeTimer())


def content_response(payload: dict | str, delay_ms: int = 0) -> ScriptedResponse:
    text = payload if isinstance(payload, str) else json.dumps(payload)
    return ScriptedResponse.content(text, delay_ms=delay_ms)


def make_case(
    case_id: str,
    story_id: str,
    title: str = "A scenario",
    steps: tuple[str, ...] = ("Do the step",),
    expected: str = "It works",
    **kwargs,
) -> TestCase:
    return TestCase(
        id=case_id,
        story_id=story_id,
        title=title,
        steps=steps,
        expected_result=expected,
        **kwargs,
    )


def make_story(story_id: str, **kwargs) -> UserStory:
    defaults = dict(as_a="user", i_want="to do something", so_that="value arrives")
    defaults.update(kwargs)
    return UserStory(id=story_id, **defaults)


def make_project(stories: int = 1, cases_per_story: int = 1) -> Project:
    story_objs = tuple(make_story(f"US-{i:04d}") for i in range(1, stories + 1))
    cases = []
    n = 1
    for story in story_objs:
        for _ in range(cases_per_story):
            cases.append(make_case(f"TC-{n:04d}", story.id, title=f"Scenario {n}"))
            n += 1
    return Project(
        id="PJ-0001", name="fixture", stories=story_objs, test_cases=tuple(cases)
    )


@pytest.fixture
def workspace(tmp_path) -> Workspace:
    ws = Workspace(tmp_path / "ws")
    ws.init()
    return ws


@pytest.fixture
def corpus_dir(tmp_path) -> Path:
    directory = tmp_path / "corpus"
    build_researcher_corpus(directory)
    return directory

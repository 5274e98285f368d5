from datetime import datetime, timezone

import pytest
from hypothesis import given
from hypothesis import strategies as st

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
    new_id,
    validate_project,
)
from conftest import make_case, make_project, make_story


class TestNewId:
    def test_first_ids_per_kind(self):
        assert new_id("requirement", []) == "RQ-0001"
        assert new_id("story", []) == "US-0001"
        assert new_id("test_case", []) == "TC-0001"
        assert new_id("epic", []) == "EP-0001"
        assert new_id("session", []) == "GS-0001"
        assert new_id("project", []) == "PJ-0001"

    def test_continues_from_highest_suffix(self):
        assert new_id("test_case", ["TC-0001", "TC-0007"]) == "TC-0008"

    def test_gaps_are_not_recycled(self):
        # Deleting TC-0002 must not bring its id back.
        assert new_id("test_case", ["TC-0001", "TC-0003"]) == "TC-0004"

    def test_foreign_prefixes_ignored(self):
        assert new_id("story", ["TC-0009", "US-0002"]) == "US-0003"

    def test_width_grows_beyond_9999(self):
        assert new_id("test_case", ["TC-10007"]) == "TC-10008"

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            new_id("widget", [])


class TestPriority:
    @pytest.mark.parametrize("text,expected", [
        ("high", Priority.HIGH),
        ("HIGH", Priority.HIGH),
        (" Medium ", Priority.MEDIUM),
        ("low", Priority.LOW),
    ])
    def test_parse(self, text, expected):
        assert Priority.parse(text) is expected

    def test_parse_unknown_raises(self):
        with pytest.raises(ValueError):
            Priority.parse("critical")


class TestNarrative:
    def test_plain_goal(self):
        story = make_story("US-0001", as_a="tester", i_want="to run suites",
                           so_that="bugs surface early")
        assert story.narrative() == "As a tester, I want to run suites, so that bugs surface early."

    def test_goal_already_carrying_i_prefix(self):
        story = make_story(
            "US-0001",
            as_a="researcher",
            i_want="I aim to formulate questions that align with my research objectives",
            so_that="in order to direct the focus of the review towards pertinent topics",
        )
        assert story.narrative() == (
            "As a researcher, I aim to formulate questions that align with my research"
            " objectives, in order to direct the focus of the review towards pertinent topics."
        )

    def test_without_benefit(self):
        story = make_story("US-0001", as_a="admin", i_want="to see logs", so_that="")
        assert story.narrative() == "As a admin, I want to see logs."


class TestValidateProject:
    def test_valid_project_has_no_violations(self):
        assert validate_project(make_project(stories=2, cases_per_story=2)) == []

    def test_empty_project_is_valid(self):
        assert validate_project(Project(id="PJ-0001", name="x")) == []

    def test_dangling_case_story(self):
        project = Project(
            id="PJ-0001", name="x",
            test_cases=(make_case("TC-0001", "US-0404"),),
        )
        rules = {v.rule for v in validate_project(project)}
        assert rules == {"dangling-story"}

    def test_dangling_epic_story(self):
        project = Project(
            id="PJ-0001", name="x",
            epics=(Epic(id="EP-0001", title="T", story_ids=("US-0404",)),),
        )
        rules = [v.rule for v in validate_project(project)]
        assert rules == ["dangling-story"]

    def test_duplicate_ids(self):
        story = make_story("US-0001")
        project = Project(id="PJ-0001", name="x", stories=(story, story))
        rules = [v.rule for v in validate_project(project)]
        assert "duplicate-id" in rules

    def test_blank_fields(self):
        project = Project(
            id="PJ-0001",
            name="x",
            requirements=(Requirement(id="RQ-0001", text="  ",
                                      created_at=datetime.now(timezone.utc)),),
            stories=(UserStory(id="US-0001", as_a="", i_want="",
                               acceptance_criteria=("", "ok")),),
            test_cases=(TestCase(id="TC-0001", story_id="US-0001", title="",
                                 steps=(), expected_result=""),),
        )
        rules = sorted(v.rule for v in validate_project(project))
        assert rules == [
            "blank-as-a",
            "blank-criterion",
            "blank-expected-result",
            "blank-i-want",
            "blank-text",
            "blank-title",
            "empty-steps",
        ]

    def test_blank_step(self):
        project = Project(
            id="PJ-0001", name="x",
            stories=(make_story("US-0001"),),
            test_cases=(make_case("TC-0001", "US-0001", steps=("ok", "  ")),),
        )
        rules = [v.rule for v in validate_project(project)]
        assert rules == ["blank-step"]

    def test_output_sorted_and_stable(self):
        project = Project(
            id="PJ-0001", name="x",
            test_cases=(
                make_case("TC-0002", "US-0404"),
                make_case("TC-0001", "US-0404"),
            ),
        )
        entity_ids = [v.entity_id for v in validate_project(project)]
        assert entity_ids == sorted(entity_ids)


_text = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=30
).filter(lambda s: s.strip())
_texts = st.lists(_text, max_size=4).map(tuple)
_priority = st.sampled_from(list(Priority))


class TestRoundTrip:
    @given(
        title=_text, steps=st.lists(_text, min_size=1, max_size=5).map(tuple),
        preconditions=_texts, expected=_text, priority=_priority, tags=_texts,
    )
    def test_testcase(self, title, steps, preconditions, expected, priority, tags):
        case = TestCase(
            id="TC-0001", story_id="US-0001", title=title, preconditions=preconditions,
            steps=steps, expected_result=expected, priority=priority, tags=tags,
        )
        assert TestCase.from_dict(case.to_dict()) == case

    @given(as_a=_text, i_want=_text, so_that=_text, criteria=_texts, priority=_priority)
    def test_story(self, as_a, i_want, so_that, criteria, priority):
        story = UserStory(
            id="US-0001", as_a=as_a, i_want=i_want, so_that=so_that,
            acceptance_criteria=criteria, priority=priority,
        )
        assert UserStory.from_dict(story.to_dict()) == story

    def test_project_round_trip(self):
        project = make_project(stories=3, cases_per_story=2)
        assert Project.from_dict(project.to_dict()) == project

    def test_requirement_round_trip(self):
        req = Requirement(
            id="RQ-0001", text="Do the thing",
            created_at=datetime(2026, 8, 25, 12, 0, tzinfo=timezone.utc),
        )
        assert Requirement.from_dict(req.to_dict()) == req

    def test_session_round_trip(self):
        session = GenerationSession(
            id="GS-0001", kind=SessionKind.TEST_CASES,
            params={"temperature": 0.2}, exchanges=("GS-0001-E1",),
            outcome=SessionOutcome.PARSE_FAILED, method=None, retries=2,
        )
        assert GenerationSession.from_dict(session.to_dict()) == session

    def test_unknown_keys_survive_round_trip(self):
        data = {
            "id": "TC-0001", "story_id": "US-0001", "title": "T",
            "preconditions": [], "steps": ["s"], "expected_result": "E",
            "priority": "low", "tags": [], "jira_key": "APP-7", "custom": {"a": 1},
        }
        case = TestCase.from_dict(data)
        out = case.to_dict()
        assert out["jira_key"] == "APP-7"
        assert out["custom"] == {"a": 1}
        assert TestCase.from_dict(out) == case

    def test_project_extra_keys_survive(self):
        data = make_project().to_dict()
        data["annotations"] = {"owner": "qa"}
        project = Project.from_dict(data)
        assert project.to_dict()["annotations"] == {"owner": "qa"}

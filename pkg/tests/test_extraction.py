import json
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from caseforge.extraction import (
    ExtractionMethod,
    SYNTHETIC_STEP,
    extract,
    group_story_drafts,
    line_grammar_parse,
    normalize_priority,
    repair_json,
    StoryDraft,
)
from caseforge.model import Priority
from conftest import FIXTURES_DIR

CORPUS_DIR = FIXTURES_DIR / "extraction"
REPAIR_DIR = FIXTURES_DIR / "repair"
CORPUS_CLASSES = ("strict", "fenced", "balanced", "repaired", "line_grammar", "unparseable")


def corpus_fixtures() -> list[tuple[str, Path]]:
    out = []
    for cls in CORPUS_CLASSES:
        for path in sorted((CORPUS_DIR / cls).glob("*.txt")):
            out.append((cls, path))
    return out


def load_expected(path: Path) -> dict:
    return json.loads(path.with_suffix("").with_suffix(".expected.json").read_text("utf-8"))


class TestCorpus:
    def test_corpus_is_large_enough(self):
        fixtures = corpus_fixtures()
        assert len(fixtures) >= 20
        classes = {cls for cls, _ in fixtures}
        assert classes == set(CORPUS_CLASSES)

    @pytest.mark.parametrize(
        "cls,path", corpus_fixtures(), ids=[f"{c}/{p.stem}" for c, p in corpus_fixtures()]
    )
    def test_fixture(self, cls, path):
        expected = load_expected(path)
        result = extract(path.read_text("utf-8"), expected["kind"])
        if cls == "unparseable":
            assert not result.ok
            assert result.method is None
            assert result.items == ()
            assert len(result.diagnostics) >= expected["min_diagnostics"]
        else:
            assert result.ok, [d.to_dict() for d in result.diagnostics]
            assert result.method == ExtractionMethod(cls)
            assert [item.to_dict() for item in result.items] == expected["items"]


class TestExtractBasics:
    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            extract("{}", "epics")

    def test_empty_text_fails_with_diagnostics(self):
        result = extract("", "test_cases")
        assert not result.ok
        assert result.diagnostics

    def test_prose_wrapping_preserves_items(self):
        # Stage monotonicity: leading/trailing prose shifts the winning stage
        # but never the recovered records.
        doc = '{"test_cases": [{"title": "T", "steps": ["s"], "expected_result": "E"}]}'
        bare = extract(doc, "test_cases")
        wrapped = extract(f"Sure, here you go: {doc} anything else?", "test_cases")
        assert bare.ok and wrapped.ok
        assert bare.method == ExtractionMethod.STRICT
        assert wrapped.method == ExtractionMethod.BALANCED
        assert [i.to_dict() for i in bare.items] == [i.to_dict() for i in wrapped.items]

    def test_diagnostics_accumulate_across_stages(self):
        result = extract("no structure here at all", "test_cases")
        stages = {d.stage for d in result.diagnostics}
        assert {"strict", "fenced", "balanced", "repaired", "line_grammar"} <= stages

    def test_extract_is_pure(self):
        text = 'Test Case 1: A\nSteps:\n1. s\nExpected Result: E\n'
        first = extract(text, "test_cases")
        second = extract(text, "test_cases")
        assert first == second


class TestNormalizePriority:
    @pytest.mark.parametrize("value,expected", [
        ("high", Priority.HIGH),
        ("Critical", Priority.HIGH),
        ("MUST", Priority.HIGH),
        ("should", Priority.MEDIUM),
        ("could", Priority.LOW),
        ("low", Priority.LOW),
    ])
    def test_synonyms(self, value, expected):
        assert normalize_priority(value) is expected

    @pytest.mark.parametrize("value", ["won't", "Won't", "wont", "won’t"])
    def test_wont_rejects(self, value):
        assert normalize_priority(value) == "reject"

    @pytest.mark.parametrize("value", ["urgent", "", 7, None, ["high"]])
    def test_unknown_is_none(self, value):
        assert normalize_priority(value) is None


class TestRepairCorpus:
    @pytest.mark.parametrize(
        "path", sorted(REPAIR_DIR.glob("*.txt")), ids=lambda p: p.stem
    )
    def test_repair_fixture(self, path):
        expected = load_expected(path)
        repaired = repair_json(path.read_text("utf-8"))
        assert json.loads(repaired) == expected

    def test_corpus_size(self):
        assert len(list(REPAIR_DIR.glob("*.txt"))) >= 20


_json_scalars = st.one_of(
    st.none(),
    st.booleans(),
    st.integers(min_value=-(10**9), max_value=10**9),
    st.floats(allow_nan=False, allow_infinity=False, width=32),
    st.text(max_size=20),
)
_json_trees = st.recursive(
    _json_scalars,
    lambda children: st.one_of(
        st.lists(children, max_size=4),
        st.dictionaries(st.text(max_size=10), children, max_size=4),
    ),
    max_leaves=12,
)


class TestRepairProperties:
    @given(tree=_json_trees)
    def test_valid_json_is_a_fixpoint(self, tree):
        for dump in (
            json.dumps(tree),
            json.dumps(tree, indent=2),
            json.dumps(tree, separators=(",", ":")),
        ):
            assert repair_json(dump) == dump

    @given(tree=_json_trees)
    def test_repair_is_idempotent(self, tree):
        once = repair_json(json.dumps(tree, indent=1))
        assert repair_json(once) == once

    def test_repair_does_not_touch_string_bodies(self):
        text = '{"a": "//keep", "b": "{c: 1,}", "c": "“quoted”"}'
        assert repair_json(text) == text


class TestLineGrammar:
    def test_empty_text_yields_nothing(self):
        assert line_grammar_parse("", "test_cases") == []
        assert line_grammar_parse("", "stories") == []

    def test_synthetic_step_substitution(self):
        text = "Test Case 1: Title only\nExpected Result: Something observable\n"
        records = line_grammar_parse(text, "test_cases")
        assert len(records) == 1
        assert records[0].steps == (SYNTHETIC_STEP,)

    def test_multiline_title_joined(self):
        text = (
            "Test Case 1: Export the annual\n"
            "report as CSV\n"
            "Steps:\n1. Export\n"
            "Expected Result: A file downloads\n"
        )
        records = line_grammar_parse(text, "test_cases")
        assert records[0].title == "Export the annual report as CSV"

    def test_wont_priority_rejects_record(self):
        text = (
            "Test Case 1: Out of scope\nSteps:\n1. s\n"
            "Expected Result: E\nPriority: won't\n"
        )
        assert line_grammar_parse(text, "test_cases") == []


class TestGroupStoryDrafts:
    def test_groups_by_epic_preserving_order(self):
        drafts = [
            StoryDraft(as_a="a", i_want="w1", epic_title="Beta"),
            StoryDraft(as_a="a", i_want="w2", epic_title="Alpha"),
            StoryDraft(as_a="a", i_want="w3", epic_title="Beta"),
            StoryDraft(as_a="a", i_want="w4"),
        ]
        grouped = group_story_drafts(drafts)
        assert [title for title, _ in grouped] == ["Beta", "Alpha", "Ungrouped"]
        assert [len(items) for _, items in grouped] == [2, 1, 1]

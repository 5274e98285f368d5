"""CSV/JSON export: byte-level discipline plus lossless round-trips."""

from __future__ import annotations

import csv
import io
import json
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from caseforge.errors import ExportError
from caseforge.export import (
    CSV_COLUMNS,
    export_csv,
    export_json,
    import_cases_csv,
    parse_preconditions,
    parse_steps,
    parse_tags,
    serialize_preconditions,
    serialize_steps,
    serialize_tags,
    write_csv,
)
from caseforge.model import Priority, Project
from caseforge.store import with_case_priority

from tests.conftest import make_case, make_project, make_story
from tests.oracles import random_export_project

EXPECTED_HEADER = "test_case_id,story_id,title,preconditions,steps,expected_result,priority,tags"


def rich_project() -> Project:
    story = make_story("US-0001")
    case = make_case(
        "TC-0001",
        "US-0001",
        title='Comma, "quote", and\nnewline',
        steps=("Open page", "Click button"),
        expected="Result, delivered",
        preconditions=("User exists", "Service is up"),
        tags=("smoke", "ui"),
    )
    return Project(id="PJ-0001", name="demo", stories=(story,), test_cases=(case,))


class TestCellCodecs:
    def test_steps(self):
        assert serialize_steps(("a", "b")) == "1. a\n2. b"
        assert parse_steps("1. a\n2. b") == ("a", "b")

    def test_steps_with_inner_numbering(self):
        assert parse_steps(serialize_steps(("2. nested", "plain"))) == ("2. nested", "plain")

    def test_steps_without_numbers_still_parse(self):
        assert parse_steps("just a line\nanother") == ("just a line", "another")

    def test_preconditions(self):
        assert serialize_preconditions(("x", "y")) == "- x\n- y"
        assert parse_preconditions("- x\n- y") == ("x", "y")
        assert parse_preconditions(serialize_preconditions(("-dash",))) == ("-dash",)

    def test_tags(self):
        assert serialize_tags(("a", "b")) == "a;b"
        assert parse_tags("a;b") == ("a", "b")
        assert parse_tags(" a ; ;b ") == ("a", "b")

    def test_empty_values(self):
        assert serialize_steps(()) == ""
        assert parse_steps("") == ()
        assert serialize_preconditions(()) == ""
        assert parse_preconditions("") == ()
        assert serialize_tags(()) == ""
        assert parse_tags("") == ()


class TestCsvShape:
    def test_exact_header(self):
        text = export_csv(make_project())
        assert text.split("\r\n")[0] == EXPECTED_HEADER

    def test_crlf_record_separators_lf_inside_cells(self):
        text = export_csv(rich_project())
        # Every CR belongs to a CRLF pair, and CRLF appears only between records:
        # header, one data row, trailing terminator.
        assert text.count("\r") == text.count("\r\n") == 2
        rows = list(csv.reader(io.StringIO(text, newline="")))
        assert rows[1][2] == 'Comma, "quote", and\nnewline'
        assert "\r" not in rows[1][2]

    def test_multiline_cells_use_lf(self):
        text = export_csv(rich_project())
        rows = list(csv.reader(io.StringIO(text, newline="")))
        assert rows[1][3] == "- User exists\n- Service is up"
        assert rows[1][4] == "1. Open page\n2. Click button"

    def test_quote_escaping_is_rfc_4180(self):
        text = export_csv(rich_project())
        # Embedded quotes are doubled inside a quoted cell.
        assert '"Comma, ""quote"", and\nnewline"' in text

    def test_empty_project_is_header_only(self):
        text = export_csv(Project(id="PJ-0001", name="empty"))
        assert text == EXPECTED_HEADER + "\r\n"

    def test_rows_ordered_by_story_then_case(self):
        story_a = make_story("US-0001")
        story_b = make_story("US-0002")
        cases = (
            make_case("TC-0003", "US-0002"),
            make_case("TC-0002", "US-0001"),
            make_case("TC-0001", "US-0002"),
        )
        project = Project(
            id="PJ-0001", name="p", stories=(story_a, story_b), test_cases=cases
        )
        rows = list(csv.reader(io.StringIO(export_csv(project), newline="")))
        assert [(r[1], r[0]) for r in rows[1:]] == [
            ("US-0001", "TC-0002"),
            ("US-0002", "TC-0001"),
            ("US-0002", "TC-0003"),
        ]

    def test_priority_serialized_as_value(self):
        project = with_case_priority(make_project(), "TC-0001", Priority.HIGH)
        rows = list(csv.reader(io.StringIO(export_csv(project), newline="")))
        assert rows[1][6] == "high"

    def test_dangling_story_refused(self):
        project = Project(
            id="PJ-0001",
            name="p",
            test_cases=(make_case("TC-0001", "US-0404"), make_case("TC-0002", "US-0405")),
        )
        with pytest.raises(ExportError, match="unknown stories: US-0404, US-0405"):
            export_csv(project)

    def test_column_remap_renames_header_only(self):
        text = export_csv(rich_project(), columns={"test_case_id": "Issue Key", "tags": "Labels"})
        rows = list(csv.reader(io.StringIO(text, newline="")))
        assert rows[0] == [
            "Issue Key",
            "story_id",
            "title",
            "preconditions",
            "steps",
            "expected_result",
            "priority",
            "Labels",
        ]
        baseline = list(csv.reader(io.StringIO(export_csv(rich_project()), newline="")))
        assert rows[1:] == baseline[1:]

    def test_unknown_remap_column_rejected(self):
        with pytest.raises(ExportError, match="unknown export columns: issue_id"):
            export_csv(make_project(), columns={"issue_id": "X"})

    def test_write_csv_preserves_crlf_on_disk(self, tmp_path):
        path = tmp_path / "cases.csv"
        write_csv(rich_project(), path)
        data = path.read_bytes()
        assert data.count(b"\r\n") == 2
        assert b"\r\r" not in data
        assert data.decode("utf-8") == export_csv(rich_project())


class TestRoundTrip:
    def sorted_cases(self, project: Project):
        return sorted(project.test_cases, key=lambda c: (c.story_id, c.id))

    def test_rich_case_round_trips(self):
        project = rich_project()
        assert list(import_cases_csv(export_csv(project))) == self.sorted_cases(project)

    def test_randomized_corpus_round_trips(self):
        rng = random.Random(8251)
        for trial in range(8):
            project = random_export_project(rng, n_cases=rng.randint(1, 40))
            imported = import_cases_csv(export_csv(project))
            assert list(imported) == self.sorted_cases(project), f"trial {trial}"

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_single_case_round_trips(self, seed):
        project = random_export_project(random.Random(seed), n_cases=1)
        assert list(import_cases_csv(export_csv(project))) == self.sorted_cases(project)

    def test_stdlib_reader_agrees_with_importer(self):
        project = random_export_project(random.Random(77), n_cases=20)
        text = export_csv(project)
        rows = list(csv.reader(io.StringIO(text, newline="")))
        imported = import_cases_csv(text)
        assert len(rows) - 1 == len(imported)
        for row, case in zip(rows[1:], imported):
            assert row[0] == case.id
            assert row[2] == case.title
            assert row[5] == case.expected_result


class TestImportErrors:
    def test_empty_document(self):
        with pytest.raises(ExportError, match="empty CSV document"):
            import_cases_csv("")

    def test_header_mismatch(self):
        with pytest.raises(ExportError, match="unexpected CSV header"):
            import_cases_csv("id,title\r\n1,x\r\n")

    def test_cell_count_mismatch(self):
        text = EXPECTED_HEADER + "\r\nTC-0001,US-0001,t\r\n"
        with pytest.raises(ExportError, match="expected 8"):
            import_cases_csv(text)

    def test_bad_priority(self):
        text = EXPECTED_HEADER + "\r\nTC-0001,US-0001,t,,1. s,e,urgent,\r\n"
        with pytest.raises(ExportError, match="unknown priority 'urgent'"):
            import_cases_csv(text)

    def test_blank_trailing_record_ignored(self):
        project = make_project()
        cases = import_cases_csv(export_csv(project) + "\r\n")
        assert len(cases) == 1


class TestJsonExport:
    def test_round_trips_through_model(self):
        project = rich_project()
        text = export_json(project)
        assert text.endswith("\n")
        assert Project.from_dict(json.loads(text)) == project

    def test_unicode_not_escaped(self):
        story = make_story("US-0001")
        case = make_case("TC-0001", "US-0001", title="日本語 résumé")
        project = Project(id="PJ-0001", name="p", stories=(story,), test_cases=(case,))
        assert "日本語 résumé" in export_json(project)

    def test_deterministic(self):
        project = rich_project()
        assert export_json(project) == export_json(project)

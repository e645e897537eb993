"""Review rubric: the fixed criteria lists, mark validation, and comparison tables."""

import io

import pytest

from teamline.checklist import (
    DEFAULT_RUBRIC,
    FUNCTIONALITY_CRITERIA,
    MARK_FAIL,
    MARK_NOT_ASSESSED,
    MARK_PARTIAL,
    MARK_PASS,
    QUALITY_CRITERIA,
    MissingCriterion,
    RubricMismatch,
    UnknownCriterion,
    UnknownMark,
    compare,
    load_card,
    read_marks_csv,
    score,
)


def full_marks(mark=MARK_PASS, **overrides):
    marks = {c: mark for c in DEFAULT_RUBRIC.criteria()}
    marks.update(overrides)
    return marks


class TestRubric:
    def test_sizes(self):
        assert len(FUNCTIONALITY_CRITERIA) == 17
        assert len(QUALITY_CRITERIA) == 3
        assert len(DEFAULT_RUBRIC) == 20
        assert len(DEFAULT_RUBRIC.criteria()) == 20

    def test_no_duplicates(self):
        criteria = DEFAULT_RUBRIC.criteria()
        assert len(set(criteria)) == 20

    def test_spot_checks(self):
        assert FUNCTIONALITY_CRITERIA[0] == "The code compiles without errors"
        assert FUNCTIONALITY_CRITERIA[2] == "Creates a 3x3 grid"
        assert FUNCTIONALITY_CRITERIA[7] == "Handles non-integer input"
        assert QUALITY_CRITERIA[0] == "Decomposition"
        assert QUALITY_CRITERIA[1].startswith("Source Code Documentation")


class TestScore:
    def test_full_card(self):
        card = score(full_marks(), system_name="teamline", run_id="r1")
        assert card.pass_total() == 20
        assert card.split_pass_total(DEFAULT_RUBRIC) == (17, 3)

    def test_mixed_marks(self):
        marks = full_marks()
        marks["Creates a 3x3 grid"] = MARK_FAIL
        marks["Decomposition"] = MARK_PARTIAL
        marks["Handles non-integer input"] = MARK_NOT_ASSESSED
        card = score(marks)
        assert card.pass_total() == 17
        assert card.split_pass_total(DEFAULT_RUBRIC) == (15, 2)

    def test_missing_criterion_rejected(self):
        marks = full_marks()
        del marks["Detects the winner"]
        with pytest.raises(MissingCriterion):
            score(marks)

    def test_unknown_criterion_rejected(self):
        with pytest.raises(UnknownCriterion):
            score(full_marks(**{"Writes poetry": MARK_PASS}))

    def test_unknown_mark_rejected(self):
        with pytest.raises(UnknownMark):
            score(full_marks(**{"Decomposition": "excellent"}))

    def test_notes_filtered_to_rubric(self):
        card = score(full_marks(), notes={"Decomposition": "clean split",
                                          "Writes poetry": "ignored"})
        assert card.notes == {"Decomposition": "clean split"}

    def test_marks_ordered_by_rubric(self):
        card = score(full_marks())
        assert list(card.marks) == DEFAULT_RUBRIC.criteria()

    def test_save_load_round_trip(self, tmp_path):
        card = score(full_marks(), system_name="sysA", run_id="run-9",
                     notes={"Decomposition": "ok"})
        path = tmp_path / "card.json"
        card.save(path)
        again = load_card(path)
        assert again.system_name == "sysA"
        assert again.run_id == "run-9"
        assert again.marks == card.marks
        assert again.notes == card.notes


class TestCompare:
    def test_matrix_shape(self):
        a = score(full_marks(), system_name="sysA")
        marks_b = full_marks()
        marks_b["Creates a 3x3 grid"] = MARK_FAIL
        b = score(marks_b, system_name="sysB")
        table = compare([a, b])
        assert len(table.cells) == 20
        assert all(len(row) == 2 for row in table.cells)
        assert table.systems == ["sysA", "sysB"]
        assert table.pass_totals == {"sysA": 20, "sysB": 19}
        row = table.cells[DEFAULT_RUBRIC.criteria().index("Creates a 3x3 grid")]
        assert row == [MARK_PASS, MARK_FAIL]

    def test_text_and_csv_renderings(self):
        table = compare([score(full_marks(), system_name="solo")])
        text = table.to_text()
        assert "passes" in text and "20/20" in text
        csv_text = table.to_csv()
        assert csv_text.splitlines()[0] == "criterion,solo"
        assert len(csv_text.splitlines()) == 22  # header + 20 rows + totals

    def test_mismatched_card_rejected(self):
        good = score(full_marks(), system_name="good")
        bad_marks = full_marks()
        del bad_marks["Decomposition"]
        bad = good.__class__(system_name="bad", run_id="", marks=bad_marks)
        with pytest.raises(RubricMismatch):
            compare([good, bad])


class TestMarksCsv:
    def test_full_text_keys(self):
        text = ('criterion,mark,note\n'
                '"The code compiles without errors",pass,builds clean\n'
                '"Decomposition",partial,\n')
        marks, notes = read_marks_csv(io.StringIO(text))
        assert marks["The code compiles without errors"] == "pass"
        assert marks["Decomposition"] == "partial"
        assert notes == {"The code compiles without errors": "builds clean"}

    def test_numeric_keys_are_one_based(self):
        marks, _ = read_marks_csv(io.StringIO("1,pass\n18,fail\n"))
        assert marks[FUNCTIONALITY_CRITERIA[0]] == "pass"
        assert marks[QUALITY_CRITERIA[0]] == "fail"

    def test_numeric_key_out_of_range(self):
        with pytest.raises(UnknownCriterion):
            read_marks_csv(io.StringIO("21,pass\n"))
        with pytest.raises(UnknownCriterion):
            read_marks_csv(io.StringIO("0,pass\n"))

    def test_csv_feeds_score(self):
        rows = [f"{i},pass" for i in range(1, 21)]
        marks, notes = read_marks_csv(io.StringIO("\n".join(rows)))
        card = score(marks, notes, system_name="from-csv")
        assert card.split_pass_total(DEFAULT_RUBRIC) == (17, 3)

    def test_file_path_source(self, tmp_path):
        path = tmp_path / "marks.csv"
        path.write_text("1,pass\n", encoding="utf-8")
        marks, _ = read_marks_csv(path)
        assert marks == {FUNCTIONALITY_CRITERIA[0]: "pass"}

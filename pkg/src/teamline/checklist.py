"""Code-review rubric harness: 17 functionality criteria plus 3 quality
criteria, human-entered marks, and side-by-side system comparison tables."""

import csv
import io
import json
from dataclasses import dataclass, field

MARK_PASS = "pass"
MARK_FAIL = "fail"
MARK_PARTIAL = "partial"
MARK_NOT_ASSESSED = "not_assessed"
VALID_MARKS = (MARK_PASS, MARK_FAIL, MARK_PARTIAL, MARK_NOT_ASSESSED)

FUNCTIONALITY_CRITERIA = [
    "The code compiles without errors",
    "Uses 'X' and 'O' for the two players",
    "Creates a 3x3 grid",
    "Guides the players through the game",
    "Starts the game by displaying an empty board",
    "Starts the game by assigning 'X' to the first player and 'O' to the second player",
    "Prompts the players to input their moves by specifying the row and column",
    "Handles non-integer input",
    "Ensures that the user input is not out-of-range",
    "Ensures that the user input is not in an already occupied cell",
    "Correct placement of X's and O's according to user input coordinates",
    "Displays the updated board after each move",
    "Displays the final board after the game ends",
    "Detects the winner",
    "Announces the result of game as soon as a player wins",
    "Announces the result of game if it ends in a tie",
    "After the game concludes, asks for new game and if so restarts the game",
]

QUALITY_CRITERIA = [
    "Decomposition",
    "Source Code Documentation (general comments, inline comments, etc.)",
    "Supporting material (user instructions, summary, notes, etc.)",
]


class ChecklistError(Exception):
    pass


class MissingCriterion(ChecklistError):
    pass


class UnknownMark(ChecklistError):
    pass


class UnknownCriterion(ChecklistError):
    pass


class RubricMismatch(ChecklistError):
    pass


@dataclass(frozen=True)
class Rubric:
    functionality: tuple = tuple(FUNCTIONALITY_CRITERIA)
    quality: tuple = tuple(QUALITY_CRITERIA)

    def criteria(self) -> list:
        return list(self.functionality) + list(self.quality)

    def __len__(self):
        return len(self.functionality) + len(self.quality)


DEFAULT_RUBRIC = Rubric()


@dataclass
class ScoreCard:
    system_name: str
    run_id: str
    marks: dict
    notes: dict = field(default_factory=dict)

    def pass_total(self) -> int:
        return sum(1 for mark in self.marks.values() if mark == MARK_PASS)

    def split_pass_total(self, rubric) -> tuple:
        functionality = sum(1 for c in rubric.functionality
                            if self.marks.get(c) == MARK_PASS)
        quality = sum(1 for c in rubric.quality if self.marks.get(c) == MARK_PASS)
        return functionality, quality

    def to_dict(self) -> dict:
        return {"system_name": self.system_name, "run_id": self.run_id,
                "marks": self.marks, "notes": self.notes}

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def load_card(path) -> ScoreCard:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return ScoreCard(system_name=data["system_name"], run_id=data.get("run_id", ""),
                     marks=dict(data["marks"]), notes=dict(data.get("notes", {})))


def score(marks: dict, notes: dict = None, rubric: Rubric = DEFAULT_RUBRIC,
          system_name: str = "", run_id: str = "") -> ScoreCard:
    """Validate raw marks against the rubric: full coverage, known mark values."""
    notes = notes or {}
    criteria = rubric.criteria()
    unknown = [c for c in marks if c not in criteria]
    if unknown:
        raise UnknownCriterion(f"not in rubric: {unknown[:3]!r}")
    missing = [c for c in criteria if c not in marks]
    if missing:
        raise MissingCriterion(
            f"{len(missing)} criteria without a mark, first: {missing[0]!r}")
    for criterion, mark in marks.items():
        if mark not in VALID_MARKS:
            raise UnknownMark(f"{mark!r} for {criterion!r}")
    return ScoreCard(system_name=system_name, run_id=run_id,
                     marks={c: marks[c] for c in criteria},
                     notes={c: notes[c] for c in criteria if c in notes})


@dataclass
class ComparisonTable:
    criteria: list
    systems: list
    cells: list  # rows follow criteria order, columns follow systems order
    pass_totals: dict

    def to_text(self) -> str:
        width = max(len(c) for c in self.criteria) + 2
        col = max([len(s) for s in self.systems] + [len(MARK_NOT_ASSESSED)]) + 2
        lines = ["".ljust(width) + "".join(s.ljust(col) for s in self.systems)]
        for criterion, row in zip(self.criteria, self.cells):
            lines.append(criterion.ljust(width) + "".join(v.ljust(col) for v in row))
        totals = [f"{self.pass_totals[s]}/{len(self.criteria)}" for s in self.systems]
        lines.append("passes".ljust(width) + "".join(t.ljust(col) for t in totals))
        return "\n".join(lines)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["criterion"] + self.systems)
        for criterion, row in zip(self.criteria, self.cells):
            writer.writerow([criterion] + row)
        writer.writerow(["passes"] + [str(self.pass_totals[s]) for s in self.systems])
        return buf.getvalue()


def compare(cards, rubric: Rubric = DEFAULT_RUBRIC) -> ComparisonTable:
    criteria = rubric.criteria()
    for card in cards:
        if sorted(card.marks) != sorted(criteria):
            raise RubricMismatch(
                f"card {card.system_name!r} scored against a different rubric")
    systems = [card.system_name for card in cards]
    cells = [[card.marks[criterion] for card in cards] for criterion in criteria]
    pass_totals = {card.system_name: card.pass_total() for card in cards}
    return ComparisonTable(criteria=criteria, systems=systems, cells=cells,
                           pass_totals=pass_totals)


def read_marks_csv(source, rubric: Rubric = DEFAULT_RUBRIC):
    """Marks CSV rows: criterion,mark[,note]. The criterion may be the full
    text or a 1-based index into the rubric (functionality first)."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    criteria = rubric.criteria()
    marks, notes = {}, {}
    rows = list(csv.reader(io.StringIO(text)))
    for row in rows:
        if not row or not row[0].strip():
            continue
        key = row[0].strip()
        if key.lower() == "criterion":
            continue
        if key.isdigit():
            idx = int(key)
            if not 1 <= idx <= len(criteria):
                raise UnknownCriterion(f"index {idx} out of rubric range")
            key = criteria[idx - 1]
        marks[key] = row[1].strip() if len(row) > 1 else ""
        if len(row) > 2 and row[2].strip():
            notes[key] = row[2].strip()
    return marks, notes

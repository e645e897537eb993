"""Aggregate coded runs into per-condition counts, merged categories,
role distributions, percent differences versus a control condition, and
ordered sequence strips with tercile summaries."""

from dataclasses import dataclass, field

from .coding import CATEGORY_LABELS, NUM_CATEGORIES

CATCH_ALL = 13

MERGED = {
    "suggestion": (4, 9),
    "orientation": (6, 7),
    "opinion": (5, 8),
}
_MERGED_MEMBERS = {c for pair in MERGED.values() for c in pair}
PLAIN_CELLS = [c for c in range(1, NUM_CATEGORIES + 1) if c not in _MERGED_MEMBERS]

TERCILE_NAMES = ("early", "middle", "late")


@dataclass
class ConditionReport:
    condition_name: str
    runs: int
    counts: dict
    merged_counts: dict
    proportions: dict
    role_distributions: dict
    include_catch_all: bool = False

    def total(self) -> int:
        return sum(self.counts.values())

    def to_dict(self) -> dict:
        return {
            "condition_name": self.condition_name,
            "runs": self.runs,
            "counts": self.counts,
            "merged_counts": self.merged_counts,
            "proportions": self.proportions,
            "role_distributions": self.role_distributions,
            "include_catch_all": self.include_catch_all,
        }

    def to_text(self) -> str:
        lines = [f"condition: {self.condition_name}  (runs: {self.runs}, "
                 f"coded turns: {self.total()})"]
        for cat in sorted(self.counts):
            share = self.proportions.get(cat)
            share_text = f"{share:7.1%}" if share is not None else "      -"
            lines.append(f"  {cat:>2d} {CATEGORY_LABELS[cat]:<22s} "
                         f"{self.counts[cat]:>4d} {share_text}")
        lines.append("  merged: " + ", ".join(
            f"{name}={self.merged_counts[name]}" for name in MERGED))
        return "\n".join(lines)


@dataclass
class DiffReport:
    versus: tuple  # (condition_name, control_name)
    percent_diff: dict  # cell -> percent, or None when the control cell is 0
    raw: tuple  # (condition cell counts, control cell counts)

    def to_dict(self) -> dict:
        return {
            "condition": self.versus[0],
            "control": self.versus[1],
            "percent_diff": self.percent_diff,
            "condition_counts": self.raw[0],
            "control_counts": self.raw[1],
        }

    def to_text(self) -> str:
        cond_counts, control_counts = self.raw
        lines = [f"{self.versus[0]} vs control ({self.versus[1]})"]
        for cell, value in self.percent_diff.items():
            rendered = "undefined (control=0)" if value is None else f"{value:+.1f}%"
            lines.append(f"  {cell:<14s} {rendered:>22s}  "
                         f"({cond_counts[cell]} vs {control_counts[cell]})")
        return "\n".join(lines)


@dataclass
class SequenceStrip:
    sequence: list = field(default_factory=list)  # (turn_index, category)
    terciles: dict = field(default_factory=dict)  # name -> {category: count}

    def to_dict(self) -> dict:
        return {"sequence": self.sequence, "terciles": self.terciles}


def _blank_counts() -> dict:
    return {c: 0 for c in range(1, NUM_CATEGORIES + 1)}


def merged_counts(counts: dict) -> dict:
    return {name: sum(counts.get(c, 0) for c in members)
            for name, members in MERGED.items()}


def _proportions(counts: dict, include_catch_all: bool) -> dict:
    cats = [c for c in counts if include_catch_all or c != CATCH_ALL]
    total = sum(counts[c] for c in cats)
    if total == 0:
        return {}
    return {c: counts[c] / total for c in cats}


def aggregate(coded_runs, include_catch_all: bool = False) -> list:
    """coded_runs: iterable of (condition_name, [CodedTurn with roles]).

    Counts always keep every category including the catch-all; the
    include_catch_all toggle only affects proportions and distributions.
    """
    by_condition = {}
    for condition_name, codes in coded_runs:
        bucket = by_condition.setdefault(
            condition_name, {"runs": 0, "counts": _blank_counts(), "roles": {}})
        bucket["runs"] += 1
        for code in codes:
            bucket["counts"][code.category] += 1
            role_counts = bucket["roles"].setdefault(code.role or "unknown",
                                                     _blank_counts())
            role_counts[code.category] += 1

    reports = []
    for condition_name, bucket in by_condition.items():
        role_distributions = {
            role: _proportions(counts, include_catch_all)
            for role, counts in sorted(bucket["roles"].items())
        }
        reports.append(ConditionReport(
            condition_name=condition_name,
            runs=bucket["runs"],
            counts=bucket["counts"],
            merged_counts=merged_counts(bucket["counts"]),
            proportions=_proportions(bucket["counts"], include_catch_all),
            role_distributions=role_distributions,
            include_catch_all=include_catch_all,
        ))
    return reports


def _cells(report: ConditionReport) -> dict:
    cells = dict(report.merged_counts)
    for cat in PLAIN_CELLS:
        cells[str(cat)] = report.counts.get(cat, 0)
    return cells


def diff_vs_control(cond: ConditionReport, control: ConditionReport) -> DiffReport:
    cond_cells = _cells(cond)
    control_cells = _cells(control)
    percent_diff = {}
    for cell in cond_cells:
        base = control_cells[cell]
        if base > 0:
            percent_diff[cell] = 100.0 * (cond_cells[cell] - base) / base
        else:
            percent_diff[cell] = None  # flagged undefined, never a division error
    return DiffReport(versus=(cond.condition_name, control.condition_name),
                      percent_diff=percent_diff, raw=(cond_cells, control_cells))


def sequence_strip(coded_run) -> SequenceStrip:
    """Ordered (turn_index, category) pairs plus early/middle/late summaries.

    Tercile of position i out of n is i*3//n, so uneven splits lean early.
    """
    ordered = sorted(coded_run, key=lambda c: c.turn_index)
    strip = SequenceStrip()
    strip.sequence = [(c.turn_index, c.category) for c in ordered]
    strip.terciles = {name: {} for name in TERCILE_NAMES}
    n = len(ordered)
    for i, code in enumerate(ordered):
        name = TERCILE_NAMES[i * 3 // n]
        bucket = strip.terciles[name]
        bucket[code.category] = bucket.get(code.category, 0) + 1
    return strip

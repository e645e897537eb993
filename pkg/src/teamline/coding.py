"""Interaction coding: classify transcript turns into the 12 Bales IPA
categories (plus a 13th catch-all) with an LLM provider, and measure rater
agreement with percent agreement and Cohen's kappa."""

import csv
import io
from dataclasses import dataclass

from . import assets
from .provider import ChatMessage, ChatParams, ChatRequest

NUM_CATEGORIES = 13

CATEGORY_LABELS = {
    1: "Shows Solidarity",
    2: "Shows Tension Release",
    3: "Agrees",
    4: "Gives Suggestion",
    5: "Gives Opinion",
    6: "Gives Orientation",
    7: "Asks for Orientation",
    8: "Asks for Opinion",
    9: "Asks for Suggestion",
    10: "Disagrees",
    11: "Shows Tension",
    12: "Shows Antagonism",
    13: "None of the Above",
}

TARGET_MARK = ">>> TARGET:"
CODES_CSV_HEADER = ["turn_index", "category", "rater", "role"]


class CodingError(Exception):
    pass


class LengthMismatch(CodingError):
    pass


@dataclass
class CodedTurn:
    turn_index: int
    category: int
    rater: str = "llm"
    raw_response: str = ""
    parse_failed: bool = False
    role: str = ""

    @property
    def label(self) -> str:
        return CATEGORY_LABELS[self.category]


@dataclass
class AgreementReport:
    n: int
    percent_agreement: float
    kappa: float
    observed_po: float
    expected_pe: float
    confusion: list
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "percent_agreement": self.percent_agreement,
            "kappa": self.kappa,
            "observed_po": self.observed_po,
            "expected_pe": self.expected_pe,
            "degenerate": self.degenerate,
            "confusion": self.confusion,
        }

    def to_text(self) -> str:
        lines = [
            f"n                  {self.n}",
            f"percent agreement  {self.percent_agreement:.6f}",
            f"cohen's kappa      {self.kappa:.6f}",
            f"observed p_o       {self.observed_po:.6f}",
            f"expected p_e       {self.expected_pe:.6f}",
        ]
        if self.degenerate:
            lines.append("note: both raters constant; kappa set by degenerate rule")
        lines.append("")
        lines.append("confusion matrix (rows: rater A, cols: rater B, categories 1-13)")
        header = "    " + " ".join(f"{c:>4d}" for c in range(1, NUM_CATEGORIES + 1))
        lines.append(header)
        for i, row in enumerate(self.confusion, start=1):
            lines.append(f"{i:>3d} " + " ".join(f"{v:>4d}" for v in row))
        return "\n".join(lines)


def build_context(turns, i: int) -> list:
    """Up to two turns either side of turn i, with the target line marked."""
    if not 0 <= i < len(turns):
        raise IndexError(f"turn index {i} out of range")
    lo = max(0, i - 2)
    hi = min(len(turns) - 1, i + 2)
    rendered = []
    for j in range(lo, hi + 1):
        turn = turns[j]
        label = f"{turn.speaker} ({turn.role})"
        if j == i:
            label = f"{TARGET_MARK} {label}"
        rendered.append(ChatMessage(label, turn.message))
    return rendered


def parse_category(text: str):
    """Lenient category read: surrounding whitespace and one trailing period
    are fine; anything else is a parse failure."""
    cleaned = (text or "").strip()
    if cleaned.endswith("."):
        cleaned = cleaned[:-1].strip()
    if cleaned.isdigit():
        value = int(cleaned)
        if 1 <= value <= NUM_CATEGORIES:
            return value
    return None


def classify_turn(turns, i: int, provider, rater: str = "llm",
                  params: ChatParams = None) -> CodedTurn:
    """Single-code one turn. A bad reply earns one retry, then category 13
    with the parse-failure flag set."""
    prompt = assets.load_asset("labeling_prompt")
    params = params or ChatParams(temperature=0.0)
    context = build_context(turns, i)
    request = ChatRequest(system_prompt=prompt, messages=context, params=params)

    response = provider.complete(request)
    category = parse_category(response.text)
    if category is None:
        response = provider.complete(request)
        category = parse_category(response.text)
    if category is None:
        return CodedTurn(turn_index=turns[i].index, category=NUM_CATEGORIES,
                         rater=rater, raw_response=response.text,
                         parse_failed=True, role=turns[i].role)
    return CodedTurn(turn_index=turns[i].index, category=category, rater=rater,
                     raw_response=response.text, role=turns[i].role)


def classify_transcript(turns, provider, rater: str = "llm",
                        params: ChatParams = None) -> list:
    return [classify_turn(turns, i, provider, rater, params)
            for i in range(len(turns))]


def _aligned(a, b):
    index_a = {c.turn_index: c for c in a}
    index_b = {c.turn_index: c for c in b}
    if set(index_a) != set(index_b) or len(index_a) != len(a) or len(index_b) != len(b):
        raise LengthMismatch("rater codings cover different turn index sets")
    if not index_a:
        raise LengthMismatch("empty codings")
    pairs = []
    for key in sorted(index_a):
        pairs.append((index_a[key].category, index_b[key].category))
    return pairs


def percent_agreement(a, b) -> float:
    pairs = _aligned(a, b)
    hits = sum(1 for x, y in pairs if x == y)
    return hits / len(pairs)


def cohens_kappa(a, b) -> AgreementReport:
    pairs = _aligned(a, b)
    n = len(pairs)
    confusion = [[0] * NUM_CATEGORIES for _ in range(NUM_CATEGORIES)]
    for x, y in pairs:
        confusion[x - 1][y - 1] += 1

    p_o = sum(confusion[i][i] for i in range(NUM_CATEGORIES)) / n
    row = [sum(confusion[i][j] for j in range(NUM_CATEGORIES)) for i in range(NUM_CATEGORIES)]
    col = [sum(confusion[i][j] for i in range(NUM_CATEGORIES)) for j in range(NUM_CATEGORIES)]
    p_e = sum(row[c] * col[c] for c in range(NUM_CATEGORIES)) / (n * n)

    degenerate = False
    if p_e >= 1.0:
        # both raters constant: agreement is either perfect or chance-only
        degenerate = True
        kappa = 1.0 if p_o == 1.0 else 0.0
    elif p_o == 1.0:
        kappa = 1.0
    else:
        kappa = (p_o - p_e) / (1.0 - p_e)
    return AgreementReport(n=n, percent_agreement=p_o, kappa=kappa,
                           observed_po=p_o, expected_pe=p_e,
                           confusion=confusion, degenerate=degenerate)


def write_codes_csv(codes, path=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CODES_CSV_HEADER)
    for code in codes:
        writer.writerow([code.turn_index, code.category, code.rater, code.role])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def read_codes_csv(source, default_rater: str = "human") -> list:
    """Accepts the full 4-column layout or a bare `turn_index,category` file."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        return []
    start = 1 if rows[0] and not rows[0][0].strip().isdigit() else 0
    codes = []
    for row in rows[start:]:
        if not row or not row[0].strip():
            continue
        codes.append(CodedTurn(
            turn_index=int(row[0]),
            category=int(row[1]),
            rater=row[2] if len(row) > 2 and row[2] else default_rater,
            role=row[3] if len(row) > 3 else "",
        ))
    return codes

"""Transcript rendering and parsing, including exact round-trips on the golden file."""

from hypothesis import given, settings
from hypothesis import strategies as st

from teamline import assets
from teamline.clock import SimulatedClock, parse_start
from teamline.timeline import (
    KIND_FILE,
    KIND_JOIN,
    KIND_MESSAGE,
    Timeline,
    file_payload,
    join_payload,
    message_payload,
)
from teamline.transcript import (
    CSV_HEADER,
    Turn,
    from_csv,
    parse_markdown,
    parse_markdown_verbose,
    render_markdown,
    render_turn,
    render_turns,
    to_csv,
    turns_from_events,
)


def sample_turn(**overrides):
    base = dict(index=0, speaker="Ada", role="Developer", time_label="6:35 PM",
                message="hello")
    base.update(overrides)
    return Turn(**base)


class TestRender:
    def test_plain_turn(self):
        text = render_turn(sample_turn(message="hello\nworld"))
        assert text == "**Ada (Developer)** 6:35 PM\nhello\nworld"

    def test_file_turn(self):
        text = render_turn(sample_turn(message="body", is_file=True,
                                       filename="Game.java"))
        assert text == "**Ada (Developer)** 6:35 PM\n<File: Game.java>\nbody"

    def test_annotation_in_header(self):
        text = render_turn(sample_turn(annotation="(Introduction)"))
        assert text.splitlines()[0] == "**Ada (Developer)** 6:35 PM (Introduction)"

    def test_turns_joined_by_blank_line(self):
        doc = render_turns([sample_turn(), sample_turn(index=1, speaker="Bo",
                                                       message="again")])
        assert doc.count("\n\n") == 1
        assert doc.endswith("again\n")
        assert render_turns([]) == ""

    def test_header_like_body_line_escaped(self):
        text = render_turn(sample_turn(message="**Eve (Intruder)** 7:00 PM"))
        assert "\n\\**Eve (Intruder)** 7:00 PM" in text

    def test_marker_like_body_line_escaped(self):
        text = render_turn(sample_turn(message="<File: fake.txt>"))
        assert text.endswith("\n\\<File: fake.txt>")


class TestParse:
    def test_round_trip_escaped_bodies(self):
        tricky = [
            "**Eve (Intruder)** 7:00 PM",
            "\\**already escaped",
            "<File: fake.txt>",
            "\\<File: deeper.txt>",
            "ordinary line",
        ]
        turn = sample_turn(message="\n".join(tricky))
        parsed = parse_markdown(render_turns([turn]))
        assert len(parsed) == 1
        assert parsed[0].message == turn.message
        assert not parsed[0].is_file

    def test_file_turn_round_trip(self):
        turn = sample_turn(message="public class G {}", is_file=True,
                           filename="G.java")
        parsed = parse_markdown(render_turns([turn]))[0]
        assert (parsed.is_file, parsed.filename) == (True, "G.java")
        assert parsed.message == "public class G {}"

    def test_junk_before_first_header_is_counted(self):
        doc = "stray line\n\n**Ada (Developer)** 6:35 PM\nhi\n"
        turns, warnings = parse_markdown_verbose(doc)
        assert warnings == 1
        assert len(turns) == 1
        assert turns[0].message == "hi"

    def test_trailing_blank_lines_dropped(self):
        doc = "**Ada (Developer)** 6:35 PM\nhi\n\n   \n"
        assert parse_markdown(doc)[0].message == "hi"

    def test_annotation_parsed(self):
        doc = "**Ada (Developer)** 6:35 PM (Introduction)\nhi\n"
        assert parse_markdown(doc)[0].annotation == "(Introduction)"

    def test_empty_document(self):
        assert parse_markdown("") == []


class TestTurnsFromEvents:
    def test_projection(self):
        clock = SimulatedClock(start_ms=parse_start("2024-04-02T18:35:00"))
        tl = Timeline(clock)
        tl.append("Ada", KIND_JOIN, join_payload("Ada", "Developer"))
        tl.append("Ada", KIND_MESSAGE, message_payload("hi"))
        clock.advance(60)
        tl.append("Ada", KIND_FILE, file_payload("a.py", "code", "x = 1"))
        turns = turns_from_events(tl.snapshot())
        assert len(turns) == 2  # joins are not spoken turns
        assert (turns[0].speaker, turns[0].role, turns[0].time_label) == (
            "Ada", "Developer", "6:35 PM")
        assert turns[1].is_file and turns[1].filename == "a.py"
        assert turns[1].time_label == "6:36 PM"
        assert [t.index for t in turns] == [0, 1]


class TestGolden:
    def test_golden_parses_cleanly(self):
        doc = assets.load_asset("transcript_golden")
        turns, warnings = parse_markdown_verbose(doc)
        assert warnings == 0
        assert len(turns) == 12
        first = turns[0]
        assert (first.speaker, first.role, first.time_label) == (
            "Boshen", "Product Manager", "6:35 PM")
        assert [bool(t.annotation) for t in turns] == [True] * 6 + [False] * 6
        file_turns = [t for t in turns if t.is_file]
        assert [t.filename for t in file_turns] == ["PRD_TicTacToeGame.docx"]

    def test_golden_round_trips_byte_exact(self):
        doc = assets.load_asset("transcript_golden")
        assert render_turns(parse_markdown(doc)) == doc


class TestCsv:
    def test_round_trip_with_tricky_fields(self):
        turns = [
            sample_turn(message='has, comma and "quotes"\nand a newline'),
            sample_turn(index=1, is_file=True, filename="a.py", message="x = 1"),
        ]
        again = from_csv(to_csv(turns))
        assert [(t.speaker, t.role, t.time_label, t.message, t.is_file, t.filename)
                for t in again] == [
            (t.speaker, t.role, t.time_label, t.message, t.is_file, t.filename)
            for t in turns]

    def test_header_row(self):
        assert to_csv([]).strip() == ",".join(CSV_HEADER)


NAME_CHARS = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz "
name_st = (st.text(alphabet=NAME_CHARS, min_size=1, max_size=12)
           .filter(lambda s: s.strip() == s and s.strip()))
time_st = st.builds(lambda h, m, half: f"{h}:{m:02d} {half}",
                    st.integers(1, 12), st.integers(0, 59),
                    st.sampled_from(["AM", "PM"]))
# exclude every splitlines() boundary except \n itself
_EXOTIC_BREAKS = "\r\x0b\x0c\x1c\x1d\x1e\x85  "
body_text = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",),
                           blacklist_characters=_EXOTIC_BREAKS),
    max_size=120)


def representable(message: str) -> bool:
    """Messages whose trailing blank lines or final newline would be lost."""
    if message == "":
        return True
    if message.endswith("\n"):
        return False
    return bool(message.splitlines()[-1].strip())


turn_st = st.builds(
    lambda speaker, role, time, message, is_file: Turn(
        index=0, speaker=speaker, role=role, time_label=time,
        message=message, is_file=is_file,
        filename="shared.txt" if is_file else None),
    name_st, name_st, time_st, body_text.filter(representable), st.booleans())


@settings(max_examples=150, deadline=None)
@given(st.lists(turn_st, max_size=6))
def test_property_render_parse_round_trip(turns):
    turns = [Turn(index=i, speaker=t.speaker, role=t.role, time_label=t.time_label,
                  message=t.message, is_file=t.is_file, filename=t.filename)
             for i, t in enumerate(turns)]
    parsed = parse_markdown(render_turns(turns))
    assert len(parsed) == len(turns)
    for got, want in zip(parsed, turns):
        assert (got.speaker, got.role, got.time_label) == (
            want.speaker, want.role, want.time_label)
        assert got.message == want.message
        assert (got.is_file, got.filename) == (want.is_file, want.filename)

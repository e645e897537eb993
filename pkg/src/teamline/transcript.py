"""Render timelines to markdown transcripts and parse them back into turns.

Transcript format, one block per spoken turn:

    **Name (Role)** 6:35 PM
    message body...

File shares use the same header with a `<File: name>` marker line first.
Body lines that would themselves look like a header are escaped with a
leading backslash on render and unescaped on parse, so round-trips are exact.
"""

import csv
import io
import re
from dataclasses import dataclass

from .clock import time_label
from .timeline import KIND_FILE, KIND_MESSAGE, roles_map

HEADER_RE = re.compile(
    r"^\*\*(?P<speaker>.+?) \((?P<role>.+?)\)\*\* "
    r"(?P<time>\d{1,2}:\d{2} [AP]M)(?: (?P<annotation>.*\S))?\s*$")
FILE_MARKER_RE = re.compile(r"^<File: (?P<filename>.+)>$")
_ESCAPED_RE = re.compile(r"^\\+\*\*")
_ESCAPED_MARKER_RE = re.compile(r"^\\+<File: ")

CSV_HEADER = ["index", "speaker", "role", "time", "message", "is_file", "filename"]


@dataclass
class Turn:
    index: int
    speaker: str
    role: str
    time_label: str
    message: str
    is_file: bool = False
    filename: str = None
    annotation: str = None


def turns_from_events(events) -> list:
    """Project a timeline onto spoken turns (messages and file shares only)."""
    roles = roles_map(events)
    turns = []
    for event in events:
        if event.kind == KIND_MESSAGE:
            turns.append(Turn(
                index=len(turns),
                speaker=event.author,
                role=roles.get(event.author, "Unknown"),
                time_label=time_label(event.wall_time),
                message=event.payload["text"],
            ))
        elif event.kind == KIND_FILE:
            turns.append(Turn(
                index=len(turns),
                speaker=event.author,
                role=roles.get(event.author, "Unknown"),
                time_label=time_label(event.wall_time),
                message=event.payload["content"],
                is_file=True,
                filename=event.payload["filename"],
            ))
    return turns


def _escape_body_line(line: str) -> str:
    if (HEADER_RE.match(line) or _ESCAPED_RE.match(line)
            or FILE_MARKER_RE.match(line) or _ESCAPED_MARKER_RE.match(line)):
        return "\\" + line
    return line


def _unescape_body_line(line: str) -> str:
    if _ESCAPED_RE.match(line) or _ESCAPED_MARKER_RE.match(line):
        return line[1:]
    return line


def render_turn(turn: Turn) -> str:
    header = f"**{turn.speaker} ({turn.role})** {turn.time_label}"
    if turn.annotation:
        header += f" {turn.annotation}"
    body_lines = []
    if turn.is_file:
        body_lines.append(f"<File: {turn.filename}>")
    if turn.message:
        body_lines.extend(_escape_body_line(l) for l in turn.message.splitlines())
    return "\n".join([header] + body_lines)


def render_turns(turns) -> str:
    if not turns:
        return ""
    return "\n\n".join(render_turn(t) for t in turns) + "\n"


def render_markdown(events) -> str:
    return render_turns(turns_from_events(events))


def parse_markdown_verbose(doc: str):
    """Returns (turns, skipped_line_count). Total: never raises on bad input."""
    turns = []
    warnings = 0
    header = None
    body = []

    def flush():
        if header is None:
            return
        lines = list(body)
        while lines and not lines[-1].strip():
            lines.pop()
        # decide file-ness on the raw line: an escaped marker still carries
        # its backslash here, so only a genuine marker can match
        is_file, filename = False, None
        if lines and FILE_MARKER_RE.match(lines[0]):
            is_file = True
            filename = FILE_MARKER_RE.match(lines[0]).group("filename")
            lines = lines[1:]
        lines = [_unescape_body_line(l) for l in lines]
        turns.append(Turn(
            index=len(turns),
            speaker=header["speaker"],
            role=header["role"],
            time_label=header["time"],
            message="\n".join(lines),
            is_file=is_file,
            filename=filename,
            annotation=header["annotation"],
        ))

    for line in doc.splitlines():
        m = HEADER_RE.match(line)
        if m:
            flush()
            header = m.groupdict()
            body = []
        elif header is None:
            if line.strip():
                warnings += 1
        else:
            body.append(line)
    flush()
    return turns, warnings


def parse_markdown(doc: str) -> list:
    turns, _ = parse_markdown_verbose(doc)
    return turns


def to_csv(turns) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for turn in turns:
        writer.writerow([
            turn.index,
            turn.speaker,
            turn.role,
            turn.time_label,
            turn.message,
            "true" if turn.is_file else "false",
            turn.filename or "",
        ])
    return buf.getvalue()


def from_csv(text: str) -> list:
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    turns = []
    for row in rows[1:]:
        if not row:
            continue
        turns.append(Turn(
            index=int(row[0]),
            speaker=row[1],
            role=row[2],
            time_label=row[3],
            message=row[4],
            is_file=row[5] == "true",
            filename=row[6] or None,
        ))
    return turns

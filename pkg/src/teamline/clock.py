"""Session clocks: real wall time for live runs, virtual time for deterministic ones."""

import threading
import time
from datetime import datetime, timezone

DEFAULT_SIM_START = "2024-04-02T18:35:00"


def parse_start(text: str) -> int:
    """Parse an ISO datetime (interpreted as UTC) into epoch milliseconds."""
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp() * 1000)


class RealClock:
    """Thin wrapper over the system clock."""

    def now_ms(self) -> int:
        return int(time.time() * 1000)

    def elapsed_s(self) -> float:
        return time.monotonic() - self._t0 if hasattr(self, "_t0") else 0.0

    def start(self):
        self._t0 = time.monotonic()

    def sleep(self, seconds: float):
        if seconds > 0:
            time.sleep(seconds)


class SimulatedClock:
    """Virtual clock that only moves when told to.

    now_ms() is derived from a fixed start instant plus the virtual elapsed
    seconds, so exported timestamps are reproducible run to run.
    """

    def __init__(self, start_ms: int = None):
        if start_ms is None:
            start_ms = parse_start(DEFAULT_SIM_START)
        self.start_ms = start_ms
        self._elapsed = 0.0
        self._lock = threading.Lock()

    def now_ms(self) -> int:
        with self._lock:
            return self.start_ms + int(self._elapsed * 1000)

    def elapsed_s(self) -> float:
        with self._lock:
            return self._elapsed

    def start(self):
        pass

    def sleep(self, seconds: float):
        self.advance(seconds)

    def advance(self, seconds: float):
        if seconds < 0:
            raise ValueError("cannot move a clock backwards")
        with self._lock:
            self._elapsed += seconds

    def advance_to(self, elapsed_s: float):
        """Jump to an absolute virtual elapsed time, never backwards."""
        with self._lock:
            if elapsed_s > self._elapsed:
                self._elapsed = elapsed_s


def time_label(wall_ms: int) -> str:
    """Render epoch milliseconds as an 'H:MM AM/PM' label (session-local, UTC based)."""
    dt = datetime.fromtimestamp(wall_ms / 1000, tz=timezone.utc)
    hour = dt.hour % 12 or 12
    half = "AM" if dt.hour < 12 else "PM"
    return f"{hour}:{dt.minute:02d} {half}"

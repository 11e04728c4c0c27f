"""Line-delimited event log: ``time_ms,event,flow_id,bytes,detail``.

The log is the ground truth for post-hoc analysis: run metrics are a pure
function of the frame events recorded here.
"""
from __future__ import annotations

from dataclasses import dataclass

LEVEL_FRAMES = "frames"
LEVEL_FULL = "full"

# events kept at the compact "frames" level
_FRAME_EVENTS = frozenset({"frame_encode", "frame_done", "run_info"})


@dataclass(frozen=True)
class EventRecord:
    time_ms: float
    event: str
    flow_id: int
    nbytes: int
    detail: str

    def line(self) -> str:
        # repr keeps the full float so metrics recomputed from the log are
        # bit-identical to the in-memory ones
        return (f"{self.time_ms!r},{self.event},{self.flow_id},"
                f"{self.nbytes},{self.detail}")


class EventLog:
    """Append-only in-memory log with a line-format writer."""

    def __init__(self, level: str = LEVEL_FULL):
        if level not in (LEVEL_FRAMES, LEVEL_FULL):
            raise ValueError(f"unknown log level {level!r}")
        self.level = level
        self.records: list[EventRecord] = []

    def add(self, time_ms: float, event: str, flow_id: int, nbytes: int,
            detail: str = "") -> None:
        if self.level == LEVEL_FRAMES and event not in _FRAME_EVENTS:
            return
        self.records.append(EventRecord(time_ms, event, flow_id, nbytes, detail))

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("time_ms,event,flow_id,bytes,detail\n")
            for rec in self.records:
                fh.write(rec.line() + "\n")


def parse_event_log(path) -> list[EventRecord]:
    records: list[EventRecord] = []
    with open(path) as fh:
        header = fh.readline()
        if header.strip() != "time_ms,event,flow_id,bytes,detail":
            raise ValueError(f"{path}: not an event log")
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            time_s, event, flow_s, bytes_s, detail = line.split(",", 4)
            records.append(EventRecord(float(time_s), event, int(flow_s),
                                       int(bytes_s), detail))
    return records

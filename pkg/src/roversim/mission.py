"""Append-only mission log: line-delimited JSON records, strictly ordered by
(sim_time, monotone counter), written deterministically so same-seed runs
produce byte-identical files.  A write failure disables recording and never
stops the simulation loop."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import IO, Iterable

log = logging.getLogger(__name__)

RECORD_KINDS = (
    "Header",
    "CmdApplied",
    "CmdDropped",
    "Telemetry",
    "FrameEmitted",
    "Collision",
    "BatteryOut",
    "WatchdogStop",
)


@dataclass(frozen=True)
class MissionRecord:
    sim_time_s: float
    n: int  # monotone counter, disambiguates same-tick events
    tick: int
    kind: str
    detail: dict

    def to_json_line(self) -> str:
        obj = {"t": self.sim_time_s, "n": self.n, "tick": self.tick, "kind": self.kind,
               "d": self.detail}
        return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"

    @staticmethod
    def from_json_line(line: str) -> "MissionRecord":
        obj = json.loads(line)
        return MissionRecord(obj["t"], obj["n"], obj["tick"], obj["kind"], obj["d"])


class MissionLog:
    """Writer around an optional text sink; with no sink it only counts."""

    def __init__(self, sink: IO[str] | None):
        self._sink = sink
        self._counter = 0
        self.records_written = 0

    def append(self, kind: str, sim_time_s: float, tick: int, detail: dict) -> MissionRecord:
        if kind not in RECORD_KINDS:
            raise ValueError(f"unknown record kind {kind!r}")
        rec = MissionRecord(sim_time_s, self._counter, tick, kind, detail)
        self._counter += 1
        if self._sink is not None:
            try:
                self._sink.write(rec.to_json_line())
                self._sink.flush()
                self.records_written += 1
            except OSError as e:
                log.error("mission log write failed, recording disabled: %s", e)
                self._sink = None
        return rec

    def close(self) -> None:
        if self._sink is not None:
            try:
                self._sink.close()
            except OSError:
                pass
            self._sink = None


def read_mission(path: str) -> list[MissionRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if line.strip():
                records.append(MissionRecord.from_json_line(line))
    return records


def kinds_in_order(records: Iterable[MissionRecord], wanted: list[str]) -> bool:
    """True if `wanted` appears as a subsequence of the record kinds."""
    it = iter(wanted)
    try:
        nxt = next(it)
    except StopIteration:
        return True
    for rec in records:
        if rec.kind == nxt:
            try:
                nxt = next(it)
            except StopIteration:
                return True
    return False

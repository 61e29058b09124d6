"""Line-delimited JSON traces: one header line, then one record per action."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterable, Iterator, List, Optional

SCHEMA = "payplace-trace/1"


@dataclass(frozen=True)
class Record:
    tick: int
    actor: str
    action: str
    reason: Optional[str]
    state_hash: str
    data: Dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class Violation:
    probe: str
    tick: int
    detail: str


@dataclass
class Trace:
    scenario: str
    seed: int
    records: List[Record] = field(default_factory=list)
    violations: List[Violation] = field(default_factory=list)
    notarizations: List[Dict[str, Any]] = field(default_factory=list)
    final: Dict[str, Any] = field(default_factory=dict)

    def log(self, record: Record) -> None:
        self.records.append(record)

    def flag(self, probe: str, tick: int, detail: str) -> None:
        self.violations.append(Violation(probe, tick, detail))

    def select(self, action: Optional[str] = None, actor: Optional[str] = None) -> List[Record]:
        return [r for r in self.records
                if (action is None or r.action == action) and (actor is None or r.actor == actor)]

    @property
    def ok(self) -> bool:
        return not self.violations

    def lines(self) -> Iterator[str]:
        header = {"schema": SCHEMA, "scenario": self.scenario, "seed": self.seed}
        yield json.dumps(header, sort_keys=True, separators=(",", ":"))
        for r in self.records:
            yield r.to_json()
        for v in self.violations:
            yield json.dumps({"violation": asdict(v)}, sort_keys=True, separators=(",", ":"))
        yield json.dumps({"final": self.final}, sort_keys=True, separators=(",", ":"))

    def dumps(self) -> str:
        return "\n".join(self.lines()) + "\n"


def read_trace(lines: Iterable[str]) -> Trace:
    it = iter(lines)
    try:
        header = json.loads(next(it))
    except (StopIteration, json.JSONDecodeError):
        raise ValueError("trace is empty or has no header") from None
    if header.get("schema") != SCHEMA:
        raise ValueError(f"unsupported trace schema {header.get('schema')!r}")
    trace = Trace(header["scenario"], header["seed"])
    for n, line in enumerate(it, start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {n}: {exc}") from None
        if "violation" in obj:
            trace.violations.append(Violation(**obj["violation"]))
        elif "final" in obj:
            trace.final = obj["final"]
        else:
            trace.records.append(Record(**obj))
    return trace

"""Contact traces: ONE-style ``CONN`` event files and a synthetic community generator.

A trace line has the form ``<time> CONN <id1> <id2> <up|down>``. Blank lines
and ``#`` comments are skipped. :func:`write_contact_trace` prefixes
non-empty traces with a ``# oppctl nodes=N duration=T`` comment so that
isolated trailing nodes and a quiet tail survive a round trip; the parser
honours that comment and otherwise derives both values from the events.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .model import ContactEvent, Direction, NodeId, SimTime


class TraceError(ValueError):
    """Malformed or inconsistent trace. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class TraceParseError(TraceError):
    pass


class TraceValidationError(TraceError):
    pass


@dataclass(frozen=True)
class ContactTrace:
    events: tuple[ContactEvent, ...]
    node_count: int
    duration: SimTime

    def __post_init__(self) -> None:
        check_pairing(self.events)
        for ev in self.events:
            if max(ev.a, ev.b) >= self.node_count:
                raise TraceValidationError(f"node id {max(ev.a, ev.b)} >= node_count {self.node_count}")
        if any(e2.time < e1.time for e1, e2 in zip(self.events, self.events[1:])):
            raise TraceValidationError("events are not time ordered")


@dataclass(frozen=True)
class CommunityParams:
    groups: int
    nodes_per_group: int
    intra_rate: float  # contacts per node pair per hour
    inter_rate: float
    mean_contact_duration: float  # seconds
    duration: SimTime
    seed: int = 0

    def __post_init__(self) -> None:
        if self.groups < 1 or self.nodes_per_group < 1:
            raise ValueError("a community trace needs at least one node")
        if not self.intra_rate >= self.inter_rate >= 0:
            raise ValueError("rates must satisfy intra_rate >= inter_rate >= 0")
        if self.mean_contact_duration <= 0:
            raise ValueError("mean_contact_duration must be positive")
        if self.duration < 0:
            raise ValueError("duration must be non-negative")

    @property
    def node_count(self) -> int:
        return self.groups * self.nodes_per_group


def check_pairing(events, lines=None) -> None:
    """Raise :class:`TraceValidationError` on a down without an up or a doubled up."""
    up: set[tuple[NodeId, NodeId]] = set()
    for i, ev in enumerate(events):
        line = lines[i] if lines is not None else None
        if ev.time < 0:
            raise TraceValidationError(f"negative time {ev.time}", line)
        if ev.direction is Direction.UP:
            if ev.pair in up:
                raise TraceValidationError(f"pair {ev.pair} already up at t={ev.time}", line)
            up.add(ev.pair)
        else:
            if ev.pair not in up:
                raise TraceValidationError(f"down without up for pair {ev.pair} at t={ev.time}", line)
            up.remove(ev.pair)


_HEADER = re.compile(r"#\s*oppctl\s+nodes=(\d+)\s+duration=(\S+)\s*$")


def parse_contact_trace(text: str) -> ContactTrace:
    events: list[ContactEvent] = []
    lines: list[int] = []
    header_nodes, header_duration = 0, 0.0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = _HEADER.match(line)
            if m:
                header_nodes, header_duration = int(m.group(1)), float(m.group(2))
            continue
        fields = line.split()
        if len(fields) != 5 or fields[1] != "CONN" or fields[4] not in ("up", "down"):
            raise TraceParseError(f"expected '<time> CONN <id1> <id2> <up|down>', got {line!r}", lineno)
        try:
            time = float(fields[0])
            a, b = int(fields[2]), int(fields[3])
        except ValueError:
            raise TraceParseError(f"bad number in {line!r}", lineno) from None
        if time != time or time in (float("inf"), float("-inf")):
            raise TraceParseError(f"non-finite time in {line!r}", lineno)
        if a < 0 or b < 0:
            raise TraceParseError(f"negative node id in {line!r}", lineno)
        if a == b:
            raise TraceValidationError(f"node {a} in contact with itself", lineno)
        events.append(ContactEvent(time, a, b, Direction(fields[4])))
        lines.append(lineno)

    for ev, lineno in zip(events, lines):
        if ev.time < 0:
            raise TraceValidationError(f"negative time {ev.time}", lineno)
    # stable: simultaneous events keep file order
    order = sorted(range(len(events)), key=lambda i: events[i].time)
    events = [events[i] for i in order]
    lines = [lines[i] for i in order]
    check_pairing(events, lines)

    node_count = max([header_nodes] + [max(e.a, e.b) + 1 for e in events])
    duration = max([header_duration] + [e.time for e in events])
    return ContactTrace(tuple(events), node_count, duration)


def _fmt_time(t: float) -> str:
    return repr(float(t))


def write_contact_trace(trace: ContactTrace) -> str:
    if not trace.events and trace.node_count == 0 and trace.duration == 0:
        return ""
    out = [f"# oppctl nodes={trace.node_count} duration={_fmt_time(trace.duration)}"]
    for ev in trace.events:
        out.append(f"{_fmt_time(ev.time)} CONN {ev.a} {ev.b} {ev.direction.value}")
    return "\n".join(out) + "\n"


def generate_community_trace(params: CommunityParams) -> ContactTrace:
    """Draw pairwise contacts for a grouped population.

    Each pair gets Poisson contact starts at the intra- or inter-group rate.
    Durations are exponential, cut at the pair's next start and at the end of
    the trace; times are rounded to milliseconds. Node ``i`` is in group
    ``i // nodes_per_group``.
    """
    n = params.node_count
    rng = np.random.default_rng(params.seed)
    raw: list[tuple[float, int, int, int, Direction]] = []
    horizon = float(params.duration)
    for a in range(n):
        for b in range(a + 1, n):
            same = a // params.nodes_per_group == b // params.nodes_per_group
            rate = (params.intra_rate if same else params.inter_rate) / 3600.0
            if rate <= 0:
                continue
            starts = []
            t = rng.exponential(1.0 / rate)
            while t < horizon:
                starts.append(round(t, 3))
                t += rng.exponential(1.0 / rate)
            lengths = rng.exponential(params.mean_contact_duration, size=len(starts))
            for i, start in enumerate(starts):
                limit = starts[i + 1] if i + 1 < len(starts) else horizon
                end = min(round(start + lengths[i], 3), limit)
                if end <= start:
                    continue
                # the sequence number keeps a down before the next up at equal times
                raw.append((start, a, b, 2 * i, Direction.UP))
                raw.append((end, a, b, 2 * i + 1, Direction.DOWN))
    raw.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    events = tuple(ContactEvent(t, a, b, d) for t, a, b, _, d in raw)
    return ContactTrace(events, n, horizon)

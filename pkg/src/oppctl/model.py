"""Domain types shared by the simulator: messages, contacts and node buffers."""

from __future__ import annotations

import enum
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional, Union

SimTime = float
NodeId = int
MessageId = int


class MessageKind(enum.IntEnum):
    # Values double as transfer priority (lower goes first on a link).
    DIRECTIVE = 0
    METRIC = 1
    DATA = 2


class Broadcast:
    """Destination of a directive: every node."""

    def __repr__(self) -> str:
        return "Broadcast"


class ControllerGroup:
    """Destination of a metric: whichever controller it reaches first."""

    def __repr__(self) -> str:
        return "ControllerGroup"


BROADCAST = Broadcast()
CONTROLLERS = ControllerGroup()

Destination = Union[NodeId, Broadcast, ControllerGroup]


@dataclass(frozen=True)
class MetricPayload:
    drop_count: int
    window_end: SimTime
    sensor: NodeId

    def __post_init__(self) -> None:
        if self.drop_count < 0:
            raise ValueError("drop_count must be non-negative")


@dataclass(frozen=True)
class DirectivePayload:
    new_rd: float
    issued_at: SimTime
    controller: NodeId

    def __post_init__(self) -> None:
        if not self.new_rd >= 1:
            raise ValueError(f"directive replication degree {self.new_rd} < 1")

    @property
    def freshness(self) -> tuple[float, int]:
        """Sort key used to discard stale directives (newer wins, then higher controller id)."""
        return (self.issued_at, self.controller)


@dataclass(frozen=True)
class Message:
    """One copy of a message as held by a single node.

    ``copies_left`` is the spray budget carried by this copy; ``None`` marks
    unlimited replication (Epidemic).
    """

    id: MessageId
    kind: MessageKind
    source: NodeId
    destination: Destination
    size: int
    created_at: SimTime
    copies_left: Optional[int] = None
    ttl: Optional[float] = None
    payload: Union[MetricPayload, DirectivePayload, None] = None

    def __post_init__(self) -> None:
        if self.size <= 0:
            raise ValueError("message size must be positive")
        if self.copies_left is not None and self.copies_left < 1:
            raise ValueError("a live copy needs copies_left >= 1")
        if self.kind is MessageKind.METRIC:
            if not isinstance(self.payload, MetricPayload) or self.destination is not CONTROLLERS:
                raise ValueError("metric messages carry a MetricPayload to the controller group")
        elif self.kind is MessageKind.DIRECTIVE:
            if not isinstance(self.payload, DirectivePayload) or self.destination is not BROADCAST:
                raise ValueError("directive messages carry a DirectivePayload to every node")

    def with_copies(self, copies: Optional[int]) -> "Message":
        return replace(self, copies_left=copies)

    def expired(self, now: SimTime) -> bool:
        return self.ttl is not None and now >= self.created_at + self.ttl


class Direction(enum.Enum):
    UP = "up"
    DOWN = "down"


@dataclass(frozen=True)
class ContactEvent:
    time: SimTime
    a: NodeId
    b: NodeId
    direction: Direction

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise ValueError(f"contact between node {self.a} and itself")

    @property
    def pair(self) -> tuple[NodeId, NodeId]:
        return (self.a, self.b) if self.a < self.b else (self.b, self.a)


class DropPolicy(enum.Enum):
    DROP_OLDEST = "drop_oldest"


class DuplicateMessage(Exception):
    """Raised by :meth:`Buffer.insert` when the id is already stored."""


@dataclass
class InsertOutcome:
    accepted: bool
    dropped: list[Message] = field(default_factory=list)


class Buffer:
    """Byte-bounded message store that remembers arrival order."""

    def __init__(self, capacity: int) -> None:
        if capacity <= 0:
            raise ValueError("buffer capacity must be positive")
        self.capacity = capacity
        self.occupancy = 0
        self._stored: OrderedDict[MessageId, Message] = OrderedDict()

    def __contains__(self, msg_id: object) -> bool:
        return msg_id in self._stored

    def __len__(self) -> int:
        return len(self._stored)

    def __iter__(self) -> Iterator[Message]:
        return iter(self._stored.values())

    def get(self, msg_id: MessageId) -> Optional[Message]:
        return self._stored.get(msg_id)

    def ids(self) -> frozenset[MessageId]:
        return frozenset(self._stored)

    def insert(self, msg: Message, policy: DropPolicy = DropPolicy.DROP_OLDEST) -> InsertOutcome:
        if msg.id in self._stored:
            raise DuplicateMessage(msg.id)
        if msg.size > self.capacity:
            return InsertOutcome(False, [msg])
        if policy is not DropPolicy.DROP_OLDEST:
            raise ValueError(f"unsupported drop policy {policy}")
        dropped = []
        while self.occupancy + msg.size > self.capacity:
            _, victim = self._stored.popitem(last=False)
            self.occupancy -= victim.size
            dropped.append(victim)
        self._stored[msg.id] = msg
        self.occupancy += msg.size
        return InsertOutcome(True, dropped)

    def remove(self, msg_id: MessageId) -> Optional[Message]:
        msg = self._stored.pop(msg_id, None)
        if msg is not None:
            self.occupancy -= msg.size
        return msg

    def update(self, msg: Message) -> None:
        """Replace a stored copy in place (keeps its arrival position)."""
        old = self._stored[msg.id]
        if old.size != msg.size:
            raise ValueError("a stored copy cannot change size")
        self._stored[msg.id] = msg


def buffer_insert(buffer: Buffer, msg: Message, policy: DropPolicy = DropPolicy.DROP_OLDEST) -> InsertOutcome:
    return buffer.insert(msg, policy)


def buffer_remove(buffer: Buffer, msg_id: MessageId) -> Optional[Message]:
    return buffer.remove(msg_id)

"""Store-carry-forward strategies and the per-copy forwarding rules.

Epidemic offers every message the peer lacks and keeps its own copy.
StaticSpray and Controlled are binary spray-and-wait: a copy with budget
``n > 1`` hands ``n // 2`` to the peer and keeps the rest; a copy with
budget 1 waits until it meets its destination. They differ only in how the
budget of a new message is chosen (fixed limit vs. latest directive).
Metrics and directives follow the same spray rule as data.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Optional, Union

from .model import Message, MessageId, MessageKind, NodeId

if TYPE_CHECKING:
    from .engine import NodeState


@dataclass(frozen=True)
class Epidemic:
    name = "epidemic"


@dataclass(frozen=True)
class StaticSpray:
    limit: int = 10
    name = "static"

    def __post_init__(self) -> None:
        if self.limit < 1:
            raise ValueError("spray limit must be >= 1")


@dataclass(frozen=True)
class Controlled:
    name = "controlled"


Strategy = Union[Epidemic, StaticSpray, Controlled]


def strategy_from_name(name: str, limit: int = 10) -> Strategy:
    name = name.strip().lower()
    if name == "epidemic":
        return Epidemic()
    if name in ("static", "staticspray", "spray"):
        return StaticSpray(limit)
    if name in ("controlled", "control"):
        return Controlled()
    raise ValueError(f"unknown strategy {name!r}")


class TransferKind(enum.Enum):
    COPY = "copy"
    HANDOFF = "handoff"


@dataclass(frozen=True)
class SummaryVector:
    """What a peer advertises at contact start.

    ``ids`` holds the buffered message ids plus ids the peer has already
    delivered or consumed, so those are never offered back to it.
    """

    node: NodeId
    ids: frozenset
    is_controller: bool = False

    def __contains__(self, msg_id: object) -> bool:
        return msg_id in self.ids


@dataclass(frozen=True)
class Offer:
    msg_id: MessageId
    kind: TransferKind
    copies: Optional[int]  # budget the receiver's copy will carry


def is_destination(msg: Message, peer: NodeId, peer_is_controller: bool) -> bool:
    if msg.kind is MessageKind.DATA:
        return msg.destination == peer
    if msg.kind is MessageKind.METRIC:
        return peer_is_controller
    return False


def decide(strategy: Strategy, msg: Message, peer: NodeId, peer_is_controller: bool) -> Optional[Offer]:
    """Forwarding decision for one copy toward a peer that lacks it."""
    if isinstance(strategy, Epidemic) or msg.copies_left is None:
        return Offer(msg.id, TransferKind.COPY, msg.copies_left)
    if is_destination(msg, peer, peer_is_controller):
        return Offer(msg.id, TransferKind.HANDOFF, msg.copies_left)
    if msg.copies_left > 1:
        return Offer(msg.id, TransferKind.COPY, msg.copies_left // 2)
    return None


def _order_key(msg: Message):
    return (msg.kind, msg.created_at, msg.id)


def on_contact(
    strategy: Strategy,
    node: "NodeState",
    peer: SummaryVector,
    messages: Optional[Iterable[Message]] = None,
) -> list[Offer]:
    """Ordered send list from ``node`` toward ``peer``.

    Directives first, then metrics, then data, each oldest-created first.
    ``messages`` restricts the candidates (defaults to the whole buffer).
    """
    candidates = node.buffer if messages is None else messages
    offers = []
    for msg in sorted(candidates, key=_order_key):
        if msg.id in peer:
            continue
        offer = decide(strategy, msg, peer.node, peer.is_controller)
        if offer is not None:
            offers.append(offer)
    return offers


class Receipt(enum.Enum):
    DELIVER = "deliver"
    STORE = "store"
    # a controller folds a metric or a peer controller's directive
    CONSUME = "consume"
    # a node adopts a fresh directive, then stores it for onward spreading
    APPLY = "apply"
    DISCARD = "discard"


def on_receive(node: "NodeState", msg: Message) -> Receipt:
    if msg.id in node.buffer or msg.id in node.seen:
        return Receipt.DISCARD
    if msg.kind is MessageKind.DATA:
        return Receipt.DELIVER if msg.destination == node.id else Receipt.STORE
    if msg.kind is MessageKind.METRIC:
        return Receipt.CONSUME if node.is_controller else Receipt.STORE
    d = msg.payload
    if node.is_controller:
        return Receipt.DISCARD if d.controller == node.id else Receipt.CONSUME
    if node.last_applied is not None and d.freshness <= node.last_applied:
        return Receipt.DISCARD
    return Receipt.APPLY

"""Congestion sensing and the replication-degree controller.

Nodes count data drops over a sensing window and report the count in a
metric message. A controller folds every metric it receives during its own
window into an EWMA, compares the result against a drop threshold and
announces a new replication degree (RD) in a directive.

In feedback-loop terms the reference is "no congestion", the measured
output is the aggregated drop count, the control input is the new RD and
the error term is realised by the threshold comparison: below threshold the
RD grows, at or above it the RD shrinks.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

from .model import (
    BROADCAST,
    CONTROLLERS,
    DirectivePayload,
    Message,
    MessageKind,
    MetricPayload,
    NodeId,
    SimTime,
)

if TYPE_CHECKING:
    from .engine import NodeState


class ConfigError(ValueError):
    """Invalid parameter value; ``key`` names the offending setting when known."""

    def __init__(self, message: str, key: str | None = None) -> None:
        self.key = key
        super().__init__(message)


class UpdateMode(enum.Enum):
    # Multiplicative: DECREASE is rd*k, INCREASE is rd + rd*k.
    ALGORITHM = "algorithm"
    # Additive and proportional to congestion: rd -/+ k*congestion.
    EQUATION = "equation"


def check_alpha(alpha: float) -> None:
    if not 0 < alpha <= 1:
        raise ConfigError(f"EWMA alpha must be in (0, 1], got {alpha}", "control.alpha")


def ewma(acc: Optional[float], reading: float, alpha: float) -> float:
    """Fold ``reading`` into ``acc``; an empty accumulator takes the reading as is."""
    check_alpha(alpha)
    if acc is None:
        return float(reading)
    return (1 - alpha) * acc + alpha * reading


def replication_copies(rd: float) -> int:
    """Integer copy budget for a new message (round half to even, at least one)."""
    return max(1, round(rd))


@dataclass
class SensorState:
    window_s: float
    drop_count: int = 0

    def record_drop(self, n: int = 1) -> None:
        self.drop_count += n


@dataclass
class ControllerState:
    rd_default: float = 10.0
    k: float = 0.2
    alpha: float = 0.8
    threshold: float = 10.0
    window_s: float = 90.0
    rd_max: float = 64.0
    update_mode: UpdateMode = UpdateMode.ALGORITHM
    rd_current: Optional[float] = None
    congestion: Optional[float] = None
    rd_from_other_ctrls_avg: Optional[float] = None

    def __post_init__(self) -> None:
        check_alpha(self.alpha)
        if not 0 < self.k <= 1:
            raise ConfigError(f"proportional factor k must be in (0, 1], got {self.k}", "control.k")
        if self.threshold < 0:
            raise ConfigError("threshold must be non-negative", "control.threshold")
        if self.rd_default < 1:
            raise ConfigError("rd_default must be >= 1", "control.rd_default")
        if self.rd_max < self.rd_default:
            raise ConfigError("rd_max must be >= rd_default", "control.rd_max")
        if self.rd_current is None:
            self.rd_current = float(self.rd_default)

    def fold_metric(self, drop_count: float) -> None:
        self.congestion = ewma(self.congestion, drop_count, self.alpha)

    def fold_peer_directive(self, new_rd: float) -> None:
        self.rd_from_other_ctrls_avg = ewma(self.rd_from_other_ctrls_avg, new_rd, self.alpha)


def rd_update(state: ControllerState, congestion: float) -> float:
    rd = state.rd_current
    congested = congestion >= state.threshold
    if state.update_mode is UpdateMode.ALGORITHM:
        new_rd = rd * state.k if congested else rd + rd * state.k
    else:
        new_rd = rd - state.k * congestion if congested else rd + state.k * congestion
    return min(max(new_rd, 1.0), state.rd_max)


def close_controller_window(state: ControllerState, injected: Optional[float] = None) -> float:
    """End one control cycle and return the RD to announce.

    A window without metrics counts as zero congestion. ``injected``
    overrides the aggregated congestion (used to drive the loop in tests).
    """
    congestion = state.congestion if state.congestion is not None else 0.0
    if injected is not None:
        congestion = injected
    new_rd = rd_update(state, congestion)
    if state.rd_from_other_ctrls_avg is not None:
        new_rd = ewma(new_rd, state.rd_from_other_ctrls_avg, state.alpha)
    new_rd = max(new_rd, 1.0)
    state.rd_current = new_rd
    state.congestion = None
    state.rd_from_other_ctrls_avg = None
    return new_rd


def controller_window_close(
    state: ControllerState,
    now: SimTime,
    controller: NodeId,
    msg_id: int,
    size: int = 5,
    ttl: Optional[float] = None,
    injected: Optional[float] = None,
) -> Message:
    new_rd = close_controller_window(state, injected)
    return Message(
        id=msg_id,
        kind=MessageKind.DIRECTIVE,
        source=controller,
        destination=BROADCAST,
        size=size,
        created_at=now,
        copies_left=replication_copies(new_rd),
        ttl=ttl,
        payload=DirectivePayload(new_rd, now, controller),
    )


def sensor_window_close(
    sensor: SensorState,
    node: NodeId,
    current_rd: float,
    now: SimTime,
    msg_id: int,
    size: int = 21,
    ttl: Optional[float] = None,
) -> Message:
    payload = MetricPayload(sensor.drop_count, now, node)
    sensor.drop_count = 0
    return Message(
        id=msg_id,
        kind=MessageKind.METRIC,
        source=node,
        destination=CONTROLLERS,
        size=size,
        created_at=now,
        copies_left=replication_copies(current_rd),
        ttl=ttl,
        payload=payload,
    )


def apply_directive(node: "NodeState", d: DirectivePayload) -> bool:
    """Adopt ``d`` if it is fresher than the last applied directive.

    Only the RD used for messages created from now on changes; copies
    already in the buffer keep their budget. Returns False for a stale
    directive.
    """
    if node.last_applied is not None and d.freshness <= node.last_applied:
        return False
    node.current_rd = d.new_rd
    node.last_applied = d.freshness
    return True

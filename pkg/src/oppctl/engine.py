"""Deterministic discrete-event simulation of a contact-trace driven network.

Events at the same instant run in a fixed category order: transfer
completions, trace contacts (in trace order), data generation, sensor
windows, controller windows, control-message expiry. Within a category,
ties go to the lower node id (or link pair), then to scheduling order.

Links are half-duplex: one transfer at a time, taking ``size / bandwidth``
seconds. A transfer's forwarding decision is re-checked when it completes,
so a copy that the sender lost meanwhile is never delivered and spray
budgets are split only on success.
"""

from __future__ import annotations

import hashlib
import heapq
import json
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from . import control, routing
from .control import ConfigError, ControllerState, SensorState, UpdateMode
from .model import (
    Buffer,
    DropPolicy,
    Direction,
    Message,
    MessageId,
    MessageKind,
    NodeId,
    SimTime,
)
from .report import RunReport
from .routing import Controlled, Epidemic, Receipt, StaticSpray, Strategy, SummaryVector, TransferKind
from .trace import ContactTrace, write_contact_trace

MB = 1024 * 1024

COMPLETION, CONTACT, GENERATE, SENSOR, CONTROLLER, EXPIRY = range(6)


@dataclass(frozen=True)
class SimParams:
    """Simulation knobs; defaults are the reference settings (MB = 2**20 bytes)."""

    bandwidth: float = 100 * MB  # bytes per second
    buffer_bytes: int = 30 * MB
    drop_policy: DropPolicy = DropPolicy.DROP_OLDEST
    transmission_range_m: float = 100.0  # informational; contacts come from the trace
    data_size_min: int = 600
    data_size_max: int = MB
    data_interval_min: float = 25.0
    data_interval_max: float = 35.0
    data_ttl: Optional[float] = None
    generate_data: bool = True
    metric_interval: float = 60.0
    directive_interval: float = 90.0
    alpha: float = 0.8
    k: float = 0.2
    threshold: float = 10.0
    rd_default: float = 10.0
    rd_max: float = 64.0
    metric_size: int = 21
    directive_size: int = 5
    metric_ttl: Optional[float] = None  # None: twice the metric interval
    directive_ttl: Optional[float] = None  # None: twice the directive interval
    update_mode: UpdateMode = UpdateMode.ALGORITHM
    count_control_drops: bool = False
    inject_congestion: Optional[float] = None
    duration: Optional[float] = None  # None: the trace duration

    def validate(self) -> None:
        def need(cond: bool, key: str, what: str) -> None:
            if not cond:
                raise ConfigError(f"{key}: {what}", key)

        need(self.bandwidth > 0, "engine.bandwidth", "must be positive")
        need(self.buffer_bytes > 0, "engine.buffer_bytes", "must be positive")
        need(0 < self.data_size_min <= self.data_size_max, "data.size_min", "need 0 < size_min <= size_max")
        need(
            0 < self.data_interval_min <= self.data_interval_max,
            "data.interval_min",
            "need 0 < interval_min <= interval_max",
        )
        need(self.data_ttl is None or self.data_ttl > 0, "data.ttl_s", "must be positive")
        need(self.metric_interval > 0, "control.metric_interval", "must be positive")
        need(self.directive_interval > 0, "control.directive_interval", "must be positive")
        need(self.metric_size > 0, "control.metric_size", "must be positive")
        need(self.directive_size > 0, "control.directive_size", "must be positive")
        need(self.duration is None or self.duration >= 0, "sim.duration", "must be non-negative")
        need(self.inject_congestion is None or self.inject_congestion >= 0, "control.inject_congestion",
             "must be non-negative")
        # raises ConfigError naming the key
        self.controller_state()

    def controller_state(self) -> ControllerState:
        return ControllerState(
            rd_default=self.rd_default,
            k=self.k,
            alpha=self.alpha,
            threshold=self.threshold,
            window_s=self.directive_interval,
            rd_max=self.rd_max,
            update_mode=self.update_mode,
        )

    @property
    def metric_ttl_s(self) -> float:
        return self.metric_ttl if self.metric_ttl is not None else 2 * self.metric_interval

    @property
    def directive_ttl_s(self) -> float:
        return self.directive_ttl if self.directive_ttl is not None else 2 * self.directive_interval


@dataclass(frozen=True)
class Scenario:
    trace: ContactTrace
    strategy: Strategy = field(default_factory=Controlled)
    params: SimParams = field(default_factory=SimParams)
    controller_ids: tuple[NodeId, ...] = (0,)
    seed: int = 0
    node_count: Optional[int] = None  # None: the trace's node count

    @property
    def nodes(self) -> int:
        return self.node_count if self.node_count is not None else self.trace.node_count

    @property
    def duration(self) -> float:
        return self.params.duration if self.params.duration is not None else self.trace.duration

    def validate(self) -> None:
        self.params.validate()
        if self.nodes < self.trace.node_count:
            raise ConfigError("node_count is smaller than the trace's", "sim.node_count")
        if isinstance(self.strategy, Controlled):
            if not self.controller_ids:
                raise ConfigError("controlled runs need at least one controller", "control.controllers")
            bad = [c for c in self.controller_ids if not 0 <= c < self.nodes]
            if bad:
                raise ConfigError(f"controller ids {bad} outside [0, {self.nodes})", "control.controllers")

    def digest(self) -> str:
        """Stable hash of everything but the strategy, so one scenario family shares it."""
        params = {k: (v.value if hasattr(v, "value") else v) for k, v in asdict(self.params).items()}
        blob = json.dumps(
            {
                "trace": write_contact_trace(self.trace),
                "trace_nodes": self.trace.node_count,
                "trace_duration": self.trace.duration,
                "nodes": self.nodes,
                "params": params,
                "controllers": sorted(self.controller_ids),
                "seed": self.seed,
            },
            sort_keys=True,
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def node_rng(seed: int, node: NodeId) -> np.random.Generator:
    """Per-node stream keyed on (seed, node id), so nodes never share or shift each other's draws."""
    return np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, node]))


@dataclass
class NodeState:
    id: NodeId
    buffer: Buffer
    sensor: SensorState
    current_rd: float
    is_controller: bool = False
    controller: Optional[ControllerState] = None
    last_applied: Optional[tuple[float, int]] = None
    # delivered data and consumed control ids; never accepted or offered again
    seen: set[MessageId] = field(default_factory=set)
    directive_id: Optional[MessageId] = None
    peers: set[NodeId] = field(default_factory=set)
    drops_data: int = 0
    drops_control: int = 0
    rng: Optional[np.random.Generator] = None

    @property
    def delivered_ids(self) -> set[MessageId]:
        return self.seen

    def summary(self) -> SummaryVector:
        return SummaryVector(self.id, self.buffer.ids() | self.seen, self.is_controller)


@dataclass
class Transfer:
    sender: NodeId
    receiver: NodeId
    msg_id: MessageId
    completes_at: SimTime


@dataclass
class LinkState:
    pair: tuple[NodeId, NodeId]
    up_since: SimTime
    # one queue per message class, directives first
    queues: tuple = field(default_factory=lambda: (deque(), deque(), deque()))
    in_flight: Optional[Transfer] = None

    def enqueue(self, kind: MessageKind, sender: NodeId, receiver: NodeId, msg_id: MessageId) -> None:
        self.queues[kind].append((sender, receiver, msg_id))

    def pop(self):
        for q in self.queues:
            if q:
                return q.popleft()
        return None

    def pending(self) -> int:
        return sum(len(q) for q in self.queues)


def _interleave(xs: list, ys: list) -> list:
    out = []
    for i in range(max(len(xs), len(ys))):
        if i < len(xs):
            out.append(xs[i])
        if i < len(ys):
            out.append(ys[i])
    return out


class Simulation:
    """One run of a scenario. ``record=True`` keeps an event log in ``self.log``."""

    def __init__(self, scenario: Scenario, record: bool = False) -> None:
        scenario.validate()
        self.scenario = scenario
        self.params = scenario.params
        self.strategy = scenario.strategy
        self.record = record
        self.log: list[tuple] = []
        self.now: SimTime = 0.0
        self._queue: list = []
        self._seq = 0
        self._next_id = 0
        self.links: dict[tuple[NodeId, NodeId], LinkState] = {}
        self.report = RunReport(strategy=self.strategy.name, scenario_digest=scenario.digest())

        controlled = isinstance(self.strategy, Controlled)
        controllers = set(scenario.controller_ids) if controlled else set()
        if isinstance(self.strategy, StaticSpray):
            rd0 = float(self.strategy.limit)
        else:
            rd0 = float(self.params.rd_default)
        self.nodes = [
            NodeState(
                id=i,
                buffer=Buffer(self.params.buffer_bytes),
                sensor=SensorState(self.params.metric_interval),
                current_rd=rd0,
                is_controller=i in controllers,
                controller=self.params.controller_state() if i in controllers else None,
                rng=node_rng(scenario.seed, i),
            )
            for i in range(scenario.nodes)
        ]
        self._controlled = controlled

    # -- scheduling ---------------------------------------------------------

    def schedule(self, time: SimTime, category: int, key, fn: Callable, *args) -> None:
        self._seq += 1
        heapq.heappush(self._queue, (time, category, key, self._seq, fn, args))

    def _new_id(self) -> MessageId:
        self._next_id += 1
        return self._next_id

    def _emit(self, *event) -> None:
        if self.record:
            self.log.append((self.now, *event))

    def run(self) -> RunReport:
        horizon = self.scenario.duration
        for i, ev in enumerate(self.scenario.trace.events):
            self.schedule(ev.time, CONTACT, i, self._on_contact_event, ev)
        n = len(self.nodes)
        for node in self.nodes:
            if self.params.generate_data and n > 1:
                first = node.rng.uniform(self.params.data_interval_min, self.params.data_interval_max)
                self.schedule(first, GENERATE, node.id, self._on_generate, node)
            if self._controlled:
                self.schedule(self.params.metric_interval, SENSOR, node.id, self._on_sensor, node)
                if node.is_controller:
                    self.schedule(self.params.directive_interval, CONTROLLER, node.id, self._on_controller, node)
        while self._queue and self._queue[0][0] <= horizon:
            time, _, _, _, fn, args = heapq.heappop(self._queue)
            if time < self.now:
                raise RuntimeError(f"event at {time} scheduled in the past ({self.now})")
            self.now = time
            fn(*args)
        self.report.dropped_data = sum(nd.drops_data for nd in self.nodes)
        self.report.dropped_control = sum(nd.drops_control for nd in self.nodes)
        return self.report

    # -- buffers ------------------------------------------------------------

    def _store(self, node: NodeState, msg: Message) -> bool:
        outcome = node.buffer.insert(msg, self.params.drop_policy)
        for victim in outcome.dropped:
            if victim.kind is MessageKind.DATA:
                node.drops_data += 1
                node.sensor.record_drop()
            else:
                node.drops_control += 1
                if self.params.count_control_drops:
                    node.sensor.record_drop()
                if victim.id == node.directive_id:
                    node.directive_id = None
            self._emit("drop", node.id, victim.id)
        if outcome.accepted:
            self._emit("store", node.id, msg.id, msg.copies_left)
        return outcome.accepted

    def _replace_directive(self, node: NodeState, msg: Message) -> None:
        if node.directive_id is not None:
            node.buffer.remove(node.directive_id)
        node.directive_id = msg.id if self._store(node, msg) else None

    # -- message creation ---------------------------------------------------

    def _copies_for_new(self, node: NodeState) -> Optional[int]:
        if isinstance(self.strategy, Epidemic):
            return None
        if isinstance(self.strategy, StaticSpray):
            return self.strategy.limit
        return control.replication_copies(node.current_rd)

    def create_data(self, node: NodeState, dest: NodeId, size: int) -> Message:
        """Create a data message at ``node`` now and store it in its buffer."""
        msg = Message(
            id=self._new_id(),
            kind=MessageKind.DATA,
            source=node.id,
            destination=dest,
            size=size,
            created_at=self.now,
            copies_left=self._copies_for_new(node),
            ttl=self.params.data_ttl,
        )
        self.report.created_data += 1
        self._emit("create", node.id, msg.id, msg.copies_left)
        if msg.ttl is not None:
            self.schedule(self.now + msg.ttl, EXPIRY, msg.id, self._on_expire, msg.id)
        if self._store(node, msg):
            self._kick(node, msg)
        return msg

    def inject_data(self, time: SimTime, source: NodeId, dest: NodeId, size: int) -> None:
        """Schedule a one-off data message (in addition to the random traffic)."""
        self.schedule(time, GENERATE, source, lambda: self.create_data(self.nodes[source], dest, size))

    def draw_data(self, node: NodeState) -> tuple[int, NodeId]:
        """Random (size, destination) for the node's next message."""
        p = self.params
        size = int(node.rng.integers(p.data_size_min, p.data_size_max + 1))
        dest = int(node.rng.integers(0, len(self.nodes) - 1))
        return size, dest + 1 if dest >= node.id else dest

    def generate_data_message(self, node: NodeState) -> Message:
        size, dest = self.draw_data(node)
        return self.create_data(node, dest, size)

    def _on_generate(self, node: NodeState) -> None:
        self.generate_data_message(node)
        p = self.params
        nxt = self.now + node.rng.uniform(p.data_interval_min, p.data_interval_max)
        self.schedule(nxt, GENERATE, node.id, self._on_generate, node)

    def _on_sensor(self, node: NodeState) -> None:
        p = self.params
        msg = control.sensor_window_close(
            node.sensor, node.id, node.current_rd, self.now, self._new_id(), p.metric_size, p.metric_ttl_s
        )
        self.report.created_control += 1
        self._emit("metric", node.id, msg.id, msg.payload.drop_count)
        if node.is_controller:
            # a controller's own reading needs no transfer
            node.controller.fold_metric(msg.payload.drop_count)
        else:
            self.schedule(self.now + msg.ttl, EXPIRY, msg.id, self._on_expire, msg.id)
            if self._store(node, msg):
                self._kick(node, msg)
        self.schedule(self.now + p.metric_interval, SENSOR, node.id, self._on_sensor, node)

    def _on_controller(self, node: NodeState) -> None:
        p = self.params
        msg = control.controller_window_close(
            node.controller,
            self.now,
            node.id,
            self._new_id(),
            p.directive_size,
            p.directive_ttl_s,
            p.inject_congestion,
        )
        self.report.created_control += 1
        self._emit("directive", node.id, msg.id, msg.payload.new_rd)
        control.apply_directive(node, msg.payload)
        self.report.rd_timeline.append((self.now, node.id, node.current_rd))
        self.schedule(self.now + msg.ttl, EXPIRY, msg.id, self._on_expire, msg.id)
        self._replace_directive(node, msg)
        if node.directive_id == msg.id:
            self._kick(node, msg)
        self.schedule(self.now + p.directive_interval, CONTROLLER, node.id, self._on_controller, node)

    def _on_expire(self, msg_id: MessageId) -> None:
        for node in self.nodes:
            if node.buffer.remove(msg_id) is not None:
                if node.directive_id == msg_id:
                    node.directive_id = None
                self._emit("expire", node.id, msg_id)

    # -- contacts -----------------------------------------------------------

    def _on_contact_event(self, ev) -> None:
        pair = ev.pair
        a, b = self.nodes[pair[0]], self.nodes[pair[1]]
        if ev.direction is Direction.UP:
            self.contact_up(a, b)
        else:
            self.contact_down(pair)

    def contact_up(self, a: NodeState, b: NodeState) -> LinkState:
        link = LinkState((a.id, b.id), self.now)
        self.links[link.pair] = link
        a.peers.add(b.id)
        b.peers.add(a.id)
        self._emit("up", a.id, b.id)
        sa, sb = a.summary(), b.summary()
        from_a = routing.on_contact(self.strategy, a, sb)
        from_b = routing.on_contact(self.strategy, b, sa)
        for kind in MessageKind:
            xs = [(a.id, b.id, o.msg_id) for o in from_a if a.buffer.get(o.msg_id).kind is kind]
            ys = [(b.id, a.id, o.msg_id) for o in from_b if b.buffer.get(o.msg_id).kind is kind]
            link.queues[kind].extend(_interleave(xs, ys))
        self._pump(link)
        return link

    def contact_down(self, pair: tuple[NodeId, NodeId]) -> Optional[Transfer]:
        link = self.links.pop(pair)
        self.nodes[pair[0]].peers.discard(pair[1])
        self.nodes[pair[1]].peers.discard(pair[0])
        aborted = link.in_flight
        link.in_flight = None
        self._emit("down", pair[0], pair[1], aborted.msg_id if aborted else None)
        return aborted

    def _kick(self, node: NodeState, msg: Message) -> None:
        """Offer a message the node just gained on every link that is already up."""
        for peer_id in sorted(node.peers):
            peer = self.nodes[peer_id]
            if msg.id in peer.buffer or msg.id in peer.seen:
                continue
            if routing.decide(self.strategy, msg, peer_id, peer.is_controller) is None:
                continue
            link = self.links[(min(node.id, peer_id), max(node.id, peer_id))]
            link.enqueue(msg.kind, node.id, peer_id, msg.id)
            self._pump(link)

    def _offer(self, sender: NodeState, receiver: NodeState, msg_id: MessageId):
        msg = sender.buffer.get(msg_id)
        if msg is None or msg_id in receiver.buffer or msg_id in receiver.seen:
            return None, None
        if msg.expired(self.now):
            return None, None
        return msg, routing.decide(self.strategy, msg, receiver.id, receiver.is_controller)

    def _pump(self, link: LinkState) -> None:
        while link.in_flight is None:
            item = link.pop()
            if item is None:
                return
            s, r, msg_id = item
            msg, offer = self._offer(self.nodes[s], self.nodes[r], msg_id)
            if offer is None:
                continue
            t = Transfer(s, r, msg_id, self.now + msg.size / self.params.bandwidth)
            link.in_flight = t
            self.schedule(t.completes_at, COMPLETION, link.pair, self._on_complete, link, t)

    def _on_complete(self, link: LinkState, t: Transfer) -> None:
        if link.in_flight is not t or self.links.get(link.pair) is not link:
            return
        link.in_flight = None
        sender, receiver = self.nodes[t.sender], self.nodes[t.receiver]
        msg, offer = self._offer(sender, receiver, t.msg_id)
        if offer is not None:
            if offer.kind is TransferKind.HANDOFF:
                sender.buffer.remove(msg.id)
                if sender.directive_id == msg.id:
                    sender.directive_id = None
            elif msg.copies_left is not None:
                sender.buffer.update(msg.with_copies(msg.copies_left - offer.copies))
            if msg.kind is MessageKind.DATA:
                self.report.data_bytes_transferred += msg.size
            else:
                self.report.control_bytes_transferred += msg.size
            self._emit("xfer", t.sender, t.receiver, msg.id, offer.kind.value, offer.copies)
            self._receive(receiver, msg.with_copies(offer.copies))
        self._pump(link)

    def _receive(self, node: NodeState, msg: Message) -> None:
        verdict = routing.on_receive(node, msg)
        if verdict is Receipt.DISCARD:
            return
        if verdict is Receipt.DELIVER:
            node.seen.add(msg.id)
            self.report.delivered_data += 1
            self.report.latencies_s.append(self.now - msg.created_at)
            self._emit("deliver", node.id, msg.id)
            return
        if verdict is Receipt.CONSUME:
            node.seen.add(msg.id)
            if msg.kind is MessageKind.METRIC:
                node.controller.fold_metric(msg.payload.drop_count)
                self._emit("consume", node.id, msg.id)
                return
            node.controller.fold_peer_directive(msg.payload.new_rd)
            self._emit("consume", node.id, msg.id)
            held = node.buffer.get(node.directive_id) if node.directive_id is not None else None
            if held is None or held.payload.freshness < msg.payload.freshness:
                self._replace_directive(node, msg)
                if node.directive_id == msg.id:
                    self._kick(node, msg)
            return
        if verdict is Receipt.APPLY:
            control.apply_directive(node, msg.payload)
            self.report.rd_timeline.append((self.now, node.id, node.current_rd))
            self._emit("apply", node.id, msg.id, node.current_rd)
            self._replace_directive(node, msg)
            if node.directive_id == msg.id:
                self._kick(node, msg)
            return
        if self._store(node, msg):
            self._kick(node, msg)


def run(scenario: Scenario) -> RunReport:
    return Simulation(scenario).run()

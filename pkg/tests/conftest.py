import pytest

from oppctl.control import SensorState
from oppctl.engine import NodeState, Scenario, SimParams
from oppctl.model import BROADCAST, CONTROLLERS, Buffer, DirectivePayload, Message, MessageKind, MetricPayload
from oppctl.trace import parse_contact_trace


def make_node(nid=0, capacity=10_000, rd=10.0, controller=False):
    return NodeState(id=nid, buffer=Buffer(capacity), sensor=SensorState(60), current_rd=rd,
                     is_controller=controller)


def data_msg(mid, dest=1, copies=10, t=0.0, size=100, src=0):
    return Message(mid, MessageKind.DATA, src, dest, size, t, copies_left=copies)


def metric_msg(mid, copies=2, t=0.0, src=0):
    return Message(mid, MessageKind.METRIC, src, CONTROLLERS, 21, t, copies_left=copies,
                   payload=MetricPayload(0, t, src))


def directive_msg(mid, rd=4.0, copies=4, t=0.0, ctrl=0):
    return Message(mid, MessageKind.DIRECTIVE, ctrl, BROADCAST, 5, t, copies_left=copies,
                   payload=DirectivePayload(rd, t, ctrl))


def two_node_scenario(strategy, trace_text, duration, size=1000, bandwidth=100.0, **kw):
    """Two nodes, no random traffic; messages are injected by the test."""
    params = SimParams(bandwidth=bandwidth, buffer_bytes=10 * size, generate_data=False,
                       data_size_min=size, data_size_max=size, duration=duration, **kw)
    return Scenario(parse_contact_trace(trace_text), strategy, params, (0,), seed=1)


@pytest.fixture
def node():
    return make_node()


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS.values():
            terminalreporter.write_line(line)

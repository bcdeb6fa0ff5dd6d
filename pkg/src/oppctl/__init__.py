"""Opportunistic network simulator with a replication-degree control layer."""

from .engine import Scenario, SimParams, Simulation, run
from .report import RunReport
from .routing import Controlled, Epidemic, StaticSpray
from .trace import CommunityParams, ContactTrace, generate_community_trace, parse_contact_trace, write_contact_trace

__all__ = [
    "CommunityParams",
    "ContactTrace",
    "Controlled",
    "Epidemic",
    "RunReport",
    "Scenario",
    "SimParams",
    "Simulation",
    "StaticSpray",
    "generate_community_trace",
    "parse_contact_trace",
    "run",
    "write_contact_trace",
]

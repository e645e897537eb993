import random

import pytest

from teamline.agent_runtime import AgentSpec, AgentRuntime, InstitutionalKnowledge
from teamline.clock import SimulatedClock
from teamline.provider import ScriptedProvider
from teamline.timeline import Timeline


@pytest.fixture
def clock():
    c = SimulatedClock()
    c.start()
    return c


@pytest.fixture
def timeline(clock):
    return Timeline(clock)


@pytest.fixture
def make_runtime(timeline, clock):
    """Builder for an agent runtime wired to the shared test timeline."""

    def build(name="Ada", role="Developer", provider=None, seed=1, join_seq=0,
              pause_range_s=(3.0, 15.0)):
        spec = AgentSpec(name=name, role_name=role, persona=f"You are {name}.")
        return AgentRuntime(
            spec=spec,
            knowledge=InstitutionalKnowledge(base="Work together."),
            timeline=timeline,
            provider=provider or ScriptedProvider(fallback_response="ACTION: NONE"),
            clock=clock,
            rng=random.Random(seed),
            pause_range_s=pause_range_s,
            join_seq=join_seq,
        )

    return build

import itertools
import random

import pytest

from storypad.engine import Engine
from storypad.model import new_story
from storypad.ops import Operation


class OpFactory:
    """Sequential op ids so tests read well and collisions are impossible."""

    def __init__(self):
        self._n = itertools.count(1)

    def __call__(self, payload, actor="alice", base=0, op_id=None) -> Operation:
        return Operation(
            op_id=op_id or f"t{next(self._n):04d}",
            actor=actor,
            base_revision=base,
            payload=payload,
        )


@pytest.fixture
def make_op():
    return OpFactory()


@pytest.fixture
def fresh_engine():
    return Engine(new_story("Test Story", "alice", story_id="st1", created_at=0.0))


@pytest.fixture
def rng():
    return random.Random(0xC0FFEE)


def replay_oracle(base_story, entries, upto=None):
    """Independent replay: fold apply over the log prefix. Tests hold the
    engine's answers (revert, recovery, history) against this fold."""
    from storypad.engine import apply

    story = base_story
    for entry in entries if upto is None else entries[:upto]:
        story = apply(story, entry.operation)
    return story

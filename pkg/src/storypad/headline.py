"""Headline suggestion from a template catalog.

The catalog is data, not code: a JSON array of {id, pattern, category}
loaded at startup. Patterns carry a {topic} slot (exactly once) and an
optional {n} slot for listicle counts. suggest() is pure: same inputs,
same list.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import EmptyHeadline, EmptyTopic, HeadlineTooLong, MalformedOperation
from .ids import new_id
from .model import HEADLINE_MAX, Story
from .ops import Operation, SetHeadline

CATEGORIES = ("listicle", "explainer", "question", "superlative")
DEFAULT_N = 5


@dataclass(frozen=True)
class HeadlineTemplate:
    id: str
    pattern: str
    category: str

    def validate(self) -> None:
        if self.pattern.count("{topic}") != 1:
            raise ValueError(f"template {self.id}: pattern must contain {{topic}} exactly once")
        if self.pattern.count("{n}") > 1:
            raise ValueError(f"template {self.id}: pattern may contain {{n}} at most once")
        if self.category not in CATEGORIES:
            raise ValueError(f"template {self.id}: unknown category {self.category!r}")

    def fill(self, topic: str, n: int) -> str:
        return self.pattern.replace("{n}", str(n)).replace("{topic}", topic)


def load_catalog(path: str | Path | None = None) -> list[HeadlineTemplate]:
    if path is None:
        raw = resources.files("storypad.data").joinpath("headline_templates.json").read_text("utf-8")
    else:
        raw = Path(path).read_text("utf-8")
    templates = [HeadlineTemplate(**item) for item in json.loads(raw)]
    if not templates:
        raise ValueError("headline catalog is empty")
    for t in templates:
        t.validate()
    return templates


_default_catalog: list[HeadlineTemplate] | None = None


def default_catalog() -> list[HeadlineTemplate]:
    global _default_catalog
    if _default_catalog is None:
        _default_catalog = load_catalog()
    return _default_catalog


def suggest(
    topic: str,
    count: int = 5,
    n_hint: int | None = None,
    *,
    catalog: list[HeadlineTemplate] | None = None,
) -> list[str]:
    """First `count` headlines in catalog order, slots filled.

    {topic} is substituted verbatim; {n} takes n_hint when given, else 5.
    Callers with an existing story typically pass its live section count
    as n_hint to ground listicles in reality.
    """
    topic = topic.strip()
    if not topic:
        raise EmptyTopic("cannot suggest headlines for an empty topic")
    if count < 1:
        raise MalformedOperation("count must be >= 1")
    templates = catalog if catalog is not None else default_catalog()
    n = n_hint if n_hint is not None and n_hint >= 1 else DEFAULT_N
    return [t.fill(topic, n) for t in templates[:count]]


def accept_or_edit(story: Story, chosen: str, *, actor: str, op_id: str | None = None) -> Operation:
    """Turn a picked (or hand-written) headline into a SetHeadline op,
    based on the story's current revision, for the engine to serialize."""
    if not chosen.strip():
        raise EmptyHeadline("headline must be non-empty")
    if len(chosen) > HEADLINE_MAX:
        raise HeadlineTooLong(f"headline exceeds {HEADLINE_MAX} chars")
    return Operation(
        op_id=op_id or new_id("op"),
        actor=actor,
        base_revision=story.revision,
        payload=SetHeadline(text=chosen),
    )

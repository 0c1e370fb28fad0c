"""Story events: the non-operation side channel.

Offers, requests, request resolution, contributor names, and view counts
don't advance the story revision (that counter equals the applied-op
count), so they travel as events: broadcast to subscribers inside
request_update frames and persisted to an append-only sidecar. Each event
records the story revision it happened after, which makes the merged
replay of ops and events deterministic.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .errors import MalformedOperation
from .model import ImprovementRequest, Story, canonical_json
from . import recruitment

OFFER_ADDED = "offer_added"
REQUEST_CREATED = "request_created"
REQUEST_RESOLVED = "request_resolved"
CONTRIBUTOR_SEEN = "contributor_seen"
VIEW_RECORDED = "view_recorded"

EVENT_KINDS = (OFFER_ADDED, REQUEST_CREATED, REQUEST_RESOLVED, CONTRIBUTOR_SEEN, VIEW_RECORDED)

# kinds that change canonical story state and therefore must reach clients
BROADCAST_KINDS = (OFFER_ADDED, REQUEST_CREATED, REQUEST_RESOLVED, CONTRIBUTOR_SEEN)


@dataclass(frozen=True)
class StoryEvent:
    seq: int
    at_revision: int
    kind: str
    data: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"at_revision": self.at_revision, "kind": self.kind, "seq": self.seq}
        d.update(self.data)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StoryEvent":
        if d.get("kind") not in EVENT_KINDS:
            raise MalformedOperation(f"unknown event kind {d.get('kind')!r}")
        data = {k: v for k, v in d.items() if k not in ("seq", "at_revision", "kind")}
        return cls(seq=d["seq"], at_revision=d["at_revision"], kind=d["kind"], data=data)


def encode_event(event: StoryEvent) -> bytes:
    return canonical_json(event.to_dict())


def apply_event(story: Story, event: StoryEvent) -> Story:
    """Replay one event onto the story; pure, replay-exact (timestamps ride
    in the event payload, never from a clock)."""
    d = event.data
    if event.kind == OFFER_ADDED:
        return recruitment.add_offer(story, d["actor"], d["display_name"], created_at=d["created_at"])
    if event.kind == REQUEST_CREATED:
        # no re-validation: the server checked the target section against its
        # state; a replica applying this may be mid-rebase and see a different
        # local section set (any resulting orphan gets auto-dismissed upstream)
        req = ImprovementRequest.from_dict(d["request"])
        return dataclasses.replace(story, requests=story.requests + (req,))
    if event.kind == REQUEST_RESOLVED:
        if d["status"] == "fulfilled":
            return recruitment.fulfill_request(story, d["request_id"], resolved_at=d["resolved_at"])
        return recruitment.dismiss_request(story, d["request_id"], resolved_at=d["resolved_at"])
    if event.kind == CONTRIBUTOR_SEEN:
        return story.with_contributor(d["actor"], d["display_name"])
    if event.kind == VIEW_RECORDED:
        return story  # counted outside the story value
    raise MalformedOperation(f"unknown event kind {event.kind!r}")

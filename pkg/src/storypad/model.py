"""Story document model: sections, media, attribution, recruitment state.

Everything here is an immutable value. Mutation happens by building a new
Story (the engine and event layer do that); values can be shared freely
across threads. The canonical JSON serialization is byte-deterministic:
keys sorted alphabetically, compact separators, UTF-8.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from fractions import Fraction

from .errors import EmptyTopic, InvalidStory, TopicTooLong
from .ids import check_id, is_valid_id, new_id
from .orderkeys import ZERO, key_from_wire, key_to_wire

BODY_CAP = 100_000  # unicode scalar values per section body
HEADLINE_MAX = 300
HEADING_MAX = 200

MEDIA_KINDS = ("photo", "video", "audio", "microblog", "link")

REQUEST_OPEN = "open"
REQUEST_FULFILLED = "fulfilled"
REQUEST_DISMISSED = "dismissed"
REQUEST_STATUSES = (REQUEST_OPEN, REQUEST_FULFILLED, REQUEST_DISMISSED)

VIEW_SURFACES = ("first_party", "embed", "export")


@dataclass(frozen=True)
class MediaEmbed:
    id: str
    source_url: str
    kind: str
    title: str | None = None
    resolved_html_safe: str = ""

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "resolved_html_safe": self.resolved_html_safe,
            "source_url": self.source_url,
            "title": self.title,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MediaEmbed":
        return cls(
            id=d["id"],
            source_url=d["source_url"],
            kind=d["kind"],
            title=d.get("title"),
            resolved_html_safe=d.get("resolved_html_safe", ""),
        )


@dataclass(frozen=True)
class MediaSlot:
    """A media embed plus its rational position within the section."""

    order_key: Fraction
    embed: MediaEmbed

    def to_dict(self) -> dict:
        d = self.embed.to_dict()
        d["order_key"] = key_to_wire(self.order_key)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MediaSlot":
        return cls(order_key=key_from_wire(d["order_key"]), embed=MediaEmbed.from_dict(d))


@dataclass(frozen=True)
class Section:
    id: str
    order_key: Fraction
    heading: str = ""
    body: str = ""
    media: tuple[MediaSlot, ...] = ()
    tombstone: bool = False

    def to_dict(self) -> dict:
        return {
            "body": self.body,
            "heading": self.heading,
            "id": self.id,
            "media": [m.to_dict() for m in self.media],
            "order_key": key_to_wire(self.order_key),
            "tombstone": self.tombstone,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Section":
        return cls(
            id=d["id"],
            order_key=key_from_wire(d["order_key"]),
            heading=d["heading"],
            body=d["body"],
            media=tuple(MediaSlot.from_dict(m) for m in d["media"]),
            tombstone=d["tombstone"],
        )


@dataclass(frozen=True)
class AttributionEntry:
    actor: str
    display_name: str
    accepted: bool = False

    def to_dict(self) -> dict:
        return {"accepted": self.accepted, "actor": self.actor, "display_name": self.display_name}

    @classmethod
    def from_dict(cls, d: dict) -> "AttributionEntry":
        return cls(actor=d["actor"], display_name=d["display_name"], accepted=d["accepted"])


@dataclass(frozen=True)
class Offer:
    actor: str
    display_name: str
    created_at: float

    def to_dict(self) -> dict:
        return {"actor": self.actor, "created_at": self.created_at, "display_name": self.display_name}

    @classmethod
    def from_dict(cls, d: dict) -> "Offer":
        return cls(actor=d["actor"], display_name=d["display_name"], created_at=d["created_at"])


@dataclass(frozen=True)
class ImprovementRequest:
    id: str
    token: str
    requester_name: str
    recipient: str
    request_text: str
    topic: str
    section_id: str | None
    status: str = REQUEST_OPEN
    created_at: float = 0.0
    resolved_at: float | None = None

    def to_dict(self) -> dict:
        return {
            "created_at": self.created_at,
            "id": self.id,
            "recipient": self.recipient,
            "request_text": self.request_text,
            "requester_name": self.requester_name,
            "resolved_at": self.resolved_at,
            "section_id": self.section_id,
            "status": self.status,
            "token": self.token,
            "topic": self.topic,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ImprovementRequest":
        return cls(
            id=d["id"],
            token=d["token"],
            requester_name=d["requester_name"],
            recipient=d["recipient"],
            request_text=d["request_text"],
            topic=d["topic"],
            section_id=d["section_id"],
            status=d["status"],
            created_at=d["created_at"],
            resolved_at=d["resolved_at"],
        )


def section_sort_key(s: Section):
    # live sections first, by key; tombstones trail, ordered by id
    return (s.tombstone, s.order_key, s.id)


@dataclass(frozen=True)
class Story:
    id: str
    topic: str
    headline: str
    created_at: float
    revision: int = 0
    sections: tuple[Section, ...] = ()
    attribution: tuple[AttributionEntry, ...] = ()
    contributors: tuple[tuple[str, str], ...] = ()  # (actor, display_name), sorted by actor
    offers: tuple[Offer, ...] = ()
    requests: tuple[ImprovementRequest, ...] = ()

    # -- lookups ---------------------------------------------------------

    def section(self, section_id: str) -> Section | None:
        for s in self.sections:
            if s.id == section_id:
                return s
        return None

    def live_sections(self) -> tuple[Section, ...]:
        return tuple(s for s in self.sections if not s.tombstone)

    def request(self, request_id: str) -> ImprovementRequest | None:
        for r in self.requests:
            if r.id == request_id:
                return r
        return None

    # -- functional updates ----------------------------------------------

    def with_section(self, section: Section) -> "Story":
        """Replace (or add) one section, keeping the tuple canonically
        sorted. Content-only changes splice in place; only a changed sort
        key (insert/move/remove/revert) pays for re-positioning."""
        sections = self.sections
        key = section_sort_key(section)
        rest = sections
        for i, s in enumerate(sections):
            if s.id == section.id:
                if section_sort_key(s) == key:
                    return replace(self, sections=sections[:i] + (section,) + sections[i + 1 :])
                rest = sections[:i] + sections[i + 1 :]
                break
        lo, hi = 0, len(rest)
        while lo < hi:
            mid = (lo + hi) // 2
            if section_sort_key(rest[mid]) < key:
                lo = mid + 1
            else:
                hi = mid
        return replace(self, sections=rest[:lo] + (section,) + rest[lo:])

    def with_contributor(self, actor: str, display_name: str) -> "Story":
        entries = dict(self.contributors)
        entries[actor] = display_name
        return replace(self, contributors=tuple(sorted(entries.items())))

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "attribution": [a.to_dict() for a in self.attribution],
            "contributors": {actor: name for actor, name in self.contributors},
            "created_at": self.created_at,
            "headline": self.headline,
            "id": self.id,
            "offers": [o.to_dict() for o in self.offers],
            "requests": [r.to_dict() for r in self.requests],
            "revision": self.revision,
            "sections": [s.to_dict() for s in self.sections],
            "topic": self.topic,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Story":
        return cls(
            id=d["id"],
            topic=d["topic"],
            headline=d["headline"],
            created_at=d["created_at"],
            revision=d["revision"],
            sections=tuple(Section.from_dict(s) for s in d["sections"]),
            attribution=tuple(AttributionEntry.from_dict(a) for a in d["attribution"]),
            contributors=tuple(sorted(d["contributors"].items())),
            offers=tuple(Offer.from_dict(o) for o in d["offers"]),
            requests=tuple(ImprovementRequest.from_dict(r) for r in d["requests"]),
        )


def canonical_json(obj) -> bytes:
    """Deterministic UTF-8 JSON: sorted keys, compact separators."""
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def story_bytes(story: Story) -> bytes:
    return canonical_json(story.to_dict())


def story_hash(story: Story) -> str:
    return hashlib.sha256(story_bytes(story)).hexdigest()


def new_story(topic: str, creator: str, *, story_id: str | None = None, created_at: float = 0.0) -> Story:
    topic = topic.strip()
    if not topic:
        raise EmptyTopic("story topic must be non-empty")
    if len(topic) > HEADLINE_MAX:
        raise TopicTooLong(f"topic exceeds {HEADLINE_MAX} chars")
    check_id(creator, "creator actor id")
    sid = story_id if story_id is not None else new_id("s")
    check_id(sid, "story id")
    return Story(
        id=sid,
        topic=topic,
        headline=topic,
        created_at=created_at,
        contributors=((creator, creator),),
    )


def outstanding_count(story: Story) -> int:
    return sum(1 for r in story.requests if r.status == REQUEST_OPEN)


def validate(story: Story, *, log_length: int | None = None) -> list[str]:
    """Every invariant violation found, or an empty list when the story is ok."""
    problems: list[str] = []
    if not is_valid_id(story.id):
        problems.append(f"bad story id {story.id!r}")
    if not story.headline or len(story.headline) > HEADLINE_MAX:
        problems.append("headline length outside 1-300")
    if not story.topic.strip():
        problems.append("empty topic")
    if story.revision < 0:
        problems.append("negative revision")
    if log_length is not None and story.revision != log_length:
        problems.append(f"revision {story.revision} != applied op count {log_length}")

    seen_ids: set[str] = set()
    for s in story.sections:
        if not is_valid_id(s.id):
            problems.append(f"bad section id {s.id!r}")
        if s.id in seen_ids:
            problems.append(f"duplicate section id {s.id!r}")
        seen_ids.add(s.id)
        if len(s.heading) > HEADING_MAX:
            problems.append(f"section {s.id}: heading exceeds {HEADING_MAX}")
        if len(s.body) > BODY_CAP:
            problems.append(f"section {s.id}: body exceeds cap")
        if not s.tombstone and s.order_key <= ZERO:
            problems.append(f"section {s.id}: non-positive order key")
        media_ids: set[str] = set()
        for slot in s.media:
            if slot.embed.id in media_ids:
                problems.append(f"section {s.id}: duplicate media id {slot.embed.id!r}")
            media_ids.add(slot.embed.id)
            if slot.embed.kind not in MEDIA_KINDS:
                problems.append(f"section {s.id}: bad media kind {slot.embed.kind!r}")
            if not slot.embed.source_url.startswith(("http://", "https://")):
                problems.append(f"section {s.id}: media url not absolute http(s)")

    # racing inserts may tie on a key; (key, id) keeps the order strict
    live = story.live_sections()
    ordered = sorted(live, key=lambda s: (s.order_key, s.id))
    if list(live) != ordered:
        problems.append("live sections not in (order key, id) order")

    actors = set()
    for a in story.attribution:
        if a.actor in actors:
            problems.append(f"duplicate attribution entry for {a.actor!r}")
        actors.add(a.actor)

    offer_actors = set()
    for o in story.offers:
        if o.actor in offer_actors:
            problems.append(f"duplicate offer for {o.actor!r}")
        offer_actors.add(o.actor)

    tokens = set()
    for r in story.requests:
        if r.status not in REQUEST_STATUSES:
            problems.append(f"request {r.id}: bad status {r.status!r}")
        if (r.resolved_at is None) != (r.status == REQUEST_OPEN):
            problems.append(f"request {r.id}: resolved_at inconsistent with status")
        if r.token in tokens:
            problems.append(f"request {r.id}: duplicate token")
        tokens.add(r.token)
        if r.status == REQUEST_OPEN and r.section_id is not None:
            target = story.section(r.section_id)
            if target is None or target.tombstone:
                problems.append(f"request {r.id}: open request targets missing/tombstoned section")

    return problems


def render_read_only(story: Story) -> dict:
    """Deterministic document tree for the read-only view and static export.

    Pure function of story state: identical stories yield byte-identical
    trees (serialize with canonical_json). Tombstoned sections are omitted.
    """
    problems = validate(story)
    if problems:
        raise InvalidStory("; ".join(problems))
    return {
        "attribution": [
            {"display_name": a.display_name} for a in story.attribution if a.accepted
        ],
        "headline": story.headline,
        "outstanding_requests": outstanding_count(story),
        "revision": story.revision,
        "sections": [
            {
                "body": s.body,
                "heading": s.heading,
                "id": s.id,
                "media": [
                    {
                        "html": m.embed.resolved_html_safe,
                        "kind": m.embed.kind,
                        "source_url": m.embed.source_url,
                        "title": m.embed.title,
                    }
                    for m in s.media
                ],
            }
            for s in story.live_sections()
        ],
        "story_id": story.id,
        "topic": story.topic,
    }


def render_bytes(story: Story) -> bytes:
    return canonical_json(render_read_only(story))

"""Server-serialized operational transformation.

The server is the single serialization point: every client op is rebased
(transformed) against the ops logged since its base revision, applied, and
appended to the log. Correctness rests on the TP1 identity

    apply(apply(S, a), transform(b, a)) == apply(apply(S, b), transform(a, b))

which the sim harness verifies exhaustively over a small domain. apply is
a pure clock-free function of (story, op); anything nondeterministic
(timestamps, tokens) lives outside the op path so replaying the log always
reproduces byte-identical state.

Conflict policy, in brief:
  - text insert/insert ties break by (actor, op_id); insert into a
    concurrently deleted range is dropped and the delete swallows it
  - edits racing a section removal become no-ops; revert beats removal
  - a revert overwrites racing content edits on the same section
  - writes to one scalar field (headline, heading, move target, repeated
    revert) resolve last-writer-wins by (actor, op_id)
  - racing inserts/moves may leave two sections on the same rational key;
    the canonical sort is (key, id), so the order is still total and both
    arrival orders produce identical state with no neighbor re-keying
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

from .errors import (
    BaseTooOld,
    BodyTooLong,
    DuplicateMedia,
    DuplicateSection,
    EmptyHeadline,
    EmptyName,
    HeadingTooLong,
    HeadlineTooLong,
    InvalidUrl,
    MalformedOperation,
    OffsetOutOfRange,
    RevisionGap,
    TargetRevisionUnknown,
    UnknownSection,
)
from .model import (
    BODY_CAP,
    HEADING_MAX,
    HEADLINE_MAX,
    MEDIA_KINDS,
    AttributionEntry,
    MediaSlot,
    Section,
    Story,
    canonical_json,
)
from .ops import (
    AddAttribution,
    AddMedia,
    InsertSection,
    MoveSection,
    Noop,
    Operation,
    RemoveMedia,
    RemoveSection,
    RevertSection,
    SectionContent,
    SetHeading,
    SetHeadline,
    TextDelete,
    TextInsert,
)
from .orderkeys import ZERO

DEFAULT_REBASE_WINDOW = 1000


# ---------------------------------------------------------------------------
# apply


def _require_live(story: Story, section_id: str) -> Section:
    s = story.section(section_id)
    if s is None or s.tombstone:
        raise UnknownSection(f"no live section {section_id!r}")
    return s


def _tombstoned(section_id: str) -> Section:
    # content is cleared on removal; recovery goes through revert + the log
    return Section(id=section_id, order_key=ZERO, tombstone=True)


def _check_media(embed) -> None:
    if embed.kind not in MEDIA_KINDS:
        raise MalformedOperation(f"bad media kind {embed.kind!r}")
    if not isinstance(embed.source_url, str) or not embed.source_url.startswith(("http://", "https://")):
        raise InvalidUrl(f"media url must be absolute http(s): {embed.source_url!r}")


def _media_sorted(slots) -> tuple[MediaSlot, ...]:
    return tuple(sorted(slots, key=lambda m: (m.order_key, m.embed.id)))


def apply(story: Story, op: Operation) -> Story:
    """Apply one already-rebased operation; returns the story at revision+1."""
    p = op.payload
    bumped = replace(story, revision=story.revision + 1)

    if isinstance(p, Noop):
        return bumped

    if isinstance(p, SetHeadline):
        if not p.text:
            raise EmptyHeadline("headline must be non-empty")
        if len(p.text) > HEADLINE_MAX:
            raise HeadlineTooLong(f"headline exceeds {HEADLINE_MAX} chars")
        return replace(bumped, headline=p.text)

    if isinstance(p, InsertSection):
        if story.section(p.section_id) is not None:
            raise DuplicateSection(f"section id {p.section_id!r} already used")
        if len(p.heading) > HEADING_MAX:
            raise HeadingTooLong(f"heading exceeds {HEADING_MAX} chars")
        if p.order_key <= ZERO:
            raise MalformedOperation("order key must be positive")
        # racing inserts may claim equal keys; the (key, id) sort keeps the
        # outcome total and order-independent without touching neighbors
        fresh = Section(id=p.section_id, order_key=p.order_key, heading=p.heading)
        return bumped.with_section(fresh)

    if isinstance(p, RemoveSection):
        _require_live(story, p.section_id)
        return bumped.with_section(_tombstoned(p.section_id))

    if isinstance(p, MoveSection):
        s = _require_live(story, p.section_id)
        if p.new_order_key <= ZERO:
            raise MalformedOperation("order key must be positive")
        return bumped.with_section(replace(s, order_key=p.new_order_key))

    if isinstance(p, SetHeading):
        s = _require_live(story, p.section_id)
        if len(p.text) > HEADING_MAX:
            raise HeadingTooLong(f"heading exceeds {HEADING_MAX} chars")
        return bumped.with_section(replace(s, heading=p.text))

    if isinstance(p, TextInsert):
        s = story.section(p.section_id)
        if s is None:
            raise UnknownSection(f"no section {p.section_id!r}")
        if s.tombstone:
            return bumped  # racing edit on a removed section: tolerated no-op
        if not 0 <= p.offset <= len(s.body):
            raise OffsetOutOfRange(f"insert offset {p.offset} not in [0, {len(s.body)}]")
        if len(s.body) + len(p.text) > BODY_CAP:
            raise BodyTooLong(f"section body would exceed {BODY_CAP} chars")
        body = s.body[: p.offset] + p.text + s.body[p.offset :]
        return bumped.with_section(replace(s, body=body))

    if isinstance(p, TextDelete):
        s = story.section(p.section_id)
        if s is None:
            raise UnknownSection(f"no section {p.section_id!r}")
        if s.tombstone:
            return bumped
        if p.length < 1:
            raise MalformedOperation("delete length must be >= 1")
        if p.offset < 0 or p.offset + p.length > len(s.body):
            raise OffsetOutOfRange(f"delete range [{p.offset}, {p.offset + p.length}) outside body")
        body = s.body[: p.offset] + s.body[p.offset + p.length :]
        return bumped.with_section(replace(s, body=body))

    if isinstance(p, AddMedia):
        s = _require_live(story, p.section_id)
        _check_media(p.media)
        if p.position <= ZERO:
            raise MalformedOperation("media position key must be positive")
        if any(m.embed.id == p.media.id for m in s.media):
            raise DuplicateMedia(f"media id {p.media.id!r} already in section")
        slots = list(s.media) + [MediaSlot(order_key=p.position, embed=p.media)]
        return bumped.with_section(replace(s, media=_media_sorted(slots)))

    if isinstance(p, RemoveMedia):
        s = _require_live(story, p.section_id)
        slots = tuple(m for m in s.media if m.embed.id != p.media_id)
        if len(slots) == len(s.media):
            return bumped  # already gone (racing removes): no-op
        return bumped.with_section(replace(s, media=slots))

    if isinstance(p, RevertSection):
        if p.content is None:
            raise MalformedOperation("revert must be materialized before apply")
        s = story.section(p.section_id)
        if s is None:
            raise UnknownSection(f"no section {p.section_id!r}")
        c = p.content
        if c.tombstone:
            return bumped.with_section(_tombstoned(p.section_id))
        restored = Section(
            id=p.section_id,
            order_key=c.order_key,
            heading=c.heading,
            body=c.body,
            media=_media_sorted(c.media),
        )
        return bumped.with_section(restored)

    if isinstance(p, AddAttribution):
        if not p.display_name.strip():
            raise EmptyName("attribution display name must be non-empty")
        entry = AttributionEntry(actor=p.actor, display_name=p.display_name, accepted=p.accepted)
        entries = {e.actor: e for e in bumped.attribution}
        entries[p.actor] = entry
        # actor-sorted so concurrent additions land in one canonical order
        return replace(bumped, attribution=tuple(e for _, e in sorted(entries.items())))

    raise MalformedOperation(f"unhandled payload {type(p).__name__}")


# ---------------------------------------------------------------------------
# transform


def _noop(op: Operation) -> Operation:
    return replace(op, payload=Noop())


def _wins(incoming: Operation, concurrent: Operation) -> bool:
    return incoming.priority() > concurrent.priority()


def _lww(incoming: Operation, concurrent: Operation) -> Operation:
    return incoming if _wins(incoming, concurrent) else _noop(incoming)


def transform(incoming: Operation, concurrent: Operation) -> Operation:
    """Rebase `incoming` to apply after `concurrent` (same base context).

    Never raises: conflicts that cannot be reconciled degrade to a no-op.
    """
    if incoming.op_id == concurrent.op_id:
        return _noop(incoming)  # duplicate delivery

    a, b = incoming.payload, concurrent.payload

    if isinstance(a, Noop) or isinstance(b, Noop):
        return incoming

    if isinstance(a, SetHeadline) and isinstance(b, SetHeadline):
        return _lww(incoming, concurrent)

    if isinstance(a, AddAttribution) and isinstance(b, AddAttribution):
        return _lww(incoming, concurrent) if a.actor == b.actor else incoming

    sa, sb = incoming.section_id(), concurrent.section_id()
    if sa is None or sb is None or sa != sb:
        return incoming

    # below here: both ops target the same section

    if isinstance(b, RemoveSection):
        if isinstance(a, RevertSection):
            return incoming  # revert wins; it restores through the tombstone
        return _noop(incoming)

    if isinstance(b, RevertSection):
        if isinstance(a, RevertSection):
            return _lww(incoming, concurrent)
        return _noop(incoming)  # the revert overwrites this section wholesale

    if isinstance(a, (RemoveSection, RevertSection)):
        return incoming  # removal/revert still applies over concurrent content edits

    if isinstance(a, InsertSection) or isinstance(b, InsertSection):
        # same section id from two different ops: malformed input; keep one
        if isinstance(a, InsertSection) and isinstance(b, InsertSection):
            return _lww(incoming, concurrent)
        return incoming

    if isinstance(a, TextInsert) and isinstance(b, TextInsert):
        # equal offsets: ascending (actor, op_id) takes the earlier position
        if b.offset < a.offset or (b.offset == a.offset and _wins(incoming, concurrent)):
            return replace(incoming, payload=replace(a, offset=a.offset + len(b.text)))
        return incoming

    if isinstance(a, TextInsert) and isinstance(b, TextDelete):
        if a.offset <= b.offset:
            return incoming
        if a.offset >= b.offset + b.length:
            return replace(incoming, payload=replace(a, offset=a.offset - b.length))
        return _noop(incoming)  # inserted into a concurrently deleted range

    if isinstance(a, TextDelete) and isinstance(b, TextInsert):
        if b.offset <= a.offset:
            return replace(incoming, payload=replace(a, offset=a.offset + len(b.text)))
        if b.offset >= a.offset + a.length:
            return incoming
        return replace(incoming, payload=replace(a, length=a.length + len(b.text)))

    if isinstance(a, TextDelete) and isinstance(b, TextDelete):
        if b.offset + b.length <= a.offset:
            return replace(incoming, payload=replace(a, offset=a.offset - b.length))
        if b.offset >= a.offset + a.length:
            return incoming
        left = max(0, b.offset - a.offset)
        right = max(0, (a.offset + a.length) - (b.offset + b.length))
        if left + right == 0:
            return _noop(incoming)
        return replace(incoming, payload=replace(a, offset=min(a.offset, b.offset), length=left + right))

    if isinstance(a, MoveSection) and isinstance(b, MoveSection):
        return _lww(incoming, concurrent)

    if isinstance(a, SetHeading) and isinstance(b, SetHeading):
        return _lww(incoming, concurrent)

    if isinstance(a, RemoveMedia) and isinstance(b, RemoveMedia) and a.media_id == b.media_id:
        return _noop(incoming)

    # remaining same-section pairs commute: media adds use order keys
    # (collisions resolve at apply), removes are id-based, text vs heading
    # vs media touch disjoint fields
    return incoming


# ---------------------------------------------------------------------------
# log + engine


@dataclass(frozen=True)
class LogEntry:
    revision: int
    operation: Operation  # as applied (rebased, reverts materialized)
    section_hashes: tuple[tuple[str, str], ...] = ()

    def to_dict(self) -> dict:
        return {
            "operation": self.operation.to_dict(),
            "revision": self.revision,
            "section_hashes": {k: v for k, v in self.section_hashes},
        }


def _section_hash(section: Section | None) -> str:
    if section is None:
        return ""
    return hashlib.sha256(canonical_json(section.to_dict())).hexdigest()[:16]


class RevisionLog:
    """Append-only per-story operation log; revisions contiguous from
    base_revision+1 (base 0 for a full log, higher when the engine was
    recovered from a snapshot without earlier records)."""

    def __init__(self, story_id: str, base_revision: int = 0, entries: list[LogEntry] | None = None):
        self.story_id = story_id
        self.base_revision = base_revision
        self._entries: list[LogEntry] = []
        for e in entries or []:
            self.append(e)

    def append(self, entry: LogEntry) -> None:
        expected = self.base_revision + len(self._entries) + 1
        if entry.revision != expected:
            raise RevisionGap(f"expected revision {expected}, got {entry.revision}")
        self._entries.append(entry)

    def since(self, revision: int) -> list[LogEntry]:
        if revision < self.base_revision:
            raise RevisionGap(f"revision {revision} predates log base {self.base_revision}")
        return self._entries[revision - self.base_revision :]

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def entry(self, revision: int) -> LogEntry:
        return self._entries[revision - self.base_revision - 1]


@dataclass(frozen=True)
class SubmitResult:
    story: Story
    revision: int
    applied: Operation
    duplicate: bool = False


class Engine:
    """Single-story OT engine. Callers must serialize submissions per story;
    distinct stories are fully independent."""

    def __init__(
        self,
        base_story: Story,
        *,
        rebase_window: int = DEFAULT_REBASE_WINDOW,
        entries: list[LogEntry] | None = None,
        story: Story | None = None,
    ):
        self.base = base_story
        self.rebase_window = rebase_window
        self.log = RevisionLog(base_story.id, base_story.revision, entries)
        self._op_revisions = {e.operation.op_id: e.revision for e in self.log}
        # values are immutable, so keeping checkpoints is just extra refs;
        # they bound state_at replays (revert materialization) to one stride
        self._checkpoint_stride = 64
        self._checkpoints: dict[int, Story] = {}
        if story is not None:
            self.story = story
        else:
            self.story = self._replay(self.base.revision + len(self.log))

    # -- queries -----------------------------------------------------------

    def _replay(self, revision: int) -> Story:
        story = self.base
        starts = [r for r in self._checkpoints if self.base.revision < r <= revision]
        if starts:
            story = self._checkpoints[max(starts)]
        for entry in self.log.since(story.revision)[: revision - story.revision]:
            story = apply(story, entry.operation)
        return story

    def state_at(self, revision: int) -> Story:
        """Story state after ops 1..revision. Exact for every op-owned field
        (sections, headline, attribution, revision); recruitment fields ride
        whatever event watermark the replay start point carried. Revisions
        below the engine's base snapshot are unreachable."""
        if revision < self.base.revision or revision > self.story.revision:
            raise TargetRevisionUnknown(
                f"revision {revision} not in [{self.base.revision}, {self.story.revision}]"
            )
        if revision == self.story.revision:
            return self.story
        return self._replay(revision)

    def section_history(self, section_id: str) -> list[tuple[int, Section]]:
        """(revision, section state) at every revision that changed the
        section, oldest first. Reconstructed by replay; the log is the
        source of truth."""
        snapshots: list[tuple[int, Section]] = []
        story = self.base
        before = story.section(section_id)
        for entry in self.log:
            story = apply(story, entry.operation)
            after = story.section(section_id)
            if after != before:
                snapshots.append((entry.revision, after))
            before = after
        if not snapshots and self.story.section(section_id) is None:
            raise UnknownSection(f"section {section_id!r} never existed")
        return snapshots

    def materialize(self, op: Operation) -> Operation:
        """Fill a revert's content from the log so apply is state-local."""
        p = op.payload
        if not isinstance(p, RevertSection) or p.content is not None:
            return op
        state = self.state_at(p.target_revision)
        section = state.section(p.section_id)
        if section is None:
            raise TargetRevisionUnknown(
                f"section {p.section_id!r} did not exist at revision {p.target_revision}"
            )
        content = SectionContent(
            heading=section.heading,
            body=section.body,
            order_key=section.order_key,
            tombstone=section.tombstone,
            media=section.media,
        )
        return replace(op, payload=replace(p, content=content))

    # -- mutation ----------------------------------------------------------

    def submit(self, op: Operation) -> SubmitResult:
        """Rebase against everything logged past the op's base, apply, log.

        Duplicate op_ids (redelivery) return the original outcome without
        touching the story.
        """
        if op.base_revision > self.story.revision:
            raise MalformedOperation(
                f"base revision {op.base_revision} is ahead of story revision {self.story.revision}"
            )
        if op.base_revision < self.log.base_revision:
            raise BaseTooOld(f"op base {op.base_revision} predates retained history")
        if self.story.revision - op.base_revision > self.rebase_window:
            raise BaseTooOld(
                f"op base {op.base_revision} is {self.story.revision - op.base_revision} revisions behind"
            )
        prior = self._op_revisions.get(op.op_id)
        if prior is not None:
            return SubmitResult(self.story, prior, self.log.entry(prior).operation, duplicate=True)

        rebased = op
        for entry in self.log.since(op.base_revision):
            rebased = transform(rebased, entry.operation)
            if isinstance(rebased.payload, Noop):
                break
        rebased = self.materialize(rebased)

        new_story = apply(self.story, rebased)
        target = rebased.section_id()
        hashes = ((target, _section_hash(new_story.section(target))),) if target else ()
        entry = LogEntry(revision=new_story.revision, operation=rebased, section_hashes=hashes)
        self.log.append(entry)
        self._op_revisions[op.op_id] = entry.revision
        self.story = new_story
        if entry.revision % self._checkpoint_stride == 0:
            self._checkpoints[entry.revision] = new_story
        return SubmitResult(new_story, entry.revision, rebased)

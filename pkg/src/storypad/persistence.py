"""Durable append-only op log with periodic snapshots and crash recovery.

On-disk layout, one directory per story:

    {data_dir}/{story_id}/log.bin         operation records
    {data_dir}/{story_id}/events.bin      story events (offers/requests/views)
    {data_dir}/{story_id}/snap-{rev}.json checksummed story snapshots

Both .bin files are sequences of frames: 4-byte big-endian body length,
the JSON body, then a 4-byte big-endian CRC-32 of the body. A torn final
frame (short length, short body, or bad CRC) simply ends the valid prefix;
append repairs the file by truncating to that prefix first. Snapshots are
written atomically (tmp + rename) and carry their own CRC, so a corrupt
snapshot is skipped in favor of an older one. snap-0 is written at story
creation and doubles as the genesis state for full replay.
"""
from __future__ import annotations

import json
import os
import re
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

from .errors import CorruptStore, NotFound, RevisionGap
from .events import StoryEvent, VIEW_RECORDED, apply_event
from .model import Story, canonical_json
from .ops import Operation, op_from_dict
from . import engine as _engine

_LEN = struct.Struct(">I")
_MAX_FRAME = 16 * 1024 * 1024  # sanity bound when scanning possibly-garbage files


@dataclass(frozen=True)
class OpLogRecord:
    revision: int
    operation: Operation

    def body(self) -> bytes:
        return canonical_json({"operation": self.operation.to_dict(), "revision": self.revision})

    @property
    def checksum(self) -> int:
        return zlib.crc32(self.body())

    @classmethod
    def from_body(cls, body: bytes) -> "OpLogRecord":
        d = json.loads(body.decode("utf-8"))
        return cls(revision=d["revision"], operation=op_from_dict(d["operation"]))


def _frame(body: bytes) -> bytes:
    return _LEN.pack(len(body)) + body + _LEN.pack(zlib.crc32(body))


def _scan_frames(path: Path) -> tuple[list[bytes], int]:
    """All checksummed bodies plus the byte length of the valid prefix."""
    bodies: list[bytes] = []
    valid = 0
    if not path.exists():
        return bodies, valid
    data = path.read_bytes()
    pos = 0
    while pos + 4 <= len(data):
        (length,) = _LEN.unpack_from(data, pos)
        if length > _MAX_FRAME:
            break
        end = pos + 4 + length + 4
        if end > len(data):
            break
        body = data[pos + 4 : pos + 4 + length]
        (crc,) = _LEN.unpack_from(data, pos + 4 + length)
        if zlib.crc32(body) != crc:
            break
        bodies.append(body)
        valid = end
        pos = end
    return bodies, valid


class _FrameWriter:
    def __init__(self, path: Path, fsync: bool):
        self.path = path
        self.fsync = fsync
        self._fh = None

    def _open(self):
        if self._fh is None:
            _, valid = _scan_frames(self.path)
            self._fh = open(self.path, "ab")
            if self._fh.tell() != valid:
                # torn tail from a previous crash: drop it before appending
                self._fh.truncate(valid)
                self._fh.seek(valid)
        return self._fh

    def append(self, body: bytes) -> None:
        fh = self._open()
        fh.write(_frame(body))
        fh.flush()
        if self.fsync:
            os.fsync(fh.fileno())

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


_SNAP_RE = re.compile(r"^snap-(\d+)\.json$")


class StoryStore:
    """Files for one story. One writer at a time (the story's serialization
    task); reads of the immutable prefix are safe concurrently."""

    def __init__(self, root: Path, story_id: str, *, fsync: bool = True):
        self.dir = Path(root) / story_id
        self.story_id = story_id
        self._log = _FrameWriter(self.dir / "log.bin", fsync)
        self._events = _FrameWriter(self.dir / "events.bin", fsync)

    def exists(self) -> bool:
        return self.dir.is_dir()

    def create(self, story: Story) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)
        self.write_snapshot(story, event_seq=0)

    # -- op log ------------------------------------------------------------

    def last_revision(self) -> int:
        records = self.read_records()
        return records[-1].revision if records else 0

    def append(self, record: OpLogRecord) -> None:
        expected = self.last_revision() + 1
        if record.revision != expected:
            raise RevisionGap(f"expected revision {expected}, got {record.revision}")
        self._log.append(record.body())

    def append_unchecked(self, record: OpLogRecord) -> None:
        """Append without re-scanning; caller tracks contiguity (hot path)."""
        self._log.append(record.body())

    def read_records(self) -> list[OpLogRecord]:
        bodies, _ = _scan_frames(self.dir / "log.bin")
        records: list[OpLogRecord] = []
        for body in bodies:
            try:
                rec = OpLogRecord.from_body(body)
            except Exception:
                break  # checksummed but undecodable: treat as end of prefix
            if rec.revision != len(records) + 1:
                break
            records.append(rec)
        return records

    # -- events ------------------------------------------------------------

    def append_event(self, event: StoryEvent) -> None:
        self._events.append(canonical_json(event.to_dict()))

    def read_events(self) -> list[StoryEvent]:
        bodies, _ = _scan_frames(self.dir / "events.bin")
        events: list[StoryEvent] = []
        for body in bodies:
            try:
                ev = StoryEvent.from_dict(json.loads(body.decode("utf-8")))
            except Exception:
                break
            events.append(ev)
        return events

    # -- snapshots -----------------------------------------------------------

    def snapshot_path(self, revision: int) -> Path:
        return self.dir / f"snap-{revision}.json"

    def write_snapshot(self, story: Story, *, event_seq: int) -> None:
        story_blob = canonical_json(story.to_dict()).decode("utf-8")
        payload = canonical_json(
            {
                "checksum": zlib.crc32(story_blob.encode("utf-8")),
                "event_seq": event_seq,
                "revision": story.revision,
                "story": story.to_dict(),
            }
        )
        tmp = self.dir / f".snap-{story.revision}.tmp"
        tmp.write_bytes(payload)
        os.replace(tmp, self.snapshot_path(story.revision))

    def snapshot_revisions(self) -> list[int]:
        if not self.dir.is_dir():
            return []
        revs = []
        for name in os.listdir(self.dir):
            m = _SNAP_RE.match(name)
            if m:
                revs.append(int(m.group(1)))
        return sorted(revs)

    def load_snapshot(self, revision: int) -> tuple[Story, int] | None:
        """(story, event_seq), or None when missing/corrupt."""
        path = self.snapshot_path(revision)
        try:
            d = json.loads(path.read_text(encoding="utf-8"))
            story_blob = canonical_json(d["story"])
            if zlib.crc32(story_blob) != d["checksum"]:
                return None
            story = Story.from_dict(d["story"])
            if story.revision != revision or d["revision"] != revision:
                return None
            return story, d["event_seq"]
        except (OSError, ValueError, KeyError):
            return None

    def close(self) -> None:
        self._log.close()
        self._events.close()


class Store:
    def __init__(self, root, *, fsync: bool = True):
        self.root = Path(root)
        self.fsync = fsync

    def story(self, story_id: str) -> StoryStore:
        return StoryStore(self.root, story_id, fsync=self.fsync)

    def story_ids(self) -> list[str]:
        if not self.root.is_dir():
            return []
        return sorted(p.name for p in self.root.iterdir() if p.is_dir())


# ---------------------------------------------------------------------------
# recovery


@dataclass(frozen=True)
class Recovery:
    story: Story
    revision: int
    event_seq: int  # highest event seq present on disk
    views: dict
    genesis: Story | None  # snap-0 state when available
    base_story: Story  # the snapshot the fast path started from
    records: list[OpLogRecord]
    events: list[StoryEvent]
    replayed_ops: int  # ops applied on top of the chosen snapshot


def replay(base: Story, base_event_seq: int, records: list[OpLogRecord], events: list[StoryEvent]) -> Story:
    """Fold ops and events, merged by (at_revision, seq): an event applies
    once the story has reached the revision it was recorded at."""
    story = base
    pending = [e for e in events if e.seq > base_event_seq and e.kind != VIEW_RECORDED]
    i = 0
    for rec in records:
        if rec.revision <= story.revision:
            continue
        while i < len(pending) and pending[i].at_revision < rec.revision:
            story = apply_event(story, pending[i])
            i += 1
        story = _engine.apply(story, rec.operation)
    while i < len(pending) and pending[i].at_revision <= story.revision:
        story = apply_event(story, pending[i])
        i += 1
    return story


def count_views(events: list[StoryEvent]) -> dict:
    views = {"embed": 0, "export": 0, "first_party": 0}
    for e in events:
        if e.kind == VIEW_RECORDED:
            surface = e.data.get("surface")
            if surface in views:
                views[surface] += 1
    return views


def recover(store: Store, story_id: str) -> Recovery:
    """Latest valid snapshot plus replay of the valid record/event tails.

    Equals a full replay from revision 0 (the persistence tests hold the
    two paths against each other). Raises NotFound for an absent story and
    CorruptStore when no snapshot survives.
    """
    ss = store.story(story_id)
    if not ss.exists():
        raise NotFound(f"no story {story_id!r} in store")
    records = ss.read_records()
    events = ss.read_events()

    base: tuple[Story, int] | None = None
    for rev in reversed(ss.snapshot_revisions()):
        if rev > len(records):
            continue  # snapshot ahead of the surviving log: prefer replayable state
        base = ss.load_snapshot(rev)
        if base is not None:
            break
    if base is None:
        raise CorruptStore(f"story {story_id!r}: no valid snapshot")
    base_story, base_seq = base

    tail = [r for r in records if r.revision > base_story.revision]
    story = replay(base_story, base_seq, tail, events)
    genesis = ss.load_snapshot(0)
    max_seq = max((e.seq for e in events), default=base_seq)
    return Recovery(
        story=story,
        revision=story.revision,
        event_seq=max_seq,
        views=count_views(events),
        genesis=genesis[0] if genesis else None,
        base_story=base_story,
        records=records,
        events=events,
        replayed_ops=len(tail),
    )


def snapshot_if_due(story_store: StoryStore, story: Story, interval: int, *, event_seq: int) -> bool:
    """Write a snapshot when the revision hits the interval; appends never
    wait on this semantically (it happens after the op is durable)."""
    if interval > 0 and story.revision > 0 and story.revision % interval == 0:
        story_store.write_snapshot(story, event_seq=event_seq)
        return True
    return False

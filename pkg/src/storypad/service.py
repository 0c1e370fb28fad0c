"""Per-story application service.

Wraps one Engine with everything the op path alone doesn't cover:
contributor tracking, offers/requests (as events), auto-dismissal of
requests whose section was removed, view counters, durable persistence,
and periodic snapshots. All calls for one story must be serialized by the
caller (the server gives each story one task; the sim drives it directly).
"""
from __future__ import annotations

import secrets
import time
from dataclasses import dataclass, field
from typing import Callable

from . import events as ev
from . import persistence, recruitment
from .engine import DEFAULT_REBASE_WINDOW, Engine, LogEntry, SubmitResult
from .errors import EmptyName, NotFound
from .events import StoryEvent
from .ids import new_id
from .model import Story, new_story
from .ops import Operation
from .persistence import OpLogRecord, Store, StoryStore

DEFAULT_SNAPSHOT_INTERVAL = 100


@dataclass
class OpOutcome:
    result: SubmitResult
    events: list[StoryEvent] = field(default_factory=list)


class StoryService:
    def __init__(
        self,
        engine: Engine,
        *,
        story_store: StoryStore | None = None,
        clock: Callable[[], float] = time.time,
        randbytes: Callable[[int], bytes] | None = None,
        snapshot_interval: int = DEFAULT_SNAPSHOT_INTERVAL,
        notifier: recruitment.Notifier | None = None,
        token_index: recruitment.TokenIndex | None = None,
        base_url: str = "http://localhost:8000",
        event_seq: int = 0,
        views: dict | None = None,
        idgen: Callable[[str], str] = new_id,
    ):
        self.engine = engine
        self.story_store = story_store
        self.clock = clock
        self.idgen = idgen
        self.randbytes = randbytes or secrets.token_bytes
        self.snapshot_interval = snapshot_interval
        self.notifier = notifier
        self.token_index = token_index if token_index is not None else recruitment.TokenIndex()
        self.base_url = base_url
        self.event_seq = event_seq
        self.views = dict(views) if views else {"embed": 0, "export": 0, "first_party": 0}
        self.token_index.index_story(engine.story)

    # -- construction --------------------------------------------------------

    @classmethod
    def create(
        cls,
        topic: str,
        creator: str,
        *,
        store: Store | None = None,
        story_id: str | None = None,
        rebase_window: int = DEFAULT_REBASE_WINDOW,
        **kwargs,
    ) -> "StoryService":
        clock = kwargs.get("clock", time.time)
        story = new_story(topic, creator, story_id=story_id, created_at=clock())
        story_store = None
        if store is not None:
            story_store = store.story(story.id)
            story_store.create(story)
        engine = Engine(story, rebase_window=rebase_window)
        return cls(engine, story_store=story_store, **kwargs)

    @classmethod
    def open(
        cls,
        store: Store,
        story_id: str,
        *,
        rebase_window: int = DEFAULT_REBASE_WINDOW,
        **kwargs,
    ) -> "StoryService":
        """Recover a story from disk; equals a full replay of its logs."""
        rec = persistence.recover(store, story_id)
        base = rec.genesis if rec.genesis is not None else rec.base_story
        entries = [
            LogEntry(revision=r.revision, operation=r.operation)
            for r in rec.records
            if r.revision > base.revision
        ]
        engine = Engine(base, rebase_window=rebase_window, entries=entries, story=rec.story)
        return cls(
            engine,
            story_store=store.story(story_id),
            event_seq=rec.event_seq,
            views=rec.views,
            **kwargs,
        )

    # -- state -----------------------------------------------------------------

    @property
    def story(self) -> Story:
        return self.engine.story

    def outstanding_count(self) -> int:
        return recruitment.outstanding_count(self.story)

    # -- event plumbing ---------------------------------------------------------

    def _emit(self, kind: str, data: dict) -> StoryEvent:
        self.event_seq += 1
        event = StoryEvent(seq=self.event_seq, at_revision=self.story.revision, kind=kind, data=data)
        if self.story_store is not None:
            self.story_store.append_event(event)
        if kind != ev.VIEW_RECORDED:
            self.engine.story = ev.apply_event(self.engine.story, event)
        return event

    # -- operations -------------------------------------------------------------

    def submit_op(self, op: Operation, *, actor_display: str | None = None) -> OpOutcome:
        """Serialize one client op: rebase, apply, persist, then derive the
        follow-on events (contributor roster, orphaned-request dismissal)."""
        result = self.engine.submit(op)
        if result.duplicate:
            return OpOutcome(result=result)
        if self.story_store is not None:
            self.story_store.append_unchecked(OpLogRecord(result.revision, result.applied))

        emitted: list[StoryEvent] = []
        display = actor_display or op.actor
        roster = dict(self.story.contributors)
        if roster.get(op.actor) != display:
            emitted.append(self._emit(ev.CONTRIBUTOR_SEEN, {"actor": op.actor, "display_name": display}))

        if result.applied.kind in ("remove_section", "revert_section"):
            emitted.extend(self._auto_dismiss())

        self._snapshot_if_due()
        return OpOutcome(result=result, events=emitted)

    def _auto_dismiss(self) -> list[StoryEvent]:
        now = self.clock()
        _, orphaned = recruitment.auto_dismiss_orphans(self.story, resolved_at=now)
        out = []
        for request_id in orphaned:
            out.append(
                self._emit(
                    ev.REQUEST_RESOLVED,
                    {"auto": True, "request_id": request_id, "resolved_at": now, "status": "dismissed"},
                )
            )
        return out

    def _snapshot_if_due(self) -> None:
        if self.story_store is not None:
            persistence.snapshot_if_due(
                self.story_store, self.story, self.snapshot_interval, event_seq=self.event_seq
            )

    # -- recruitment -------------------------------------------------------------

    def add_offer(self, actor: str, display_name: str) -> StoryEvent:
        if not display_name.strip():
            raise EmptyName("offer display name must be non-empty")
        return self._emit(
            ev.OFFER_ADDED,
            {"actor": actor, "created_at": self.clock(), "display_name": display_name},
        )

    def suggested_recipients(self) -> list[str]:
        return recruitment.suggested_recipients(self.story)

    def create_request(
        self,
        requester_name: str,
        recipient: str,
        request_text: str,
        topic: str | None = None,
        section_id: str | None = None,
    ):
        """(request, shareable link, event). Validates against the current
        story, issues a never-reused token, and pings the notifier."""
        token = recruitment.make_token(self.randbytes)
        while token in self.token_index:
            token = recruitment.make_token(self.randbytes)
        request_id = self.idgen("r")
        # validate before emitting; create_request raises on bad input
        _, request = recruitment.create_request(
            self.story,
            requester_name,
            recipient,
            request_text,
            topic if topic is not None else self.story.topic,
            section_id,
            request_id=request_id,
            token=token,
            created_at=self.clock(),
        )
        event = self._emit(ev.REQUEST_CREATED, {"request": request.to_dict()})
        self.token_index.add(token, self.story.id, request.id)
        link = recruitment.build_link(self.base_url, token)
        if self.notifier is not None:
            self.notifier.notify(recipient, link, request)
        return request, link, event

    def _resolve_request(self, request_id: str, status: str) -> StoryEvent:
        now = self.clock()
        # raises UnknownRequest / AlreadyResolved before any event is emitted
        if status == "fulfilled":
            recruitment.fulfill_request(self.story, request_id, resolved_at=now)
        else:
            recruitment.dismiss_request(self.story, request_id, resolved_at=now)
        return self._emit(
            ev.REQUEST_RESOLVED,
            {"auto": False, "request_id": request_id, "resolved_at": now, "status": status},
        )

    def fulfill_request(self, request_id: str) -> StoryEvent:
        return self._resolve_request(request_id, "fulfilled")

    def dismiss_request(self, request_id: str) -> StoryEvent:
        return self._resolve_request(request_id, "dismissed")

    def resolve_token(self, token: str):
        return recruitment.resolve_token(self.story, self.token_index, token)

    # -- views ----------------------------------------------------------------

    def record_view(self, surface: str) -> None:
        if surface not in self.views:
            raise NotFound(f"unknown view surface {surface!r}")
        self.views[surface] += 1
        self._emit(ev.VIEW_RECORDED, {"surface": surface})

    def close(self) -> None:
        if self.story_store is not None:
            self.story_store.close()

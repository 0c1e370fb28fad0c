"""Per-story serialization rooms and session fan-out.

One asyncio task per story owns its StoryService (engine + log writer);
sessions and HTTP handlers submit closures to the room queue and await the
result, so story mutation is single-file by construction. Subscribers get
a bounded outbound queue each; a consumer that can't keep up is cut loose
and must resubscribe.
"""
from __future__ import annotations

import asyncio
import itertools
from dataclasses import dataclass, field

from ..errors import RevisionGap
from ..events import BROADCAST_KINDS
from ..model import outstanding_count
from ..ops import Operation
from ..service import StoryService
from . import protocol


@dataclass
class Subscriber:
    session_id: int
    actor_id: str
    queue: asyncio.Queue = field(default_factory=asyncio.Queue)
    dead: bool = False


class Room:
    def __init__(self, service: StoryService, *, queue_depth: int = 256):
        self.service = service
        self.queue_depth = queue_depth
        self.subscribers: dict[int, Subscriber] = {}
        self._calls: asyncio.Queue = asyncio.Queue()
        self._task: asyncio.Task | None = None
        self._ids = itertools.count(1)

    @property
    def story_id(self) -> str:
        return self.service.story.id

    def start(self) -> None:
        if self._task is None:
            self._task = asyncio.get_running_loop().create_task(self._loop())

    async def stop(self) -> None:
        if self._task is not None:
            await self._calls.put(None)
            await self._task
            self._task = None
        self.service.close()

    async def _loop(self) -> None:
        while True:
            item = await self._calls.get()
            if item is None:
                return
            fn, fut = item
            try:
                result = fn()
            except BaseException as exc:  # surfaced to the awaiting caller
                if not fut.cancelled():
                    fut.set_exception(exc)
            else:
                if not fut.cancelled():
                    fut.set_result(result)

    async def call(self, fn):
        """Run fn() inside the story's serialization task."""
        self.start()
        fut = asyncio.get_running_loop().create_future()
        await self._calls.put((fn, fut))
        return await fut

    # -- fan-out (call these only from inside room functions) -----------------

    def _push(self, sub: Subscriber, frame: dict) -> None:
        if sub.dead:
            return
        if sub.queue.qsize() >= self.queue_depth:
            sub.dead = True  # slow consumer: drop it rather than stall the story
            sub.queue.put_nowait(None)
            return
        sub.queue.put_nowait(frame)

    def _broadcast_events(self, events) -> None:
        to_send = [e for e in events if e.kind in BROADCAST_KINDS]
        if not to_send:
            return
        frame = protocol.request_update(outstanding_count(self.service.story), to_send)
        for sub in list(self.subscribers.values()):
            self._push(sub, frame)

    # -- room functions ----------------------------------------------------------

    def subscribe_fn(self, sub: Subscriber, have_revision: int | None):
        """Register a subscriber and build its catch-up frame atomically, so
        no revision can slip between the snapshot and the registration."""

        def fn():
            story = self.service.story
            self.subscribers[sub.session_id] = sub
            if have_revision is not None and 0 <= have_revision <= story.revision:
                gap = story.revision - have_revision
                if gap <= self.service.engine.rebase_window:
                    try:
                        entries = self.service.engine.log.since(have_revision)
                        return protocol.ops_since(entries, story.revision)
                    except RevisionGap:
                        pass  # recovered engine without that history: full snapshot
            return protocol.snapshot(story, self.service.event_seq)

        return fn

    def unsubscribe(self, session_id: int) -> None:
        self.subscribers.pop(session_id, None)

    def submit_fn(self, sub_id: int, op: Operation, actor_display: str | None):
        def fn():
            outcome = self.service.submit_op(op, actor_display=actor_display)
            ack = protocol.ack(outcome.result.revision, outcome.result.applied)
            # the ack rides the submitter's own ordered queue, inside this
            # task, so no later revision can overtake it
            me = self.subscribers.get(sub_id)
            if me is not None:
                self._push(me, ack)
            if not outcome.result.duplicate:
                frame = protocol.remote_op(outcome.result.revision, outcome.result.applied)
                for sid, sub in list(self.subscribers.items()):
                    if sid != sub_id:
                        self._push(sub, frame)
                self._broadcast_events(outcome.events)
            return ack

        return fn

    async def submit_http(self, op: Operation, actor_display: str | None = None):
        """HTTP-side op submission (no session of its own to ack)."""
        return await self.call(self.submit_fn(-1, op, actor_display))

    async def add_offer(self, actor: str, display_name: str):
        def fn():
            event = self.service.add_offer(actor, display_name)
            self._broadcast_events([event])
            return event

        return await self.call(fn)

    async def create_request(self, requester_name, recipient, request_text, topic, section_id):
        def fn():
            request, link, event = self.service.create_request(
                requester_name, recipient, request_text, topic, section_id
            )
            self._broadcast_events([event])
            return request, link

        return await self.call(fn)

    async def resolve_request(self, request_id: str, status: str):
        def fn():
            if status == "fulfilled":
                event = self.service.fulfill_request(request_id)
            else:
                event = self.service.dismiss_request(request_id)
            self._broadcast_events([event])
            return self.service.story.request(request_id)

        return await self.call(fn)

    async def record_view(self, surface: str) -> None:
        await self.call(lambda: self.service.record_view(surface))

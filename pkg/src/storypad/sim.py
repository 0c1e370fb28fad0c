"""Convergence fuzzer and transform oracle.

Two entry points:

  storypad-fuzz    N simulated clients push random workloads through the
                   real submit path (in-process service or a live server),
                   with injected duplicate delivery and randomized
                   interleaving; exit code is nonzero unless every client
                   and the server finish on identical state hashes.

  storypad-oracle  exhaustive both-orders check of the TP1 identity
                   apply(apply(S,a),T(b,a)) == apply(apply(S,b),T(a,b))
                   over a small bounded domain of states and op pairs.

In in_process mode everything (ids, tokens, interleaving, timestamps)
derives from the seed, so identical seeds produce identical reports.
"""
from __future__ import annotations

import argparse
import itertools
import json
import random
import sys
import time
from collections import deque
from dataclasses import dataclass, field, replace

from .engine import Engine, apply, transform
from .errors import AlreadyResolved, StorypadError, UnknownRequest, UnknownSection
from .events import StoryEvent, apply_event
from .model import MediaEmbed, Story, new_story, story_hash
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
    SetHeading,
    SetHeadline,
    TextDelete,
    TextInsert,
)
from .orderkeys import between
from .service import StoryService

ALL_KINDS = (
    "noop",
    "set_headline",
    "insert_section",
    "remove_section",
    "move_section",
    "set_heading",
    "text_insert",
    "text_delete",
    "add_media",
    "remove_media",
    "revert_section",
    "add_attribution",
)


# ---------------------------------------------------------------------------
# TP1 oracle


def _photo(media_id: str, n: int = 1) -> MediaEmbed:
    return MediaEmbed(
        id=media_id,
        source_url=f"https://example.com/{media_id}.jpg",
        kind="photo",
        title=None,
        resolved_html_safe=f'<a href="https://example.com/{media_id}.jpg">p{n}</a>',
    )


def _submit(engine: Engine, actor: str, op_id: str, payload) -> None:
    engine.submit(Operation(op_id=op_id, actor=actor, base_revision=engine.story.revision, payload=payload))


def _oracle_states(max_len: int, max_sections: int) -> list[tuple[str, Engine]]:
    """Small bounded-state universe, each state an engine with real history
    (reverts need a log to target)."""
    states: list[tuple[str, Engine]] = []

    e0 = Engine(new_story("Oracle", "setup", story_id="story0"))
    states.append(("empty", e0))

    e1 = Engine(new_story("Oracle", "setup", story_id="story1"))
    _submit(e1, "setup", "s1-1", InsertSection(section_id="sa", order_key=between(None, None)))
    body = "abcd"[:max_len]
    if body:
        _submit(e1, "setup", "s1-2", TextInsert(section_id="sa", offset=0, text=body))
    _submit(e1, "setup", "s1-3", SetHeading(section_id="sa", text="H"))
    _submit(e1, "setup", "s1-4", AddMedia(section_id="sa", media=_photo("m1"), position=between(None, None)))
    states.append(("one-section", e1))

    if max_sections >= 3:
        e3 = Engine(new_story("Oracle", "setup", story_id="story3"))
        k1 = between(None, None)
        _submit(e3, "setup", "s3-1", InsertSection(section_id="sa", order_key=k1))
        k2 = between(k1, None)
        _submit(e3, "setup", "s3-2", InsertSection(section_id="sb", order_key=k2))
        k3 = between(k2, None)
        _submit(e3, "setup", "s3-3", InsertSection(section_id="sc", order_key=k3))
        _submit(e3, "setup", "s3-4", TextInsert(section_id="sa", offset=0, text="abcd"[:max_len]))
        _submit(e3, "setup", "s3-5", TextInsert(section_id="sb", offset=0, text="x"))
        _submit(e3, "setup", "s3-6", AddMedia(section_id="sb", media=_photo("m1"), position=between(None, None)))
        _submit(e3, "setup", "s3-7", TextDelete(section_id="sa", offset=0, length=1))
        _submit(e3, "setup", "s3-8", RemoveSection(section_id="sc"))
        states.append(("three-sections", e3))

    return states


def _domain_ops(engine: Engine, max_len: int) -> list[Operation]:
    """Every op shape a correct client could submit at this state, plus the
    key/offset collisions races produce, two actors for tie coverage."""
    story = engine.story
    ops: list[Operation] = []
    serial = itertools.count(1)

    def add(actor: str, payload) -> None:
        ops.append(
            Operation(op_id=f"d{next(serial):03d}", actor=actor, base_revision=story.revision, payload=payload)
        )

    add("ua", Noop())
    add("ub", Noop())
    add("ua", SetHeadline(text="Headline A"))
    add("ub", SetHeadline(text="Headline B"))
    add("ua", AddAttribution(actor="ua", display_name="Alice"))
    add("ub", AddAttribution(actor="ua", display_name="Al"))
    add("ub", AddAttribution(actor="ub", display_name="Bob", accepted=False))

    live = list(story.live_sections())
    keys = [s.order_key for s in live]

    # fresh inserts: head, tail, and a deliberate collision with an existing key
    add("ua", InsertSection(section_id="na", order_key=between(None, keys[0] if keys else None)))
    add("ub", InsertSection(section_id="nb", order_key=between(keys[-1] if keys else None, None)))
    if keys:
        add("ua", InsertSection(section_id="nc", order_key=keys[0], heading="clash"))
        add("ub", InsertSection(section_id="nd", order_key=keys[0], heading="clash2"))

    for s in live:
        sid = s.id
        add("ua", RemoveSection(section_id=sid))
        add("ub", RemoveSection(section_id=sid))
        add("ua", MoveSection(section_id=sid, new_order_key=between(None, keys[0])))
        add("ub", MoveSection(section_id=sid, new_order_key=between(keys[-1], None)))
        if len(keys) > 1:
            other = next(k for k in keys if k != s.order_key)
            add("ua", MoveSection(section_id=sid, new_order_key=other))
        add("ua", SetHeading(section_id=sid, text="left"))
        add("ub", SetHeading(section_id=sid, text="right"))
        n = len(s.body)
        for off in sorted({0, n // 2, n}):
            add("ua", TextInsert(section_id=sid, offset=off, text="X"))
            add("ub", TextInsert(section_id=sid, offset=off, text="YZ"))
        for off in range(n):
            for length in range(1, n - off + 1):
                add("ua" if (off + length) % 2 else "ub", TextDelete(section_id=sid, offset=off, length=length))
        mkeys = [m.order_key for m in s.media]
        add("ua", AddMedia(section_id=sid, media=_photo("fm1", 2), position=between(None, None)))
        if mkeys:
            add("ub", AddMedia(section_id=sid, media=_photo("fm2", 3), position=mkeys[0]))
        for m in s.media:
            add("ua", RemoveMedia(section_id=sid, media_id=m.embed.id))
            add("ub", RemoveMedia(section_id=sid, media_id=m.embed.id))

    # reverts to birth, midpoint and current revision for every section ever seen
    for s in story.sections:
        targets = sorted({1, story.revision // 2, story.revision})
        for t in targets:
            if t < 1:
                continue
            try:
                engine.state_at(t).section(s.id)
            except StorypadError:
                continue
            if engine.state_at(t).section(s.id) is None:
                continue
            add("ua" if t % 2 else "ub", RevertSection(section_id=s.id, target_revision=t))

    return ops


@dataclass
class OracleReport:
    pairs_checked: int = 0
    counterexamples: list = field(default_factory=list)
    kind_pairs: set = field(default_factory=set)
    states: int = 0

    @property
    def passed(self) -> bool:
        return not self.counterexamples

    def to_dict(self) -> dict:
        return {
            "counterexamples": self.counterexamples[:10],
            "kind_pairs_covered": sorted(",".join(p) for p in self.kind_pairs),
            "pairs_checked": self.pairs_checked,
            "passed": self.passed,
            "states": self.states,
        }


def run_oracle_suite(
    max_len: int = 4,
    *,
    max_sections: int = 3,
    transform_fn=None,
    kinds: tuple = ALL_KINDS,
    max_counterexamples: int = 25,
) -> OracleReport:
    """Both-orders application over the bounded domain; zero counterexamples
    means TP1 holds for every generated payload pair. A deliberately broken
    transform_fn makes this report the counterexample, which is how the
    harness's own sensitivity is tested."""
    tf = transform_fn if transform_fn is not None else transform
    report = OracleReport()
    for state_name, engine in _oracle_states(max_len, max_sections):
        report.states += 1
        base = engine.story
        ops = [op for op in _domain_ops(engine, max_len) if op.kind in kinds]
        ops = [engine.materialize(op) for op in ops]
        for i, a in enumerate(ops):
            for b in ops[i + 1 :]:
                report.pairs_checked += 1
                report.kind_pairs.add(tuple(sorted((a.kind, b.kind))))
                try:
                    one = apply(apply(base, a), tf(b, a))
                    two = apply(apply(base, b), tf(a, b))
                except StorypadError as exc:
                    one, two = exc, None
                if one != two:
                    if len(report.counterexamples) < max_counterexamples:
                        report.counterexamples.append(
                            {
                                "state": state_name,
                                "op_a": a.to_dict(),
                                "op_b": b.to_dict(),
                                "order_ab": story_hash(one) if isinstance(one, Story) else repr(one),
                                "order_ba": story_hash(two) if isinstance(two, Story) else repr(two),
                            }
                        )
    return report


# ---------------------------------------------------------------------------
# simulated client (shared by in-process and network modes)


class SimClient:
    """Optimistic client: local edits apply immediately and rebase against
    the server stream; one op in flight at a time; reverts bypass the
    optimistic path and land via their ack."""

    def __init__(self, actor: str, story: Story, revision: int, rng: random.Random):
        self.actor = actor
        self.story = story
        self.confirmed = revision
        self.rng = rng
        self.pending: deque[Operation] = deque()
        self.inflight = False
        self.bypass: set[str] = set()
        self.births: dict[str, int] = {s.id: 0 for s in story.sections}
        self.event_seq = 0
        self.ops_made = 0
        self._serial = itertools.count(1)

    # -- inbound ------------------------------------------------------------

    def _absorb(self, op: Operation, revision: int) -> None:
        """Dual-transform an incoming server op against pending, apply it."""
        incoming = op
        rebased: deque[Operation] = deque()
        for p in self.pending:
            rebased.append(transform(p, incoming))
            incoming = transform(incoming, p)
        self.pending = rebased
        self.story = apply(self.story, incoming)
        self.confirmed = revision
        if incoming.kind == "insert_section":
            self.births[incoming.payload.section_id] = revision
        if incoming.kind == "revert_section":
            self.births.setdefault(incoming.payload.section_id, revision)

    def on_remote_op(self, revision: int, op: Operation) -> None:
        if revision <= self.confirmed:
            return  # duplicate delivery
        assert revision == self.confirmed + 1, f"gap: saw {revision} after {self.confirmed}"
        self._absorb(op, revision)

    def on_ack(self, revision: int, op: Operation) -> None:
        if op.op_id in self.bypass:
            # reverts ride the send queue but are never applied optimistically:
            # drop the placeholder and absorb the materialized op like a remote
            self.bypass.discard(op.op_id)
            self.inflight = False
            self.pending = deque(p for p in self.pending if p.op_id != op.op_id)
            if revision <= self.confirmed:
                return  # duplicate-submission ack for an already-seen revision
            self._absorb(op, revision)
            return
        if not self.pending or self.pending[0].op_id != op.op_id:
            return  # stale duplicate ack
        self.pending.popleft()
        self.inflight = False
        assert revision == self.confirmed + 1, f"ack gap: {revision} after {self.confirmed}"
        self.confirmed = revision
        # the op was applied optimistically without a revision bump; the ack
        # confirms its slot in the server order
        self.story = replace(self.story, revision=revision)
        if op.kind == "insert_section":
            self.births[op.payload.section_id] = revision

    def on_event(self, event: StoryEvent) -> None:
        if event.seq <= self.event_seq:
            return  # duplicate delivery
        self.event_seq = event.seq
        self.story = apply_event(self.story, event)

    # -- outbound -----------------------------------------------------------

    def next_frame(self):
        """The op to send now, if any (one in flight at a time)."""
        if self.inflight or not self.pending:
            return None
        self.inflight = True
        head = self.pending[0]
        return replace(head, base_revision=self.confirmed)

    def can_generate(self) -> bool:
        return len(self.pending) < 4

    def _new_op(self, payload) -> Operation:
        return Operation(
            op_id=f"{self.actor}-{next(self._serial)}",
            actor=self.actor,
            base_revision=self.confirmed,
            payload=payload,
        )

    def generate_edit(self) -> Operation | None:
        """One random edit valid against the local optimistic state.
        Mix per workload policy: 60% text, 15% structure, 10% media,
        5% revert (request traffic is generated separately)."""
        rng = self.rng
        story = self.story
        live = list(story.live_sections())
        roll = rng.random() * 90  # request bucket (10%) handled by the harness

        if roll < 60:  # text edits incl. the occasional heading/headline
            if not live:
                return self._insert_section()
            s = rng.choice(live)
            sub = rng.random()
            if sub < 0.55 or (sub < 0.85 and not s.body):
                off = rng.randint(0, len(s.body))
                text = "".join(rng.choice("abcdefgh ") for _ in range(rng.randint(1, 3)))
                return self._optimistic(TextInsert(section_id=s.id, offset=off, text=text))
            if sub < 0.85:
                off = rng.randint(0, len(s.body) - 1)
                length = rng.randint(1, min(3, len(s.body) - off))
                return self._optimistic(TextDelete(section_id=s.id, offset=off, length=length))
            if sub < 0.95:
                return self._optimistic(SetHeading(section_id=s.id, text=f"h{rng.randint(0, 99)}"))
            return self._optimistic(SetHeadline(text=f"Headline {rng.randint(0, 99)}"))

        if roll < 75:  # section structure
            sub = rng.random()
            if sub < 0.5 or not live:
                return self._insert_section()
            s = rng.choice(live)
            if sub < 0.75 and len(live) > 1:
                return self._optimistic(RemoveSection(section_id=s.id))
            return self._optimistic(MoveSection(section_id=s.id, new_order_key=self._pick_key()))

        if roll < 85:  # media
            if not live:
                return self._insert_section()
            s = rng.choice(live)
            if s.media and rng.random() < 0.4:
                slot = rng.choice(list(s.media))
                return self._optimistic(RemoveMedia(section_id=s.id, media_id=slot.embed.id))
            mid = f"{self.actor}m{next(self._serial)}"
            media = _photo(mid, rng.randint(1, 9))
            mkeys = [m.order_key for m in s.media]
            pos = between(mkeys[-1] if mkeys else None, None) if rng.random() < 0.8 else (
                mkeys[0] if mkeys else between(None, None)
            )
            return self._optimistic(AddMedia(section_id=s.id, media=media, position=pos))

        # revert: bypasses the optimistic path (needs server materialization)
        candidates = [(sid, birth) for sid, birth in self.births.items() if birth <= self.confirmed]
        if not candidates or self.confirmed < 1:
            return self._insert_section()
        sid, birth = rng.choice(sorted(candidates))
        target = rng.randint(max(birth, 1), self.confirmed)
        op = self._new_op(RevertSection(section_id=sid, target_revision=target))
        self.bypass.add(op.op_id)
        self.pending.append(op)  # rides the same send queue, not applied locally
        self.ops_made += 1
        return op

    def _pick_key(self):
        # racing inserts can tie on a key, so gaps come from the distinct keys
        keys = sorted({s.order_key for s in self.story.live_sections()})
        rng = self.rng
        if not keys:
            return between(None, None)
        i = rng.randint(0, len(keys))
        lo = keys[i - 1] if i > 0 else None
        hi = keys[i] if i < len(keys) else None
        if rng.random() < 0.15:  # deliberate collision race
            return rng.choice(keys)
        return between(lo, hi)

    def _insert_section(self) -> Operation:
        sid = f"{self.actor}s{next(self._serial)}"
        return self._optimistic(InsertSection(section_id=sid, order_key=self._pick_key(), heading=""))

    def _optimistic(self, payload) -> Operation:
        op = self._new_op(payload)
        self.story = apply(self.story, op)
        # optimistic apply bumped local revision; confirmed tracks the server
        self.story = replace(self.story, revision=self.story.revision - 1)
        self.pending.append(op)
        self.ops_made += 1
        return op

    def quiesced(self) -> bool:
        return not self.pending and not self.bypass


# ---------------------------------------------------------------------------
# in-process fuzz


@dataclass
class FuzzReport:
    converged: bool
    mode: str
    clients: int
    ops_per_client: int
    seed: int
    server_hash: str = ""
    state_hashes: dict = field(default_factory=dict)
    final_revision: int = 0
    ops_applied: int = 0
    request_actions: int = 0
    duplicates_injected: int = 0
    rejected_races: int = 0
    elapsed_s: float = 0.0
    divergence: dict | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "clients": self.clients,
            "converged": self.converged,
            "divergence": self.divergence,
            "duplicates_injected": self.duplicates_injected,
            "elapsed_s": round(self.elapsed_s, 4),
            "error": self.error,
            "final_revision": self.final_revision,
            "mode": self.mode,
            "ops_applied": self.ops_applied,
            "ops_per_client": self.ops_per_client,
            "rejected_races": self.rejected_races,
            "request_actions": self.request_actions,
            "seed": self.seed,
            "server_hash": self.server_hash,
            "state_hashes": self.state_hashes,
        }


class _InProcessRun:
    """One deterministic interleaving: every random draw comes from the
    seeded rng, so a (seed, action_cap) pair replays identically."""

    def __init__(self, clients: int, ops_per_client: int, seed: int, action_cap: int | None = None):
        self.rng = random.Random(seed)
        self.n = clients
        self.m = ops_per_client
        self.action_cap = action_cap
        self.actions: list[str] = []
        self.rejected_races = 0
        self.duplicates = 0
        self.request_actions = 0

        tick = itertools.count(1)
        self._clock = lambda: float(next(tick))
        serial = itertools.count(1)
        self._idgen = lambda prefix: f"{prefix}{next(serial)}"
        rb = random.Random(seed ^ 0x5EED)
        self.service = StoryService.create(
            "Fuzz Story",
            "creator",
            story_id="fuzzstory",
            clock=self._clock,
            randbytes=lambda k: bytes(rb.getrandbits(8) for _ in range(k)),
            idgen=self._idgen,
        )
        base = self.service.story
        self.clients = [
            SimClient(f"c{i}", base, base.revision, random.Random(seed * 1000 + i)) for i in range(clients)
        ]
        self.inboxes: list[deque] = [deque() for _ in range(clients)]
        self.submit_queue: deque = deque()
        self.generated = [0] * clients

    # -- server side ---------------------------------------------------------

    def _broadcast_events(self, events) -> None:
        for event in events:
            for inbox in self.inboxes:
                inbox.append(("event", event))

    def _server_step(self) -> None:
        sender, frame = self.submit_queue.popleft()
        kind = frame[0]
        if kind == "op":
            op = frame[1]
            outcome = self.service.submit_op(op, actor_display=self.clients[sender].actor)
            self.inboxes[sender].append(("ack", outcome.result.revision, outcome.result.applied))
            if not outcome.result.duplicate:
                for i, inbox in enumerate(self.inboxes):
                    if i != sender:
                        inbox.append(("remote_op", outcome.result.revision, outcome.result.applied))
                self._broadcast_events(outcome.events)
            return
        action = frame[1]
        try:
            if action == "offer":
                event = self.service.add_offer(frame[2], frame[3])
                self._broadcast_events([event])
            elif action == "create":
                _, _, event = self.service.create_request(*frame[2:])
                self._broadcast_events([event])
            elif action == "fulfill":
                self._broadcast_events([self.service.fulfill_request(frame[2])])
            elif action == "dismiss":
                self._broadcast_events([self.service.dismiss_request(frame[2])])
        except (AlreadyResolved, UnknownRequest, UnknownSection):
            self.rejected_races += 1  # stale local view lost the race: expected

    # -- client side ---------------------------------------------------------

    def _deliver(self, i: int) -> None:
        inbox = self.inboxes[i]
        if self.rng.random() < 0.03 and inbox:
            frame = inbox[0]  # duplicate delivery: peek without popping
            self.duplicates += 1
        else:
            frame = inbox.popleft()
        client = self.clients[i]
        if frame[0] == "remote_op":
            client.on_remote_op(frame[1], frame[2])
        elif frame[0] == "ack":
            client.on_ack(frame[1], frame[2])
        else:
            client.on_event(frame[1])

    def _generate(self, i: int) -> None:
        client = self.clients[i]
        if self.rng.random() < 0.10:
            self._generate_request_action(i)
            self.generated[i] += 1
            return
        op = client.generate_edit()
        if op is not None:
            self.generated[i] += 1

    def _generate_request_action(self, i: int) -> None:
        client = self.clients[i]
        rng = client.rng
        story = client.story
        sub = rng.random()
        self.request_actions += 1
        if sub < 0.25:
            self.submit_queue.append((i, ("req", "offer", client.actor, f"Helper {client.actor}")))
            return
        if sub < 0.60:
            live = list(story.live_sections())
            section_id = rng.choice(live).id if live and rng.random() < 0.8 else None
            recipients = [o.display_name for o in story.offers]
            recipient = rng.choice(recipients) if recipients and rng.random() < 0.5 else "@neighbor"
            self.submit_queue.append(
                (i, ("req", "create", f"Req {client.actor}", recipient, f"please improve {rng.randint(0,99)}",
                      None, section_id))
            )
            return
        open_requests = [r.id for r in story.requests if r.status == "open"]
        if sub < 0.85 and open_requests:
            self.submit_queue.append((i, ("req", "fulfill", rng.choice(open_requests))))
            return
        if sub < 0.95 and open_requests:
            self.submit_queue.append((i, ("req", "dismiss", rng.choice(open_requests))))
            return
        client._optimistic(AddAttribution(actor=client.actor, display_name=f"Contributor {client.actor}"))

    def _send(self, i: int) -> None:
        frame = self.clients[i].next_frame()
        if frame is None:
            return
        self.submit_queue.append((i, ("op", frame)))
        if self.rng.random() < 0.05:  # duplicate submission
            self.submit_queue.append((i, ("op", frame)))
            self.duplicates += 1

    # -- loop ------------------------------------------------------------------

    def run(self) -> FuzzReport:
        start = time.monotonic()
        capped = False
        while True:
            choices: list[tuple] = []
            if not capped:
                for i, client in enumerate(self.clients):
                    if self.generated[i] < self.m and client.can_generate():
                        choices.append(("gen", i))
            for i, client in enumerate(self.clients):
                if not client.inflight and client.pending:
                    choices.append(("send", i))
                if self.inboxes[i]:
                    choices.append(("recv", i))
            if self.submit_queue:
                choices.append(("srv", -1))
            if not choices:
                break
            kind, i = self.rng.choice(choices)
            self.actions.append(f"{kind}:{i}")
            if self.action_cap is not None and len(self.actions) >= self.action_cap:
                capped = True
            if kind == "gen":
                self._generate(i)
            elif kind == "send":
                self._send(i)
            elif kind == "recv":
                self._deliver(i)
            else:
                self._server_step()

        hashes = {c.actor: story_hash(c.story) for c in self.clients}
        server = story_hash(self.service.story)
        converged = all(h == server for h in hashes.values()) and all(
            c.quiesced() and c.confirmed == self.service.story.revision for c in self.clients
        )
        return FuzzReport(
            converged=converged,
            mode="in_process",
            clients=self.n,
            ops_per_client=self.m,
            seed=0,
            server_hash=server,
            state_hashes=hashes,
            final_revision=self.service.story.revision,
            ops_applied=self.service.story.revision,
            request_actions=self.request_actions,
            duplicates_injected=self.duplicates,
            rejected_races=self.rejected_races,
            elapsed_s=time.monotonic() - start,
        )


def _shrink(clients: int, ops_per_client: int, seed: int, full_actions: int) -> dict:
    """Binary-search the shortest action prefix that still diverges, and
    name the last ops it contains."""
    lo, hi = 1, full_actions
    failing = full_actions
    while lo <= hi:
        mid = (lo + hi) // 2
        run = _InProcessRun(clients, ops_per_client, seed, action_cap=mid)
        report = run.run()
        if not report.converged:
            failing = mid
            hi = mid - 1
        else:
            lo = mid + 1
    run = _InProcessRun(clients, ops_per_client, seed, action_cap=failing)
    run.run()
    last_ops = [e.operation.to_dict() for e in list(run.service.engine.log)[-2:]]
    return {"minimal_actions": failing, "last_ops": last_ops}


def run_fuzz(
    clients: int,
    ops_per_client: int,
    seed: int,
    mode: str = "in_process",
    server_url: str | None = None,
) -> FuzzReport:
    if clients < 1 or ops_per_client < 1:
        raise ValueError("clients and ops_per_client must be >= 1")
    if mode == "in_process":
        run = _InProcessRun(clients, ops_per_client, seed)
        try:
            report = run.run()
        except (StorypadError, AssertionError) as exc:
            report = FuzzReport(
                converged=False, mode=mode, clients=clients, ops_per_client=ops_per_client,
                seed=seed, error=f"{type(exc).__name__}: {exc}",
            )
            return report
        report.seed = seed
        if not report.converged:
            report.divergence = _shrink(clients, ops_per_client, seed, len(run.actions))
        return report
    if mode == "network":
        if not server_url:
            raise ValueError("network mode requires --server")
        from .netclient import run_network_fuzz

        return run_network_fuzz(clients, ops_per_client, seed, server_url)
    raise ValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# CLIs


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="storypad-fuzz", description="Convergence fuzzer")
    parser.add_argument("--clients", type=int, default=5)
    parser.add_argument("--ops", type=int, default=200)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--mode", choices=("in_process", "network"), default="in_process")
    parser.add_argument("--server", default=None, help="base URL, network mode only")
    args = parser.parse_args(argv)
    report = run_fuzz(args.clients, args.ops, args.seed, mode=args.mode, server_url=args.server)
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return 0 if report.converged else 1


def oracle_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="storypad-oracle", description="Exhaustive TP1 transform oracle")
    parser.add_argument("--max-len", type=int, default=4, help="max section body length in the domain")
    parser.add_argument("--max-sections", type=int, default=3)
    args = parser.parse_args(argv)
    report = run_oracle_suite(args.max_len, max_sections=args.max_sections)
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())

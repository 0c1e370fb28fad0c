"""Realtime protocol contract over in-process websockets."""
import json

import pytest
from fastapi.testclient import TestClient

from storypad.config import ServerConfig
from storypad.server.app import build_app


@pytest.fixture
def client(tmp_path):
    app = build_app(ServerConfig(data_dir=str(tmp_path / "data"), fsync=False, rebase_window=5))
    with TestClient(app) as c:
        yield c


def make_story(client, topic="Expo"):
    return client.post("/stories", json={"topic": topic, "creator_name": "Maker"}).json()["story_id"]


class Session:
    def __init__(self, client, name):
        self.transcript = []
        self.ctx = client.websocket_connect("/ws")
        self.ws = self.ctx.__enter__()
        self.send({"kind": "hello", "client_name": name})
        self.actor = self.recv()["actor_id"]

    def send(self, frame):
        self.ws.send_text(json.dumps(frame))

    def recv(self):
        frame = json.loads(self.ws.receive_text())
        self.transcript.append(frame)
        return frame

    def recv_kind(self, kind):
        while True:
            frame = self.recv()
            if frame["kind"] == kind:
                return frame

    def subscribe(self, story_id, have_revision=None):
        frame = {"kind": "subscribe", "story_id": story_id}
        if have_revision is not None:
            frame["have_revision"] = have_revision
        self.send(frame)
        return self.recv()

    def op(self, op_id, base, kind, **payload):
        self.send({"kind": "op", "operation": {
            "op_id": op_id, "actor": self.actor, "base_revision": base, "kind": kind, **payload}})

    def close(self):
        self.ctx.__exit__(None, None, None)


def test_hello_welcome_issues_actor_id(client):
    s = Session(client, "Alice")
    assert s.actor.startswith("u")
    s.close()


def test_subscribe_snapshot_then_edit_propagates(client):
    sid = make_story(client)
    a = Session(client, "Alice")
    b = Session(client, "Bob")
    snap = a.subscribe(sid)
    assert snap["kind"] == "snapshot" and snap["revision"] == 0
    assert b.subscribe(sid)["kind"] == "snapshot"

    a.op("a1", 0, "insert_section", section_id="s1", order_key=[1, 1], heading="Hi")
    ack = a.recv_kind("ack")
    assert ack["revision"] == 1
    assert ack["operation"]["op_id"] == "a1"
    remote = b.recv_kind("remote_op")
    assert remote["revision"] == 1
    assert remote["operation"]["kind"] == "insert_section"
    a.close()
    b.close()


def test_subscribe_with_current_revision_gets_empty_ops_since(client):
    sid = make_story(client)
    a = Session(client, "Alice")
    a.subscribe(sid)
    a.op("a1", 0, "insert_section", section_id="s1", order_key=[1, 1], heading="")
    a.recv_kind("ack")

    b = Session(client, "Bob")
    catch_up = b.subscribe(sid, have_revision=1)
    assert catch_up["kind"] == "ops_since"
    assert catch_up["ops"] == []
    assert catch_up["revision"] == 1

    c = Session(client, "Cara")
    catch_up = c.subscribe(sid, have_revision=0)
    assert catch_up["kind"] == "ops_since"
    assert [o["revision"] for o in catch_up["ops"]] == [1]
    for s in (a, b, c):
        s.close()


def test_stale_have_revision_falls_back_to_snapshot(client):
    sid = make_story(client)
    a = Session(client, "Alice")
    a.subscribe(sid)
    a.op("a1", 0, "insert_section", section_id="s1", order_key=[1, 1], heading="")
    a.recv_kind("ack")
    for i in range(7):  # rebase_window is 5 in this fixture
        a.op(f"t{i}", i + 1, "text_insert", section_id="s1", offset=0, text="x")
        a.recv_kind("ack")
    b = Session(client, "Bob")
    catch_up = b.subscribe(sid, have_revision=1)
    assert catch_up["kind"] == "snapshot"
    assert catch_up["revision"] == 8
    a.close()
    b.close()


def test_base_too_old_returns_error_frame(client):
    sid = make_story(client)
    a = Session(client, "Alice")
    a.subscribe(sid)
    a.op("a1", 0, "insert_section", section_id="s1", order_key=[1, 1], heading="")
    a.recv_kind("ack")
    for i in range(6):
        a.op(f"t{i}", i + 1, "text_insert", section_id="s1", offset=0, text="x")
        a.recv_kind("ack")
    a.op("stale", 0, "text_insert", section_id="s1", offset=0, text="y")
    err = a.recv_kind("error")
    assert err["code"] == "base_too_old"
    a.close()


def test_remote_op_revisions_strictly_increase(client):
    sid = make_story(client)
    a = Session(client, "Alice")
    b = Session(client, "Bob")
    a.subscribe(sid)
    b.subscribe(sid)
    a.op("a1", 0, "insert_section", section_id="s1", order_key=[1, 1], heading="")
    a.recv_kind("ack")
    for i in range(10):
        a.op(f"w{i}", i + 1, "text_insert", section_id="s1", offset=0, text=str(i))
        a.recv_kind("ack")
    seen = []
    while len(seen) < 11:
        frame = b.recv()
        if frame["kind"] == "remote_op":
            seen.append(frame["revision"])
    assert seen == list(range(1, 12))
    a.close()
    b.close()


def test_duplicate_op_submission_acked_once_each(client):
    sid = make_story(client)
    a = Session(client, "Alice")
    b = Session(client, "Bob")
    a.subscribe(sid)
    b.subscribe(sid)
    a.op("dup", 0, "insert_section", section_id="s1", order_key=[1, 1], heading="")
    first = a.recv_kind("ack")
    a.op("dup", 0, "insert_section", section_id="s1", order_key=[1, 1], heading="")
    second = a.recv_kind("ack")
    assert first["revision"] == second["revision"] == 1
    remote = b.recv_kind("remote_op")
    assert remote["revision"] == 1
    # no second remote_op for the duplicate: next op lands at revision 2
    a.op("next", 1, "text_insert", section_id="s1", offset=0, text="x")
    assert b.recv_kind("remote_op")["revision"] == 2
    a.close()
    b.close()


def test_op_before_subscribe_closes_session(client):
    make_story(client)
    s = Session(client, "Alice")
    s.op("x1", 0, "noop")
    with pytest.raises(Exception):
        s.recv()
    s.close()


def test_malformed_frame_closes_session(client):
    s = Session(client, "Alice")
    s.ws.send_text("this is not json")
    with pytest.raises(Exception):
        s.recv()
    s.close()


def test_subscribe_unknown_story_errors_but_keeps_session(client):
    s = Session(client, "Alice")
    got = s.subscribe("ghost")
    assert got["kind"] == "error" and got["code"] == "not_found"
    sid = make_story(client)
    assert s.subscribe(sid)["kind"] == "snapshot"
    s.close()


def test_request_update_broadcast_carries_events(client):
    sid = make_story(client)
    a = Session(client, "Alice")
    b = Session(client, "Bob")
    a.subscribe(sid)
    b.subscribe(sid)
    client.post(f"/stories/{sid}/offers", json={"display_name": "Eve!"})
    for s in (a, b):
        update = s.recv_kind("request_update")
        kinds = [e["kind"] for e in update["events"]]
        assert "offer_added" in kinds
    client.post(f"/stories/{sid}/requests",
                json={"requester_name": "Eve", "recipient": "@x", "request_text": "do it"})
    for s in (a, b):
        update = s.recv_kind("request_update")
        assert update["outstanding_count"] == 1
    a.close()
    b.close()


def test_protocol_frame_golden_transcript():
    """Frame encodings are pinned byte-for-byte as format documentation."""
    from pathlib import Path

    from storypad.model import new_story
    from storypad.ops import Operation, TextInsert
    from storypad.server import protocol

    story = new_story("Golden", "maker", story_id="gold", created_at=0.0)
    op = Operation(op_id="g1", actor="u1", base_revision=0,
                   payload=TextInsert(section_id="s1", offset=0, text="hi"))
    frames = [
        protocol.hello("Alice"),
        protocol.welcome("u1"),
        protocol.subscribe("gold", 0),
        protocol.snapshot(story, 0),
        protocol.op_frame(op),
        protocol.ack(1, op),
        protocol.remote_op(1, op),
        protocol.request_update(2, []),
        protocol.error("base_too_old", "resubscribe from snapshot"),
    ]
    encoded = "\n".join(protocol.encode_frame(f) for f in frames) + "\n"
    golden = Path(__file__).parent / "golden" / "frames.jsonl"
    assert encoded == golden.read_text("utf-8")


def test_slow_consumer_is_disconnected_not_stalled():
    """A subscriber whose outbound queue overflows gets cut, and the story
    keeps serving everyone else."""
    import asyncio

    from storypad.server.rooms import Room, Subscriber
    from storypad.service import StoryService

    async def scenario():
        svc = StoryService.create("Overflow", "maker", story_id="ov")
        room = Room(svc, queue_depth=3)
        slow = Subscriber(session_id=1, actor_id="slow")
        fast = Subscriber(session_id=2, actor_id="fast")
        room.subscribers = {1: slow, 2: fast}
        for i in range(6):
            op = {"op_id": f"ov{i}", "actor": "ufast", "base_revision": i,
                  "kind": "insert_section", "section_id": f"s{i}", "order_key": [i + 1, 1], "heading": ""}
            from storypad.ops import op_from_dict

            await room.call(room.submit_fn(2, op_from_dict(op), "Fast"))
            while not fast.queue.empty():  # the healthy consumer drains
                fast.queue.get_nowait()
        assert slow.dead
        assert svc.story.revision == 6
        await room.stop()

    asyncio.run(scenario())


def test_suggestions_use_section_count_as_n_hint(client):
    sid = make_story(client, topic="Fair")
    s = Session(client, "Alice")
    s.subscribe(sid)
    for i in range(3):
        s.op(f"n{i}", i, "insert_section", section_id=f"s{i}", order_key=[i + 1, 1], heading="")
        s.recv_kind("ack")
    s.close()
    got = client.get(f"/stories/{sid}/suggestions?count=1").json()["headlines"]
    assert got == ["3 things You Missed at the Fair"]
    # explicit hint still wins
    got = client.get(f"/stories/{sid}/suggestions?count=1&n_hint=11").json()["headlines"]
    assert got == ["11 things You Missed at the Fair"]

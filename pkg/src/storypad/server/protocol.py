"""Realtime session frames.

JSON text frames over a persistent bidirectional connection; the contract
is the messages, not the transport. Golden transcripts in tests/golden pin
the encoding.

client -> server:
    hello         {kind, client_name}
    subscribe     {kind, story_id, have_revision?}
    op            {kind, operation}

server -> client:
    welcome       {kind, actor_id}
    snapshot      {kind, story, revision, event_seq, outstanding_count}
    ops_since     {kind, ops: [{operation, revision}], revision}
    ack           {kind, revision, operation}      exactly one per client op
    remote_op     {kind, revision, operation}      strict revision order
    request_update{kind, outstanding_count, events} recruitment/roster delta
    error         {kind, code, detail}
"""
from __future__ import annotations

from ..events import StoryEvent
from ..model import Story, canonical_json, outstanding_count
from ..ops import Operation, op_from_dict

HELLO = "hello"
SUBSCRIBE = "subscribe"
OP = "op"
WELCOME = "welcome"
SNAPSHOT = "snapshot"
OPS_SINCE = "ops_since"
ACK = "ack"
REMOTE_OP = "remote_op"
REQUEST_UPDATE = "request_update"
ERROR = "error"

CLIENT_KINDS = (HELLO, SUBSCRIBE, OP)


def encode_frame(frame: dict) -> str:
    return canonical_json(frame).decode("utf-8")


def hello(client_name: str) -> dict:
    return {"kind": HELLO, "client_name": client_name}


def subscribe(story_id: str, have_revision: int | None = None) -> dict:
    frame = {"kind": SUBSCRIBE, "story_id": story_id}
    if have_revision is not None:
        frame["have_revision"] = have_revision
    return frame


def op_frame(operation: Operation) -> dict:
    return {"kind": OP, "operation": operation.to_dict()}


def welcome(actor_id: str) -> dict:
    return {"kind": WELCOME, "actor_id": actor_id}


def snapshot(story: Story, event_seq: int) -> dict:
    return {
        "kind": SNAPSHOT,
        "event_seq": event_seq,
        "outstanding_count": outstanding_count(story),
        "revision": story.revision,
        "story": story.to_dict(),
    }


def ops_since(entries, revision: int) -> dict:
    return {
        "kind": OPS_SINCE,
        "ops": [{"operation": e.operation.to_dict(), "revision": e.revision} for e in entries],
        "revision": revision,
    }


def ack(revision: int, operation: Operation) -> dict:
    return {"kind": ACK, "operation": operation.to_dict(), "revision": revision}


def remote_op(revision: int, operation: Operation) -> dict:
    return {"kind": REMOTE_OP, "operation": operation.to_dict(), "revision": revision}


def request_update(count: int, events: list[StoryEvent]) -> dict:
    return {
        "kind": REQUEST_UPDATE,
        "events": [e.to_dict() for e in events],
        "outstanding_count": count,
    }


def error(code: str, detail: str = "") -> dict:
    return {"kind": ERROR, "code": code, "detail": detail}


def parse_client_frame(raw: str | bytes) -> dict:
    import json

    try:
        frame = json.loads(raw)
    except ValueError as exc:
        raise ValueError(f"frame is not valid JSON: {exc}") from None
    if not isinstance(frame, dict) or frame.get("kind") not in CLIENT_KINDS:
        raise ValueError(f"unknown client frame kind: {frame.get('kind') if isinstance(frame, dict) else frame!r}")
    return frame


def operation_of(frame: dict) -> Operation:
    return op_from_dict(frame.get("operation"))

"""Edit operations and their JSON wire encoding.

One Operation is one atomic edit with an author and the story revision it
was built against. The wire form is a flat JSON object
{op_id, actor, base_revision, kind, ...payload fields}; kind strings are
the payload names in lower_snake_case. Encodings are byte-deterministic
(sorted keys, compact separators) and pinned by golden files in tests.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .errors import MalformedOperation
from .ids import is_valid_id
from .model import MediaEmbed, MediaSlot, canonical_json
from .orderkeys import key_from_wire, key_to_wire


@dataclass(frozen=True)
class Noop:
    """Applied like any op (bumps the revision) but changes nothing.

    Transform degrades untransformable conflicts to this instead of failing.
    """

    kind = "noop"

    def fields(self) -> dict:
        return {}


@dataclass(frozen=True)
class SetHeadline:
    kind = "set_headline"
    text: str

    def fields(self) -> dict:
        return {"text": self.text}


@dataclass(frozen=True)
class InsertSection:
    kind = "insert_section"
    section_id: str
    order_key: Fraction
    heading: str = ""

    def fields(self) -> dict:
        return {"heading": self.heading, "order_key": key_to_wire(self.order_key), "section_id": self.section_id}


@dataclass(frozen=True)
class RemoveSection:
    kind = "remove_section"
    section_id: str

    def fields(self) -> dict:
        return {"section_id": self.section_id}


@dataclass(frozen=True)
class MoveSection:
    kind = "move_section"
    section_id: str
    new_order_key: Fraction

    def fields(self) -> dict:
        return {"new_order_key": key_to_wire(self.new_order_key), "section_id": self.section_id}


@dataclass(frozen=True)
class SetHeading:
    kind = "set_heading"
    section_id: str
    text: str

    def fields(self) -> dict:
        return {"section_id": self.section_id, "text": self.text}


@dataclass(frozen=True)
class TextInsert:
    kind = "text_insert"
    section_id: str
    offset: int
    text: str

    def fields(self) -> dict:
        return {"offset": self.offset, "section_id": self.section_id, "text": self.text}


@dataclass(frozen=True)
class TextDelete:
    kind = "text_delete"
    section_id: str
    offset: int
    length: int

    def fields(self) -> dict:
        return {"length": self.length, "offset": self.offset, "section_id": self.section_id}


@dataclass(frozen=True)
class AddMedia:
    kind = "add_media"
    section_id: str
    media: MediaEmbed
    position: Fraction  # rational order key within the section's media list

    def fields(self) -> dict:
        return {"media": self.media.to_dict(), "position": key_to_wire(self.position), "section_id": self.section_id}


@dataclass(frozen=True)
class RemoveMedia:
    kind = "remove_media"
    section_id: str
    media_id: str

    def fields(self) -> dict:
        return {"media_id": self.media_id, "section_id": self.section_id}


@dataclass(frozen=True)
class SectionContent:
    """Materialized section state carried by an as-applied revert."""

    heading: str
    body: str
    order_key: Fraction
    tombstone: bool
    media: tuple[MediaSlot, ...]

    def to_dict(self) -> dict:
        return {
            "body": self.body,
            "heading": self.heading,
            "media": [m.to_dict() for m in self.media],
            "order_key": key_to_wire(self.order_key),
            "tombstone": self.tombstone,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SectionContent":
        return cls(
            heading=d["heading"],
            body=d["body"],
            order_key=key_from_wire(d["order_key"]),
            tombstone=d["tombstone"],
            media=tuple(MediaSlot.from_dict(m) for m in d["media"]),
        )


@dataclass(frozen=True)
class RevertSection:
    """Restore a section to its state at target_revision.

    As submitted, content is None; the server materializes the target state
    from its log before applying, and the as-applied/broadcast form carries
    the content so clients and recovery can apply it without a log.
    """

    kind = "revert_section"
    section_id: str
    target_revision: int
    content: SectionContent | None = None

    def fields(self) -> dict:
        return {
            "content": self.content.to_dict() if self.content is not None else None,
            "section_id": self.section_id,
            "target_revision": self.target_revision,
        }


@dataclass(frozen=True)
class AddAttribution:
    kind = "add_attribution"
    actor: str
    display_name: str
    accepted: bool = True

    def fields(self) -> dict:
        # "entry_actor" on the wire: the flat encoding's top-level "actor" is the op author
        return {"accepted": self.accepted, "display_name": self.display_name, "entry_actor": self.actor}


Payload = Union[
    Noop,
    SetHeadline,
    InsertSection,
    RemoveSection,
    MoveSection,
    SetHeading,
    TextInsert,
    TextDelete,
    AddMedia,
    RemoveMedia,
    RevertSection,
    AddAttribution,
]

# ops whose payload names a target section
SECTION_KINDS = (
    "insert_section",
    "remove_section",
    "move_section",
    "set_heading",
    "text_insert",
    "text_delete",
    "add_media",
    "remove_media",
    "revert_section",
)


@dataclass(frozen=True)
class Operation:
    op_id: str
    actor: str
    base_revision: int
    payload: Payload

    @property
    def kind(self) -> str:
        return self.payload.kind

    def priority(self) -> tuple[str, str]:
        """Deterministic total order used for concurrent-conflict tie-breaks."""
        return (self.actor, self.op_id)

    def section_id(self) -> str | None:
        return getattr(self.payload, "section_id", None)

    def to_dict(self) -> dict:
        d = {
            "actor": self.actor,
            "base_revision": self.base_revision,
            "kind": self.payload.kind,
            "op_id": self.op_id,
        }
        d.update(self.payload.fields())
        return d


def encode_op(op: Operation) -> bytes:
    return canonical_json(op.to_dict())


def _require(d: dict, key: str, types) -> object:
    if key not in d:
        raise MalformedOperation(f"missing field {key!r}")
    v = d[key]
    if not isinstance(v, types) or isinstance(v, bool) and types is int:
        raise MalformedOperation(f"bad type for {key!r}: {type(v).__name__}")
    return v


def decode_payload(d: dict) -> Payload:
    kind = _require(d, "kind", str)
    try:
        if kind == "noop":
            return Noop()
        if kind == "set_headline":
            return SetHeadline(text=_require(d, "text", str))
        if kind == "insert_section":
            return InsertSection(
                section_id=_require(d, "section_id", str),
                order_key=key_from_wire(d.get("order_key")),
                heading=_require(d, "heading", str),
            )
        if kind == "remove_section":
            return RemoveSection(section_id=_require(d, "section_id", str))
        if kind == "move_section":
            return MoveSection(
                section_id=_require(d, "section_id", str),
                new_order_key=key_from_wire(d.get("new_order_key")),
            )
        if kind == "set_heading":
            return SetHeading(section_id=_require(d, "section_id", str), text=_require(d, "text", str))
        if kind == "text_insert":
            return TextInsert(
                section_id=_require(d, "section_id", str),
                offset=_require(d, "offset", int),
                text=_require(d, "text", str),
            )
        if kind == "text_delete":
            return TextDelete(
                section_id=_require(d, "section_id", str),
                offset=_require(d, "offset", int),
                length=_require(d, "length", int),
            )
        if kind == "add_media":
            return AddMedia(
                section_id=_require(d, "section_id", str),
                media=MediaEmbed.from_dict(_require(d, "media", dict)),
                position=key_from_wire(d.get("position")),
            )
        if kind == "remove_media":
            return RemoveMedia(section_id=_require(d, "section_id", str), media_id=_require(d, "media_id", str))
        if kind == "revert_section":
            content = d.get("content")
            return RevertSection(
                section_id=_require(d, "section_id", str),
                target_revision=_require(d, "target_revision", int),
                content=SectionContent.from_dict(content) if content is not None else None,
            )
        if kind == "add_attribution":
            return AddAttribution(
                actor=_require(d, "entry_actor", str),
                display_name=_require(d, "display_name", str),
                accepted=_require(d, "accepted", bool),
            )
    except MalformedOperation:
        raise
    except Exception as exc:
        raise MalformedOperation(f"bad {kind} payload: {exc}") from exc
    raise MalformedOperation(f"unknown operation kind {kind!r}")


def op_from_dict(d: dict) -> Operation:
    if not isinstance(d, dict):
        raise MalformedOperation("operation must be a JSON object")
    op_id = _require(d, "op_id", str)
    actor = _require(d, "actor", str)
    base_revision = _require(d, "base_revision", int)
    if isinstance(base_revision, bool) or base_revision < 0:
        raise MalformedOperation("base_revision must be an integer >= 0")
    if not is_valid_id(op_id) or not is_valid_id(actor):
        raise MalformedOperation("op_id and actor must be URL-safe ids")
    return Operation(op_id=op_id, actor=actor, base_revision=base_revision, payload=decode_payload(d))


def decode_op(raw: bytes | str) -> Operation:
    import json as _json

    try:
        d = _json.loads(raw)
    except Exception as exc:
        raise MalformedOperation(f"operation is not valid JSON: {exc}") from exc
    return op_from_dict(d)

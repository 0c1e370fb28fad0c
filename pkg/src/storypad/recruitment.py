"""Offers to help, section-scoped improvement requests, unique links.

Requests and offers live on the story value but are not edit operations:
they don't advance the revision counter. The service layer records them as
story events (see events.py) so they replicate to clients and survive
recovery. Everything here is pure; timestamps and tokens come in as
arguments.
"""
from __future__ import annotations

import base64
import json
import secrets
from dataclasses import replace
from typing import Callable, Protocol

from .errors import AlreadyResolved, EmptyName, EmptyRequest, UnknownRequest, UnknownSection, UnknownToken
from .model import (
    REQUEST_DISMISSED,
    REQUEST_FULFILLED,
    REQUEST_OPEN,
    ImprovementRequest,
    Offer,
    Story,
    outstanding_count,
)

__all__ = [
    "add_offer",
    "suggested_recipients",
    "create_request",
    "fulfill_request",
    "dismiss_request",
    "auto_dismiss_orphans",
    "outstanding_count",
    "make_token",
    "build_link",
    "TokenIndex",
    "Notifier",
    "MemoryNotifier",
    "FileNotifier",
]

TOKEN_BYTES = 16  # 128 bits -> 22 base64url chars, unguessable links


def make_token(randbytes: Callable[[int], bytes] | None = None) -> str:
    raw = randbytes(TOKEN_BYTES) if randbytes is not None else secrets.token_bytes(TOKEN_BYTES)
    return base64.urlsafe_b64encode(raw).decode("ascii").rstrip("=")


def build_link(base_url: str, token: str) -> str:
    return f"{base_url.rstrip('/')}/r/{token}"


def add_offer(story: Story, actor: str, display_name: str, *, created_at: float = 0.0) -> Story:
    """Record an offer to help; a repeat offer by the same actor only
    updates the display name (created_at and list position are kept)."""
    if not display_name.strip():
        raise EmptyName("offer display name must be non-empty")
    offers = list(story.offers)
    for i, o in enumerate(offers):
        if o.actor == actor:
            offers[i] = replace(o, display_name=display_name)
            break
    else:
        offers.append(Offer(actor=actor, display_name=display_name, created_at=created_at))
    return replace(story, offers=tuple(offers))


def suggested_recipients(story: Story) -> list[str]:
    """Display names of everyone who offered to help, newest offer first."""
    return [o.display_name for o in reversed(story.offers)]


def create_request(
    story: Story,
    requester_name: str,
    recipient: str,
    request_text: str,
    topic: str,
    section_id: str | None = None,
    *,
    request_id: str,
    token: str,
    created_at: float = 0.0,
) -> tuple[Story, ImprovementRequest]:
    if not request_text.strip():
        raise EmptyRequest("request text must be non-empty")
    if section_id is not None:
        target = story.section(section_id)
        if target is None or target.tombstone:
            raise UnknownSection(f"request targets missing/removed section {section_id!r}")
    req = ImprovementRequest(
        id=request_id,
        token=token,
        requester_name=requester_name,
        recipient=recipient,
        request_text=request_text,
        topic=topic,
        section_id=section_id,
        status=REQUEST_OPEN,
        created_at=created_at,
    )
    return replace(story, requests=story.requests + (req,)), req


def _resolve(story: Story, request_id: str, status: str, resolved_at: float) -> Story:
    requests = list(story.requests)
    for i, r in enumerate(requests):
        if r.id == request_id:
            if r.status != REQUEST_OPEN:
                raise AlreadyResolved(f"request {request_id!r} is already {r.status}")
            requests[i] = replace(r, status=status, resolved_at=resolved_at)
            return replace(story, requests=tuple(requests))
    raise UnknownRequest(f"no request {request_id!r}")


def fulfill_request(story: Story, request_id: str, *, resolved_at: float = 0.0) -> Story:
    return _resolve(story, request_id, REQUEST_FULFILLED, resolved_at)


def dismiss_request(story: Story, request_id: str, *, resolved_at: float = 0.0) -> Story:
    return _resolve(story, request_id, REQUEST_DISMISSED, resolved_at)


def auto_dismiss_orphans(story: Story, *, resolved_at: float = 0.0) -> tuple[Story, list[str]]:
    """Dismiss open requests whose target section is gone (tombstoned).

    Section removal must never leave a live edit redirect behind.
    """
    dismissed: list[str] = []
    for r in story.requests:
        if r.status != REQUEST_OPEN or r.section_id is None:
            continue
        target = story.section(r.section_id)
        if target is None or target.tombstone:
            story = _resolve(story, r.id, REQUEST_DISMISSED, resolved_at)
            dismissed.append(r.id)
    return story, dismissed


class TokenIndex:
    """token -> (story_id, request_id); tokens are never reused, so entries
    only accumulate. resolve is total over issued tokens."""

    def __init__(self):
        self._by_token: dict[str, tuple[str, str]] = {}

    def add(self, token: str, story_id: str, request_id: str) -> None:
        if token in self._by_token:
            raise ValueError(f"token collision: {token!r}")
        self._by_token[token] = (story_id, request_id)

    def __contains__(self, token: str) -> bool:
        return token in self._by_token

    def resolve(self, token: str) -> tuple[str, str]:
        try:
            return self._by_token[token]
        except KeyError:
            raise UnknownToken(f"no request issued for this token") from None

    def index_story(self, story: Story) -> None:
        for r in story.requests:
            self._by_token.setdefault(r.token, (story.id, r.id))


def resolve_token(story: Story, token_index: "TokenIndex", token: str):
    """(story_id, request, target section_id). Terminal requests still
    resolve; the caller renders their status instead of redirecting."""
    story_id, request_id = token_index.resolve(token)
    req = story.request(request_id)
    if req is None:
        raise UnknownToken("token resolves to a request missing from its story")
    return story_id, req, req.section_id


class Notifier(Protocol):
    """External delivery hook for new requests (SNS delivery is modeled,
    not implemented: tests use the bundled file/memory notifiers)."""

    def notify(self, recipient: str, link: str, request: ImprovementRequest) -> None: ...


class MemoryNotifier:
    def __init__(self):
        self.sent: list[tuple[str, str, str]] = []  # (recipient, link, request_id)

    def notify(self, recipient: str, link: str, request: ImprovementRequest) -> None:
        self.sent.append((recipient, link, request.id))


class FileNotifier:
    """Appends one JSON line per notification; stands in for real delivery."""

    def __init__(self, path):
        self.path = path

    def notify(self, recipient: str, link: str, request: ImprovementRequest) -> None:
        line = json.dumps(
            {"link": link, "recipient": recipient, "request_id": request.id, "topic": request.topic},
            sort_keys=True,
        )
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")

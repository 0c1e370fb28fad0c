"""Opaque identifiers: URL-safe strings, validated, never reused.

Story/section/media/actor/request ids share one namespace-agnostic format
so they can appear in paths and fragments without escaping.
"""
from __future__ import annotations

import re
import secrets

from .errors import InvalidId

# unreserved URI characters only; usable as a path segment or fragment
_ID_RE = re.compile(r"^[A-Za-z0-9._~-]{1,64}$")


def is_valid_id(value: str) -> bool:
    return isinstance(value, str) and bool(_ID_RE.match(value))


def check_id(value: str, what: str = "id") -> str:
    if not is_valid_id(value):
        raise InvalidId(f"{what} must be 1-64 URL-safe chars, got {value!r}")
    return value


def new_id(prefix: str = "", nbytes: int = 9) -> str:
    """Fresh random id; 9 bytes keeps collisions out of reach at desk scale."""
    return check_id(prefix + secrets.token_urlsafe(nbytes))

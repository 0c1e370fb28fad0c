"""URL classification, metadata resolution, sanitization, feed ingestion.

Classification is a data-driven ordered rule table (host / path /
extension patterns, first match wins, fallback `link`). Resolution never
blocks an embed: a missing or failing fetcher degrades to a placeholder
snippet containing only the sanitized URL. Everything that ends up in
resolved_html_safe passes the allow-list sanitizer, because embeds get
rendered inside third-party pages via syndication frames.
"""
from __future__ import annotations

import html
import json
from dataclasses import dataclass
from datetime import datetime
from html.parser import HTMLParser
from importlib import resources
from pathlib import Path
from typing import Iterable, Protocol
from urllib.parse import urlsplit

from .errors import InvalidUrl
from .ids import new_id
from .model import MEDIA_KINDS, MediaEmbed


@dataclass(frozen=True)
class Rule:
    pattern_kind: str  # host | path | extension
    pattern: str
    kind: str

    def validate(self) -> None:
        if self.pattern_kind not in ("host", "path", "extension"):
            raise ValueError(f"unknown pattern kind {self.pattern_kind!r}")
        if self.kind not in MEDIA_KINDS:
            raise ValueError(f"unknown media kind {self.kind!r}")
        if not self.pattern:
            raise ValueError("empty pattern")


def load_rules(path: str | Path | None = None) -> list[Rule]:
    if path is None:
        raw = resources.files("storypad.data").joinpath("media_rules.json").read_text("utf-8")
    else:
        raw = Path(path).read_text("utf-8")
    rules = [Rule(**item) for item in json.loads(raw)]
    for r in rules:
        r.validate()
    return rules


_default_rules: list[Rule] | None = None


def default_rules() -> list[Rule]:
    global _default_rules
    if _default_rules is None:
        _default_rules = load_rules()
    return _default_rules


def _split_http_url(url: str):
    if not isinstance(url, str):
        raise InvalidUrl("url must be a string")
    parts = urlsplit(url.strip())
    if parts.scheme not in ("http", "https") or not parts.netloc or parts.hostname is None:
        raise InvalidUrl(f"not an absolute http(s) URL: {url!r}")
    return parts


def classify(url: str, *, rules: list[Rule] | None = None) -> str:
    """Media kind for a URL; `link` whenever no rule matches."""
    parts = _split_http_url(url)
    host = (parts.hostname or "").lower()
    path = parts.path.lower()
    for rule in rules if rules is not None else default_rules():
        if rule.pattern_kind == "host":
            p = rule.pattern.lower()
            if host == p or host.endswith("." + p):
                return rule.kind
        elif rule.pattern_kind == "path":
            if rule.pattern.lower() in path:
                return rule.kind
        elif rule.pattern_kind == "extension":
            if path.endswith("." + rule.pattern.lower()):
                return rule.kind
    return "link"


# ---------------------------------------------------------------------------
# sanitizer

_ALLOWED_TAGS = {"a", "b", "blockquote", "br", "em", "i", "img", "p", "q", "span", "strong"}
_VOID_TAGS = {"br", "img"}
_URL_ATTRS = {"href", "src"}
_ALLOWED_ATTRS = {
    "a": ("href",),
    "img": ("alt", "src"),
}
_DROP_CONTENT_TAGS = {"script", "style", "iframe", "object", "embed", "noscript", "template"}


def _safe_url(value: str) -> str | None:
    try:
        _split_http_url(value)
    except InvalidUrl:
        return None
    return value


class _Sanitizer(HTMLParser):
    """Keeps inert markup, escapes text, drops everything script-capable."""

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.out: list[str] = []
        self._open: list[str] = []
        self._drop_depth = 0

    def handle_starttag(self, tag, attrs):
        if tag in _DROP_CONTENT_TAGS:
            self._drop_depth += 1
            return
        if self._drop_depth or tag not in _ALLOWED_TAGS:
            return
        kept = []
        for name, value in attrs:
            if name not in _ALLOWED_ATTRS.get(tag, ()):
                continue
            if value is None:
                continue
            if name in _URL_ATTRS:
                value = _safe_url(value)
                if value is None:
                    continue
            kept.append(f' {name}="{html.escape(value, quote=True)}"')
        if tag in _VOID_TAGS:
            self.out.append(f"<{tag}{''.join(sorted(kept))}/>")
        else:
            self.out.append(f"<{tag}{''.join(sorted(kept))}>")
            self._open.append(tag)

    def handle_startendtag(self, tag, attrs):
        if tag in _VOID_TAGS:
            self.handle_starttag(tag, attrs)
        elif tag in _DROP_CONTENT_TAGS:
            pass
        # non-void self-closing allowed tags contribute nothing

    def handle_endtag(self, tag):
        if tag in _DROP_CONTENT_TAGS:
            self._drop_depth = max(0, self._drop_depth - 1)
            return
        if self._drop_depth:
            return
        if tag in self._open:
            while self._open:
                t = self._open.pop()
                self.out.append(f"</{t}>")
                if t == tag:
                    break

    def handle_data(self, data):
        if not self._drop_depth and data:
            self.out.append(html.escape(data))

    def result(self) -> str:
        while self._open:
            self.out.append(f"</{self._open.pop()}>")
        return "".join(self.out)


def sanitize_html(raw: str) -> str:
    """Allow-list sanitization: a/img/simple formatting survive, scripts,
    event handlers, and non-http(s) URLs never do."""
    parser = _Sanitizer()
    parser.feed(raw or "")
    parser.close()
    return parser.result()


def placeholder_snippet(url: str) -> str:
    safe = html.escape(url, quote=True)
    return f'<a href="{safe}">{safe}</a>'


# ---------------------------------------------------------------------------
# resolution


class Fetcher(Protocol):
    """Pluggable metadata lookup. The default build does no live calls;
    wire a real oEmbed client here if you want one."""

    def fetch(self, url: str) -> dict: ...


class StaticFetcher:
    """Canned metadata keyed by URL; the offline/test implementation."""

    def __init__(self, pages: dict[str, dict] | None = None):
        self.pages = pages or {}

    def fetch(self, url: str) -> dict:
        return self.pages[url]


def resolve(
    url: str,
    fetcher: Fetcher | None = None,
    *,
    media_id: str | None = None,
    rules: list[Rule] | None = None,
) -> MediaEmbed:
    """Classified MediaEmbed for a pasted URL.

    Raises InvalidUrl for non-http(s) input; a fetcher failure is not an
    error the editor ever sees, it just means a placeholder snippet.
    """
    parts = _split_http_url(url)
    clean_url = parts.geturl()
    kind = classify(clean_url, rules=rules)
    title = None
    snippet = placeholder_snippet(clean_url)
    if fetcher is not None:
        try:
            meta = fetcher.fetch(clean_url)
            raw_title = meta.get("title")
            if isinstance(raw_title, str) and raw_title.strip():
                title = raw_title.strip()
            raw_html = meta.get("html")
            if isinstance(raw_html, str) and raw_html.strip():
                sanitized = sanitize_html(raw_html)
                if sanitized.strip():
                    snippet = sanitized
        except Exception:
            pass  # degrade to placeholder, never block the embed
    return MediaEmbed(
        id=media_id or new_id("m"),
        source_url=clean_url,
        kind=kind,
        title=title,
        resolved_html_safe=snippet,
    )


# ---------------------------------------------------------------------------
# feed ingestion


@dataclass(frozen=True)
class FeedItem:
    url: str
    author: str
    text: str
    timestamp: float

    def to_embed(self, fetcher: Fetcher | None = None, *, rules: list[Rule] | None = None) -> MediaEmbed:
        embed = resolve(self.url, fetcher, rules=rules)
        if embed.title is None and self.text.strip():
            embed = MediaEmbed(
                id=embed.id,
                source_url=embed.source_url,
                kind=embed.kind,
                title=self.text.strip(),
                resolved_html_safe=embed.resolved_html_safe,
            )
        return embed


@dataclass(frozen=True)
class IngestResult:
    items: tuple[FeedItem, ...]  # newest first, deduped by url
    skipped: int


def _parse_timestamp(value) -> float:
    if isinstance(value, bool):
        raise ValueError("bad timestamp")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        return datetime.fromisoformat(value.replace("Z", "+00:00")).timestamp()
    raise ValueError("bad timestamp")


def _parse_item(raw) -> FeedItem:
    if not isinstance(raw, dict):
        raise ValueError("feed item must be an object")
    url = raw.get("url")
    _split_http_url(url if isinstance(url, str) else "")
    return FeedItem(
        url=url.strip(),
        author=str(raw.get("author", "")),
        text=str(raw.get("text", "")),
        timestamp=_parse_timestamp(raw.get("timestamp")),
    )


def ingest_feed(raw_items: Iterable[dict]) -> IngestResult:
    """Curation-tray candidates: newest first, one per URL, malformed items
    skipped (counted) rather than fatal."""
    parsed: list[FeedItem] = []
    skipped = 0
    for raw in raw_items:
        try:
            parsed.append(_parse_item(raw))
        except Exception:
            skipped += 1
    parsed.sort(key=lambda it: it.timestamp, reverse=True)
    seen: set[str] = set()
    deduped = []
    for item in parsed:
        if item.url in seen:
            continue
        seen.add(item.url)
        deduped.append(item)
    return IngestResult(items=tuple(deduped), skipped=skipped)


def ingest_feed_file(path: str | Path) -> IngestResult:
    """JSON-lines feed file: one {url, author, text, timestamp} per line."""
    raws: list[dict] = []
    bad_lines = 0
    for line in Path(path).read_text("utf-8").splitlines():
        if not line.strip():
            continue
        try:
            raws.append(json.loads(line))
        except ValueError:
            bad_lines += 1
    result = ingest_feed(raws)
    return IngestResult(items=result.items, skipped=result.skipped + bad_lines)


def iter_memory_feed(items: list[dict]) -> Iterable[dict]:
    """In-memory feed source; symmetry with the file implementation."""
    return iter(items)

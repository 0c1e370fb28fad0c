"""HTML representations: read-only view, static export, edit bootstrap,
embed snippet. Export and read-only share one article renderer, built only
from the deterministic render tree, so identical story states produce
byte-identical markup."""
from __future__ import annotations

import html
import json

from ..model import Story, render_read_only

_STYLE = (
    "body{font-family:Georgia,serif;max-width:48rem;margin:2rem auto;padding:0 1rem;color:#222}"
    "h1{font-size:1.9rem;margin-bottom:.2rem}h2{font-size:1.25rem;border-bottom:1px solid #ddd}"
    ".media{margin:.5rem 0;padding:.4rem;background:#f7f7f5}"
    ".requests{background:#fff8e1;padding:.5rem .8rem;border-radius:4px}"
    ".attribution{margin-top:2rem;font-size:.9rem;color:#555}"
    ".body{white-space:pre-wrap}"
)


def _esc(text) -> str:
    return html.escape(str(text), quote=True)


def story_article(tree: dict) -> str:
    """The story body shared by the read-only view and the static export."""
    parts = [f"<article><h1>{_esc(tree['headline'])}</h1>"]
    for section in tree["sections"]:
        parts.append(f'<section id="section-{_esc(section["id"])}">')
        if section["heading"]:
            parts.append(f"<h2>{_esc(section['heading'])}</h2>")
        for media in section["media"]:
            title = f"<figcaption>{_esc(media['title'])}</figcaption>" if media["title"] else ""
            parts.append(f'<figure class="media">{media["html"]}{title}</figure>')
        if section["body"]:
            parts.append(f'<div class="body">{_esc(section["body"])}</div>')
        parts.append("</section>")
    names = [entry["display_name"] for entry in tree["attribution"]]
    if names:
        joined = ", ".join(_esc(n) for n in names)
        parts.append(f'<footer class="attribution">With contributions from {joined}</footer>')
    parts.append("</article>")
    return "".join(parts)


def read_only_page(story: Story, edit_url: str) -> str:
    tree = render_read_only(story)
    count = tree["outstanding_requests"]
    return (
        "<!DOCTYPE html><html><head><meta charset=\"utf-8\">"
        f"<title>{_esc(tree['headline'])}</title><style>{_STYLE}</style></head><body>"
        f'<div class="requests">{count} outstanding requests — '
        f'<a href="{_esc(edit_url)}">this story is open: help improve it</a></div>'
        + story_article(tree)
        + f'<footer>revision {tree["revision"]}</footer></body></html>'
    )


def export_page(story: Story) -> str:
    """Frozen, self-contained document at the current revision; no scripts,
    no live affordances, byte-identical per story state."""
    tree = render_read_only(story)
    return (
        "<!DOCTYPE html><html><head><meta charset=\"utf-8\">"
        f"<title>{_esc(tree['headline'])}</title><style>{_STYLE}</style></head><body>"
        + story_article(tree)
        + f'<footer>static export at revision {tree["revision"]}</footer></body></html>'
    )


def edit_page(story: Story, base_url: str, *, embed: bool = False, fragment_target: str | None = None) -> str:
    boot = {
        "base_url": base_url,
        "embed": embed,
        "story_id": story.id,
        "target_section": fragment_target,
        "topic": story.topic,
    }
    return (
        "<!DOCTYPE html><html><head><meta charset=\"utf-8\">"
        f"<title>Editing: {_esc(story.headline)}</title><style>{_STYLE}</style></head><body>"
        f'<div id="app" data-story="{_esc(story.id)}">'
        f"<h1>{_esc(story.headline)}</h1>"
        '<p class="requests">Loading live editor…</p></div>'
        f'<script id="storypad-boot" type="application/json">{json.dumps(boot, sort_keys=True)}</script>'
        '<script type="module" src="/static/app.js"></script>'
        "</body></html>"
    )


def embed_snippet(story_id: str, base_url: str) -> str:
    """What a host page copy-pastes; the script swaps itself for the live frame."""
    src = f"{base_url}/stories/{story_id}/embed.js"
    return f'<script src="{_esc(src)}" async></script>'


def embed_js(story_id: str, base_url: str) -> str:
    frame_url = f"{base_url}/stories/{story_id}/embed"
    return (
        "(function(){"
        "var s=document.currentScript;"
        "var f=document.createElement('iframe');"
        f"f.src={json.dumps(frame_url)};"
        "f.style.width='100%';f.style.minHeight='540px';f.style.border='1px solid #ddd';"
        "f.setAttribute('title','live collaborative story');"
        "s.parentNode.insertBefore(f,s);"
        "})();"
    )


def request_terminal_page(status: str, topic: str) -> str:
    return (
        "<!DOCTYPE html><html><head><meta charset=\"utf-8\"><title>Request closed</title>"
        f"<style>{_STYLE}</style></head><body><h1>This improvement request is {_esc(status)}</h1>"
        f"<p>Thanks for following up on “{_esc(topic)}” — this particular ask has already been handled.</p>"
        "</body></html>"
    )

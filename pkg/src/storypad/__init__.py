"""storypad: realtime collaborative structured-story server.

Convergent multi-client editing of sectioned stories over a
server-serialized OT engine, with social-recruitment request links,
headline suggestion, media curation by URL, live syndication embeds,
durable logs with crash recovery, and deterministic static export.
"""

from .engine import Engine, apply, transform
from .model import Story, new_story, outstanding_count, render_read_only, validate
from .ops import Operation

__all__ = [
    "Engine",
    "Operation",
    "Story",
    "apply",
    "new_story",
    "outstanding_count",
    "render_read_only",
    "transform",
    "validate",
]

__version__ = "0.1.0"

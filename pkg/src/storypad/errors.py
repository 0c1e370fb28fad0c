"""Error types shared across the package.

Every failure the server can hand back to a client carries a stable
``code`` string so HTTP handlers and protocol error frames don't have to
map exception classes by hand.
"""


class StorypadError(Exception):
    code = "error"

    def __init__(self, detail: str = ""):
        super().__init__(detail or self.code)
        self.detail = detail or self.code


class EmptyTopic(StorypadError):
    code = "empty_topic"


class TopicTooLong(StorypadError):
    code = "topic_too_long"


class InvalidStory(StorypadError):
    code = "invalid_story"


class InvalidId(StorypadError):
    code = "invalid_id"


class UnknownSection(StorypadError):
    code = "unknown_section"


class DuplicateSection(StorypadError):
    code = "duplicate_section"


class DuplicateMedia(StorypadError):
    code = "duplicate_media"


class OffsetOutOfRange(StorypadError):
    code = "offset_out_of_range"


class BodyTooLong(StorypadError):
    code = "body_too_long"


class HeadingTooLong(StorypadError):
    code = "heading_too_long"


class EmptyHeadline(StorypadError):
    code = "empty_headline"


class HeadlineTooLong(StorypadError):
    code = "headline_too_long"


class TargetRevisionUnknown(StorypadError):
    code = "target_revision_unknown"


class MalformedOperation(StorypadError):
    code = "malformed_operation"


class BaseTooOld(StorypadError):
    code = "base_too_old"


class EmptyName(StorypadError):
    code = "empty_name"


class EmptyRequest(StorypadError):
    code = "empty_request"


class UnknownRequest(StorypadError):
    code = "unknown_request"


class AlreadyResolved(StorypadError):
    code = "already_resolved"


class UnknownToken(StorypadError):
    code = "unknown_token"


class InvalidUrl(StorypadError):
    code = "invalid_url"


class MalformedFeedItem(StorypadError):
    code = "malformed_feed_item"


class RevisionGap(StorypadError):
    code = "revision_gap"


class IoFailure(StorypadError):
    code = "io_failure"


class CorruptStore(StorypadError):
    code = "corrupt_store"


class NotFound(StorypadError):
    code = "not_found"

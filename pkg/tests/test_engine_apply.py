from fractions import Fraction

import pytest

from storypad.engine import apply
from storypad.errors import (
    BodyTooLong,
    DuplicateMedia,
    DuplicateSection,
    EmptyHeadline,
    HeadingTooLong,
    HeadlineTooLong,
    MalformedOperation,
    OffsetOutOfRange,
    UnknownSection,
)
from storypad.model import BODY_CAP, MediaEmbed, validate
from storypad.ops import (
    AddAttribution,
    AddMedia,
    InsertSection,
    MoveSection,
    Noop,
    RemoveMedia,
    RemoveSection,
    RevertSection,
    SetHeading,
    SetHeadline,
    TextDelete,
    TextInsert,
)
from storypad.orderkeys import between


def photo(mid="m1"):
    return MediaEmbed(id=mid, source_url=f"https://example.com/{mid}.jpg", kind="photo")


@pytest.fixture
def one_section(fresh_engine, make_op):
    fresh_engine.submit(make_op(InsertSection(section_id="s1", order_key=between(None, None))))
    return fresh_engine


def test_noop_only_bumps_revision(fresh_engine, make_op):
    before = fresh_engine.story
    after = apply(before, make_op(Noop()))
    assert after.revision == before.revision + 1
    assert after.sections == before.sections
    assert after.headline == before.headline


def test_set_headline(fresh_engine, make_op):
    after = apply(fresh_engine.story, make_op(SetHeadline(text="Breaking")))
    assert after.headline == "Breaking"


def test_set_headline_bounds(fresh_engine, make_op):
    with pytest.raises(EmptyHeadline):
        apply(fresh_engine.story, make_op(SetHeadline(text="")))
    with pytest.raises(HeadlineTooLong):
        apply(fresh_engine.story, make_op(SetHeadline(text="x" * 301)))


def test_text_insert_then_delete_restores(one_section, make_op):
    s0 = one_section.story
    s1 = apply(s0, make_op(TextInsert(section_id="s1", offset=0, text="Hi")))
    assert s1.section("s1").body == "Hi"
    assert s1.revision == s0.revision + 1
    s2 = apply(s1, make_op(TextDelete(section_id="s1", offset=0, length=2)))
    assert s2.section("s1").body == ""
    assert validate(s2) == []


def test_text_insert_offsets_checked(one_section, make_op):
    with pytest.raises(OffsetOutOfRange):
        apply(one_section.story, make_op(TextInsert(section_id="s1", offset=5, text="x")))
    with pytest.raises(OffsetOutOfRange):
        apply(one_section.story, make_op(TextInsert(section_id="s1", offset=-1, text="x")))


def test_text_delete_length_checked(one_section, make_op):
    story = apply(one_section.story, make_op(TextInsert(section_id="s1", offset=0, text="abc")))
    with pytest.raises(OffsetOutOfRange):
        apply(story, make_op(TextDelete(section_id="s1", offset=1, length=5)))
    with pytest.raises(MalformedOperation):
        apply(story, make_op(TextDelete(section_id="s1", offset=0, length=0)))


def test_body_cap_rejects_oversized_insert(one_section, make_op):
    big = "x" * (BODY_CAP + 1)
    with pytest.raises(BodyTooLong):
        apply(one_section.story, make_op(TextInsert(section_id="s1", offset=0, text=big)))


def test_unicode_offsets_are_scalar_values(one_section, make_op):
    story = apply(one_section.story, make_op(TextInsert(section_id="s1", offset=0, text="a✨🎈")))
    story = apply(story, make_op(TextInsert(section_id="s1", offset=3, text="!")))
    assert story.section("s1").body == "a✨🎈!"
    story = apply(story, make_op(TextDelete(section_id="s1", offset=1, length=2)))
    assert story.section("s1").body == "a!"


def test_text_edit_on_tombstoned_section_is_noop(one_section, make_op):
    story = apply(one_section.story, make_op(RemoveSection(section_id="s1")))
    after = apply(story, make_op(TextInsert(section_id="s1", offset=0, text="ghost")))
    assert after.revision == story.revision + 1
    assert after.section("s1").body == ""


def test_text_edit_on_never_existing_section_errors(fresh_engine, make_op):
    with pytest.raises(UnknownSection):
        apply(fresh_engine.story, make_op(TextInsert(section_id="nope", offset=0, text="x")))


def test_remove_clears_content(one_section, make_op):
    story = apply(one_section.story, make_op(TextInsert(section_id="s1", offset=0, text="words")))
    story = apply(story, make_op(AddMedia(section_id="s1", media=photo(), position=between(None, None))))
    story = apply(story, make_op(RemoveSection(section_id="s1")))
    gone = story.section("s1")
    assert gone.tombstone
    assert gone.body == "" and gone.media == () and gone.heading == ""
    assert story.live_sections() == ()


def test_remove_unknown_section_errors(fresh_engine, make_op):
    with pytest.raises(UnknownSection):
        apply(fresh_engine.story, make_op(RemoveSection(section_id="missing")))


def test_duplicate_section_id_rejected(one_section, make_op):
    with pytest.raises(DuplicateSection):
        apply(one_section.story, make_op(InsertSection(section_id="s1", order_key=Fraction(7))))


def test_insert_positions_by_key_then_id(fresh_engine, make_op):
    story = apply(fresh_engine.story, make_op(InsertSection(section_id="b", order_key=Fraction(1))))
    story = apply(story, make_op(InsertSection(section_id="a", order_key=Fraction(1))))
    story = apply(story, make_op(InsertSection(section_id="c", order_key=Fraction(1, 2))))
    assert [s.id for s in story.live_sections()] == ["c", "a", "b"]
    assert validate(story) == []


def test_move_section(one_section, make_op):
    story = apply(one_section.story, make_op(InsertSection(section_id="s2", order_key=Fraction(2))))
    story = apply(story, make_op(MoveSection(section_id="s2", new_order_key=Fraction(1, 2))))
    assert [s.id for s in story.live_sections()] == ["s2", "s1"]


def test_heading_cap(one_section, make_op):
    with pytest.raises(HeadingTooLong):
        apply(one_section.story, make_op(SetHeading(section_id="s1", text="h" * 201)))


def test_media_add_remove(one_section, make_op):
    k = between(None, None)
    story = apply(one_section.story, make_op(AddMedia(section_id="s1", media=photo(), position=k)))
    story = apply(story, make_op(AddMedia(section_id="s1", media=photo("m2"), position=between(k, None))))
    assert [m.embed.id for m in story.section("s1").media] == ["m1", "m2"]
    story = apply(story, make_op(RemoveMedia(section_id="s1", media_id="m1")))
    assert [m.embed.id for m in story.section("s1").media] == ["m2"]
    # removing an already-gone id tolerated: concurrent removes are normal
    after = apply(story, make_op(RemoveMedia(section_id="s1", media_id="m1")))
    assert after.revision == story.revision + 1


def test_media_duplicate_id_rejected(one_section, make_op):
    story = apply(one_section.story, make_op(AddMedia(section_id="s1", media=photo(), position=Fraction(1))))
    with pytest.raises(DuplicateMedia):
        apply(story, make_op(AddMedia(section_id="s1", media=photo(), position=Fraction(2))))


def test_media_url_must_be_http(one_section, make_op):
    bad = MediaEmbed(id="m9", source_url="javascript:alert(1)", kind="photo")
    from storypad.errors import InvalidUrl

    with pytest.raises(InvalidUrl):
        apply(one_section.story, make_op(AddMedia(section_id="s1", media=bad, position=Fraction(1))))


def test_unmaterialized_revert_rejected_by_apply(one_section, make_op):
    with pytest.raises(MalformedOperation):
        apply(one_section.story, make_op(RevertSection(section_id="s1", target_revision=1)))


def test_attribution_upsert(fresh_engine, make_op):
    story = apply(fresh_engine.story, make_op(AddAttribution(actor="z", display_name="Zed", accepted=False)))
    story = apply(story, make_op(AddAttribution(actor="a", display_name="Ann")))
    assert [e.actor for e in story.attribution] == ["a", "z"]
    story = apply(story, make_op(AddAttribution(actor="z", display_name="Zed!", accepted=True)))
    assert len(story.attribution) == 2
    entry = next(e for e in story.attribution if e.actor == "z")
    assert entry.display_name == "Zed!" and entry.accepted

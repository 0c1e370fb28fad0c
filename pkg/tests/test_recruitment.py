import random

import pytest

from storypad.errors import AlreadyResolved, EmptyName, EmptyRequest, UnknownRequest, UnknownSection, UnknownToken
from storypad.model import new_story, outstanding_count
from storypad.recruitment import (
    FileNotifier,
    MemoryNotifier,
    TokenIndex,
    add_offer,
    auto_dismiss_orphans,
    build_link,
    create_request,
    dismiss_request,
    fulfill_request,
    make_token,
    resolve_token,
    suggested_recipients,
)


def story_with_section():
    from fractions import Fraction

    from storypad.engine import apply
    from storypad.ops import InsertSection, Operation

    story = new_story("Zombie Walk", "alice", story_id="zw", created_at=0.0)
    return apply(
        story,
        Operation(op_id="i1", actor="alice", base_revision=0, payload=InsertSection(section_id="s1", order_key=Fraction(1))),
    )


def test_offer_recorded():
    story = add_offer(new_story("T", "a"), "eve", "Eve!", created_at=1.0)
    assert [o.display_name for o in story.offers] == ["Eve!"]


def test_offer_requires_name():
    with pytest.raises(EmptyName):
        add_offer(new_story("T", "a"), "eve", "   ")


def test_duplicate_offer_updates_name_only():
    story = add_offer(new_story("T", "a"), "eve", "Eve", created_at=1.0)
    story = add_offer(story, "eve", "Eve!", created_at=9.0)
    assert len(story.offers) == 1
    assert story.offers[0].display_name == "Eve!"
    assert story.offers[0].created_at == 1.0


def test_suggested_recipients_newest_first():
    story = new_story("T", "a")
    story = add_offer(story, "u1", "Alice", created_at=1.0)
    story = add_offer(story, "u2", "Bob", created_at=2.0)
    assert suggested_recipients(story) == ["Bob", "Alice"]


def test_contributor_roster_shape_renders_as_recipients():
    # free-form handles (e.g. @justinbieber) are legal recipients/offerers
    story = new_story("T", "a")
    for i, name in enumerate(["Alice", "@justinbieber", "Bob"]):
        story = add_offer(story, f"u{i}", name, created_at=float(i))
    assert suggested_recipients(story) == ["Bob", "@justinbieber", "Alice"]


def test_create_request_appends_open_request():
    story = story_with_section()
    story, req = create_request(
        story, "Eve", "@bob", "add photos", "Zombie Walk", "s1",
        request_id="r1", token=make_token(), created_at=3.0,
    )
    assert outstanding_count(story) == 1
    assert req.status == "open"
    assert req.section_id == "s1"
    link = build_link("http://h.example", req.token)
    assert link == f"http://h.example/r/{req.token}"


def test_create_request_rejects_empty_text():
    with pytest.raises(EmptyRequest):
        create_request(story_with_section(), "a", "b", "  ", "t", None, request_id="r", token="tk")


def test_create_request_rejects_missing_section():
    with pytest.raises(UnknownSection):
        create_request(story_with_section(), "a", "b", "text", "t", "nope", request_id="r", token="tk")


def test_lifecycle_fulfill_then_absorb():
    story = story_with_section()
    story, req = create_request(story, "a", "b", "text", "t", None, request_id="r1", token="tk1", created_at=1.0)
    story = fulfill_request(story, "r1", resolved_at=2.0)
    assert story.request("r1").status == "fulfilled"
    assert story.request("r1").resolved_at == 2.0
    assert outstanding_count(story) == 0
    with pytest.raises(AlreadyResolved):
        fulfill_request(story, "r1", resolved_at=3.0)
    with pytest.raises(AlreadyResolved):
        dismiss_request(story, "r1", resolved_at=3.0)


def test_unknown_request():
    with pytest.raises(UnknownRequest):
        fulfill_request(new_story("T", "a"), "ghost")


def test_auto_dismiss_orphans():
    from storypad.engine import apply
    from storypad.ops import Operation, RemoveSection

    story = story_with_section()
    story, _ = create_request(story, "a", "b", "text", "t", "s1", request_id="r1", token="tk1")
    story, _ = create_request(story, "a", "b", "more", "t", None, request_id="r2", token="tk2")
    story = apply(
        story, Operation(op_id="rm", actor="a", base_revision=1, payload=RemoveSection(section_id="s1"))
    )
    story, dismissed = auto_dismiss_orphans(story, resolved_at=9.0)
    assert dismissed == ["r1"]
    assert story.request("r1").status == "dismissed"
    assert story.request("r2").status == "open"
    # invariant: no open request targets a tombstoned section
    from storypad.model import validate

    assert validate(story) == []


def test_tokens_are_long_and_urlsafe():
    token = make_token()
    assert len(token) == 22
    assert all(c.isalnum() or c in "-_" for c in token)


def test_ten_thousand_tokens_no_collision():
    rng = random.Random(99)
    tokens = {make_token(lambda n: bytes(rng.getrandbits(8) for _ in range(n))) for _ in range(10_000)}
    assert len(tokens) == 10_000


def test_token_index_resolution():
    story = story_with_section()
    story, req = create_request(story, "a", "b", "text", "t", "s1", request_id="r1", token="tok1")
    index = TokenIndex()
    index.index_story(story)
    story_id, found, section = resolve_token(story, index, "tok1")
    assert (story_id, found.id, section) == ("zw", "r1", "s1")
    # terminal requests still resolve
    done = fulfill_request(story, "r1", resolved_at=1.0)
    _, found, _ = resolve_token(done, index, "tok1")
    assert found.status == "fulfilled"
    with pytest.raises(UnknownToken):
        resolve_token(story, index, "garbage")


def test_notifiers(tmp_path):
    story = story_with_section()
    story, req = create_request(story, "a", "@bob", "text", "t", None, request_id="r1", token="tk")
    memory = MemoryNotifier()
    memory.notify("@bob", "http://x/r/tk", req)
    assert memory.sent == [("@bob", "http://x/r/tk", "r1")]
    path = tmp_path / "notes.jsonl"
    fn = FileNotifier(path)
    fn.notify("@bob", "http://x/r/tk", req)
    fn.notify("@carol", "http://x/r/tk2", req)
    lines = path.read_text().splitlines()
    assert len(lines) == 2 and '"@bob"' in lines[0]


def test_randomized_lifecycle_matches_recount_oracle(rng):
    """create/fulfill/dismiss/remove-section churn: outstanding_count equals
    a full recount at every step, tokens stay unique, no open request ever
    targets a tombstoned section."""
    from fractions import Fraction

    from storypad.engine import apply
    from storypad.ops import InsertSection, Operation, RemoveSection

    story = new_story("T", "a", story_id="rl", created_at=0.0)
    live = []
    tokens = set()
    serial = 0
    for step in range(1000):
        roll = rng.random()
        if roll < 0.35 or not story.requests:
            serial += 1
            if rng.random() < 0.4 or not live:
                sid = f"s{serial}"
                story = apply(
                    story,
                    Operation(op_id=f"i{serial}", actor="a", base_revision=story.revision,
                              payload=InsertSection(section_id=sid, order_key=Fraction(serial))),
                )
                live.append(sid)
            token = make_token(lambda n: bytes(rng.getrandbits(8) for _ in range(n)))
            assert token not in tokens
            tokens.add(token)
            target = rng.choice(live) if live and rng.random() < 0.7 else None
            story, _ = create_request(
                story, "req", "rcpt", f"fix {serial}", "T", target,
                request_id=f"r{serial}", token=token, created_at=float(step),
            )
        elif roll < 0.6:
            open_ids = [r.id for r in story.requests if r.status == "open"]
            if open_ids:
                story = fulfill_request(story, rng.choice(open_ids), resolved_at=float(step))
        elif roll < 0.8:
            open_ids = [r.id for r in story.requests if r.status == "open"]
            if open_ids:
                story = dismiss_request(story, rng.choice(open_ids), resolved_at=float(step))
        elif live:
            sid = live.pop(rng.randrange(len(live)))
            story = apply(
                story,
                Operation(op_id=f"rm{step}", actor="a", base_revision=story.revision,
                          payload=RemoveSection(section_id=sid)),
            )
            story, _ = auto_dismiss_orphans(story, resolved_at=float(step))

        recount = sum(1 for r in story.requests if r.status == "open")
        assert outstanding_count(story) == recount
        for r in story.requests:
            if r.status == "open" and r.section_id is not None:
                target = story.section(r.section_id)
                assert target is not None and not target.tombstone

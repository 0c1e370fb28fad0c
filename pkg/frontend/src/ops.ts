// Edit operations: the client-side twin of the server engine. apply() and
// transform() must match the server rule for rule; the optimistic local
// state self-corrects only because pending ops are rebased with exactly
// the transforms the server will use.

import {
  BODY_CAP,
  HEADING_MAX,
  HEADLINE_MAX,
  MediaSlotWire,
  OrderKey,
  Section,
  Story,
  cmpKey,
  findSection,
  keyEq,
  mediaCmp,
  normalizeKey,
  withSection,
} from "./model.js";

export interface OperationWire {
  actor: string;
  base_revision: number;
  kind: string;
  op_id: string;
  [field: string]: unknown;
}

export interface RevertContent {
  body: string;
  heading: string;
  media: MediaSlotWire[];
  order_key: OrderKey;
  tombstone: boolean;
}

export class OpError extends Error {
  constructor(public code: string, detail: string) {
    super(`${code}: ${detail}`);
  }
}

const ZERO: OrderKey = [0, 1];

function tombstoned(id: string): Section {
  return { body: "", heading: "", id, media: [], order_key: ZERO, tombstone: true };
}

function wins(incoming: OperationWire, concurrent: OperationWire): boolean {
  if (incoming.actor !== concurrent.actor) return incoming.actor > concurrent.actor;
  return incoming.op_id > concurrent.op_id;
}

export function asNoop(op: OperationWire): OperationWire {
  return { actor: op.actor, base_revision: op.base_revision, kind: "noop", op_id: op.op_id };
}

function requireLive(story: Story, sectionId: string): Section {
  const s = findSection(story, sectionId);
  if (!s || s.tombstone) throw new OpError("unknown_section", `no live section ${sectionId}`);
  return s;
}

export function applyOp(story: Story, op: OperationWire): Story {
  const bumped: Story = { ...story, revision: story.revision + 1 };
  switch (op.kind) {
    case "noop":
      return bumped;

    case "set_headline": {
      const text = op.text as string;
      if (!text) throw new OpError("empty_headline", "headline must be non-empty");
      if (text.length > HEADLINE_MAX) throw new OpError("headline_too_long", "over 300 chars");
      return { ...bumped, headline: text };
    }

    case "insert_section": {
      const id = op.section_id as string;
      if (findSection(story, id)) throw new OpError("duplicate_section", id);
      const heading = op.heading as string;
      if (heading.length > HEADING_MAX) throw new OpError("heading_too_long", "over 200 chars");
      const key = normalizeKey(op.order_key as OrderKey);
      if (cmpKey(key, ZERO) <= 0) throw new OpError("malformed_operation", "key must be positive");
      return withSection(bumped, { body: "", heading, id, media: [], order_key: key, tombstone: false });
    }

    case "remove_section": {
      requireLive(story, op.section_id as string);
      return withSection(bumped, tombstoned(op.section_id as string));
    }

    case "move_section": {
      const s = requireLive(story, op.section_id as string);
      const key = normalizeKey(op.new_order_key as OrderKey);
      if (cmpKey(key, ZERO) <= 0) throw new OpError("malformed_operation", "key must be positive");
      return withSection(bumped, { ...s, order_key: key });
    }

    case "set_heading": {
      const s = requireLive(story, op.section_id as string);
      const text = op.text as string;
      if (text.length > HEADING_MAX) throw new OpError("heading_too_long", "over 200 chars");
      return withSection(bumped, { ...s, heading: text });
    }

    case "text_insert": {
      const s = findSection(story, op.section_id as string);
      if (!s) throw new OpError("unknown_section", op.section_id as string);
      if (s.tombstone) return bumped; // racing edit on a removed section
      const offset = op.offset as number;
      const text = op.text as string;
      const chars = [...s.body];
      if (offset < 0 || offset > chars.length) throw new OpError("offset_out_of_range", `${offset}`);
      if (chars.length + [...text].length > BODY_CAP) throw new OpError("body_too_long", "cap");
      const body = chars.slice(0, offset).join("") + text + chars.slice(offset).join("");
      return withSection(bumped, { ...s, body });
    }

    case "text_delete": {
      const s = findSection(story, op.section_id as string);
      if (!s) throw new OpError("unknown_section", op.section_id as string);
      if (s.tombstone) return bumped;
      const offset = op.offset as number;
      const length = op.length as number;
      if (length < 1) throw new OpError("malformed_operation", "length >= 1");
      const chars = [...s.body];
      if (offset < 0 || offset + length > chars.length) throw new OpError("offset_out_of_range", `${offset}`);
      const body = chars.slice(0, offset).join("") + chars.slice(offset + length).join("");
      return withSection(bumped, { ...s, body });
    }

    case "add_media": {
      const s = requireLive(story, op.section_id as string);
      const media = op.media as Omit<MediaSlotWire, "order_key">;
      const key = normalizeKey(op.position as OrderKey);
      if (cmpKey(key, ZERO) <= 0) throw new OpError("malformed_operation", "key must be positive");
      if (s.media.some((m) => m.id === media.id)) throw new OpError("duplicate_media", media.id);
      const slots = [...s.media, { ...media, order_key: key }].sort(mediaCmp);
      return withSection(bumped, { ...s, media: slots });
    }

    case "remove_media": {
      const s = requireLive(story, op.section_id as string);
      const slots = s.media.filter((m) => m.id !== op.media_id);
      if (slots.length === s.media.length) return bumped; // already gone
      return withSection(bumped, { ...s, media: slots });
    }

    case "revert_section": {
      const content = op.content as RevertContent | null;
      if (!content) throw new OpError("malformed_operation", "revert not materialized");
      const s = findSection(story, op.section_id as string);
      if (!s) throw new OpError("unknown_section", op.section_id as string);
      if (content.tombstone) return withSection(bumped, tombstoned(op.section_id as string));
      return withSection(bumped, {
        body: content.body,
        heading: content.heading,
        id: op.section_id as string,
        media: content.media.map((m) => ({ ...m, order_key: normalizeKey(m.order_key) })).sort(mediaCmp),
        order_key: normalizeKey(content.order_key),
        tombstone: false,
      });
    }

    case "add_attribution": {
      const display = op.display_name as string;
      if (!display.trim()) throw new OpError("empty_name", "display name required");
      const entry = { accepted: op.accepted as boolean, actor: op.entry_actor as string, display_name: display };
      const entries = bumped.attribution.filter((e) => e.actor !== entry.actor);
      entries.push(entry);
      entries.sort((a, b) => (a.actor < b.actor ? -1 : a.actor > b.actor ? 1 : 0));
      return { ...bumped, attribution: entries };
    }

    default:
      throw new OpError("malformed_operation", `unknown kind ${op.kind}`);
  }
}

const SECTION_KINDS = new Set([
  "insert_section",
  "remove_section",
  "move_section",
  "set_heading",
  "text_insert",
  "text_delete",
  "add_media",
  "remove_media",
  "revert_section",
]);

function sectionOf(op: OperationWire): string | null {
  return SECTION_KINDS.has(op.kind) ? (op.section_id as string) : null;
}

function lww(incoming: OperationWire, concurrent: OperationWire): OperationWire {
  return wins(incoming, concurrent) ? incoming : asNoop(incoming);
}

// Rebase `incoming` to apply after `concurrent`; never throws, conflicts
// degrade to a no-op. Same-base context assumed, same as the server.
export function transformOp(incoming: OperationWire, concurrent: OperationWire): OperationWire {
  if (incoming.op_id === concurrent.op_id) return asNoop(incoming);

  const a = incoming;
  const b = concurrent;
  if (a.kind === "noop" || b.kind === "noop") return incoming;

  if (a.kind === "set_headline" && b.kind === "set_headline") return lww(a, b);

  if (a.kind === "add_attribution" && b.kind === "add_attribution") {
    return a.entry_actor === b.entry_actor ? lww(a, b) : incoming;
  }

  const sa = sectionOf(a);
  const sb = sectionOf(b);
  if (sa === null || sb === null || sa !== sb) return incoming;

  if (b.kind === "remove_section") {
    return a.kind === "revert_section" ? incoming : asNoop(incoming);
  }
  if (b.kind === "revert_section") {
    return a.kind === "revert_section" ? lww(a, b) : asNoop(incoming);
  }
  if (a.kind === "remove_section" || a.kind === "revert_section") return incoming;

  if (a.kind === "insert_section" || b.kind === "insert_section") {
    if (a.kind === "insert_section" && b.kind === "insert_section") return lww(a, b);
    return incoming;
  }

  if (a.kind === "text_insert" && b.kind === "text_insert") {
    const ao = a.offset as number;
    const bo = b.offset as number;
    const blen = [...(b.text as string)].length;
    if (bo < ao || (bo === ao && wins(a, b))) {
      return { ...a, offset: ao + blen };
    }
    return incoming;
  }

  if (a.kind === "text_insert" && b.kind === "text_delete") {
    const ao = a.offset as number;
    const bo = b.offset as number;
    const blen = b.length as number;
    if (ao <= bo) return incoming;
    if (ao >= bo + blen) return { ...a, offset: ao - blen };
    return asNoop(incoming); // inserted into a concurrently deleted range
  }

  if (a.kind === "text_delete" && b.kind === "text_insert") {
    const ao = a.offset as number;
    const alen = a.length as number;
    const bo = b.offset as number;
    const blen = [...(b.text as string)].length;
    if (bo <= ao) return { ...a, offset: ao + blen };
    if (bo >= ao + alen) return incoming;
    return { ...a, length: alen + blen }; // swallow the racing insert
  }

  if (a.kind === "text_delete" && b.kind === "text_delete") {
    const ao = a.offset as number;
    const alen = a.length as number;
    const bo = b.offset as number;
    const blen = b.length as number;
    if (bo + blen <= ao) return { ...a, offset: ao - blen };
    if (bo >= ao + alen) return incoming;
    const left = Math.max(0, bo - ao);
    const right = Math.max(0, ao + alen - (bo + blen));
    if (left + right === 0) return asNoop(incoming);
    return { ...a, offset: Math.min(ao, bo), length: left + right };
  }

  if (a.kind === "move_section" && b.kind === "move_section") return lww(a, b);
  if (a.kind === "set_heading" && b.kind === "set_heading") return lww(a, b);
  if (a.kind === "remove_media" && b.kind === "remove_media" && a.media_id === b.media_id) {
    return asNoop(incoming);
  }
  return incoming;
}

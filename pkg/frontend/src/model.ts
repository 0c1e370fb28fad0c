// Story document types as they travel on the wire, plus the canonical
// ordering rules the server uses. Replicas must sort and normalize exactly
// like the server or optimistic state drifts from acked state.

export type OrderKey = [number, number]; // numerator, denominator (always normalized)

export interface MediaSlotWire {
  id: string;
  kind: string;
  order_key: OrderKey;
  resolved_html_safe: string;
  source_url: string;
  title: string | null;
}

export interface Section {
  body: string;
  heading: string;
  id: string;
  media: MediaSlotWire[];
  order_key: OrderKey;
  tombstone: boolean;
}

export interface AttributionEntry {
  accepted: boolean;
  actor: string;
  display_name: string;
}

export interface Offer {
  actor: string;
  created_at: number;
  display_name: string;
}

export interface ImprovementRequest {
  created_at: number;
  id: string;
  recipient: string;
  request_text: string;
  requester_name: string;
  resolved_at: number | null;
  section_id: string | null;
  status: string;
  token: string;
  topic: string;
}

export interface Story {
  attribution: AttributionEntry[];
  contributors: Record<string, string>;
  created_at: number;
  headline: string;
  id: string;
  offers: Offer[];
  requests: ImprovementRequest[];
  revision: number;
  sections: Section[];
  topic: string;
}

export const BODY_CAP = 100_000;
export const HEADLINE_MAX = 300;
export const HEADING_MAX = 200;

function gcd(a: number, b: number): number {
  a = Math.abs(a);
  b = Math.abs(b);
  while (b !== 0) {
    [a, b] = [b, a % b];
  }
  return a;
}

export function normalizeKey(key: OrderKey): OrderKey {
  const g = gcd(key[0], key[1]) || 1;
  return [key[0] / g, key[1] / g];
}

// strictly between lo and hi (either may be open); Stern-Brocot mediant,
// normalized the way the server's exact fractions are
export function keyBetween(lo: OrderKey | null, hi: OrderKey | null): OrderKey {
  const [ln, ld] = lo ?? [0, 1];
  const [hn, hd] = hi ?? [1, 0];
  return normalizeKey([ln + hn, ld + hd]);
}

export function cmpKey(a: OrderKey, b: OrderKey): number {
  const left = BigInt(a[0]) * BigInt(b[1]);
  const right = BigInt(b[0]) * BigInt(a[1]);
  return left < right ? -1 : left > right ? 1 : 0;
}

export function keyEq(a: OrderKey, b: OrderKey): boolean {
  return cmpKey(a, b) === 0;
}

function cmpStr(a: string, b: string): number {
  return a < b ? -1 : a > b ? 1 : 0;
}

// live sections first ordered by (key, id); tombstones trail by id
export function sectionCmp(a: Section, b: Section): number {
  if (a.tombstone !== b.tombstone) return a.tombstone ? 1 : -1;
  return cmpKey(a.order_key, b.order_key) || cmpStr(a.id, b.id);
}

export function mediaCmp(a: MediaSlotWire, b: MediaSlotWire): number {
  return cmpKey(a.order_key, b.order_key) || cmpStr(a.id, b.id);
}

export function liveSections(story: Story): Section[] {
  return story.sections.filter((s) => !s.tombstone);
}

export function findSection(story: Story, id: string): Section | undefined {
  return story.sections.find((s) => s.id === id);
}

export function outstandingCount(story: Story): number {
  return story.requests.filter((r) => r.status === "open").length;
}

export function withSection(story: Story, section: Section): Story {
  const rest = story.sections.filter((s) => s.id !== section.id);
  rest.push(section);
  rest.sort(sectionCmp);
  return { ...story, sections: rest };
}

// deterministic serialization (sorted keys, compact) for state comparison
export function canonicalJson(value: unknown): string {
  if (value === null || typeof value !== "object") {
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return "[" + value.map(canonicalJson).join(",") + "]";
  }
  const entries = Object.entries(value as Record<string, unknown>).sort(([a], [b]) => cmpStr(a, b));
  return "{" + entries.map(([k, v]) => JSON.stringify(k) + ":" + canonicalJson(v)).join(",") + "}";
}

export function normalizeStory(raw: Story): Story {
  // wire stories are already canonically ordered; re-sorting is cheap
  // insurance and re-normalizes any unreduced keys
  const sections = raw.sections
    .map((s) => ({
      ...s,
      order_key: normalizeKey(s.order_key),
      media: s.media.map((m) => ({ ...m, order_key: normalizeKey(m.order_key) })).sort(mediaCmp),
    }))
    .sort(sectionCmp);
  return { ...raw, sections };
}

// ---------------------------------------------------------------------------
// story events (the recruitment/roster side channel)

export interface StoryEvent {
  at_revision: number;
  kind: string;
  seq: number;
  [extra: string]: unknown;
}

export function applyEvent(story: Story, event: StoryEvent): Story {
  switch (event.kind) {
    case "offer_added": {
      const actor = event.actor as string;
      const display = event.display_name as string;
      const existing = story.offers.find((o) => o.actor === actor);
      if (existing) {
        return {
          ...story,
          offers: story.offers.map((o) => (o.actor === actor ? { ...o, display_name: display } : o)),
        };
      }
      return {
        ...story,
        offers: [...story.offers, { actor, created_at: event.created_at as number, display_name: display }],
      };
    }
    case "request_created": {
      const request = event.request as ImprovementRequest;
      return { ...story, requests: [...story.requests, request] };
    }
    case "request_resolved": {
      const id = event.request_id as string;
      return {
        ...story,
        requests: story.requests.map((r) =>
          r.id === id && r.status === "open"
            ? { ...r, status: event.status as string, resolved_at: event.resolved_at as number }
            : r,
        ),
      };
    }
    case "contributor_seen": {
      return {
        ...story,
        contributors: { ...story.contributors, [event.actor as string]: event.display_name as string },
      };
    }
    default:
      return story; // view_recorded and future kinds don't touch replicas
  }
}

export function suggestedRecipients(story: Story): string[] {
  return [...story.offers].reverse().map((o) => o.display_name);
}

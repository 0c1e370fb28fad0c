// Browser bootstrap: wires the reducer to the DOM. The page carries a
// #storypad-boot JSON blob with {base_url, story_id, embed}. Everything the
// user does becomes a protocol op or an HTTP call; the DOM re-renders from
// reducer state, never the other way around.

import { CollabClient } from "./client.js";
import { Section, findSection, keyBetween, liveSections, suggestedRecipients } from "./model.js";
import { parseServerFrame } from "./protocol.js";
import {
  embedSnippet,
  escapeHtml,
  renderEditChrome,
  renderHistory,
  renderRequestForm,
  renderRequestLink,
  renderSectionEditor,
} from "./render.js";

interface Boot {
  base_url: string;
  embed: boolean;
  story_id: string;
  target_section: string | null;
  topic: string;
}

function bootConfig(): Boot {
  const el = document.getElementById("storypad-boot");
  if (!el) throw new Error("missing boot config");
  return JSON.parse(el.textContent || "{}") as Boot;
}

// a request link lands on the edit view with a #section-<id> fragment (or
// an explicit boot target); that section gets scrolled to and highlighted
export function targetSectionFrom(bootTarget: string | null, hash: string): string | null {
  if (bootTarget) return bootTarget;
  if (hash.startsWith("#section-")) return hash.slice("#section-".length) || null;
  return null;
}

// single-splice diff over code points: old -> new as (delete?, insert?)
export function spliceDiff(before: string, after: string): { offset: number; remove: number; insert: string } | null {
  if (before === after) return null;
  const a = [...before];
  const b = [...after];
  let start = 0;
  while (start < a.length && start < b.length && a[start] === b[start]) start++;
  let endA = a.length;
  let endB = b.length;
  while (endA > start && endB > start && a[endA - 1] === b[endB - 1]) {
    endA--;
    endB--;
  }
  return { offset: start, remove: endA - start, insert: b.slice(start, endB).join("") };
}

function main(): void {
  const boot = bootConfig();
  const mount = document.getElementById("app");
  if (!mount) return;
  const app: HTMLElement = mount;

  const wsUrl = boot.base_url.replace(/^http/, "ws") + "/ws";
  let socket = new WebSocket(wsUrl);
  const name = boot.embed
    ? window.prompt("Your name (editing via an embedded story):", "reader") || "reader"
    : window.prompt("Your name:", "reader") || "reader";

  const client = new CollabClient(boot.story_id, name, (text) => socket.send(text), {
    onChange: () => render(),
    onStatus: (status) => {
      const el = document.getElementById("status");
      if (el) el.textContent = status;
    },
  });

  socket.onopen = () => client.start();
  socket.onmessage = (msg) => client.handleFrame(parseServerFrame(String(msg.data)));
  socket.onclose = () => {
    setTimeout(() => window.location.reload(), 1500); // crude but honest recovery
  };

  let highlighted = false;

  function render(): void {
    const story = client.story;
    if (!story) return;
    const focused = document.activeElement as HTMLElement | null;
    const focusedSection = focused?.closest?.("[data-section]")?.getAttribute("data-section") ?? null;
    const focusedRole = focused?.getAttribute?.("data-role") ?? null;
    const caret = (focused as HTMLTextAreaElement)?.selectionStart ?? null;

    if (!document.getElementById("sections")) {
      app.innerHTML = `<div id="status"></div>${renderEditChrome(story)}<div id="panel"></div>`;
      bindChrome();
    }
    const headline = document.getElementById("headline") as HTMLInputElement;
    if (headline && document.activeElement !== headline) headline.value = story.headline;
    const outstanding = document.getElementById("outstanding");
    if (outstanding) outstanding.textContent = `${client.outstanding} outstanding requests`;
    const contributors = document.getElementById("contributors");
    if (contributors) {
      contributors.innerHTML = Object.values(story.contributors)
        .map((n) => `<li>${escapeHtml(n)}</li>`)
        .join("");
    }

    const host = document.getElementById("sections");
    if (!host) return;
    const live = liveSections(story);
    const wanted = live.map((s) => s.id).join("|");
    if (host.getAttribute("data-order") !== wanted) {
      host.innerHTML = live.map(renderSectionEditor).join("");
      host.setAttribute("data-order", wanted);
      bindSections(host);
    } else {
      for (const section of live) {
        syncSection(section, section.id === focusedSection ? focusedRole : null, caret);
      }
    }
    if (!highlighted) {
      const target = targetSectionFrom(boot.target_section, window.location.hash);
      if (target) {
        const el = document.getElementById(`section-${target}`);
        if (el) {
          el.scrollIntoView({ block: "center" });
          el.classList.add("highlight");
          highlighted = true;
        }
      }
    }
  }

  function syncSection(section: Section, skipRole: string | null, caret: number | null): void {
    const root = document.getElementById(`section-${section.id}`);
    if (!root) return;
    const headingEl = root.querySelector<HTMLInputElement>("[data-role=heading]");
    if (headingEl && skipRole !== "heading" && headingEl.value !== section.heading) {
      headingEl.value = section.heading;
    }
    const bodyEl = root.querySelector<HTMLTextAreaElement>("[data-role=body]");
    if (bodyEl && bodyEl.value !== section.body) {
      const hadFocus = skipRole === "body";
      bodyEl.value = section.body;
      if (hadFocus && caret !== null) {
        const pos = Math.min(caret, section.body.length);
        bodyEl.setSelectionRange(pos, pos);
      }
    }
    const curated = root.querySelector(".curated");
    if (curated) {
      const media = section.media
        .map(
          (m) => `<figure class="media" data-media="${escapeHtml(m.id)}">${m.resolved_html_safe}
            <button type="button" data-action="remove-media" data-section="${escapeHtml(section.id)}"
                    data-media-id="${escapeHtml(m.id)}">remove</button></figure>`,
        )
        .join("");
      const next = `${media}<button type="button" data-action="embed-media" data-section="${escapeHtml(section.id)}">embed media</button>`;
      if (curated.innerHTML !== next) curated.innerHTML = next;
    }
  }

  function sectionBodyOps(sectionId: string, value: string): void {
    const story = client.story;
    if (!story) return;
    const section = findSection(story, sectionId);
    if (!section || section.tombstone) return;
    const diff = spliceDiff(section.body, value);
    if (!diff) return;
    if (diff.remove > 0) {
      client.localEdit({ kind: "text_delete", section_id: sectionId, offset: diff.offset, length: diff.remove });
    }
    if (diff.insert) {
      client.localEdit({ kind: "text_insert", section_id: sectionId, offset: diff.offset, text: diff.insert });
    }
  }

  function bindSections(host: HTMLElement): void {
    host.querySelectorAll<HTMLTextAreaElement>("[data-role=body]").forEach((area) => {
      area.addEventListener("input", () => {
        const sid = area.closest("[data-section]")?.getAttribute("data-section");
        if (sid) sectionBodyOps(sid, area.value);
      });
    });
    host.querySelectorAll<HTMLInputElement>("[data-role=heading]").forEach((input) => {
      input.addEventListener("change", () => {
        const sid = input.closest("[data-section]")?.getAttribute("data-section");
        if (sid) client.localEdit({ kind: "set_heading", section_id: sid, text: input.value });
      });
    });
  }

  async function postJson(path: string, body: unknown): Promise<Record<string, unknown>> {
    const resp = await fetch(boot.base_url + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return (await resp.json()) as Record<string, unknown>;
  }

  function openRequestForm(sectionId: string | null): void {
    const story = client.story;
    const panel = document.getElementById("panel");
    if (!story || !panel) return;
    panel.innerHTML = renderRequestForm(suggestedRecipients(story), sectionId);
    const form = document.getElementById("request-form") as HTMLFormElement;
    form.addEventListener("submit", async (e) => {
      e.preventDefault();
      const data = new FormData(form);
      const payload: Record<string, unknown> = {
        requester_name: data.get("requester_name") || "anonymous",
        recipient: data.get("recipient") || "",
        request_text: data.get("request_text") || "",
        topic: data.get("topic") || story.topic,
      };
      const sid = form.getAttribute("data-section");
      if (sid) payload.section_id = sid;
      const out = await postJson(`/stories/${boot.story_id}/requests`, payload);
      panel.innerHTML = renderRequestLink(String(out.link ?? ""));
    });
  }

  function showHistory(sectionId: string): void {
    const panel = document.getElementById("panel");
    if (!panel) return;
    fetch(`${boot.base_url}/stories/${boot.story_id}/history/${sectionId}`)
      .then((r) => r.json())
      .then((data: { snapshots: { revision: number; section: Section | null }[] }) => {
        panel.innerHTML = `<h3>Section history</h3>${renderHistory(sectionId, data.snapshots)}`;
      });
  }

  function bindChrome(): void {
    const headline = document.getElementById("headline") as HTMLInputElement;
    headline?.addEventListener("change", () => {
      client.localEdit({ kind: "set_headline", text: headline.value });
    });

    document.getElementById("offer-form")?.addEventListener("submit", async (e) => {
      e.preventDefault();
      const input = document.getElementById("offer-name") as HTMLInputElement;
      if (!input.value.trim()) return;
      await postJson(`/stories/${boot.story_id}/offers`, { display_name: input.value.trim() });
      input.value = "";
    });

    app.addEventListener("click", async (e) => {
      const target = (e.target as HTMLElement).closest("[data-action]") as HTMLElement | null;
      if (!target) return;
      const action = target.getAttribute("data-action");
      const sectionId = target.getAttribute("data-section");
      const story = client.story;
      if (!story) return;
      if (action === "add-section") {
        const live = liveSections(story);
        const lastKey = live.length ? live[live.length - 1].order_key : null;
        client.localEdit({
          kind: "insert_section",
          section_id: `sec-${client.nextOpId()}`,
          order_key: keyBetween(lastKey, null),
          heading: "",
        });
      } else if (action === "remove-section" && sectionId) {
        client.localEdit({ kind: "remove_section", section_id: sectionId });
      } else if (action === "embed-media" && sectionId) {
        const url = window.prompt("URL of a page with a photo, video, audio or microblog post:");
        if (!url) return;
        const out = await postJson("/media/resolve", { url });
        const section = findSection(story, sectionId);
        const keys = section?.media.map((m) => m.order_key) ?? [];
        client.localEdit({
          kind: "add_media",
          section_id: sectionId,
          media: out.media,
          position: keyBetween(keys.length ? keys[keys.length - 1] : null, null),
        });
      } else if (action === "remove-media" && sectionId) {
        client.localEdit({
          kind: "remove_media",
          section_id: sectionId,
          media_id: target.getAttribute("data-media-id"),
        });
      } else if (action === "history" && sectionId) {
        showHistory(sectionId);
      } else if (action === "revert" && sectionId) {
        client.requestRevert(sectionId, Number(target.getAttribute("data-revision")));
      } else if (action === "ask" || action === "open-request") {
        e.preventDefault();
        openRequestForm(sectionId);
      } else if (action === "copy-embed") {
        await navigator.clipboard.writeText(embedSnippet(boot.base_url, boot.story_id));
        target.textContent = "copied!";
      } else if (action === "copy-link") {
        await navigator.clipboard.writeText(target.getAttribute("data-link") || "");
        target.textContent = "copied!";
      } else if (action === "suggest-headline") {
        const resp = await fetch(`${boot.base_url}/stories/${boot.story_id}/suggestions?count=6`);
        const data = (await resp.json()) as { headlines: string[] };
        const panel = document.getElementById("panel");
        if (panel) {
          panel.innerHTML = data.headlines
            .map((h) => `<button type="button" data-action="pick-headline" data-headline="${escapeHtml(h)}">${escapeHtml(h)}</button>`)
            .join("<br>");
        }
      } else if (action === "pick-headline") {
        client.localEdit({ kind: "set_headline", text: target.getAttribute("data-headline") || "" });
      }
    });
  }
}

if (typeof document !== "undefined") {
  main();
}

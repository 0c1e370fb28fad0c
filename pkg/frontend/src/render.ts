// Pure HTML builders for the views; DOM wiring lives in app.ts. Keeping
// these string-pure makes them testable without a browser.

import {
  Section,
  Story,
  liveSections,
  outstandingCount,
  suggestedRecipients,
} from "./model.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#x27;");
}

export function renderReadOnly(story: Story, editUrl: string): string {
  const count = outstandingCount(story);
  const sections = liveSections(story)
    .map(
      (s) => `
      <section id="section-${escapeHtml(s.id)}">
        ${s.heading ? `<h2>${escapeHtml(s.heading)}</h2>` : ""}
        ${s.media.map((m) => `<figure class="media">${m.resolved_html_safe}</figure>`).join("")}
        ${s.body ? `<div class="body">${escapeHtml(s.body)}</div>` : ""}
      </section>`,
    )
    .join("");
  const credits = story.attribution
    .filter((a) => a.accepted)
    .map((a) => escapeHtml(a.display_name))
    .join(", ");
  // read-only: no contenteditable, no buttons except the invitation to help
  return `
    <div class="requests">${count} outstanding requests —
      <a href="${escapeHtml(editUrl)}">this story is open: help improve it</a></div>
    <article>
      <h1>${escapeHtml(story.headline)}</h1>
      ${sections}
      ${credits ? `<footer class="attribution">With contributions from ${credits}</footer>` : ""}
    </article>`;
}

export function renderSectionEditor(section: Section): string {
  const media = section.media
    .map(
      (m) => `
      <figure class="media" data-media="${escapeHtml(m.id)}">
        ${m.resolved_html_safe}
        <button type="button" data-action="remove-media" data-section="${escapeHtml(section.id)}"
                data-media-id="${escapeHtml(m.id)}">remove</button>
      </figure>`,
    )
    .join("");
  return `
    <section class="editor-section" id="section-${escapeHtml(section.id)}" data-section="${escapeHtml(section.id)}">
      <input class="heading" data-role="heading" value="${escapeHtml(section.heading)}"
             placeholder="Section heading" maxlength="200">
      <div class="curated">${media}
        <button type="button" data-action="embed-media" data-section="${escapeHtml(section.id)}">embed media</button>
      </div>
      <textarea class="commentary" data-role="body"
                placeholder="Add commentary, context, narrative…">${escapeHtml(section.body)}</textarea>
      <div class="section-tools">
        <button type="button" data-action="history" data-section="${escapeHtml(section.id)}">history</button>
        <button type="button" data-action="ask" data-section="${escapeHtml(section.id)}">ask for improvements</button>
        <button type="button" data-action="remove-section" data-section="${escapeHtml(section.id)}">remove section</button>
      </div>
    </section>`;
}

export function renderEditChrome(story: Story): string {
  const contributors = Object.values(story.contributors)
    .map((name) => `<li>${escapeHtml(name)}</li>`)
    .join("");
  const recipients = suggestedRecipients(story)
    .map((name) => `<option value="${escapeHtml(name)}">${escapeHtml(name)}</option>`)
    .join("");
  return `
    <header>
      <input id="headline" value="${escapeHtml(story.headline)}" maxlength="300">
      <button type="button" data-action="suggest-headline">suggest a headline</button>
      <span class="requests" id="outstanding">${outstandingCount(story)} outstanding requests</span>
    </header>
    <aside>
      <h3>Contributors</h3><ul id="contributors">${contributors}</ul>
      <form id="offer-form">
        <input id="offer-name" placeholder="Add Your Name to Offer Help">
        <button type="submit">offer</button>
      </form>
      <datalist id="recipient-options">${recipients}</datalist>
      <button type="button" data-action="copy-embed">Embed this story</button>
      <a href="#" data-action="open-request">ask for improvements</a>
    </aside>
    <main id="sections"></main>
    <button type="button" data-action="add-section">add a section</button>`;
}

export function renderHistory(sectionId: string, snapshots: { revision: number; section: Section | null }[]): string {
  const rows = snapshots
    .map(
      (snap) => `
      <li>
        <span>revision ${snap.revision}</span>
        <code>${escapeHtml((snap.section?.heading ?? "") || "(no heading)")}</code>
        <code>${escapeHtml((snap.section?.body ?? "").slice(0, 80))}</code>
        <button type="button" data-action="revert" data-section="${escapeHtml(sectionId)}"
                data-revision="${snap.revision}">restore this version</button>
      </li>`,
    )
    .join("");
  return `<ul class="history">${rows}</ul>`;
}

export function renderRequestForm(recipients: string[], sectionId: string | null): string {
  const options = recipients.map((r) => `<option value="${escapeHtml(r)}">${escapeHtml(r)}</option>`).join("");
  return `
    <form id="request-form" ${sectionId ? `data-section="${escapeHtml(sectionId)}"` : ""}>
      <input name="requester_name" placeholder="your name" required>
      <input name="recipient" list="request-recipients" placeholder="who should help?">
      <datalist id="request-recipients">${options}</datalist>
      <textarea name="request_text" placeholder="what needs improving?" required></textarea>
      <input name="topic" placeholder="topic">
      <button type="submit">create request</button>
    </form>`;
}

export function renderRequestLink(link: string): string {
  return `
    <div class="request-link">
      <p>Share this unique link with whoever can help:</p>
      <input readonly value="${escapeHtml(link)}">
      <button type="button" data-action="copy-link" data-link="${escapeHtml(link)}">copy link</button>
    </div>`;
}

export function embedSnippet(baseUrl: string, storyId: string): string {
  return `<script src="${baseUrl}/stories/${storyId}/embed.js" async></script>`;
}

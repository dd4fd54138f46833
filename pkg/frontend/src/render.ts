// State -> HTML. Kept as pure string templates so the contract tests can
// assert on rendered output without a browser DOM.

import type { Bubble, ChatState } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function renderBubble(bubble: Bubble, selections: Record<string, string>): string {
  switch (bubble.kind) {
    case "user":
      return `<div class="bubble user">${escapeHtml(bubble.text)}</div>`;
    case "assistant":
      return `<div class="bubble assistant">${escapeHtml(bubble.text)}</div>`;
    case "error":
      return `<div class="bubble error">${escapeHtml(bubble.text)}</div>`;
    case "choices": {
      const groups = bubble.questions.map((q) => {
        const picked = selections[q.factor] ?? "";
        const options = q.choices
          .map((c) => {
            const on = c === picked ? " selected" : "";
            return `<button class="choice${on}" data-factor="${escapeHtml(q.factor)}" data-value="${escapeHtml(c)}">${escapeHtml(c)}</button>`;
          })
          .join("");
        const free = q.allows_free_text
          ? `<input class="free-text" data-factor="${escapeHtml(q.factor)}" placeholder="${escapeHtml(q.factor)}">`
          : "";
        return `<fieldset class="choice-group" data-factor="${escapeHtml(q.factor)}"><legend>${escapeHtml(q.factor)}</legend>${options}${free}</fieldset>`;
      });
      return `<div class="bubble assistant follow-up">${groups.join("")}<button class="submit-answers">Submit</button></div>`;
    }
    case "answer":
      return [
        `<div class="answer-card">`,
        `<p class="answer-text">${escapeHtml(bubble.card.text)}</p>`,
        `<a class="answer-source" href="${escapeHtml(bubble.card.source_url)}">${escapeHtml(bubble.card.source_url)}</a>`,
        `<p class="answer-disclaimer">${escapeHtml(bubble.card.disclaimer)}</p>`,
        `</div>`,
      ].join("");
  }
}

export function renderChat(state: ChatState): string {
  const bubbles = state.bubbles
    .map((b) => renderBubble(b, state.selections))
    .join("\n");
  const busy = state.phase === "waiting" ? `<div class="spinner">…</div>` : "";
  return `<div class="chat">${bubbles}${busy}</div>`;
}

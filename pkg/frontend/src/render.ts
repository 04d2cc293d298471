import type { CaseSummary, CaseView, PointView, Progress } from './types.js';
import { GUIDANCE } from './types.js';

/** HTML-string views; reasoning text is always escaped, never altered. */

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;')
    .replace(/'/g, '&#39;');
}

export function renderBanner(message: string | null): string {
  if (!message) return '';
  return `<div class="banner error" role="alert">${escapeHtml(message)}</div>`;
}

export function renderProgress(progress: Progress): string {
  return (
    `<span class="progress" data-testid="progress">` +
    `${progress.annotated} / ${progress.total} points annotated</span>`
  );
}

export function renderQueue(queue: CaseSummary[], allDone: boolean): string {
  if (allDone) {
    return `<div class="banner done">All cases annotated. Nothing pending.</div>`;
  }
  const items = queue
    .map((summary) => {
      const badge =
        summary.status === 'pending'
          ? `${summary.annotated}/${summary.total}`
          : summary.status;
      const cls = summary.status === 'pending' ? 'pending' : 'collapsed';
      return (
        `<li class="case ${cls}">` +
        `<button data-action="open" data-case="${escapeHtml(summary.id)}">` +
        `${escapeHtml(summary.id)} <span class="badge">${escapeHtml(badge)}</span>` +
        `</button></li>`
      );
    })
    .join('');
  return `<ul class="queue">${items}</ul>`;
}

export function renderAttributes(attributes: Record<string, string>): string {
  const rows = Object.entries(attributes)
    .map(
      ([name, value]) =>
        `<tr><th>${escapeHtml(name)}</th><td>${escapeHtml(value)}</td></tr>`,
    )
    .join('');
  return `<table class="attributes">${rows}</table>`;
}

function pointRow(point: PointView, selected: boolean): string {
  const annotation = point.annotation;
  const badge = annotation
    ? annotation.hallucinated === 1
      ? '<span class="badge flagged">hallucination</span>'
      : '<span class="badge clean">ok</span>'
    : '<span class="badge todo">unannotated</span>';
  return (
    `<li class="point${selected ? ' selected' : ''}" data-point="${point.index}">` +
    `<span class="text">${escapeHtml(point.text)}</span> ${badge}` +
    `<span class="actions">` +
    `<button data-action="mark-yes" data-point="${point.index}">hallucination (y)</button>` +
    `<button data-action="mark-no" data-point="${point.index}">ok (n)</button>` +
    `</span></li>`
  );
}

export function renderCase(
  view: CaseView,
  selectedPoint: number,
  missing: number[],
): string {
  const active = view.rounds.find((r) => r.round === 0);
  const later = view.rounds.filter((r) => r.round > 0);
  const points = active ? active.points : [];
  const releaseDisabled = missing.length > 0 || points.length === 0;
  const hint = releaseDisabled && missing.length > 0
    ? `<span class="hint">missing: point ${missing.join(', point ')}</span>`
    : '';
  const laterRounds = later
    .map(
      (round) =>
        `<details class="round"><summary>round ${round.round} — decision: ` +
        `${escapeHtml(String(round.decision))}</summary><ol>` +
        round.points.map((p) => `<li>${escapeHtml(p.text)}</li>`).join('') +
        `</ol></details>`,
    )
    .join('');
  return (
    `<section class="case-view" data-case="${escapeHtml(view.id)}">` +
    `<aside class="attribute-panel"><h2>Attributes</h2>` +
    renderAttributes(view.attributes) +
    `<p class="guidance">${escapeHtml(GUIDANCE)}</p></aside>` +
    `<main class="points-panel">` +
    `<h2>${escapeHtml(view.id)} — decision: ${escapeHtml(String(active?.decision ?? '?'))}</h2>` +
    `<ol class="points">` +
    points.map((p, i) => pointRow(p, i === selectedPoint)).join('') +
    `</ol>` +
    `<button data-action="release" ${releaseDisabled ? 'disabled' : ''}>release case (Enter)</button>` +
    hint +
    laterRounds +
    `</main></section>`
  );
}

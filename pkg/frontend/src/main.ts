import { ApiClient } from './api.js';
import { actionForKey } from './keyboard.js';
import { renderBanner, renderCase, renderProgress, renderQueue } from './render.js';
import { AnnotationSession } from './state.js';

function annotatorName(): string {
  const stored = window.localStorage.getItem('annotator');
  if (stored) return stored;
  const name = window.prompt('Annotator name?', 'annotator-1') || 'annotator-1';
  window.localStorage.setItem('annotator', name);
  return name;
}

function draw(root: HTMLElement, session: AnnotationSession): void {
  const header =
    `<header><h1>Reasoning annotation</h1>${renderProgress(session.progress)}</header>`;
  const body = session.current
    ? renderCase(session.current, session.selectedPoint, session.missingIndices())
    : renderQueue(session.queue, session.allAnnotated());
  root.innerHTML = renderBanner(session.banner) + header + body;
}

async function apply(session: AnnotationSession, action: ReturnType<typeof actionForKey>) {
  switch (action.kind) {
    case 'mark':
      await session.markSelected(action.hallucinated);
      break;
    case 'move':
      session.selectPoint(action.offset);
      break;
    case 'release':
      if (session.canRelease()) await session.release();
      break;
    case 'none':
      break;
  }
}

export function boot(root: HTMLElement): AnnotationSession {
  const api = new ApiClient('');
  const session = new AnnotationSession(api, annotatorName(), {
    onChange: () => draw(root, session),
  });

  root.addEventListener('click', (event) => {
    const target = (event.target as HTMLElement).closest('[data-action]');
    if (!(target instanceof HTMLElement)) return;
    const action = target.dataset.action;
    const point = Number(target.dataset.point ?? 'NaN');
    if (action === 'open' && target.dataset.case) void session.open(target.dataset.case);
    else if (action === 'mark-yes') void session.mark(point, 1);
    else if (action === 'mark-no') void session.mark(point, 0);
    else if (action === 'release') void session.release();
  });

  window.addEventListener('keydown', (event) => {
    if (event.target instanceof HTMLInputElement) return;
    void apply(session, actionForKey(event.key));
  });

  void session.loadQueue().then(() => session.openNextPending());
  return session;
}

const rootElement = document.getElementById('app');
if (rootElement) boot(rootElement);

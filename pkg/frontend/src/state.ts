import type { ApiClient } from './api.js';
import type { CaseSummary, CaseView, PointView, Progress } from './types.js';

/** Annotation flows through the active round only (the initial generation). */
export const ACTIVE_ROUND = 0;

export interface SessionEvents {
  onChange?: () => void;
  onError?: (message: string) => void;
}

function activePoints(view: CaseView): PointView[] {
  const round = view.rounds.find((r) => r.round === ACTIVE_ROUND);
  return round ? round.points : [];
}

/**
 * Queue-driven annotation session: open a pending case, mark its points,
 * release, auto-advance. Marks are applied optimistically and reconciled with
 * the server's response; a rejection reverts the point and surfaces the error.
 */
export class AnnotationSession {
  queue: CaseSummary[] = [];
  current: CaseView | null = null;
  selectedPoint = 0;
  progress: Progress = { annotated: 0, total: 0 };
  banner: string | null = null;

  constructor(
    private readonly api: ApiClient,
    readonly annotator: string,
    private readonly events: SessionEvents = {},
  ) {}

  private changed(): void {
    this.events.onChange?.();
  }

  private fail(message: string): void {
    this.banner = message;
    this.events.onError?.(message);
    this.changed();
  }

  /** Pending cases first (queue order), completed cases collapsed after. */
  async loadQueue(): Promise<void> {
    try {
      const all = await this.api.listCases();
      const pending = all.filter((c) => c.status === 'pending');
      const rest = all.filter((c) => c.status !== 'pending');
      this.queue = [...pending, ...rest];
      this.progress = await this.api.progress();
      this.banner = null;
    } catch (error) {
      this.fail(String(error instanceof Error ? error.message : error));
      return;
    }
    this.changed();
  }

  pendingCases(): CaseSummary[] {
    return this.queue.filter((c) => c.status === 'pending');
  }

  allAnnotated(): boolean {
    return this.queue.length > 0 && this.pendingCases().length === 0;
  }

  async open(caseId: string): Promise<void> {
    try {
      this.current = await this.api.getCase(caseId);
      this.selectedPoint = 0;
      this.banner = null;
    } catch (error) {
      this.fail(String(error instanceof Error ? error.message : error));
      return;
    }
    this.changed();
  }

  async openNextPending(): Promise<boolean> {
    const next = this.pendingCases()[0];
    if (!next) {
      this.current = null;
      this.changed();
      return false;
    }
    await this.open(next.id);
    return true;
  }

  points(): PointView[] {
    return this.current ? activePoints(this.current) : [];
  }

  selectPoint(offset: number): void {
    const count = this.points().length;
    if (count === 0) return;
    this.selectedPoint = Math.min(Math.max(this.selectedPoint + offset, 0), count - 1);
    this.changed();
  }

  /** Optimistic mark of the point at `index`; reverts on server rejection. */
  async mark(index: number, hallucinated: 0 | 1): Promise<void> {
    if (!this.current) return;
    const caseId = this.current.id;
    const point = this.points().find((p) => p.index === index);
    if (!point) return;
    const previous = point.annotation;
    point.annotation = { hallucinated, annotator: this.annotator };
    this.changed();
    try {
      const reconciled = await this.api.annotate(
        caseId,
        ACTIVE_ROUND,
        index,
        hallucinated,
        this.annotator,
      );
      if (this.current && this.current.id === caseId) {
        this.current = reconciled;
      }
      await this.refreshSummary(caseId);
      this.progress = await this.api.progress();
      this.banner = null;
    } catch (error) {
      if (point.annotation?.annotator === this.annotator) {
        point.annotation = previous;
      }
      this.fail(String(error instanceof Error ? error.message : error));
      return;
    }
    this.changed();
  }

  async markSelected(hallucinated: 0 | 1): Promise<void> {
    const point = this.points()[this.selectedPoint];
    if (point) {
      await this.mark(point.index, hallucinated);
      this.selectPoint(1);
    }
  }

  /** Indices of points still lacking an annotation in the active round. */
  missingIndices(): number[] {
    return this.points()
      .filter((p) => !p.annotation)
      .map((p) => p.index);
  }

  canRelease(): boolean {
    return this.current !== null && this.points().length > 0 && this.missingIndices().length === 0;
  }

  /**
   * Release the fully annotated case and advance to the next pending one.
   * Released cases are eligible for the oracle feedback arm downstream.
   */
  async release(): Promise<{ released: string } | { blocked: number[] }> {
    if (!this.current) return { blocked: [] };
    const missing = this.missingIndices();
    if (missing.length > 0 || this.points().length === 0) {
      return { blocked: missing };
    }
    const released = this.current.id;
    await this.loadQueue();
    await this.openNextPending();
    return { released };
  }

  private async refreshSummary(caseId: string): Promise<void> {
    const summary = this.queue.find((c) => c.id === caseId);
    if (!summary || !this.current || this.current.id !== caseId) return;
    const points = this.points();
    summary.annotated = points.filter((p) => p.annotation).length;
    summary.total = points.length;
    if (summary.total > 0 && summary.annotated === summary.total) {
      summary.status = 'done';
    }
  }
}

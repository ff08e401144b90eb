/** Review session controller: navigation, edit submission with optimistic
 * concurrency, and conflict resolution.
 *
 * Contract with the rest of the UI: the score badge and category chip are
 * set exclusively from service responses (initial load, edit responses,
 * refetches); nothing here recomputes a score. A conflicted edit is never
 * dropped silently - it parks in the pending queue until the user replays
 * or discards it. */

import { ReviewClient } from './api';
import type { EditOp, LesionSummary, StudyReport } from './types';
import { initialViewState, PendingEdit, ViewState } from './state';

export interface BadgeState {
  totalScore: number;
  category: string;
  revision: number;
}

export interface ControllerEvents {
  /** Badge/lesion list changed; repaint. */
  onState?: (controller: ReviewController) => void;
  /** An edit hit a stale revision; the UI must prompt replay or discard. */
  onConflict?: (pending: PendingEdit, staleBanner: string) => void;
  /** An edit was rejected as invalid (422). */
  onRejected?: (edit: EditOp, detail: string) => void;
}

export class ReviewController {
  view!: ViewState;
  badge!: BadgeState;
  lesions: LesionSummary[] = [];
  shape: [number, number, number] = [0, 0, 0];
  /** True while an edit round-trip is in flight; only one at a time. */
  editInFlight = false;

  constructor(
    private client: ReviewClient,
    private events: ControllerEvents = {},
  ) {}

  async load(studyId: string): Promise<void> {
    const info = await this.client.getStudy(studyId);
    this.shape = info.shape;
    this.view = initialViewState(studyId, info.shape[0], info.revision);
    this.applyReport(info);
    await this.refreshLesions();
  }

  /** The single place badge state is written; report always comes from
   * the service. */
  private applyReport(report: StudyReport): void {
    this.badge = {
      totalScore: report.total_score,
      category: report.category,
      revision: report.revision,
    };
    this.view = { ...this.view, lastKnownRevision: report.revision };
    this.events.onState?.(this);
  }

  private async refreshLesions(): Promise<void> {
    const doc = await this.client.getLesions(this.view.studyId);
    this.lesions = doc.lesions;
    this.events.onState?.(this);
  }

  selectLesion(id: number | null): void {
    this.view = { ...this.view, selectedLesionId: id };
    this.events.onState?.(this);
  }

  /** Remove one lesion (the list's toggle action). */
  submitToggle(lesionId: number): Promise<void> {
    return this.submitEdit({ op: 'remove_component', component_id: lesionId });
  }

  /** Paint a stroke on the current slice. Voxels outside the slice are a
   * client-side error: rejected before any request goes out. */
  submitPaint(stroke: [number, number][], value: boolean): Promise<void> {
    const [, rows, cols] = this.shape;
    for (const [r, c] of stroke) {
      if (r < 0 || r >= rows || c < 0 || c >= cols) {
        this.events.onRejected?.(
          { op: 'paint', voxels: [], value },
          `stroke cell (${r}, ${c}) is outside the ${rows}x${cols} slice`,
        );
        return Promise.resolve();
      }
    }
    const voxels = stroke.map(
      ([r, c]) => [this.view.sliceIndex, r, c] as [number, number, number],
    );
    return this.submitEdit({ op: 'paint', voxels, value });
  }

  async submitEdit(edit: EditOp): Promise<void> {
    if (this.editInFlight) {
      throw new Error('an edit is already in flight');
    }
    this.editInFlight = true;
    const sentRevision = this.view.lastKnownRevision;
    try {
      const result = await this.client.postEdit(this.view.studyId, sentRevision, edit);
      if (result.kind === 'ok') {
        this.applyReport(result.report);
        await this.refreshLesions();
        return;
      }
      if (result.kind === 'conflict') {
        // Refetch so the next attempt sees the real revision, then hand the
        // decision to the user; the edit stays queued either way.
        const pending: PendingEdit = { edit, sentRevision };
        this.view = { ...this.view, pendingEdits: [...this.view.pendingEdits, pending] };
        const info = await this.client.getStudy(this.view.studyId);
        this.applyReport(info);
        await this.refreshLesions();
        this.events.onConflict?.(pending, result.detail);
        return;
      }
      this.events.onRejected?.(edit, result.detail);
    } finally {
      this.editInFlight = false;
    }
  }

  /** User chose to replay a conflicted edit against the fresh revision. */
  async replayPending(pending: PendingEdit): Promise<void> {
    this.dropPending(pending);
    await this.submitEdit(pending.edit);
  }

  /** User chose to discard; explicit, never automatic. */
  discardPending(pending: PendingEdit): void {
    this.dropPending(pending);
    this.events.onState?.(this);
  }

  private dropPending(pending: PendingEdit): void {
    this.view = {
      ...this.view,
      pendingEdits: this.view.pendingEdits.filter((p) => p !== pending),
    };
  }
}

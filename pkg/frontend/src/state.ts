/** View state for one review session plus its invariant-preserving helpers. */

import type { EditOp } from './types';

export interface WindowPreset {
  name: string;
  center: number;
  width: number;
}

/** Calcium first: it is the preset the review loop lives in. */
export const WINDOW_PRESETS: WindowPreset[] = [
  { name: 'calcium', center: 300, width: 1500 },
  { name: 'soft tissue', center: 40, width: 400 },
  { name: 'bone', center: 500, width: 2000 },
];

export interface PendingEdit {
  edit: EditOp;
  /** Revision the edit was built against (what we told the server). */
  sentRevision: number;
}

export interface ViewState {
  studyId: string;
  sliceIndex: number;
  sliceCount: number;
  windowCenter: number;
  windowWidth: number;
  overlayVisible: boolean;
  selectedLesionId: number | null;
  lastKnownRevision: number;
  /** Conflicted edits awaiting an explicit replay/discard decision.
   * Empty whenever the UI is idle. */
  pendingEdits: PendingEdit[];
}

export function initialViewState(studyId: string, sliceCount: number, revision: number): ViewState {
  const calcium = WINDOW_PRESETS[0];
  return {
    studyId,
    sliceIndex: 0,
    sliceCount,
    windowCenter: calcium.center,
    windowWidth: calcium.width,
    overlayVisible: true,
    selectedLesionId: null,
    lastKnownRevision: revision,
    pendingEdits: [],
  };
}

export function clampSlice(state: ViewState, index: number): number {
  return Math.min(Math.max(index, 0), state.sliceCount - 1);
}

export function stepSlice(state: ViewState, delta: number): ViewState {
  return { ...state, sliceIndex: clampSlice(state, state.sliceIndex + delta) };
}

export function applyPreset(state: ViewState, preset: WindowPreset): ViewState {
  return { ...state, windowCenter: preset.center, windowWidth: preset.width };
}

export function toggleOverlay(state: ViewState): ViewState {
  return { ...state, overlayVisible: !state.overlayVisible };
}

/** Keyboard-first navigation: key -> action name. */
export type KeyAction =
  | { kind: 'step'; delta: number }
  | { kind: 'preset'; preset: WindowPreset }
  | { kind: 'toggle-overlay' };

export function actionForKey(key: string): KeyAction | null {
  switch (key) {
    case 'ArrowDown':
    case 'j':
      return { kind: 'step', delta: 1 };
    case 'ArrowUp':
    case 'k':
      return { kind: 'step', delta: -1 };
    case 'PageDown':
      return { kind: 'step', delta: 10 };
    case 'PageUp':
      return { kind: 'step', delta: -10 };
    case '1':
    case '2':
    case '3': {
      const preset = WINDOW_PRESETS[Number(key) - 1];
      return preset ? { kind: 'preset', preset } : null;
    }
    case 'o':
      return { kind: 'toggle-overlay' };
    default:
      return null;
  }
}

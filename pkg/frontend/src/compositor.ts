/** Pure pixel compositing: grayscale frame + translucent overlay runs +
 * selected-lesion highlight into one RGBA buffer.
 *
 * Everything here is a function of (frame, runs, style); given the same
 * revision, slice, and window, the service returns identical inputs, so
 * composited frames are reproducible byte for byte. */

import type { Overlay, Run } from './types';

export interface OverlayStyle {
  /** Base mask tint, [r, g, b, alpha 0..1]. */
  base: [number, number, number, number];
  /** Selected-lesion tint; visually distinct from base. */
  highlight: [number, number, number, number];
}

export const DEFAULT_STYLE: OverlayStyle = {
  base: [255, 64, 64, 0.45],
  highlight: [255, 224, 32, 0.65],
};

/** Grayscale bytes -> opaque RGBA. */
export function frameToRgba(pixels: Uint8Array, rows: number, cols: number): Uint8ClampedArray {
  if (pixels.length !== rows * cols) {
    throw new Error(`frame holds ${pixels.length} pixels, expected ${rows * cols}`);
  }
  const out = new Uint8ClampedArray(rows * cols * 4);
  for (let i = 0; i < pixels.length; i++) {
    const v = pixels[i];
    out[i * 4] = v;
    out[i * 4 + 1] = v;
    out[i * 4 + 2] = v;
    out[i * 4 + 3] = 255;
  }
  return out;
}

/** Which pixels do these runs cover? One byte per pixel, 1 = covered. */
export function runMask(runs: Run[], rows: number, cols: number): Uint8Array {
  const mask = new Uint8Array(rows * cols);
  for (const [row, start, length] of runs) {
    for (let c = start; c < start + length; c++) {
      mask[row * cols + c] = 1;
    }
  }
  return mask;
}

function blendWhere(
  rgba: Uint8ClampedArray,
  covered: Uint8Array,
  tint: [number, number, number, number],
): void {
  const [tr, tg, tb, alpha] = tint;
  for (let p = 0; p < covered.length; p++) {
    if (!covered[p]) continue;
    const i = p * 4;
    rgba[i] = Math.round(rgba[i] * (1 - alpha) + tr * alpha);
    rgba[i + 1] = Math.round(rgba[i + 1] * (1 - alpha) + tg * alpha);
    rgba[i + 2] = Math.round(rgba[i + 2] * (1 - alpha) + tb * alpha);
  }
}

export interface RenderInputs {
  pixels: Uint8Array;
  rows: number;
  cols: number;
  overlay: Overlay | null;
  overlayVisible: boolean;
  selectedLesionId: number | null;
  style?: OverlayStyle;
}

/** Composite one view. Overlay hidden (or absent) -> frame only; the
 * selected lesion's pixels take the highlight style, every other overlay
 * pixel the base style. */
export function renderView(inputs: RenderInputs): Uint8ClampedArray {
  const style = inputs.style ?? DEFAULT_STYLE;
  const { rows, cols } = inputs;
  const rgba = frameToRgba(inputs.pixels, rows, cols);
  if (!inputs.overlayVisible || !inputs.overlay) {
    return rgba;
  }
  const covered = runMask(inputs.overlay.runs, rows, cols);
  const selected = inputs.overlay.lesion_runs.find(
    (entry) => entry.id === inputs.selectedLesionId,
  );
  if (selected) {
    const highlightMask = runMask(selected.runs, rows, cols);
    const baseMask = covered.map((v, p) => (v && !highlightMask[p] ? 1 : 0));
    blendWhere(rgba, baseMask, style.base);
    blendWhere(rgba, highlightMask, style.highlight);
  } else {
    blendWhere(rgba, covered, style.base);
  }
  return rgba;
}

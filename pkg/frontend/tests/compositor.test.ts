import { describe, expect, it } from 'vitest';

import { DEFAULT_STYLE, frameToRgba, renderView, runMask } from '../src/compositor';
import type { Overlay, Run } from '../src/types';

/** Golden slice: the two-lesion phantom's slice 1 as the service serves it
 * (40x40 frame, lesion rows 20..24 spanning cols 20..29). */
const ROWS = 40;
const COLS = 40;
const GOLDEN_RUNS: Run[] = [20, 21, 22, 23, 24].map((r) => [r, 20, 10] as Run);

function goldenFrame(): Uint8Array {
  // Deterministic grayscale ramp, same recipe every call.
  const pixels = new Uint8Array(ROWS * COLS);
  for (let i = 0; i < pixels.length; i++) pixels[i] = (i * 7) % 256;
  return pixels;
}

function goldenOverlay(lesionRuns: { id: number; runs: Run[] }[] = []): Overlay {
  return {
    revision: 0,
    slice: 1,
    shape: [ROWS, COLS],
    runs: GOLDEN_RUNS,
    lesion_runs: lesionRuns,
  };
}

function blend(value: number, tint: number, alpha: number): number {
  return Math.round(value * (1 - alpha) + tint * alpha);
}

describe('renderView', () => {
  it('matches served run-lengths pixel for pixel on the golden slice', () => {
    const pixels = goldenFrame();
    const rgba = renderView({
      pixels,
      rows: ROWS,
      cols: COLS,
      overlay: goldenOverlay(),
      overlayVisible: true,
      selectedLesionId: null,
    });
    const covered = runMask(GOLDEN_RUNS, ROWS, COLS);
    const [tr, tg, tb, alpha] = DEFAULT_STYLE.base;
    for (let p = 0; p < ROWS * COLS; p++) {
      const v = pixels[p];
      const expected = covered[p]
        ? [blend(v, tr, alpha), blend(v, tg, alpha), blend(v, tb, alpha), 255]
        : [v, v, v, 255];
      expect([rgba[p * 4], rgba[p * 4 + 1], rgba[p * 4 + 2], rgba[p * 4 + 3]],
        `pixel ${p}`).toEqual(expected);
    }
  });

  it('overlay hidden renders the frame only', () => {
    const pixels = goldenFrame();
    const rgba = renderView({
      pixels,
      rows: ROWS,
      cols: COLS,
      overlay: goldenOverlay(),
      overlayVisible: false,
      selectedLesionId: null,
    });
    expect(rgba).toEqual(frameToRgba(pixels, ROWS, COLS));
  });

  it('empty mask adds no overlay pixels', () => {
    const pixels = goldenFrame();
    const rgba = renderView({
      pixels,
      rows: ROWS,
      cols: COLS,
      overlay: { revision: 0, slice: 3, shape: [ROWS, COLS], runs: [], lesion_runs: [] },
      overlayVisible: true,
      selectedLesionId: null,
    });
    expect(rgba).toEqual(frameToRgba(pixels, ROWS, COLS));
  });

  it('selected lesion runs take the highlight style, others the base style', () => {
    const pixels = goldenFrame();
    const selectedRuns: Run[] = [[20, 20, 10], [21, 20, 10]];
    const otherRuns: Run[] = [[22, 20, 10], [23, 20, 10], [24, 20, 10]];
    const rgba = renderView({
      pixels,
      rows: ROWS,
      cols: COLS,
      overlay: goldenOverlay([
        { id: 2, runs: selectedRuns },
        { id: 5, runs: otherRuns },
      ]),
      overlayVisible: true,
      selectedLesionId: 2,
    });
    const high = runMask(selectedRuns, ROWS, COLS);
    const base = runMask(otherRuns, ROWS, COLS);
    const [hr, , , ha] = DEFAULT_STYLE.highlight;
    const [br, , , ba] = DEFAULT_STYLE.base;
    for (let p = 0; p < ROWS * COLS; p++) {
      if (high[p]) expect(rgba[p * 4]).toBe(blend(pixels[p], hr, ha));
      else if (base[p]) expect(rgba[p * 4]).toBe(blend(pixels[p], br, ba));
      else expect(rgba[p * 4]).toBe(pixels[p]);
    }
  });

  it('is reproducible: identical inputs give identical bytes', () => {
    const inputs = {
      pixels: goldenFrame(),
      rows: ROWS,
      cols: COLS,
      overlay: goldenOverlay([{ id: 1, runs: [GOLDEN_RUNS[0]] }]),
      overlayVisible: true,
      selectedLesionId: 1,
    };
    expect(renderView(inputs)).toEqual(renderView(inputs));
  });

  it('rejects a frame that disagrees with the declared shape', () => {
    expect(() => frameToRgba(new Uint8Array(10), 4, 4)).toThrow(/expected 16/);
  });
});

/** Browser bootstrap: canvas, score badge, lesion list, keyboard loop.
 * Markup contract lives in index.html. */

import { ReviewClient } from './api';
import { renderView } from './compositor';
import { ReviewController } from './controller';
import { actionForKey, applyPreset, stepSlice, toggleOverlay } from './state';
import type { Overlay } from './types';

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

async function repaint(controller: ReviewController, client: ReviewClient): Promise<void> {
  const view = controller.view;
  const [frame, overlay] = await Promise.all([
    client.getFrame(view.studyId, view.sliceIndex, view.windowCenter, view.windowWidth),
    client.getOverlay(view.studyId, view.sliceIndex),
  ]);
  if (frame.meta.revision !== overlay.revision) {
    // An edit landed between the two fetches; retry on the newer state.
    return repaint(controller, client);
  }
  const [rows, cols] = frame.meta.shape;
  const rgba = renderView({
    pixels: frame.pixels,
    rows,
    cols,
    overlay: overlay as Overlay,
    overlayVisible: view.overlayVisible,
    selectedLesionId: view.selectedLesionId,
  });
  const canvas = el<HTMLCanvasElement>('viewer');
  canvas.width = cols;
  canvas.height = rows;
  const ctx = canvas.getContext('2d');
  if (ctx) ctx.putImageData(new ImageData(new Uint8ClampedArray(rgba), cols, rows), 0, 0);
  el('slice-label').textContent =
    `slice ${view.sliceIndex + 1}/${view.sliceCount}  wc ${view.windowCenter} ww ${view.windowWidth}`;
}

function paintBadge(controller: ReviewController): void {
  el('score-badge').textContent = controller.badge.totalScore.toFixed(1);
  el('category-chip').textContent = controller.badge.category;
  el('revision-label').textContent = `rev ${controller.badge.revision}`;
  const list = el<HTMLUListElement>('lesion-list');
  list.replaceChildren(
    ...controller.lesions.map((lesion) => {
      const item = document.createElement('li');
      const label = document.createElement('span');
      label.textContent =
        `#${lesion.id}  score ${lesion.score.toFixed(1)}  peak ${lesion.max_hu} HU  ` +
        `${lesion.total_area_mm2.toFixed(2)} mm2  slices ${lesion.slice_span[0]}-${lesion.slice_span[1]}`;
      label.onclick = () => controller.selectLesion(lesion.id);
      const toggle = document.createElement('button');
      toggle.textContent = 'remove';
      toggle.onclick = () => void controller.submitToggle(lesion.id);
      item.append(label, toggle);
      return item;
    }),
  );
}

export async function start(baseUrl: string, studyId: string): Promise<ReviewController> {
  const client = new ReviewClient(baseUrl);
  const controller = new ReviewController(client, {
    onState: (c) => {
      paintBadge(c);
      void repaint(c, client);
    },
    onConflict: (pending, detail) => {
      const banner = el('conflict-banner');
      banner.hidden = false;
      banner.textContent = `stale revision: ${detail}`;
      const replay = el<HTMLButtonElement>('conflict-replay');
      const discard = el<HTMLButtonElement>('conflict-discard');
      replay.onclick = () => {
        banner.hidden = true;
        void controller.replayPending(pending);
      };
      discard.onclick = () => {
        banner.hidden = true;
        controller.discardPending(pending);
      };
    },
    onRejected: (_edit, detail) => {
      const banner = el('conflict-banner');
      banner.hidden = false;
      banner.textContent = `edit rejected: ${detail}`;
    },
  });
  await controller.load(studyId);

  document.addEventListener('keydown', (event) => {
    const action = actionForKey(event.key);
    if (!action) return;
    event.preventDefault();
    if (action.kind === 'step') controller.view = stepSlice(controller.view, action.delta);
    else if (action.kind === 'preset') controller.view = applyPreset(controller.view, action.preset);
    else controller.view = toggleOverlay(controller.view);
    void repaint(controller, client);
  });

  paintBadge(controller);
  await repaint(controller, client);
  return controller;
}

declare global {
  interface Window {
    cacscoreReview: typeof start;
  }
}

if (typeof window !== 'undefined') {
  window.cacscoreReview = start;
}

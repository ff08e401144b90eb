import { describe, expect, it } from 'vitest';

import { ReviewClient } from '../src/api';
import { ReviewController } from '../src/controller';
import type { PendingEdit } from '../src/state';
import { twoLesionFake } from './fake_service';

async function loaded(events = {}) {
  const service = twoLesionFake();
  const client = new ReviewClient('http://service', service.fetch);
  const controller = new ReviewController(client, events);
  await controller.load('phantom');
  return { service, controller };
}

describe('score badge', () => {
  it('comes from the service on load', async () => {
    const { controller } = await loaded();
    expect(controller.badge).toEqual({ totalScore: 27.84, category: '11-100', revision: 0 });
    expect(controller.lesions.map((l) => l.id)).toEqual([2, 1]);
  });

  it('toggling a lesion updates the badge from the edit response within one request cycle', async () => {
    const { service, controller } = await loaded();
    await controller.submitToggle(2);
    // exactly one POST /edits; the badge value is the response body's total
    expect(service.editPosts).toBe(1);
    expect(controller.badge.totalScore).toBeCloseTo(7.84, 9);
    expect(controller.badge.category).toBe('0-10');
    expect(controller.badge.revision).toBe(1);
    expect(controller.lesions.map((l) => l.id)).toEqual([1]);
  });

  it('painting below-threshold voxels keeps the total and advances the revision', async () => {
    const { controller } = await loaded();
    await controller.submitPaint([[0, 0], [0, 1]], true);
    expect(controller.badge.totalScore).toBeCloseTo(27.84, 9);
    expect(controller.badge.revision).toBe(1);
  });
});

describe('conflict handling', () => {
  it('surfaces a 409 as a prompt and never drops the edit silently', async () => {
    const conflicts: PendingEdit[] = [];
    const { service, controller } = await loaded({
      onConflict: (pending: PendingEdit) => conflicts.push(pending),
    });
    service.bumpRevision(); // another reviewer commits first

    await controller.submitToggle(2);

    expect(conflicts).toHaveLength(1);
    expect(controller.view.pendingEdits).toHaveLength(1);
    expect(controller.view.pendingEdits[0].edit).toEqual({
      op: 'remove_component',
      component_id: 2,
    });
    // refetched: last known revision caught up with the server
    expect(controller.view.lastKnownRevision).toBe(1);
    // nothing was applied server-side
    expect(controller.badge.totalScore).toBeCloseTo(27.84, 9);
  });

  it('replaying a conflicted edit resubmits against the fresh revision', async () => {
    const conflicts: PendingEdit[] = [];
    const { service, controller } = await loaded({
      onConflict: (pending: PendingEdit) => conflicts.push(pending),
    });
    service.bumpRevision();
    await controller.submitToggle(2);
    expect(service.editPosts).toBe(1);

    await controller.replayPending(conflicts[0]);

    expect(service.editPosts).toBe(2);
    expect(controller.view.pendingEdits).toHaveLength(0);
    expect(controller.badge.totalScore).toBeCloseTo(7.84, 9);
    expect(controller.badge.revision).toBe(2);
  });

  it('discarding is explicit and empties the queue without a request', async () => {
    const conflicts: PendingEdit[] = [];
    const { service, controller } = await loaded({
      onConflict: (pending: PendingEdit) => conflicts.push(pending),
    });
    service.bumpRevision();
    await controller.submitToggle(2);
    const postsAfterConflict = service.editPosts;

    controller.discardPending(conflicts[0]);

    expect(controller.view.pendingEdits).toHaveLength(0);
    expect(service.editPosts).toBe(postsAfterConflict);
    expect(controller.badge.totalScore).toBeCloseTo(27.84, 9);
  });

  it('no stale revision means no conflict prompt', async () => {
    const conflicts: PendingEdit[] = [];
    const { controller } = await loaded({
      onConflict: (pending: PendingEdit) => conflicts.push(pending),
    });
    await controller.submitToggle(1);
    expect(conflicts).toHaveLength(0);
    expect(controller.view.pendingEdits).toHaveLength(0);
  });
});

describe('paint bounds', () => {
  it('rejects out-of-slice strokes client-side before any request', async () => {
    const rejections: string[] = [];
    const { service, controller } = await loaded({
      onRejected: (_edit: unknown, detail: string) => rejections.push(detail),
    });
    const requestsBefore = service.requests.length;

    await controller.submitPaint([[41, 0]], true);

    expect(rejections).toHaveLength(1);
    expect(rejections[0]).toMatch(/outside/);
    expect(service.requests.length).toBe(requestsBefore);
    expect(controller.badge.revision).toBe(0);
  });

  it('rejects invalid server-side edits via 422 without dropping state', async () => {
    const rejections: string[] = [];
    const { controller } = await loaded({
      onRejected: (_edit: unknown, detail: string) => rejections.push(detail),
    });
    await controller.submitToggle(99);
    expect(rejections).toHaveLength(1);
    expect(controller.badge.revision).toBe(0);
  });

  it('only one edit may be in flight at a time', async () => {
    const { controller } = await loaded();
    const first = controller.submitToggle(2);
    await expect(controller.submitToggle(1)).rejects.toThrow(/in flight/);
    await first;
  });
});

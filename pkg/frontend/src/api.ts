/** Thin typed client for the review service. All score/category values the
 * UI ever displays originate from these responses; the client does no
 * scoring arithmetic of its own. */

import type {
  EditOp,
  EditResult,
  Frame,
  LesionList,
  Overlay,
  StudyInfo,
  StudyReport,
} from './types';

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function detailOf(response: Response): Promise<string> {
  try {
    const doc = await response.json();
    return typeof doc.detail === 'string' ? doc.detail : JSON.stringify(doc);
  } catch {
    return response.statusText;
  }
}

export class ReviewClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`);
    if (!response.ok) {
      throw new ServiceError(response.status, await detailOf(response));
    }
    return (await response.json()) as T;
  }

  getStudy(studyId: string): Promise<StudyInfo> {
    return this.getJson(`/studies/${studyId}`);
  }

  getLesions(studyId: string): Promise<LesionList> {
    return this.getJson(`/studies/${studyId}/lesions`);
  }

  getOverlay(studyId: string, slice: number): Promise<Overlay> {
    return this.getJson(`/studies/${studyId}/slices/${slice}/overlay`);
  }

  async getFrame(studyId: string, slice: number, wc: number, ww: number): Promise<Frame> {
    const response = await this.fetchImpl(
      `${this.baseUrl}/studies/${studyId}/slices/${slice}?wc=${wc}&ww=${ww}`,
    );
    if (!response.ok) {
      throw new ServiceError(response.status, await detailOf(response));
    }
    const metaHeader = response.headers.get('X-Frame-Meta');
    if (!metaHeader) {
      throw new ServiceError(500, 'frame response is missing X-Frame-Meta');
    }
    return {
      pixels: new Uint8Array(await response.arrayBuffer()),
      meta: JSON.parse(metaHeader),
    };
  }

  /** POST one edit under optimistic concurrency. 409 and 422 come back as
   * values (the caller owns conflict resolution); other errors throw. */
  async postEdit(studyId: string, expectedRevision: number, edit: EditOp): Promise<EditResult> {
    const response = await this.fetchImpl(`${this.baseUrl}/studies/${studyId}/edits`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ expected_revision: expectedRevision, edit }),
    });
    if (response.status === 409) {
      return { kind: 'conflict', detail: await detailOf(response) };
    }
    if (response.status === 422) {
      return { kind: 'invalid', detail: await detailOf(response) };
    }
    if (!response.ok) {
      throw new ServiceError(response.status, await detailOf(response));
    }
    return { kind: 'ok', report: (await response.json()) as StudyReport };
  }

  exportStudy(studyId: string): Promise<Record<string, unknown>> {
    return this.getJson(`/studies/${studyId}/export`);
  }
}

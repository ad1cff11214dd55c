/** Thin fetch wrapper over the generation service with abortable requests. */

import type {
  EditResponse,
  GenerateRequest,
  GenerateResponse,
  Guideline,
  LayoutDoc,
  MetaResponse,
  ServiceError,
  VariationResponse,
} from './types.js';

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: ServiceError,
  ) {
    super(`${detail.code}: ${detail.message}`);
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async post<T>(path: string, body: unknown, signal?: AbortSignal): Promise<T> {
    const res = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
      signal,
    });
    if (!res.ok) {
      let detail: ServiceError;
      try {
        detail = (await res.json()) as ServiceError;
      } catch {
        detail = { code: 'http_error', message: `HTTP ${res.status}`, field: null };
      }
      throw new ApiError(res.status, detail);
    }
    return (await res.json()) as T;
  }

  async meta(): Promise<MetaResponse> {
    const res = await this.fetchImpl(`${this.baseUrl}/meta`);
    if (!res.ok) {
      throw new ApiError(res.status, {
        code: 'http_error',
        message: `HTTP ${res.status}`,
        field: null,
      });
    }
    return (await res.json()) as MetaResponse;
  }

  generate(request: GenerateRequest, signal?: AbortSignal): Promise<GenerateResponse> {
    return this.post('/generate', request, signal);
  }

  edit(
    originalRequest: GenerateRequest,
    newGuidelines: Guideline[],
    signal?: AbortSignal,
  ): Promise<EditResponse> {
    return this.post(
      '/edit',
      { original_request: originalRequest, new_guidelines: newGuidelines },
      signal,
    );
  }

  variation(
    layout: LayoutDoc,
    subsetMethod: string,
    seeds: number[],
    w: number,
    signal?: AbortSignal,
  ): Promise<VariationResponse> {
    return this.post(
      '/variation',
      { layout, subset_method: subsetMethod, count: seeds.length, seeds, w },
      signal,
    );
  }

  inpaint(
    layout: LayoutDoc,
    idxMask: number[],
    guidelines: Guideline[],
    seed: number,
    w: number,
    signal?: AbortSignal,
  ): Promise<EditResponse> {
    return this.post(
      '/inpaint',
      { layout, idx_mask: idxMask, guidelines, seed, w },
      signal,
    );
  }

  extract(layout: LayoutDoc, signal?: AbortSignal): Promise<{ guidelines: Guideline[] }> {
    return this.post('/extract', { layout }, signal);
  }
}

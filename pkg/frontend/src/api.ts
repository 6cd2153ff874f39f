import type {
  ChunkResponse,
  FieldErrorDetail,
  IndicatorRequest,
  IndicatorResponse,
  QueryRequest,
  QueryResponse,
} from './types';

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string | FieldErrorDetail,
  ) {
    super(typeof detail === 'string' ? detail : `${detail.field}: ${detail.error}`);
    this.name = 'ApiError';
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin typed client over the service; the fetch implementation is injectable
 * so tests can run against a fixture service. */
export class ApiClient {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    const body = await response.json();
    if (!response.ok) {
      throw new ApiError(response.status, body.detail ?? 'request failed');
    }
    return body as T;
  }

  query(request: QueryRequest): Promise<QueryResponse> {
    return this.request<QueryResponse>('/query', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(request),
    });
  }

  indicators(request: IndicatorRequest): Promise<IndicatorResponse> {
    return this.request<IndicatorResponse>('/indicators', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(request),
    });
  }

  chunk(chunkId: string): Promise<ChunkResponse> {
    return this.request<ChunkResponse>(`/chunks/${encodeURIComponent(chunkId)}`);
  }

  audit(auditId: string): Promise<Record<string, unknown>> {
    return this.request<Record<string, unknown>>(`/audit/${encodeURIComponent(auditId)}`);
  }

  health(): Promise<{ status: string; corpus_fingerprint: string }> {
    return this.request('/health');
  }
}

import type { CaseSummary, CaseView, Progress } from './types.js';

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
    this.name = 'ApiError';
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin client over the runner's annotation API; fetch is injectable for tests. */
export class ApiClient {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
    private readonly token?: string,
  ) {}

  private headers(json: boolean): Record<string, string> {
    const headers: Record<string, string> = {};
    if (json) headers['Content-Type'] = 'application/json';
    if (this.token) headers['Authorization'] = `Bearer ${this.token}`;
    return headers;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (error) {
      throw new ApiError(`annotation API unreachable: ${String(error)}`, 0);
    }
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      const message =
        typeof body === 'object' && body !== null && 'error' in body
          ? String((body as { error: unknown }).error)
          : `HTTP ${response.status}`;
      throw new ApiError(message, response.status);
    }
    return body as T;
  }

  async listCases(status?: 'pending'): Promise<CaseSummary[]> {
    const query = status ? `?status=${status}` : '';
    const body = await this.request<{ cases: CaseSummary[] }>(`/api/cases${query}`, {
      headers: this.headers(false),
    });
    return body.cases;
  }

  async getCase(id: string): Promise<CaseView> {
    return this.request<CaseView>(`/api/cases/${encodeURIComponent(id)}`, {
      headers: this.headers(false),
    });
  }

  async annotate(
    id: string,
    round: number,
    index: number,
    hallucinated: 0 | 1,
    annotator: string,
  ): Promise<CaseView> {
    const path =
      `/api/cases/${encodeURIComponent(id)}/rounds/${round}/points/${index}/annotation`;
    const body = await this.request<{ ok: boolean; case: CaseView }>(path, {
      method: 'POST',
      headers: this.headers(true),
      body: JSON.stringify({ hallucinated, annotator }),
    });
    return body.case;
  }

  async progress(): Promise<Progress> {
    return this.request<Progress>('/api/progress', { headers: this.headers(false) });
  }
}

import type {
  ApiErrorBody,
  CropSeason,
  StatusView,
  SubmitBody,
  TimeSeriesPayload,
} from "./types.js";

/** Server-side rejection with the machine-readable code passed through. */
export class ApiError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(status: number, body: ApiErrorBody) {
    super(body.message);
    this.code = body.error;
    this.status = status;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl = "", fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    const impl = fetchImpl ?? (globalThis.fetch as FetchLike | undefined);
    if (!impl) {
      throw new Error("no fetch implementation available");
    }
    this.fetchImpl = impl.bind(globalThis);
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    if (!response.ok) {
      let body: ApiErrorBody;
      try {
        body = (await response.json()) as ApiErrorBody;
      } catch {
        body = { error: "http_error", message: `HTTP ${response.status}` };
      }
      throw new ApiError(response.status, body);
    }
    return (await response.json()) as T;
  }

  getCrops(): Promise<CropSeason[]> {
    return this.request<CropSeason[]>("/api/crops");
  }

  async submitRequest(body: SubmitBody): Promise<string> {
    const result = await this.request<{ request_id: string }>("/api/requests", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    return result.request_id;
  }

  getStatus(requestId: string): Promise<StatusView> {
    return this.request<StatusView>(`/api/requests/${requestId}`);
  }

  getTimeSeries(requestId: string): Promise<TimeSeriesPayload> {
    return this.request<TimeSeriesPayload>(`/api/requests/${requestId}/timeseries.json`);
  }

  bundleUrl(requestId: string): string {
    return `${this.baseUrl}/api/requests/${requestId}/bundle.zip`;
  }
}

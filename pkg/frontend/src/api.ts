// Thin typed client for the admin API. Every mutating call returns the
// fresh slot document so the UI can reconcile from the reply.

import type {
  ApiErrorBody,
  EndpointConfig,
  EventFrame,
  HostInfo,
  Metrics,
  ModelConfigRequest,
  PresetDoc,
  SlotDoc,
} from "./types.js";
import { subscribeSse, type SseSubscription } from "./sse.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function decodeError(res: Response): Promise<ApiError> {
  let code = "http-error";
  let message = `HTTP ${res.status}`;
  try {
    const body = (await res.json()) as ApiErrorBody;
    if (body && body.error) {
      code = body.error.code;
      message = body.error.message;
    }
  } catch {
    // body was not the JSON error envelope; keep the generic message
  }
  return new ApiError(res.status, code, message);
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const res = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!res.ok) throw await decodeError(res);
    return (await res.json()) as T;
  }

  getSlots(): Promise<SlotDoc[]> {
    return this.request("GET", "/api/slots");
  }

  getSlot(id: number): Promise<SlotDoc> {
    return this.request("GET", `/api/slots/${id}`);
  }

  getMetrics(id: number): Promise<Metrics> {
    return this.request("GET", `/api/slots/${id}/metrics`);
  }

  getPresets(): Promise<PresetDoc[]> {
    return this.request("GET", "/api/presets");
  }

  getHostInfo(): Promise<HostInfo> {
    return this.request("GET", "/api/hostinfo");
  }

  putEndpoint(id: number, patch: Partial<EndpointConfig>): Promise<SlotDoc> {
    return this.request("PUT", `/api/slots/${id}/endpoint`, patch);
  }

  putConfig(id: number, config: ModelConfigRequest): Promise<SlotDoc> {
    return this.request("PUT", `/api/slots/${id}/config`, config);
  }

  applyPreset(id: number, name: string): Promise<SlotDoc> {
    return this.request("POST", `/api/slots/${id}/preset`, { name });
  }

  setUdp(id: number, active: boolean): Promise<SlotDoc> {
    return this.request("POST", `/api/slots/${id}/udp`, { active });
  }

  setGp(id: number, active: boolean): Promise<SlotDoc> {
    return this.request("POST", `/api/slots/${id}/gp`, { active });
  }

  start(id: number): Promise<SlotDoc> {
    return this.request("POST", `/api/slots/${id}/start`);
  }

  stop(id: number): Promise<SlotDoc> {
    return this.request("POST", `/api/slots/${id}/stop`);
  }

  /** 5 Hz metrics stream for one slot. */
  subscribeEvents(
    id: number,
    onFrame: (frame: EventFrame) => void,
    onError?: (err: unknown) => void,
  ): SseSubscription {
    return subscribeSse(
      this.fetchFn,
      `${this.baseUrl}/api/slots/${id}/events`,
      (data) => onFrame(JSON.parse(data) as EventFrame),
      onError,
    );
  }
}

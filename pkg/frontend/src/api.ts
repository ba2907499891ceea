// Typed client for the /v1 session protocol.

export interface SessionConfig {
  kernel: { family: string; dim: number; variance?: number; lengthscale?: number; nu?: number; rho?: number };
  domain: number[][];
  x0: number[];
  norm_bound: number;
  beta0?: number;
  lambda?: number;
  jitter?: number;
  seed?: number;
  outer_budget?: number | null;
  labels?: string[] | null;
}

export interface DuelPayload {
  session_id: string;
  t: number;
  x: number[];
  x_prime: number[];
  labels: string[] | null;
  placement_left_is_query: boolean;
}

export interface ReportPayload {
  t_star: number;
  x: number[];
  radius: number;
  max_mle_point?: number[];
}

export interface TracePayload {
  session_id: string;
  t: number;
  config: SessionConfig & { seed: number };
  queries: number[][];
  prefs: number[];
  radii: number[];
  sigmas: number[];
  placements_left_is_query: boolean[];
  t_star: number | null;
  pending: { t: number; x: number[]; x_prime: number[]; placement_left_is_query: boolean } | null;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function request<T>(base: string, method: string, path: string, body?: unknown): Promise<T> {
  const resp = await fetch(`${base}${path}`, {
    method,
    headers: body === undefined ? {} : { "Content-Type": "application/json" },
    body: body === undefined ? undefined : JSON.stringify(body),
  });
  const payload = await resp.json().catch(() => ({}));
  if (!resp.ok) {
    throw new ApiError(resp.status, (payload as { error?: string }).error ?? `HTTP ${resp.status}`);
  }
  return payload as T;
}

export class Api {
  constructor(public base: string = "") {}

  createSession(config: SessionConfig): Promise<{ session_id: string }> {
    return request(this.base, "POST", "/v1/sessions", config);
  }

  getDuel(sid: string): Promise<DuelPayload> {
    return request(this.base, "GET", `/v1/sessions/${sid}/duel`);
  }

  postPreference(sid: string, pref: 0 | 1): Promise<{ t: number; report: ReportPayload }> {
    return request(this.base, "POST", `/v1/sessions/${sid}/preference`, { pref });
  }

  getReport(sid: string): Promise<ReportPayload> {
    return request(this.base, "GET", `/v1/sessions/${sid}/report`);
  }

  getTrace(sid: string): Promise<TracePayload> {
    return request(this.base, "GET", `/v1/sessions/${sid}/trace`);
  }
}

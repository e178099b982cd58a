// Typed client for the bound service. Every number shown in the UI comes
// from these endpoints; nothing statistical is computed in the browser.

export type WireId = string | number;

export interface WEntry {
  id: WireId;
  w: number;
}

export interface StatsSummary {
  session: string;
  p: number;
  positives: number;
  dropped_zeros: number;
  dropped_ids: WireId[];
}

export interface FdpUpper {
  num: number;
  den: number;
  float: number;
}

export interface Certificate {
  prob: number;
  nsim: number | null;
  seed: number | null;
  exact: boolean;
}

export interface PlanDescription {
  alpha: number | null;
  p: number;
  v: number[];
  k: number[];
  family: string | null;
  certificate: Certificate | null;
}

export interface PlanResponse {
  name: string;
  plan: PlanDescription;
}

export interface SetEcho {
  ids: WireId[];
  positions: number[];
}

export interface BoundReport {
  query: number[];
  fdp_upper: FdpUpper;
  true_discoveries_lower: number;
  witness: number | null;
  method: string;
}

export interface CtReport {
  query: number[];
  t_bound: number;
  fdp_upper: FdpUpper;
  true_discoveries_lower: number;
  witness_t: number | null;
  witness_r: number | null;
}

export interface BoundResponse {
  method: string;
  set: SetEcho;
  report: BoundReport;
  certificate: Certificate | null;
}

export interface CtCalibration {
  family: string;
  v: number[];
  alpha: number;
  nsim: number;
  pool_seed: number;
  delta: number;
}

export interface CtBoundResponse {
  set: SetEcho;
  report: CtReport;
  calibration: CtCalibration;
  certificate: Certificate | null;
}

export interface CurvePoint {
  i: number;
  set_size: number;
  fdp_hat: number;
  bound: number;
  true_discoveries_lower: number;
}

export interface CurveResponse {
  method: string;
  alpha: number;
  points: CurvePoint[];
}

export interface BoundRequest {
  session: string;
  method: 'kji' | 'kr' | 'js';
  set: WireId[];
  alpha?: number;
  plan?: string | { v: number[]; k: number[]; alpha?: number; p?: number };
  k?: number;
}

export interface CtBoundRequest {
  session: string;
  set: WireId[];
  family?: 'indicator' | 'rank';
  alpha?: number;
  v?: number[];
  v_family?: string;
  nsim?: number;
  seed?: number;
  delta?: number;
}

export interface CreatePlanRequest {
  session: string;
  name?: string;
  alpha?: number;
  v?: number[];
  k?: number[];
  p?: number;
  family?: string;
  v_family?: string;
  cap?: number;
  nsim?: number;
  seed?: number;
  delta?: number;
}

export interface CurveQuery {
  session: string;
  method: 'kji' | 'kr' | 'js' | 'kct' | 'rank';
  alpha?: number;
  plan?: string;
  k?: number;
  v?: number[];
  family?: string;
  nsim?: number;
  seed?: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(status === 0 ? `service unreachable: ${detail}` : `HTTP ${status}: ${detail}`);
    this.name = 'ApiError';
  }

  get unreachable(): boolean {
    return this.status === 0;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function detailOf(res: Response): Promise<string> {
  try {
    const body = await res.json();
    if (body && typeof body.detail === 'string') return body.detail;
    return JSON.stringify(body);
  } catch {
    return res.statusText || 'request failed';
  }
}

export class ExplorerApi {
  private readonly fetchImpl: FetchLike;

  constructor(
    readonly base: string,
    fetchImpl?: FetchLike,
  ) {
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let res: Response;
    try {
      res = await this.fetchImpl(this.base + path, init);
    } catch (err) {
      throw new ApiError(0, err instanceof Error ? err.message : String(err));
    }
    if (!res.ok) {
      throw new ApiError(res.status, await detailOf(res));
    }
    return (await res.json()) as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(payload),
    });
  }

  health(): Promise<{ status: string; sessions: number }> {
    return this.request('/health');
  }

  uploadStats(entries: WEntry[]): Promise<StatsSummary> {
    return this.post('/stats', { entries });
  }

  createPlan(req: CreatePlanRequest): Promise<PlanResponse> {
    return this.post('/plans', req);
  }

  bound(req: BoundRequest): Promise<BoundResponse> {
    return this.post('/bound', req);
  }

  ctBound(req: CtBoundRequest): Promise<CtBoundResponse> {
    return this.post('/ct-bound', req);
  }

  warmup(req: CtBoundRequest): Promise<{ warmed: number }> {
    return this.post('/warmup', { ...req, set: undefined });
  }

  nestedCurve(query: CurveQuery): Promise<CurveResponse> {
    const params = new URLSearchParams();
    params.set('session', query.session);
    params.set('method', query.method);
    if (query.alpha !== undefined) params.set('alpha', String(query.alpha));
    if (query.plan !== undefined) params.set('plan', query.plan);
    if (query.k !== undefined) params.set('k', String(query.k));
    if (query.v !== undefined) params.set('v', query.v.join(','));
    if (query.family !== undefined) params.set('family', query.family);
    if (query.nsim !== undefined) params.set('nsim', String(query.nsim));
    if (query.seed !== undefined) params.set('seed', String(query.seed));
    return this.request(`/nested-curve?${params.toString()}`);
  }
}

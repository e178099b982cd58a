import type {
  BoundRequest,
  BoundResponse,
  CtBoundRequest,
  CtBoundResponse,
  ExplorerApi,
  StatsSummary,
  WEntry,
  WireId,
} from './api.js';

export interface HistoryEntry {
  readonly index: number;
  readonly kind: 'bound' | 'ct-bound';
  readonly request: BoundRequest | CtBoundRequest;
  readonly response: BoundResponse | CtBoundResponse;
}

export interface PasteResult {
  accepted: WireId[];
  rejected: string[];
}

/**
 * Parse pasted statistics. Accepts a JSON array of {id, w} objects or
 * plain text with one "id,w" (or "id w") pair per line.
 */
export function parseWInput(text: string): WEntry[] {
  const trimmed = text.trim();
  if (!trimmed) throw new Error('no entries');
  if (trimmed.startsWith('[')) {
    const data = JSON.parse(trimmed);
    if (!Array.isArray(data)) throw new Error('expected a JSON array');
    return data.map((item, idx) => {
      if (typeof item !== 'object' || item === null || !('id' in item) || !('w' in item)) {
        throw new Error(`entry ${idx} needs "id" and "w"`);
      }
      const w = Number((item as { w: unknown }).w);
      if (!Number.isFinite(w)) throw new Error(`entry ${idx}: w is not a number`);
      return { id: (item as { id: WireId }).id, w };
    });
  }
  const entries: WEntry[] = [];
  for (const rawLine of trimmed.split('\n')) {
    const line = rawLine.trim();
    if (!line || line.toLowerCase() === 'id,w') continue;
    const parts = line.split(/[,\s]+/).filter(Boolean);
    if (parts.length !== 2) throw new Error(`bad line: "${line}"`);
    const w = Number(parts[1]);
    if (!Number.isFinite(w)) throw new Error(`bad w in line: "${line}"`);
    const id = /^-?\d+$/.test(parts[0]) ? Number(parts[0]) : parts[0];
    entries.push({ id, w });
  }
  if (entries.length === 0) throw new Error('no entries');
  return entries;
}

/**
 * Ids ordered by decreasing |w|, ties kept in input order, zeros dropped —
 * the same ordering the service uses, so range selection on the curve maps
 * rank i to the i-th id. Used only to translate selections into id lists;
 * every bound still comes from the service.
 */
export function orderByMagnitude(entries: WEntry[]): WireId[] {
  return entries
    .map((e, idx) => ({ e, idx }))
    .filter(({ e }) => e.w !== 0)
    .sort((a, b) => Math.abs(b.e.w) - Math.abs(a.e.w) || a.idx - b.idx)
    .map(({ e }) => e.id);
}

export class ExplorerSession {
  /** Selectable ids (uploaded minus dropped zeros), in magnitude order. */
  readonly ids: ReadonlyArray<WireId>;
  readonly planNames: string[] = [];
  private readonly idSet: Set<string>;
  private workingSet_: WireId[] = [];
  private readonly history_: HistoryEntry[] = [];

  constructor(
    private readonly api: ExplorerApi,
    readonly summary: StatsSummary,
    entries: WEntry[],
  ) {
    const dropped = new Set(summary.dropped_ids.map(String));
    this.ids = orderByMagnitude(entries).filter((id) => !dropped.has(String(id)));
    this.idSet = new Set(this.ids.map(String));
  }

  get id(): string {
    return this.summary.session;
  }

  get workingSet(): ReadonlyArray<WireId> {
    return this.workingSet_;
  }

  get history(): ReadonlyArray<HistoryEntry> {
    return this.history_.slice();
  }

  has(id: WireId): boolean {
    return this.idSet.has(String(id));
  }

  /** Replace the working set; unknown ids are rejected, never sent. */
  setWorkingSet(ids: WireId[]): PasteResult {
    const accepted: WireId[] = [];
    const rejected: string[] = [];
    const seen = new Set<string>();
    for (const id of ids) {
      const key = String(id);
      if (!this.idSet.has(key)) {
        rejected.push(key);
      } else if (!seen.has(key)) {
        seen.add(key);
        accepted.push(id);
      }
    }
    this.workingSet_ = accepted;
    return { accepted, rejected };
  }

  /** Paste-list editing: whitespace/comma separated ids. */
  pasteSet(text: string): PasteResult {
    const tokens = text
      .split(/[,\s]+/)
      .map((t) => t.trim())
      .filter(Boolean)
      .map((t) => (/^-?\d+$/.test(t) ? Number(t) : t));
    return this.setWorkingSet(tokens);
  }

  /** One-click removal (or re-add) of a single id. */
  toggleId(id: WireId): void {
    if (!this.has(id)) return;
    const key = String(id);
    const kept = this.workingSet_.filter((x) => String(x) !== key);
    if (kept.length === this.workingSet_.length) {
      kept.push(id);
    }
    this.workingSet_ = kept;
  }

  /** Range selection on the nested curve: ranks are 1-based, inclusive. */
  selectRange(fromRank: number, toRank: number): PasteResult {
    const lo = Math.max(1, Math.min(fromRank, toRank));
    const hi = Math.min(this.ids.length, Math.max(fromRank, toRank));
    return this.setWorkingSet(this.ids.slice(lo - 1, hi));
  }

  registerPlan(name: string): void {
    if (!this.planNames.includes(name)) this.planNames.push(name);
  }

  private record(kind: HistoryEntry['kind'], request: object, response: object): HistoryEntry {
    const entry: HistoryEntry = Object.freeze({
      index: this.history_.length,
      kind,
      request: Object.freeze(JSON.parse(JSON.stringify(request))),
      response: response as HistoryEntry['response'],
    });
    this.history_.push(entry);
    return entry;
  }

  /** Query the current working set; appends to history. */
  async whatIf(req: Omit<BoundRequest, 'session' | 'set'>): Promise<HistoryEntry> {
    const request: BoundRequest = { ...req, session: this.id, set: [...this.workingSet_] };
    const response = await this.api.bound(request);
    return this.record('bound', request, response);
  }

  async whatIfCt(req: Omit<CtBoundRequest, 'session' | 'set'>): Promise<HistoryEntry> {
    const request: CtBoundRequest = { ...req, session: this.id, set: [...this.workingSet_] };
    const response = await this.api.ctBound(request);
    return this.record('ct-bound', request, response);
  }

  /** Re-issue a stored request verbatim; the result is a new entry. */
  async rerun(index: number): Promise<HistoryEntry> {
    const past = this.history_[index];
    if (!past) throw new Error(`no history entry ${index}`);
    if (past.kind === 'bound') {
      const response = await this.api.bound(past.request as BoundRequest);
      return this.record('bound', past.request, response);
    }
    const response = await this.api.ctBound(past.request as CtBoundRequest);
    return this.record('ct-bound', past.request, response);
  }
}

/** Upload parsed entries and open a session around the summary. */
export async function openSession(api: ExplorerApi, entries: WEntry[]): Promise<ExplorerSession> {
  const summary = await api.uploadStats(entries);
  return new ExplorerSession(api, summary, entries);
}

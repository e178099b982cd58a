import { describe, expect, it } from 'vitest';

import { ApiError, ExplorerApi } from '../src/api.js';

interface Recorded {
  url: string;
  init?: RequestInit;
}

function apiWith(status: number, body: unknown): { api: ExplorerApi; calls: Recorded[] } {
  const calls: Recorded[] = [];
  const fetchImpl = (url: string, init?: RequestInit) => {
    calls.push({ url, init });
    return Promise.resolve(
      new Response(JSON.stringify(body), {
        status,
        headers: { 'Content-Type': 'application/json' },
      }),
    );
  };
  return { api: new ExplorerApi('http://svc', fetchImpl), calls };
}

describe('ExplorerApi', () => {
  it('posts JSON bodies to the right endpoints', async () => {
    const { api, calls } = apiWith(200, { session: 's', p: 2, positives: 1, dropped_zeros: 0, dropped_ids: [] });
    await api.uploadStats([{ id: 1, w: 2.5 }]);
    expect(calls[0].url).toBe('http://svc/stats');
    expect(calls[0].init?.method).toBe('POST');
    expect(JSON.parse(String(calls[0].init?.body))).toEqual({ entries: [{ id: 1, w: 2.5 }] });
  });

  it('builds nested-curve query strings', async () => {
    const { api, calls } = apiWith(200, { method: 'kji', alpha: 0.05, points: [] });
    await api.nestedCurve({ session: 's1', method: 'kji', plan: 'plan-B', alpha: 0.05 });
    expect(calls[0].url).toBe('http://svc/nested-curve?session=s1&method=kji&alpha=0.05&plan=plan-B');
  });

  it('surfaces the service detail message on HTTP errors', async () => {
    const { api } = apiWith(422, { detail: "unknown id '77'" });
    const err = await api.bound({ session: 's', method: 'kr', set: [77] }).catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(422);
    expect(err.message).toContain("unknown id '77'");
    expect(err.unreachable).toBe(false);
  });

  it('flags network failures as unreachable', async () => {
    const api = new ExplorerApi('http://svc', () => Promise.reject(new Error('ECONNREFUSED')));
    const err = await api.health().catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(0);
    expect(err.unreachable).toBe(true);
    expect(err.message).toContain('unreachable');
  });
});

// Fetch mocking over the recorded API fixtures.
import { vi } from 'vitest';

export type RouteHandler = (body: unknown) => { status?: number; json?: unknown } | 'network-error';

export interface FetchMock {
  calls: { method: string; path: string; body: unknown }[];
  route(method: string, path: string | RegExp, handler: RouteHandler): void;
}

export function installFetchMock(): FetchMock {
  const routes: { method: string; path: string | RegExp; handler: RouteHandler }[] = [];
  const mock: FetchMock = {
    calls: [],
    route(method, path, handler) {
      routes.push({ method, path, handler });
    },
  };

  vi.stubGlobal(
    'fetch',
    vi.fn(async (input: RequestInfo | URL, init?: RequestInit) => {
      const path = String(input);
      const method = (init?.method ?? 'GET').toUpperCase();
      const body = init?.body ? JSON.parse(String(init.body)) : null;
      mock.calls.push({ method, path, body });
      for (const r of routes) {
        const matches =
          r.method === method &&
          (typeof r.path === 'string' ? r.path === path : r.path.test(path));
        if (!matches) continue;
        const result = r.handler(body);
        if (result === 'network-error') throw new TypeError('network down');
        return new Response(JSON.stringify(result.json ?? {}), {
          status: result.status ?? 200,
          headers: { 'Content-Type': 'application/json' },
        });
      }
      return new Response(JSON.stringify({ error: `no route ${method} ${path}` }), {
        status: 404,
      });
    }),
  );
  return mock;
}

/** Drain pending microtasks so awaited fetches settle. */
export async function flush(times = 12): Promise<void> {
  for (let i = 0; i < times; i += 1) {
    await Promise.resolve();
  }
}

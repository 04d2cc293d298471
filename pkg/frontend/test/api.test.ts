import { describe, expect, it } from 'vitest';

import { ApiClient, ApiError } from '../src/api.js';
import { FakeServer } from './fake_server.js';

describe('ApiClient', () => {
  it('lists cases with a status filter', async () => {
    const server = new FakeServer();
    server.addCase('case-0001', ['a.']);
    server.addCase('case-0002', []);
    const api = new ApiClient('', server.fetch);
    const pending = await api.listCases('pending');
    expect(pending.map((c) => c.id)).toEqual(['case-0001']);
  });

  it('round-trips an annotation and returns the reconciled view', async () => {
    const server = new FakeServer();
    server.addCase('case-0001', ['a.', 'b.']);
    const api = new ApiClient('', server.fetch);
    const view = await api.annotate('case-0001', 0, 2, 1, 'tester');
    expect(view.rounds[0].points[1].annotation).toEqual({
      hallucinated: 1,
      annotator: 'tester',
    });
    expect(server.posts[0]).toMatchObject({
      caseId: 'case-0001',
      round: 0,
      index: 2,
      body: { hallucinated: 1, annotator: 'tester' },
    });
  });

  it('raises ApiError with the server message on rejection', async () => {
    const server = new FakeServer();
    server.addCase('case-0001', ['a.']);
    const api = new ApiClient('', server.fetch);
    await expect(api.annotate('case-0001', 0, 99, 1, 't')).rejects.toThrowError(
      /no point 99/,
    );
    await expect(api.getCase('missing')).rejects.toBeInstanceOf(ApiError);
  });

  it('sends the bearer token when configured', async () => {
    let seen: string | undefined;
    const fetchFn = async (input: string, init?: RequestInit) => {
      seen = (init?.headers as Record<string, string>)?.Authorization;
      return new Response(JSON.stringify({ annotated: 0, total: 0 }), { status: 200 });
    };
    const api = new ApiClient('', fetchFn, 'sekret');
    await api.progress();
    expect(seen).toBe('Bearer sekret');
  });
});

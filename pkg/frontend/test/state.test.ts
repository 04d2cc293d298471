import { describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api.js';
import { AnnotationSession } from '../src/state.js';
import { FakeServer } from './fake_server.js';

function makeSession(server: FakeServer, annotator = 'tester') {
  const api = new ApiClient('', server.fetch);
  return new AnnotationSession(api, annotator);
}

describe('queue', () => {
  it('orders pending cases first and collapses completed ones', async () => {
    const server = new FakeServer();
    server.addCase('case-0001', ['a.', 'b.']);
    server.addCase('case-0002', ['c.']);
    server.addCase('case-0003', ['d.']);
    // complete case-0002 up front
    await server.fetch('/api/cases/case-0002/rounds/0/points/1/annotation', {
      method: 'POST',
      body: JSON.stringify({ hallucinated: 0, annotator: 'pre' }),
    });
    const session = makeSession(server);
    await session.loadQueue();
    expect(session.queue.map((c) => c.status)).toEqual(['pending', 'pending', 'done']);
    expect(session.pendingCases().map((c) => c.id)).toEqual(['case-0001', 'case-0003']);
  });

  it('reports completion when nothing is pending', async () => {
    const server = new FakeServer();
    server.addCase('case-0001', ['a.']);
    await server.fetch('/api/cases/case-0001/rounds/0/points/1/annotation', {
      method: 'POST',
      body: JSON.stringify({ hallucinated: 1, annotator: 'pre' }),
    });
    const session = makeSession(server);
    await session.loadQueue();
    expect(session.allAnnotated()).toBe(true);
  });

  it('surfaces a banner when the API is down instead of retrying silently', async () => {
    const api = new ApiClient('', async () => {
      throw new Error('connection refused');
    });
    const errors: string[] = [];
    const session = new AnnotationSession(api, 'tester', {
      onError: (m) => errors.push(m),
    });
    await session.loadQueue();
    expect(session.banner).toContain('unreachable');
    expect(errors).toHaveLength(1);
  });

  it('surfaces server errors as a banner', async () => {
    const api = new ApiClient('', async () =>
      new Response(JSON.stringify({ error: 'boom' }), { status: 500 }),
    );
    const session = new AnnotationSession(api, 'tester');
    await session.loadQueue();
    expect(session.banner).toBe('boom');
  });
});

describe('marking', () => {
  it('applies optimistic update, reconciles with server, bumps progress', async () => {
    const server = new FakeServer();
    server.addCase('case-0001', ['a.', 'b.', 'c.']);
    const session = makeSession(server);
    await session.loadQueue();
    await session.openNextPending();
    await session.mark(2, 1);
    const point = session.points().find((p) => p.index === 2);
    expect(point?.annotation).toEqual({ hallucinated: 1, annotator: 'tester' });
    expect(session.progress).toEqual({ annotated: 1, total: 3 });
    expect(server.posts).toHaveLength(1);
  });

  it('double-marking converges to the latest state', async () => {
    const server = new FakeServer();
    server.addCase('case-0001', ['a.']);
    const session = makeSession(server);
    await session.loadQueue();
    await session.openNextPending();
    await session.mark(1, 1);
    await session.mark(1, 0);
    const point = session.points()[0];
    expect(point.annotation?.hallucinated).toBe(0);
    expect(server.posts).toHaveLength(2);
  });

  it('reverts the optimistic update when the server rejects', async () => {
    const server = new FakeServer();
    server.addCase('case-0001', ['a.']);
    const session = makeSession(server);
    await session.loadQueue();
    await session.openNextPending();
    server.failNextPost = 'stale round';
    await session.mark(1, 1);
    expect(session.points()[0].annotation).toBeUndefined();
    expect(session.banner).toBe('stale round');
  });

  it('never mutates reasoning text', async () => {
    const server = new FakeServer();
    server.addCase('case-0001', ['The savings rate is high.']);
    const session = makeSession(server);
    await session.loadQueue();
    await session.openNextPending();
    await session.mark(1, 1);
    expect(session.points()[0].text).toBe('The savings rate is high.');
  });
});

describe('release', () => {
  it('is blocked with missing indices until every point is annotated', async () => {
    const server = new FakeServer();
    server.addCase('case-0001', ['a.', 'b.', 'c.']);
    const session = makeSession(server);
    await session.loadQueue();
    await session.openNextPending();
    await session.mark(1, 0);
    await session.mark(3, 0);
    expect(session.canRelease()).toBe(false);
    const blocked = await session.release();
    expect(blocked).toEqual({ blocked: [2] });
  });

  it('releases a complete case and auto-advances to the next pending', async () => {
    const server = new FakeServer();
    server.addCase('case-0001', ['a.']);
    server.addCase('case-0002', ['b.']);
    const session = makeSession(server);
    await session.loadQueue();
    await session.openNextPending();
    await session.mark(1, 1);
    expect(session.canRelease()).toBe(true);
    const result = await session.release();
    expect(result).toEqual({ released: 'case-0001' });
    expect(session.current?.id).toBe('case-0002');
  });

  it('keyboard-style flow: mark three points (one hallucinated) then release', async () => {
    const server = new FakeServer();
    server.addCase('case-0001', ['first point.', 'marker point.', 'third point.']);
    const session = makeSession(server);
    await session.loadQueue();
    await session.openNextPending();
    await session.markSelected(0); // point 1, selection advances
    await session.markSelected(1); // point 2 (the hallucination)
    await session.markSelected(0); // point 3
    expect(session.canRelease()).toBe(true);
    const flagged = session.points().filter((p) => p.annotation?.hallucinated === 1);
    expect(flagged.map((p) => p.text)).toEqual(['marker point.']);
    const result = await session.release();
    expect(result).toEqual({ released: 'case-0001' });
  });
});

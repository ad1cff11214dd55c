import { afterEach, beforeEach, describe, expect, it, vi } from 'vitest';

import { ApiClient } from '../src/api.js';
import { DEBOUNCE_MS, EditorController, type Timers } from '../src/controller.js';
import type { Session } from '../src/types.js';
import { FakeService } from './fake_service.js';

const fakeTimers: Timers = {
  set: (fn, ms) => setTimeout(fn, ms) as unknown as number,
  clear: (handle) => clearTimeout(handle as unknown as ReturnType<typeof setTimeout>),
};

function newController(service: FakeService, session?: Partial<Session>) {
  const api = new ApiClient('http://fake', service.fetch);
  return new EditorController(
    api,
    { version: 1, guidelines: [], n: 6, w: 1.5, seed: 3, ...session },
    fakeTimers,
  );
}

async function settle(): Promise<void> {
  // let promise chains started by timer callbacks resolve
  for (let i = 0; i < 10; i++) {
    await Promise.resolve();
  }
}

describe('debounced regeneration', () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });
  afterEach(() => {
    vi.useRealTimers();
  });

  it('drawing a guideline triggers exactly one generation call after the debounce', async () => {
    const service = new FakeService();
    const controller = newController(service);
    controller.addGuideline({ axis: 'v', pos: 12 });
    expect(service.calls.length).toBe(0); // nothing before the debounce window
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS - 1);
    expect(service.calls.length).toBe(0);
    await vi.advanceTimersByTimeAsync(1);
    await settle();
    expect(service.calls.map((c) => c.path)).toEqual(['/generate']);
  });

  it('rapid mutations collapse into a single request', async () => {
    const service = new FakeService();
    const controller = newController(service);
    controller.addGuideline({ axis: 'v', pos: 12 });
    await vi.advanceTimersByTimeAsync(50);
    controller.addGuideline({ axis: 'h', pos: 30 });
    await vi.advanceTimersByTimeAsync(50);
    // indices address the normalized (axis-major sorted) list: 0 is h@30
    controller.moveGuideline(0, 14);
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS);
    await settle();
    expect(service.calls.length).toBe(1);
    expect(service.calls[0].path).toBe('/generate');
    expect(service.calls[0].body.guidelines).toEqual([
      { axis: 'h', pos: 14 },
      { axis: 'v', pos: 12 },
    ]);
  });

  it('guideline mutations after a generation go through /edit with the seed preserved', async () => {
    const service = new FakeService();
    const controller = newController(service);
    await controller.flush(); // initial generation
    expect(service.calls.map((c) => c.path)).toEqual(['/generate']);

    controller.addGuideline({ axis: 'v', pos: 20 });
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS);
    await settle();
    expect(service.calls.map((c) => c.path)).toEqual(['/generate', '/edit']);
    const edit = service.calls[1].body;
    expect(edit.original_request.seed).toBe(3);
    expect(edit.new_guidelines).toEqual([{ axis: 'v', pos: 20 }]);
  });

  it('drag with no prior generation issues /generate', async () => {
    const service = new FakeService();
    const controller = newController(service, { guidelines: [{ axis: 'v', pos: 4 }] });
    controller.moveGuideline(0, 9);
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS);
    await settle();
    expect(service.calls.map((c) => c.path)).toEqual(['/generate']);
  });

  it('count/weight/seed changes regenerate instead of editing', async () => {
    const service = new FakeService();
    const controller = newController(service);
    await controller.flush();
    controller.setElementCount(9);
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS);
    await settle();
    controller.setGuidanceWeight(0);
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS);
    await settle();
    const paths = service.calls.map((c) => c.path);
    expect(paths).toEqual(['/generate', '/generate', '/generate']);
    expect(service.calls[1].body.n).toBe(9);
    expect(service.calls[2].body.w).toBe(0); // conditional-only path is server-side
  });

  it('a newer request supersedes the in-flight one (abort-and-resend)', async () => {
    const service = new FakeService();
    let release!: () => void;
    service.gate = new Promise((resolve) => {
      release = resolve;
    });
    const controller = newController(service);
    controller.addGuideline({ axis: 'v', pos: 5 });
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS);
    await settle();
    expect(service.calls.length).toBe(1); // hanging on the gate

    controller.addGuideline({ axis: 'v', pos: 6 });
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS);
    await settle();
    expect(service.calls.length).toBe(2);

    service.gate = null;
    release();
    await settle();
    // the superseded response must not clobber state; final guidelines win
    expect(controller.state.session.guidelines).toEqual([
      { axis: 'v', pos: 5 },
      { axis: 'v', pos: 6 },
    ]);
    expect(controller.state.lastError).toBeNull();
  });

  it('service errors surface as lastError without crashing', async () => {
    const service = new FakeService();
    const api = new ApiClient('http://fake', async () =>
      new Response(JSON.stringify({ code: 'invalid_payload', message: 'bad n', field: 'n' }), {
        status: 400,
      }),
    );
    const controller = new EditorController(
      api,
      { version: 1, guidelines: [], n: 6, w: 1.5, seed: 3 },
      fakeTimers,
    );
    await controller.flush();
    expect(controller.state.lastError).toContain('invalid_payload');
  });
});

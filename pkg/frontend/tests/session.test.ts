import { describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api.js';
import { EditorController } from '../src/controller.js';
import { normalizeGuidelines, parseSession, serializeSession } from '../src/session.js';
import type { Session } from '../src/types.js';
import { FakeService } from './fake_service.js';

const timers = {
  set: (fn: () => void, ms: number) => setTimeout(fn, ms) as unknown as number,
  clear: (h: number) => clearTimeout(h as unknown as ReturnType<typeof setTimeout>),
};

describe('session serialization', () => {
  it('round-trips bitwise', () => {
    const session: Session = {
      version: 1,
      guidelines: [
        { axis: 'v', pos: 20 },
        { axis: 'h', pos: 8 },
        { axis: 'v', pos: 4 },
      ],
      n: 9,
      w: 1.5,
      seed: 12345,
    };
    const text = serializeSession(session);
    const back = parseSession(text);
    expect(serializeSession(back)).toBe(text);
  });

  it('normalizes guideline order and duplicates', () => {
    const normalized = normalizeGuidelines([
      { axis: 'v', pos: 9 },
      { axis: 'h', pos: 2 },
      { axis: 'v', pos: 9 },
    ]);
    expect(normalized).toEqual([
      { axis: 'h', pos: 2 },
      { axis: 'v', pos: 9 },
    ]);
  });

  it('rejects corrupt sessions', () => {
    expect(() => parseSession('{"version": 2}')).toThrow(/version/);
    expect(() =>
      parseSession('{"version":1,"guidelines":[{"axis":"x","pos":1}],"n":null,"w":1,"seed":0}'),
    ).toThrow(/invalid guideline/);
    expect(() =>
      parseSession('{"version":1,"guidelines":[],"n":300,"w":1,"seed":0}'),
    ).toThrow(/n must/);
  });

  it('reloading a session reproduces the identical rendered layout', async () => {
    const service = new FakeService();
    const api = new ApiClient('http://fake', service.fetch);
    const first = new EditorController(
      api,
      { version: 1, guidelines: [{ axis: 'v', pos: 11 }], n: 7, w: 1.5, seed: 99 },
      timers,
    );
    await first.flush();
    const savedSession = first.serialize();
    const savedSvg = first.state.svg;
    expect(savedSvg).not.toBeNull();

    const second = new EditorController(
      new ApiClient('http://fake', new FakeService().fetch),
      { version: 1, guidelines: [], n: null, w: 1.0, seed: 0 },
      timers,
    );
    second.loadSession(parseSession(savedSession));
    await second.flush();
    expect(second.state.svg).toBe(savedSvg); // byte-identical render
    expect(second.serialize()).toBe(savedSession);
  });
});

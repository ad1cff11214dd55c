/** Session state (de)serialization. Round-trips bitwise: parse(serialize(s))
 * re-serializes to the identical string, so a saved session replays the exact
 * same generation request. */

import type { Guideline, Session } from './types.js';
import { GRID_HEIGHT, GRID_WIDTH } from './types.js';

export function normalizeGuidelines(guidelines: Guideline[]): Guideline[] {
  const seen = new Set<string>();
  const out: Guideline[] = [];
  for (const g of guidelines) {
    const key = `${g.axis}:${g.pos}`;
    if (!seen.has(key)) {
      seen.add(key);
      out.push({ axis: g.axis, pos: g.pos });
    }
  }
  out.sort((a, b) => (a.axis === b.axis ? a.pos - b.pos : a.axis < b.axis ? -1 : 1));
  return out;
}

export function serializeSession(session: Session): string {
  return JSON.stringify({
    version: 1,
    guidelines: normalizeGuidelines(session.guidelines),
    n: session.n,
    w: session.w,
    seed: session.seed,
  });
}

export function parseSession(text: string): Session {
  const doc = JSON.parse(text) as Partial<Session>;
  if (doc.version !== 1) {
    throw new Error(`unsupported session version ${String(doc.version)}`);
  }
  if (!Array.isArray(doc.guidelines)) {
    throw new Error('session has no guidelines array');
  }
  for (const g of doc.guidelines) {
    const bound = g.axis === 'h' ? GRID_HEIGHT : GRID_WIDTH;
    if ((g.axis !== 'h' && g.axis !== 'v') || g.pos < 0 || g.pos > bound) {
      throw new Error(`invalid guideline ${JSON.stringify(g)}`);
    }
  }
  if (doc.n !== null && (typeof doc.n !== 'number' || doc.n < 1 || doc.n > 128)) {
    throw new Error('session n must be null or in [1, 128]');
  }
  if (typeof doc.w !== 'number' || doc.w < 0) {
    throw new Error('session w must be >= 0');
  }
  if (typeof doc.seed !== 'number') {
    throw new Error('session seed must be a number');
  }
  return {
    version: 1,
    guidelines: normalizeGuidelines(doc.guidelines),
    n: doc.n,
    w: doc.w,
    seed: doc.seed,
  };
}

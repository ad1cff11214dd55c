/** Editor state machine: session mutations to debounced service calls.
 *
 * Every mutation schedules one regeneration 150 ms later; rapid mutations
 * collapse into a single request, and a newly issued request aborts any
 * in-flight one (later edits supersede). Guideline-only changes on top of an
 * existing generation go through /edit so the noise trajectory (seed) is
 * preserved and the edit behaves as a counterfactual; anything that changes
 * the trajectory (n, w, seed, session load) goes through /generate.
 */

import { ApiClient } from './api.js';
import { normalizeGuidelines, serializeSession } from './session.js';
import type {
  GenerateRequest,
  Guideline,
  LayoutDoc,
  Session,
} from './types.js';

export const DEBOUNCE_MS = 150;

export interface EditorState {
  session: Session;
  layout: LayoutDoc | null;
  svg: string | null;
  busy: boolean;
  lastError: string | null;
  variations: LayoutDoc[];
}

export interface Timers {
  set(fn: () => void, ms: number): number;
  clear(handle: number): void;
}

const windowTimers: Timers = {
  set: (fn, ms) => setTimeout(fn, ms) as unknown as number,
  clear: (handle) => clearTimeout(handle as unknown as ReturnType<typeof setTimeout>),
};

export class EditorController {
  state: EditorState;
  onChange: (state: EditorState) => void = () => {};

  private baseRequest: GenerateRequest | null = null;
  private pending: number | null = null;
  private inFlight: AbortController | null = null;

  constructor(
    private api: ApiClient,
    session: Session,
    private timers: Timers = windowTimers,
  ) {
    this.state = {
      session: { ...session, guidelines: normalizeGuidelines(session.guidelines) },
      layout: null,
      svg: null,
      busy: false,
      lastError: null,
      variations: [],
    };
  }

  // --- session mutations ----------------------------------------------------

  addGuideline(g: Guideline): void {
    this.mutateGuidelines([...this.state.session.guidelines, g]);
  }

  moveGuideline(index: number, pos: number): void {
    const next = this.state.session.guidelines.map((g, i) =>
      i === index ? { axis: g.axis, pos } : g,
    );
    this.mutateGuidelines(next);
  }

  removeGuideline(index: number): void {
    this.mutateGuidelines(this.state.session.guidelines.filter((_, i) => i !== index));
  }

  setElementCount(n: number | null): void {
    this.state.session = { ...this.state.session, n };
    this.scheduleRegenerate(false);
  }

  setGuidanceWeight(w: number): void {
    this.state.session = { ...this.state.session, w };
    this.scheduleRegenerate(false);
  }

  newSeed(seed: number): void {
    this.state.session = { ...this.state.session, seed };
    this.scheduleRegenerate(false);
  }

  loadSession(session: Session): void {
    this.state.session = { ...session, guidelines: normalizeGuidelines(session.guidelines) };
    this.baseRequest = null;
    this.scheduleRegenerate(false);
  }

  serialize(): string {
    return serializeSession(this.state.session);
  }

  private mutateGuidelines(guidelines: Guideline[]): void {
    this.state.session = {
      ...this.state.session,
      guidelines: normalizeGuidelines(guidelines),
    };
    this.scheduleRegenerate(true);
  }

  // --- request plumbing -------------------------------------------------------

  private scheduleRegenerate(guidelinesOnly: boolean): void {
    this.notify();
    if (this.pending !== null) {
      this.timers.clear(this.pending);
    }
    this.pending = this.timers.set(() => {
      this.pending = null;
      void this.issue(guidelinesOnly);
    }, DEBOUNCE_MS);
  }

  /** Issue the request now (used by tests and the initial load). */
  async flush(): Promise<void> {
    if (this.pending !== null) {
      this.timers.clear(this.pending);
      this.pending = null;
    }
    await this.issue(false);
  }

  private requestFromSession(): GenerateRequest {
    const s = this.state.session;
    return { guidelines: s.guidelines, n: s.n, w: s.w, seed: s.seed };
  }

  private async issue(guidelinesOnly: boolean): Promise<void> {
    if (this.inFlight) {
      this.inFlight.abort(); // later edits supersede
    }
    const controller = new AbortController();
    this.inFlight = controller;
    this.state = { ...this.state, busy: true, lastError: null };
    this.notify();
    try {
      if (guidelinesOnly && this.baseRequest !== null) {
        const res = await this.api.edit(
          this.baseRequest,
          this.state.session.guidelines,
          controller.signal,
        );
        this.state = { ...this.state, layout: res.layout, svg: res.svg, busy: false };
      } else {
        const request = this.requestFromSession();
        const res = await this.api.generate(request, controller.signal);
        this.baseRequest = res.request;
        this.state = { ...this.state, layout: res.layout, svg: res.svg, busy: false };
      }
      this.notify();
    } catch (err) {
      if ((err as Error).name === 'AbortError') {
        return; // superseded by a newer request
      }
      this.state = { ...this.state, busy: false, lastError: String(err) };
      this.notify();
    } finally {
      if (this.inFlight === controller) {
        this.inFlight = null;
      }
    }
  }

  // --- flows beyond plain generation -----------------------------------------

  async requestVariations(subsetMethod: string, count: number): Promise<void> {
    if (!this.state.layout) {
      return;
    }
    const seeds = Array.from({ length: count }, (_, i) => this.state.session.seed + i + 1);
    try {
      const res = await this.api.variation(
        this.state.layout,
        subsetMethod,
        seeds,
        this.state.session.w,
      );
      this.state = { ...this.state, variations: res.layouts };
      this.notify();
    } catch (err) {
      this.state = { ...this.state, lastError: String(err) };
      this.notify();
    }
  }

  async inpaintSelection(idxMask: number[]): Promise<void> {
    if (!this.state.layout || idxMask.length === 0) {
      return;
    }
    try {
      const res = await this.api.inpaint(
        this.state.layout,
        idxMask,
        this.state.session.guidelines,
        this.state.session.seed,
        this.state.session.w,
      );
      this.state = { ...this.state, layout: res.layout, svg: res.svg };
      this.notify();
    } catch (err) {
      this.state = { ...this.state, lastError: String(err) };
      this.notify();
    }
  }

  private notify(): void {
    this.onChange(this.state);
  }
}

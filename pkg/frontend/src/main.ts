/** DOM bootstrap: wires the canvas, controls, and controller together. */

import { ApiClient } from './api.js';
import { EditorController } from './controller.js';
import {
  dragTo,
  elementsInRect,
  guidelineFromClick,
  guidelineToPixel,
  hitTest,
  snapToGrid,
} from './geometry.js';
import { parseSession } from './session.js';
import type { Axis, MetaResponse, Session } from './types.js';
import { GRID_HEIGHT, GRID_WIDTH } from './types.js';

const SERVICE_URL = (window as unknown as { SERVICE_URL?: string }).SERVICE_URL ?? '';

const CANVAS_W = 360;
const CANVAS_H = 640;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function toast(message: string): void {
  const box = el<HTMLDivElement>('toast');
  box.textContent = message;
  box.classList.add('visible');
  setTimeout(() => box.classList.remove('visible'), 4000);
}

async function start(): Promise<void> {
  const api = new ApiClient(SERVICE_URL);
  let meta: MetaResponse;
  try {
    meta = await api.meta();
  } catch (err) {
    toast(`service unavailable: ${String(err)}`);
    return;
  }

  const initial: Session = { version: 1, guidelines: [], n: 8, w: meta.w_default, seed: 1 };
  const controller = new EditorController(api, initial);

  const stage = el<HTMLDivElement>('stage');
  const overlay = el<HTMLCanvasElement>('overlay');
  overlay.width = CANVAS_W;
  overlay.height = CANVAS_H;
  const ctx = overlay.getContext('2d')!;
  const size = { width: CANVAS_W, height: CANVAS_H };

  let axisMode: Axis = 'v';
  let inpaintMode = false;
  let dragIndex = -1;
  let selectStart: { x: number; y: number } | null = null;
  let selectRect: { x0: number; y0: number; x1: number; y1: number } | null = null;
  let hoverIndex = -1;

  function drawOverlay(): void {
    ctx.clearRect(0, 0, CANVAS_W, CANVAS_H);
    controller.state.session.guidelines.forEach((g, i) => {
      const lane = guidelineToPixel(g, size);
      ctx.strokeStyle = i === hoverIndex || i === dragIndex ? '#ff6666' : '#ff0000';
      ctx.lineWidth = i === hoverIndex || i === dragIndex ? 2 : 1;
      ctx.beginPath();
      if (g.axis === 'v') {
        ctx.moveTo(lane, 0);
        ctx.lineTo(lane, CANVAS_H);
      } else {
        ctx.moveTo(0, lane);
        ctx.lineTo(CANVAS_W, lane);
      }
      ctx.stroke();
    });
    if (selectRect) {
      ctx.strokeStyle = '#3366ff';
      ctx.setLineDash([4, 3]);
      const x = (Math.min(selectRect.x0, selectRect.x1) / GRID_WIDTH) * CANVAS_W;
      const y = (Math.min(selectRect.y0, selectRect.y1) / GRID_HEIGHT) * CANVAS_H;
      const w = (Math.abs(selectRect.x1 - selectRect.x0) / GRID_WIDTH) * CANVAS_W;
      const h = (Math.abs(selectRect.y1 - selectRect.y0) / GRID_HEIGHT) * CANVAS_H;
      ctx.strokeRect(x, y, w, h);
      ctx.setLineDash([]);
    }
  }

  controller.onChange = (state) => {
    if (state.svg) {
      stage.innerHTML = state.svg;
    }
    el<HTMLSpanElement>('status').textContent = state.busy ? 'generating…' : 'idle';
    if (state.lastError) toast(state.lastError);
    const grid = el<HTMLDivElement>('variations');
    grid.innerHTML = '';
    state.variations.forEach((v) => {
      const cell = document.createElement('div');
      cell.className = 'variation';
      cell.textContent = `${v.elements.length} elements`;
      grid.appendChild(cell);
    });
    drawOverlay();
  };

  function pointer(ev: MouseEvent): { x: number; y: number } {
    const rect = overlay.getBoundingClientRect();
    return { x: ev.clientX - rect.left, y: ev.clientY - rect.top };
  }

  overlay.addEventListener('mousedown', (ev) => {
    const { x, y } = pointer(ev);
    if (inpaintMode) {
      selectStart = { x, y };
      return;
    }
    dragIndex = hitTest(controller.state.session.guidelines, x, y, size);
  });

  overlay.addEventListener('mousemove', (ev) => {
    const { x, y } = pointer(ev);
    if (inpaintMode && selectStart) {
      selectRect = {
        x0: snapToGrid(selectStart.x, CANVAS_W, GRID_WIDTH),
        y0: snapToGrid(selectStart.y, CANVAS_H, GRID_HEIGHT),
        x1: snapToGrid(x, CANVAS_W, GRID_WIDTH),
        y1: snapToGrid(y, CANVAS_H, GRID_HEIGHT),
      };
      drawOverlay();
      return;
    }
    if (dragIndex >= 0) {
      const g = controller.state.session.guidelines[dragIndex];
      const moved = dragTo(g, x, y, size);
      if (moved.pos !== g.pos) controller.moveGuideline(dragIndex, moved.pos);
    } else {
      hoverIndex = hitTest(controller.state.session.guidelines, x, y, size);
    }
    drawOverlay();
  });

  overlay.addEventListener('mouseup', (ev) => {
    const { x, y } = pointer(ev);
    if (inpaintMode && selectStart && selectRect && controller.state.layout) {
      const idx = elementsInRect(controller.state.layout.elements, selectRect);
      selectStart = null;
      selectRect = null;
      drawOverlay();
      if (idx.length) void controller.inpaintSelection(idx);
      else toast('selection contains no whole element');
      return;
    }
    if (dragIndex >= 0) {
      dragIndex = -1;
      return;
    }
    controller.addGuideline(guidelineFromClick(axisMode, x, y, size));
  });

  document.addEventListener('keydown', (ev) => {
    if ((ev.key === 'Delete' || ev.key === 'Backspace') && hoverIndex >= 0) {
      controller.removeGuideline(hoverIndex);
      hoverIndex = -1;
    }
    if (ev.key === 'h' || ev.key === 'v') {
      axisMode = ev.key;
      el<HTMLSpanElement>('axis-mode').textContent = axisMode === 'v' ? 'vertical' : 'horizontal';
    }
  });

  el<HTMLInputElement>('count').max = String(meta.max_trained_elements);
  el<HTMLInputElement>('count').addEventListener('input', (ev) => {
    const value = Number((ev.target as HTMLInputElement).value);
    el<HTMLSpanElement>('count-label').textContent = String(value);
    controller.setElementCount(value);
  });
  el<HTMLInputElement>('weight').addEventListener('input', (ev) => {
    const value = Number((ev.target as HTMLInputElement).value);
    el<HTMLSpanElement>('weight-label').textContent = value.toFixed(2);
    controller.setGuidanceWeight(value);
  });
  el<HTMLButtonElement>('new-seed').addEventListener('click', () => {
    controller.newSeed(Math.floor(Math.random() * 2 ** 31));
  });
  el<HTMLButtonElement>('variations-btn').addEventListener('click', () => {
    void controller.requestVariations('all', 4);
  });
  el<HTMLButtonElement>('inpaint-toggle').addEventListener('click', (ev) => {
    inpaintMode = !inpaintMode;
    (ev.target as HTMLButtonElement).classList.toggle('active', inpaintMode);
  });
  el<HTMLButtonElement>('save-session').addEventListener('click', () => {
    const blob = new Blob([controller.serialize()], { type: 'application/json' });
    const a = document.createElement('a');
    a.href = URL.createObjectURL(blob);
    a.download = 'session.json';
    a.click();
  });
  el<HTMLInputElement>('load-session').addEventListener('change', async (ev) => {
    const file = (ev.target as HTMLInputElement).files?.[0];
    if (!file) return;
    try {
      controller.loadSession(parseSession(await file.text()));
    } catch (err) {
      toast(String(err));
    }
  });

  const legend = el<HTMLDivElement>('legend');
  meta.vocab.classes.forEach((cls) => {
    const item = document.createElement('div');
    item.className = 'legend-item';
    item.innerHTML = `<span class="swatch" style="background:${cls.color}"></span>${cls.name}`;
    legend.appendChild(item);
  });

  await controller.flush();
}

void start();

/** Pure canvas geometry: grid snapping and guideline hit-testing.
 * Positions are discrete, so every interaction snaps to the 36x64 grid. */

import type { Axis, Guideline } from './types.js';
import { GRID_HEIGHT, GRID_WIDTH } from './types.js';

export interface CanvasSize {
  width: number;
  height: number;
}

export function snapToGrid(pixel: number, span: number, bins: number): number {
  const unit = span / bins;
  return Math.min(Math.max(Math.round(pixel / unit), 0), bins);
}

/** Grid position for a click adding a guideline of the given axis. */
export function guidelineFromClick(
  axis: Axis,
  x: number,
  y: number,
  size: CanvasSize,
): Guideline {
  return axis === 'v'
    ? { axis, pos: snapToGrid(x, size.width, GRID_WIDTH) }
    : { axis, pos: snapToGrid(y, size.height, GRID_HEIGHT) };
}

export function guidelineToPixel(g: Guideline, size: CanvasSize): number {
  return g.axis === 'v'
    ? (g.pos / GRID_WIDTH) * size.width
    : (g.pos / GRID_HEIGHT) * size.height;
}

/** Index of the guideline within grab distance of the pointer, or -1. */
export function hitTest(
  guidelines: Guideline[],
  x: number,
  y: number,
  size: CanvasSize,
  tolerancePx = 5,
): number {
  let best = -1;
  let bestDist = tolerancePx;
  guidelines.forEach((g, i) => {
    const lane = guidelineToPixel(g, size);
    const dist = Math.abs((g.axis === 'v' ? x : y) - lane);
    if (dist <= bestDist) {
      best = i;
      bestDist = dist;
    }
  });
  return best;
}

/** New position for a dragged guideline, snapped and clamped. */
export function dragTo(g: Guideline, x: number, y: number, size: CanvasSize): Guideline {
  return g.axis === 'v'
    ? { axis: g.axis, pos: snapToGrid(x, size.width, GRID_WIDTH) }
    : { axis: g.axis, pos: snapToGrid(y, size.height, GRID_HEIGHT) };
}

/** Indices of elements fully inside a selection rectangle (grid coords). */
export function elementsInRect(
  elements: { ix_min: number; iy_min: number; ix_max: number; iy_max: number }[],
  rect: { x0: number; y0: number; x1: number; y1: number },
): number[] {
  const [rx0, rx1] = [Math.min(rect.x0, rect.x1), Math.max(rect.x0, rect.x1)];
  const [ry0, ry1] = [Math.min(rect.y0, rect.y1), Math.max(rect.y0, rect.y1)];
  const out: number[] = [];
  elements.forEach((el, i) => {
    if (el.ix_min >= rx0 && el.ix_max <= rx1 && el.iy_min >= ry0 && el.iy_max <= ry1) {
      out.push(i);
    }
  });
  return out;
}

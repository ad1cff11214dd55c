import { describe, expect, it } from 'vitest';

import { dragTo, guidelineFromClick, guidelineToPixel, hitTest, snapToGrid } from '../src/geometry.js';

const SIZE = { width: 360, height: 640 };

describe('grid snapping', () => {
  it('snaps pixels to the nearest grid line and clamps', () => {
    expect(snapToGrid(0, 360, 36)).toBe(0);
    expect(snapToGrid(123, 360, 36)).toBe(12); // 123 / 10 rounds to 12
    expect(snapToGrid(359, 360, 36)).toBe(36);
    expect(snapToGrid(-40, 360, 36)).toBe(0);
    expect(snapToGrid(9999, 360, 36)).toBe(36);
  });

  it('click produces an axis-correct snapped guideline', () => {
    expect(guidelineFromClick('v', 123, 500, SIZE)).toEqual({ axis: 'v', pos: 12 });
    expect(guidelineFromClick('h', 123, 500, SIZE)).toEqual({ axis: 'h', pos: 50 });
  });

  it('pixel mapping inverts snapping on exact lines', () => {
    const g = { axis: 'v' as const, pos: 18 };
    expect(guidelineToPixel(g, SIZE)).toBe(180);
    expect(dragTo(g, 201, 0, SIZE)).toEqual({ axis: 'v', pos: 20 });
  });

  it('hit test finds the nearest guideline within tolerance', () => {
    const guidelines = [
      { axis: 'v' as const, pos: 10 },
      { axis: 'h' as const, pos: 32 },
    ];
    expect(hitTest(guidelines, 102, 9, SIZE)).toBe(0);
    expect(hitTest(guidelines, 200, 318, SIZE)).toBe(1);
    expect(hitTest(guidelines, 150, 150, SIZE)).toBe(-1);
  });
});

import { describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api.js';
import { EditorController } from '../src/controller.js';
import { elementsInRect } from '../src/geometry.js';
import { FakeService } from './fake_service.js';

const timers = {
  set: (fn: () => void, ms: number) => setTimeout(fn, ms) as unknown as number,
  clear: (h: number) => clearTimeout(h as unknown as ReturnType<typeof setTimeout>),
};

function rectStrings(svg: string): string[] {
  return svg.match(/<rect[^>]*\/>/g) ?? [];
}

describe('inpaint flow', () => {
  it('leaves unmasked rects byte-identical in the SVG diff', async () => {
    const service = new FakeService();
    const controller = new EditorController(
      new ApiClient('http://fake', service.fetch),
      { version: 1, guidelines: [{ axis: 'v', pos: 10 }], n: 6, w: 1.5, seed: 42 },
      timers,
    );
    await controller.flush();
    const before = controller.state.svg!;
    const layout = controller.state.layout!;
    expect(layout.elements.length).toBe(6);

    const mask = [1, 4];
    await controller.inpaintSelection(mask);
    const after = controller.state.svg!;

    const rectsBefore = rectStrings(before);
    const rectsAfter = rectStrings(after);
    expect(rectsAfter.length).toBe(rectsBefore.length);
    for (let i = 0; i < rectsBefore.length; i++) {
      if (!mask.includes(i)) {
        expect(rectsAfter[i]).toBe(rectsBefore[i]); // byte-identical
      }
    }
    // the service received exactly the selected indices
    const call = service.calls.find((c) => c.path === '/inpaint')!;
    expect(call.body.idx_mask).toEqual(mask);
    expect(call.body.seed).toBe(42);
  });

  it('maps a selection rectangle to whole-element indices', () => {
    const elements = [
      { ix_min: 0, iy_min: 0, ix_max: 10, iy_max: 10 },
      { ix_min: 12, iy_min: 0, ix_max: 20, iy_max: 10 },
      { ix_min: 2, iy_min: 20, ix_max: 8, iy_max: 30 },
    ];
    expect(elementsInRect(elements, { x0: 0, y0: 0, x1: 11, y1: 12 })).toEqual([0]);
    expect(elementsInRect(elements, { x0: 0, y0: 0, x1: 36, y1: 64 })).toEqual([0, 1, 2]);
    expect(elementsInRect(elements, { x0: 11, y0: 11, x1: 12, y1: 12 })).toEqual([]);
    // inverted drag direction still works
    expect(elementsInRect(elements, { x0: 11, y0: 12, x1: 0, y1: 0 })).toEqual([0]);
  });

  it('empty selection is a no-op', async () => {
    const service = new FakeService();
    const controller = new EditorController(
      new ApiClient('http://fake', service.fetch),
      { version: 1, guidelines: [], n: 4, w: 1.5, seed: 1 },
      timers,
    );
    await controller.flush();
    const before = controller.state.svg;
    await controller.inpaintSelection([]);
    expect(controller.state.svg).toBe(before);
    expect(service.calls.filter((c) => c.path === '/inpaint')).toHaveLength(0);
  });
});

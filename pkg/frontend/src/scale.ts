// Linear pixel scale: invertible mapping between data values and the
// chart's horizontal pixel axis.

export class LinearScale {
  constructor(
    readonly domain: [number, number],
    readonly range: [number, number],
  ) {
    if (domain[0] === domain[1]) throw new Error("degenerate scale domain");
  }

  valueToPixel(v: number): number {
    const [d0, d1] = this.domain;
    const [r0, r1] = this.range;
    return r0 + ((v - d0) / (d1 - d0)) * (r1 - r0);
  }

  pixelToValue(p: number): number {
    const [d0, d1] = this.domain;
    const [r0, r1] = this.range;
    return d0 + ((p - r0) / (r1 - r0)) * (d1 - d0);
  }
}

// Screen-space brush interval in pixels; lo/hi normalized on read.
export interface BrushState {
  anchorPx: number;
  currentPx: number;
}

// Convert a brush to an ordered data-unit interval, or null when the
// brush has zero width (callers emit a clause removal instead).
export function brushToInterval(
  scale: LinearScale,
  brush: BrushState,
): [number, number] | null {
  const lo = Math.min(brush.anchorPx, brush.currentPx);
  const hi = Math.max(brush.anchorPx, brush.currentPx);
  if (hi - lo < 1) return null;
  return [scale.pixelToValue(lo), scale.pixelToValue(hi)];
}

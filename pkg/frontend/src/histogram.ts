// Brushable SVG histogram. Bar heights come straight from server result
// frames; the client never re-aggregates.

import { LinearScale, BrushState, brushToInterval } from "./scale";

const SVG_NS = "http://www.w3.org/2000/svg";
const HEIGHT = 120;

export interface HistogramConfig {
  id: string;            // view id, also the clause source
  title: string;
  column: string;        // base-table column the brush filters
  scale: LinearScale;    // data value -> horizontal pixel
  bins: number;          // client-side bar count of the view query
  binToValue: (bin: number) => number;  // left edge of a bar, data units
  onBrush: (interval: [number, number] | null) => void;
  onActivate: () => void;
}

export class Histogram {
  readonly root: HTMLElement;
  private svg: SVGSVGElement;
  private barsGroup: SVGGElement;
  private brushRect: SVGRectElement;
  private brush: BrushState | null = null;
  private activated = false;
  private frameQueued = false;
  private counts = new Map<number, number>();

  constructor(private config: HistogramConfig, doc: Document = document) {
    const width = config.scale.range[1];
    this.root = doc.createElement("div");
    this.root.className = "chart";
    this.root.id = `chart-${config.id}`;
    const label = doc.createElement("div");
    label.className = "chart-title";
    label.textContent = config.title;
    this.root.appendChild(label);

    this.svg = doc.createElementNS(SVG_NS, "svg") as SVGSVGElement;
    this.svg.setAttribute("width", String(width));
    this.svg.setAttribute("height", String(HEIGHT));
    this.barsGroup = doc.createElementNS(SVG_NS, "g") as SVGGElement;
    this.svg.appendChild(this.barsGroup);
    this.brushRect = doc.createElementNS(SVG_NS, "rect") as SVGRectElement;
    this.brushRect.setAttribute("class", "brush");
    this.brushRect.setAttribute("height", String(HEIGHT));
    this.brushRect.setAttribute("display", "none");
    this.svg.appendChild(this.brushRect);
    this.root.appendChild(this.svg);

    this.svg.addEventListener("pointerenter", () => {
      if (!this.activated) {
        this.activated = true;
        config.onActivate();
      }
    });
    this.svg.addEventListener("pointerdown", (e) =>
      this.brushStart(this.eventX(e)));
    this.svg.addEventListener("pointermove", (e) => {
      if (this.brush !== null) this.brushMove(this.eventX(e));
    });
    this.svg.addEventListener("pointerup", () => this.brushEnd());
  }

  private eventX(e: Event): number {
    return Number((e as PointerEvent).offsetX ?? 0);
  }

  // Exposed for tests, which drive the brush without real pointer events.
  brushStart(px: number): void {
    this.brush = { anchorPx: px, currentPx: px };
    this.scheduleEmit();
  }

  brushMove(px: number): void {
    if (this.brush === null) return;
    this.brush.currentPx = px;
    this.scheduleEmit();
  }

  brushEnd(): void {
    if (this.brush === null) return;
    const interval = brushToInterval(this.config.scale, this.brush);
    if (interval === null) this.clearBrush();
    else this.emit();
  }

  clearBrush(): void {
    this.brush = null;
    this.brushRect.setAttribute("display", "none");
    this.config.onBrush(null);
  }

  // Coalesce drag updates to one clause per animation frame; the server
  // throttle absorbs anything faster.
  private scheduleEmit(): void {
    if (this.frameQueued) return;
    this.frameQueued = true;
    const raf = typeof requestAnimationFrame === "function"
      ? requestAnimationFrame
      : (fn: () => void) => setTimeout(fn, 16);
    raf(() => {
      this.frameQueued = false;
      this.emit();
    });
  }

  private emit(): void {
    if (this.brush === null) return;
    const interval = brushToInterval(this.config.scale, this.brush);
    if (interval === null) return;
    const lo = Math.min(this.brush.anchorPx, this.brush.currentPx);
    const hi = Math.max(this.brush.anchorPx, this.brush.currentPx);
    this.brushRect.setAttribute("x", String(lo));
    this.brushRect.setAttribute("width", String(hi - lo));
    this.brushRect.setAttribute("display", "inline");
    this.config.onBrush(interval);
  }

  // Render a result frame: columns x (bin index) and y (count).
  update(columns: Record<string, (number | string | null)[]>): void {
    const xs = (columns.x ?? []) as number[];
    const ys = (columns.y ?? []) as number[];
    this.counts = new Map();
    for (let i = 0; i < xs.length; i++) this.counts.set(xs[i], ys[i] ?? 0);
    this.render();
  }

  private render(): void {
    const doc = this.svg.ownerDocument!;
    while (this.barsGroup.firstChild) {
      this.barsGroup.removeChild(this.barsGroup.firstChild);
    }
    const width = Number(this.svg.getAttribute("width"));
    const barWidth = width / this.config.bins;
    const max = Math.max(1, ...this.counts.values());
    for (let bin = 0; bin < this.config.bins; bin++) {
      const y = this.counts.get(bin) ?? 0;
      const h = (y / max) * (HEIGHT - 4);
      const rect = doc.createElementNS(SVG_NS, "rect");
      rect.setAttribute("class", "bar");
      rect.setAttribute("data-bin", String(bin));
      rect.setAttribute("data-count", String(y));
      rect.setAttribute("x", String(bin * barWidth + 0.5));
      rect.setAttribute("y", String(HEIGHT - h));
      rect.setAttribute("width", String(Math.max(1, barWidth - 1)));
      rect.setAttribute("height", String(h));
      this.barsGroup.appendChild(rect);
    }
  }

  // Bar snapshot for tests: bin -> count actually rendered in the DOM.
  barSnapshot(): Map<number, number> {
    const out = new Map<number, number>();
    const bars = this.barsGroup.querySelectorAll("rect.bar");
    bars.forEach((b) => out.set(Number(b.getAttribute("data-bin")),
                                Number(b.getAttribute("data-count"))));
    return out;
  }
}

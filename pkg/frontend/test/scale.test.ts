import { describe, expect, it } from "vitest";
import { LinearScale, brushToInterval } from "../src/scale";

describe("LinearScale", () => {
  const s = new LinearScale([-60, 180], [0, 540]);

  it("maps domain endpoints to range endpoints", () => {
    expect(s.valueToPixel(-60)).toBe(0);
    expect(s.valueToPixel(180)).toBe(540);
  });

  it("inverts", () => {
    for (const px of [0, 1, 135, 270, 539.5, 540]) {
      expect(s.valueToPixel(s.pixelToValue(px))).toBeCloseTo(px, 9);
    }
  });

  it("rejects a degenerate domain", () => {
    expect(() => new LinearScale([5, 5], [0, 10])).toThrow();
  });
});

describe("brushToInterval", () => {
  const s = new LinearScale([0, 100], [0, 100]);

  it("orders a backwards drag", () => {
    expect(brushToInterval(s, { anchorPx: 80, currentPx: 20 })).toEqual([20, 80]);
  });

  it("returns null below one pixel of width", () => {
    expect(brushToInterval(s, { anchorPx: 40, currentPx: 40.5 })).toBeNull();
    expect(brushToInterval(s, { anchorPx: 40, currentPx: 40 })).toBeNull();
  });

  it("converts pixels to data units", () => {
    const t = new LinearScale([0, 24], [0, 240]);
    expect(brushToInterval(t, { anchorPx: 60, currentPx: 120 })).toEqual([6, 12]);
  });
});

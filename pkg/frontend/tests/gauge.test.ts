// @vitest-environment happy-dom
import { describe, expect, it } from "vitest";

import { formatSeconds, Gauge } from "../src/gauge";

const ARC = Math.PI * 80;

function arcOffset(root: HTMLElement): number {
  const arc = root.querySelector(".gauge-arc");
  return Number(arc?.getAttribute("stroke-dashoffset"));
}

describe("formatSeconds", () => {
  it("picks units by magnitude", () => {
    expect(formatSeconds(0)).toBe("0");
    expect(formatSeconds(-1)).toBe("0");
    expect(formatSeconds(NaN)).toBe("0");
    expect(formatSeconds(1.5e-4)).toBe("150 µs");
    expect(formatSeconds(2.3e-3)).toBe("2.30 ms");
    expect(formatSeconds(0.25)).toBe("250.00 ms");
    expect(formatSeconds(1.25)).toBe("1.250 s");
  });
});

describe("Gauge", () => {
  it("starts empty", () => {
    const root = document.createElement("div");
    const gauge = new Gauge(root, "UDP Read");
    expect(arcOffset(root)).toBeCloseTo(ARC, 6);
    expect(gauge.fraction).toBe(0);
    expect(root.querySelector(".gauge-title")?.textContent).toBe("UDP Read");
  });

  it("fills the whole arc at the rolling maximum", () => {
    const root = document.createElement("div");
    const gauge = new Gauge(root, "Compute");
    gauge.update(1e-3);
    expect(gauge.fraction).toBe(1);
    expect(arcOffset(root)).toBeCloseTo(0, 6);
    expect(root.querySelector(".gauge-value")?.textContent).toBe("1.00 ms");
  });

  it("scales against the window maximum, not the lifetime maximum", () => {
    const root = document.createElement("div");
    const gauge = new Gauge(root, "Compute");
    gauge.update(4e-3); // spike
    gauge.update(1e-3);
    expect(gauge.fraction).toBeCloseTo(0.25, 12);
    // push the spike out of the 50-frame window
    for (let i = 0; i < 50; i++) gauge.update(1e-3);
    expect(gauge.fraction).toBe(1);
  });

  it("treats idle and bad inputs as zero", () => {
    const root = document.createElement("div");
    const gauge = new Gauge(root, "UDP Send");
    gauge.update(0);
    gauge.update(NaN);
    expect(gauge.fraction).toBe(0);
    expect(root.querySelector(".gauge-value")?.textContent).toBe("0");
    expect(arcOffset(root)).toBeCloseTo(ARC, 6);
  });
});

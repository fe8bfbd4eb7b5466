import { describe, expect, it } from "vitest";

import type { ProjectedPoint } from "../src/api.js";
import { buildScatterSvg, pointColor } from "../src/scatter.js";

function point(text: string, x: number, y: number, hint: string | null): ProjectedPoint {
  return { normalized_text: text, x, y, class_hint: hint };
}

describe("buildScatterSvg", () => {
  it("renders one circle per point", () => {
    const points = [
      point("a", 0, 0, "earnest"),
      point("b", 1, 1, "non_earnest"),
      point("c", -1, 2, null),
    ];
    const svg = buildScatterSvg(points);
    expect(svg.match(/<circle /g)).toHaveLength(3);
    expect(svg.startsWith("<svg ")).toBe(true);
  });

  it("colors by class with a fallback for unlabeled", () => {
    expect(pointColor("non_earnest")).toBe("#d62728");
    expect(pointColor("earnest")).toBe("#2ca02c");
    expect(pointColor("neutral")).toBe("#8c8c8c");
    expect(pointColor(null)).toBe("#1f77b4");
    expect(pointColor("surprise")).toBe("#1f77b4");
  });

  it("escapes markup in point titles", () => {
    const svg = buildScatterSvg([point('beta <&> "quoted"', 0, 0, null)]);
    expect(svg).toContain("beta &lt;&amp;&gt; &quot;quoted&quot;");
    expect(svg).not.toContain('<&> "');
  });

  it("keeps coordinates finite for a single point", () => {
    const svg = buildScatterSvg([point("solo", 3.5, -2, "earnest")]);
    expect(svg).not.toContain("NaN");
    expect(svg).not.toContain("Infinity");
  });

  it("maps the extremes inside the margins", () => {
    const svg = buildScatterSvg(
      [point("lo", -10, -10, null), point("hi", 10, 10, null)],
      640,
      480,
      48,
    );
    expect(svg).toContain('cx="48.00"');
    expect(svg).toContain('cx="592.00"');
    expect(svg).toContain('cy="48.00"');
    expect(svg).toContain('cy="432.00"');
  });
});

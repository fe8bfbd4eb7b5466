/**
 * SVG scatter of a projection job's points, one circle per unique
 * response. The palette matches the server-side SVG export so the two
 * renderings of a question agree.
 */

import type { ProjectedPoint } from "./api.js";

const CLASS_COLORS: Record<string, string> = {
  non_earnest: "#d62728",
  neutral: "#8c8c8c",
  earnest: "#2ca02c",
  unlabeled: "#1f77b4",
};

function escapeXml(value: string): string {
  return value
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

export function pointColor(classHint: string | null): string {
  return CLASS_COLORS[classHint ?? "unlabeled"] ?? CLASS_COLORS["unlabeled"]!;
}

export function buildScatterSvg(
  points: ProjectedPoint[],
  width = 640,
  height = 480,
  margin = 48,
): string {
  const xs = points.map((p) => p.x);
  const ys = points.map((p) => p.y);
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const yMin = Math.min(...ys);
  const yMax = Math.max(...ys);
  const xSpan = xMax - xMin || 1;
  const ySpan = yMax - yMin || 1;
  const plotW = width - 2 * margin;
  const plotH = height - 2 * margin;

  const circles = points.map((p) => {
    const cx = margin + ((p.x - xMin) / xSpan) * plotW;
    const cy = margin + ((yMax - p.y) / ySpan) * plotH;
    return (
      `<circle cx="${cx.toFixed(2)}" cy="${cy.toFixed(2)}" r="4" ` +
      `fill="${pointColor(p.class_hint)}" fill-opacity="0.8">` +
      `<title>${escapeXml(p.normalized_text)}</title></circle>`
    );
  });

  return (
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" ` +
    `width="${width}" height="${height}" role="img">` +
    `<rect width="${width}" height="${height}" fill="#ffffff"/>` +
    circles.join("") +
    `</svg>`
  );
}

import type { SparklinePoint } from "./types";

// SVG polyline for a rolling 24 h bucket series; empty series render as a
// placeholder instead of crashing on degenerate extents.

export function sparklinePath(
  series: SparklinePoint[],
  width = 120,
  height = 28,
): string {
  if (series.length === 0) return "";
  const xs = series.map((p) => p.bucket_start);
  const ys = series.map((p) => p.value);
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const yMax = Math.max(...ys, 1e-9);
  const xSpan = Math.max(xMax - xMin, 1e-9);
  return series
    .map((p, i) => {
      const x = ((p.bucket_start - xMin) / xSpan) * width;
      const y = height - (p.value / yMax) * (height - 2) - 1;
      return `${i === 0 ? "M" : "L"}${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(" ");
}

export function sparklineSvg(series: SparklinePoint[], metric: string): string {
  if (series.length === 0) {
    return `<span class="spark-empty" data-metric="${metric}">no data</span>`;
  }
  const path = sparklinePath(series);
  return `
    <svg viewBox="0 0 120 28" class="spark" data-metric="${metric}" role="img" aria-label="${metric} sparkline">
      <path d="${path}" fill="none" stroke-width="1.5" />
    </svg>`;
}

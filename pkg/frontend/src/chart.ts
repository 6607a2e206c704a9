/**
 * Learning-curve chart: one point per completed epoch, drawn as an inline
 * SVG polyline. Pure string output so the chart is testable without a DOM.
 */

import type { EpochDoc } from "./api.js";

export interface ChartPoint {
  epoch: number;
  value: number;
}

/** One point per completed epoch, in epoch order. */
export function chartPoints(
  epochs: EpochDoc[],
  field: "avg_cost" | "accuracy" = "avg_cost",
): ChartPoint[] {
  return epochs.map((e) => ({ epoch: e.epoch, value: e[field] }));
}

/** Map points into SVG space; equal x steps, y scaled to the data range. */
export function polylineCoords(
  points: ChartPoint[],
  width: number,
  height: number,
  pad = 10,
): Array<[number, number]> {
  if (points.length === 0) return [];
  const values = points.map((p) => p.value);
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo || 1;
  const innerW = width - 2 * pad;
  const innerH = height - 2 * pad;
  const step = points.length > 1 ? innerW / (points.length - 1) : 0;
  return points.map((p, i) => [
    pad + i * step,
    pad + innerH * (1 - (p.value - lo) / span),
  ]);
}

export function chartSvg(
  points: ChartPoint[],
  width = 360,
  height = 160,
): string {
  const coords = polylineCoords(points, width, height);
  const line =
    coords.length > 1
      ? `<polyline fill="none" class="curve" points="${coords
          .map(([x, y]) => `${x.toFixed(1)},${y.toFixed(1)}`)
          .join(" ")}"/>`
      : "";
  const dots = coords
    .map(([x, y]) => `<circle cx="${x.toFixed(1)}" cy="${y.toFixed(1)}" r="3" class="pt"/>`)
    .join("");
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" ` +
    `width="${width}" height="${height}" role="img">${line}${dots}</svg>`
  );
}

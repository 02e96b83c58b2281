import { svgEl } from "./dom.js";
import type { Series } from "./types.js";

const WIDTH = 640;
const HEIGHT = 260;
const PAD = { left: 52, right: 16, top: 14, bottom: 30 };

interface Scale {
  (value: number): number;
}

function linearScale(domainMin: number, domainMax: number, rangeMin: number, rangeMax: number): Scale {
  const span = domainMax - domainMin || 1;
  return (value) => rangeMin + ((value - domainMin) / span) * (rangeMax - rangeMin);
}

function axisLabel(x: number, y: number, text: string, anchor = "middle"): SVGTextElement {
  const node = svgEl("text", { x, y, "text-anchor": anchor, class: "axis-label" });
  node.textContent = text;
  return node;
}

export interface SsrProfileOptions {
  /** Estimated threshold; drawn as the anchored marker. */
  gammaHat: number;
  /** Candidate override; drawn as the draggable marker when present. */
  override?: number;
  onDrag?: (gamma: number) => void;
  xLabel?: string;
}

/**
 * SSR profile over threshold candidates, straight from the serialized
 * ssr_profile series. Dragging snaps the override marker to the nearest
 * candidate x, so the only values a drag can produce are ones the service
 * itself evaluated.
 */
export function ssrProfileChart(series: Series, options: SsrProfileOptions): SVGSVGElement {
  const svg = svgEl("svg", {
    viewBox: `0 0 ${WIDTH} ${HEIGHT}`,
    class: "chart ssr-profile",
    role: "img",
  });
  if (series.length === 0) return svg;

  const xs = series.map((p) => p[0]);
  const ys = series.map((p) => p[1]);
  const sx = linearScale(Math.min(...xs), Math.max(...xs), PAD.left, WIDTH - PAD.right);
  const sy = linearScale(Math.min(...ys), Math.max(...ys), HEIGHT - PAD.bottom, PAD.top);

  const path = series
    .map(([gx, gy], i) => `${i === 0 ? "M" : "L"}${sx(gx).toFixed(2)},${sy(gy).toFixed(2)}`)
    .join(" ");
  svg.append(svgEl("path", { d: path, class: "profile-line", fill: "none" }));

  const marker = (gamma: number, cls: string) =>
    svgEl("line", {
      x1: sx(gamma),
      x2: sx(gamma),
      y1: PAD.top,
      y2: HEIGHT - PAD.bottom,
      class: cls,
      "data-gamma": gamma,
    });
  svg.append(marker(options.gammaHat, "gamma-marker estimate"));

  const overrideLine = marker(options.override ?? options.gammaHat, "gamma-marker override");
  svg.append(overrideLine);

  svg.append(axisLabel(WIDTH / 2, HEIGHT - 6, options.xLabel ?? "threshold candidate"));
  svg.append(axisLabel(14, HEIGHT / 2, "SSR", "middle"));

  if (options.onDrag) {
    const snap = (clientX: number): number => {
      const rect = svg.getBoundingClientRect();
      const px = ((clientX - rect.left) / (rect.width || WIDTH)) * WIDTH;
      let best = xs[0];
      let bestDist = Infinity;
      for (const gx of xs) {
        const d = Math.abs(sx(gx) - px);
        if (d < bestDist) {
          bestDist = d;
          best = gx;
        }
      }
      return best;
    };
    let dragging = false;
    svg.addEventListener("pointerdown", (ev) => {
      dragging = true;
      const gamma = snap(ev.clientX);
      overrideLine.setAttribute("x1", String(sx(gamma)));
      overrideLine.setAttribute("x2", String(sx(gamma)));
      overrideLine.setAttribute("data-gamma", String(gamma));
    });
    svg.addEventListener("pointermove", (ev) => {
      if (!dragging) return;
      const gamma = snap(ev.clientX);
      overrideLine.setAttribute("x1", String(sx(gamma)));
      overrideLine.setAttribute("x2", String(sx(gamma)));
      overrideLine.setAttribute("data-gamma", String(gamma));
    });
    svg.addEventListener("pointerup", (ev) => {
      if (!dragging) return;
      dragging = false;
      options.onDrag!(snap(ev.clientX));
    });
  }
  return svg;
}

export interface HistogramOptions {
  /** 10%, 5%, 1% critical values from the bootstrap test payload. */
  criticalValues?: [number, number, number];
  /** Observed statistic; clamped to the right edge when off scale. */
  observed?: number | string;
}

/**
 * Bootstrap null distribution as pre-binned [midpoint, count] pairs from
 * the report payload, with dashed critical-value markers.
 */
export function bootstrapHistogram(bins: Series, options: HistogramOptions = {}): SVGSVGElement {
  const svg = svgEl("svg", {
    viewBox: `0 0 ${WIDTH} ${HEIGHT}`,
    class: "chart bootstrap-histogram",
    role: "img",
  });
  if (bins.length === 0) return svg;

  const mids = bins.map((b) => b[0]);
  const counts = bins.map((b) => b[1]);
  const step = bins.length > 1 ? mids[1] - mids[0] : 1;
  const xMin = mids[0] - step / 2;
  const cvs = options.criticalValues ?? [];
  const xMax = Math.max(mids[mids.length - 1] + step / 2, ...cvs);
  const sx = linearScale(xMin, xMax, PAD.left, WIDTH - PAD.right);
  const sy = linearScale(0, Math.max(...counts), HEIGHT - PAD.bottom, PAD.top);

  for (const [mid, count] of bins) {
    svg.append(
      svgEl("rect", {
        x: sx(mid - step / 2) + 1,
        y: sy(count),
        width: Math.max(sx(mid + step / 2) - sx(mid - step / 2) - 2, 1),
        height: HEIGHT - PAD.bottom - sy(count),
        class: "hist-bar",
        "data-count": count,
      }),
    );
  }

  const levels = ["10%", "5%", "1%"];
  cvs.forEach((cv, i) => {
    svg.append(
      svgEl("line", {
        x1: sx(cv),
        x2: sx(cv),
        y1: PAD.top,
        y2: HEIGHT - PAD.bottom,
        class: "critical-marker",
        "data-level": levels[i],
        "data-value": cv,
      }),
    );
    svg.append(axisLabel(sx(cv), PAD.top - 2, levels[i]));
  });

  if (options.observed !== undefined) {
    const raw = options.observed;
    const numeric = typeof raw === "number" ? raw : Number.POSITIVE_INFINITY;
    const clamped = Math.min(sx(numeric), WIDTH - PAD.right);
    svg.append(
      svgEl("line", {
        x1: clamped,
        x2: clamped,
        y1: PAD.top,
        y2: HEIGHT - PAD.bottom,
        class: "observed-marker",
        "data-observed": String(raw),
      }),
    );
  }

  svg.append(axisLabel(WIDTH / 2, HEIGHT - 6, "bootstrap F"));
  svg.append(axisLabel(14, HEIGHT / 2, "count"));
  return svg;
}

import type { ParcelSeries } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const WIDTH = 640;
const HEIGHT = 220;
const MARGIN = { left: 46, right: 12, top: 12, bottom: 26 };

function svgEl<K extends keyof SVGElementTagNameMap>(
  doc: Document,
  tag: K,
  attrs: Record<string, string>,
): SVGElementTagNameMap[K] {
  const el = doc.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    el.setAttribute(key, value);
  }
  return el;
}

const SERIES_COLORS = ["#1c6e3c", "#b3541e", "#2a5b8f", "#7b3f8c", "#8a7a1d"];

/**
 * Ratio-over-time line chart: one polyline and one circle per sample for each
 * parcel, with growth-stage labels where samples carry them. Values are
 * plotted exactly as delivered by the API; no rescaling beyond the pixel
 * projection.
 */
export function buildSeriesChart(doc: Document, parcels: ParcelSeries[]): SVGSVGElement {
  const svg = svgEl(doc, "svg", {
    viewBox: `0 0 ${WIDTH} ${HEIGHT}`,
    width: String(WIDTH),
    height: String(HEIGHT),
    class: "series-chart",
  });

  const samples = parcels.flatMap((p) => p.samples);
  if (samples.length === 0) {
    const note = svgEl(doc, "text", { x: "20", y: "30", class: "chart-empty" });
    note.textContent = "no samples in the season window";
    svg.appendChild(note);
    return svg;
  }

  const times = samples.map((s) => Date.parse(s.timestamp));
  const ratios = samples.map((s) => s.ratio);
  const tMin = Math.min(...times);
  const tMax = Math.max(...times);
  const rMin = Math.min(...ratios);
  const rMax = Math.max(...ratios);
  const tSpan = tMax - tMin || 1;
  const rSpan = rMax - rMin || 1;

  const x = (t: number) =>
    MARGIN.left + ((t - tMin) / tSpan) * (WIDTH - MARGIN.left - MARGIN.right);
  const y = (r: number) =>
    HEIGHT - MARGIN.bottom - ((r - rMin) / rSpan) * (HEIGHT - MARGIN.top - MARGIN.bottom);

  const axis = svgEl(doc, "g", { class: "chart-axis" });
  axis.appendChild(
    svgEl(doc, "line", {
      x1: String(MARGIN.left), y1: String(HEIGHT - MARGIN.bottom),
      x2: String(WIDTH - MARGIN.right), y2: String(HEIGHT - MARGIN.bottom),
      stroke: "#667",
    }),
  );
  axis.appendChild(
    svgEl(doc, "line", {
      x1: String(MARGIN.left), y1: String(MARGIN.top),
      x2: String(MARGIN.left), y2: String(HEIGHT - MARGIN.bottom),
      stroke: "#667",
    }),
  );
  for (const r of [rMin, rMax]) {
    const label = svgEl(doc, "text", {
      x: "4", y: String(y(r) + 4), class: "chart-tick",
    });
    label.textContent = String(r);
    axis.appendChild(label);
  }
  svg.appendChild(axis);

  parcels.forEach((parcel, i) => {
    const color = SERIES_COLORS[i % SERIES_COLORS.length];
    const group = svgEl(doc, "g", { class: "series", "data-parcel-id": parcel.parcel_id });
    if (parcel.samples.length > 1) {
      const points = parcel.samples
        .map((s) => `${x(Date.parse(s.timestamp))},${y(s.ratio)}`)
        .join(" ");
      group.appendChild(
        svgEl(doc, "polyline", { points, fill: "none", stroke: color, "stroke-width": "1.5" }),
      );
    }
    for (const sample of parcel.samples) {
      const cx = x(Date.parse(sample.timestamp));
      const cy = y(sample.ratio);
      const dot = svgEl(doc, "circle", {
        cx: String(cx), cy: String(cy), r: "3", fill: color,
        class: "sample-dot", "data-scene-id": sample.scene_id,
      });
      const title = svgEl(doc, "title", {});
      title.textContent = `${parcel.parcel_id} ${sample.timestamp} ratio ${sample.ratio}`;
      dot.appendChild(title);
      group.appendChild(dot);
      if (sample.stage !== null) {
        const stage = svgEl(doc, "text", {
          x: String(cx + 4), y: String(cy - 6), class: "stage-label",
        });
        stage.textContent = `GS ${sample.stage}`;
        group.appendChild(stage);
      }
    }
    svg.appendChild(group);
  });

  return svg;
}

/** Raw numbers table under the chart; cells show API values verbatim. */
export function buildSeriesTable(doc: Document, parcels: ParcelSeries[]): HTMLTableElement {
  const table = doc.createElement("table");
  table.className = "series-table";
  const head = doc.createElement("tr");
  for (const caption of ["parcel", "timestamp", "scene", "VV dB", "VH dB", "ratio", "pixels", "stage"]) {
    const th = doc.createElement("th");
    th.textContent = caption;
    head.appendChild(th);
  }
  table.appendChild(head);
  for (const parcel of parcels) {
    for (const s of parcel.samples) {
      const row = doc.createElement("tr");
      const cells = [
        parcel.parcel_id, s.timestamp, s.scene_id,
        String(s.mean_vv_db), String(s.mean_vh_db), String(s.ratio),
        String(s.pixel_count), s.stage === null ? "" : String(s.stage),
      ];
      for (const text of cells) {
        const td = doc.createElement("td");
        td.textContent = text;
        row.appendChild(td);
      }
      table.appendChild(row);
    }
  }
  return table;
}

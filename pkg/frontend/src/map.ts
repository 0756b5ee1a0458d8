import { PolygonDraft, Viewport } from "./draft.js";

// Slippy-tile template for the map background, e.g.
// "https://tile.example/{z}/{x}/{y}.png"; empty keeps the offline blank
// canvas with a graticule, which is also what tests run against.
export const TILE_URL = "";

/**
 * Click-to-draw AOI widget. Left click adds a vertex, double click (or the
 * close button wired by the page) closes the ring. Painting degrades to a
 * no-op where no 2d context exists (jsdom), while the drawing state keeps
 * working through synthetic events.
 */
export class MapCanvas {
  readonly draft = new PolygonDraft();
  readonly viewport: Viewport;
  onChange: (() => void) | null = null;
  private readonly ctx: CanvasRenderingContext2D | null;

  constructor(private readonly canvas: HTMLCanvasElement) {
    this.viewport = new Viewport(10.1, 55.1, 0.2 / 360, canvas.width, canvas.height);
    this.ctx = canvas.getContext ? canvas.getContext("2d") : null;
    canvas.addEventListener("click", (ev) => this.handleClick(ev as MouseEvent));
    canvas.addEventListener("dblclick", () => this.closeRing());
    this.render();
  }

  private handleClick(ev: MouseEvent): void {
    const rect = this.canvas.getBoundingClientRect();
    const [lon, lat] = this.viewport.toLonLat(ev.clientX - rect.left, ev.clientY - rect.top);
    this.draft.addVertex(lon, lat);
    this.render();
    this.onChange?.();
  }

  closeRing(): boolean {
    const ok = this.draft.close();
    this.render();
    this.onChange?.();
    return ok;
  }

  reset(): void {
    this.draft.reset();
    this.render();
    this.onChange?.();
  }

  private render(): void {
    const ctx = this.ctx;
    if (!ctx) return;
    const { width, height } = this.canvas;
    ctx.fillStyle = "#eef3f6";
    ctx.fillRect(0, 0, width, height);

    // graticule every 0.05 degrees
    ctx.strokeStyle = "#cfdbe2";
    ctx.lineWidth = 1;
    const step = 0.05;
    const [lonMin, latMax] = this.viewport.toLonLat(0, 0);
    const [lonMax, latMin] = this.viewport.toLonLat(width, height);
    for (let lon = Math.ceil(lonMin / step) * step; lon <= lonMax; lon += step) {
      const [x] = this.viewport.toPixel(lon, 0);
      ctx.beginPath();
      ctx.moveTo(x, 0);
      ctx.lineTo(x, height);
      ctx.stroke();
    }
    for (let lat = Math.ceil(latMin / step) * step; lat <= latMax; lat += step) {
      const [, y] = this.viewport.toPixel(0, lat);
      ctx.beginPath();
      ctx.moveTo(0, y);
      ctx.lineTo(width, y);
      ctx.stroke();
    }

    const points = this.draft.vertices.map(([lon, lat]) => this.viewport.toPixel(lon, lat));
    if (points.length === 0) return;
    ctx.strokeStyle = "#1c6e3c";
    ctx.fillStyle = "rgba(46, 139, 87, 0.25)";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(points[0][0], points[0][1]);
    for (const [x, y] of points.slice(1)) {
      ctx.lineTo(x, y);
    }
    if (this.draft.closed) {
      ctx.closePath();
      ctx.fill();
    }
    ctx.stroke();
    for (const [x, y] of points) {
      ctx.beginPath();
      ctx.arc(x, y, 3.5, 0, 2 * Math.PI);
      ctx.fillStyle = "#1c6e3c";
      ctx.fill();
    }
  }
}

import type { GeoJsonPolygon } from "./types.js";

/**
 * Vertex list of the polygon being drawn, kept in lon/lat. Pure state so the
 * map widget stays a thin painting/event layer around it.
 */
export class PolygonDraft {
  vertices: [number, number][] = [];
  closed = false;

  addVertex(lon: number, lat: number): void {
    if (this.closed) return;
    this.vertices.push([lon, lat]);
  }

  /** Closing needs at least a triangle; repeats the first vertex per GeoJSON. */
  close(): boolean {
    if (this.closed || this.vertices.length < 3) return false;
    this.closed = true;
    return true;
  }

  reset(): void {
    this.vertices = [];
    this.closed = false;
  }

  bboxSpans(): { width: number; height: number } | null {
    if (this.vertices.length === 0) return null;
    const lons = this.vertices.map((v) => v[0]);
    const lats = this.vertices.map((v) => v[1]);
    return {
      width: Math.max(...lons) - Math.min(...lons),
      height: Math.max(...lats) - Math.min(...lats),
    };
  }

  toGeoJSON(): GeoJsonPolygon | null {
    if (!this.closed) return null;
    const ring = this.vertices.map(([lon, lat]) => [lon, lat]);
    ring.push([...ring[0]]);
    return { type: "Polygon", coordinates: [ring] };
  }
}

/** Linear lon/lat viewport over a fixed-size canvas. */
export class Viewport {
  constructor(
    public centerLon: number,
    public centerLat: number,
    /** degrees of longitude per canvas pixel */
    public degPerPixel: number,
    public width: number,
    public height: number,
  ) {}

  toLonLat(px: number, py: number): [number, number] {
    return [
      this.centerLon + (px - this.width / 2) * this.degPerPixel,
      this.centerLat - (py - this.height / 2) * this.degPerPixel,
    ];
  }

  toPixel(lon: number, lat: number): [number, number] {
    return [
      this.width / 2 + (lon - this.centerLon) / this.degPerPixel,
      this.height / 2 - (lat - this.centerLat) / this.degPerPixel,
    ];
  }
}

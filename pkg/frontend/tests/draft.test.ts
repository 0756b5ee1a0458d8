import { describe, expect, it } from "vitest";

import { PolygonDraft, Viewport } from "../src/draft.js";

describe("PolygonDraft", () => {
  it("closes only with three or more vertices", () => {
    const draft = new PolygonDraft();
    draft.addVertex(10.0, 55.0);
    draft.addVertex(10.1, 55.0);
    expect(draft.close()).toBe(false);
    draft.addVertex(10.1, 55.1);
    expect(draft.close()).toBe(true);
    expect(draft.closed).toBe(true);
  });

  it("ignores vertices after closing and resets cleanly", () => {
    const draft = new PolygonDraft();
    draft.addVertex(0, 0);
    draft.addVertex(1, 0);
    draft.addVertex(1, 1);
    draft.close();
    draft.addVertex(5, 5);
    expect(draft.vertices.length).toBe(3);
    draft.reset();
    expect(draft.vertices).toEqual([]);
    expect(draft.closed).toBe(false);
  });

  it("emits a closed GeoJSON ring", () => {
    const draft = new PolygonDraft();
    draft.addVertex(10.0, 55.0);
    draft.addVertex(10.2, 55.0);
    draft.addVertex(10.2, 55.2);
    draft.addVertex(10.0, 55.2);
    expect(draft.toGeoJSON()).toBeNull(); // not closed yet
    draft.close();
    const geo = draft.toGeoJSON();
    expect(geo?.type).toBe("Polygon");
    const ring = geo!.coordinates[0];
    expect(ring.length).toBe(5);
    expect(ring[0]).toEqual(ring[ring.length - 1]);
  });

  it("reports bbox spans", () => {
    const draft = new PolygonDraft();
    expect(draft.bboxSpans()).toBeNull();
    draft.addVertex(10.0, 55.0);
    draft.addVertex(10.3, 55.1);
    expect(draft.bboxSpans()).toEqual({ width: expect.closeTo(0.3, 10), height: expect.closeTo(0.1, 10) });
  });
});

describe("Viewport", () => {
  it("round-trips pixel and lon/lat", () => {
    const vp = new Viewport(10.1, 55.1, 0.001, 500, 400);
    const [lon, lat] = vp.toLonLat(100, 50);
    const [px, py] = vp.toPixel(lon, lat);
    expect(px).toBeCloseTo(100, 6);
    expect(py).toBeCloseTo(50, 6);
  });

  it("maps the canvas center to the viewport center", () => {
    const vp = new Viewport(10.1, 55.1, 0.001, 500, 400);
    expect(vp.toLonLat(250, 200)).toEqual([10.1, 55.1]);
  });
});

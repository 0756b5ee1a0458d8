"""QGIS project descriptor generation for result bundles.

Emits a deterministic subset of the QGIS 3 project XML: one maplayer entry
per bundled raster with per-band min/max contrast ranges, plus the parcel
vector layer. All datasource paths are bundle-relative.
"""
from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # "raster" | "vector"
    path: str  # bundle-relative
    name: str
    band_ranges: tuple[tuple[float, float], ...] = field(default_factory=tuple)


def _contrast(parent: ET.Element, band: int, lo: float, hi: float) -> None:
    enhancement = ET.SubElement(parent, "contrastEnhancement", {"band": str(band)})
    ET.SubElement(enhancement, "minValue").text = repr(lo)
    ET.SubElement(enhancement, "maxValue").text = repr(hi)
    ET.SubElement(enhancement, "algorithm").text = "StretchToMinimumMaximum"


def build_project_descriptor(layers: list[LayerSpec], crs_epsg: int) -> bytes:
    """Serialize the project document; identical inputs give identical bytes."""
    root = ET.Element("qgis", {"projectname": "sarfields-bundle", "version": "3.28"})
    crs = ET.SubElement(root, "projectCrs")
    ET.SubElement(crs, "spatialrefsys").append(_text_el("authid", f"EPSG:{crs_epsg}"))

    tree_root = ET.SubElement(root, "layer-tree-group")
    project_layers = ET.SubElement(root, "projectlayers")
    for i, layer in enumerate(layers):
        layer_id = f"layer_{i}"
        ET.SubElement(
            tree_root,
            "layer-tree-layer",
            {"id": layer_id, "name": layer.name, "source": layer.path, "checked": "Qt::Checked"},
        )
        maplayer = ET.SubElement(
            project_layers,
            "maplayer",
            {"type": "raster" if layer.kind == "raster" else "vector"},
        )
        maplayer.append(_text_el("id", layer_id))
        maplayer.append(_text_el("datasource", layer.path))
        maplayer.append(_text_el("layername", layer.name))
        provider = ET.SubElement(maplayer, "provider")
        provider.text = "gdal" if layer.kind == "raster" else "ogr"
        if layer.kind == "raster" and layer.band_ranges:
            pipe = ET.SubElement(maplayer, "pipe")
            renderer_type = "multibandcolor" if len(layer.band_ranges) >= 3 else "singlebandgray"
            attrs = {"type": renderer_type}
            if renderer_type == "multibandcolor":
                attrs.update({"redBand": "1", "greenBand": "2", "blueBand": "3"})
            else:
                attrs["grayBand"] = "1"
            renderer = ET.SubElement(pipe, "rasterrenderer", attrs)
            for band, (lo, hi) in enumerate(layer.band_ranges, start=1):
                _contrast(renderer, band, lo, hi)

    body = ET.tostring(root, encoding="utf-8")
    return b'<?xml version="1.0" encoding="utf-8"?>\n' + body + b"\n"


def _text_el(tag: str, text: str) -> ET.Element:
    el = ET.Element(tag)
    el.text = text
    return el


def referenced_paths(document: bytes) -> list[str]:
    """Datasource paths referenced by a descriptor (used by bundle checks)."""
    root = ET.fromstring(document)
    return [el.text for el in root.iter("datasource") if el.text]

"""Layered document model: parsing, grouping, compositing, serialization.

A document is a canvas plus a z-ordered element list.  Elements fall into
three palette groups: image-like elements carry PNG rasters, svg-like
elements and backgrounds carry solid fills, text elements carry declared
fill colors.  Compositing for palette extraction is deliberately simple: it
collects the pixel multiset of a group, ignoring z-order and blending.
"""

from __future__ import annotations

import base64
import binascii
import io
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .color import RgbColor

__all__ = [
    "DocumentParseError",
    "RasterImage",
    "Element",
    "GraphicDocument",
    "IMAGE_KINDS",
    "SVG_KINDS",
    "TEXT_KINDS",
    "GROUP_NAMES",
    "parse_document",
    "serialize_document",
    "group_elements",
    "composite_group",
    "collect_text_colors",
    "replace_image_element",
    "render_preview",
]

IMAGE_KINDS = frozenset({"imageElement", "maskElement"})
SVG_KINDS = frozenset({"coloredBackground", "svgElement"})
TEXT_KINDS = frozenset({"textElement"})
ALL_KINDS = IMAGE_KINDS | SVG_KINDS | TEXT_KINDS
GROUP_NAMES = ("image", "svg", "text")

# elements more transparent than this contribute nothing anywhere
OPACITY_FLOOR = 0.05


class DocumentParseError(ValueError):
    """Schema violation, annotated with the JSON path that failed."""

    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path


class RasterImage:
    """Decoded RGB pixels, row major.  Alpha, if present, is dropped."""

    def __init__(self, pixels: np.ndarray):
        arr = np.asarray(pixels)
        if arr.ndim != 3 or arr.shape[2] not in (3, 4) or arr.dtype != np.uint8:
            raise ValueError("raster must be HxWx3 or HxWx4 uint8")
        self.pixels = np.ascontiguousarray(arr[:, :, :3])

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def from_png(cls, data: bytes) -> "RasterImage":
        try:
            img = Image.open(io.BytesIO(data))
            img.load()
        except Exception as exc:
            raise ValueError(f"not a decodable image: {exc}") from exc
        if img.format != "PNG":
            raise ValueError(f"raster must be PNG, got {img.format}")
        return cls(np.asarray(img.convert("RGBA")))

    def to_png(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.pixels, mode="RGB").save(buf, format="PNG")
        return buf.getvalue()

    def __eq__(self, other):
        return isinstance(other, RasterImage) and np.array_equal(self.pixels, other.pixels)

    def __repr__(self):
        return f"RasterImage({self.width}x{self.height})"


@dataclass(frozen=True)
class Element:
    id: str
    kind: str
    x: float
    y: float
    w: float
    h: float
    opacity: float = 1.0
    colors: tuple[RgbColor, ...] = ()
    raster: RasterImage | None = None

    @property
    def group(self) -> str:
        if self.kind in IMAGE_KINDS:
            return "image"
        if self.kind in SVG_KINDS:
            return "svg"
        return "text"

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def visible(self) -> bool:
        return self.opacity >= OPACITY_FLOOR and self.w > 0 and self.h > 0


@dataclass(frozen=True)
class GraphicDocument:
    width: int
    height: int
    elements: tuple[Element, ...]

    def element(self, element_id: str) -> Element:
        for el in self.elements:
            if el.id == element_id:
                return el
        raise KeyError(element_id)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def _require(obj, key, path):
    if not isinstance(obj, dict) or key not in obj:
        raise DocumentParseError(f"missing required key {key!r}", path)
    return obj[key]


def _number(value, path, minimum=None):
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise DocumentParseError(f"expected a number, got {value!r}", path)
    if minimum is not None and value < minimum:
        raise DocumentParseError(f"value {value} below minimum {minimum}", path)
    return float(value)


def _decode_raster(value, path, base_dir):
    if isinstance(value, str):
        if value.startswith("data:"):
            value = value.split(",", 1)[-1]
        try:
            data = base64.b64decode(value, validate=True)
        except (binascii.Error, ValueError):
            # not base64: treat as a relative path
            if base_dir is None:
                raise DocumentParseError(
                    "raster path given but no base directory to resolve it", path
                )
            target = Path(base_dir) / value
            if not target.is_file():
                raise DocumentParseError(f"raster file not found: {value}", path)
            data = target.read_bytes()
    else:
        raise DocumentParseError("raster must be a base64 string or relative path", path)
    try:
        return RasterImage.from_png(data)
    except ValueError as exc:
        raise DocumentParseError(str(exc), path) from exc


def _parse_element(raw, index, canvas_w, canvas_h, base_dir):
    path = f"$.elements[{index}]"
    el_id = _require(raw, "id", path)
    if not isinstance(el_id, str) or not el_id:
        raise DocumentParseError("id must be a non-empty string", f"{path}.id")
    kind = _require(raw, "kind", path)
    if kind not in ALL_KINDS:
        raise DocumentParseError(f"unknown kind {kind!r}", f"{path}.kind")
    pos = _require(raw, "position", path)
    x = _number(_require(pos, "x", f"{path}.position"), f"{path}.position.x")
    y = _number(_require(pos, "y", f"{path}.position"), f"{path}.position.y")
    size = _require(raw, "size", path)
    w = _number(_require(size, "w", f"{path}.size"), f"{path}.size.w", minimum=0.0)
    h = _number(_require(size, "h", f"{path}.size"), f"{path}.size.h", minimum=0.0)
    opacity = _number(raw.get("opacity", 1.0), f"{path}.opacity")
    if not 0.0 <= opacity <= 1.0:
        raise DocumentParseError(f"opacity {opacity} outside [0, 1]", f"{path}.opacity")

    colors = []
    for j, hex_text in enumerate(raw.get("colors", [])):
        try:
            colors.append(RgbColor.from_hex(hex_text))
        except (ValueError, TypeError) as exc:
            raise DocumentParseError(str(exc), f"{path}.colors[{j}]") from exc

    raster = None
    if "raster" in raw and raw["raster"] is not None:
        raster = _decode_raster(raw["raster"], f"{path}.raster", base_dir)

    if kind in IMAGE_KINDS and raster is None:
        raise DocumentParseError(f"{kind} requires a raster", f"{path}.raster")
    if kind not in IMAGE_KINDS and raster is not None:
        raise DocumentParseError(f"{kind} cannot carry a raster", f"{path}.raster")
    if kind in (SVG_KINDS | TEXT_KINDS) and not colors:
        raise DocumentParseError(f"{kind} requires at least one color", f"{path}.colors")

    # clamp geometry into the canvas
    x = min(max(x, 0.0), canvas_w)
    y = min(max(y, 0.0), canvas_h)
    w = min(w, canvas_w - x)
    h = min(h, canvas_h - y)

    return Element(el_id, kind, x, y, w, h, opacity, tuple(colors), raster)


def _from_crello_mapping(data):
    """Rewrite a Crello-style export into the native schema (see README)."""
    kind_map = {
        "imageElement": "imageElement",
        "maskElement": "maskElement",
        "svgElement": "svgElement",
        "coloredBackground": "coloredBackground",
        "textElement": "textElement",
        "image": "imageElement",
        "mask": "maskElement",
        "svg": "svgElement",
        "background": "coloredBackground",
        "text": "textElement",
    }
    elements = []
    for i, el in enumerate(data.get("elements", [])):
        if not isinstance(el, dict):
            raise DocumentParseError("element must be an object", f"$.elements[{i}]")
        etype = el.get("type")
        if etype not in kind_map:
            raise DocumentParseError(f"unknown type {etype!r}", f"$.elements[{i}].type")
        color = el.get("color")
        colors = [color] if isinstance(color, str) else list(color or [])
        out = {
            "id": el.get("id", f"element-{i}"),
            "kind": kind_map[etype],
            "position": {"x": el.get("left", 0), "y": el.get("top", 0)},
            "size": {"w": el.get("width", 0), "h": el.get("height", 0)},
            "opacity": el.get("opacity", 1.0),
            "colors": colors,
        }
        if "image" in el:
            out["raster"] = el["image"]
        elements.append(out)
    return {
        "canvas": {"width": data.get("canvas_width"), "height": data.get("canvas_height")},
        "elements": elements,
    }


def parse_document(data, base_dir=None) -> GraphicDocument:
    """Parse a document from JSON text/bytes or an already-decoded mapping.

    `base_dir` resolves relative raster paths.  Raises DocumentParseError
    with the offending JSON path on any schema violation.
    """
    if isinstance(data, (bytes, str)):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise DocumentParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise DocumentParseError("document must be a JSON object")

    if "canvas_width" in data and "canvas" not in data:
        data = _from_crello_mapping(data)

    canvas = _require(data, "canvas", "$")
    width = _number(_require(canvas, "width", "$.canvas"), "$.canvas.width", minimum=1)
    height = _number(_require(canvas, "height", "$.canvas"), "$.canvas.height", minimum=1)
    if width != int(width) or height != int(height):
        raise DocumentParseError("canvas dimensions must be integers", "$.canvas")

    raw_elements = _require(data, "elements", "$")
    if not isinstance(raw_elements, list) or not raw_elements:
        raise DocumentParseError("elements must be a non-empty array", "$.elements")

    elements = []
    seen_ids = set()
    for i, raw in enumerate(raw_elements):
        el = _parse_element(raw, i, width, height, base_dir)
        if el.id in seen_ids:
            raise DocumentParseError(f"duplicate element id {el.id!r}", f"$.elements[{i}].id")
        seen_ids.add(el.id)
        elements.append(el)

    return GraphicDocument(int(width), int(height), tuple(elements))


def serialize_document(doc: GraphicDocument) -> dict:
    """The native JSON-ready mapping; rasters become base64 PNG strings."""
    elements = []
    for el in doc.elements:
        item = {
            "id": el.id,
            "kind": el.kind,
            "position": {"x": el.x, "y": el.y},
            "size": {"w": el.w, "h": el.h},
            "opacity": el.opacity,
            "colors": [c.to_hex() for c in el.colors],
        }
        if el.raster is not None:
            item["raster"] = base64.b64encode(el.raster.to_png()).decode("ascii")
        elements.append(item)
    return {
        "canvas": {"width": doc.width, "height": doc.height},
        "elements": elements,
    }


# ---------------------------------------------------------------------------
# Grouping and compositing
# ---------------------------------------------------------------------------

def group_elements(doc: GraphicDocument) -> dict[str, list[Element]]:
    groups: dict[str, list[Element]] = {name: [] for name in GROUP_NAMES}
    for el in doc.elements:
        groups[el.group].append(el)
    return groups


def _resample_nearest(pixels: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    in_h, in_w = pixels.shape[:2]
    rows = np.minimum((np.arange(out_h) + 0.5) * in_h / out_h, in_h - 1).astype(int)
    cols = np.minimum((np.arange(out_w) + 0.5) * in_w / out_w, in_w - 1).astype(int)
    return pixels[rows][:, cols]


def composite_group(elements) -> np.ndarray:
    """Pixel multiset of an image or svg group as an (n, 3) uint8 array.

    Image-like elements contribute their raster resampled (nearest neighbor)
    to the element's rendered size.  Solid fills contribute
    round(area)/len(colors) pixels per declared color.  Z-order and blending
    are ignored on purpose; elements below the opacity floor are skipped.
    """
    chunks = []
    for el in elements:
        if not el.visible:
            continue
        if el.kind in TEXT_KINDS:
            raise ValueError("text elements have no pixel compositing")
        if el.kind in IMAGE_KINDS:
            out_w = max(1, round(el.w))
            out_h = max(1, round(el.h))
            grid = _resample_nearest(el.raster.pixels, out_w, out_h)
            chunks.append(grid.reshape(-1, 3))
        else:
            total = int(round(el.area))
            if total <= 0:
                continue
            n = len(el.colors)
            base, extra = divmod(total, n)
            for j, c in enumerate(el.colors):
                count = base + (1 if j < extra else 0)
                if count:
                    chunks.append(
                        np.tile(np.array([c.r, c.g, c.b], dtype=np.uint8), (count, 1))
                    )
    if not chunks:
        return np.zeros((0, 3), dtype=np.uint8)
    return np.concatenate(chunks, axis=0)


def collect_text_colors(doc: GraphicDocument) -> list[tuple[RgbColor, float]]:
    """Declared text fills with area-derived weights.

    Each visible text element spreads its area evenly over its declared
    colors, so heavier text blocks dominate the palette ordering.
    """
    out = []
    for el in doc.elements:
        if el.kind in TEXT_KINDS and el.visible:
            share = el.area / len(el.colors)
            for c in el.colors:
                out.append((c, share))
    return out


def replace_image_element(doc: GraphicDocument, element_id: str, raster: RasterImage) -> GraphicDocument:
    """Swap the raster of an image-like element, keeping its geometry."""
    found = False
    elements = []
    for el in doc.elements:
        if el.id == element_id:
            if el.kind not in IMAGE_KINDS:
                raise ValueError(f"element {element_id!r} is {el.kind}, not an image")
            elements.append(replace(el, raster=raster))
            found = True
        else:
            elements.append(el)
    if not found:
        raise KeyError(element_id)
    return GraphicDocument(doc.width, doc.height, tuple(elements))


def render_preview(doc: GraphicDocument) -> RasterImage:
    """Paint elements in z-order at canvas resolution.

    This is the same simplified model used for palette extraction: solid
    elements fill their rectangle (multi-color fills as equal vertical
    bands), image elements paste their resampled raster.  Good enough to
    preview recolors, not a fidelity renderer.
    """
    canvas = np.full((doc.height, doc.width, 3), 255, dtype=np.uint8)
    for el in doc.elements:
        if not el.visible:
            continue
        x0, y0 = int(round(el.x)), int(round(el.y))
        x1 = min(doc.width, x0 + max(1, int(round(el.w))))
        y1 = min(doc.height, y0 + max(1, int(round(el.h))))
        if x1 <= x0 or y1 <= y0:
            continue
        if el.kind in IMAGE_KINDS:
            canvas[y0:y1, x0:x1] = _resample_nearest(el.raster.pixels, x1 - x0, y1 - y0)
        else:
            n = len(el.colors)
            bounds = np.linspace(x0, x1, n + 1).round().astype(int)
            for j, c in enumerate(el.colors):
                canvas[y0:y1, bounds[j]:bounds[j + 1]] = (c.r, c.g, c.b)
    return RasterImage(canvas)

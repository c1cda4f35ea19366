"""Apply a chosen color to a palette slot across a document.

Vector elements (fills, text) move by a fraction of the source-to-target
offset, with a weight that falls off linearly in CIEDE2000 distance from
the slot's current color, so an exact match lands exactly on the target
and unrelated colors stay put.  Rasters instead shift each pixel by its
soft assignment to the edited centroids among the image palette, which
preserves shading and texture.  Choosing a slot's current code is a no-op.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .color import (
    ColorCode,
    LabColor,
    RgbColor,
    ciede2000,
    display_rgb,
    lab_array_to_srgb,
    lab_to_srgb,
    quantize_lab,
    srgb_array_to_lab,
    srgb_to_lab,
)
from .document import GraphicDocument, RasterImage, group_elements
from .palette import extract_multi_palette
from .recommend import SlotRecommendation, SlotRef

__all__ = [
    "FALLOFF",
    "ASSIGN_POWER",
    "recolor_fill",
    "recolor_raster",
    "apply_color",
    "apply_recommendation",
]

FALLOFF = 20.0  # CIEDE2000 distance at which a fill stops following the slot
ASSIGN_POWER = 4  # sharpness of the raster pixel-to-centroid assignment


def recolor_fill(color: RgbColor, source: LabColor, target: LabColor,
                 falloff: float = FALLOFF) -> RgbColor:
    """Shift one explicit color by its weighted share of the slot's move."""
    if target == source:
        return color
    lab = srgb_to_lab(color)
    weight = max(0.0, 1.0 - ciede2000(lab, source) / falloff)
    if weight == 0.0:
        return color
    shifted = LabColor(
        lab.l + weight * (target.l - source.l),
        lab.a + weight * (target.a - source.a),
        lab.b + weight * (target.b - source.b),
    )
    return lab_to_srgb(shifted)


def recolor_raster(raster: RasterImage, centroids: np.ndarray, edits,
                   power: int = ASSIGN_POWER) -> RasterImage:
    """Shift raster pixels by their soft assignment to edited centroids.

    ``centroids`` is the (k, 3) CIELAB palette of the element's group and
    ``edits`` lists (centroid index, replacement LabColor) pairs.  A pixel
    sitting exactly on a centroid follows that centroid alone; any other
    pixel splits each edit's offset by inverse distance to the power among
    all centroids.  Edits that keep a centroid in place contribute nothing,
    so an empty or all-identity edit list returns the raster unchanged.
    """
    centroids = np.asarray(centroids, dtype=np.float64)
    deltas = []
    for index, target in edits:
        if not 0 <= index < len(centroids):
            raise ValueError("edited centroid index out of range")
        delta = np.asarray([target.l, target.a, target.b]) - centroids[index]
        if delta.any():
            deltas.append((index, delta))
    if not deltas:
        return raster

    lab = srgb_array_to_lab(raster.pixels.reshape(-1, 3))
    dist = np.linalg.norm(lab[:, None, :] - centroids[None, :, :], axis=2)
    with np.errstate(divide="ignore"):
        inv = dist ** float(-power)
    on_centroid = np.isinf(inv).any(axis=1)
    inv[on_centroid] = np.isinf(inv[on_centroid])  # those pixels belong there alone
    weights = inv / inv.sum(axis=1, keepdims=True)

    shifted = lab
    for index, delta in deltas:
        shifted = shifted + weights[:, index : index + 1] * delta[None, :]
    out = lab_array_to_srgb(shifted).reshape(raster.pixels.shape[:2] + (3,))
    return RasterImage(out)


def apply_color(doc: GraphicDocument, slot, code: ColorCode,
                falloff: float = FALLOFF, seed: int = 0) -> GraphicDocument:
    """Return a copy of the document with one palette slot recolored.

    The target color is the chosen code's displayable representative, so
    re-extracting palettes afterwards reproduces the code exactly on clean
    documents.  Asking for the code the slot already has keeps the slot's
    own color as the target, which makes the edit a no-op.
    """
    slot = slot if isinstance(slot, SlotRef) else SlotRef.parse(slot)
    palettes = extract_multi_palette(doc, seed=seed)
    palette = palettes.group(slot.group)
    if slot.slot >= len(palette.colors):
        raise ValueError(f"slot {slot.text()} holds no color in this document")
    source = palette.colors[slot.slot]
    if quantize_lab(source) == code:
        target = source
    else:
        target = srgb_to_lab(display_rgb(code))

    members = {el.id for el in group_elements(doc)[slot.group]}
    replaced = []
    for el in doc.elements:
        if el.id not in members:
            replaced.append(el)
        elif el.raster is not None:
            centroids = np.array([c.as_array() for c in palette.colors])
            raster = recolor_raster(el.raster, centroids, [(slot.slot, target)])
            replaced.append(dataclasses.replace(el, raster=raster))
        else:
            colors = tuple(
                recolor_fill(c, source, target, falloff) for c in el.colors
            )
            replaced.append(dataclasses.replace(el, colors=colors))
    return GraphicDocument(doc.width, doc.height, tuple(replaced))


def apply_recommendation(doc: GraphicDocument, recommendation: SlotRecommendation,
                         rank: int, falloff: float = FALLOFF,
                         seed: int = 0) -> GraphicDocument:
    """Apply the candidate at the given 1-based rank to its slot."""
    if not 1 <= rank <= len(recommendation.candidates):
        raise ValueError(
            f"rank {rank} is out of range for {len(recommendation.candidates)} candidates"
        )
    code = recommendation.candidates[rank - 1].code
    return apply_color(doc, recommendation.slot, code, falloff=falloff, seed=seed)

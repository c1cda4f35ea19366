"""Palette extraction: weighted k-means in CIELAB over composited groups.

Each palette group (image, svg, text) is clustered independently into at
most five colors.  Clustering is plain Lloyd iteration with k-means++
seeding, run as a fixed number of restarts with the best inertia kept, and
is bitwise deterministic for a given seed.  Pixel multisets are collapsed
to distinct colors with counts first, which is equivalent and much faster.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .color import LabColor, RgbColor, lab_to_srgb, srgb_array_to_lab
from .document import GraphicDocument, collect_text_colors, composite_group, group_elements

__all__ = ["Palette", "MultiPalette", "kmeans_lab", "extract_multi_palette"]

MAX_PALETTE = 5
PIXEL_CAP = 65536
RESTARTS = 8
MAX_ITER = 100
SHIFT_TOL = 1e-6


@dataclass(frozen=True)
class Palette:
    """Colors of one group, heaviest first; weights sum to 1 (or empty)."""

    colors: tuple[LabColor, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.colors) != len(self.weights):
            raise ValueError("colors and weights must align")
        if len(self.colors) > MAX_PALETTE:
            raise ValueError(f"palette larger than {MAX_PALETTE}")
        if self.weights and not np.isclose(sum(self.weights), 1.0, atol=1e-6):
            raise ValueError("weights must sum to 1")
        if any(self.weights[i] < self.weights[i + 1] - 1e-12 for i in range(len(self.weights) - 1)):
            raise ValueError("palette must be ordered by descending weight")

    def __len__(self):
        return len(self.colors)

    def to_dict(self) -> list[dict]:
        return [
            {"hex": lab_to_srgb(c).to_hex(), "lab": [c.l, c.a, c.b], "weight": w}
            for c, w in zip(self.colors, self.weights)
        ]


@dataclass(frozen=True)
class MultiPalette:
    image: Palette
    svg: Palette
    text: Palette

    def group(self, name: str) -> Palette:
        return getattr(self, name)

    def to_dict(self) -> dict:
        return {
            "image": self.image.to_dict(),
            "svg": self.svg.to_dict(),
            "text": self.text.to_dict(),
        }


def _kmeanspp_seed(points, weights, k, rng):
    """k-means++ starting centroids over weighted points."""
    n = len(points)
    centroids = np.empty((k, points.shape[1]))
    first = rng.choice(n, p=weights / weights.sum())
    centroids[0] = points[first]
    d2 = np.sum((points - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        probs = weights * d2
        total = probs.sum()
        if total <= 0.0:
            # all remaining mass sits on already-chosen points
            idx = rng.choice(n, p=weights / weights.sum())
        else:
            idx = rng.choice(n, p=probs / total)
        centroids[j] = points[idx]
        d2 = np.minimum(d2, np.sum((points - centroids[j]) ** 2, axis=1))
    return centroids


def _lloyd(points, weights, centroids):
    """Iterate assignments/means until centroids stop moving."""
    k = len(centroids)
    for _ in range(MAX_ITER):
        d2 = np.sum((points[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        assign = np.argmin(d2, axis=1)
        new_centroids = centroids.copy()
        for j in range(k):
            member = assign == j
            mass = weights[member].sum()
            if mass > 0.0:
                new_centroids[j] = (weights[member, None] * points[member]).sum(axis=0) / mass
            else:
                # re-seed an empty cluster at the worst-served point
                worst = np.argmax(d2[np.arange(len(points)), assign] * weights)
                new_centroids[j] = points[worst]
        shift = np.max(np.abs(new_centroids - centroids))
        centroids = new_centroids
        if shift < SHIFT_TOL:
            break
    d2 = np.sum((points[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
    assign = np.argmin(d2, axis=1)
    inertia = float((weights * d2[np.arange(len(points)), assign]).sum())
    return centroids, assign, inertia


def kmeans_lab(points, k: int, seed: int, weights=None):
    """Cluster CIELAB points into k centroids.

    Args:
        points: (n, 3) array or list of LabColor; n >= 1.
        k: requested cluster count; silently reduced to the number of
           distinct points when larger.
        seed: RNG seed; identical seeds give identical results.
        weights: optional per-point multiplicities (defaults to 1).

    Returns:
        (centroids, shares, inertia): centroids ordered by descending mass
        share, shares summing to 1, and the weighted within-cluster sum of
        squared distances of the best restart.
    """
    pts = np.asarray(
        [p.as_array() if isinstance(p, LabColor) else p for p in points], dtype=np.float64
    )
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("points must be a non-empty (n, 3) collection")
    w = np.ones(len(pts)) if weights is None else np.asarray(weights, dtype=np.float64)
    if len(w) != len(pts) or np.any(w <= 0):
        raise ValueError("weights must be positive and match points")

    uniq, inverse = np.unique(pts, axis=0, return_inverse=True)
    mass = np.zeros(len(uniq))
    np.add.at(mass, inverse, w)
    k = min(k, len(uniq))
    if k < 1:
        raise ValueError("k must be at least 1")

    best = None
    for r in range(RESTARTS):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(r,)))
        start = _kmeanspp_seed(uniq, mass, k, rng)
        centroids, assign, inertia = _lloyd(uniq, mass, start)
        if best is None or inertia < best[2] - 1e-15:
            best = (centroids, assign, inertia)
    centroids, assign, inertia = best

    shares = np.zeros(k)
    np.add.at(shares, assign, mass)
    shares = shares / mass.sum()
    order = np.lexsort(
        (centroids[:, 2], centroids[:, 1], centroids[:, 0], -shares)
    )
    return centroids[order], shares[order], inertia


def _palette_from_pixels(pixels: np.ndarray, seed: int) -> Palette:
    """Quantize a pixel multiset (n, 3 uint8) down to a palette."""
    if pixels.shape[0] == 0:
        return Palette((), ())
    if pixels.shape[0] > PIXEL_CAP:
        stride = int(np.ceil(pixels.shape[0] / PIXEL_CAP))
        pixels = pixels[::stride]
    uniq, counts = np.unique(pixels, axis=0, return_counts=True)
    labs = srgb_array_to_lab(uniq)
    k = min(MAX_PALETTE, len(uniq))
    centroids, shares, _ = kmeans_lab(labs, k, seed, weights=counts.astype(np.float64))
    return Palette(
        tuple(LabColor(*c) for c in centroids),
        tuple(float(s) for s in shares),
    )


def _palette_from_weighted_colors(pairs, seed: int) -> Palette:
    if not pairs:
        return Palette((), ())
    rgb = np.array([[c.r, c.g, c.b] for c, _ in pairs], dtype=np.float64)
    w = np.array([wt for _, wt in pairs], dtype=np.float64)
    keep = w > 0
    if not np.any(keep):
        return Palette((), ())
    labs = srgb_array_to_lab(rgb[keep])
    k = min(MAX_PALETTE, len(np.unique(labs, axis=0)))
    centroids, shares, _ = kmeans_lab(labs, k, seed, weights=w[keep])
    return Palette(
        tuple(LabColor(*c) for c in centroids),
        tuple(float(s) for s in shares),
    )


def extract_multi_palette(doc: GraphicDocument, seed: int = 0) -> MultiPalette:
    """Extract the three group palettes of a document.

    Deterministic for a (document, seed) pair; each group gets its own
    derived seed so palettes do not shift when another group changes.
    """
    groups = group_elements(doc)
    image = _palette_from_pixels(composite_group(groups["image"]), seed)
    svg = _palette_from_pixels(composite_group(groups["svg"]), seed + 1)
    text = _palette_from_weighted_colors(collect_text_colors(doc), seed + 2)
    return MultiPalette(image, svg, text)

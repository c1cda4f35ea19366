"""Small builders shared across test modules."""

from __future__ import annotations

from chromarec.color import ColorCode, VocabConfig, code_center
from chromarec.palette import MultiPalette, Palette
from chromarec.sequence import ColorSequence, encode_multi_palette


def palette_of(*codes: ColorCode) -> Palette:
    """Palette at the cell centers of the given codes, weights descending."""
    if not codes:
        return Palette((), ())
    colors = tuple(code_center(c) for c in codes)
    raw = [len(codes) - i for i in range(len(codes))]
    total = sum(raw)
    return Palette(colors, tuple(r / total for r in raw))


def multipalette(image, svg, text) -> MultiPalette:
    return MultiPalette(palette_of(*image), palette_of(*svg), palette_of(*text))


def sequence_of(image, svg, text) -> ColorSequence:
    """Encode three lists of codes as one padded 18-token sequence."""
    return encode_multi_palette(multipalette(image, svg, text), VocabConfig())

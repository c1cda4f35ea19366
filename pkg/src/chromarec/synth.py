"""Deterministic synthetic corpus of themed layered documents.

Documents follow one of a fixed set of color themes over a shared layout:
a background plus a shape (svg group), a two-tone photo (image group), and
a headline plus a caption (text group), two colors per group.  Positions
jitter per document; colors and area ratios are fixed per theme, so each
theme maps to exactly one token sequence and an ideal predictor can always
name a single hidden color.

Three theme families shape what the corpus can measure:

* plain themes: six globally unique colors, always identifiable.
* twin pairs: two themes sharing everything except the second image color
  and the second svg color.  Hiding both differing slots at once removes
  the twin identity, so accuracy must fall as more slots are masked.
* crossed pairs: two themes sharing the image palette and the heavy svg
  and text colors.  Masking the designated slot in each (the shape fill in
  one, the caption fill in the other) leaves byte-identical visible color
  bags whose answer differs only by which palette the hidden slot sits in.
  Any predictor blind to palette identity is capped at 0.5 top-1 on these
  cases by symmetry; a palette-aware one can reach 1.0.

Rebuilding with the same rule seed reproduces the corpus bit for bit.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .color import ColorCode, VocabConfig, display_rgb, quantize_lab, srgb_to_lab
from .document import Element, GraphicDocument, RasterImage
from .palette import extract_multi_palette
from .sequence import ColorSequence, MaskedSequence, encode_multi_palette, mask_at, slot_position

__all__ = ["ThemeSpec", "SegmentCase", "SynthCorpus", "synth_corpus"]

CANVAS_W, CANVAS_H = 120, 80
PHOTO_W, PHOTO_H = 48, 32
PHOTO_SPLIT_ROWS = 19  # top tone gets 19 of 32 rows

N_TWIN_PAIRS = 6
N_PLAIN = 4
N_CROSSED_PAIRS = 6


@dataclass(frozen=True)
class ThemeSpec:
    """Fixed color assignment of one theme."""

    name: str
    kind: str  # "plain" | "twin" | "crossed"
    image: tuple[ColorCode, ColorCode]  # (heavy tone, light tone)
    svg: tuple[ColorCode, ColorCode]  # (background, shape)
    text: tuple[ColorCode, ColorCode]  # (headline, caption)
    pair: str | None = None
    probe: tuple[str, int] | None = None  # designated (group, slot) for crossed themes

    def codes(self) -> tuple[ColorCode, ...]:
        return self.image + self.svg + self.text


@dataclass(frozen=True)
class SegmentCase:
    """One palette-identity evaluation case on the test split."""

    masked: MaskedSequence
    position: int
    truth: ColorCode
    theme: str


@dataclass
class SynthCorpus:
    themes: list[ThemeSpec]
    train: list[ColorSequence]
    val: list[ColorSequence]
    test: list[ColorSequence]
    train_docs: list[GraphicDocument] = field(repr=False)
    val_docs: list[GraphicDocument] = field(repr=False)
    test_docs: list[GraphicDocument] = field(repr=False)
    segment_cases: list[SegmentCase] = field(repr=False)
    spec: dict = field(default_factory=dict)


def _color_pool(rng: np.random.Generator) -> list[ColorCode]:
    """Spaced grid codes that keep their cell after an RGB round trip."""
    pool = []
    for li in range(1, 15):
        for ai in range(2, 15, 2):
            for bi in range(2, 15, 2):
                code = ColorCode(li, ai, bi)
                try:
                    rgb = display_rgb(code)
                except ValueError:
                    continue
                if quantize_lab(srgb_to_lab(rgb)) == code:
                    pool.append(code)
    rng.shuffle(pool)
    return pool


def _build_themes(rng: np.random.Generator) -> list[ThemeSpec]:
    pool = iter(_color_pool(rng))

    def take(n):
        out = []
        for _ in range(n):
            try:
                out.append(next(pool))
            except StopIteration:
                raise RuntimeError("color pool exhausted; widen the candidate grid")
        return out

    themes: list[ThemeSpec] = []
    for j in range(N_TWIN_PAIRS):
        i0, i1a, i1b, s0, s1a, s1b, t0, t1 = take(8)
        themes.append(ThemeSpec(f"twin{j}a", "twin", (i0, i1a), (s0, s1a), (t0, t1), pair=f"twin{j}"))
        themes.append(ThemeSpec(f"twin{j}b", "twin", (i0, i1b), (s0, s1b), (t0, t1), pair=f"twin{j}"))
    for j in range(N_PLAIN):
        i0, i1, s0, s1, t0, t1 = take(6)
        themes.append(ThemeSpec(f"plain{j}", "plain", (i0, i1), (s0, s1), (t0, t1)))
    for j in range(N_CROSSED_PAIRS):
        img0, img1, anchor_svg, anchor_text, shared, only_p, only_q = take(7)
        # p hides `only_p` in its shape, q hides `only_q` in its caption;
        # `shared` swaps sides so the visible bags coincide
        themes.append(
            ThemeSpec(
                f"crossed{j}p", "crossed", (img0, img1),
                (anchor_svg, only_p), (anchor_text, shared),
                pair=f"crossed{j}", probe=("svg", 1),
            )
        )
        themes.append(
            ThemeSpec(
                f"crossed{j}q", "crossed", (img0, img1),
                (anchor_svg, shared), (anchor_text, only_q),
                pair=f"crossed{j}", probe=("text", 1),
            )
        )
    return themes


def _photo_raster(top: ColorCode, bottom: ColorCode) -> RasterImage:
    arr = np.empty((PHOTO_H, PHOTO_W, 3), dtype=np.uint8)
    top_rgb = display_rgb(top)
    bottom_rgb = display_rgb(bottom)
    arr[:PHOTO_SPLIT_ROWS] = (top_rgb.r, top_rgb.g, top_rgb.b)
    arr[PHOTO_SPLIT_ROWS:] = (bottom_rgb.r, bottom_rgb.g, bottom_rgb.b)
    return RasterImage(arr)


def _fill(code: ColorCode):
    return (display_rgb(code),)


def _theme_document(theme: ThemeSpec, doc_rng: np.random.Generator, index: int) -> GraphicDocument:
    shape_x = int(doc_rng.integers(0, 79))
    shape_y = int(doc_rng.integers(0, 49))
    photo_x = int(doc_rng.integers(0, CANVAS_W - PHOTO_W + 1))
    photo_y = int(doc_rng.integers(0, CANVAS_H - PHOTO_H + 1))
    head_x = int(doc_rng.integers(0, 79))
    head_y = int(doc_rng.integers(0, 69))
    cap_x = int(doc_rng.integers(0, 89))
    cap_y = int(doc_rng.integers(0, 71))
    elements = (
        Element(f"bg-{index}", "coloredBackground", 0, 0, CANVAS_W, CANVAS_H, 1.0, _fill(theme.svg[0])),
        Element(f"shape-{index}", "svgElement", shape_x, shape_y, 40, 30, 1.0, _fill(theme.svg[1])),
        Element(
            f"photo-{index}", "imageElement", photo_x, photo_y, PHOTO_W, PHOTO_H, 1.0, (),
            _photo_raster(*theme.image),
        ),
        Element(f"headline-{index}", "textElement", head_x, head_y, 40, 10, 1.0, _fill(theme.text[0])),
        Element(f"caption-{index}", "textElement", cap_x, cap_y, 30, 8, 1.0, _fill(theme.text[1])),
    )
    return GraphicDocument(CANVAS_W, CANVAS_H, elements)


def _expected_sequence(theme: ThemeSpec, doc: GraphicDocument, config: VocabConfig) -> ColorSequence:
    seq = encode_multi_palette(extract_multi_palette(doc, seed=0), config)
    want = {
        "image": list(theme.image),
        "svg": list(theme.svg),
        "text": list(theme.text),
    }
    for group, codes in want.items():
        got = seq.palette_codes(group)
        if got != codes:
            raise RuntimeError(
                f"theme {theme.name}: {group} palette came out {got}, planted {codes}"
            )
    return seq


def _verify_crossed_symmetry(themes: list[ThemeSpec]) -> int:
    """Check the bag symmetry that caps bag-only predictors at 0.5."""
    pairs: dict[str, list[ThemeSpec]] = {}
    for t in themes:
        if t.kind == "crossed":
            pairs.setdefault(t.pair, []).append(t)
    for pair in pairs.values():
        assert len(pair) == 2
        bags = []
        answers = []
        for t in pair:
            group, slot = t.probe
            hidden = (t.svg if group == "svg" else t.text)[slot]
            bag = Counter(t.codes())
            bag[hidden] -= 1
            bags.append(+bag)
            answers.append(hidden)
        if bags[0] != bags[1] or answers[0] == answers[1]:
            raise RuntimeError(f"crossed pair broke its symmetry: {pair[0].pair}")
    return len(pairs)


def _split_bounds(count: int) -> tuple[int, int]:
    """Per-theme split boundaries: train below the first, val below the second.

    The last tenth of a theme's documents (rounded, at least one once the
    theme has three) is the test share, the tenth before it the val share,
    so the corpus approaches 80/10/10 as it grows and no split is empty
    for any corpus of at least a hundred documents.
    """
    if count < 3:
        return count, count
    reserve = max(1, (count + 5) // 10)
    return count - 2 * reserve, count - reserve


def synth_corpus(n_docs: int, rule_seed: int, config: VocabConfig = VocabConfig()) -> SynthCorpus:
    """Generate a themed corpus split 80/10/10 with its evaluation cases.

    Documents cycle through all themes, so every theme lands in every split.
    The segment cases come from the crossed themes of the test split only.
    """
    if n_docs < 1:
        raise ValueError("n_docs must be positive")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=rule_seed, spawn_key=(0,)))
    themes = _build_themes(rng)
    n_crossed = _verify_crossed_symmetry(themes)

    sequences: dict[str, list[ColorSequence]] = {"train": [], "val": [], "test": []}
    documents: dict[str, list[GraphicDocument]] = {"train": [], "val": [], "test": []}
    segment_cases: list[SegmentCase] = []
    theme_seq_cache: dict[str, ColorSequence] = {}
    per_theme_count: dict[str, int] = {t.name: 0 for t in themes}
    bounds = {
        themes[t].name: _split_bounds((n_docs - t + len(themes) - 1) // len(themes))
        for t in range(len(themes))
    }

    for index in range(n_docs):
        theme = themes[index % len(themes)]
        doc_rng = np.random.default_rng(
            np.random.SeedSequence(entropy=rule_seed, spawn_key=(1, index))
        )
        doc = _theme_document(theme, doc_rng, index)
        if theme.name in theme_seq_cache:
            seq = theme_seq_cache[theme.name]
        else:
            seq = _expected_sequence(theme, doc, config)
            theme_seq_cache[theme.name] = seq

        j = per_theme_count[theme.name]
        per_theme_count[theme.name] += 1
        to_val, to_test = bounds[theme.name]
        split = "train" if j < to_val else ("val" if j < to_test else "test")
        sequences[split].append(seq)
        documents[split].append(doc)

        if split == "test" and theme.kind == "crossed":
            group, slot = theme.probe
            position = slot_position(group, slot)
            masked = mask_at(seq, [position])
            segment_cases.append(
                SegmentCase(masked, position, masked.targets[0], theme.name)
            )

    spec = {
        "rule_seed": rule_seed,
        "n_docs": n_docs,
        "n_themes": len(themes),
        "splits": {k: len(v) for k, v in sequences.items()},
        "themes": [
            {
                "name": t.name,
                "kind": t.kind,
                "pair": t.pair,
                "image": [c.text() for c in t.image],
                "svg": [c.text() for c in t.svg],
                "text": [c.text() for c in t.text],
            }
            for t in themes
        ],
        "segment_subset": {
            "pairs": n_crossed,
            "cases": len(segment_cases),
            "bag_blind_top1_bound": 0.5,
        },
    }
    return SynthCorpus(
        themes=themes,
        train=sequences["train"],
        val=sequences["val"],
        test=sequences["test"],
        train_docs=documents["train"],
        val_docs=documents["val"],
        test_docs=documents["test"],
        segment_cases=segment_cases,
        spec=spec,
    )

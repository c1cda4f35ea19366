"""Fixed-layout token sequences over multi-palettes, masking, corpus files.

A document becomes one 18-token sequence: three palettes of five color
slots each, every palette closed by a separator.  Slots beyond a palette's
length hold padding.  Segment ids mark the owning palette (1 image, 2 svg,
3 text); padding and separators inherit their palette's segment.  Position
ids are just 0..17.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .color import (
    MASK_TOKEN,
    PAD_TOKEN,
    SEP_TOKEN,
    ColorCode,
    VocabConfig,
    Vocabulary,
    quantize_lab,
)
from .palette import MultiPalette

__all__ = [
    "SLOTS_PER_PALETTE",
    "PALETTE_SPAN",
    "SEQUENCE_LENGTH",
    "GROUP_ORDER",
    "Token",
    "ColorSequence",
    "MaskedSequence",
    "slot_position",
    "position_slot",
    "encode_multi_palette",
    "apply_masking",
    "mask_at",
    "token_ids",
    "save_corpus",
    "load_corpus",
]

SLOTS_PER_PALETTE = 5
PALETTE_SPAN = SLOTS_PER_PALETTE + 1  # five colors plus the separator
NUM_PALETTES = 3
SEQUENCE_LENGTH = PALETTE_SPAN * NUM_PALETTES  # 18
GROUP_ORDER = ("image", "svg", "text")
SEP_POSITIONS = tuple(PALETTE_SPAN * (i + 1) - 1 for i in range(NUM_PALETTES))


@dataclass(frozen=True)
class Token:
    """One sequence cell: a color code or one of the structural specials."""

    kind: str  # "color" | "pad" | "sep" | "mask"
    code: ColorCode | None = None

    def __post_init__(self):
        if self.kind == "color" and self.code is None:
            raise ValueError("color token needs a code")
        if self.kind != "color" and self.code is not None:
            raise ValueError(f"{self.kind} token cannot carry a code")

    def text(self) -> str:
        if self.kind == "color":
            return self.code.text()
        return {"pad": PAD_TOKEN, "sep": SEP_TOKEN, "mask": MASK_TOKEN}[self.kind]

    @classmethod
    def from_text(cls, text: str, bins: int = 16) -> "Token":
        specials = {PAD_TOKEN: "pad", SEP_TOKEN: "sep", MASK_TOKEN: "mask"}
        if text in specials:
            return cls(specials[text])
        return cls("color", ColorCode.parse(text, bins))


PAD = Token("pad")
SEP = Token("sep")
MASK = Token("mask")


def slot_position(group: str, slot: int) -> int:
    """Sequence position of a palette slot."""
    if group not in GROUP_ORDER:
        raise ValueError(f"unknown group {group!r}")
    if not 0 <= slot < SLOTS_PER_PALETTE:
        raise ValueError(f"slot {slot} outside 0..{SLOTS_PER_PALETTE - 1}")
    return GROUP_ORDER.index(group) * PALETTE_SPAN + slot


def position_slot(position: int) -> tuple[str, int]:
    """Inverse of slot_position; separators have no slot."""
    group = GROUP_ORDER[position // PALETTE_SPAN]
    slot = position % PALETTE_SPAN
    if slot == SLOTS_PER_PALETTE:
        raise ValueError(f"position {position} is a separator")
    return group, slot


@dataclass(frozen=True)
class ColorSequence:
    tokens: tuple[Token, ...]

    def __post_init__(self):
        if len(self.tokens) != SEQUENCE_LENGTH:
            raise ValueError(f"sequence must have {SEQUENCE_LENGTH} tokens")
        for pos in SEP_POSITIONS:
            if self.tokens[pos].kind != "sep":
                raise ValueError(f"position {pos} must be a separator")
        for i, tok in enumerate(self.tokens):
            if i not in SEP_POSITIONS and tok.kind == "sep":
                raise ValueError(f"stray separator at position {i}")
        # padding only after the last color of its palette
        for p in range(NUM_PALETTES):
            seen_pad = False
            for s in range(SLOTS_PER_PALETTE):
                kind = self.tokens[p * PALETTE_SPAN + s].kind
                if kind == "pad":
                    seen_pad = True
                elif seen_pad:
                    raise ValueError("color after padding inside a palette")

    @property
    def segments(self) -> tuple[int, ...]:
        return tuple(i // PALETTE_SPAN + 1 for i in range(SEQUENCE_LENGTH))

    @property
    def positions(self) -> tuple[int, ...]:
        return tuple(range(SEQUENCE_LENGTH))

    def color_positions(self) -> list[int]:
        return [i for i, t in enumerate(self.tokens) if t.kind == "color"]

    def color_codes(self) -> list[ColorCode]:
        return [t.code for t in self.tokens if t.kind == "color"]

    def palette_codes(self, group: str) -> list[ColorCode]:
        base = GROUP_ORDER.index(group) * PALETTE_SPAN
        out = []
        for s in range(SLOTS_PER_PALETTE):
            tok = self.tokens[base + s]
            if tok.kind == "color":
                out.append(tok.code)
        return out

    def to_texts(self) -> list[str]:
        return [t.text() for t in self.tokens]

    @classmethod
    def from_texts(cls, texts, bins: int = 16) -> "ColorSequence":
        return cls(tuple(Token.from_text(t, bins) for t in texts))


def encode_multi_palette(mp: MultiPalette, config: VocabConfig = VocabConfig()) -> ColorSequence:
    """Quantize a multi-palette into its token sequence."""
    tokens: list[Token] = []
    for group in GROUP_ORDER:
        palette = mp.group(group)
        codes = [quantize_lab(c, config) for c in palette.colors]
        for s in range(SLOTS_PER_PALETTE):
            tokens.append(Token("color", codes[s]) if s < len(codes) else PAD)
        tokens.append(SEP)
    return ColorSequence(tuple(tokens))


@dataclass(frozen=True)
class MaskedSequence:
    """Model input: a sequence with hidden slots plus their true codes."""

    tokens: tuple[Token, ...]
    segments: tuple[int, ...]
    mask_positions: tuple[int, ...]
    targets: tuple[ColorCode, ...]

    def __post_init__(self):
        if len(self.mask_positions) != len(self.targets):
            raise ValueError("positions and targets must align")
        if len(self.mask_positions) == 0:
            raise ValueError("at least one masked position required")


def apply_masking(
    seq: ColorSequence,
    vocab: Vocabulary,
    rng: np.random.Generator,
    rate: float = 0.10,
) -> MaskedSequence:
    """Hide a random sample of color slots for training.

    The number of hidden slots is max(1, round(rate * #colors)).  Each
    chosen slot becomes [MASK] with probability 0.8, a random vocabulary
    code with probability 0.1, and stays unchanged otherwise; padding and
    separators are never selected.
    """
    color_positions = seq.color_positions()
    if not color_positions:
        raise ValueError("sequence has no color tokens to mask")
    count = max(1, round(rate * len(color_positions)))
    count = min(count, len(color_positions))
    chosen = sorted(rng.choice(len(color_positions), size=count, replace=False))
    positions = [color_positions[i] for i in chosen]

    tokens = list(seq.tokens)
    targets = []
    for pos in positions:
        targets.append(tokens[pos].code)
        roll = rng.random()
        if roll < 0.8:
            tokens[pos] = MASK
        elif roll < 0.9:
            random_code = vocab.codes[int(rng.integers(len(vocab.codes)))]
            tokens[pos] = Token("color", random_code)
        # else: keep the original token, the model must still predict it
    return MaskedSequence(tuple(tokens), seq.segments, tuple(positions), tuple(targets))


def mask_at(seq: ColorSequence, positions) -> MaskedSequence:
    """Hide exactly the given color positions (evaluation protocol)."""
    positions = list(positions)
    tokens = list(seq.tokens)
    targets = []
    for pos in positions:
        if tokens[pos].kind != "color":
            raise ValueError(f"position {pos} holds {tokens[pos].kind}, not a color")
        targets.append(tokens[pos].code)
        tokens[pos] = MASK
    return MaskedSequence(tuple(tokens), seq.segments, tuple(positions), tuple(targets))


def token_ids(tokens, vocab: Vocabulary) -> np.ndarray:
    """Map tokens to vocabulary ids; unseen codes snap to their nearest."""
    cfg = vocab.config
    out = np.empty(len(tokens), dtype=np.int64)
    for i, tok in enumerate(tokens):
        if tok.kind == "pad":
            out[i] = cfg.pad_id
        elif tok.kind == "sep":
            out[i] = cfg.sep_id
        elif tok.kind == "mask":
            out[i] = cfg.mask_id
        else:
            out[i] = vocab.id_of_nearest(tok.code)
    return out


def save_corpus(sequences, path) -> None:
    """One sequence per line: token texts plus segment ids."""
    with open(path, "w", encoding="utf-8") as fh:
        for seq in sequences:
            fh.write(json.dumps({"tokens": seq.to_texts(), "segments": list(seq.segments)}))
            fh.write("\n")


def load_corpus(path, bins: int = 16) -> list[ColorSequence]:
    out = []
    with open(Path(path), "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                seq = ColorSequence.from_texts(record["tokens"], bins)
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{line_no}: bad corpus record: {exc}") from exc
            out.append(seq)
    return out

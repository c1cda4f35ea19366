"""Ranked color suggestions for chosen palette slots.

Requests name slots as group:index pairs ("svg:1" is the second svg color).
Two decoding modes exist for multi-slot requests: "simultaneous" hides all
requested slots at once and reads every ranking from one pass, while
"iterative" commits the most confident slot first and re-runs with it
visible, so later suggestions can depend on earlier ones.
"""

from __future__ import annotations

from dataclasses import dataclass

from .color import ColorCode, RgbColor, display_rgb
from .document import GraphicDocument
from .model import Checkpoint, predict_batch
from .palette import extract_multi_palette
from .sequence import (
    GROUP_ORDER,
    ColorSequence,
    MaskedSequence,
    Token,
    encode_multi_palette,
    mask_at,
    slot_position,
)

__all__ = ["SlotRef", "Candidate", "SlotRecommendation", "recommend", "recommend_for_sequence"]

MODES = ("simultaneous", "iterative")


@dataclass(frozen=True, order=True)
class SlotRef:
    """One palette slot, addressed as group plus index."""

    group: str
    slot: int

    def __post_init__(self):
        if self.group not in GROUP_ORDER:
            raise ValueError(f"unknown group {self.group!r}")
        if not 0 <= self.slot < 5:
            raise ValueError("slot must be in 0..4")

    def text(self) -> str:
        return f"{self.group}:{self.slot}"

    @classmethod
    def parse(cls, text: str) -> "SlotRef":
        group, sep, slot = text.partition(":")
        if not sep or not slot.lstrip("-").isdigit():
            raise ValueError(f"slot reference {text!r} is not group:index")
        return cls(group, int(slot))

    @property
    def position(self) -> int:
        return slot_position(self.group, self.slot)


@dataclass(frozen=True)
class Candidate:
    """One suggested code with its displayable color and 1-based rank.

    ``probability`` is the model's probability for the code; an active
    frequency penalty divides it by the code's corpus count, so it stays
    the sort key but stops being normalized.
    """

    code: ColorCode
    rgb: RgbColor
    probability: float
    rank: int

    def to_dict(self) -> dict:
        return {
            "code": self.code.text(),
            "hex": self.rgb.to_hex(),
            "probability": self.probability,
            "rank": self.rank,
        }


@dataclass(frozen=True)
class SlotRecommendation:
    slot: SlotRef
    current: ColorCode
    candidates: tuple[Candidate, ...]

    def to_dict(self) -> dict:
        return {
            "slot": self.slot.text(),
            "current": self.current.text(),
            "candidates": [c.to_dict() for c in self.candidates],
        }


def _check_slots(seq: ColorSequence, slots: list[SlotRef]):
    if not slots:
        raise ValueError("no slots requested")
    if len(set(slots)) != len(slots):
        raise ValueError("duplicate slot in request")
    for ref in slots:
        token = seq.tokens[ref.position]
        if token.kind != "color":
            raise ValueError(f"slot {ref.text()} holds no color in this document")


def _ranked_candidates(checkpoint, masked: MaskedSequence, n: int, exclude, penalty: float):
    """Full-vocabulary rankings per hidden slot, filtered and cut to n."""
    vocab = checkpoint.vocab
    counts = dict(zip(vocab.codes, vocab.counts)) if vocab.counts else {}
    full = predict_batch(checkpoint, [masked], len(vocab.codes))[0]
    out = []
    for ranked in full:
        kept = []
        for code, prob in ranked:
            if code in exclude:
                continue
            score = float(prob)
            if penalty > 0.0:
                # discount codes that dominate the corpus; stable sort keeps
                # the model's tie order
                score /= counts.get(code, 1) ** penalty
            kept.append((code, score))
        if not kept:
            raise ValueError("the exclusion list covers the whole vocabulary")
        kept.sort(key=lambda item: -item[1])
        out.append(kept[:n])
    return out


def recommend_for_sequence(
    checkpoint: Checkpoint,
    seq: ColorSequence,
    slots,
    n: int = 5,
    mode: str = "simultaneous",
    exclude=(),
    frequency_penalty: float = 0.0,
) -> list[SlotRecommendation]:
    """Suggest replacement codes for the given occupied slots.

    ``exclude`` drops codes from every ranking (rejected suggestions, or
    the current colors when novelty matters).  ``frequency_penalty`` above
    zero discounts codes that dominate the training corpus.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if n < 1:
        raise ValueError("n must be positive")
    slots = [ref if isinstance(ref, SlotRef) else SlotRef.parse(ref) for ref in slots]
    _check_slots(seq, slots)
    exclude = {c if isinstance(c, ColorCode) else ColorCode.parse(c) for c in exclude}
    current = {ref: seq.tokens[ref.position].code for ref in slots}

    results: dict[SlotRef, SlotRecommendation] = {}
    if mode == "simultaneous":
        masked = mask_at(seq, [ref.position for ref in slots])
        per_slot = _ranked_candidates(checkpoint, masked, n, exclude, frequency_penalty)
        for ref, ranked in zip(slots, per_slot):
            results[ref] = _build(ref, current[ref], ranked)
    else:
        tokens = list(seq.tokens)
        remaining = list(slots)
        while remaining:
            masked = mask_at(
                ColorSequence(tuple(tokens)), [ref.position for ref in remaining]
            )
            per_slot = _ranked_candidates(checkpoint, masked, n, exclude, frequency_penalty)
            best_i = max(
                range(len(remaining)),
                key=lambda i: per_slot[i][0][1] if per_slot[i] else -1.0,
            )
            ref, ranked = remaining[best_i], per_slot[best_i]
            results[ref] = _build(ref, current[ref], ranked)
            if ranked:
                tokens[ref.position] = Token("color", ranked[0][0])
            remaining.pop(best_i)

    return [results[ref] for ref in slots]


def _build(ref: SlotRef, current: ColorCode, ranked) -> SlotRecommendation:
    return SlotRecommendation(
        slot=ref,
        current=current,
        candidates=tuple(
            Candidate(code, display_rgb(code), float(score), rank)
            for rank, (code, score) in enumerate(ranked, start=1)
        ),
    )


def recommend(
    checkpoint: Checkpoint,
    doc: GraphicDocument,
    slots,
    n: int = 5,
    mode: str = "simultaneous",
    exclude=(),
    frequency_penalty: float = 0.0,
    seed: int = 0,
) -> list[SlotRecommendation]:
    """Document-level convenience: extract palettes, then suggest."""
    seq = encode_multi_palette(extract_multi_palette(doc, seed=seed), checkpoint.vocab.config)
    return recommend_for_sequence(
        checkpoint, seq, slots, n=n, mode=mode, exclude=exclude,
        frequency_penalty=frequency_penalty,
    )

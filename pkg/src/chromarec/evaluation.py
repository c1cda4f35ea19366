"""Scoring protocol for masked color prediction.

A predictor is anything callable as ``predict(masked, n)`` returning, for
each masked sequence, one ranked ``[(code, score), ...]`` list per hidden
position.  Both the transformer checkpoint (via ``predict_batch``) and the
skip-gram baseline fit this shape, so they can be scored side by side.

Scoring masks each test sequence at every count from one up to
``max_masked`` slots, ``repeats`` times with fresh positions, and scores
every hidden slot as one event.  Accuracy at N asks whether the true code
appears in the top N; similarity at N is the smallest CIEDE2000 between the
true cell center and any of the top N candidates' centers, so accuracy can
only grow and similarity only shrink as N grows.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from statistics import fmean

import numpy as np

from .color import ColorCode, ciede2000_many, code_center
from .sequence import ColorSequence, MaskedSequence, mask_at

__all__ = [
    "EvalReport",
    "accuracy_at_n",
    "similarity_at_n",
    "evaluate",
    "average_reports",
    "top1_accuracy",
    "LEVELS",
]

LEVELS = (1, 2, 3, 4, 5, 10)

_CHUNK = 1024  # sequences per predictor call, to bound batch memory


def _codes(ranked) -> list[ColorCode]:
    """A ranking is a list of codes or of (code, score) pairs."""
    return [item if isinstance(item, ColorCode) else item[0] for item in ranked]


def accuracy_at_n(predictions, truths, n: int) -> float:
    """Fraction of cases whose true code appears among the top n.

    ``predictions`` holds one ranked candidate list per case (codes, or
    (code, score) pairs); ``truths`` the matching true codes.
    """
    if len(predictions) != len(truths):
        raise ValueError("predictions and truths differ in length")
    if not predictions:
        raise ValueError("no cases to score")
    if n < 1:
        raise ValueError("n must be positive")
    hits = sum(truth in _codes(ranked)[:n] for ranked, truth in zip(predictions, truths))
    return hits / len(predictions)


def similarity_at_n(predictions, truths, n: int) -> float:
    """Mean over cases of the smallest CIEDE2000 among the top n.

    Distances compare cell centers, so an exact code hit contributes zero.
    Shapes as in ``accuracy_at_n``.
    """
    if len(predictions) != len(truths):
        raise ValueError("predictions and truths differ in length")
    if not predictions:
        raise ValueError("no cases to score")
    if n < 1:
        raise ValueError("n must be positive")
    total = 0.0
    for ranked, truth in zip(predictions, truths):
        head = _codes(ranked)[:n]
        centers = np.array([code_center(code).as_array() for code in head])
        deltas = ciede2000_many(code_center(truth).as_array(), centers)
        total += float(deltas.min())
    return total / len(predictions)


@dataclass
class EvalReport:
    n_sequences: int
    n_events: int
    skipped: int
    levels: tuple[int, ...]
    accuracy: dict[int, float]
    similarity: dict[int, float]
    per_mask_count: dict[int, dict] = field(default_factory=dict)
    max_masked: int = 5
    repeats: int = 1
    seed: int = 0
    corpus_hash: str = ""

    def monotonicity_violations(self) -> list[str]:
        """Accuracy must not fall and similarity must not rise with N."""
        out = []
        tables = [("accuracy", self.accuracy, -1), ("similarity", self.similarity, +1)]
        for m, row in sorted(self.per_mask_count.items()):
            tables.append((f"accuracy[m={m}]", row["accuracy"], -1))
            tables.append((f"similarity[m={m}]", row["similarity"], +1))
        for name, table, sign in tables:
            values = [table[n] for n in sorted(table)]
            for lo, hi in zip(values, values[1:]):
                if sign * (hi - lo) > 1e-12:
                    out.append(f"{name} moved the wrong way between levels")
                    break
        return out

    def to_dict(self) -> dict:
        return {
            "n_sequences": self.n_sequences,
            "n_events": self.n_events,
            "skipped": self.skipped,
            "levels": list(self.levels),
            "max_masked": self.max_masked,
            "repeats": self.repeats,
            "seed": self.seed,
            "corpus_hash": self.corpus_hash,
            "accuracy": {str(n): v for n, v in self.accuracy.items()},
            "similarity": {str(n): v for n, v in self.similarity.items()},
            "per_mask_count": {
                str(m): {
                    "events": row["events"],
                    "accuracy": {str(n): v for n, v in row["accuracy"].items()},
                    "similarity": {str(n): v for n, v in row["similarity"].items()},
                }
                for m, row in sorted(self.per_mask_count.items())
            },
        }


def _corpus_hash(sequences) -> str:
    digest = hashlib.sha256()
    for seq in sequences:
        digest.update(" ".join(seq.to_texts()).encode())
        digest.update(b"\n")
    return digest.hexdigest()[:16]


def _mask_plan(sequences, max_masked: int, repeats: int, seed: int):
    """Yield (mask_count, MaskedSequence) for the whole protocol."""
    skipped = 0
    plan = []
    for index, seq in enumerate(sequences):
        positions = seq.color_positions()
        if not positions:
            skipped += 1
            continue
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(index,))
        )
        for m in range(1, min(max_masked, len(positions)) + 1):
            for _ in range(repeats):
                chosen = sorted(rng.choice(len(positions), size=m, replace=False))
                plan.append((m, mask_at(seq, [positions[i] for i in chosen])))
    return plan, skipped


def evaluate(
    predict,
    sequences: list[ColorSequence],
    levels: tuple[int, ...] = LEVELS,
    max_masked: int = 5,
    repeats: int = 1,
    seed: int = 0,
) -> EvalReport:
    """Score a predictor over a sequence corpus.

    ``repeats`` draws that many independent position subsets per mask
    count, which steadies the per-count table on small corpora.
    """
    levels = tuple(sorted(set(levels)))
    if not levels or levels[0] < 1:
        raise ValueError("levels must be positive")
    plan, skipped = _mask_plan(sequences, max_masked, repeats, seed)
    if not plan:
        raise ValueError("no sequence has a color slot to hide")

    by_count: dict[int, dict] = {}
    for start in range(0, len(plan), _CHUNK):
        chunk = plan[start : start + _CHUNK]
        preds = predict([masked for _, masked in chunk], max(levels))
        for (m, masked), ranked_per_position in zip(chunk, preds):
            row = by_count.setdefault(m, {"predictions": [], "truths": []})
            row["predictions"].extend(ranked_per_position)
            row["truths"].extend(masked.targets)

    counts = sorted(by_count)
    all_predictions = [p for m in counts for p in by_count[m]["predictions"]]
    all_truths = [t for m in counts for t in by_count[m]["truths"]]
    per_mask_count = {
        m: {
            "events": len(row["truths"]),
            "accuracy": {
                n: accuracy_at_n(row["predictions"], row["truths"], n) for n in levels
            },
            "similarity": {
                n: similarity_at_n(row["predictions"], row["truths"], n) for n in levels
            },
        }
        for m, row in by_count.items()
    }

    return EvalReport(
        n_sequences=len(sequences) - skipped,
        n_events=len(all_truths),
        skipped=skipped,
        levels=levels,
        accuracy={n: accuracy_at_n(all_predictions, all_truths, n) for n in levels},
        similarity={n: similarity_at_n(all_predictions, all_truths, n) for n in levels},
        per_mask_count=per_mask_count,
        max_masked=max_masked,
        repeats=repeats,
        seed=seed,
        corpus_hash=_corpus_hash(sequences),
    )


def average_reports(reports) -> EvalReport:
    """Mean of reports from repeated runs over the same corpus.

    Rates are averaged with every run weighted equally and event counts
    summed; seeds and protocol settings are taken from the first report.
    """
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to average")
    first = reports[0]
    for other in reports[1:]:
        if other.levels != first.levels:
            raise ValueError("reports disagree on levels")
        if sorted(other.per_mask_count) != sorted(first.per_mask_count):
            raise ValueError("reports disagree on mask counts")
        if other.corpus_hash != first.corpus_hash:
            raise ValueError("reports describe different corpora")

    def mean_table(pick):
        return {n: fmean(pick(r)[n] for r in reports) for n in first.levels}

    per_mask_count = {
        m: {
            "events": sum(r.per_mask_count[m]["events"] for r in reports),
            "accuracy": mean_table(lambda r, m=m: r.per_mask_count[m]["accuracy"]),
            "similarity": mean_table(lambda r, m=m: r.per_mask_count[m]["similarity"]),
        }
        for m in sorted(first.per_mask_count)
    }
    return EvalReport(
        n_sequences=first.n_sequences,
        n_events=sum(r.n_events for r in reports),
        skipped=first.skipped,
        levels=first.levels,
        accuracy=mean_table(lambda r: r.accuracy),
        similarity=mean_table(lambda r: r.similarity),
        per_mask_count=per_mask_count,
        max_masked=first.max_masked,
        repeats=first.repeats,
        seed=first.seed,
        corpus_hash=first.corpus_hash,
    )


def top1_accuracy(predict, masked: list[MaskedSequence]) -> float:
    """Fraction of hidden slots whose top candidate is the true code."""
    if not masked:
        raise ValueError("no masked sequences to score")
    hits = total = 0
    for start in range(0, len(masked), _CHUNK):
        chunk = masked[start : start + _CHUNK]
        for ms, per_seq in zip(chunk, predict(chunk, 1)):
            for target, ranked in zip(ms.targets, per_seq):
                hits += ranked[0][0] == target
                total += 1
    return hits / total

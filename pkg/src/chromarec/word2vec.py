"""Skip-gram baseline over color tokens.

A deliberately context-blind reference point: classic skip-gram with
negative sampling, the window spanning the whole sequence, no palette or
position information.  A masked slot is filled by ranking the vocabulary
by cosine similarity to the mean context vector, which is how co-occurrence
embeddings were used for color suggestion before masked modeling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .color import Vocabulary, build_vocabulary
from .sequence import MaskedSequence

__all__ = ["SkipGramSettings", "SkipGramModel", "train_skip_gram"]


@dataclass(frozen=True)
class SkipGramSettings:
    dim: int = 32
    epochs: int = 5
    learning_rate: float = 0.025
    negatives: int = 5
    seed: int = 0


@dataclass
class SkipGramModel:
    vocab: Vocabulary
    vectors: np.ndarray = field(repr=False)  # input embeddings, one row per code

    def predict_batch(self, masked: list[MaskedSequence], n: int):
        """Rank codes by cosine to the mean of the visible color vectors.

        Mirrors the transformer's predict_batch shape: one list per
        sequence, one ranked [(code, score)] list per masked position.
        Scores are cosines, not probabilities.
        """
        codes = self.vocab.codes
        norms = np.linalg.norm(self.vectors, axis=1)
        norms[norms == 0.0] = 1.0
        unit = self.vectors / norms[:, None]
        n = min(n, len(codes))
        out = []
        for ms in masked:
            context = [
                self.vocab.id_of_nearest(t.code) - self.vocab.config.num_special
                for i, t in enumerate(ms.tokens)
                if t.kind == "color" and i not in ms.mask_positions
            ]
            if context:
                mean = unit[context].mean(axis=0)
                mean_norm = np.linalg.norm(mean)
                scores = unit @ (mean / mean_norm) if mean_norm > 0 else np.zeros(len(codes))
            else:
                scores = np.zeros(len(codes))
            order = np.lexsort((np.arange(len(codes)), -scores))[:n]
            ranked = [(codes[i], float(scores[i])) for i in order]
            out.append([list(ranked) for _ in ms.mask_positions])
        return out


def train_skip_gram(sequences, settings: SkipGramSettings = SkipGramSettings(),
                    vocab: Vocabulary | None = None) -> SkipGramModel:
    """Train code embeddings by skip-gram with negative sampling.

    Every ordered pair of color tokens in a sequence is a (center, context)
    example; negatives are drawn from the unigram distribution raised to
    3/4.  Deterministic for a fixed seed.
    """
    if vocab is None:
        vocab = build_vocabulary(sequences)
    n_codes = len(vocab.codes)
    if n_codes == 0:
        raise ValueError("vocabulary has no color codes")
    offset = vocab.config.num_special

    encoded = []
    counts = np.zeros(n_codes)
    for seq in sequences:
        ids = [vocab.id_of_nearest(c) - offset for c in seq.color_codes()]
        if len(ids) >= 2:
            encoded.append(np.asarray(ids))
            for i in ids:
                counts[i] += 1
    if not encoded:
        raise ValueError("corpus has no sequences with two or more colors")

    noise = counts ** 0.75
    noise /= noise.sum()

    rng = np.random.default_rng(np.random.SeedSequence(entropy=settings.seed))
    w_in = rng.uniform(-0.5, 0.5, size=(n_codes, settings.dim)) / settings.dim
    w_out = np.zeros((n_codes, settings.dim))

    total_steps = settings.epochs * len(encoded)
    step = 0
    for epoch in range(settings.epochs):
        order = rng.permutation(len(encoded))
        for si in order:
            ids = encoded[si]
            lr = settings.learning_rate * max(1e-4, 1.0 - step / total_steps)
            step += 1
            for center_pos, center in enumerate(ids):
                vec = w_in[center]
                grad_in = np.zeros(settings.dim)
                for ctx_pos, ctx in enumerate(ids):
                    if ctx_pos == center_pos:
                        continue
                    negs = rng.choice(n_codes, size=settings.negatives, p=noise)
                    targets = np.concatenate(([ctx], negs))
                    labels = np.zeros(len(targets))
                    labels[0] = 1.0
                    out = w_out[targets]
                    act = 1.0 / (1.0 + np.exp(-(out @ vec)))
                    delta = (act - labels) * lr
                    grad_in += delta @ out
                    w_out[targets] -= np.outer(delta, vec)
                w_in[center] -= grad_in
    return SkipGramModel(vocab=vocab, vectors=w_in)

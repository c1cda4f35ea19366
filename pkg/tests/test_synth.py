"""Design guarantees of the synthetic themed corpus."""

from collections import Counter

import numpy as np
import pytest

from chromarec.document import (
    collect_text_colors,
    composite_group,
    group_elements,
    parse_document,
    serialize_document,
)
from chromarec.sequence import SEP_POSITIONS, mask_at, slot_position
from chromarec.synth import SynthCorpus, synth_corpus


@pytest.fixture(scope="module")
def corpus() -> SynthCorpus:
    return synth_corpus(280, rule_seed=11)


def test_regeneration_is_identical(corpus):
    again = synth_corpus(280, rule_seed=11)
    assert again.spec == corpus.spec
    assert [s.to_texts() for s in again.train] == [s.to_texts() for s in corpus.train]
    assert serialize_document(again.test_docs[0]) == serialize_document(corpus.test_docs[0])


def test_rule_seed_changes_colors(corpus):
    other = synth_corpus(280, rule_seed=12)
    assert other.spec["themes"] != corpus.spec["themes"]


def test_split_sizes(corpus):
    assert corpus.spec["splits"] == {"train": 224, "val": 28, "test": 28}
    assert len(corpus.train_docs) == len(corpus.train)
    assert len(corpus.themes) == 28


def test_theme_colors_distinct_within_theme(corpus):
    for theme in corpus.themes:
        codes = theme.codes()
        assert len(set(codes)) == 6, theme.name


def test_twin_pairs_share_all_but_two(corpus):
    twins = [t for t in corpus.themes if t.kind == "twin"]
    by_pair = {}
    for t in twins:
        by_pair.setdefault(t.pair, []).append(t)
    assert len(by_pair) == 6
    for a, b in by_pair.values():
        shared = set(a.codes()) & set(b.codes())
        assert len(shared) == 4
        assert a.image[0] == b.image[0] and a.svg[0] == b.svg[0]
        assert a.text == b.text
        assert a.image[1] != b.image[1] and a.svg[1] != b.svg[1]


def _theme_sequences(corpus):
    # documents cycle through themes in order, so the first pass is one each
    return {t.name: s for t, s in zip(corpus.themes, corpus.train[: len(corpus.themes)])}


def test_single_mask_answer_unique_given_segments(corpus):
    """With palette identity visible, every one-slot question has one answer."""
    seen = {}
    for theme in corpus.themes:
        seq = _theme_sequences(corpus)[theme.name]
        for pos in seq.color_positions():
            visible = tuple(
                sorted(
                    (seq.segments[p], seq.tokens[p].code.text())
                    for p in seq.color_positions()
                    if p != pos
                )
            )
            key = (visible, seq.segments[pos])
            answer = seq.tokens[pos].code
            if key in seen:
                assert seen[key] == answer, f"ambiguous question in {theme.name}"
            seen[key] = answer


def test_without_segments_exactly_crossed_pairs_collide(corpus):
    """Dropping palette identity creates one ambiguous bag per crossed pair."""
    answers_by_bag = {}
    for theme in corpus.themes:
        seq = _theme_sequences(corpus)[theme.name]
        for pos in seq.color_positions():
            bag = tuple(
                sorted(seq.tokens[p].code.text() for p in seq.color_positions() if p != pos)
            )
            answers_by_bag.setdefault(bag, set()).add(seq.tokens[pos].code)
    collisions = [bag for bag, answers in answers_by_bag.items() if len(answers) > 1]
    assert len(collisions) == 6
    for bag in collisions:
        assert len(answers_by_bag[bag]) == 2


def test_segment_cases_cover_crossed_test_docs(corpus):
    assert len(corpus.segment_cases) == 12
    names = sorted(case.theme for case in corpus.segment_cases)
    assert names == sorted(t.name for t in corpus.themes if t.kind == "crossed")
    for case in corpus.segment_cases:
        assert case.masked.tokens[case.position].kind == "mask"
        assert case.masked.targets == (case.truth,)
        theme = next(t for t in corpus.themes if t.name == case.theme)
        group, slot = theme.probe
        assert case.position == slot_position(group, slot)
        assert case.truth == (theme.svg if group == "svg" else theme.text)[slot]


def test_crossed_case_bags_match_within_pair(corpus):
    by_pair = {}
    for case in corpus.segment_cases:
        pair = case.theme[:-1]
        visible = Counter(
            tok.code.text()
            for i, tok in enumerate(case.masked.tokens)
            if tok.kind == "color" and i != case.position
        )
        by_pair.setdefault(pair, []).append((visible, case.truth))
    assert len(by_pair) == 6
    for (bag_p, truth_p), (bag_q, truth_q) in by_pair.values():
        assert bag_p == bag_q
        assert truth_p != truth_q


def test_twin_double_mask_is_ambiguous(corpus):
    seqs = _theme_sequences(corpus)
    positions = [slot_position("image", 1), slot_position("svg", 1)]
    twins = {}
    for t in corpus.themes:
        if t.kind == "twin":
            twins.setdefault(t.pair, []).append(t)
    for a, b in twins.values():
        masked_a = mask_at(seqs[a.name], positions)
        masked_b = mask_at(seqs[b.name], positions)
        assert masked_a.tokens == masked_b.tokens
        assert masked_a.segments == masked_b.segments
        assert masked_a.targets != masked_b.targets


def test_documents_are_well_formed(corpus):
    doc = corpus.test_docs[0]
    assert (doc.width, doc.height) == (120, 80)
    groups = group_elements(doc)
    assert composite_group(groups["svg"]).shape[0] == 120 * 80 + 40 * 30
    assert composite_group(groups["image"]).shape[0] == 48 * 32
    weights = sorted(weight for _, weight in collect_text_colors(doc))
    assert weights == [30 * 8, 40 * 10]
    data = serialize_document(doc)
    assert parse_document(data) == doc


def test_sequences_have_standard_shape(corpus):
    for seq in corpus.test:
        assert len(seq.tokens) == 18
        assert all(seq.tokens[p].kind == "sep" for p in SEP_POSITIONS)
        assert len(seq.color_positions()) == 6


def test_tiny_corpus_and_bad_input():
    small = synth_corpus(3, rule_seed=5)
    assert len(small.train) == 3 and len(small.test) == 0
    with pytest.raises(ValueError):
        synth_corpus(0, rule_seed=5)

"""Session fixtures shared by the consumer-facing test modules."""

import pytest

from chromarec.model import ModelConfig, TrainSettings, train
from chromarec.synth import synth_corpus


@pytest.fixture(scope="session")
def demo_corpus():
    """Twenty documents per theme: enough to train to memorization."""
    return synth_corpus(560, rule_seed=11)


@pytest.fixture(scope="session")
def demo_checkpoint(demo_corpus):
    checkpoint, _ = train(
        demo_corpus.train,
        config=ModelConfig(),
        settings=TrainSettings(epochs=40, seed=0),
        val_sequences=demo_corpus.val,
    )
    return checkpoint

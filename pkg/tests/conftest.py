import pytest

from tokenlens import TrainConfig, train_bpe
from tokenlens.synthtext import code_like, english_like


@pytest.fixture(scope="session")
def small_english():
    return english_like(120_000, seed=7)


@pytest.fixture(scope="session")
def small_code():
    return code_like(120_000, seed=7)


@pytest.fixture(scope="session")
def small_bpe_model(small_english):
    return train_bpe(small_english, TrainConfig(family="bpe", vocab_size=800))

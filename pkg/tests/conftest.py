import numpy as np
import pytest
import torch

from tsex.mixsim import index_corpus, simulate_set
from tsex.synthdata import build_synthetic_corpus

torch.set_num_threads(4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    """Small synthetic speaker corpus shared across tests."""
    root = tmp_path_factory.mktemp("corpus")
    root, gender_map = build_synthetic_corpus(root, n_speakers=6,
                                              utts_per_speaker=4, seed=7)
    return index_corpus(root, gender_map)


@pytest.fixture(scope="session")
def mixture_set(corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("mixtures")
    records, manifest = simulate_set(corpus, 12, out, seed=42)
    return records, manifest

import numpy as np
import pytest

from constellations import EmbeddingSet, PairedConfig, unit_rows


def random_pair(n: int, d: int, seed: int = 0) -> PairedConfig:
    rng = np.random.default_rng(seed)
    u = unit_rows(rng.standard_normal((n, d)))
    v = unit_rows(rng.standard_normal((n, d)))
    return PairedConfig(u, v)


def perturb_pair(pair: PairedConfig, scale: float, seed: int = 0) -> PairedConfig:
    rng = np.random.default_rng(seed)
    u = unit_rows(pair.u.vectors + scale * rng.standard_normal(pair.u.vectors.shape))
    v = unit_rows(pair.v.vectors + scale * rng.standard_normal(pair.v.vectors.shape))
    return PairedConfig(u, v)


@pytest.fixture
def small_pair() -> PairedConfig:
    return random_pair(6, 4, seed=7)


@pytest.fixture
def identity_pair() -> PairedConfig:
    eye = EmbeddingSet(np.eye(4))
    return PairedConfig(eye, eye)

from __future__ import annotations

import os
import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", max_examples=300, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


@pytest.fixture(scope="session")
def demo_series():
    """Aligned series trained on the small synthetic corpus (one planted drift)."""
    from topicnovelty.align import align_series
    from topicnovelty.corpus import Lexicon, bucket_by_period
    from topicnovelty.embedder import Hyperparams, train_period_models
    from topicnovelty.synthetic import make_corpus

    syn = make_corpus(docs_per_year=500, seed=3)
    buckets = bucket_by_period(syn.documents, syn.years, Lexicon(syn.lexicon_rows))
    hp = Hyperparams(dim=30, epochs=5, seed=11)
    embs = train_period_models(buckets, hp)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        series = align_series(embs)
    return syn, buckets, embs, series

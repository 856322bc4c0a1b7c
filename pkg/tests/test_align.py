from __future__ import annotations

import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_orthogonal
from topicnovelty.align import (
    align_series,
    cos_sim,
    fit_procrustes,
    orthogonal_procrustes,
    orthogonality_residual,
)
from topicnovelty.embedder import EmbeddingMatrix, Vocabulary
from topicnovelty.errors import AlignmentError


def emb(period, tokens, mat):
    return EmbeddingMatrix(period, Vocabulary(list(tokens), np.ones(len(tokens), dtype=np.int64)),
                           np.asarray(mat, dtype=np.float64))


def test_identity_when_equal():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((30, 6))
    assert np.allclose(orthogonal_procrustes(a, a), np.eye(6), atol=1e-8)


def test_recovers_planted_rotation():
    rng = np.random.default_rng(1)
    for _ in range(20):
        a = rng.standard_normal((50, 10))
        q = random_orthogonal(10, rng)
        r = orthogonal_procrustes(a, a @ q)
        assert np.max(np.abs(r - q)) <= 1e-6
        assert orthogonality_residual(r) <= 1e-8


def test_residual_optimal_against_random_candidates():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((40, 5))
    b = a @ random_orthogonal(5, rng) + 0.3 * rng.standard_normal((40, 5))
    fit = fit_procrustes(a, b)
    for _ in range(100):
        q = random_orthogonal(5, rng)
        assert fit.residual <= np.linalg.norm(a @ q - b) + 1e-12
    assert fit.unique


def test_reflection_allowed():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((20, 3))
    flip = np.diag([1.0, 1.0, -1.0])
    r = orthogonal_procrustes(a, a @ flip)
    assert np.allclose(r, flip, atol=1e-10)
    assert np.linalg.det(r) == pytest.approx(-1.0)


def test_rank_deficient_fit_flags_non_unique():
    rng = np.random.default_rng(4)
    a = rng.standard_normal((2, 5))
    fit = fit_procrustes(a, a)
    assert not fit.unique
    assert orthogonality_residual(fit.rotation) <= 1e-8
    assert fit.residual <= 1e-10


def test_fit_rejects_bad_shapes():
    with pytest.raises(ValueError):
        fit_procrustes(np.zeros((3, 2)), np.zeros((3, 3)))
    with pytest.raises(FloatingPointError):
        fit_procrustes(np.array([[np.nan, 0.0]]), np.zeros((1, 2)))


def test_cos_sim_values():
    assert cos_sim([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0, abs=1e-15)
    assert cos_sim([1, 0], [0, 1]) == 0.0
    mpmath.mp.dps = 40
    exact = mpmath.mpf(32) / mpmath.sqrt(mpmath.mpf(14) * 77)
    assert cos_sim([1, 2, 3], [4, 5, 6]) == pytest.approx(float(exact), abs=1e-15)
    assert round(float(exact), 9) == 0.974631846
    with pytest.raises(ValueError):
        cos_sim([0, 0], [1, 1])


@given(st.integers(0, 10_000))
def test_rotation_preserves_cosines(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 12))
    x = rng.standard_normal((8, d))
    r = random_orthogonal(d, rng)
    y = x @ r
    for i in range(8):
        for j in range(8):
            assert abs(cos_sim(y[i], y[j]) - cos_sim(x[i], x[j])) <= 1e-10


def test_align_equal_series_is_identity():
    rng = np.random.default_rng(5)
    m = rng.standard_normal((20, 4))
    toks = [f"t{i}" for i in range(20)]
    s = align_series([emb(2000, toks, m), emb(2001, toks, m), emb(2002, toks, m)])
    for e in s.matrices:
        assert np.allclose(e.input_vectors, m, atol=1e-8)
    for r in s.rotations:
        assert np.allclose(r, np.eye(4), atol=1e-8)


def test_align_undoes_planted_rotations():
    rng = np.random.default_rng(6)
    m = rng.standard_normal((30, 6))
    toks = [f"t{i}" for i in range(30)]
    q0, q1 = random_orthogonal(6, rng), random_orthogonal(6, rng)
    s = align_series([emb(2002, toks, m @ q1), emb(2000, toks, m), emb(2001, toks, m @ q0)])
    assert s.periods == [2000, 2001, 2002]
    for period in s.periods:
        for i, t in enumerate(toks):
            assert cos_sim(s[period].vector(t), m[i]) >= 0.999
    for r in s.rotations:
        assert orthogonality_residual(r) <= 1e-8
    assert s.steps() == [(2000, 2001), (2001, 2002)]


def test_align_fits_on_shared_and_rotates_all_rows():
    rng = np.random.default_rng(7)
    base = rng.standard_normal((12, 3))
    q = random_orthogonal(3, rng)
    early = emb(2000, [f"t{i}" for i in range(10)] + ["old1", "old2"], base)
    # "new" tokens only exist later; their rows must still be rotated
    later_tokens = [f"t{i}" for i in range(10)] + ["new1", "new2"]
    later_mat = np.vstack([base[:10], rng.standard_normal((2, 3))]) @ q
    s = align_series([early, emb(2001, later_tokens, later_mat)])
    assert sorted(s.shared_vocab[0]) == sorted(f"t{i}" for i in range(10))
    r = s.rotations[0]
    assert np.allclose(s[2001].input_vectors, later_mat @ r)
    assert np.allclose(r, q.T, atol=1e-10)


def test_align_cosines_preserved_per_matrix(demo_series):
    _, _, embs, series = demo_series
    for raw, al in zip(embs, series.matrices):
        x = raw.input_vectors.astype(np.float64)
        xn = x / np.linalg.norm(x, axis=1, keepdims=True)
        y = al.input_vectors
        yn = y / np.linalg.norm(y, axis=1, keepdims=True)
        assert np.max(np.abs(xn @ xn.T - yn @ yn.T)) <= 1e-10


def test_align_errors_and_warnings():
    m = np.eye(3)
    with pytest.raises(AlignmentError):
        align_series([emb(2000, "abc", m)])
    with pytest.raises(AlignmentError) as info:
        align_series([emb(2000, "abc", m), emb(2001, "xyz", m)])
    assert info.value.step == 0
    with pytest.raises(AlignmentError):
        align_series([emb(2000, "abc", m), emb(2001, "abc", np.ones((3, 2)))])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        align_series([emb(2000, "ab", np.eye(2, 3)), emb(2001, "ab", np.eye(2, 3))])
    assert any("shared tokens" in str(w.message) for w in caught)

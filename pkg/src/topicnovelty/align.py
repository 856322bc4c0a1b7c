"""Chain per-period embeddings into one coordinate frame with orthogonal Procrustes."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .embedder import EmbeddingMatrix
from .errors import AlignmentError

ORTHOGONALITY_TOL = 1e-8


@dataclass
class ProcrustesFit:
    rotation: np.ndarray
    singular_values: np.ndarray
    unique: bool
    residual: float


def fit_procrustes(a: np.ndarray, b: np.ndarray, rtol: float = 1e-10) -> ProcrustesFit:
    """Orthogonal ``R`` minimizing ``||a @ R - b||_F`` for row-vector point sets.

    With ``a.T @ b = U S V^T`` the minimizer is ``U V^T``. It is unique only
    when ``a.T @ b`` has full rank; otherwise any completion is a minimizer and
    ``unique`` is False.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.shape[0] < 1:
        raise ValueError("need at least one row to fit a rotation")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise FloatingPointError("non-finite input to orthogonal Procrustes")
    u, s, vt = np.linalg.svd(a.T @ b)
    r = u @ vt
    scale = s[0] if s.size and s[0] > 0 else 1.0
    unique = bool(s.size == a.shape[1] and s[-1] > rtol * scale)
    return ProcrustesFit(r, s, unique, float(np.linalg.norm(a @ r - b)))


def orthogonal_procrustes(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return fit_procrustes(a, b).rotation


def orthogonality_residual(r: np.ndarray) -> float:
    return float(np.max(np.abs(r.T @ r - np.eye(r.shape[0]))))


def cos_sim(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValueError("cosine similarity is undefined for a zero vector")
    if np.array_equal(u, v):
        return 1.0
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


@dataclass
class AlignedSeries:
    periods: list[int]
    matrices: list[EmbeddingMatrix]
    rotations: list[np.ndarray] = field(default_factory=list)
    shared_vocab: list[list[str]] = field(default_factory=list)
    unique_fit: list[bool] = field(default_factory=list)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.periods, self.periods[1:])):
            raise ValueError(f"periods must be strictly increasing: {self.periods}")
        dims = {m.dim for m in self.matrices}
        if len(dims) > 1:
            raise ValueError(f"aligned matrices differ in dimension: {sorted(dims)}")
        self._by_period = dict(zip(self.periods, self.matrices))

    def __getitem__(self, period: int) -> EmbeddingMatrix:
        return self._by_period[period]

    def __contains__(self, period: object) -> bool:
        return period in self._by_period

    def steps(self) -> list[tuple[int, int]]:
        return list(zip(self.periods, self.periods[1:]))


def align_series(embeddings: list[EmbeddingMatrix]) -> AlignedSeries:
    """Rotate every period into the frame of the earliest one.

    Step ``t`` fits a rotation on the tokens shared by the already aligned
    period ``t`` and the raw period ``t+1`` and applies it to every row of
    period ``t+1``, including tokens absent earlier.
    """
    if len(embeddings) < 2:
        raise AlignmentError("alignment needs at least two periods")
    embeddings = sorted(embeddings, key=lambda e: e.period)
    first = embeddings[0]
    aligned = [EmbeddingMatrix(first.period, first.vocab, first.input_vectors.astype(np.float64))]
    rotations, shared_sets, uniques = [], [], []
    for step, nxt in enumerate(embeddings[1:]):
        prev = aligned[-1]
        if nxt.dim != prev.dim:
            raise AlignmentError(
                f"step {step} ({prev.period}->{nxt.period}): dimensions {prev.dim} and {nxt.dim} differ",
                step,
            )
        shared = [t for t in nxt.vocab.tokens if t in prev.vocab.index]
        if not shared:
            raise AlignmentError(
                f"step {step} ({prev.period}->{nxt.period}): no shared vocabulary", step
            )
        if len(shared) < prev.dim:
            warnings.warn(
                f"step {step} ({prev.period}->{nxt.period}): only {len(shared)} shared tokens "
                f"for a {prev.dim}-dimensional rotation",
                stacklevel=2,
            )
        rows_prev = [prev.vocab.index[t] for t in shared]
        rows_next = [nxt.vocab.index[t] for t in shared]
        src = nxt.input_vectors.astype(np.float64)
        fit = fit_procrustes(src[rows_next], prev.input_vectors[rows_prev])
        aligned.append(EmbeddingMatrix(nxt.period, nxt.vocab, src @ fit.rotation))
        rotations.append(fit.rotation)
        shared_sets.append(shared)
        uniques.append(fit.unique)
    return AlignedSeries([e.period for e in embeddings], aligned, rotations, shared_sets, uniques)

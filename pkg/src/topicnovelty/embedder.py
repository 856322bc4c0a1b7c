"""Per-period skip-gram embeddings trained with negative sampling.

The SGD kernel follows the classic word2vec update: for every (center,
context) pair the context's output vector is pulled towards the center's input
vector, ``negatives`` sampled output vectors are pushed away, and the center's
input vector moves by the accumulated gradient once all of them are visited.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit

from .corpus import PeriodCorpus
from .errors import EmptyVocabularyError, VocabularyMismatchError

log = logging.getLogger(__name__)

NEG_TABLE_SIZE = 1_000_000


@dataclass
class Vocabulary:
    tokens: list[str]
    counts: np.ndarray
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if len(self.counts) != len(self.tokens):
            raise ValueError("tokens and counts differ in length")
        self.index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("vocabulary tokens must be unique")

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: object) -> bool:
        return token in self.index

    def count(self, token: str) -> int:
        return int(self.counts[self.index[token]])


def build_vocab(corpus: PeriodCorpus, min_count: int = 5) -> Vocabulary:
    """Keep tokens seen at least ``min_count`` times, most frequent first.

    Ties are broken by the token string so the row order is reproducible.
    """
    kept = [(tok, c) for tok, c in corpus.token_counts.items() if c >= min_count]
    if not kept:
        raise EmptyVocabularyError(
            f"period {corpus.period}: no token reaches min_count={min_count}"
        )
    kept.sort(key=lambda tc: (-tc[1], tc[0]))
    return Vocabulary([t for t, _ in kept], np.array([c for _, c in kept], dtype=np.int64))


def negative_table(vocab: Vocabulary, power: float = 0.75, size: int = NEG_TABLE_SIZE) -> np.ndarray:
    """Lookup table for drawing negatives with probability proportional to count**power.

    Slot ``j`` holds the token whose cumulative probability interval contains
    ``(j + 0.5) / size``, so each token's share of the table is within
    ``1 / size`` of its target probability.
    """
    if len(vocab) == 0:
        raise EmptyVocabularyError("cannot build a sampling table for an empty vocabulary")
    weights = np.power(vocab.counts.astype(np.float64), power)
    cdf = np.cumsum(weights / weights.sum())
    cdf[-1] = 1.0
    probes = (np.arange(size, dtype=np.float64) + 0.5) / size
    return np.searchsorted(cdf, probes, side="right").astype(np.int32)


@dataclass
class Hyperparams:
    dim: int = 100
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    initial_learning_rate: float = 0.025
    min_learning_rate: float = 0.0001
    min_count: int = 5
    unigram_power: float = 0.75
    sample: float = 0.0
    seed: int = 1

    def __post_init__(self):
        problems = []
        if self.dim <= 0:
            problems.append("dim must be > 0")
        if self.window <= 0:
            problems.append("window must be > 0")
        if self.negatives < 0:
            problems.append("negatives must be >= 0")
        if self.epochs < 0:
            problems.append("epochs must be >= 0")
        if not self.initial_learning_rate > 0:
            problems.append("initial_learning_rate must be > 0")
        if not 0 <= self.min_learning_rate <= self.initial_learning_rate:
            problems.append("min_learning_rate must lie in [0, initial_learning_rate]")
        if self.min_count < 1:
            problems.append("min_count must be >= 1")
        if not 0 <= self.unigram_power <= 1:
            problems.append("unigram_power must lie in [0, 1]")
        if self.sample < 0:
            problems.append("sample must be >= 0")
        if problems:
            raise ValueError("invalid hyperparameters: " + "; ".join(problems))


@dataclass
class EmbeddingMatrix:
    period: int
    vocab: Vocabulary
    input_vectors: np.ndarray
    output_vectors: np.ndarray | None = None

    def __post_init__(self):
        if self.input_vectors.ndim != 2 or self.input_vectors.shape[0] != len(self.vocab):
            raise ValueError(
                f"period {self.period}: matrix shape {self.input_vectors.shape} "
                f"does not match vocabulary size {len(self.vocab)}"
            )
        if not np.all(np.isfinite(self.input_vectors)):
            raise FloatingPointError(f"period {self.period}: non-finite embedding entries")
        if self.output_vectors is not None and self.output_vectors.shape != self.input_vectors.shape:
            raise ValueError("output vectors must have the same shape as input vectors")

    @property
    def dim(self) -> int:
        return self.input_vectors.shape[1]

    def __contains__(self, token: object) -> bool:
        return token in self.vocab

    def vector(self, token: str) -> np.ndarray:
        return self.input_vectors[self.vocab.index[token]]


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def _sigmoid(x):
    return np.exp(_log_sigmoid(x))


def sgns_pair_objective(center_vec, context_vec, negative_vecs):
    """Negative-sampling loss for one positive pair and its negatives.

    ``loss = -log s(u.v) - sum_j log s(-u.n_j)`` with ``s`` the logistic
    function. Returns ``(loss, (d_center, d_context, d_negatives))``.
    """
    u = np.asarray(center_vec, dtype=np.float64)
    v = np.asarray(context_vec, dtype=np.float64)
    negs = np.asarray(negative_vecs, dtype=np.float64).reshape(-1, u.shape[0])
    if u.shape != v.shape:
        raise ValueError("center and context vectors differ in length")
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v)) and np.all(np.isfinite(negs))):
        raise FloatingPointError("non-finite input vector")

    pos = u @ v
    neg = negs @ u
    loss = -_log_sigmoid(pos) - np.sum(_log_sigmoid(-neg))
    pos_coef = _sigmoid(pos) - 1.0   # d loss / d (u.v)
    neg_coef = _sigmoid(neg)         # d loss / d (u.n_j)
    d_center = pos_coef * v + neg_coef @ negs
    d_context = pos_coef * u
    d_negs = np.outer(neg_coef, u)
    return float(loss), (d_center, d_context, d_negs)


@njit(cache=True, nogil=True, inline="always")
def _sigmoid_scalar(x):
    if x >= 0.0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


@njit(cache=True, nogil=True)
def _sgd_step(w_in, w_out, center, context, negs, n_negs, alpha, work):
    d = w_in.shape[1]
    for j in range(d):
        work[j] = 0.0
    for s in range(n_negs + 1):
        if s == 0:
            target = context
            label = 1.0
        else:
            target = negs[s - 1]
            label = 0.0
        f = 0.0
        for j in range(d):
            f += w_in[center, j] * w_out[target, j]
        g = (label - _sigmoid_scalar(f)) * alpha
        for j in range(d):
            work[j] += g * w_out[target, j]
        for j in range(d):
            w_out[target, j] += g * w_in[center, j]
    for j in range(d):
        w_in[center, j] += work[j]


@njit(cache=True, nogil=True)
def _train_pairs(w_in, w_out, pairs, negs, alpha):
    work = np.zeros(w_in.shape[1], dtype=w_in.dtype)
    k = negs.shape[1]
    for p in range(pairs.shape[0]):
        _sgd_step(w_in, w_out, pairs[p, 0], pairs[p, 1], negs[p], k, alpha, work)


@njit(cache=True, nogil=True)
def _train_shard(w_in, w_out, tokens, offsets, table, keep_prob, use_keep,
                 window, n_neg, epochs, alpha0, min_alpha, seed):
    rng = np.uint64(seed)
    mul = np.uint64(25214903917)
    add = np.uint64(11)
    table_size = np.uint64(table.shape[0])
    n_docs = offsets.shape[0] - 1
    total = np.float64(tokens.shape[0]) * epochs + 1.0
    work = np.zeros(w_in.shape[1], dtype=w_in.dtype)
    negs = np.empty(max(n_neg, 1), dtype=np.int32)
    sent = np.empty(tokens.shape[0], dtype=np.int32)
    processed = 0
    for _ in range(epochs):
        for doc in range(n_docs):
            n = 0
            for p in range(offsets[doc], offsets[doc + 1]):
                w = tokens[p]
                if use_keep:
                    rng = rng * mul + add
                    if keep_prob[w] < ((rng & np.uint64(0xFFFF)) / 65536.0):
                        continue
                sent[n] = w
                n += 1
            for pos in range(n):
                alpha = alpha0 - (alpha0 - min_alpha) * (processed / total)
                if alpha < min_alpha:
                    alpha = min_alpha
                rng = rng * mul + add
                reach = window - np.int64(rng % np.uint64(window))
                center = sent[pos]
                lo = max(0, pos - reach)
                hi = min(n, pos + reach + 1)
                for c in range(lo, hi):
                    if c == pos:
                        continue
                    context = sent[c]
                    k = 0
                    for _s in range(n_neg):
                        rng = rng * mul + add
                        cand = table[np.int64((rng >> np.uint64(16)) % table_size)]
                        if cand != context:
                            negs[k] = cand
                            k += 1
                    _sgd_step(w_in, w_out, center, context, negs, k, alpha, work)
                processed += 1
    return processed


def encode_corpus(corpus: PeriodCorpus, vocab: Vocabulary) -> tuple[np.ndarray, np.ndarray]:
    """Flatten in-vocabulary token ids of every document plus document offsets."""
    ids: list[int] = []
    offsets = [0]
    index = vocab.index
    for doc in corpus.documents:
        ids.extend(index[t] for t in doc if t in index)
        offsets.append(len(ids))
    return np.asarray(ids, dtype=np.int32), np.asarray(offsets, dtype=np.int64)


def initial_vectors(n: int, dim: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    w_in = ((rng.random((n, dim)) - 0.5) / dim).astype(np.float32)
    return w_in, np.zeros((n, dim), dtype=np.float32)


def _check_vocab(corpus: PeriodCorpus, vocab: Vocabulary) -> None:
    for tok, cnt in zip(vocab.tokens, vocab.counts):
        have = corpus.token_counts.get(tok, 0)
        if have != cnt:
            raise VocabularyMismatchError(
                f"period {corpus.period}: vocabulary count for {tok!r} is {cnt}, corpus has {have}"
            )


def _keep_probabilities(vocab: Vocabulary, sample: float) -> np.ndarray:
    total = float(vocab.counts.sum())
    freq = vocab.counts / total
    keep = (np.sqrt(freq / sample) + 1.0) * sample / freq
    return np.minimum(keep, 1.0).astype(np.float64)


def train_sgns(
    corpus: PeriodCorpus,
    vocab: Vocabulary,
    hp: Hyperparams | None = None,
    workers: int = 1,
) -> EmbeddingMatrix:
    """Train input/output vectors for one period.

    With ``workers=1`` the result depends only on the corpus, vocabulary and
    ``hp.seed``. More workers split the documents into shards trained in
    threads that update the shared matrices without locking.
    """
    hp = hp or Hyperparams()
    _check_vocab(corpus, vocab)
    w_in, w_out = initial_vectors(len(vocab), hp.dim, hp.seed)
    tokens, offsets = encode_corpus(corpus, vocab)
    table = negative_table(vocab, hp.unigram_power)
    use_keep = hp.sample > 0
    keep = _keep_probabilities(vocab, hp.sample) if use_keep else np.ones(1)

    if hp.epochs > 0 and len(tokens):
        n_docs = len(offsets) - 1
        workers = max(1, min(workers, n_docs))
        bounds = np.linspace(0, n_docs, workers + 1).astype(np.int64)
        shards = []
        for w in range(workers):
            lo, hi = bounds[w], bounds[w + 1]
            shard_offsets = offsets[lo:hi + 1] - offsets[lo]
            shard_tokens = tokens[offsets[lo]:offsets[hi]]
            shards.append((shard_tokens, shard_offsets, hp.seed * 7919 + w))

        def run(shard):
            toks, offs, seed = shard
            return _train_shard(w_in, w_out, toks, offs, table, keep, use_keep,
                                hp.window, hp.negatives, hp.epochs,
                                hp.initial_learning_rate, hp.min_learning_rate, seed)

        if workers == 1:
            run(shards[0])
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(run, shards))
        log.debug("period %s: trained on %d tokens x %d epochs", corpus.period, len(tokens), hp.epochs)

    return EmbeddingMatrix(corpus.period, vocab, w_in, w_out)


def train_on_pairs(
    input_vectors: np.ndarray,
    output_vectors: np.ndarray,
    pairs: np.ndarray,
    negatives: np.ndarray,
    learning_rate: float,
) -> None:
    """One in-place SGD pass over explicit ``(center, context)`` pairs.

    ``negatives[p]`` lists the sampled output rows for pair ``p``. Uses the
    same update kernel as :func:`train_sgns`.
    """
    pairs = np.ascontiguousarray(pairs, dtype=np.int64)
    negatives = np.ascontiguousarray(negatives, dtype=np.int32).reshape(len(pairs), -1)
    _train_pairs(input_vectors, output_vectors, pairs, negatives, input_vectors.dtype.type(learning_rate))


def total_pair_loss(
    input_vectors: np.ndarray,
    output_vectors: np.ndarray,
    pairs: np.ndarray,
    negatives: np.ndarray,
) -> float:
    negatives = np.asarray(negatives).reshape(len(pairs), -1)
    total = 0.0
    for (c, ctx), neg in zip(pairs, negatives):
        loss, _ = sgns_pair_objective(input_vectors[c], output_vectors[ctx], output_vectors[neg])
        total += loss
    return total


def train_period_models(
    buckets: dict[int, PeriodCorpus],
    hp: Hyperparams | None = None,
    workers: int = 1,
    seeds: Sequence[int] | None = None,
) -> list[EmbeddingMatrix]:
    """Train one model per period, in chronological order.

    Each period gets seed ``hp.seed + offset`` unless ``seeds`` is given.
    """
    hp = hp or Hyperparams()
    models = []
    for i, year in enumerate(sorted(buckets)):
        seed = seeds[i] if seeds is not None else hp.seed + i
        period_hp = Hyperparams(**{**hp.__dict__, "seed": seed})
        vocab = build_vocab(buckets[year], hp.min_count)
        models.append(train_sgns(buckets[year], vocab, period_hp, workers))
    return models

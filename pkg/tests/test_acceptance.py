"""Acceptance criteria, one test each; every test prints a PASS/FAIL line with its runtime.

Run with ``pytest tests/test_acceptance.py -v`` (lines are printed even without ``-s``).
"""

from __future__ import annotations

import contextlib
import math
import time
import warnings

import numpy as np
import pytest

from topicnovelty import cli
from topicnovelty.align import align_series, fit_procrustes, orthogonality_residual
from topicnovelty.corpus import bucket_by_period, read_documents, read_lexicon
from topicnovelty.embedder import EmbeddingMatrix, Vocabulary, sgns_pair_objective, train_period_models
from topicnovelty.novelty import novelty, novelty_table
from topicnovelty.panel import (
    VarianceComponents,
    design_matrix,
    fixed_effects,
    hausman,
    lm_test,
    pooled_ols,
    random_effects,
    swamy_arora,
    window_sweep,
)
from topicnovelty.pipeline import artifact_digests, make_config, read_config_file
from topicnovelty.synthetic import planted_window_panels, simulate_panel
from topicnovelty.topics import DescriptorStats, select_topics, sid

from conftest import random_orthogonal

N_PUB = 26_759_399


@pytest.fixture
def criterion(capsys):
    @contextlib.contextmanager
    def run(number: int, name: str, budget: float | None = None):
        start = time.perf_counter()
        ok = False
        try:
            yield
            ok = True
        finally:
            secs = time.perf_counter() - start
            over = budget is not None and secs >= budget
            note = f" (over the {budget:.0f}s budget)" if over else ""
            with capsys.disabled():
                print(f"\n{'PASS' if ok and not over else 'FAIL'} [{number:2d}] {name}  {secs:.2f}s{note}")
        if over:
            pytest.fail(f"criterion {number} took {secs:.2f}s, budget {budget}s")
    return run


# ---------------------------------------------------------------------------- 1

def batched_loss(theta, d, k):
    """Loss for each row of ``theta`` = [u | v | n_1 .. n_k], written independently."""
    u, v = theta[:, :d], theta[:, d:2 * d]
    n = theta[:, 2 * d:].reshape(len(theta), k, d)
    pos = np.einsum("ij,ij->i", u, v)
    neg = np.einsum("ikj,ij->ik", n, u)
    return np.logaddexp(0.0, -pos) + np.logaddexp(0.0, neg).sum(axis=1)


def test_c01_sgns_gradient(criterion):
    with criterion(1, "SGNS gradient vs central differences, 1000 instances", budget=5.0):
        rng = np.random.default_rng(20240101)
        h = 1e-5
        worst = 0.0
        for _ in range(1000):
            d = int(rng.integers(1, 11))
            k = int(rng.integers(0, 6))
            u, v, n = rng.standard_normal(d), rng.standard_normal(d), rng.standard_normal((k, d))
            _, (gu, gv, gn) = sgns_pair_objective(u, v, n)
            ana = np.concatenate([gu, gv, np.asarray(gn).ravel()])
            theta = np.concatenate([u, v, n.ravel()])
            eye = h * np.eye(theta.size)
            num = (batched_loss(theta + eye, d, k) - batched_loss(theta - eye, d, k)) / (2 * h)
            err = np.linalg.norm(ana - num) / max(np.linalg.norm(ana) + np.linalg.norm(num), 1e-12)
            worst = max(worst, err)
        assert worst <= 1e-6, worst


# ---------------------------------------------------------------------------- 2

def test_c02_procrustes_recovery(criterion):
    with criterion(2, "Procrustes recovery, 100 planted rotations", budget=5.0):
        rng = np.random.default_rng(7)
        for _ in range(100):
            a = rng.standard_normal((50, 10))
            q0 = random_orthogonal(10, rng)
            fit = fit_procrustes(a, a @ q0)
            assert np.max(np.abs(fit.rotation - q0)) <= 1e-6
            assert orthogonality_residual(fit.rotation) <= 1e-8


# ---------------------------------------------------------------------------- 3

def pairwise_cos(m):
    m = np.asarray(m, dtype=np.float64)  # trained vectors are float32; alignment works in float64
    norms = np.linalg.norm(m, axis=1)
    keep = norms > 0
    u = m[keep] / norms[keep, None]
    return u @ u.T


def planted_series(seed, n=40, d=8, years=4):
    rng = np.random.default_rng(seed)
    toks = [f"w{i}" for i in range(n)]
    base = rng.standard_normal((n, d))
    embs = []
    for j in range(years):
        m = (base + 0.2 * rng.standard_normal((n, d))) @ random_orthogonal(d, rng)
        embs.append(EmbeddingMatrix(2000 + j, Vocabulary(toks, np.ones(n, dtype=np.int64)), m))
    return embs


def test_c03_cosine_preservation(criterion, demo_series):
    with criterion(3, "Alignment preserves within-period cosines (1e-10)"):
        fixtures = [demo_series[2]] + [planted_series(s) for s in range(5)]
        for embs in fixtures:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                series = align_series(embs)
            for before, after in zip(embs, series.matrices):
                diff = pairwise_cos(before.input_vectors) - pairwise_cos(after.input_vectors)
                assert np.max(np.abs(diff)) <= 1e-10


# ---------------------------------------------------------------------------- 4

FLIP_YEAR = 2003  # the bundled corpus moves its drift token between clusters here


def test_c04_planted_drift(criterion):
    with criterion(4, "Planted drift token is most novel at the flip year, 10 seeds", budget=60.0):
        cfg = make_config(read_config_file(cli.demo_config_path()))
        lexicon = read_lexicon(cfg.lexicon)
        drift = next(canon for _, canon, did in _lexicon_rows(cfg.lexicon) if did == "D999999")
        buckets = bucket_by_period(read_documents(cfg.documents), cfg.years, lexicon)
        for seed in range(10):
            embs = train_period_models(buckets, cfg.hyperparams(seed=seed))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                series = align_series(embs)
            for win in (1, 2):
                scores = {}
                for tok in series[FLIP_YEAR].vocab.tokens:
                    try:
                        scores[tok] = novelty(series, tok, FLIP_YEAR, win)
                    except Exception:
                        continue
                assert max(scores, key=scores.get) == drift, (seed, win)


def _lexicon_rows(path):
    with open(path, encoding="utf-8") as fh:
        return [tuple(line.rstrip("\n").split("\t")) for line in fh if line.strip()]


# ---------------------------------------------------------------------------- 5

def test_c05_window_monotonicity(criterion, demo_series):
    with criterion(5, "Novelty(win+1) <= Novelty(win) + 1e-12 with full history"):
        series_list = [demo_series[3]]
        for s in range(5):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                series_list.append(align_series(planted_series(s, years=8)))
        checked = 0
        for series in series_list:
            first = series.periods[0]
            tokens = sorted(set().union(*(set(m.vocab.tokens) for m in series.matrices)))
            table = novelty_table(series, tokens, range(1, len(series.periods)))
            for ns in table.values():
                for (y, w), v in ns.values.items():
                    nxt = ns.values.get((y, w + 1))
                    if nxt is not None and y - (w + 1) >= first:
                        assert nxt <= v + 1e-12
                        checked += 1
        assert checked > 1000


# ---------------------------------------------------------------------------- 6

def econ_fixture(n_topics=10, n_years=8, sigma_u=1.5, seed=6):
    return simulate_panel(n_topics=n_topics, years=range(2000, 2000 + n_years), sigma_u=sigma_u, seed=seed)


def test_c06_econometric_oracles(criterion):
    with criterion(6, "FE=LSDV, RE(0)=pooled, RE=dense GLS, LM hand formula, Hausman arithmetic",
                   budget=10.0):
        p = econ_fixture()
        assert p.balanced and len(p) == 80
        y = p.column("y")
        codes, labels = p.topic_codes()

        fe = fixed_effects(p)
        dummies = np.eye(len(labels))[codes]
        x_lsdv = np.column_stack([p.column(n) for n in fe.names] + [dummies])
        b_lsdv = np.linalg.lstsq(x_lsdv, y, rcond=None)[0][:len(fe.names)]
        assert np.max(np.abs(fe.params - b_lsdv)) <= 1e-8

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            re0 = random_effects(p, VarianceComponents(0.0, swamy_arora(p).sigma2_e, False))
        assert np.max(np.abs(re0.params - pooled_ols(p).params)) <= 1e-8

        re = random_effects(p)
        x, _ = design_matrix(p)
        omega = re.sigma2_e * np.eye(len(y)) + re.sigma2_u * (codes[:, None] == codes[None, :])
        oi = np.linalg.inv(omega)
        a = x.T @ oi @ x
        beta = np.linalg.solve(a, x.T @ oi @ y)
        e = y - x @ beta
        cov = (e @ oi @ e) / (len(y) - x.shape[1]) * np.linalg.inv(a)
        assert np.max(np.abs(re.params - beta)) <= 1e-6
        assert np.max(np.abs(re.cov - cov)) <= 1e-6

        r = pooled_ols(p).resid
        n_t, n_y = len(labels), 8
        sums = np.array([r[codes == i].sum() for i in range(n_t)])
        hand = n_t * n_y / (2 * (n_y - 1)) * ((sums @ sums) / (r @ r) - 1) ** 2
        assert abs(lm_test(p).statistic - hand) <= 1e-8

        regs = ["novelty", "growth_t"]
        i_fe = [fe.names.index(n) for n in regs]
        i_re = [re.names.index(n) for n in regs]
        d = fe.params[i_fe] - re.params[i_re]
        scale = fe.sigma2_e / (re.ssr / re.df_resid)
        m = fe.cov[np.ix_(i_fe, i_fe)] - scale * re.cov[np.ix_(i_re, i_re)]
        explicit = float(d @ np.linalg.solve(m, d))
        assert abs(hausman(fe, re, regs).statistic - explicit) <= 1e-8


# ---------------------------------------------------------------------------- 7

NULL_SEED = 0
ALT_SEED = 0


def test_c07_power_and_size(criterion):
    with criterion(7, f"LM/Hausman null p>0.05, alternative p<0.001 (seeds {NULL_SEED}/{ALT_SEED})"):
        lm_null = lm_test(simulate_panel(sigma_u=0.0, sigma_e=1.0, seed=NULL_SEED))
        lm_alt = lm_test(simulate_panel(sigma_u=math.sqrt(5.0), sigma_e=1.0, seed=ALT_SEED))
        assert lm_null.p_value > 0.05
        assert lm_alt.p_value < 1e-3
        hn = simulate_panel(sigma_u=math.sqrt(5.0), effect_corr=0.0, seed=NULL_SEED)
        ha = simulate_panel(sigma_u=math.sqrt(5.0), effect_corr=0.7, seed=ALT_SEED)
        assert hausman(fixed_effects(hn), random_effects(hn)).p_value > 0.05
        assert hausman(fixed_effects(ha), random_effects(ha)).p_value < 1e-3


# ---------------------------------------------------------------------------- 8

def _stats(tok, n_major=5000, n_non=5000):
    return DescriptorStats(f"D_{tok}", tok, n_major, n_non, 1970, frozenset({1}))


def _brute_select(descs, counts, years, total, thr, min_count):
    years = list(years)
    need = -(-len(years) // 2)
    out = set()
    for d in descs:
        score = 0.0 if d.n_major == 0 else d.n_major * math.log(total / (d.n_major + d.n_nonmajor))
        if not score > thr:
            continue
        ok = [counts.get((d.canonical_token, y), 0) > min_count for y in years]
        if any(all(ok[i:i + need]) for i in range(len(years) - need + 1)):
            out.add(d.canonical_token)
    return out


def test_c08_sid_and_selection(criterion):
    with criterion(8, "SID edge cases, 5-of-10 rule, brute-force oracle on 1000 fixtures"):
        assert sid(0, 123, N_PUB) == 0.0
        assert sid(400, N_PUB - 400, N_PUB) == 0.0
        years = range(1990, 2000)
        five = {("T", y): 60 for y in range(1992, 1997)}
        assert select_topics([_stats("T")], five, years, N_PUB) == {"T"}
        broken = {("T", y): 60 for y in (1990, 1991, 1993, 1994, 1996, 1997, 1999)}
        assert select_topics([_stats("T")], broken, years, N_PUB) == set()
        rng = np.random.default_rng(12345)
        for _ in range(1000):
            n_years = int(rng.integers(1, 12))
            first = int(rng.integers(1990, 2000))
            yrs = range(first, first + n_years)
            descs, counts = [], {}
            for i in range(int(rng.integers(1, 6))):
                descs.append(_stats(f"T{i}", int(rng.integers(0, 3000)), int(rng.integers(0, 3_000_000))))
                for y in yrs:
                    if rng.random() < 0.8:
                        counts[(f"T{i}", y)] = int(rng.integers(0, 120))
            assert select_topics(descs, counts, yrs, N_PUB, 1000.0, 50) == \
                _brute_select(descs, counts, yrs, N_PUB, 1000.0, 50)


# ---------------------------------------------------------------------------- 9

def test_c09_window_sweep_selects_planted(criterion):
    with criterion(9, "Window sweep picks the planted window 7 at every lead"):
        grid = window_sweep(planted_window_panels(seed=0), deltas=range(1, 11))
        assert not grid.failures
        assert all(grid.best_window(d) == 7 for d in range(1, 11))


# ---------------------------------------------------------------------------- 10

def test_c10_end_to_end_determinism(criterion, tmp_path):
    with criterion(10, "pipeline --workers 1 --seed 42 twice gives identical digests", budget=180.0):
        digests = []
        for name in ("a", "b"):
            out = tmp_path / name
            argv = ["pipeline", "--demo", "--out", str(out), "--workers", "1", "--seed", "42"]
            assert cli.main(argv) == 0
            digests.append(artifact_digests(out))
        assert digests[0] and digests[0] == digests[1]
        assert any(k.endswith("results.json") for k in digests[0])

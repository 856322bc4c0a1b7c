"""Seeded synthetic inputs: a small multi-year corpus with one planted drift, and panels.

The corpus is built from clusters of pseudo-words. Each document is a random
walk around one cluster's ring of words, so every word has a stable,
distinctive context. One topic token is sprinkled into documents of cluster 0
before ``flip_year`` and into documents of cluster ``flip_to`` from then on.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Document, write_documents
from .panel import PanelDataset, PanelRow
from .storage import atomic_write_text
from .topics import DescriptorStats, TopicYearCounts, descriptor_stats_csv, topic_counts_csv

_ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"]
_VOWELS = ["a", "e", "i", "o", "u"]
_CODAS = ["", "n", "r", "s", "l", "x"]


def pseudo_words(n: int, seed: int = 0) -> list[str]:
    """``n`` distinct pronounceable lowercase words."""
    rng = np.random.default_rng(seed)
    out: list[str] = []
    seen = set()
    while len(out) < n:
        w = "".join(
            _ONSETS[rng.integers(len(_ONSETS))] + _VOWELS[rng.integers(len(_VOWELS))]
            for _ in range(2)
        ) + _CODAS[rng.integers(len(_CODAS))]
        if w not in seen:
            seen.add(w)
            out.append(w)
    return out


@dataclass
class SyntheticCorpus:
    documents: list[Document]
    lexicon_rows: list[tuple[str, str, str]]
    descriptors: list[DescriptorStats]
    counts: dict[str, TopicYearCounts]
    drift_token: str
    flip_year: int
    years: tuple[int, int]
    clusters: list[list[str]]

    def write(self, directory: str | Path) -> dict[str, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = {
            "documents": directory / "documents.jsonl",
            "lexicon": directory / "lexicon.tsv",
            "descriptors": directory / "descriptors.csv",
            "counts": directory / "counts.csv",
        }
        write_documents(self.documents, paths["documents"])
        atomic_write_text(paths["lexicon"], "".join(f"{s}\t{c}\t{d}\n" for s, c, d in self.lexicon_rows))
        atomic_write_text(paths["descriptors"], descriptor_stats_csv(self.descriptors))
        atomic_write_text(paths["counts"], topic_counts_csv(self.counts))
        return paths


def make_corpus(
    years: tuple[int, int] = (2001, 2005),
    flip_year: int = 2003,
    n_clusters: int = 8,
    words_per_cluster: int = 8,
    docs_per_year: int = 800,
    doc_length: tuple[int, int] = (12, 20),
    drift_rate: float = 0.25,
    flip_to: int = 4,
    seed: int = 0,
    count_years: tuple[int, int] = (1995, 2012),
) -> SyntheticCorpus:
    rng = np.random.default_rng(seed)
    vocab = pseudo_words(n_clusters * words_per_cluster + 2 * n_clusters + 2, seed)
    clusters = [vocab[i * words_per_cluster:(i + 1) * words_per_cluster] for i in range(n_clusters)]
    extra = vocab[n_clusters * words_per_cluster:]

    # two-word topic phrases, merged by the lexicon; one per cluster sits on the ring
    lexicon_rows = []
    descriptors = []
    surface_of: dict[str, str] = {}
    for c in range(n_clusters):
        a, b = extra[2 * c], extra[2 * c + 1]
        canonical = f"{a.capitalize()}_{b.capitalize()}"
        surface_of[canonical] = f"{a} {b}"
        clusters[c][words_per_cluster // 2] = canonical
        lexicon_rows.append((f"{a} {b}", canonical, f"D{900000 + c:06d}"))
    da, db = extra[-2], extra[-1]
    drift = f"{da.capitalize()}_{db.capitalize()}"
    surface_of[drift] = f"{da} {db}"
    lexicon_rows.append((f"{da} {db}", drift, "D999999"))

    # hyphenated spellings for a few plain words exercise dash joining
    hyphenated = {}
    for c in range(0, n_clusters, 3):
        w = clusters[c][1]
        hyphenated[w] = f"{w[:2]}-{w[2:]}"

    def render(token: str) -> str:
        if token in surface_of:
            return surface_of[token]
        return hyphenated.get(token, token)

    documents = []
    for year in range(years[0], years[1] + 1):
        for j in range(docs_per_year):
            c = int(rng.integers(n_clusters))
            ring = clusters[c]
            pos = int(rng.integers(len(ring)))
            length = int(rng.integers(doc_length[0], doc_length[1] + 1))
            target = 0 if year < flip_year else flip_to
            toks = []
            for _ in range(length):
                toks.append(ring[pos])
                if c == target and rng.random() < drift_rate:
                    toks.append(drift)
                pos = (pos + int(rng.choice([-2, -1, 1, 2]))) % len(ring)
            words = [render(t) for t in toks]
            cut = min(len(words), int(rng.integers(5, 9)))
            title = " ".join(words[:cut])
            title = title[0].upper() + title[1:]
            abstract = None
            if cut < len(words) and rng.random() < 0.7:
                body = words[cut:]
                mid = len(body) // 2
                abstract = " ".join(body[:mid]) + ", " + " ".join(body[mid:]) + "."
            elif cut < len(words):
                title = title + " " + " ".join(words[cut:])
            documents.append(Document(f"{year}-{j:05d}", year, title, abstract))

    topics = [row[1] for row in lexicon_rows]
    fields = {t: frozenset({1 + i % 3}) if i % 5 else frozenset({1, 2}) for i, t in enumerate(topics)}
    for i, t in enumerate(topics):
        n_major = int(rng.integers(2000, 20000))
        # the last descriptor is deliberately generic (low SID)
        n_non = int(rng.integers(5000, 60000)) if i != len(topics) - 2 else 2_000_000
        if i == len(topics) - 2:
            n_major = 50
        descriptors.append(
            DescriptorStats(f"D{900000 + i:06d}" if t != drift else "D999999", t, n_major, n_non,
                            int(rng.integers(1960, 2000)), fields[t])
        )

    counts = {}
    for t in topics:
        level = float(rng.uniform(200, 2000))
        series = {}
        for year in range(count_years[0], count_years[1] + 1):
            series[year] = int(round(level))
            level *= float(np.exp(rng.normal(0.04, 0.12)))
        counts[t] = TopicYearCounts(t, series)

    return SyntheticCorpus(documents, lexicon_rows, descriptors, counts, drift,
                           flip_year, years, clusters)


# ----------------------------------------------------------------------------
# panels


def simulate_panel(
    n_topics: int = 40,
    years: Sequence[int] = tuple(range(1996, 2006)),
    beta: Sequence[float] = (0.12, 0.05, -0.1),
    sigma_u: float = 0.0,
    sigma_e: float = 1.0,
    effect_corr: float = 0.0,
    year_shift: float = 0.0,
    n_fields: int = 3,
    delta: int = 1,
    seed: int = 0,
) -> PanelDataset:
    """Balanced panel from ``y = 1 + u_i + X b + field_i + year_t + e``.

    ``effect_corr`` is the correlation between the topic effect ``u_i`` and the
    topic-level mean of the novelty regressor; ``year_shift`` scales planted
    year effects.
    """
    rng = np.random.default_rng(seed)
    years = list(years)
    z = rng.standard_normal(n_topics)
    w = rng.standard_normal(n_topics)
    u = sigma_u * z
    nov_mean = 12.0 + 3.0 * (effect_corr * z + np.sqrt(1.0 - effect_corr ** 2) * w)
    est = rng.integers(1950, 1995, size=n_topics)
    field = 1 + rng.integers(n_fields, size=n_topics)
    field_effect = {f: 0.3 * (f - 1) for f in range(1, n_fields + 1)}
    year_effect = {yr: year_shift * rng.standard_normal() for yr in years}
    rows = []
    for i in range(n_topics):
        for yr in years:
            nov = nov_mean[i] + 2.0 * rng.standard_normal()
            g = 5.0 + 10.0 * rng.standard_normal()
            age = float(yr - est[i])
            y = (1.0 + u[i] + beta[0] * nov + beta[1] * g + beta[2] * age
                 + field_effect[int(field[i])] + year_effect[yr] + sigma_e * rng.standard_normal())
            rows.append(PanelRow(f"T{i:03d}", yr, delta, y, nov, g, age, int(field[i])))
    return PanelDataset(rows)


def planted_window_panels(
    n_topics: int = 60,
    years: Sequence[int] = tuple(range(1996, 2006)),
    wins: Sequence[int] = tuple(range(1, 11)),
    deltas: Sequence[int] = tuple(range(1, 11)),
    effect_win: int = 7,
    beta: float = 0.5,
    window_noise: float = 3.0,
    sigma_u: float = 1.0,
    sigma_e: float = 2.0,
    seed: int = 0,
) -> dict[int, dict[int, PanelDataset]]:
    """Panels for every (window, lead) where growth responds only to one window's novelty.

    Novelty at other windows is the planted window's novelty plus independent
    noise, so their coefficients are attenuated towards zero.
    """
    rng = np.random.default_rng(seed)
    years = list(years)
    shape = (n_topics, len(years))
    base = 12.0 + 2.0 * rng.standard_normal((n_topics, 1)) + 4.0 * rng.standard_normal(shape)
    nov = {
        w: base if w == effect_win else base + window_noise * rng.standard_normal(shape)
        for w in wins
    }
    g = 5.0 + 10.0 * rng.standard_normal(shape)
    est = rng.integers(1950, 1995, size=n_topics)
    field = 1 + rng.integers(3, size=n_topics)
    u = sigma_u * rng.standard_normal(n_topics)
    panels: dict[int, dict[int, PanelDataset]] = {w: {} for w in wins}
    for d in deltas:
        e = sigma_e * rng.standard_normal(shape)
        y = 1.0 + u[:, None] + beta * base + 0.05 * g + 0.3 * (field[:, None] - 1) + e
        for w in wins:
            rows = [
                PanelRow(f"T{i:03d}", yr, d, float(y[i, j]), float(nov[w][i, j]), float(g[i, j]),
                         float(yr - est[i]), int(field[i]))
                for i in range(n_topics) for j, yr in enumerate(years)
            ]
            panels[w][d] = PanelDataset(rows)
    return panels

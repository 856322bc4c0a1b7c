"""Semantic-change novelty scores and display-term selection over an aligned series."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .align import AlignedSeries, cos_sim
from .errors import NoHistoryError, TopicMissingError

MISSING_TOPIC = "missing_topic"
NO_HISTORY = "no_history"


def _topic_vector(series: AlignedSeries, topic: str, year: int) -> np.ndarray | None:
    if year not in series:
        return None
    emb = series[year]
    if topic not in emb.vocab:
        return None
    vec = emb.vector(topic)
    if not np.any(vec):
        return None
    return vec


def novelty(series: AlignedSeries, topic: str, t: int, win: int) -> float:
    """One minus the best cosine between the topic at ``t`` and its last ``win`` periods.

    Periods in ``t-win .. t-1`` where the topic is absent are skipped; at least
    one must remain.
    """
    if win < 1:
        raise ValueError(f"win must be >= 1, got {win}")
    current = _topic_vector(series, topic, t)
    if current is None:
        raise TopicMissingError(f"{topic!r} has no vector in period {t}")
    best = None
    for lag in range(1, win + 1):
        past = _topic_vector(series, topic, t - lag)
        if past is None:
            continue
        c = cos_sim(past, current)
        best = c if best is None else max(best, c)
    if best is None:
        raise NoHistoryError(f"{topic!r} has no vector in periods {t - win}..{t - 1}")
    return 1.0 - best


@dataclass
class NoveltySeries:
    topic: str
    values: dict[tuple[int, int], float] = field(default_factory=dict)
    missing: dict[tuple[int, int], str] = field(default_factory=dict)
    coverage: list[int] = field(default_factory=list)

    def get(self, year: int, win: int) -> float | None:
        return self.values.get((year, win))

    def windows(self) -> list[int]:
        return sorted({w for _, w in self.values} | {w for _, w in self.missing})


def novelty_table(
    series: AlignedSeries,
    topics: Iterable[str],
    wins: Iterable[int],
) -> dict[str, NoveltySeries]:
    """Novelty for every (topic, year, win); uncomputable cells carry a reason instead."""
    wins = sorted(set(wins))
    table: dict[str, NoveltySeries] = {}
    for topic in sorted(set(topics)):
        ns = NoveltySeries(topic)
        ns.coverage = [y for y in series.periods if _topic_vector(series, topic, y) is not None]
        for year in series.periods:
            for win in wins:
                try:
                    ns.values[(year, win)] = novelty(series, topic, year, win)
                except TopicMissingError:
                    ns.missing[(year, win)] = MISSING_TOPIC
                except NoHistoryError:
                    ns.missing[(year, win)] = NO_HISTORY
        table[topic] = ns
    return table


def novelty_csv(table: Mapping[str, NoveltySeries]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["topic", "year", "win", "novelty", "status"])
    for topic in sorted(table):
        ns = table[topic]
        for year, win in sorted(set(ns.values) | set(ns.missing)):
            if (year, win) in ns.values:
                writer.writerow([topic, year, win, repr(float(ns.values[(year, win)])), "ok"])
            else:
                writer.writerow([topic, year, win, "", ns.missing[(year, win)]])
    return buf.getvalue()


def read_novelty_csv(text: str) -> dict[str, NoveltySeries]:
    table: dict[str, NoveltySeries] = {}
    for row in csv.DictReader(io.StringIO(text)):
        ns = table.setdefault(row["topic"], NoveltySeries(row["topic"]))
        key = (int(row["year"]), int(row["win"]))
        if row["status"] == "ok":
            ns.values[key] = float(row["novelty"])
        else:
            ns.missing[key] = row["status"]
    for ns in table.values():
        present = {y for y, _ in ns.values} | {
            y for (y, _), why in ns.missing.items() if why != MISSING_TOPIC
        }
        ns.coverage = sorted(present)
    return table


def neighbors(series: AlignedSeries, topic: str, t: int, k: int) -> list[str]:
    """Top-``k`` tokens by cosine to ``topic`` in period ``t``; ties go to the smaller token."""
    query = _topic_vector(series, topic, t)
    if query is None:
        raise TopicMissingError(f"{topic!r} has no vector in period {t}")
    if k <= 0:
        return []
    emb = series[t]
    mat = np.asarray(emb.input_vectors, dtype=np.float64)
    norms = np.linalg.norm(mat, axis=1)
    ok = norms > 0
    sims = np.full(len(mat), -np.inf)
    sims[ok] = np.clip(mat[ok] @ query / (norms[ok] * np.linalg.norm(query)), -1.0, 1.0)
    ranked = sorted(
        (
            (-sims[i], tok)
            for i, tok in enumerate(emb.vocab.tokens)
            if tok != topic and ok[i]
        )
    )
    return [tok for _, tok in ranked[:k]]


def select_display_terms(
    series: AlignedSeries,
    topic: str,
    years: Iterable[int],
    k: int = 10,
    threshold: float = 0.5,
) -> dict[int, list[str]]:
    """Per-year related terms, dropping repeats whose meaning has not moved.

    A neighbor already shown in an earlier year ``t'`` is kept at ``t`` only if
    its own vectors satisfy ``cos(w_t, w_t') < threshold`` for every such
    earlier year.
    """
    shown: dict[str, list[int]] = {}
    out: dict[int, list[str]] = {}
    for year in sorted(years):
        kept = []
        for term in neighbors(series, topic, year, k):
            earlier = shown.get(term, [])
            here = series[year].vector(term)
            if all(cos_sim(here, series[e].vector(term)) < threshold for e in earlier):
                kept.append(term)
        for term in kept:
            shown.setdefault(term, []).append(year)
        out[year] = kept
    return out

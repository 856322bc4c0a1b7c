"""Descriptor specificity, topic selection and publication growth."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import DuplicateError, MissingDataError, UndefinedGrowthError

INTER_FIELD = 17
N_FIELDS = 16


@dataclass(frozen=True)
class DescriptorStats:
    descriptor_id: str
    canonical_token: str
    n_major: int
    n_nonmajor: int
    established_year: int
    field_codes: frozenset[int] = frozenset()

    def __post_init__(self):
        if self.n_major < 0 or self.n_nonmajor < 0:
            raise ValueError(f"{self.descriptor_id}: counts must be >= 0")
        bad = [c for c in self.field_codes if not 1 <= c <= N_FIELDS]
        if bad:
            raise ValueError(f"{self.descriptor_id}: field codes {bad} outside 1..{N_FIELDS}")

    @property
    def field(self) -> int:
        """Single branch code, or the inter-field code when several branches apply."""
        if len(self.field_codes) == 1:
            return next(iter(self.field_codes))
        if not self.field_codes:
            raise ValueError(f"{self.descriptor_id}: no field codes")
        return INTER_FIELD


@dataclass
class TopicYearCounts:
    topic: str
    counts: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        neg = {y: c for y, c in self.counts.items() if c < 0}
        if neg:
            raise ValueError(f"{self.topic}: negative publication counts {neg}")


def sid(n_major: int, n_nonmajor: int, total: int) -> float:
    """``n_major * ln(total / (n_major + n_nonmajor))``; zero when ``n_major`` is zero."""
    if total <= 0:
        raise ValueError("total publication count must be positive")
    if n_major < 0 or n_nonmajor < 0:
        raise ValueError("counts must be non-negative")
    indexed = n_major + n_nonmajor
    if indexed > total:
        raise ValueError(f"indexed publications ({indexed}) exceed the total ({total})")
    if n_major == 0:
        return 0.0
    return n_major * math.log(total / indexed)


def longest_run(years: Iterable[int]) -> int:
    best = run = 0
    prev = None
    for y in sorted(set(years)):
        run = run + 1 if prev is not None and y == prev + 1 else 1
        best = max(best, run)
        prev = y
    return best


def select_topics(
    stats: Iterable[DescriptorStats],
    period_token_counts: Mapping[tuple[str, int], int],
    observed: range,
    total: int,
    sid_threshold: float = 1000.0,
    min_token_count: int = 50,
) -> set[str]:
    """Topics that are specific enough and frequent enough in the training text.

    A topic needs ``SID > sid_threshold`` and a run of at least half the
    observed years (rounded up) in which its token occurs more than
    ``min_token_count`` times.
    """
    years = list(observed)
    if not years:
        raise ValueError("observed year range is empty")
    need = math.ceil(len(years) / 2)
    chosen = set()
    for st in stats:
        if sid(st.n_major, st.n_nonmajor, total) <= sid_threshold:
            continue
        frequent = [
            y for y in years
            if period_token_counts.get((st.canonical_token, y), 0) > min_token_count
        ]
        if longest_run(frequent) >= need:
            chosen.add(st.canonical_token)
    return chosen


def growth(counts: TopicYearCounts, t: int) -> float:
    """Year-over-year percent change in publication count."""
    for year in (t, t - 1):
        if year not in counts.counts:
            raise MissingDataError(f"{counts.topic}: no publication count for {year}")
    before = counts.counts[t - 1]
    if before == 0:
        raise UndefinedGrowthError(f"{counts.topic}: zero publications in {t - 1}")
    return (counts.counts[t] - before) / before * 100.0


def topic_age(stats: DescriptorStats, t: int) -> int:
    if t < stats.established_year:
        raise ValueError(
            f"{stats.descriptor_id}: year {t} precedes establishment in {stats.established_year}"
        )
    return t - stats.established_year


def _parse_fields(raw: str) -> frozenset[int]:
    return frozenset(int(p) for p in raw.replace(",", ";").split(";") if p.strip())


def read_descriptor_stats(text: str) -> list[DescriptorStats]:
    """Parse ``descriptor_id,canonical_token,n_major,n_nonmajor,established_year,field_codes``.

    ``field_codes`` is a ``;``-separated list of branch numbers.
    """
    out = []
    seen = set()
    for row in csv.DictReader(io.StringIO(text)):
        token = row["canonical_token"]
        if token in seen:
            raise DuplicateError(f"duplicate descriptor token {token!r}")
        seen.add(token)
        out.append(
            DescriptorStats(
                descriptor_id=row["descriptor_id"],
                canonical_token=token,
                n_major=int(row["n_major"]),
                n_nonmajor=int(row["n_nonmajor"]),
                established_year=int(row["established_year"]),
                field_codes=_parse_fields(row["field_codes"]),
            )
        )
    return out


def descriptor_stats_csv(stats: Iterable[DescriptorStats]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["descriptor_id", "canonical_token", "n_major", "n_nonmajor", "established_year", "field_codes"])
    for s in stats:
        w.writerow([s.descriptor_id, s.canonical_token, s.n_major, s.n_nonmajor,
                    s.established_year, ";".join(str(c) for c in sorted(s.field_codes))])
    return buf.getvalue()


def read_topic_counts(text: str) -> dict[str, TopicYearCounts]:
    out: dict[str, TopicYearCounts] = {}
    for row in csv.DictReader(io.StringIO(text)):
        tc = out.setdefault(row["topic"], TopicYearCounts(row["topic"]))
        year = int(row["year"])
        if year in tc.counts:
            raise DuplicateError(f"duplicate count for ({row['topic']!r}, {year})")
        count = int(row["count"])
        if count < 0:
            raise ValueError(f"negative count for ({row['topic']!r}, {year})")
        tc.counts[year] = count
    return out


def topic_counts_csv(counts: Mapping[str, TopicYearCounts]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["topic", "year", "count"])
    for topic in sorted(counts):
        for year in sorted(counts[topic].counts):
            w.writerow([topic, year, counts[topic].counts[year]])
    return buf.getvalue()

"""Document records, text normalization, phrase merging and per-year bucketing."""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import DuplicateError, LexiconError, YearRangeError

URL_TOKEN = "<url>"

_URL_RE = re.compile(r"(?:https?://|ftp://|www\.)\S+", re.IGNORECASE)
# hyphen-like characters joining two word characters: "anti-viral" -> "antiviral"
_INTRA_DASH_RE = re.compile(r"(?<=\w)[-‐‑](?=\w)")
_NON_WORD_RE = re.compile(r"[^\w]+")
_NON_WORD_KEEP_PARENS_RE = re.compile(r"[^\w()]+")
_PARENS_RE = re.compile(r"([()])")


@dataclass(frozen=True)
class Document:
    id: str
    year: int
    title: str
    abstract: str | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("document id must be nonempty")
        if not self.title or not self.title.strip():
            raise ValueError(f"document {self.id!r} has an empty title")
        if isinstance(self.year, bool) or not isinstance(self.year, int):
            raise TypeError(f"document {self.id!r}: year must be an int, got {self.year!r}")

    @property
    def text(self) -> str:
        if self.abstract:
            return f"{self.title}\n{self.abstract}"
        return self.title


def _tokenize(raw: str, keep_parens: bool) -> list[str]:
    tokens: list[str] = []
    pos = 0
    for m in _URL_RE.finditer(raw):
        tokens.extend(_tokenize_plain(raw[pos:m.start()], keep_parens))
        tokens.append(URL_TOKEN)
        pos = m.end()
    tokens.extend(_tokenize_plain(raw[pos:], keep_parens))
    return tokens


def _tokenize_plain(text: str, keep_parens: bool) -> list[str]:
    text = _INTRA_DASH_RE.sub("", text).lower()
    if keep_parens:
        text = _PARENS_RE.sub(r" \1 ", _NON_WORD_KEEP_PARENS_RE.sub(" ", text))
    else:
        text = _NON_WORD_RE.sub(" ", text)
    # a handful of code points are still cased after lower(); drop them
    return [t for t in (_strip_cased(w) for w in text.split()) if t]


def _strip_cased(word: str) -> str:
    if word.islower() or not any(c.isupper() for c in word):
        return word
    return "".join(c for c in word if not c.isupper())


def normalize_text(raw: str) -> list[str]:
    """Lowercase, join hyphenated words, replace URLs and drop punctuation.

    Underscores survive so that already-merged phrase tokens stay intact.

    >>> normalize_text("Anti-viral drugs, see http://x.org now")
    ['antiviral', 'drugs', 'see', '<url>', 'now']
    """
    return _tokenize(raw, keep_parens=False)


class Lexicon:
    """Multi-word surface phrases mapped to single canonical tokens.

    Surface phrases are normalized with :func:`normalize_text` on entry, so
    matching is case-insensitive. A canonical token may not reappear as a word
    of any surface phrase; that keeps :func:`apply_lexicon` idempotent.
    """

    def __init__(self, entries: Iterable[tuple[str, str, str]] = ()):
        self.entries: dict[tuple[str, ...], str] = {}
        self.provenance: dict[tuple[str, ...], str] = {}
        self.max_len = 0
        self._words: set[str] = set()
        self._canonical: set[str] = set()
        for surface, canonical, descriptor_id in entries:
            self.add(surface, canonical, descriptor_id)

    def add(self, surface: str, canonical: str, descriptor_id: str = "") -> None:
        key = tuple(normalize_text(surface))
        if not key:
            raise LexiconError(f"surface phrase {surface!r} is empty after normalization")
        if not canonical or any(c.isspace() for c in canonical):
            raise LexiconError(f"canonical token {canonical!r} must be nonempty without whitespace")
        existing = self.entries.get(key)
        if existing is not None and existing != canonical:
            raise LexiconError(
                f"surface phrase {' '.join(key)!r} maps to both {existing!r} and {canonical!r}"
            )
        clash = (set(key) & (self._canonical | {canonical})) | ({canonical} & self._words)
        if clash:
            raise LexiconError(f"canonical token(s) {sorted(clash)} also occur inside surface phrases")
        self._words.update(key)
        self._canonical.add(canonical)
        self.entries[key] = canonical
        self.provenance[key] = descriptor_id
        self.max_len = max(self.max_len, len(key))

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, phrase: str) -> bool:
        return tuple(normalize_text(phrase)) in self.entries

    def canonical_tokens(self) -> set[str]:
        return set(self._canonical)


def apply_lexicon(tokens: Sequence[str], lexicon: Lexicon) -> list[str]:
    """Replace lexicon phrases by their canonical token, longest match first."""
    out: list[str] = []
    i, n = 0, len(tokens)
    entries = lexicon.entries
    while i < n:
        for length in range(min(lexicon.max_len, n - i), 0, -1):
            canonical = entries.get(tuple(tokens[i:i + length]))
            if canonical is not None:
                out.append(canonical)
                i += length
                break
        else:
            out.append(tokens[i])
            i += 1
    return out


def _is_word(token: str) -> bool:
    return token not in ("(", ")", URL_TOKEN)


def _acronym_phrase(tokens: Sequence[str], end: int, acronym: str) -> list[str] | None:
    """Find the shortest run of words ending at ``end`` whose initials spell ``acronym``.

    The first word must start with the acronym's first letter and the remaining
    letters must appear, in order, among the initials of the following words.
    """
    m = len(acronym)
    for n in range(m, m + 3):
        start = end - n
        if start < 0:
            return None
        words = tokens[start:end]
        if not all(_is_word(w) for w in words) or acronym in words:
            return None
        initials = [w[0].lower() for w in words]
        if initials[0] != acronym[0]:
            continue
        it = iter(initials[1:])
        if all(ch in it for ch in acronym[1:]):
            return list(words)
    return None


def expand_acronyms(tokens: Sequence[str]) -> list[str]:
    """Replace acronyms by the phrase that defined them earlier in the same token list.

    A definition is ``phrase ( acr )``. The definition itself is kept; later
    standalone occurrences of ``acr`` become the underscore-joined phrase.
    """
    mapping: dict[str, str] = {}
    out: list[str] = []
    i, n = 0, len(tokens)
    while i < n:
        tok = tokens[i]
        if tok == "(" and i + 2 < n and tokens[i + 2] == ")":
            acr = tokens[i + 1]
            if acr.isalpha() and 2 <= len(acr) <= 10:
                phrase = _acronym_phrase(tokens, i, acr)
                if phrase is not None:
                    mapping[acr] = "_".join(phrase)
            out.extend(tokens[i:i + 3])
            i += 3
            continue
        out.append(mapping.get(tok, tok))
        i += 1
    return out


def preprocess_document(doc: Document, lexicon: Lexicon | None = None) -> list[str]:
    """Normalize, merge lexicon phrases, expand acronyms, then drop parentheses."""
    tokens = _tokenize(doc.text, keep_parens=True)
    if lexicon is not None and len(lexicon):
        tokens = apply_lexicon(tokens, lexicon)
    tokens = expand_acronyms(tokens)
    return [t for t in tokens if t not in ("(", ")")]


@dataclass
class PeriodCorpus:
    period: int
    documents: list[list[str]] = field(default_factory=list)
    token_counts: Counter = field(default_factory=Counter)

    @classmethod
    def from_token_lists(cls, period: int, documents: Iterable[Sequence[str]]) -> "PeriodCorpus":
        docs = [list(d) for d in documents]
        counts: Counter = Counter()
        for d in docs:
            counts.update(d)
        return cls(period, docs, counts)

    def n_tokens(self) -> int:
        return sum(self.token_counts.values())

    def is_consistent(self) -> bool:
        census: Counter = Counter()
        for d in self.documents:
            census.update(d)
        return +census == +self.token_counts


def bucket_by_period(
    documents: Iterable[Document],
    years: tuple[int, int] | None = None,
    lexicon: Lexicon | None = None,
) -> dict[int, PeriodCorpus]:
    """Preprocess documents and group their token lists by calendar year.

    ``years`` is an inclusive ``(first, last)`` range; a document outside it
    raises :class:`YearRangeError`. Returns buckets in ascending year order.
    """
    token_lists: dict[int, list[list[str]]] = {}
    seen: set[str] = set()
    for doc in documents:
        if doc.id in seen:
            raise DuplicateError(f"duplicate document id {doc.id!r}")
        seen.add(doc.id)
        if years is not None and not (years[0] <= doc.year <= years[1]):
            raise YearRangeError(
                f"document {doc.id!r} has year {doc.year}, outside {years[0]}..{years[1]}"
            )
        token_lists.setdefault(doc.year, []).append(preprocess_document(doc, lexicon))
    return {
        year: PeriodCorpus.from_token_lists(year, token_lists[year])
        for year in sorted(token_lists)
    }


def iter_documents(path: str | Path) -> Iterator[Document]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                yield Document(
                    id=str(rec["id"]),
                    year=int(rec["year"]),
                    title=rec["title"],
                    abstract=rec.get("abstract") or None,
                )
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad document record ({exc})") from exc


def read_documents(path: str | Path) -> list[Document]:
    return list(iter_documents(path))


def write_documents(documents: Iterable[Document], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for d in documents:
            rec = {"id": d.id, "year": d.year, "title": d.title, "abstract": d.abstract}
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def read_lexicon(path: str | Path) -> Lexicon:
    lex = Lexicon()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise LexiconError(f"{path}:{lineno}: expected surface<TAB>canonical<TAB>descriptor_id")
            descriptor_id = parts[2] if len(parts) > 2 else ""
            lex.add(parts[0], parts[1], descriptor_id)
    return lex


def read_period_corpus(path: str | Path, period: int) -> PeriodCorpus:
    """Load a tokenized period file: one document per line, tokens space-separated."""
    with open(path, encoding="utf-8") as fh:
        return PeriodCorpus.from_token_lists(period, (line.split() for line in fh))


def format_period_corpus(corpus: PeriodCorpus) -> str:
    return "".join(" ".join(doc) + "\n" for doc in corpus.documents)


def token_counts_by_year(buckets: Mapping[int, PeriodCorpus]) -> dict[tuple[str, int], int]:
    return {
        (tok, year): cnt
        for year, pc in buckets.items()
        for tok, cnt in pc.token_counts.items()
    }

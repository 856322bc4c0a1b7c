from __future__ import annotations

import json
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from topicnovelty.corpus import (
    Document,
    Lexicon,
    PeriodCorpus,
    apply_lexicon,
    bucket_by_period,
    expand_acronyms,
    normalize_text,
    preprocess_document,
    read_documents,
    read_lexicon,
    read_period_corpus,
    format_period_corpus,
    write_documents,
)
from topicnovelty.errors import DuplicateError, LexiconError, YearRangeError


# normalize_text goldens, derived by applying the dash, URL and case rules by hand

@pytest.mark.parametrize(
    "raw, expected",
    [
        ("", []),
        ("Anti-viral drugs", ["antiviral", "drugs"]),
        ("see http://x.org now", ["see", "<url>", "now"]),
        ("Visit www.example.com/a?b=1, then stop.", ["visit", "<url>", "then", "stop"]),
        ("T-cell  receptor;  (TCR) signalling", ["tcell", "receptor", "tcr", "signalling"]),
        ("Dose - response", ["dose", "response"]),
        ("IL-2/IL-4 ratio", ["il2", "il4", "ratio"]),
        ("  \n\t ", []),
        ("Über-große Zellen", ["übergroße", "zellen"]),
    ],
)
def test_normalize_golden(raw, expected):
    assert normalize_text(raw) == expected


@given(st.text(max_size=200))
def test_normalize_lowercase_nonempty(raw):
    toks = normalize_text(raw)
    for t in toks:
        assert t
        assert t == t.lower()
        assert not any(c.isupper() for c in t)
        assert not any(c.isspace() for c in t)


@given(st.text(max_size=120))
def test_normalize_is_stable(raw):
    toks = normalize_text(raw)
    assert normalize_text(" ".join(t for t in toks if t != "<url>")) == [t for t in toks if t != "<url>"]


def hiv_lexicon():
    return Lexicon([("HIV Associated Antibodies", "HIV_Antibodies", "D000001")])


def test_lexicon_merges_phrase():
    assert apply_lexicon(["hiv", "associated", "antibodies"], hiv_lexicon()) == ["HIV_Antibodies"]


def test_lexicon_identity_without_phrase():
    toks = ["cells", "were", "counted"]
    assert apply_lexicon(toks, hiv_lexicon()) == toks


def test_lexicon_prefers_longest():
    lex = Lexicon([("a b", "AB", ""), ("a b c", "ABC", "")])
    assert apply_lexicon(["a", "b", "c"], lex) == ["ABC"]
    assert apply_lexicon(["a", "b", "d"], lex) == ["AB", "d"]


def test_lexicon_rejects_conflicts():
    lex = Lexicon([("a b", "AB", "")])
    with pytest.raises(LexiconError):
        lex.add("a b", "Other", "")
    lex.add("c d", "cd_tok", "")
    with pytest.raises(LexiconError):
        lex.add("x cd_tok", "XCD", "")
    with pytest.raises(LexiconError):
        lex.add("y z", "a", "")
    with pytest.raises(LexiconError):
        lex.add("   ", "Empty", "")
    lex.add("A  B", "AB", "")  # same mapping after normalization is fine
    assert len(lex) == 2


def brute_force_tiling(tokens, phrases):
    """Enumerate every segmentation, keep the one that is longest-leftmost greedy-optimal.

    Segmentations are compared position by position: at the first place they
    differ, the one consuming more tokens wins.
    """
    n = len(tokens)
    best = None

    def rec(i, segs):
        nonlocal best
        if i == n:
            key = [len(s) for s in segs]
            if best is None or _longest_leftmost(key, best[0]):
                best = (key, list(segs))
            return
        for length in range(1, n - i + 1):
            seg = tuple(tokens[i:i + length])
            if length == 1 or seg in phrases:
                segs.append(seg)
                rec(i + length, segs)
                segs.pop()

    rec(0, [])
    return [phrases.get(s, s[0]) if len(s) > 1 or s in phrases else s[0] for s in best[1]]


def _longest_leftmost(a, b):
    for x, y in zip(a, b):
        if x != y:
            return x > y
    return False


@given(
    st.lists(st.sampled_from("abcd"), max_size=9),
    st.sets(st.lists(st.sampled_from("abcd"), min_size=1, max_size=3).map(tuple), max_size=6),
)
def test_lexicon_matches_tiling_oracle(tokens, surfaces):
    lex = Lexicon()
    phrases = {}
    for s in surfaces:
        canon = "P_" + "".join(s)
        lex.add(" ".join(s), canon, "")
        phrases[s] = canon
    assert apply_lexicon(tokens, lex) == brute_force_tiling(tokens, phrases)


@given(
    st.lists(st.sampled_from(["a", "b", "c", "d", "e"]), max_size=20),
    st.sets(st.lists(st.sampled_from("abcde"), min_size=1, max_size=3).map(tuple), max_size=5),
)
def test_lexicon_idempotent(tokens, surfaces):
    lex = Lexicon()
    for s in surfaces:
        lex.add(" ".join(s), "T_" + "".join(s), "")
    once = apply_lexicon(tokens, lex)
    assert apply_lexicon(once, lex) == once


def test_acronym_expansion_epa():
    toks = normalize_text("the environmental protection agency") + ["(", "epa", ")"] + \
        normalize_text("issued new epa rules")
    out = expand_acronyms(toks)
    assert out[-2] == "environmental_protection_agency"
    assert out[:4] == ["the", "environmental", "protection", "agency"]


def test_acronym_through_document_preprocessing():
    doc = Document("1", 2000, "Environmental Protection Agency (EPA) report",
                   "The EPA rules apply.")
    toks = preprocess_document(doc)
    assert "(" not in toks and ")" not in toks
    assert toks[:5] == ["environmental", "protection", "agency", "epa", "report"]
    assert toks[-3] == "environmental_protection_agency"


def test_acronym_allows_skipped_function_word():
    toks = "department of energy ( doe ) funds doe labs".split()
    assert expand_acronyms(toks)[7] == "department_of_energy"


def test_acronym_absent_and_unmatched():
    toks = "no parentheses in this one".split()
    assert expand_acronyms(toks) == toks
    toks = "blue green algae ( xyz ) and xyz".split()
    assert expand_acronyms(toks) == toks


def test_acronym_mapping_is_document_local():
    lex = None
    a = Document("1", 2000, "Magnetic resonance imaging (MRI) of knees")
    b = Document("2", 2000, "MRI of hips")
    assert preprocess_document(a, lex)[-3] == "mri"
    assert preprocess_document(b, lex) == ["mri", "of", "hips"]


def test_document_text_and_validation():
    d = Document("x", 1999, "Title", None)
    assert d.text == "Title"
    d = Document("x", 1999, "Title", "Body")
    assert d.text.split("\n") == ["Title", "Body"]
    with pytest.raises((ValueError, TypeError)):
        Document("", 1999, "t")


def test_bucket_counts():
    docs = [Document("a", 1991, "x"), Document("b", 1991, "y"), Document("c", 1992, "z")]
    buckets = bucket_by_period(docs)
    assert list(buckets) == [1991, 1992]
    assert [len(b.documents) for b in buckets.values()] == [2, 1]
    assert bucket_by_period([]) == {}


def test_bucket_errors():
    docs = [Document("a", 1991, "x"), Document("a", 1992, "y")]
    with pytest.raises(DuplicateError):
        bucket_by_period(docs)
    with pytest.raises(YearRangeError):
        bucket_by_period([Document("a", 1980, "x")], years=(1990, 1995))


def test_bucket_sizes_sum_to_input():
    import numpy as np
    rng = np.random.default_rng(5)
    docs = [Document(str(i), int(1990 + rng.integers(10)), f"word{i % 7} other") for i in range(1000)]
    buckets = bucket_by_period(docs)
    census = Counter(d.year for d in docs)
    assert sum(len(b.documents) for b in buckets.values()) == 1000
    assert {y: len(b.documents) for y, b in buckets.items()} == dict(census)
    for b in buckets.values():
        assert b.is_consistent()


@given(st.lists(st.tuples(st.integers(1990, 1995), st.text(max_size=30)), max_size=30))
def test_bucket_partition_property(items):
    docs = [Document(str(i), y, t if t.strip() else "x") for i, (y, t) in enumerate(items)]
    buckets = bucket_by_period(docs)
    assert sum(len(b.documents) for b in buckets.values()) == len(docs)
    assert list(buckets) == sorted(buckets)
    total = Counter()
    for b in buckets.values():
        total.update(b.token_counts)
    assert total == Counter(t for d in docs for t in preprocess_document(d))


def test_period_corpus_counts():
    pc = PeriodCorpus.from_token_lists(2000, [["a", "b"], ["a"]])
    assert pc.token_counts == Counter({"a": 2, "b": 1})
    assert pc.n_tokens() == 3
    assert pc.is_consistent()


def test_file_round_trips(tmp_path):
    docs = [Document("1", 2001, "Alpha beta", "Gamma."), Document("2", 2002, "Delta", None)]
    path = tmp_path / "docs.jsonl"
    write_documents(docs, path)
    assert read_documents(path) == docs
    for line in path.read_text().splitlines():
        assert set(json.loads(line)) == {"id", "year", "title", "abstract"}

    lex_path = tmp_path / "lex.tsv"
    lex_path.write_text("# comment\nhiv associated antibodies\tHIV_Antibodies\tD1\n\n")
    lex = read_lexicon(lex_path)
    assert lex.provenance[("hiv", "associated", "antibodies")] == "D1"

    pc = PeriodCorpus.from_token_lists(2001, [["a", "b"], ["c"]])
    p = tmp_path / "tokens.txt"
    p.write_text(format_period_corpus(pc))
    assert read_period_corpus(p, 2001).documents == pc.documents


def test_bad_document_record(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text('{"id": "1", "title": "no year"}\n')
    with pytest.raises(ValueError, match="bad.jsonl:1"):
        read_documents(p)

"""Resumable pipeline stages with persisted, digest-tracked intermediates.

Every stage reads its inputs from disk, writes outputs atomically under
``<out>/<stage>/`` and records a ``manifest.json`` with input and output
SHA-256 digests. A stage whose manifest still matches its inputs and
parameters is skipped by :func:`run_pipeline`.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from . import corpus as corpus_mod
from .align import AlignedSeries, align_series
from .embedder import Hyperparams, build_vocab, train_sgns
from .errors import ConfigError, InsufficientDataError, MissingPrerequisiteError
from .novelty import novelty_csv, novelty_table, read_novelty_csv
from .panel import (
    build_panel,
    f_test_time_effects,
    fixed_effects,
    hausman,
    lm_test,
    pooled_ols,
    random_effects,
    window_sweep,
)
from .storage import (
    atomic_write_text,
    read_embedding,
    read_rotations,
    write_embedding,
    write_rotations,
)
from .topics import (
    read_descriptor_stats,
    read_topic_counts,
    select_topics,
    sid,
)
from .viz import build_scene, emit_coevolution, emit_semantic_map

log = logging.getLogger(__name__)

STAGES = ("preprocess", "train", "align", "novelty", "topics", "panel", "viz")
MANIFEST = "manifest.json"
TOTAL_PUBLICATIONS = 26_759_399


@dataclass
class RunConfig:
    documents: Path | None = None
    lexicon: Path | None = None
    descriptors: Path | None = None
    counts: Path | None = None
    out: Path = Path("runs/default")
    years: tuple[int, int] | None = None
    dim: int = 100
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    min_count: int = 5
    learning_rate: float = 0.025
    min_learning_rate: float = 0.0001
    unigram_power: float = 0.75
    sample: float = 0.0
    seed: int = 1
    viz_seed: int = 0
    workers: int = 1
    wins: list[int] = field(default_factory=lambda: list(range(1, 11)))
    deltas: list[int] = field(default_factory=lambda: list(range(1, 11)))
    win: int = 7
    delta: int = 1
    total_publications: int = TOTAL_PUBLICATIONS
    sid_threshold: float = 1000.0
    min_token_count: int = 50
    zmax: float = 3.0
    viz_topics: list[str] = field(default_factory=list)
    viz_count: int = 3
    viz_k: int = 10
    viz_threshold: float = 0.5
    perplexity: float = 10.0
    tsne_iterations: int = 1000
    per_year: bool = False

    def hyperparams(self, seed: int | None = None) -> Hyperparams:
        return Hyperparams(
            dim=self.dim, window=self.window, negatives=self.negatives, epochs=self.epochs,
            initial_learning_rate=self.learning_rate, min_learning_rate=self.min_learning_rate,
            min_count=self.min_count, unigram_power=self.unigram_power, sample=self.sample,
            seed=self.seed if seed is None else seed,
        )

    def year_list(self) -> list[int]:
        assert self.years is not None
        return list(range(self.years[0], self.years[1] + 1))

    def validate(self, stage: str | None = None) -> None:
        if self.years is None:
            raise ConfigError("years is required (e.g. years = 2001..2005)", "years")
        if self.years[0] > self.years[1]:
            raise ConfigError(f"year range {self.years[0]}..{self.years[1]} is empty", "years")
        needed = {
            "preprocess": ("documents", "lexicon"),
            "topics": ("descriptors", "counts"),
            "panel": ("counts",),
            "viz": ("counts",),
            "novelty": ("descriptors",),
        }
        fields_needed = needed.get(stage, ()) if stage else sorted({f for v in needed.values() for f in v})
        for name in fields_needed:
            path = getattr(self, name)
            if name == "lexicon" and path is None:
                continue
            if path is None:
                raise ConfigError(f"{name} path is required", name)
            if not Path(path).exists():
                raise ConfigError(f"{name} path {path} does not exist", name)
        try:
            self.hyperparams()
        except ValueError as exc:
            # name the first offending config key
            first = str(exc).split(": ", 1)[-1].split()[0]
            field = {"initial_learning_rate": "learning_rate"}.get(first, first)
            raise ConfigError(str(exc), field) from exc
        for name in ("wins", "deltas"):
            vals = getattr(self, name)
            if not vals or min(vals) < 1:
                raise ConfigError(f"{name} must be a nonempty list of integers >= 1", name)
        if self.win < 1:
            raise ConfigError("win must be >= 1", "win")
        if self.delta < 1:
            raise ConfigError("delta must be >= 1", "delta")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1", "workers")


_LIST_INT = {"wins", "deltas"}
_LIST_STR = {"viz_topics"}
_PATHS = {"documents", "lexicon", "descriptors", "counts", "out"}


def parse_years(text: str) -> tuple[int, int]:
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            return int(a), int(b)
        y = int(text)
        return y, y
    except ValueError:
        raise ConfigError(f"bad year range {text!r}; expected A..B", "years") from None


def _parse_int_list(text: str, name: str) -> list[int]:
    out: list[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            if ".." in part:
                a, b = part.split("..", 1)
                out.extend(range(int(a), int(b) + 1))
            else:
                out.append(int(part))
    except ValueError:
        raise ConfigError(f"bad integer list {text!r} for {name}", name) from None
    return out


def coerce_value(name: str, raw: str, base: Path | None = None):
    """Convert a textual config value to the type of ``RunConfig.<name>``."""
    kinds = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    if name not in kinds:
        raise ConfigError(f"unknown config key {name!r}", name)
    raw = raw.strip()
    if name in _PATHS:
        p = Path(raw).expanduser()
        # input paths are relative to the config file, the output dir to the cwd
        if base is not None and name != "out" and not p.is_absolute():
            p = base / p
        return p
    if name == "years":
        return parse_years(raw)
    if name in _LIST_INT:
        return _parse_int_list(raw, name)
    if name in _LIST_STR:
        return [s.strip() for s in raw.split(",") if s.strip()]
    default = getattr(RunConfig(), name)
    try:
        if isinstance(default, bool):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {name}", name) from None
    return raw


def read_config_file(path: str | Path) -> dict:
    """``key = value`` lines; ``#`` starts a comment; relative paths resolve against the file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist", "config")
    values = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value", "config")
        key, raw = (s.strip() for s in line.split("=", 1))
        values[key] = coerce_value(key, raw, base=path.parent)
    return values


def make_config(file_values: dict | None = None, overrides: dict | None = None) -> RunConfig:
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return RunConfig(**merged)


# ----------------------------------------------------------------------------
# manifests and digests


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _rel(path: Path, out: Path) -> str:
    try:
        return path.resolve().relative_to(out.resolve()).as_posix()
    except ValueError:
        return str(path.resolve())


@dataclass
class StageReport:
    stage: str
    inputs: dict[str, str]
    outputs: dict[str, str]
    params: dict
    seconds: float
    skipped: bool = False

    def to_dict(self) -> dict:
        return {"stage": self.stage, "inputs": self.inputs, "outputs": self.outputs,
                "params": self.params, "seconds": round(self.seconds, 3)}


def read_manifest(out: Path, stage: str) -> dict | None:
    path = out / stage / MANIFEST
    if not path.exists():
        return None
    return json.loads(path.read_text(encoding="utf-8"))


def _upstream_outputs(cfg: RunConfig, stage: str, filt: Callable[[str], bool] | None = None) -> list[Path]:
    man = read_manifest(cfg.out, stage)
    if man is None:
        raise MissingPrerequisiteError(
            f"missing {stage}/{MANIFEST}; run the `{stage}` stage first", f"{stage}/{MANIFEST}"
        )
    paths = []
    for rel in man["outputs"]:
        p = cfg.out / rel
        if not p.exists():
            raise MissingPrerequisiteError(f"missing artifact {rel}; re-run `{stage}`", rel)
        if filt is None or filt(rel):
            paths.append(p)
    return paths


# ----------------------------------------------------------------------------
# stages


def _stage_preprocess(cfg: RunConfig, sdir: Path):
    docs = corpus_mod.read_documents(cfg.documents)
    lexicon = corpus_mod.read_lexicon(cfg.lexicon) if cfg.lexicon else None
    buckets = corpus_mod.bucket_by_period(docs, cfg.years, lexicon)
    outputs = []
    for year, pc in buckets.items():
        p = sdir / f"tokens_{year}.txt"
        atomic_write_text(p, corpus_mod.format_period_corpus(pc))
        outputs.append(p)
    lines = ["token,year,count"]
    for year, pc in buckets.items():
        for tok in sorted(pc.token_counts):
            lines.append(f"{tok},{year},{pc.token_counts[tok]}")
    p = sdir / "token_counts.csv"
    atomic_write_text(p, "\n".join(lines) + "\n")
    outputs.append(p)
    inputs = [cfg.documents] + ([cfg.lexicon] if cfg.lexicon else [])
    return inputs, outputs


def _period_of(path: Path) -> int:
    return int(path.stem.rsplit("_", 1)[1])


def _stage_train(cfg: RunConfig, sdir: Path):
    inputs = _upstream_outputs(cfg, "preprocess", lambda r: r.endswith(".txt"))
    outputs = []
    for i, path in enumerate(sorted(inputs, key=_period_of)):
        year = _period_of(path)
        pc = corpus_mod.read_period_corpus(path, year)
        hp = cfg.hyperparams(seed=cfg.seed + i)
        emb = train_sgns(pc, build_vocab(pc, hp.min_count), hp, workers=cfg.workers)
        out = sdir / f"embedding_{year}.temb"
        write_embedding(emb, out)
        outputs.append(out)
    return inputs, outputs


def load_aligned(cfg: RunConfig) -> AlignedSeries:
    paths = _upstream_outputs(cfg, "align")
    embs = sorted((read_embedding(p) for p in paths if p.suffix == ".temb"), key=lambda e: e.period)
    rot_path = next(p for p in paths if p.suffix == ".trot")
    rotations, _ = read_rotations(rot_path)
    return AlignedSeries([e.period for e in embs], embs, rotations)


def _stage_align(cfg: RunConfig, sdir: Path):
    inputs = _upstream_outputs(cfg, "train")
    embs = sorted((read_embedding(p) for p in inputs), key=lambda e: e.period)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        series = align_series(embs)
    for w in caught:
        log.warning("%s", w.message)
    outputs = []
    for emb in series.matrices:
        p = sdir / f"aligned_{emb.period}.temb"
        write_embedding(emb, p)
        outputs.append(p)
    p = sdir / "rotations.trot"
    write_rotations(series.rotations, series.steps(), p)
    outputs.append(p)
    return inputs, outputs


def _stage_novelty(cfg: RunConfig, sdir: Path):
    inputs = _upstream_outputs(cfg, "align")
    series = load_aligned(cfg)
    stats = read_descriptor_stats(Path(cfg.descriptors).read_text(encoding="utf-8"))
    topics = [s.canonical_token for s in stats]
    table = novelty_table(series, topics, cfg.wins)
    p = sdir / "novelty.csv"
    atomic_write_text(p, novelty_csv(table))
    return inputs + [cfg.descriptors], [p]


def _read_token_counts(path: Path) -> dict[tuple[str, int], int]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            tok, year, cnt = line.rstrip("\n").rsplit(",", 2)
            out[(tok, int(year))] = int(cnt)
    return out


def _stage_topics(cfg: RunConfig, sdir: Path):
    tc_path = next(iter(_upstream_outputs(cfg, "preprocess", lambda r: r.endswith("token_counts.csv"))))
    stats = read_descriptor_stats(Path(cfg.descriptors).read_text(encoding="utf-8"))
    token_counts = _read_token_counts(tc_path)
    chosen = select_topics(stats, token_counts, range(cfg.years[0], cfg.years[1] + 1),
                           cfg.total_publications, cfg.sid_threshold, cfg.min_token_count)
    lines = ["topic,descriptor_id,sid,field,established_year"]
    for s in sorted(stats, key=lambda s: s.canonical_token):
        if s.canonical_token in chosen:
            score = sid(s.n_major, s.n_nonmajor, cfg.total_publications)
            lines.append(f"{s.canonical_token},{s.descriptor_id},{score!r},{s.field},{s.established_year}")
    p = sdir / "selected.csv"
    atomic_write_text(p, "\n".join(lines) + "\n")
    return [tc_path, cfg.descriptors], [p]


def _read_selected(path: Path) -> list[dict]:
    import csv
    with open(path, encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _stage_panel(cfg: RunConfig, sdir: Path):
    nov_path = _upstream_outputs(cfg, "novelty")[0]
    sel_path = _upstream_outputs(cfg, "topics")[0]
    selected = _read_selected(sel_path)
    table = read_novelty_csv(nov_path.read_text(encoding="utf-8"))
    counts = read_topic_counts(Path(cfg.counts).read_text(encoding="utf-8"))
    chosen = {r["topic"] for r in selected}
    novelties = {t: ns for t, ns in table.items() if t in chosen}
    established = {r["topic"]: int(r["established_year"]) for r in selected}
    fields = {r["topic"]: int(r["field"]) for r in selected}
    years = cfg.year_list()

    def make(win, delta):
        return build_panel(novelties, counts, established, fields, delta, win, cfg.zmax, years)

    outputs = []
    main = make(cfg.win, cfg.delta)
    p = sdir / f"panel_win{cfg.win}_delta{cfg.delta}.csv"
    atomic_write_text(p, main.to_csv())
    outputs.append(p)

    results: dict = {"win": cfg.win, "delta": cfg.delta, "n_obs": len(main),
                     "n_topics": main.n_topics, "balanced": main.balanced, "models": {}, "tests": {}}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        pooled = pooled_ols(main)
        results["models"]["pooled"] = pooled.to_dict()
        fe = re = None
        for name, fn in (("fixed", fixed_effects), ("random", random_effects)):
            try:
                res = fn(main)
            except InsufficientDataError as exc:
                results["models"][name] = {"error": str(exc)}
                continue
            results["models"][name] = res.to_dict()
            if name == "fixed":
                fe = res
            else:
                re = res
        for name, fn in (("f_test", lambda: f_test_time_effects(main)),
                         ("lm_test", lambda: lm_test(main, pooled)),
                         ("hausman", lambda: hausman(fe, re) if fe and re else None)):
            try:
                t = fn()
            except InsufficientDataError as exc:
                results["tests"][name] = {"error": str(exc)}
                continue
            if t is not None:
                results["tests"][name] = t.to_dict()
    results["warnings"] = sorted({str(w.message) for w in caught})
    results["preferred_model"] = _preferred_model(results["tests"])

    panels: dict[int, dict] = {}
    for win in cfg.wins:
        panels[win] = {}
        for delta in cfg.deltas:
            try:
                panels[win][delta] = make(win, delta)
            except InsufficientDataError:
                pass
    grid = window_sweep(panels, cfg.deltas)
    results["best_window_by_delta"] = {str(d): grid.best_window(d) for d in cfg.deltas}

    p = sdir / "results.json"
    atomic_write_text(p, json.dumps(results, indent=2, sort_keys=True, default=_json_default) + "\n")
    outputs.append(p)
    p = sdir / "sweep.csv"
    atomic_write_text(p, grid.to_csv())
    outputs.append(p)
    p = sdir / "sweep_table.csv"
    atomic_write_text(p, grid.to_table_csv())
    outputs.append(p)
    return [nov_path, sel_path, cfg.counts], outputs


def _preferred_model(tests: dict) -> str:
    """Pooled unless topic effects are significant; then RE unless Hausman rejects it."""
    lm = tests.get("lm_test", {})
    f = tests.get("f_test", {})
    h = tests.get("hausman", {})
    effects = lm.get("p_value", 1.0) < 0.05 or f.get("p_value", 1.0) < 0.05
    if not effects:
        return "pooled"
    if "p_value" in h and h["p_value"] < 0.05:
        return "fixed"
    return "random" if lm.get("p_value", 1.0) < 0.05 else "fixed"


def _json_default(obj):
    if hasattr(obj, "item"):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _safe_name(token: str) -> str:
    return "".join(c if c.isalnum() or c in "_-" else "_" for c in token)


def _stage_viz(cfg: RunConfig, sdir: Path):
    series = load_aligned(cfg)
    nov_path = _upstream_outputs(cfg, "novelty")[0]
    sel_path = _upstream_outputs(cfg, "topics")[0]
    table = read_novelty_csv(nov_path.read_text(encoding="utf-8"))
    counts = read_topic_counts(Path(cfg.counts).read_text(encoding="utf-8"))
    selected = _read_selected(sel_path)
    topics = cfg.viz_topics or [
        r["topic"] for r in sorted(selected, key=lambda r: (-float(r["sid"]), r["topic"]))
    ][: cfg.viz_count]
    years = cfg.year_list()
    win = cfg.win if cfg.win in cfg.wins else max(cfg.wins)
    outputs = []
    for i, topic in enumerate(topics):
        if topic not in table or topic not in counts:
            log.warning("viz: skipping %s (no novelty or counts)", topic)
            continue
        name = _safe_name(topic)
        svg, csvp = sdir / f"{name}_coevolution.svg", sdir / f"{name}_coevolution.csv"
        emit_coevolution(table[topic], counts[topic], years, svg, csvp, win=win)
        outputs += [svg, csvp]
        present = [y for y in years if y in series and topic in series[y]]
        if not present:
            continue
        scene = build_scene(series, topic, present, k=cfg.viz_k, threshold=cfg.viz_threshold,
                            perplexity=cfg.perplexity, iterations=cfg.tsne_iterations,
                            seed=cfg.viz_seed + i, per_year=cfg.per_year)
        svg, csvp = sdir / f"{name}_semantic_map.svg", sdir / f"{name}_semantic_map.csv"
        emit_semantic_map(scene, svg, csvp)
        outputs += [svg, csvp]
    inputs = _upstream_outputs(cfg, "align") + [nov_path, sel_path, cfg.counts]
    return inputs, outputs


_STAGE_FNS = {
    "preprocess": _stage_preprocess,
    "train": _stage_train,
    "align": _stage_align,
    "novelty": _stage_novelty,
    "topics": _stage_topics,
    "panel": _stage_panel,
    "viz": _stage_viz,
}

_STAGE_PARAMS = {
    "preprocess": ("years",),
    "train": ("dim", "window", "negatives", "epochs", "min_count", "learning_rate",
              "min_learning_rate", "unigram_power", "sample", "seed", "workers"),
    "align": (),
    "novelty": ("wins",),
    "topics": ("years", "total_publications", "sid_threshold", "min_token_count"),
    "panel": ("years", "wins", "deltas", "win", "delta", "zmax"),
    "viz": ("years", "win", "viz_topics", "viz_count", "viz_k", "viz_threshold", "perplexity",
            "tsne_iterations", "per_year", "viz_seed"),
}


def _stage_params(cfg: RunConfig, stage: str) -> dict:
    out = {}
    for name in _STAGE_PARAMS[stage]:
        v = getattr(cfg, name)
        out[name] = list(v) if isinstance(v, tuple) else v
    return out


def _digests(paths, out: Path) -> dict[str, str]:
    return {_rel(Path(p), out): sha256_file(Path(p)) for p in paths}


def run_stage(cfg: RunConfig, stage: str) -> StageReport:
    """Run one stage unconditionally and write its manifest."""
    if stage not in _STAGE_FNS:
        raise ConfigError(f"unknown stage {stage!r}; choose from {', '.join(STAGES)}", "stage")
    cfg.validate(stage)
    sdir = cfg.out / stage
    sdir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    inputs, outputs = _STAGE_FNS[stage](cfg, sdir)
    # stale files from an earlier run with different settings
    keep = {Path(p).resolve() for p in outputs} | {(sdir / MANIFEST).resolve()}
    for old in sdir.iterdir():
        if old.is_file() and old.resolve() not in keep and not old.name.startswith("."):
            old.unlink()
    report = StageReport(stage, _digests(inputs, cfg.out), _digests(outputs, cfg.out),
                         _stage_params(cfg, stage), time.perf_counter() - start)
    atomic_write_text(sdir / MANIFEST, json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    return report


def stage_is_current(cfg: RunConfig, stage: str) -> bool:
    man = read_manifest(cfg.out, stage)
    if man is None or man.get("params") != _stage_params(cfg, stage):
        return False
    for rel, digest in list(man["inputs"].items()) + list(man["outputs"].items()):
        p = Path(rel) if Path(rel).is_absolute() else cfg.out / rel
        if not p.exists() or sha256_file(p) != digest:
            return False
    return True


def run_pipeline(cfg: RunConfig, stages=STAGES, force: bool = False) -> list[StageReport]:
    reports = []
    for stage in stages:
        if not force and stage_is_current(cfg, stage):
            man = read_manifest(cfg.out, stage)
            reports.append(StageReport(stage, man["inputs"], man["outputs"], man["params"], 0.0, True))
            log.info("%s: up to date", stage)
            continue
        reports.append(run_stage(cfg, stage))
        log.info("%s: done in %.2fs", stage, reports[-1].seconds)
    return reports


def artifact_digests(out: Path) -> dict[str, str]:
    """Digests of every stage output (manifests excluded)."""
    out = Path(out)
    return {
        p.relative_to(out).as_posix(): sha256_file(p)
        for stage in STAGES
        for p in sorted((out / stage).rglob("*"))
        if p.is_file() and p.name != MANIFEST and not p.name.startswith(".")
    }

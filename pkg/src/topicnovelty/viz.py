"""Case-study charts: novelty/growth co-evolution and semantic-change maps.

Semantic maps place a topic's related terms with exact t-SNE, color them by
the year they were selected, and push overlapping labels apart. Output is
plain SVG 1.1 written by hand so that renders are byte-stable.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .align import AlignedSeries
from .errors import MissingDataError, UndefinedGrowthError
from .novelty import NoveltySeries, select_display_terms
from .storage import atomic_write_text
from .topics import TopicYearCounts, growth

log = logging.getLogger(__name__)

RAMP_START = (44, 123, 182)
RAMP_END = (215, 25, 28)


# ----------------------------------------------------------------------------
# exact t-SNE


def _squared_distances(x: np.ndarray) -> np.ndarray:
    sq = np.sum(x * x, axis=1)
    d = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d, 0.0, out=d)
    np.fill_diagonal(d, 0.0)
    return d


def _entropy_and_probs(dist: np.ndarray, beta: float) -> tuple[float, np.ndarray]:
    shifted = dist - dist.min()
    p = np.exp(-shifted * beta)
    s = p.sum()
    p /= s
    # -sum p log p with log p = -beta * shifted - log s
    return float(np.log(s) + beta * np.sum(shifted * p)), p


def conditional_probabilities(
    x: np.ndarray, perplexity: float, tol: float = 1e-10, max_iter: int = 200
) -> np.ndarray:
    """Row-stochastic ``P[j|i]`` whose row entropies equal ``log(perplexity)``.

    The Gaussian precision of each row is found by bisection (in log space
    until the bracket closes).
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    d2 = _squared_distances(x)
    target = np.log(perplexity)
    p = np.zeros((n, n))
    for i in range(n):
        dist = np.delete(d2[i], i)
        beta, lo, hi = 1.0, 0.0, np.inf
        scale = np.median(dist[dist > 0]) if np.any(dist > 0) else 1.0
        beta = 1.0 / scale
        for _ in range(max_iter):
            h, row = _entropy_and_probs(dist, beta)
            diff = h - target
            if abs(diff) < tol:
                break
            if diff > 0:
                lo = beta
                beta = beta * 2.0 if hi == np.inf else (beta + hi) / 2.0
            else:
                hi = beta
                beta = (beta + lo) / 2.0
        p[i, np.arange(n) != i] = row
    return p


def joint_probabilities(x: np.ndarray, perplexity: float) -> np.ndarray:
    cond = conditional_probabilities(x, perplexity)
    return (cond + cond.T) / (2.0 * cond.shape[0])


def _kl_gradient(p: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    num = 1.0 / (1.0 + _squared_distances(y))
    np.fill_diagonal(num, 0.0)
    q = np.maximum(num / num.sum(), 1e-12)
    pq = (p - q) * num
    grad = 4.0 * (np.sum(pq, axis=1)[:, None] * y - pq @ y)
    kl = float(np.sum(p * np.log(np.maximum(p, 1e-12) / q)))
    return grad, kl


def tsne_2d(
    vectors: np.ndarray,
    perplexity: float = 10.0,
    iterations: int = 1000,
    seed: int = 0,
    exaggeration: float = 4.0,
    exaggeration_iters: int = 100,
    learning_rate: float | None = None,
) -> np.ndarray:
    """Exact t-SNE to two dimensions; deterministic for a given seed."""
    x = np.asarray(vectors, dtype=np.float64)
    n = x.shape[0]
    if n < 4:
        raise ValueError(f"t-SNE needs at least 4 points, got {n}")
    if not 1.0 <= perplexity < (n - 1) / 3.0:
        raise ValueError(
            f"perplexity {perplexity} infeasible for {n} points (need 1 <= perplexity < {(n - 1) / 3:.3g})"
        )
    p = joint_probabilities(x, perplexity)
    rng = np.random.default_rng(seed)
    y = rng.standard_normal((n, 2)) * 1e-4
    if learning_rate is None:
        learning_rate = max(n / exaggeration / 4.0, 50.0)
    update = np.zeros_like(y)
    gains = np.ones_like(y)
    for it in range(iterations):
        exag = exaggeration if it < exaggeration_iters else 1.0
        momentum = 0.5 if it < 250 else 0.8
        grad, _ = _kl_gradient(p * exag, y)
        same = np.sign(grad) == np.sign(update)
        gains = np.where(same, gains * 0.8, gains + 0.2)
        np.maximum(gains, 0.01, out=gains)
        update = momentum * update - learning_rate * gains * grad
        y = y + update
        y -= y.mean(axis=0)
    if not np.all(np.isfinite(y)):
        raise FloatingPointError("t-SNE diverged")
    return y


# ----------------------------------------------------------------------------
# label collision removal


@dataclass
class OverlapResult:
    positions: np.ndarray
    residual_overlaps: int
    iterations: int


def _pair_overlaps(pos: np.ndarray, size: np.ndarray):
    dx = pos[:, None, 0] - pos[None, :, 0]
    dy = pos[:, None, 1] - pos[None, :, 1]
    ox = (size[:, None, 0] + size[None, :, 0]) / 2.0 - np.abs(dx)
    oy = (size[:, None, 1] + size[None, :, 1]) / 2.0 - np.abs(dy)
    return dx, dy, ox, oy


def overlap_area(positions: np.ndarray, sizes: np.ndarray) -> float:
    """Total pairwise intersection area of center-anchored boxes."""
    _, _, ox, oy = _pair_overlaps(np.asarray(positions, float), np.asarray(sizes, float))
    area = np.clip(ox, 0, None) * np.clip(oy, 0, None)
    return float(np.triu(area, 1).sum())


def resolve_overlaps(boxes: np.ndarray, max_iter: int = 500, margin: float = 1e-6) -> OverlapResult:
    """Push overlapping boxes apart until none overlap or ``max_iter`` is reached.

    ``boxes`` rows are ``(x, y, width, height)`` with ``(x, y)`` the box center.
    Each overlapping pair is separated along the axis of smaller penetration,
    each box moving half the distance, so displacement from the anchors stays
    small. Boxes with identical centers split along index order.
    """
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    if not np.all(np.isfinite(boxes)):
        raise ValueError("boxes must be finite")
    pos = boxes[:, :2].copy()
    size = boxes[:, 2:].copy()
    n = len(pos)
    upper = np.triu(np.ones((n, n), dtype=bool), 1)
    order = np.sign(np.arange(n)[None, :] - np.arange(n)[:, None]).astype(np.float64)
    it = 0
    for it in range(1, max_iter + 1):
        dx, dy, ox, oy = _pair_overlaps(pos, size)
        hit = (ox > 0) & (oy > 0) & upper
        if not hit.any():
            it -= 1
            break
        along_x = hit & (ox <= oy)
        along_y = hit & (ox > oy)
        sx = np.where(dx != 0, np.sign(dx), -order)
        sy = np.where(dy != 0, np.sign(dy), -order)
        push_x = np.where(along_x, sx * (ox / 2.0 + margin), 0.0)
        push_y = np.where(along_y, sy * (oy / 2.0 + margin), 0.0)
        # push[i, j] moves i away from j; j receives the opposite push
        pos[:, 0] += push_x.sum(axis=1) - push_x.sum(axis=0)
        pos[:, 1] += push_y.sum(axis=1) - push_y.sum(axis=0)
    _, _, ox, oy = _pair_overlaps(pos, size)
    residual = int(np.sum((ox > 0) & (oy > 0) & upper))
    return OverlapResult(pos, residual, it)


# ----------------------------------------------------------------------------
# scenes


@dataclass
class ScenePoint:
    token: str
    year: int
    x: float
    y: float


@dataclass
class LabelBox:
    token: str
    year: int
    x: float
    y: float
    width: float
    height: float
    anchor_x: float
    anchor_y: float


@dataclass
class SceneSpec:
    points: list[ScenePoint]
    colors: dict[int, float]
    labels: list[LabelBox] = field(default_factory=list)
    title: str = ""
    width: int = 960
    height: int = 720
    residual_overlaps: int = 0


def year_ramp(years: Iterable[int]) -> dict[int, float]:
    years = sorted(set(years))
    if len(years) == 1:
        return {years[0]: 0.0}
    lo, hi = years[0], years[-1]
    return {y: (y - lo) / (hi - lo) for y in years}


def ramp_color(pos: float) -> str:
    pos = min(max(pos, 0.0), 1.0)
    rgb = [round(a + (b - a) * pos) for a, b in zip(RAMP_START, RAMP_END)]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _label_size(token: str, font_size: float) -> tuple[float, float]:
    return 0.6 * font_size * len(token) + 4.0, 1.3 * font_size


def _pca_2d(x: np.ndarray) -> np.ndarray:
    xc = x - x.mean(axis=0)
    if len(x) < 2:
        return np.zeros((len(x), 2))
    u, s, _ = np.linalg.svd(xc, full_matrices=False)
    out = np.zeros((len(x), 2))
    m = min(2, u.shape[1])
    out[:, :m] = u[:, :m] * s[:m]
    return out


def _layout(vectors: np.ndarray, perplexity: float, iterations: int, seed: int) -> np.ndarray:
    n = len(vectors)
    if n >= 5:
        perp = min(perplexity, (n - 1) / 3.0 - 1e-6)
        if perp >= 1.0:
            return tsne_2d(vectors, perp, iterations, seed)
    log.info("only %d points; falling back to a PCA layout", n)
    return _pca_2d(np.asarray(vectors, dtype=np.float64))


def build_scene(
    series: AlignedSeries,
    topic: str,
    years: Sequence[int],
    k: int = 10,
    threshold: float = 0.5,
    perplexity: float = 10.0,
    iterations: int = 1000,
    seed: int = 0,
    per_year: bool = False,
    font_size: float = 11.0,
    width: int = 960,
    height: int = 720,
    max_iter: int = 500,
) -> SceneSpec:
    """Lay out the topic and its selected related terms for every year.

    By default all (term, year) vectors are embedded in one t-SNE run so
    positions are comparable across years; ``per_year=True`` runs one layout
    per year instead.
    """
    years = [y for y in sorted(years) if y in series and topic in series[y]]
    terms = select_display_terms(series, topic, years, k, threshold)
    entries = []
    for year in years:
        entries.append((topic, year))
        entries.extend((t, year) for t in terms[year])
    if not entries:
        raise ValueError(f"{topic!r} is absent from every requested year")
    vecs = np.array([series[yr].vector(tok) for tok, yr in entries], dtype=np.float64)

    if per_year:
        coords = np.zeros((len(entries), 2))
        for year in years:
            idx = [i for i, (_, yr) in enumerate(entries) if yr == year]
            coords[idx] = _layout(vecs[idx], perplexity, iterations, seed)
    else:
        coords = _layout(vecs, perplexity, iterations, seed)

    margin = 60.0
    lo, hi = coords.min(axis=0), coords.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    canvas = (coords - lo) / span * [width - 2 * margin, height - 2 * margin - 30] + [margin, margin + 30]

    sizes = np.array([_label_size(f"{tok} ({yr})" if tok == topic else tok, font_size) for tok, yr in entries])
    resolved = resolve_overlaps(np.hstack([canvas, sizes]), max_iter=max_iter)
    points = [ScenePoint(tok, yr, float(x), float(y)) for (tok, yr), (x, y) in zip(entries, canvas)]
    labels = [
        LabelBox(tok, yr, float(p[0]), float(p[1]), float(s[0]), float(s[1]), float(a[0]), float(a[1]))
        for (tok, yr), p, s, a in zip(entries, resolved.positions, sizes, canvas)
    ]
    return SceneSpec(points, year_ramp(years), labels, title=topic, width=width,
                     height=height, residual_overlaps=resolved.residual_overlaps)


# ----------------------------------------------------------------------------
# SVG output


def _f(v: float) -> str:
    return f"{v:.2f}"


def _svg_open(width: int, height: int) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="Helvetica, Arial, sans-serif">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]


def render_semantic_map(scene: SceneSpec) -> str:
    if not scene.points:
        raise ValueError("scene has no points")
    labels = scene.labels or [
        LabelBox(p.token, p.year, p.x, p.y, 0.0, 0.0, p.x, p.y) for p in scene.points
    ]
    out = _svg_open(scene.width, scene.height)
    out.append(f'<text x="{scene.width / 2:.2f}" y="28.00" font-size="18" text-anchor="middle">'
               f'{escape(scene.title)}</text>')
    for lb in labels:
        if (lb.x, lb.y) != (lb.anchor_x, lb.anchor_y):
            out.append(f'<line x1="{_f(lb.anchor_x)}" y1="{_f(lb.anchor_y)}" x2="{_f(lb.x)}" '
                       f'y2="{_f(lb.y)}" stroke="#bbbbbb" stroke-width="0.6"/>')
    for lb in labels:
        color = ramp_color(scene.colors.get(lb.year, 0.0))
        out.append(f'<circle cx="{_f(lb.anchor_x)}" cy="{_f(lb.anchor_y)}" r="2.00" fill="{color}"/>')
    for lb in labels:
        color = ramp_color(scene.colors.get(lb.year, 0.0))
        is_topic = lb.token == scene.title
        text = f"{lb.token} ({lb.year})" if is_topic else lb.token
        weight = ' font-weight="bold"' if is_topic else ""
        out.append(f'<text x="{_f(lb.x)}" y="{_f(lb.y)}" font-size="11" fill="{color}"{weight} '
                   f'text-anchor="middle" dominant-baseline="middle">{escape(text)}</text>')
    # year legend
    for i, (year, pos) in enumerate(sorted(scene.colors.items())):
        y = 50 + 16 * i
        out.append(f'<rect x="{scene.width - 90}" y="{y - 9}" width="10" height="10" fill="{ramp_color(pos)}"/>')
        out.append(f'<text x="{scene.width - 74}" y="{y}" font-size="11">{year}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def scene_csv(scene: SceneSpec) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["token", "year", "x", "y"])
    for p in scene.points:
        w.writerow([p.token, p.year, _f(p.x), _f(p.y)])
    return buf.getvalue()


def emit_semantic_map(scene: SceneSpec, svg_path: str | Path, csv_path: str | Path | None = None) -> Path:
    svg = render_semantic_map(scene)
    atomic_write_text(svg_path, svg)
    if csv_path is not None:
        atomic_write_text(csv_path, scene_csv(scene))
    return Path(svg_path)


def coevolution_rows(
    novelty: NoveltySeries, counts: TopicYearCounts, years: Iterable[int], win: int = 7
) -> list[tuple[int, float | None, float | None]]:
    rows = []
    for year in sorted(years):
        nv = novelty.get(year, win)
        try:
            gr = growth(counts, year)
        except (MissingDataError, UndefinedGrowthError):
            gr = None
        rows.append((year, nv, gr))
    return rows


def _axis_range(values: list[float]) -> tuple[float, float]:
    lo, hi = min(values), max(values)
    if hi - lo < 1e-12:
        pad = max(abs(lo) * 0.1, 0.5)
        return lo - pad, hi + pad
    pad = (hi - lo) * 0.08
    return lo - pad, hi + pad


def _segments(points: list[tuple[float, float] | None]) -> list[list[tuple[float, float]]]:
    segs, cur = [], []
    for p in points:
        if p is None:
            if cur:
                segs.append(cur)
            cur = []
        else:
            cur.append(p)
    if cur:
        segs.append(cur)
    return segs


def render_coevolution(
    rows: list[tuple[int, float | None, float | None]],
    title: str = "",
    win: int = 7,
    width: int = 800,
    height: int = 420,
) -> str:
    nov = [r[1] for r in rows if r[1] is not None]
    gro = [r[2] for r in rows if r[2] is not None]
    if not any(r[1] is not None and r[2] is not None for r in rows):
        raise ValueError("novelty and growth share no year")
    left, right, top, bottom = 70.0, width - 70.0, 50.0, height - 50.0
    years = [r[0] for r in rows]
    y0, y1 = years[0], years[-1]
    xspan = (y1 - y0) or 1

    def px(year):
        return left + (year - y0) / xspan * (right - left)

    nlo, nhi = _axis_range(nov)
    glo, ghi = _axis_range(gro)

    def py(v, lo, hi):
        return bottom - (v - lo) / (hi - lo) * (bottom - top)

    out = _svg_open(width, height)
    out.append(f'<text x="{width / 2:.2f}" y="24.00" font-size="16" text-anchor="middle">{escape(title)}</text>')
    out.append(f'<line x1="{_f(left)}" y1="{_f(bottom)}" x2="{_f(right)}" y2="{_f(bottom)}" stroke="#333333"/>')
    out.append(f'<line x1="{_f(left)}" y1="{_f(top)}" x2="{_f(left)}" y2="{_f(bottom)}" stroke="#2c7bb6"/>')
    out.append(f'<line x1="{_f(right)}" y1="{_f(top)}" x2="{_f(right)}" y2="{_f(bottom)}" stroke="#d7191c"/>')
    for year in years:
        out.append(f'<text x="{_f(px(year))}" y="{_f(bottom + 18)}" font-size="10" text-anchor="middle">{year}</text>')
    for i in range(5):
        frac = i / 4
        nv = nlo + frac * (nhi - nlo)
        gv = glo + frac * (ghi - glo)
        yy = bottom - frac * (bottom - top)
        out.append(f'<text x="{_f(left - 6)}" y="{_f(yy)}" font-size="10" text-anchor="end" '
                   f'fill="#2c7bb6">{nv:.3f}</text>')
        out.append(f'<text x="{_f(right + 6)}" y="{_f(yy)}" font-size="10" fill="#d7191c">{gv:.1f}</text>')
    out.append(f'<text x="{_f(left)}" y="{_f(top - 10)}" font-size="11" fill="#2c7bb6">Novelty({win})</text>')
    out.append(f'<text x="{_f(right)}" y="{_f(top - 10)}" font-size="11" text-anchor="end" '
               f'fill="#d7191c">Growth (%)</text>')
    for col, lo, hi, color in ((1, nlo, nhi, "#2c7bb6"), (2, glo, ghi, "#d7191c")):
        pts = [None if r[col] is None else (px(r[0]), py(r[col], lo, hi)) for r in rows]
        for seg in _segments(pts):
            coords = " ".join(f"{_f(x)},{_f(y)}" for x, y in seg)
            out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>')
        for p in pts:
            if p is not None:
                out.append(f'<circle cx="{_f(p[0])}" cy="{_f(p[1])}" r="3.00" fill="{color}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def coevolution_csv(rows: list[tuple[int, float | None, float | None]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["year", "novelty", "growth"])
    for year, nv, gr in rows:
        w.writerow([year, "" if nv is None else repr(float(nv)), "" if gr is None else repr(float(gr))])
    return buf.getvalue()


def emit_coevolution(
    novelty: NoveltySeries,
    counts: TopicYearCounts,
    years: Iterable[int],
    svg_path: str | Path,
    csv_path: str | Path | None = None,
    win: int = 7,
) -> Path:
    """Dual-axis novelty/growth chart plus the CSV it was drawn from."""
    rows = coevolution_rows(novelty, counts, years, win)
    if not rows:
        raise ValueError("empty year range")
    svg = render_coevolution(rows, title=novelty.topic, win=win)
    atomic_write_text(svg_path, svg)
    if csv_path is not None:
        atomic_write_text(csv_path, coevolution_csv(rows))
    return Path(svg_path)

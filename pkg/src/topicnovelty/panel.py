"""Topic-by-year panels and pooled / fixed-effects / random-effects growth models.

The regression of interest is::

    y_it = a_i + b1*novelty_it + b2*growth_it + b3*age_it + b4'field_i + e_it

where ``y_it`` is growth ``delta`` years ahead. Pooled OLS treats ``a_i`` as
one constant, the within estimator absorbs it, and random effects treat it as
a topic-level error component estimated with Swamy-Arora variance components.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg
from scipy import special

from .errors import (
    CollinearityError,
    DuplicateError,
    InsufficientDataError,
    MissingDataError,
    UndefinedGrowthError,
)
from .novelty import NoveltySeries
from .topics import TopicYearCounts, growth

log = logging.getLogger(__name__)

REGRESSORS = ("novelty", "growth_t", "age")
STAR_THRESHOLDS = (0.05, 0.01, 0.001)
PANEL_COLUMNS = ("topic", "t", "delta", "y", "novelty", "growth_t", "age", "field")


def stars(p: float) -> str:
    return "*" * sum(p < thr for thr in STAR_THRESHOLDS)


@dataclass(frozen=True)
class PanelRow:
    topic: str
    t: int
    delta: int
    y: float
    novelty: float
    growth_t: float
    age: float
    field: int


class PanelDataset:
    """Validated collection of panel rows with topic and year indices."""

    def __init__(self, rows: Sequence[PanelRow]):
        self.rows = list(rows)
        seen = set()
        for r in self.rows:
            key = (r.topic, r.t, r.delta)
            if key in seen:
                raise DuplicateError(f"duplicate observation for topic {r.topic!r}, t={r.t}, delta={r.delta}")
            seen.add(key)
            vals = (r.y, r.novelty, r.growth_t, r.age)
            if not all(math.isfinite(v) for v in vals):
                raise ValueError(f"non-finite value in row {r}")
        self.topic_index: dict[str, list[int]] = {}
        self.year_index: dict[int, list[int]] = {}
        for i, r in enumerate(self.rows):
            self.topic_index.setdefault(r.topic, []).append(i)
            self.year_index.setdefault(r.t, []).append(i)
        years = set(self.year_index)
        self.balanced = all(
            {self.rows[i].t for i in idx} == years for idx in self.topic_index.values()
        )

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def n_topics(self) -> int:
        return len(self.topic_index)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=np.float64)

    def topic_codes(self) -> tuple[np.ndarray, list[str]]:
        labels = sorted(self.topic_index)
        lookup = {t: i for i, t in enumerate(labels)}
        return np.array([lookup[r.topic] for r in self.rows], dtype=np.int64), labels

    def subset(self, keep: Sequence[int]) -> "PanelDataset":
        return PanelDataset([self.rows[i] for i in keep])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(PANEL_COLUMNS)
        for r in self.rows:
            w.writerow([r.topic, r.t, r.delta, repr(float(r.y)), repr(float(r.novelty)),
                        repr(float(r.growth_t)), repr(float(r.age)), r.field])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "PanelDataset":
        rows = [
            PanelRow(
                topic=rec["topic"], t=int(rec["t"]), delta=int(rec["delta"]),
                y=float(rec["y"]), novelty=float(rec["novelty"]),
                growth_t=float(rec["growth_t"]), age=float(rec["age"]),
                field=int(rec["field"]),
            )
            for rec in csv.DictReader(io.StringIO(text))
        ]
        return cls(rows)


def build_panel(
    novelties: Mapping[str, NoveltySeries],
    growths: Mapping[str, TopicYearCounts],
    established: Mapping[str, int],
    fields: Mapping[str, int],
    delta: int,
    win: int,
    zmax: float = 3.0,
    years: Sequence[int] | None = None,
) -> PanelDataset:
    """One row per (topic, t) with every variable available, minus outliers in ``y``.

    Novelty is scaled by 100 to a percentage. Rows with ``|z(y)| >= zmax``
    are removed (population standard deviation); nothing is removed when ``y``
    is constant.
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")
    allowed = set(years) if years is not None else None
    rows = []
    for topic in sorted(novelties):
        if topic not in growths or topic not in established or topic not in fields:
            continue
        ns, counts = novelties[topic], growths[topic]
        for (t, w), value in sorted(ns.values.items()):
            if w != win or (allowed is not None and t not in allowed):
                continue
            if t < established[topic]:
                continue
            try:
                y = growth(counts, t + delta)
                g = growth(counts, t)
            except (MissingDataError, UndefinedGrowthError):
                continue
            rows.append(PanelRow(topic, t, delta, y, value * 100.0, g,
                                 float(t - established[topic]), int(fields[topic])))
    if not rows:
        raise InsufficientDataError(f"no complete panel rows for win={win}, delta={delta}")
    ys = np.array([r.y for r in rows])
    sd = ys.std()
    if sd > 0 and zmax is not None:
        z = np.abs(ys - ys.mean()) / sd
        rows = [r for r, zi in zip(rows, z) if zi < zmax]
    if not rows:
        raise InsufficientDataError("every row was removed as an outlier")
    return PanelDataset(rows)


@dataclass
class RegressionResult:
    model_kind: str
    names: list[str]
    params: np.ndarray
    cov: np.ndarray
    df_resid: int
    intercept: float
    r_squared: float
    adj_r_squared: float
    f_value: float
    f_pvalue: float
    n_obs: int
    n_topics: int
    ssr: float
    resid: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))
    sigma2_u: float | None = None
    sigma2_e: float | None = None
    theta: float | None = None
    theta_by_topic: dict[str, float] = field(default_factory=dict, repr=False)
    dropped: dict[str, str] = field(default_factory=dict)
    notices: list[str] = field(default_factory=list)

    @property
    def bse(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov))

    @property
    def tvalues(self) -> np.ndarray:
        return self.params / self.bse

    @property
    def pvalues(self) -> np.ndarray:
        return 2.0 * special.stdtr(self.df_resid, -np.abs(self.tvalues))

    @property
    def coefficients(self) -> dict[str, tuple[float, float]]:
        return {
            n: (float(b), float(s))
            for n, b, s in zip(self.names, self.params, self.bse)
            if n != "const"
        }

    def coef(self, name: str) -> float:
        return float(self.params[self.names.index(name)])

    def se(self, name: str) -> float:
        return float(self.bse[self.names.index(name)])

    def pvalue(self, name: str) -> float:
        return float(self.pvalues[self.names.index(name)])

    def table_rows(self) -> list[tuple[str, float, float, str]]:
        """Rows for a compact report; the first field dummy stands in for ``Field``."""
        out = []
        for name in REGRESSORS:
            if name in self.names:
                out.append((name, self.coef(name), self.se(name), stars(self.pvalue(name))))
        dummies = [n for n in self.names if n.startswith("field_")]
        if dummies:
            n = dummies[0]
            out.append(("field", self.coef(n), self.se(n), stars(self.pvalue(n))))
        return out

    def to_dict(self) -> dict:
        pv = self.pvalues
        return {
            "model": self.model_kind,
            "coefficients": {
                n: {"estimate": float(b), "se": float(s), "p_value": float(p), "stars": stars(p)}
                for n, b, s, p in zip(self.names, self.params, self.bse, pv)
            },
            "intercept": self.intercept,
            "variance_components": {
                "sigma2_u": self.sigma2_u, "sigma2_e": self.sigma2_e, "theta": self.theta,
            },
            "r_squared": self.r_squared,
            "adj_r_squared": self.adj_r_squared,
            "f_value": self.f_value,
            "f_pvalue": self.f_pvalue,
            "n_obs": self.n_obs,
            "n_topics": self.n_topics,
            "df_resid": self.df_resid,
            "dropped": dict(self.dropped),
            "notices": list(self.notices),
            "star_thresholds": list(STAR_THRESHOLDS),
        }


@dataclass
class TestResult:
    name: str
    statistic: float
    df: tuple[int, ...]
    p_value: float
    decision_hint: str
    notices: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "name": self.name, "statistic": self.statistic, "df": list(self.df),
            "p_value": self.p_value, "decision_hint": self.decision_hint,
            "notices": list(self.notices),
        }


# ----------------------------------------------------------------------------
# least-squares plumbing


def _collinear_columns(x: np.ndarray, names: Sequence[str], tol: float = 1e-10) -> list[str]:
    if x.shape[1] == 0:
        return []
    scale = np.linalg.norm(x, axis=0)
    zero = [names[j] for j in range(x.shape[1]) if scale[j] == 0]
    xs = x / np.where(scale == 0, 1.0, scale)
    _, r, piv = scipy.linalg.qr(xs, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > tol * max(diag[0], 1e-300))) if diag.size else 0
    out = [names[j] for j in piv[rank:]]
    return sorted(set(out) | set(zero), key=list(names).index)


def _ols(x: np.ndarray, y: np.ndarray, names: Sequence[str], df_resid: int | None = None):
    n, k = x.shape
    bad = _collinear_columns(x, names)
    if bad:
        raise CollinearityError(f"design matrix is rank deficient; collinear columns: {bad}", bad)
    q, r = np.linalg.qr(x)
    beta = scipy.linalg.solve_triangular(r, q.T @ y)
    resid = y - x @ beta
    ssr = float(resid @ resid)
    dof = n - k if df_resid is None else df_resid
    if dof <= 0:
        raise InsufficientDataError(f"no residual degrees of freedom (n={n}, k={k})")
    rinv = scipy.linalg.solve_triangular(r, np.eye(k))
    cov = (ssr / dof) * (rinv @ rinv.T)
    return beta, cov, resid, ssr, dof


def _ssr_any_rank(x: np.ndarray, y: np.ndarray) -> tuple[float, int]:
    beta, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ beta
    return float(resid @ resid), int(rank)


def _group_means(values: np.ndarray, codes: np.ndarray, n_groups: int) -> np.ndarray:
    values = values.reshape(len(codes), -1)
    sums = np.zeros((n_groups, values.shape[1]))
    np.add.at(sums, codes, values)
    counts = np.bincount(codes, minlength=n_groups).astype(np.float64)
    return sums / counts[:, None]


def _field_dummies(panel: PanelDataset) -> tuple[np.ndarray, list[str]]:
    fields = np.array([r.field for r in panel.rows])
    levels = sorted(set(fields.tolist()))
    cols = [(fields == lv).astype(np.float64) for lv in levels[1:]]
    names = [f"field_F{lv}" for lv in levels[1:]]
    if not cols:
        return np.empty((len(fields), 0)), []
    return np.column_stack(cols), names


def design_matrix(panel: PanelDataset, const: bool = True, field_dummies: bool = True):
    """Regressor matrix ``[const, novelty, growth_t, age, field dummies]`` and column names."""
    cols = [panel.column(n) for n in REGRESSORS]
    names = list(REGRESSORS)
    if const:
        cols.insert(0, np.ones(len(panel)))
        names.insert(0, "const")
    x = np.column_stack(cols)
    if field_dummies:
        d, dn = _field_dummies(panel)
        x = np.hstack([x, d])
        names += dn
    return x, names


def _slope_f(params, cov, names):
    idx = [i for i, n in enumerate(names) if n != "const"]
    if not idx:
        return float("nan")
    b = params[idx]
    v = cov[np.ix_(idx, idx)]
    return float(b @ np.linalg.solve(v, b) / len(idx))


# ----------------------------------------------------------------------------
# estimators


def pooled_ols(panel: PanelDataset) -> RegressionResult:
    x, names = design_matrix(panel)
    y = panel.column("y")
    n, k = x.shape
    if n <= k:
        raise InsufficientDataError(f"pooled OLS needs more than {k} observations, got {n}")
    beta, cov, resid, ssr, dof = _ols(x, y, names)
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ssr / sst if sst > 0 else 1.0
    adj = 1.0 - (1.0 - r2) * (n - 1) / dof
    if k > 1 and ssr > 0:
        f = ((sst - ssr) / (k - 1)) / (ssr / dof)
        fp = float(special.fdtrc(k - 1, dof, f))
    else:
        f, fp = float("inf"), 0.0
    return RegressionResult(
        "pooled", names, beta, cov, dof, float(beta[0]), r2, adj, float(f), fp,
        n, panel.n_topics, ssr, resid,
    )


def _within(panel: PanelDataset, regressors: Sequence[str]):
    codes, labels = panel.topic_codes()
    g = len(labels)
    y = panel.column("y")
    x = np.column_stack([panel.column(n) for n in regressors]) if regressors else np.empty((len(y), 0))
    ybar = _group_means(y, codes, g)[:, 0]
    xbar = _group_means(x, codes, g) if x.shape[1] else np.empty((g, 0))
    return y - ybar[codes], x - xbar[codes], y, x, codes, labels


def fixed_effects(panel: PanelDataset) -> RegressionResult:
    """Within estimator with topic intercepts absorbed.

    Topics observed once are dropped with a warning. Field is time-invariant
    and always excluded; any other regressor without within-topic variation is
    excluded too and listed in ``dropped``.
    """
    notices: list[str] = []
    singletons = [t for t, idx in panel.topic_index.items() if len(idx) < 2]
    if singletons:
        msg = f"dropped {len(singletons)} topic(s) with a single observation"
        warnings.warn(msg, stacklevel=2)
        notices.append(msg)
        keep = [i for t, idx in panel.topic_index.items() if len(idx) >= 2 for i in idx]
        if not keep:
            raise InsufficientDataError("no topic has two or more observations")
        panel = panel.subset(sorted(keep))

    dropped = {"field": "time-invariant within topic"}
    regs = []
    for name in REGRESSORS:
        col = panel.column(name)
        _, xd, *_ = _within(panel, [name])
        scale = max(np.abs(col).max(), 1.0)
        if np.abs(xd).max() <= 1e-12 * scale:
            dropped[name] = "time-invariant within topic"
            notices.append(f"{name} has no within-topic variation and was excluded")
        else:
            regs.append(name)
    if not regs:
        raise InsufficientDataError("no time-varying regressor left for the within estimator")

    yd, xd, y, x, codes, labels = _within(panel, regs)
    n, k, g = len(yd), len(regs), len(labels)
    dof = n - g - k
    beta, cov, resid, ssr, dof = _ols(xd, yd, regs, df_resid=dof)

    std = xd / np.linalg.norm(xd, axis=0)
    cond = np.linalg.cond(std)
    if cond > 1e6:
        notices.append(f"within design is nearly collinear (condition number {cond:.3g})")
        log.warning("fixed effects: %s", notices[-1])

    sst = float(yd @ yd)
    r2 = 1.0 - ssr / sst if sst > 0 else 1.0
    adj = 1.0 - (1.0 - r2) * (n - g) / dof
    if ssr > 0:
        f = (r2 / k) / ((1.0 - r2) / dof)
        fp = float(special.fdtrc(k, dof, f))
    else:
        f, fp = float("inf"), 0.0
    intercept = float(y.mean() - x.mean(axis=0) @ beta)
    return RegressionResult(
        "fixed", list(regs), beta, cov, dof, intercept, r2, adj, float(f), fp,
        n, g, ssr, resid, sigma2_e=ssr / dof, dropped=dropped, notices=notices,
    )


@dataclass
class VarianceComponents:
    sigma2_u: float
    sigma2_e: float
    clamped: bool


def swamy_arora(panel: PanelDataset) -> VarianceComponents:
    """Between-topic and idiosyncratic variances from within and between residuals.

    ``sigma2_e = SSR_within / (n - N - K_w)`` and
    ``sigma2_u = SSR_between / (N - K_b) - sigma2_e * mean(1 / T_i)``, clamped at zero.
    """
    codes, labels = panel.topic_codes()
    g = len(labels)
    counts = np.bincount(codes, minlength=g)
    if np.sum(counts >= 2) < 1:
        raise InsufficientDataError("random effects need at least one topic observed twice")

    # within regressors are the time-varying ones that survive demeaning
    regs = []
    for name in REGRESSORS:
        col = panel.column(name)
        _, xd, *_ = _within(panel, [name])
        if np.abs(xd).max() > 1e-12 * max(np.abs(col).max(), 1.0):
            regs.append(name)
    yd, xd, *_ = _within(panel, regs)
    dof_w = len(yd) - g - len(regs)
    if dof_w <= 0:
        raise InsufficientDataError("no within-topic degrees of freedom for sigma2_e")
    if regs:
        _, _, _, ssr_w, _ = _ols(xd, yd, regs, df_resid=dof_w)
    else:
        ssr_w = float(yd @ yd)
    sigma2_e = ssr_w / dof_w

    x, names = design_matrix(panel)
    xb = _group_means(x, codes, g)
    yb = _group_means(panel.column("y"), codes, g)[:, 0]
    dof_b = g - x.shape[1]
    if dof_b <= 0:
        raise InsufficientDataError(
            f"between regression needs more topics ({g}) than regressors ({x.shape[1]})"
        )
    _, _, _, ssr_b, _ = _ols(xb, yb, names, df_resid=dof_b)
    sigma2_u = ssr_b / dof_b - sigma2_e * float(np.mean(1.0 / counts))
    clamped = sigma2_u < 0
    return VarianceComponents(max(sigma2_u, 0.0), sigma2_e, clamped)


def quasi_demean_weights(counts: np.ndarray, sigma2_u: float, sigma2_e: float) -> np.ndarray:
    """``theta_i = 1 - sqrt(sigma2_e / (sigma2_e + T_i * sigma2_u))``."""
    counts = np.asarray(counts, dtype=np.float64)
    if sigma2_e <= 0:
        return np.ones_like(counts) if sigma2_u > 0 else np.zeros_like(counts)
    return 1.0 - np.sqrt(sigma2_e / (sigma2_e + counts * sigma2_u))


def random_effects(panel: PanelDataset, components: VarianceComponents | None = None) -> RegressionResult:
    """Feasible GLS by quasi-demeaning each topic with its own ``theta_i``."""
    notices: list[str] = []
    vc = components or swamy_arora(panel)
    if vc.clamped:
        msg = "negative between-topic variance estimate clamped to 0"
        warnings.warn(msg, stacklevel=2)
        notices.append(msg)

    codes, labels = panel.topic_codes()
    g = len(labels)
    counts = np.bincount(codes, minlength=g)
    theta = quasi_demean_weights(counts, vc.sigma2_u, vc.sigma2_e)

    x, names = design_matrix(panel)
    y = panel.column("y")
    n, k = x.shape
    if n <= k:
        raise InsufficientDataError(f"random effects need more than {k} observations, got {n}")
    th = theta[codes]
    xs = x - th[:, None] * _group_means(x, codes, g)[codes]
    ys = y - th * _group_means(y, codes, g)[codes, 0]
    beta, cov, resid, ssr, dof = _ols(xs, ys, names)

    sst = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - ssr / sst if sst > 0 else 1.0
    adj = 1.0 - (1.0 - r2) * (n - 1) / dof
    f = _slope_f(beta, cov, names)
    fp = float(special.fdtrc(k - 1, dof, f)) if k > 1 and math.isfinite(f) else 0.0
    return RegressionResult(
        "random", names, beta, cov, dof, float(beta[0]), r2, adj, f, fp,
        n, g, ssr, resid,
        sigma2_u=vc.sigma2_u, sigma2_e=vc.sigma2_e, theta=float(np.mean(theta)),
        theta_by_topic=dict(zip(labels, theta.tolist())), notices=notices,
    )


# ----------------------------------------------------------------------------
# specification tests


def f_test_time_effects(panel: PanelDataset) -> TestResult:
    """Joint F test that year dummies added to the pooled model are all zero."""
    years = sorted(panel.year_index)
    if len(years) < 2:
        raise InsufficientDataError("the time-effects F test needs at least two distinct years")
    x, _ = design_matrix(panel)
    y = panel.column("y")
    t = np.array([r.t for r in panel.rows])
    dummies = np.column_stack([(t == yr).astype(np.float64) for yr in years[1:]])
    ssr_r, rank_r = _ssr_any_rank(x, y)
    ssr_u, rank_u = _ssr_any_rank(np.hstack([x, dummies]), y)
    q = rank_u - rank_r
    dof = len(y) - rank_u
    notices = []
    if q <= 0:
        notices.append("year dummies are collinear with the pooled regressors")
        return TestResult("F-test", 0.0, (0, dof), 1.0, "pooled", notices)
    if dof <= 0:
        raise InsufficientDataError("no residual degrees of freedom for the time-effects F test")
    diff = max(ssr_r - ssr_u, 0.0)
    tol = 1e-12 * max(float(y @ y), 1e-300)
    if diff <= 1e-12 * ssr_r or ssr_r <= tol:
        stat = 0.0
    elif ssr_u <= tol:
        stat = float("inf")
    else:
        stat = (diff / q) / (ssr_u / dof)
    p = float(special.fdtrc(q, dof, stat)) if math.isfinite(stat) else 0.0
    return TestResult("F-test", stat, (q, dof), p, "fixed" if p < 0.05 else "pooled", notices)


def lm_test(panel: PanelDataset, pooled: RegressionResult | None = None) -> TestResult:
    """Breusch-Pagan LM test for zero topic-effect variance, Baltagi-Li unbalanced form.

    ``LM = n^2 / (2 sum T_i (T_i - 1)) * (sum_i (sum_t e_it)^2 / sum e^2 - 1)^2``,
    chi-square with one degree of freedom.
    """
    codes, labels = panel.topic_codes()
    counts = np.bincount(codes, minlength=len(labels))
    if np.sum(counts >= 2) < 2:
        raise InsufficientDataError("the LM test needs at least two topics observed twice")
    res = pooled or pooled_ols(panel)
    e = res.resid
    n = len(e)
    sums = np.bincount(codes, weights=e, minlength=len(labels))
    ratio = float(sums @ sums) / float(e @ e)
    stat = n * n / (2.0 * float(np.sum(counts * (counts - 1)))) * (ratio - 1.0) ** 2
    p = float(special.chdtrc(1, stat))
    return TestResult("LM test", stat, (1,), p, "random" if p < 0.05 else "pooled")


def hausman(
    fe: RegressionResult,
    re: RegressionResult,
    regressors: Sequence[str] | None = None,
    common_sigma: bool = True,
) -> TestResult:
    """``H = d' (V_fe - V_re)^-1 d`` over the coefficients both models estimate.

    With ``common_sigma`` the random-effects covariance is rescaled to the
    within-estimator error variance, so both matrices share one ``sigma2_e``
    and their difference is positive semidefinite. A difference that is
    still not positive definite is inverted with a pseudo-inverse and noted.
    """
    if regressors is None:
        regressors = [n for n in fe.names if n in re.names and n != "const"]
    regressors = list(regressors)
    if not regressors:
        raise InsufficientDataError("fixed and random effects share no regressor")
    missing = [n for n in regressors if n not in fe.names or n not in re.names]
    if missing:
        raise InsufficientDataError(f"regressors {missing} are not estimated by both models")
    i_fe = [fe.names.index(n) for n in regressors]
    i_re = [re.names.index(n) for n in regressors]
    d = fe.params[i_fe] - re.params[i_re]
    v_re = re.cov[np.ix_(i_re, i_re)]
    if common_sigma and fe.sigma2_e is not None and re.ssr > 0:
        v_re = v_re * (fe.sigma2_e / (re.ssr / re.df_resid))
    m = fe.cov[np.ix_(i_fe, i_fe)] - v_re
    m = (m + m.T) / 2.0
    notices = []
    try:
        c = np.linalg.cholesky(m)
        z = scipy.linalg.solve_triangular(c, d, lower=True)
        stat = float(z @ z)
    except np.linalg.LinAlgError:
        notices.append("covariance difference is not positive definite; used a pseudo-inverse")
        stat = float(d @ np.linalg.pinv(m) @ d)
    stat = max(stat, 0.0)
    df = len(regressors)
    p = float(special.chdtrc(df, stat))
    return TestResult("Hausman", stat, (df,), p, "fixed" if p < 0.05 else "random", notices)


# ----------------------------------------------------------------------------
# window x lead sweep


@dataclass
class SweepCell:
    win: int
    delta: int
    coef: float
    se: float
    p_value: float
    n_obs: int
    n_topics: int

    @property
    def stars(self) -> str:
        return stars(self.p_value)


@dataclass
class SweepGrid:
    cells: dict[tuple[int, int], SweepCell] = field(default_factory=dict)
    failures: dict[tuple[int, int], str] = field(default_factory=dict)

    @property
    def wins(self) -> list[int]:
        return sorted({w for w, _ in self.cells} | {w for w, _ in self.failures})

    @property
    def deltas(self) -> list[int]:
        return sorted({d for _, d in self.cells} | {d for _, d in self.failures})

    def best_window(self, delta: int) -> int | None:
        cand = [c for (w, d), c in self.cells.items() if d == delta]
        if not cand:
            return None
        return max(cand, key=lambda c: (c.coef, -c.win)).win

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["win", "delta", "coef", "se", "p_value", "stars", "n_obs", "n_topics"])
        for key in sorted(self.cells):
            c = self.cells[key]
            w.writerow([c.win, c.delta, repr(float(c.coef)), repr(float(c.se)), repr(float(c.p_value)),
                        c.stars, c.n_obs, c.n_topics])
        return buf.getvalue()

    def to_table_csv(self) -> str:
        """Wide layout: one row per window, one column per lead, ``coef stars (se)`` cells."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        deltas = self.deltas
        w.writerow(["novelty_window"] + [f"G(t+{d})" for d in deltas])
        for win in self.wins:
            row = [f"Novelty({win})"]
            for d in deltas:
                c = self.cells.get((win, d))
                row.append("" if c is None else f"{c.coef:.3f}{c.stars} ({c.se:.3f})")
            w.writerow(row)
        return buf.getvalue()


def window_sweep(
    panels: Mapping[int, Mapping[int, PanelDataset]],
    deltas: Sequence[int] = tuple(range(1, 11)),
) -> SweepGrid:
    """Random-effects novelty coefficient for every (window, lead) panel.

    ``panels[win][delta]`` is the panel built with that novelty window and lead.
    Cells whose panel is missing or cannot be estimated are recorded as failures.
    """
    grid = SweepGrid()
    for win in sorted(panels):
        for delta in deltas:
            panel = panels[win].get(delta)
            if panel is None:
                grid.failures[(win, delta)] = "no panel"
                continue
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    res = random_effects(panel)
            except (InsufficientDataError, CollinearityError) as exc:
                grid.failures[(win, delta)] = str(exc)
                continue
            grid.cells[(win, delta)] = SweepCell(
                win, delta, res.coef("novelty"), res.se("novelty"), res.pvalue("novelty"),
                res.n_obs, res.n_topics,
            )
    return grid

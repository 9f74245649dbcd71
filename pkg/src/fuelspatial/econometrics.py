"""Fixed-effect regressions and cluster-robust inference.

Group effects are absorbed by demeaning (iterated for two-way effects), never
by materializing dummy matrices; the within estimator is numerically
equivalent to dummy-variable OLS. Clustered standard errors use the
Liang-Zeger sandwich with the Stata-style small-sample factor
G/(G-1) * (n-1)/(n-k), where k counts absorbed effects.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .errors import (
    AbsorbedCovariateError,
    DegenerateGroupingError,
    EmptyInputError,
    InsufficientClustersError,
    PerfectFitError,
    SingularDesignError,
)

GWR_COVARIATES = ("income", "population", "wage_per_job", "jobs_per_capita", "jobs")
COUNTY_COVARIATES = ("density", "log_population", "log_total_income", "unemployment",
                     "poverty", "pct_black", "vote_gop", "state_tax")


@dataclass(frozen=True)
class PanelObservation:
    station_id: str
    state_id: str
    county_fips: str
    day: dt.date
    price: float


@dataclass(frozen=True)
class FixedEffectSpec:
    level: str  # "state" | "county" | "station"
    include_day_effect: bool = False

    def __post_init__(self):
        if self.level not in ("state", "county", "station"):
            raise ValueError(f"unknown fixed-effect level {self.level!r}")


@dataclass
class CountyModelRow:
    county_fips: str
    log_mean_price: float
    state_id: str
    covariates: dict  # name -> value, names from COUNTY_COVARIATES


@dataclass
class FeFit:
    coefficients: dict
    standard_errors: dict
    r_squared: float
    n_observations: int
    n_clusters: int
    fe_level: str


@dataclass
class OlsResult:
    coefficients: np.ndarray
    residuals: np.ndarray
    r_squared: float


def ols(design, response) -> OlsResult:
    """Ordinary least squares with an explicit rank check."""
    x = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    n, k = x.shape
    if n <= k:
        raise ValueError(f"need n > k, got n={n}, k={k}")
    q, r = np.linalg.qr(x)
    diag = np.abs(np.diag(r))
    bad = np.nonzero(diag <= 1e-10 * max(diag.max(), 1.0))[0]
    if bad.size:
        raise SingularDesignError(bad.tolist())
    beta = np.linalg.solve(r, q.T @ y)
    residuals = y - x @ beta
    tss = float(np.sum((y - y.mean()) ** 2))
    rss = float(residuals @ residuals)
    r2 = 1.0 - rss / tss if tss > 0 else float("nan")
    return OlsResult(coefficients=beta, residuals=residuals, r_squared=r2)


def _demean_by(values: np.ndarray, labels: np.ndarray) -> np.ndarray:
    out = values.astype(float).copy()
    for g in np.unique(labels):
        mask = labels == g
        out[mask] -= out[mask].mean(axis=0)
    return out


def _two_way_demean(values: np.ndarray, labels_a: np.ndarray, labels_b: np.ndarray,
                    tol: float = 1e-10, max_iter: int = 500) -> np.ndarray:
    out = values.astype(float).copy()
    for _ in range(max_iter):
        before = out.copy()
        out = _demean_by(out, labels_a)
        out = _demean_by(out, labels_b)
        if np.max(np.abs(out - before)) < tol:
            break
    return out


def fe_variance_explained(panel, spec: FixedEffectSpec) -> dict:
    """R^2 of regressing price on group dummies (plus day dummies when asked),
    computed by demeaning."""
    panel = list(panel)
    if len(panel) < 2:
        raise EmptyInputError("need at least 2 observations")
    price = np.array([o.price for o in panel])
    key = {"state": "state_id", "county": "county_fips", "station": "station_id"}[spec.level]
    groups = np.array([getattr(o, key) for o in panel])
    if np.unique(groups).size < 2:
        raise DegenerateGroupingError(f"only one {spec.level} group present")
    tss = float(np.sum((price - price.mean()) ** 2))
    if spec.include_day_effect:
        days = np.array([o.day.toordinal() for o in panel])
        within = _two_way_demean(price, groups, days)
    else:
        within = _demean_by(price, groups)
    rss = float(within @ within)
    return {"r_squared": 1.0 - rss / tss if tss > 0 else float("nan"),
            "n_groups": int(np.unique(groups).size)}


def cluster_robust_se(design, residuals, bread, clusters, k_total: int | None = None) -> np.ndarray:
    """Liang-Zeger clustered standard errors.

    ``bread`` is (X'X)^{-1} for the (demeaned) design; ``k_total`` counts
    regressors plus any absorbed fixed effects for the small-sample factor.
    """
    x = np.asarray(design, dtype=float)
    u = np.asarray(residuals, dtype=float)
    labels = np.asarray(clusters)
    n, k = x.shape
    if k_total is None:
        k_total = k
    uniq = np.unique(labels)
    g = uniq.size
    if g < 2:
        raise InsufficientClustersError("need at least 2 clusters")
    meat = np.zeros((k, k))
    for lab in uniq:
        mask = labels == lab
        score = x[mask].T @ u[mask]
        meat += np.outer(score, score)
    c = (g / (g - 1.0)) * ((n - 1.0) / (n - k_total))
    cov = c * bread @ meat @ bread
    return np.sqrt(np.clip(np.diag(cov), 0.0, None))


def clustered_covariance(design, residuals, bread, clusters, k_total=None) -> np.ndarray:
    """Full clustered variance matrix (used for PSD checks and tests)."""
    x = np.asarray(design, dtype=float)
    u = np.asarray(residuals, dtype=float)
    labels = np.asarray(clusters)
    n, k = x.shape
    if k_total is None:
        k_total = k
    uniq = np.unique(labels)
    g = uniq.size
    if g < 2:
        raise InsufficientClustersError("need at least 2 clusters")
    meat = np.zeros((k, k))
    for lab in uniq:
        mask = labels == lab
        score = x[mask].T @ u[mask]
        meat += np.outer(score, score)
    c = (g / (g - 1.0)) * ((n - 1.0) / (n - k_total))
    return c * bread @ meat @ bread


def county_regression(rows, covariate_set, cluster: str = "state") -> FeFit:
    """Eq.-(5)-style model: log county price on county covariates with state
    fixed effects absorbed by within-state demeaning and state-clustered SEs.

    R^2 follows the convention that fitted values include the recovered state
    effects.
    """
    rows = list(rows)
    if not rows:
        raise EmptyInputError("no county rows")
    covariate_set = tuple(covariate_set)
    y = np.array([r.log_mean_price for r in rows])
    states = np.array([r.state_id for r in rows])
    n = len(rows)
    n_states = np.unique(states).size
    if n_states < 2:
        raise InsufficientClustersError("need counties from at least 2 states")
    x = np.column_stack([[r.covariates[name] for r in rows] for name in covariate_set])
    k = x.shape[1]
    if n <= k + n_states:
        raise ValueError(f"need n > k + number of states ({k + n_states}), got {n}")

    xd = _demean_by(x, states)
    for j, name in enumerate(covariate_set):
        if np.max(np.abs(xd[:, j])) <= 1e-12 * max(1.0, np.max(np.abs(x[:, j]))):
            raise AbsorbedCovariateError(name)
    yd = _demean_by(y, states)

    q, r = np.linalg.qr(xd)
    diag = np.abs(np.diag(r))
    bad = np.nonzero(diag <= 1e-10 * max(diag.max(), 1.0))[0]
    if bad.size:
        raise SingularDesignError([covariate_set[j] for j in bad])
    beta = np.linalg.solve(r, q.T @ yd)
    residuals = yd - xd @ beta

    # Recovered state effects make the fitted values, hence the reported R^2.
    partial = y - x @ beta
    fitted = x @ beta
    for s in np.unique(states):
        mask = states == s
        fitted[mask] += partial[mask].mean()
    tss = float(np.sum((y - y.mean()) ** 2))
    rss = float(np.sum((y - fitted) ** 2))
    r2 = 1.0 - rss / tss if tss > 0 else float("nan")

    if np.max(np.abs(residuals)) <= 1e-12 * max(1.0, np.max(np.abs(yd))):
        raise PerfectFitError("zero residuals; clustered standard errors undefined")

    bread = np.linalg.inv(xd.T @ xd)
    se = cluster_robust_se(xd, residuals, bread, states, k_total=k + n_states)
    return FeFit(
        coefficients={name: float(b) for name, b in zip(covariate_set, beta)},
        standard_errors={name: float(s) for name, s in zip(covariate_set, se)},
        r_squared=r2, n_observations=n, n_clusters=int(n_states), fe_level="state",
    )


def significance_stars(coef: float, se: float, n_clusters: int) -> str:
    """Stars at the 0.01 / 0.05 / 0.1 levels; t with G-1 df when G <= 30,
    normal approximation otherwise."""
    if se <= 0:
        return ""
    t = abs(coef) / se
    if n_clusters <= 30:
        p = 2.0 * sps.t.sf(t, df=max(n_clusters - 1, 1))
    else:
        p = 2.0 * sps.norm.sf(t)
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.1:
        return "*"
    return ""


def render_fe_table(fits, labels=None) -> str:
    """Aligned-text regression table: coefficient, SE in parentheses, stars."""
    fits = list(fits)
    labels = labels or [f"({i})" for i in range(1, len(fits) + 1)]
    names = []
    for fit in fits:
        for name in fit.coefficients:
            if name not in names:
                names.append(name)
    width = max([len(n) for n in names] + [12]) + 2
    col = 18
    lines = [" " * width + "".join(f"{lab:>{col}}" for lab in labels)]
    for name in names:
        coef_cells, se_cells = [], []
        for fit in fits:
            if name in fit.coefficients:
                c = fit.coefficients[name]
                s = fit.standard_errors[name]
                stars = significance_stars(c, s, fit.n_clusters)
                coef_cells.append(f"{c:.3f}{stars}")
                se_cells.append(f"({s:.3f})")
            else:
                coef_cells.append("")
                se_cells.append("")
        lines.append(f"{name:<{width}}" + "".join(f"{c:>{col}}" for c in coef_cells))
        lines.append(" " * width + "".join(f"{s:>{col}}" for s in se_cells))
    lines.append(f"{'R-squared':<{width}}"
                 + "".join(f"{fit.r_squared:>{col}.3f}" for fit in fits))
    lines.append(f"{'N':<{width}}"
                 + "".join(f"{fit.n_observations:>{col}}" for fit in fits))
    return "\n".join(lines) + "\n"


def fe_table_to_csv(fits, path, labels=None) -> None:
    fits = list(fits)
    labels = labels or [f"({i})" for i in range(1, len(fits) + 1)]
    names = []
    for fit in fits:
        for name in fit.coefficients:
            if name not in names:
                names.append(name)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["variable"] + labels)
        for name in names:
            coef_row, se_row = [name], [name + "_se"]
            for fit in fits:
                if name in fit.coefficients:
                    c = fit.coefficients[name]
                    s = fit.standard_errors[name]
                    coef_row.append(f"{c:.6g}{significance_stars(c, s, fit.n_clusters)}")
                    se_row.append(f"({s:.6g})")
                else:
                    coef_row.append("")
                    se_row.append("")
            wr.writerow(coef_row)
            wr.writerow(se_row)
        wr.writerow(["r_squared"] + [f"{fit.r_squared:.6g}" for fit in fits])
        wr.writerow(["n"] + [str(fit.n_observations) for fit in fits])

"""Geographically weighted regression: local weighted least squares with
kernel weights decaying in great-circle distance, AICc / leave-one-out CV
scoring, bandwidth optimization, exhaustive model enumeration, and the
nearest-neighbor spatial-scale statistic.

Local solves go through a QR decomposition of sqrt(W) X rather than the
normal equations; near-singular local designs at small bandwidths are the
expected failure mode and surface as explicit errors.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    DegenerateBandwidthError,
    EmptyReportError,
    InsufficientSupportError,
    InvalidBandwidthError,
    InvalidKError,
    NoFeasibleBandwidthError,
    OversaturatedModelError,
    PerfectFitError,
    SingularFitError,
)
from .geo import (
    Bandwidth,
    GeoPoint,
    KernelShape,
    adaptive_bandwidths,
    distance_matrix,
    kernel_weight,
)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class GwrDataset:
    """Locations with named covariates and a response, all aligned by index."""

    ids: list
    points: list[GeoPoint]
    covariates: dict[str, np.ndarray]
    response: np.ndarray

    def __post_init__(self):
        self.response = np.asarray(self.response, dtype=float)
        self.covariates = {k: np.asarray(v, dtype=float) for k, v in self.covariates.items()}
        n = len(self.points)
        if len(self.ids) != n or self.response.shape[0] != n:
            raise ValueError("ids, points and response must have equal length")
        for name, col in self.covariates.items():
            if col.shape[0] != n:
                raise ValueError(f"covariate {name!r} has wrong length")

    @property
    def n(self) -> int:
        return len(self.points)

    @cached_property
    def distances(self) -> np.ndarray:
        return distance_matrix(self.points)


@dataclass(frozen=True)
class GwrSpec:
    """Model specification: covariate subset, kernel and bandwidth.

    An intercept is always included. Covariates are standardized internally;
    coefficients are reported in both normalized and raw units.
    """

    covariates: tuple
    kernel: KernelShape
    bandwidth: Bandwidth
    response: str = "price"
    log_response: bool = False
    truncate_adaptive: bool = False

    def __post_init__(self):
        # An empty tuple is the intercept-only model.
        if len(set(self.covariates)) != len(self.covariates):
            raise ValueError("duplicate covariates")


@dataclass
class GwrFit:
    spec: GwrSpec
    ids: list
    covariate_names: tuple
    local_coefficients: np.ndarray        # normalized units, intercept first
    local_coefficients_raw: np.ndarray    # original covariate units
    local_r2: np.ndarray
    residuals: np.ndarray
    hat_trace: float
    rss: float
    aicc: float
    global_r2: float
    cv_score: float | None = None

    @property
    def n(self) -> int:
        return len(self.ids)


def aicc_score(n: int, rss: float, hat_trace: float) -> float:
    """Corrected AIC for a smoother with effective parameters tr(S)."""
    if n - 2.0 - hat_trace <= 0:
        raise OversaturatedModelError(
            f"n - 2 - tr(S) = {n - 2.0 - hat_trace:.3g} <= 0: bandwidth too small")
    if rss <= 0:
        raise PerfectFitError("zero residual sum of squares; AICc diverges")
    sigma = math.sqrt(rss / n)
    return (2.0 * n * math.log(sigma) + n * math.log(2.0 * math.pi)
            + n * (n + hat_trace) / (n - 2.0 - hat_trace))


def _design(data: GwrDataset, spec: GwrSpec):
    """Standardized design matrix with intercept, plus de-normalization info."""
    cols = []
    means, scales = [], []
    for name in spec.covariates:
        if name not in data.covariates:
            raise KeyError(f"unknown covariate {name!r}")
        col = data.covariates[name]
        m, s = col.mean(), col.std(ddof=1)
        if s == 0:
            s = 1.0
        cols.append((col - m) / s)
        means.append(m)
        scales.append(s)
    x = np.column_stack([np.ones(data.n)] + cols)
    y = np.asarray(data.response, dtype=float)
    if spec.log_response:
        y = np.log(y)
    return x, y, np.array(means), np.array(scales)


def _weight_matrix(dist: np.ndarray, spec: GwrSpec) -> np.ndarray:
    """Geographic weights per focal location (rows); self-weight is kernel(0)=1."""
    bw = spec.bandwidth
    if bw.is_adaptive:
        n = dist.shape[0]
        if bw.value >= n:
            raise InvalidBandwidthError(f"adaptive k={bw.value} must be < n={n}")
        h = adaptive_bandwidths(dist, int(bw.value))
        for i in np.nonzero(h <= 0)[0]:
            raise DegenerateBandwidthError(int(i))
        w = np.vstack([kernel_weight(spec.kernel, dist[i], h[i]) for i in range(dist.shape[0])])
        if spec.truncate_adaptive:
            w = np.where(dist <= h[:, None], w, 0.0)
    else:
        w = kernel_weight(spec.kernel, dist, bw.value)
    return w


def _local_solve(x: np.ndarray, y: np.ndarray, w_row: np.ndarray, focal: int):
    """Weighted least squares at one focal location via QR of sqrt(w) X.

    Returns (beta, hat_diag_element). Raises SingularFitError on local rank
    deficiency.
    """
    p1 = x.shape[1]
    sw = np.sqrt(w_row)
    q, r = np.linalg.qr(sw[:, None] * x)
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-10 * max(diag.max(), 1.0):
        raise SingularFitError(focal)
    beta = solve_triangular(r, q.T @ (sw * y))
    # s_ii = w_ii * x_i^T (X^T W X)^{-1} x_i with (X^T W X)^{-1} = R^{-1} R^{-T}
    t = solve_triangular(r.T, x[focal], lower=True)
    s_ii = w_row[focal] * float(t @ t)
    return beta, s_ii


def gwr_fit(data: GwrDataset, spec: GwrSpec, compute_cv: bool = False) -> GwrFit:
    """Fit a GWR model, one weighted regression per location."""
    x, y, means, scales = _design(data, spec)
    n, p1 = x.shape
    if n <= p1 + 1:
        raise ValueError(f"need n > p+2, got n={n}, p={p1 - 1}")
    w = _weight_matrix(data.distances, spec)

    betas = np.empty((n, p1))
    hat_diag = np.empty(n)
    for i in range(n):
        betas[i], hat_diag[i] = _local_solve(x, y, w[i], i)

    fitted = np.einsum("ij,ij->i", x, betas)
    residuals = y - fitted
    rss = float(residuals @ residuals)
    hat_trace = float(hat_diag.sum())

    # Weighted local R^2 around each focal point.
    pred = x @ betas.T                      # pred[j, i] = x_j . beta(i)
    res2 = (y[:, None] - pred) ** 2
    wsum = w.sum(axis=1)
    ybar_w = (w @ y) / wsum
    rss_w = np.einsum("ij,ji->i", w, res2)
    tss_w = np.sum(w * (y[None, :] - ybar_w[:, None]) ** 2, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        local_r2 = 1.0 - rss_w / tss_w

    tss = float(np.sum((y - y.mean()) ** 2))
    global_r2 = 1.0 - rss / tss if tss > 0 else float("nan")
    aicc = aicc_score(n, rss, hat_trace)

    # De-normalize: slope_raw = slope / scale, intercept shifts by the means.
    raw = betas.copy()
    raw[:, 1:] = betas[:, 1:] / scales[None, :]
    raw[:, 0] = betas[:, 0] - betas[:, 1:] @ (means / scales)

    fit = GwrFit(
        spec=spec, ids=list(data.ids), covariate_names=tuple(spec.covariates),
        local_coefficients=betas, local_coefficients_raw=raw,
        local_r2=local_r2, residuals=residuals, hat_trace=hat_trace,
        rss=rss, aicc=aicc, global_r2=global_r2,
    )
    if compute_cv:
        fit.cv_score = gwr_cv_score(data, spec)
    return fit


def gwr_aicc(fit: GwrFit) -> float:
    """AICc of a fit (recomputed from its stored RSS and hat trace)."""
    return aicc_score(fit.n, fit.rss, fit.hat_trace)


def gwr_cv_score(data: GwrDataset, spec: GwrSpec) -> float:
    """Leave-one-out CV: each focal weight for its own observation forced to 0."""
    x, y, _, _ = _design(data, spec)
    n, p1 = x.shape
    w = _weight_matrix(data.distances, spec)
    score = 0.0
    for i in range(n):
        w_i = w[i].copy()
        w_i[i] = 0.0
        if np.count_nonzero(w_i) < p1:
            raise InsufficientSupportError(
                f"location {i} has fewer than {p1} in-range neighbors after self-removal")
        beta, _ = _local_solve(x, y, w_i, i)
        score += (y[i] - float(x[i] @ beta)) ** 2
    return score


@dataclass
class BandwidthSearchResult:
    bandwidth: Bandwidth
    score: float
    evaluations: list = field(default_factory=list)  # (bandwidth value, score)


def _criterion_fn(data: GwrDataset, covariates, kernel: KernelShape, criterion: str,
                  log_response: bool):
    criterion = criterion.lower()
    if criterion not in ("aicc", "cv"):
        raise ValueError(f"unknown criterion {criterion!r}")

    def evaluate(bw: Bandwidth) -> float:
        spec = GwrSpec(covariates=tuple(covariates), kernel=kernel, bandwidth=bw,
                       log_response=log_response)
        try:
            if criterion == "aicc":
                return gwr_fit(data, spec).aicc
            return gwr_cv_score(data, spec)
        except (SingularFitError, InsufficientSupportError, OversaturatedModelError,
                PerfectFitError, DegenerateBandwidthError):
            return float("inf")

    return evaluate


def _golden_integer(objective, lo: int, hi: int):
    """Golden-section over integers; the final bracket is scanned exhaustively
    and ties break toward smaller k."""
    cache: dict[int, float] = {}

    def f(k):
        if k not in cache:
            cache[k] = objective(k)
        return cache[k]

    a, b = lo, hi
    while b - a > 4:
        span = b - a
        x1 = round(b - GOLDEN * span)
        x2 = round(a + GOLDEN * span)
        if x1 >= x2:
            break
        if f(x1) <= f(x2):
            b = x2
        else:
            a = x1
    best_k, best_v = None, float("inf")
    for k in range(a, b + 1):
        v = f(k)
        if v < best_v:
            best_k, best_v = k, v
    return best_k, best_v, sorted(cache.items())


def _golden_continuous(objective, lo: float, hi: float, rel_tol: float = 1e-3):
    cache: dict[float, float] = {}

    def f(v):
        if v not in cache:
            cache[v] = objective(v)
        return cache[v]

    a, b = lo, hi
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    while (b - a) > rel_tol * max(abs(b), 1.0):
        if f(x1) <= f(x2):
            b, x2 = x2, x1
            x1 = b - GOLDEN * (b - a)
        else:
            a, x1 = x1, x2
            x2 = a + GOLDEN * (b - a)
    candidates = [a, x1, x2, b]
    best = min(candidates, key=f)
    return best, f(best), sorted(cache.items())


def optimize_bandwidth(data: GwrDataset, covariates, kernel: KernelShape,
                       criterion: str = "aicc", mode: str = "adaptive",
                       exhaustive: bool = False,
                       log_response: bool = False) -> BandwidthSearchResult:
    """Minimize AICc or LOO-CV over the bandwidth.

    Adaptive mode searches integer k in [p+2, n-1] (golden section with a
    final exhaustive sweep of the bracket; ``exhaustive`` scans every k).
    Fixed mode searches d0 in [min positive NN distance, study-area diameter].
    """
    p1 = len(covariates) + 1
    n = data.n
    if mode == "adaptive":
        lo, hi = p1 + 1, n - 1
        if lo > hi:
            raise NoFeasibleBandwidthError(f"no feasible k in [{lo}, {hi}]")
        obj = _criterion_fn(data, covariates, kernel, criterion, log_response)

        def at_k(k):
            return obj(Bandwidth.adaptive_knn(k))

        if exhaustive:
            evals = [(k, at_k(k)) for k in range(lo, hi + 1)]
            best_k, best_v = min(evals, key=lambda kv: (kv[1], kv[0]))
        else:
            best_k, best_v, evals = _golden_integer(at_k, lo, hi)
        if not math.isfinite(best_v):
            raise NoFeasibleBandwidthError("criterion failed across the entire k range")
        return BandwidthSearchResult(Bandwidth.adaptive_knn(best_k), best_v, evals)

    if mode == "fixed":
        dist = data.distances
        off_diag = dist[~np.eye(n, dtype=bool)]
        positive = off_diag[off_diag > 0]
        if positive.size == 0:
            raise NoFeasibleBandwidthError("all pairwise distances are zero")
        lo, hi = float(positive.min()), float(dist.max())
        obj = _criterion_fn(data, covariates, kernel, criterion, log_response)

        def at_d(d):
            return obj(Bandwidth.fixed_distance(d))

        best_d, best_v, evals = _golden_continuous(at_d, lo, hi)
        if not math.isfinite(best_v):
            raise NoFeasibleBandwidthError("criterion failed across the entire d0 range")
        return BandwidthSearchResult(Bandwidth.fixed_distance(best_d), best_v, evals)

    raise ValueError(f"unknown bandwidth mode {mode!r}")


@dataclass
class ModelEntry:
    covariates: tuple
    kernel: KernelShape
    bandwidth: Bandwidth | None
    aicc: float | None
    cv_score: float | None
    global_r2: float | None
    failure: str | None = None


@dataclass
class ModelSelectionReport:
    entries: list
    best: int
    median_aicc_gap: float
    n_failed: int

    def best_entry(self) -> ModelEntry:
        return self.entries[self.best]

    def to_csv(self, path) -> None:
        ok = sorted((e for e in self.entries if e.failure is None), key=lambda e: e.aicc)
        failed = [e for e in self.entries if e.failure is not None]
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["rank", "covariates", "kernel", "bandwidth_mode", "bandwidth",
                         "aicc", "cv_score", "global_r2", "failure"])
            for rank, e in enumerate(ok, start=1):
                wr.writerow([
                    rank, "+".join(e.covariates), e.kernel.value,
                    e.bandwidth.mode, f"{e.bandwidth.value:.10g}",
                    f"{e.aicc:.10g}",
                    "" if e.cv_score is None else f"{e.cv_score:.10g}",
                    f"{e.global_r2:.10g}", "",
                ])
            for e in failed:
                wr.writerow(["", "+".join(e.covariates), e.kernel.value, "", "", "", "", "",
                             e.failure])


def _subsets(names):
    names = list(names)
    out = []
    for mask in range(1, 1 << len(names)):
        out.append(tuple(names[i] for i in range(len(names)) if mask >> i & 1))
    return out


def enumerate_models(data: GwrDataset, all_covariates, kernels=None,
                     criterion: str = "aicc", mode: str = "adaptive",
                     log_response: bool = False) -> ModelSelectionReport:
    """Exhaustive model search: every non-empty covariate subset x every kernel,
    each with its own optimized bandwidth. Failed configurations are recorded
    and excluded from the ranking."""
    kernels = list(kernels) if kernels is not None else list(KernelShape)
    entries: list[ModelEntry] = []
    for subset in _subsets(all_covariates):
        for kernel in kernels:
            try:
                search = optimize_bandwidth(data, subset, kernel, criterion=criterion,
                                            mode=mode, log_response=log_response)
                spec = GwrSpec(covariates=subset, kernel=kernel,
                               bandwidth=search.bandwidth, log_response=log_response)
                fit = gwr_fit(data, spec, compute_cv=(criterion.lower() == "cv"))
                entries.append(ModelEntry(subset, kernel, search.bandwidth,
                                          fit.aicc, fit.cv_score, fit.global_r2))
            except Exception as exc:  # noqa: BLE001 - per-config failure is data
                entries.append(ModelEntry(subset, kernel, None, None, None, None,
                                          failure=f"{type(exc).__name__}: {exc}"))
    ok = [i for i, e in enumerate(entries) if e.failure is None]
    if not ok:
        raise EmptyReportError("every configuration failed")
    best = min(ok, key=lambda i: entries[i].aicc)
    gaps = [entries[i].aicc - entries[best].aicc for i in ok if i != best]
    median_gap = float(np.median(gaps)) if gaps else 0.0
    return ModelSelectionReport(entries=entries, best=best, median_aicc_gap=median_gap,
                                n_failed=len(entries) - len(ok))


@dataclass
class NeighborScale:
    median: float
    interquartile: float
    distances: np.ndarray


def nearest_neighbor_scale(points: list[GeoPoint], k: int) -> NeighborScale:
    """Distance from each location to its k-th nearest neighbor, with median
    and interquartile range of that distribution."""
    n = len(points)
    if not 1 <= k < n:
        raise InvalidKError(f"need 1 <= k < n, got k={k}, n={n}")
    d = adaptive_bandwidths(distance_matrix(points), k)
    p25, p75 = np.percentile(d, [25, 75])
    return NeighborScale(median=float(np.median(d)), interquartile=float(p75 - p25),
                         distances=d)


def fit_to_csv(fit: GwrFit, data: GwrDataset, path) -> None:
    names = fit.covariate_names
    header = (["location_id", "lat", "lon", "intercept_raw"]
              + [f"{c}_raw" for c in names]
              + ["intercept_norm"] + [f"{c}_norm" for c in names]
              + ["local_r2", "residual"])
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for i, loc in enumerate(fit.ids):
            pt = data.points[i]
            row = ([loc, f"{pt.lat:.8g}", f"{pt.lon:.8g}"]
                   + [f"{v:.12g}" for v in fit.local_coefficients_raw[i]]
                   + [f"{v:.12g}" for v in fit.local_coefficients[i]]
                   + [f"{fit.local_r2[i]:.12g}", f"{fit.residuals[i]:.12g}"])
            wr.writerow(row)


def fit_to_geojson(fit: GwrFit, data: GwrDataset, path) -> None:
    """FeatureCollection of points carrying local coefficients, local R^2 and
    residuals, suitable for choropleth-style rendering."""
    features = []
    for i, loc in enumerate(fit.ids):
        pt = data.points[i]
        props = {"location_id": str(loc),
                 "local_r2": round(float(fit.local_r2[i]), 10),
                 "residual": round(float(fit.residuals[i]), 10),
                 "intercept_raw": round(float(fit.local_coefficients_raw[i, 0]), 10)}
        for j, c in enumerate(fit.covariate_names, start=1):
            props[f"{c}_raw"] = round(float(fit.local_coefficients_raw[i, j]), 10)
            props[f"{c}_norm"] = round(float(fit.local_coefficients[i, j]), 10)
        features.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [round(pt.lon, 8), round(pt.lat, 8)]},
            "properties": props,
        })
    with open(path, "w") as fh:
        json.dump({"type": "FeatureCollection", "features": features}, fh,
                  sort_keys=True, separators=(",", ":"))
        fh.write("\n")

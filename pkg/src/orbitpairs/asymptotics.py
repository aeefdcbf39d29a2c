"""Gaussian-side predictions and measured-vs-predicted reports."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special, stats

from .census import (
    OrbitTable,
    count_orbits,
    empirical_clt,
    pair_count_convolution,
    pair_count_direct,
    pair_counts_all,
    shifted_count,
)
from .errors import DomainError, ResourceError
from .homology_model import HomologyClass, model_hash
from .thermo import ThermoSummary, pair_constant

__all__ = [
    "gaussian_weight",
    "local_limit_prediction",
    "gaussian_pair_sum",
    "gaussian_tail",
    "default_delta",
    "theorem1_prediction",
    "gaussian_box_mass",
    "CensusReport",
    "convergence_report",
    "clt_table",
    "format_clt_table",
    "DEFAULT_BOXES",
]

LATTICE_BUDGET = 20_000_000


def _hmat(H):
    H = np.atleast_2d(np.asarray(H, dtype=float))
    if H.shape[0] != H.shape[1]:
        raise DomainError("H must be square")
    return H


def _qform(alpha, H):
    a = np.asarray(alpha, dtype=float)
    return a @ H @ a


def gaussian_weight(T, alpha, H) -> float:
    """e_T(alpha) = exp(-<alpha, H alpha> / 2T)."""
    if T <= 0:
        raise DomainError("T must be positive")
    H = _hmat(H)
    alpha = np.atleast_1d(np.asarray(HomologyClass.of(alpha, H.shape[0]).coords, dtype=float))
    return math.exp(-_qform(alpha, H) / (2 * T))


def local_limit_prediction(T, alpha, summary: ThermoSummary) -> float:
    """Gaussian approximation to pi~_alpha(T):

    (e^{hT} / hT) * e_T(alpha) / ((2 pi)^{k/2} sigma^k T^{k/2}).
    """
    k, h, sigma = summary.k, summary.h, summary.sigma
    log_main = h * T - math.log(h * T) - (k / 2) * math.log(2 * math.pi * T) - k * math.log(sigma)
    return gaussian_weight(T, alpha, summary.H_matrix) * math.exp(log_main)


def theorem1_prediction(T, summary: ThermoSummary) -> float:
    """Pair asymptotic C * e^{2hT} / T^{2 + k/2}."""
    if T <= 0:
        raise DomainError("T must be positive")
    c = pair_constant(summary)
    return c * math.exp(2 * summary.h * T - (2 + summary.k / 2) * math.log(T))


def gaussian_tail(Delta, H) -> float:
    """Mass of the normalized Gaussian outside the H-ball of radius Delta.

    In whitened coordinates this is P(chi^2_k > Delta^2).  ``H`` may be the
    matrix or just the dimension k.
    """
    k = H if isinstance(H, (int, np.integer)) else _hmat(H).shape[0]
    if Delta < 0:
        raise DomainError("Delta must be nonnegative")
    return float(special.gammaincc(k / 2, Delta * Delta / 2))


def default_delta(k, eps=0.01) -> float:
    """Smallest convenient Delta with gaussian_tail(Delta) < eps."""
    delta = math.sqrt(2 * special.gammainccinv(k / 2, eps))
    while gaussian_tail(delta, k) >= eps:
        delta = np.nextafter(delta, np.inf) * (1 + 1e-12)
    return float(delta)


def _lattice_ball(radius2, H, budget):
    """Integer points with <a, H a> <= radius2, as an (n, k) array."""
    k = H.shape[0]
    cov = np.linalg.inv(H)
    half = np.floor(np.sqrt(max(radius2, 0.0) * np.diag(cov)) + 1e-9).astype(np.int64)
    size = int(np.prod(2 * half + 1))
    if size > budget:
        raise ResourceError(f"lattice ball needs {size} points, budget {budget}")
    axes = [np.arange(-r, r + 1) for r in half]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, k)
    q = np.einsum("ni,ij,nj->n", grid, H, grid)
    return grid[q <= radius2 * (1 + 1e-12)], q[q <= radius2 * (1 + 1e-12)]


def gaussian_pair_sum(T, beta, Delta, H, budget=LATTICE_BUDGET) -> float:
    """sum over ||alpha|| <= Delta sqrt(T) of e_T(alpha) e_T(alpha + beta)."""
    if T <= 0 or Delta <= 0:
        raise DomainError("T and Delta must be positive")
    H = _hmat(H)
    beta = np.array(HomologyClass.of(beta, H.shape[0]).coords, dtype=float)
    pts, q = _lattice_ball(Delta * Delta * T, H, budget)
    shifted = pts + beta
    q2 = np.einsum("ni,ij,nj->n", shifted, H, shifted)
    terms = np.exp(-(q + q2) / (2 * T))
    return float(np.sort(terms).sum())


def _box_bounds(box, k):
    lo, hi = box
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (k,)).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (k,)).copy()
    return lo, hi


def gaussian_box_mass(box, H, seed=0) -> float:
    """Mass of the axis-aligned box under the centred Gaussian with covariance H^-1.

    k = 1 is closed form; k = 2, 3 integrate the last coordinate in closed form
    (conditional normal) and the rest by adaptive quadrature; larger k uses the
    randomized quasi-Monte Carlo routine in scipy with the given seed.
    """
    H = _hmat(H)
    k = H.shape[0]
    lo, hi = _box_bounds(box, k)
    if np.any(lo >= hi):
        return 0.0
    cov = np.linalg.inv(H)
    cov = 0.5 * (cov + cov.T)
    if k == 1:
        sd = math.sqrt(cov[0, 0])
        return float(special.ndtr(hi[0] / sd) - special.ndtr(lo[0] / sd))
    if k <= 3:
        return _box_mass_quad(lo, hi, cov)
    mvn = stats.multivariate_normal(mean=np.zeros(k), cov=cov, seed=seed)
    mvn.maxpts, mvn.abseps, mvn.releps = 2_000_000 * k, 1e-6, 0.0
    return float(mvn.cdf(hi, lower_limit=lo))


def _box_mass_quad(lo, hi, cov):
    k = cov.shape[0]
    head = cov[:-1, :-1]
    cross = cov[-1, :-1]
    head_inv = np.linalg.inv(head)
    coef = cross @ head_inv
    cond_sd = math.sqrt(cov[-1, -1] - coef @ cross)
    head_dist = stats.multivariate_normal(mean=np.zeros(k - 1), cov=head)

    def integrand(*x):
        x = np.array(x)
        mu = coef @ x
        inner = special.ndtr((hi[-1] - mu) / cond_sd) - special.ndtr((lo[-1] - mu) / cond_sd)
        return head_dist.pdf(x) * inner

    ranges = [(lo[i], hi[i]) for i in range(k - 1)]
    val, _ = integrate.nquad(integrand, ranges, opts={"epsabs": 1e-11, "epsrel": 1e-10, "limit": 200})
    return float(val)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

DEFAULT_BOXES = {
    "centered_unit": (-1.0, 1.0),
    "positive_orthant": (0.0, math.inf),
}


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    return repr(float(x))


@dataclass
class CensusReport:
    """Measured-vs-predicted tables over a T grid.

    ``pair_rows``: T, beta, direct, convolution, prediction, ratio, log_ratio.
    ``alpha_rows``: T, alpha, count (pi~_alpha), prediction, ratio, log_ratio.
    ``total_rows``: T, pi(T), sum over all beta of pi_2^beta(T), pi(T)^2.
    ``clt_rows``: T, box name, lower, upper, empirical, gaussian, deviation.
    """

    k: int
    t_grid: list[float]
    pair_rows: list[dict] = field(default_factory=list)
    alpha_rows: list[dict] = field(default_factory=list)
    total_rows: list[dict] = field(default_factory=list)
    clt_rows: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def ratios(self, beta):
        beta = tuple(HomologyClass.of(beta, self.k).coords)
        return {r["T"]: r["ratio"] for r in self.pair_rows if r["beta"] == beta}

    def header(self):
        vec = [f"c_{i + 1}" for i in range(self.k)]
        return ["kind", "T", *vec, "count", "count_check", "prediction", "ratio", "log_ratio"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key, val in self.meta.items():
            text = json.dumps(val, separators=(",", ":")) if isinstance(val, (dict, list)) else val
            buf.write(f"# {key}={text}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        blank = [""] * self.k
        for r in self.total_rows:
            w.writerow(["total", _fmt(r["T"]), *blank, r["pi"], r["pair_total"], _fmt(r["pi_squared"]), "", ""])
        for r in self.pair_rows:
            w.writerow(
                ["pair", _fmt(r["T"]), *r["beta"], r["direct"], r["convolution"],
                 _fmt(r["prediction"]), _fmt(r["ratio"]), _fmt(r["log_ratio"])]
            )
        for r in self.alpha_rows:
            w.writerow(
                ["alpha", _fmt(r["T"]), *r["alpha"], r["count"], "",
                 _fmt(r["prediction"]), _fmt(r["ratio"]), _fmt(r["log_ratio"])]
            )
        return buf.getvalue()

    def clt_csv(self) -> str:
        return format_clt_table(self.k, self.clt_rows)


def _ratio(measured, predicted):
    if predicted > 0:
        ratio = measured / predicted
        return ratio, (math.log(ratio) if ratio > 0 else -math.inf)
    return None, None


def clt_table(table: OrbitTable, summary: ThermoSummary, t_grid, boxes=None, seed=0):
    """Empirical CLT fractions against the Gaussian box masses."""
    boxes = DEFAULT_BOXES if boxes is None else boxes
    k = table.k
    rows = []
    masses = {}
    for name, box in boxes.items():
        lo, hi = _box_bounds(box, k)
        masses[name] = (lo, hi, gaussian_box_mass((lo, hi), summary.H_matrix, seed=seed))
    for T in t_grid:
        if count_orbits(table, T) == 0:
            continue
        for name, (lo, hi, mass) in masses.items():
            emp = empirical_clt(table, T, summary.phi0, (lo, hi))
            rows.append(
                {"T": float(T), "box": name, "lower": lo.tolist(), "upper": hi.tolist(),
                 "empirical": emp, "gaussian": mass, "deviation": abs(emp - mass)}
            )
    return rows


def format_clt_table(k, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["T", "box", *[f"lo_{i + 1}" for i in range(k)], *[f"hi_{i + 1}" for i in range(k)],
                "empirical", "gaussian", "deviation"])
    for r in rows:
        w.writerow([_fmt(r["T"]), r["box"], *map(_fmt, r["lower"]), *map(_fmt, r["upper"]),
                    _fmt(r["empirical"]), _fmt(r["gaussian"]), _fmt(r["deviation"])])
    return buf.getvalue()


def convergence_report(
    table: OrbitTable,
    summary: ThermoSummary,
    beta_list,
    t_grid,
    delta=None,
    alpha_list=None,
    boxes=None,
    seed=0,
) -> CensusReport:
    """Census counts against the local-limit and pair predictions on a T grid."""
    k = table.k
    if summary.k != k:
        raise DomainError(f"summary has k={summary.k}, table has k={k}")
    t_grid = [float(t) for t in t_grid]
    if any(not 0 < t <= table.t_max for t in t_grid):
        raise DomainError(f"T grid must lie in (0, {table.t_max}]")
    if any(b >= a for a, b in zip(t_grid[1:], t_grid)):
        raise DomainError("T grid must be increasing")
    betas = [HomologyClass.of(b, k) for b in beta_list]
    alphas = [HomologyClass.of(a, k) for a in (alpha_list if alpha_list is not None else [HomologyClass.zero(k)])]
    if delta is None:
        delta = default_delta(k)

    meta = {}
    if table.model is not None:
        meta["model_hash"] = model_hash(table.model)
    meta["t_max"] = repr(table.t_max)
    meta["delta"] = repr(float(delta))
    meta["delta_tail"] = repr(gaussian_tail(delta, k))
    meta["thermo"] = summary.to_record()
    report = CensusReport(k=k, t_grid=t_grid, meta=meta)

    for T in t_grid:
        pi = count_orbits(table, T)
        allpairs = pair_counts_all(table, T)
        report.total_rows.append(
            {"T": T, "pi": pi, "pair_total": sum(allpairs.values()), "pi_squared": pi * pi}
        )
        pred = theorem1_prediction(T, summary)
        for beta in betas:
            direct = pair_count_direct(table, T, beta)
            conv = pair_count_convolution(table, T, beta, summary.phi0)
            if direct != conv:
                raise RuntimeError(f"pair identity violated at T={T}, beta={beta}: {direct} != {conv}")
            ratio, log_ratio = _ratio(direct, pred)
            report.pair_rows.append(
                {"T": T, "beta": beta.coords, "direct": direct, "convolution": conv,
                 "prediction": pred, "ratio": ratio, "log_ratio": log_ratio}
            )
        for alpha in alphas:
            count = shifted_count(table, T, alpha, summary.phi0)
            lpred = local_limit_prediction(T, alpha, summary)
            ratio, log_ratio = _ratio(count, lpred)
            report.alpha_rows.append(
                {"T": T, "alpha": alpha.coords, "count": count, "prediction": lpred,
                 "ratio": ratio, "log_ratio": log_ratio}
            )
    report.clt_rows = clt_table(table, summary, t_grid, boxes, seed)
    return report

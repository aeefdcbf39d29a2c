"""Pressure, entropy function and the constants built from them.

For a suspension over a graph, the pressure of the potential ``<xi, weight>``
is the unique ``s`` where the Perron root of the vertex matrix

    M(s, xi)[u, v] = sum over edges u -> v of exp(<xi, weight_e> - s * length_e)

equals one.  Everything else (winding cycle, Hessians, entropy function and
the local constants) is derived from that function.
"""

from __future__ import annotations

import functools
import itertools
import json
import math
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import DomainError, ModelError, NumericError
from .homology_model import MarkovFlowModel, require_valid

__all__ = [
    "ThermoSummary",
    "transfer_matrix",
    "perron_root",
    "shift_pressure",
    "flow_pressure",
    "pressure_gradient",
    "winding_cycle",
    "winding_cycle_fd",
    "pressure_hessian",
    "pressure_hessian_at",
    "xi_of_rho",
    "entropy_function",
    "entropy_hessian_fd",
    "local_constant",
    "pair_constant",
    "summarize",
    "slope_points",
]

EIG_TOL = 1e-13
EIG_MAX_ITER = 100_000
ROOT_TOL = 1e-12
GRAD_STEP = 1e-5
HESS_STEP = 1e-4
NEWTON_TOL = 1e-10
DEGENERATE_EIG = 1e-10


@functools.lru_cache(maxsize=64)
def _arrays(model):
    require_valid(model)
    return model.edge_arrays()


def _xi_vec(model, xi):
    arr = np.zeros(model.k) if xi is None else np.atleast_1d(np.asarray(xi, dtype=float))
    if arr.shape != (model.k,):
        raise DomainError(f"xi must have dimension {model.k}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("xi has non-finite entries")
    return arr


def _edge_factors(model, s, xi):
    src, tgt, lengths, weights = _arrays(model)
    return src, tgt, np.exp(weights @ xi - s * lengths)


def transfer_matrix(model: MarkovFlowModel, s, xi=None):
    xi = _xi_vec(model, xi)
    src, tgt, a = _edge_factors(model, s, xi)
    n = model.n_vertices
    m = np.zeros((n, n))
    np.add.at(m, (src, tgt), a)
    return m


def perron_root(m, tol=EIG_TOL, max_iter=EIG_MAX_ITER, left=True):
    """Perron root and right/left eigenvectors of an irreducible nonnegative matrix.

    Iterates on ``m + tau*I`` (primitive, so the iteration converges even when
    ``m`` is periodic) and stops once the Collatz-Wielandt bounds
    ``min(Ax/x) <= lambda <= max(Ax/x)`` agree to relative ``tol``.  The left
    vector is None when ``left`` is false.
    """
    n = m.shape[0]
    if n == 1:
        lam = float(m[0, 0])
        if lam <= 0:
            raise ModelError("transfer matrix is zero")
        return lam, np.ones(1), np.ones(1)
    tau = float(m.sum(axis=1).min())
    a = m + tau * np.eye(n)

    def iterate(mat):
        x = np.ones(n) / n
        gap = np.inf
        for _ in range(max_iter):
            y = mat @ x
            if np.any(y <= 0):
                raise ModelError("transfer matrix is reducible (eigenvector degeneracy)")
            ratios = y / x
            lo, hi = ratios.min(), ratios.max()
            x = y / y.sum()
            gap = (hi - lo) / hi
            if gap <= tol:
                return 0.5 * (lo + hi) - tau, x
        raise NumericError(f"power iteration did not converge in {max_iter} steps (residual {gap:.3e})")

    lam, v = iterate(a)
    u = iterate(a.T)[1] if left else None
    return lam, v, u


def shift_pressure(model: MarkovFlowModel, s, xi=None):
    """Log of the Perron root of M(s, xi)."""
    lam, _, _ = perron_root(transfer_matrix(model, s, xi), left=False)
    return math.log(lam)


def _edge_measure(model, s, xi):
    """Log Perron root and the Gibbs edge occupation measure at (s, xi)."""
    src, tgt, a = _edge_factors(model, s, xi)
    n = model.n_vertices
    m = np.zeros((n, n))
    np.add.at(m, (src, tgt), a)
    lam, v, u = perron_root(m)
    p = u[src] * a * v[tgt]
    return math.log(lam), p / p.sum()


def _pressure_root(model, xi):
    _, _, lengths, _ = _arrays(model)

    def f(s):
        return shift_pressure(model, s, xi)

    lo, hi = 0.0, 1.0
    f_lo, f_hi = f(lo), f(hi)
    for _ in range(200):
        if f_lo >= 0:
            break
        hi, f_hi = lo, f_lo
        lo = -2.0 * max(1.0, abs(lo))
        f_lo = f(lo)
    for _ in range(200):
        if f_hi <= 0:
            break
        lo, f_lo = hi, f_hi
        hi = 2.0 * hi
        f_hi = f(hi)
    if not (f_lo >= 0 >= f_hi):
        raise NumericError(f"could not bracket the pressure root (f({lo})={f_lo}, f({hi})={f_hi})")

    while hi - lo > 1e-2 * max(1.0, abs(lo)):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if f_mid > 0:
            lo = mid
        elif f_mid < 0:
            hi = mid
        else:
            return mid

    # safeguarded Newton; d/ds log(lambda) = -E_p[length]
    s = 0.5 * (lo + hi)
    for _ in range(100):
        val, p = _edge_measure(model, s, xi)
        if val > 0:
            lo = s
        elif val < 0:
            hi = s
        else:
            return s
        s_new = s + val / float(p @ lengths)
        if not lo <= s_new <= hi:
            s_new = 0.5 * (lo + hi)
        step = s_new - s
        s = s_new
        if abs(step) <= 4 * np.finfo(float).eps * max(1.0, abs(s)):
            break
    resid = f(s)
    if abs(resid) > ROOT_TOL:
        raise NumericError(f"pressure root not resolved: |P(s)| = {abs(resid):.3e}")
    return s


def flow_pressure(model: MarkovFlowModel, xi=None):
    """The pressure p(xi); p(0) is the topological entropy h."""
    return _pressure_root(model, _xi_vec(model, xi))


def pressure_gradient(model: MarkovFlowModel, xi=None):
    """Analytic gradient of p at xi: E_p[weight] / E_p[length] for the Gibbs edge measure."""
    xi = _xi_vec(model, xi)
    s = _pressure_root(model, xi)
    _, _, lengths, weights = _arrays(model)
    _, p = _edge_measure(model, s, xi)
    return (p @ weights) / (p @ lengths)


def winding_cycle(model: MarkovFlowModel):
    """Phi_0, the winding cycle of the measure of maximal entropy."""
    return pressure_gradient(model, None)


def winding_cycle_fd(model: MarkovFlowModel, step=GRAD_STEP):
    """Central finite-difference gradient of p at 0, independent of the edge measure."""
    k = model.k
    grad = np.empty(k)
    for i in range(k):
        e = np.zeros(k)
        e[i] = step
        grad[i] = (flow_pressure(model, e) - flow_pressure(model, -e)) / (2 * step)
    return grad


def _second_differences(f, x, step):
    k = x.size
    f0 = f(x)
    hess = np.empty((k, k))
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = step
        hess[i, i] = (f(x + ei) - 2 * f0 + f(x - ei)) / step**2
        for j in range(i):
            ej = np.zeros(k)
            ej[j] = step
            val = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4 * step**2)
            hess[i, j] = hess[j, i] = val
    return hess


def fd_hessian(f, x, step=HESS_STEP):
    """Central second differences with one Richardson extrapolation (steps h and 2h)."""
    x = np.asarray(x, dtype=float)
    d1 = _second_differences(f, x, step)
    d2 = _second_differences(f, x, 2 * step)
    hess = (4 * d1 - d2) / 3
    return 0.5 * (hess + hess.T)


def pressure_hessian_at(model: MarkovFlowModel, xi=None, step=HESS_STEP):
    xi = _xi_vec(model, xi)
    return fd_hessian(lambda x: flow_pressure(model, x), xi, step)


def pressure_hessian(model: MarkovFlowModel, step=HESS_STEP):
    """Hessian of p at 0, its inverse H and sigma with sigma^(-2k) = det H.

    Raises ModelError when some homology direction carries no variance.
    """
    hess = pressure_hessian_at(model, None, step)
    eigs = np.linalg.eigvalsh(hess)
    # second differences carry ~1e-8 noise, so a flat direction rarely reads as exactly 0
    floor = max(DEGENERATE_EIG, 1e-7 * float(np.abs(eigs).max()))
    if eigs.min() <= floor:
        raise ModelError(
            f"homology direction carries no variance (pressure Hessian eigenvalues {eigs.tolist()})"
        )
    h_matrix = np.linalg.inv(hess)
    h_matrix = 0.5 * (h_matrix + h_matrix.T)
    sigma = float(np.linalg.det(h_matrix)) ** (-1.0 / (2 * model.k))
    return hess, h_matrix, sigma


# ---------------------------------------------------------------------------
# Legendre side
# ---------------------------------------------------------------------------


def _simple_cycle_slopes(model):
    src, tgt, lengths, weights = _arrays(model)
    by_pair = {}
    for i, (a, b) in enumerate(zip(src.tolist(), tgt.tolist())):
        by_pair.setdefault((a, b), []).append(i)
    g = nx.DiGraph()
    g.add_nodes_from(range(model.n_vertices))
    g.add_edges_from(by_pair)
    slopes = []
    for cyc in nx.simple_cycles(g):
        hops = [(cyc[j], cyc[(j + 1) % len(cyc)]) for j in range(len(cyc))]
        for choice in itertools.product(*(by_pair[hop] for hop in hops)):
            idx = list(choice)
            slopes.append(weights[idx].sum(axis=0) / lengths[idx].sum())
    return np.unique(np.array(slopes), axis=0)


@functools.lru_cache(maxsize=64)
def slope_points(model: MarkovFlowModel):
    """Homology-per-length of every simple cycle; their hull is the winding set."""
    pts = _simple_cycle_slopes(model)
    pts.setflags(write=False)
    return pts


def _check_interior(model, rho, margin=1e-9):
    pts = slope_points(model)
    if model.k == 1:
        lo, hi = pts[:, 0].min(), pts[:, 0].max()
        if not lo + margin < rho[0] < hi - margin:
            raise DomainError(f"rho={rho[0]} outside the interior of the winding set [{lo}, {hi}]")
        return
    try:
        hull = ConvexHull(pts)
    except (QhullError, ValueError):
        raise DomainError("winding set has empty interior") from None
    if np.any(hull.equations[:, :-1] @ rho + hull.equations[:, -1] >= -margin):
        raise DomainError(f"rho={rho.tolist()} outside the interior of the winding set")


def xi_of_rho(model: MarkovFlowModel, rho, tol=NEWTON_TOL, max_iter=100):
    """Solve grad p(xi) = rho by damped Newton from xi = 0."""
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    if rho.shape != (model.k,):
        raise DomainError(f"rho must have dimension {model.k}")
    if not np.all(np.isfinite(rho)):
        raise DomainError("rho has non-finite entries")
    _check_interior(model, rho)

    k = model.k
    xi = np.zeros(k)
    resid = pressure_gradient(model, xi) - rho
    norm = np.linalg.norm(resid)
    for _ in range(max_iter):
        if norm <= tol:
            return xi
        jac = np.empty((k, k))
        for j in range(k):
            e = np.zeros(k)
            e[j] = GRAD_STEP
            jac[:, j] = (pressure_gradient(model, xi + e) - pressure_gradient(model, xi - e)) / (2 * GRAD_STEP)
        step = np.linalg.solve(0.5 * (jac + jac.T), -resid)
        t = 1.0
        while t > 1e-12:
            cand = xi + t * step
            try:
                cand_resid = pressure_gradient(model, cand) - rho
            except (NumericError, OverflowError, FloatingPointError):
                t *= 0.5
                continue
            if np.linalg.norm(cand_resid) < norm:
                break
            t *= 0.5
        else:
            if norm <= 10 * tol:
                return xi
            raise NumericError(f"Newton for xi(rho) stalled with residual {norm:.3e}")
        xi, resid = cand, cand_resid
        norm = np.linalg.norm(resid)
    if norm <= tol:
        return xi
    raise NumericError(f"Newton for xi(rho) did not converge (residual {norm:.3e})")


def entropy_function(model: MarkovFlowModel, rho):
    """h(rho) = p(xi) - <xi, rho> with xi = xi(rho)."""
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    xi = xi_of_rho(model, rho)
    return flow_pressure(model, xi) - float(xi @ rho)


def entropy_hessian_fd(model: MarkovFlowModel, rho, step=HESS_STEP):
    """Hessian of the entropy function by second differences on the dual side."""
    return fd_hessian(lambda r: entropy_function(model, r), np.atleast_1d(rho), step)


def local_constant(model: MarkovFlowModel, rho):
    """C(rho) = |det Hess h(rho)|^(1/2) / ((2 pi)^(k/2) h(rho)).

    Hess h(rho) = -(Hess p(xi(rho)))^-1 is negative definite; the absolute
    value of its determinant is used.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    xi = xi_of_rho(model, rho)
    ent = flow_pressure(model, xi) - float(xi @ rho)
    if ent <= 0:
        raise DomainError(f"entropy function is not positive at rho={rho.tolist()}")
    det_p = float(np.linalg.det(pressure_hessian_at(model, xi)))
    k = model.k
    return abs(1.0 / det_p) ** 0.5 / ((2 * math.pi) ** (k / 2) * ent)


# ---------------------------------------------------------------------------
# summary
# ---------------------------------------------------------------------------

SUMMARY_FIELDS = ("k", "h", "phi0", "sigma", "c_phi0", "c_pair", "pressure_hessian", "H_matrix")


@dataclass(frozen=True)
class ThermoSummary:
    k: int
    h: float
    phi0: np.ndarray
    pressure_hessian: np.ndarray
    H_matrix: np.ndarray
    sigma: float
    c_phi0: float
    c_pair: float
    meta: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_hessian(cls, h, phi0, hess, meta=None):
        hess = np.atleast_2d(np.asarray(hess, dtype=float))
        k = hess.shape[0]
        h_matrix = np.linalg.inv(hess)
        h_matrix = 0.5 * (h_matrix + h_matrix.T)
        sigma = float(np.linalg.det(h_matrix)) ** (-1.0 / (2 * k))
        return cls._build(k, h, phi0, hess, h_matrix, sigma, meta)

    @classmethod
    def from_constants(cls, h, k, c_phi0, phi0=None, meta=None):
        """Isotropic summary from h and C(Phi_0) alone (e.g. hyperbolic surfaces).

        sigma follows from C(Phi_0) = ((2 pi)^(k/2) sigma^k h)^-1 and H is taken
        to be sigma^-2 times the identity.
        """
        if h <= 0 or c_phi0 <= 0:
            raise DomainError("h and C(Phi_0) must be positive")
        sigma = (c_phi0 * (2 * math.pi) ** (k / 2) * h) ** (-1.0 / k)
        h_matrix = np.eye(k) / sigma**2
        hess = np.eye(k) * sigma**2
        phi0 = np.zeros(k) if phi0 is None else phi0
        return cls._build(k, h, phi0, hess, h_matrix, sigma, meta)

    @classmethod
    def _build(cls, k, h, phi0, hess, h_matrix, sigma, meta):
        c_phi0 = 1.0 / ((2 * math.pi) ** (k / 2) * sigma**k * h)
        c_pair = 1.0 / (2**k * math.pi ** (k / 2) * sigma**k * h**2)
        return cls(
            k=int(k),
            h=float(h),
            phi0=np.atleast_1d(np.asarray(phi0, dtype=float)),
            pressure_hessian=np.atleast_2d(np.asarray(hess, dtype=float)),
            H_matrix=np.atleast_2d(np.asarray(h_matrix, dtype=float)),
            sigma=float(sigma),
            c_phi0=float(c_phi0),
            c_pair=float(c_pair),
            meta=dict(meta or {}),
        )

    def to_record(self) -> dict:
        """Plain dict in the documented field order."""
        return {
            "k": self.k,
            "h": self.h,
            "phi0": self.phi0.tolist(),
            "sigma": self.sigma,
            "c_phi0": self.c_phi0,
            "c_pair": self.c_pair,
            "pressure_hessian": self.pressure_hessian.tolist(),
            "H_matrix": self.H_matrix.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), separators=(",", ":"))

    @classmethod
    def from_record(cls, rec):
        missing = {"k", "h"} - set(rec)
        if missing:
            raise DomainError(f"summary record lacks {sorted(missing)}")
        k = int(rec["k"])
        phi0 = rec.get("phi0", [0.0] * k)
        if "pressure_hessian" in rec:
            return cls.from_hessian(rec["h"], phi0, rec["pressure_hessian"])
        if "c_phi0" in rec:
            return cls.from_constants(rec["h"], k, rec["c_phi0"], phi0)
        raise DomainError("summary record needs pressure_hessian or c_phi0")

    def describe(self) -> str:
        lines = [
            f"Betti number k        {self.k}",
            f"entropy h             {self.h:.12g}",
            f"winding cycle Phi_0   {np.array2string(self.phi0, precision=12)}",
            f"Hess p(0)             {np.array2string(self.pressure_hessian, precision=10)}",
            f"H = -Hess h(Phi_0)    {np.array2string(self.H_matrix, precision=10)}",
            f"sigma                 {self.sigma:.12g}",
            f"C(Phi_0)              {self.c_phi0:.12g}",
            f"pair constant         {self.c_pair:.12g}",
        ]
        return "\n".join(lines)


def summarize(model: MarkovFlowModel) -> ThermoSummary:
    h = flow_pressure(model)
    phi0 = winding_cycle(model)
    hess, _, _ = pressure_hessian(model)
    return ThermoSummary.from_hessian(h, phi0, hess)


def pair_constant(summary: ThermoSummary, rtol=1e-12) -> float:
    """Leading constant of the pair asymptotic, 1 / (2^k pi^(k/2) sigma^k h^2).

    Cross-checked against C(Phi_0)^2 pi^(k/2) sigma^k.
    """
    k, sigma, h = summary.k, summary.sigma, summary.h
    direct = 1.0 / (2**k * math.pi ** (k / 2) * sigma**k * h**2)
    composed = summary.c_phi0**2 * math.pi ** (k / 2) * sigma**k
    if abs(direct - composed) > rtol * abs(direct):
        raise NumericError(f"inconsistent summary: pair constant {direct!r} vs {composed!r}")
    return direct

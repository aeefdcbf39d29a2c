"""Exhaustive prime-orbit census and the exact counting functions built on it."""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import shortest_path

from .errors import DomainError, IngestionError, OutOfRangeError, ResourceError
from .homology_model import HomologyClass, MarkovFlowModel, integer_part, require_valid

__all__ = [
    "PrimeOrbit",
    "OrbitTable",
    "DEFAULT_BUDGET",
    "enumerate_prime_orbits",
    "iter_prime_orbits",
    "canonical_rotation",
    "count_orbits",
    "count_orbits_in_class",
    "class_histogram",
    "shifted_count",
    "pair_count_direct",
    "pair_count_convolution",
    "pair_counts_all",
    "empirical_clt",
    "sup_normalized_count",
    "write_orbit_table",
    "format_orbit_table",
    "ingest_orbit_table",
]

DEFAULT_BUDGET = 5_000_000


@dataclass(frozen=True)
class PrimeOrbit:
    edge_cycle: tuple[int, ...]
    length: float
    homology: HomologyClass


@dataclass(frozen=True, eq=False)
class OrbitTable:
    """Prime orbits grouped by (length, homology), sorted by length then homology.

    ``lengths`` is float64 (n,), ``homology`` int64 (n, k), ``counts`` int64 (n,).
    """

    k: int
    t_max: float
    lengths: np.ndarray
    homology: np.ndarray
    counts: np.ndarray
    model: MarkovFlowModel | None = field(default=None, repr=False)

    def __post_init__(self):
        for arr in (self.lengths, self.homology, self.counts):
            arr.setflags(write=False)

    def __len__(self):
        return int(self.lengths.size)

    @property
    def total(self):
        return int(self.counts.sum())

    def entries(self):
        """Yield (length, HomologyClass, count) records."""
        for l, hc, c in zip(self.lengths.tolist(), self.homology.tolist(), self.counts.tolist()):
            yield l, HomologyClass(tuple(hc)), c

    def same_entries(self, other) -> bool:
        return (
            self.k == other.k
            and np.array_equal(self.lengths, other.lengths)
            and np.array_equal(self.homology, other.homology)
            and np.array_equal(self.counts, other.counts)
        )

    @classmethod
    def from_records(cls, k, t_max, lengths, homology, counts=None, model=None):
        """Build a table, merging equal (length, homology) records by bit equality."""
        lengths = np.asarray(lengths, dtype=float).reshape(-1)
        homology = np.asarray(homology, dtype=np.int64).reshape(-1, k)
        counts = np.ones(lengths.size, dtype=np.int64) if counts is None else np.asarray(counts, dtype=np.int64)
        if lengths.size:
            keys = [homology[:, j] for j in reversed(range(k))] + [lengths]
            order = np.lexsort(keys)
            lengths, homology, counts = lengths[order], homology[order], counts[order]
            same = (lengths[1:] == lengths[:-1]) & np.all(homology[1:] == homology[:-1], axis=1)
            starts = np.flatnonzero(np.concatenate(([True], ~same)))
            counts = np.add.reduceat(counts, starts)
            lengths, homology = lengths[starts], homology[starts]
        return cls(k, float(t_max), lengths, homology, counts, model)


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------


def _return_distances(model):
    """dist[u, v]: minimal total length of a path from u to v (0 on the diagonal)."""
    src, tgt, lengths, _ = model.edge_arrays()
    n = model.n_vertices
    w = np.full((n, n), np.inf)
    for a, b, l in zip(src.tolist(), tgt.tolist(), lengths.tolist()):
        w[a, b] = min(w[a, b], l)
    return shortest_path(np.where(np.isinf(w), 0.0, w), method="FW", directed=True)


def _enumerate_from(model, start, t_max, budget, keep_words=False):
    """Lyndon closed paths whose first (smallest) edge is ``start``.

    A depth-first search over prenecklace words: appending edge c to a word w
    of period p is allowed only when c >= w[n-p]; the period is kept on
    equality and becomes n+1 otherwise.  Closed paths with period equal to
    their length are exactly the primitive words in minimal rotation, so every
    prime orbit is emitted once, from the subtree of its smallest edge.
    """
    src, tgt, lengths, weights = model.edge_arrays()
    src_l, tgt_l, len_l = src.tolist(), tgt.tolist(), lengths.tolist()
    w_l = [tuple(r) for r in weights.tolist()]
    k = model.k
    out_edges = [[] for _ in range(model.n_vertices)]
    for e in range(model.n_edges):
        out_edges[src_l[e]].append(e)
    home = src_l[start]
    back = _return_distances(model)[:, home].tolist()

    found_len, found_hom, found_words = [], [], []
    word = [start]
    # frames: (period, accumulated length, accumulated homology, next out-edge position)
    acc0 = len_l[start]
    if acc0 + back[tgt_l[start]] > t_max:
        empty = (np.empty(0), np.empty((0, k), dtype=np.int64))
        return empty + ([],) if keep_words else empty
    stack = [(1, acc0, w_l[start], 0)]
    if tgt_l[start] == home:
        found_len.append(acc0)
        found_hom.append(w_l[start])
        if keep_words:
            found_words.append((start,))
    while stack:
        p, acc, hom, pos = stack[-1]
        n = len(word)
        options = out_edges[tgt_l[word[-1]]]
        advanced = False
        while pos < len(options):
            c = options[pos]
            pos += 1
            ref = word[n - p]
            if c < ref:
                continue
            new_acc = acc + len_l[c]
            if new_acc + back[tgt_l[c]] > t_max:
                continue
            new_p = p if c == ref else n + 1
            new_hom = tuple(a + b for a, b in zip(hom, w_l[c]))
            stack[-1] = (p, acc, hom, pos)
            word.append(c)
            stack.append((new_p, new_acc, new_hom, 0))
            if new_p == n + 1 and tgt_l[c] == home:
                found_len.append(new_acc)
                found_hom.append(new_hom)
                if keep_words:
                    found_words.append(tuple(word))
                if len(found_len) > budget:
                    raise ResourceError(f"orbit count exceeds the configured budget (--budget {budget})")
            advanced = True
            break
        if not advanced:
            stack.pop()
            word.pop()
    lengths_arr = np.array(found_len, dtype=float)
    hom_arr = np.array(found_hom, dtype=np.int64).reshape(-1, k)
    if keep_words:
        return lengths_arr, hom_arr, found_words
    return lengths_arr, hom_arr


def _worker(args):
    model, start, t_max, budget = args
    return _enumerate_from(model, start, t_max, budget)


def _projected_count(model, t_max):
    from .thermo import flow_pressure

    h = flow_pressure(model)
    x = h * t_max
    return math.exp(x) / x if x > 1 else math.exp(x)


def enumerate_prime_orbits(
    model: MarkovFlowModel, t_max: float, workers: int = 1, budget: int = DEFAULT_BUDGET
) -> OrbitTable:
    """All prime periodic orbits of length <= t_max.

    Work is split by smallest edge of the canonical word; the merged table does
    not depend on ``workers``.
    """
    require_valid(model)
    t_max = float(t_max)
    if not t_max > 0 or not math.isfinite(t_max):
        raise DomainError(f"t_max must be positive and finite, got {t_max}")
    if workers < 1:
        raise DomainError("workers must be >= 1")
    if _projected_count(model, t_max) > 4 * budget:
        raise ResourceError(f"projected orbit count exceeds the configured budget (--budget {budget})")

    jobs = [(model, e, t_max, budget) for e in range(model.n_edges)]
    if workers == 1 or len(jobs) == 1:
        parts = [_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            parts = list(pool.map(_worker, jobs))
    lengths = np.concatenate([p[0] for p in parts])
    homology = np.concatenate([p[1] for p in parts])
    if lengths.size > budget:
        raise ResourceError(f"orbit count {lengths.size} exceeds the configured budget (--budget {budget})")
    return OrbitTable.from_records(model.k, t_max, lengths, homology, model=model)


def iter_prime_orbits(model: MarkovFlowModel, t_max: float, budget: int = DEFAULT_BUDGET):
    """Yield every prime orbit of length <= t_max as a PrimeOrbit, in canonical rotation.

    Single process; meant for inspection and small cutoffs.
    """
    require_valid(model)
    for start in range(model.n_edges):
        lengths, hom, words = _enumerate_from(model, start, float(t_max), budget, keep_words=True)
        for l, hc, w in zip(lengths.tolist(), hom.tolist(), words):
            yield PrimeOrbit(w, l, HomologyClass(tuple(hc)))


def canonical_rotation(word):
    """Lexicographically least rotation of a cyclic word and whether it is primitive."""
    n = len(word)
    rots = [tuple(word[i:]) + tuple(word[:i]) for i in range(n)]
    best = min(rots)
    primitive = rots.count(best) == 1
    return best, primitive


# ---------------------------------------------------------------------------
# counting functions
# ---------------------------------------------------------------------------


def _check_t(table, t):
    t = float(t)
    if t > table.t_max:
        raise OutOfRangeError(f"T={t} exceeds the table cutoff T_max={table.t_max}")
    return t


def _upto(table, t):
    return int(np.searchsorted(table.lengths, _check_t(table, t), side="right"))


def _vec(table, value, name):
    hc = HomologyClass.of(value)
    if len(hc) != table.k:
        raise DomainError(f"{name} has dimension {len(hc)}, expected {table.k}")
    return hc


def count_orbits(table: OrbitTable, t) -> int:
    """pi(T): number of prime orbits with length <= T."""
    return int(table.counts[: _upto(table, t)].sum())


def count_orbits_in_class(table: OrbitTable, t, alpha) -> int:
    """pi(T, alpha)."""
    alpha = _vec(table, alpha, "alpha")
    n = _upto(table, t)
    mask = np.all(table.homology[:n] == np.array(alpha.coords), axis=1)
    return int(table.counts[:n][mask].sum())


def class_histogram(table: OrbitTable, t) -> dict[tuple[int, ...], int]:
    """Map homology class -> pi(T, class) over the realized classes."""
    n = _upto(table, t)
    if n == 0:
        return {}
    classes, inverse = np.unique(table.homology[:n], axis=0, return_inverse=True)
    sums = np.bincount(inverse.reshape(-1), weights=table.counts[:n], minlength=len(classes))
    return {tuple(c): int(round(s)) for c, s in zip(classes.tolist(), sums.tolist())}


def _shift(table, t, phi0):
    phi0 = np.atleast_1d(np.asarray(phi0, dtype=float))
    if phi0.shape != (table.k,):
        raise DomainError(f"phi0 must have dimension {table.k}")
    return integer_part(phi0 * float(t))


def shifted_count(table: OrbitTable, t, alpha, phi0) -> int:
    """pi(T, alpha + floor(Phi_0 T))."""
    alpha = _vec(table, alpha, "alpha")
    return count_orbits_in_class(table, t, alpha + _shift(table, t, phi0))


def pair_count_direct(table: OrbitTable, t, beta, chunk=256) -> int:
    """Ordered pairs (g, g') with both lengths <= T and [g] - [g'] = beta.

    Brute force over all pairs of table entries; the diagonal g = g' counts.
    """
    beta = np.array(_vec(table, beta, "beta").coords)
    n = _upto(table, t)
    hom, cnt = table.homology[:n], table.counts[:n]
    total = 0
    for i in range(0, n, chunk):
        diff = hom[i : i + chunk, None, :] - hom[None, :, :]
        match = np.all(diff == beta, axis=2)
        rows, cols = np.nonzero(match)
        total += int((cnt[i : i + chunk][rows] * cnt[cols]).sum())
    return total


def pair_count_convolution(table: OrbitTable, t, beta, phi0) -> int:
    """sum over alpha of pi~_{alpha+beta}(T) pi~_alpha(T), over the realized alpha."""
    beta = _vec(table, beta, "beta")
    shift = _shift(table, t, phi0)
    hist = class_histogram(table, t)
    total = 0
    for cls in hist:
        alpha = HomologyClass(cls) - shift
        a = hist[cls]  # == shifted_count(table, t, alpha, phi0)
        b = hist.get((alpha + beta + shift).coords, 0)
        total += b * a
    return total


def pair_counts_all(table: OrbitTable, t) -> dict[tuple[int, ...], int]:
    """pi_2^beta(T) for every realized difference beta."""
    hist = class_histogram(table, t)
    out: dict[tuple[int, ...], int] = {}
    for c1, n1 in hist.items():
        for c2, n2 in hist.items():
            beta = tuple(a - b for a, b in zip(c1, c2))
            out[beta] = out.get(beta, 0) + n1 * n2
    return dict(sorted(out.items()))


def empirical_clt(table: OrbitTable, t, phi0, box) -> float:
    """Fraction of orbits with length <= T whose class ([g] - floor(Phi_0 T)) / sqrt(T) lies in box.

    ``box`` is a pair (lower, upper) of length-k sequences; bounds are inclusive
    and may be infinite.  An empty box (some lower > upper) has mass 0.
    """
    lo, hi = _box(box, table.k)
    n = _upto(table, t)
    total = int(table.counts[:n].sum())
    if total == 0:
        raise DomainError(f"empty census at T={t}: the CLT fraction is undefined")
    shift = np.array(_shift(table, t, phi0).coords)
    x = (table.homology[:n] - shift) / math.sqrt(float(t))
    inside = np.all((x >= lo) & (x <= hi), axis=1)
    return float(table.counts[:n][inside].sum()) / total


def _box(box, k):
    lo, hi = box
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (k,)).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (k,)).copy()
    if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
        raise DomainError("box bounds must not be NaN")
    return lo, hi


def sup_normalized_count(table: OrbitTable, t, phi0, h) -> float:
    """max over alpha of pi~_alpha(T) T^(1+k/2) e^(-hT)."""
    if h <= 0:
        raise DomainError("h must be positive")
    t = _check_t(table, t)
    _shift(table, t, phi0)
    hist = class_histogram(table, t)
    if not hist:
        return 0.0
    # shifting alpha by floor(Phi_0 T) permutes the classes, so the max is over hist values
    peak = max(hist.values())
    return peak * t ** (1 + table.k / 2) * math.exp(-h * t)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _header(k):
    return ["length"] + [f"weight_{i + 1}" for i in range(k)] + ["count"]


def format_orbit_table(table: OrbitTable) -> str:
    buf = io.StringIO()
    buf.write(f"# t_max={table.t_max!r}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_header(table.k))
    for l, hc, c in table.entries():
        writer.writerow([f"{l:.17g}", *hc.coords, c])
    return buf.getvalue()


def atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_orbit_table(table: OrbitTable, path):
    atomic_write(path, format_orbit_table(table))


def ingest_orbit_table(path, t_max=None) -> OrbitTable:
    """Read an orbit-table CSV (header ``length,weight_1..weight_k,count``).

    Leading ``#`` lines are comments; ``# t_max=<value>`` sets the cutoff.
    Without it the cutoff defaults to the largest length in the file.
    """
    lines = Path(path).read_text().splitlines()
    file_tmax = None
    lineno = 0
    while lineno < len(lines) and lines[lineno].startswith("#"):
        body = lines[lineno][1:].strip()
        if body.startswith("t_max="):
            try:
                file_tmax = float(body[len("t_max=") :])
            except ValueError:
                raise IngestionError(f"bad t_max comment {body!r}", lineno + 1) from None
        lineno += 1
    if lineno >= len(lines):
        raise IngestionError("missing header", lineno + 1)
    header = [h.strip() for h in next(csv.reader([lines[lineno]]))]
    k = len(header) - 2
    if k < 1 or header != _header(k):
        raise IngestionError(f"header must be length,weight_1..weight_k,count; got {','.join(header)}", lineno + 1)
    lengths, homology, counts = [], [], []
    for offset, row in enumerate(csv.reader(lines[lineno + 1 :])):
        num = lineno + 2 + offset
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != k + 2:
            raise IngestionError(f"expected {k + 2} fields, got {len(row)}", num)
        try:
            length = float(row[0])
            hom = [int(x) for x in row[1:-1]]
            count = int(row[-1])
        except ValueError as exc:
            raise IngestionError(str(exc), num) from None
        if not math.isfinite(length) or length <= 0:
            raise IngestionError(f"length must be positive, got {row[0]}", num)
        if count < 1:
            raise IngestionError(f"count must be >= 1, got {count}", num)
        lengths.append(length)
        homology.append(hom)
        counts.append(count)
    longest = max(lengths, default=0.0)
    if t_max is None:
        t_max = file_tmax if file_tmax is not None else longest
    if lengths and longest > t_max:
        raise IngestionError(f"table contains length {longest} beyond T_max={t_max}")
    if t_max <= 0:
        t_max = 0.0
    return OrbitTable.from_records(k, t_max, lengths, np.array(homology, dtype=np.int64).reshape(-1, k), counts)

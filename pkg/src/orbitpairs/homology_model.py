"""Symbolic flow models and the homology lattice conventions.

A model is a strongly connected directed multigraph.  Each edge carries a
positive length (the roof function of the suspension) and an integer weight
vector; the length and homology class of a closed path are the sums over its
edges.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import networkx as nx
import numpy as np
import yaml

from .errors import DomainError, IngestionError, ModelError

__all__ = [
    "HomologyClass",
    "Edge",
    "MarkovFlowModel",
    "ValidationReport",
    "validate_model",
    "integer_part",
    "load_model",
    "model_from_dict",
    "model_to_dict",
    "dump_model",
    "model_hash",
    "golden_model",
    "symmetric_model",
    "full_shift_model",
]

# ratios with denominators up to this bound count as "rational"
RATIONAL_MAX_DENOMINATOR = 1000
RATIONAL_TOL = 1e-9


@dataclass(frozen=True, order=True)
class HomologyClass:
    """An element of H_1(M, Z)/torsion, identified with Z^k."""

    coords: tuple[int, ...]

    def __post_init__(self):
        coords = tuple(int(c) for c in self.coords)
        if not coords:
            raise DomainError("homology class must have dimension k >= 1")
        object.__setattr__(self, "coords", coords)

    @classmethod
    def of(cls, value, k=None):
        """Coerce an int, a sequence of ints or a HomologyClass."""
        if isinstance(value, HomologyClass):
            hc = value
        elif isinstance(value, (int, np.integer)):
            hc = cls((int(value),))
        else:
            values = list(value)
            for v in values:
                if isinstance(v, (float, np.floating)) and not float(v).is_integer():
                    raise DomainError(f"homology coordinates must be integers, got {v!r}")
            hc = cls(tuple(int(v) for v in values))
        if k is not None and len(hc) != k:
            raise DomainError(f"homology class {hc.coords} has dimension {len(hc)}, expected {k}")
        return hc

    @classmethod
    def zero(cls, k):
        return cls((0,) * k)

    @property
    def k(self):
        return len(self.coords)

    def __len__(self):
        return len(self.coords)

    def __iter__(self):
        return iter(self.coords)

    def __getitem__(self, i):
        return self.coords[i]

    def _check(self, other):
        other = HomologyClass.of(other)
        if len(other) != len(self):
            raise DomainError(f"dimension mismatch: {len(self)} vs {len(other)}")
        return other

    def __add__(self, other):
        other = self._check(other)
        return HomologyClass(tuple(a + b for a, b in zip(self.coords, other.coords)))

    def __sub__(self, other):
        other = self._check(other)
        return HomologyClass(tuple(a - b for a, b in zip(self.coords, other.coords)))

    def __neg__(self):
        return HomologyClass(tuple(-a for a in self.coords))

    def to_array(self):
        return np.array(self.coords, dtype=np.int64)

    def __str__(self):
        return "(" + ",".join(str(c) for c in self.coords) + ")"


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    length: float
    weight: HomologyClass


@dataclass(frozen=True)
class MarkovFlowModel:
    """Suspension model of a transitive flow over a finite directed multigraph.

    Edges are indexed by their position in ``edges``; that index order is the
    alphabet order used for canonical orbit words.
    """

    k: int
    vertices: tuple[str, ...]
    edges: tuple[Edge, ...]

    def __post_init__(self):
        if int(self.k) < 1:
            raise ModelError(f"Betti number k must be >= 1, got {self.k}")
        if not self.vertices:
            raise ModelError("model needs at least one vertex")
        if len(set(self.vertices)) != len(self.vertices):
            raise ModelError("duplicate vertex names")
        names = set(self.vertices)
        for i, e in enumerate(self.edges):
            if e.source not in names or e.target not in names:
                raise ModelError(f"edge {i} references unknown vertex ({e.source!r} -> {e.target!r})")
            if not math.isfinite(e.length) or e.length <= 0:
                raise DomainError(f"edge {i} has non-positive length {e.length!r}")
            if len(e.weight) != self.k:
                raise ModelError(f"edge {i} weight has dimension {len(e.weight)}, expected k={self.k}")

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_edges(self):
        return len(self.edges)

    def vertex_index(self):
        return {v: i for i, v in enumerate(self.vertices)}

    def edge_arrays(self):
        """Return (source index, target index, lengths, weights) as numpy arrays."""
        idx = self.vertex_index()
        src = np.array([idx[e.source] for e in self.edges], dtype=np.intp)
        tgt = np.array([idx[e.target] for e in self.edges], dtype=np.intp)
        lengths = np.array([e.length for e in self.edges], dtype=float)
        weights = np.array([e.weight.coords for e in self.edges], dtype=np.int64).reshape(-1, self.k)
        return src, tgt, lengths, weights

    def digraph(self):
        g = nx.MultiDiGraph()
        g.add_nodes_from(self.vertices)
        for i, e in enumerate(self.edges):
            g.add_edge(e.source, e.target, key=i)
        return g


@dataclass(frozen=True)
class ValidationReport:
    strongly_connected: bool
    lattice_warning: bool
    k: int
    edge_count: int

    @property
    def ok(self):
        return self.strongly_connected and self.edge_count >= 2


def _looks_rational(x):
    frac = Fraction(x).limit_denominator(RATIONAL_MAX_DENOMINATOR)
    return abs(x - float(frac)) <= RATIONAL_TOL * abs(x)


def validate_model(model: MarkovFlowModel) -> ValidationReport:
    """Check the hypotheses the counting results rely on.

    Strong connectivity is required downstream.  ``lattice_warning`` is only a
    heuristic: it fires when every edge length is a rational multiple of the
    first one (small denominators), in which case the suspension may fail to be
    weak-mixing.
    """
    if not isinstance(model, MarkovFlowModel):
        raise ModelError(f"expected a MarkovFlowModel, got {type(model).__name__}")
    strongly = nx.is_strongly_connected(model.digraph())
    lengths = [e.length for e in model.edges]
    lattice = bool(lengths) and all(_looks_rational(l / lengths[0]) for l in lengths)
    return ValidationReport(
        strongly_connected=bool(strongly),
        lattice_warning=lattice,
        k=model.k,
        edge_count=model.n_edges,
    )


def require_valid(model):
    report = validate_model(model)
    if not report.strongly_connected:
        raise ModelError("model graph is not strongly connected")
    if report.edge_count < 2:
        raise ModelError("model needs at least two edges")
    return report


def integer_part(rho) -> HomologyClass:
    """Lattice point with ``rho - integer_part(rho)`` in the cell [0, 1)^k."""
    arr = np.atleast_1d(np.asarray(rho, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError("rho must be a non-empty vector")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"non-finite entry in {arr.tolist()}")
    return HomologyClass(tuple(int(v) for v in np.floor(arr)))


# ---------------------------------------------------------------------------
# model files
# ---------------------------------------------------------------------------

_TOP_FIELDS = {"k", "vertices", "edges"}
_EDGE_FIELDS = {"from", "to", "length", "weight"}


def model_from_dict(data) -> MarkovFlowModel:
    if not isinstance(data, dict):
        raise IngestionError("model document must be a mapping")
    unknown = set(data) - _TOP_FIELDS
    if unknown:
        raise IngestionError(f"unknown model fields: {sorted(unknown)}")
    missing = _TOP_FIELDS - set(data)
    if missing:
        raise IngestionError(f"missing model fields: {sorted(missing)}")
    k = data["k"]
    if isinstance(k, bool) or not isinstance(k, int) or k < 1:
        raise IngestionError(f"k must be a positive integer, got {k!r}")
    vertices = data["vertices"]
    if not isinstance(vertices, list) or not vertices:
        raise IngestionError("vertices must be a non-empty list")
    vertices = tuple(str(v) for v in vertices)
    if not isinstance(data["edges"], list):
        raise IngestionError("edges must be a list")
    edges = []
    for i, rec in enumerate(data["edges"]):
        if not isinstance(rec, dict):
            raise IngestionError(f"edge {i} must be a mapping")
        unknown = set(rec) - _EDGE_FIELDS
        if unknown:
            raise IngestionError(f"edge {i}: unknown fields {sorted(unknown)}")
        missing = _EDGE_FIELDS - set(rec)
        if missing:
            raise IngestionError(f"edge {i}: missing fields {sorted(missing)}")
        length = rec["length"]
        if isinstance(length, bool) or not isinstance(length, (int, float, str)):
            raise IngestionError(f"edge {i}: length must be a number")
        try:
            length = float(length)
        except ValueError:
            raise IngestionError(f"edge {i}: cannot parse length {rec['length']!r}") from None
        weight = rec["weight"]
        if not isinstance(weight, list) or not all(
            isinstance(w, int) and not isinstance(w, bool) for w in weight
        ):
            raise IngestionError(f"edge {i}: weight must be a list of integers")
        if len(weight) != k:
            raise IngestionError(f"edge {i}: weight has {len(weight)} entries, expected {k}")
        edges.append(Edge(str(rec["from"]), str(rec["to"]), length, HomologyClass(tuple(weight))))
    return MarkovFlowModel(k=k, vertices=vertices, edges=tuple(edges))


def model_to_dict(model: MarkovFlowModel) -> dict:
    return {
        "k": model.k,
        "vertices": list(model.vertices),
        "edges": [
            {"from": e.source, "to": e.target, "length": e.length, "weight": list(e.weight.coords)}
            for e in model.edges
        ],
    }


def load_model(path) -> MarkovFlowModel:
    """Read a model from a JSON or YAML file (chosen by extension)."""
    path = Path(path)
    text = path.read_text()
    try:
        if path.suffix.lower() in (".yaml", ".yml"):
            data = yaml.safe_load(text)
        else:
            data = json.loads(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise IngestionError(f"{path}: {exc}") from None
    return model_from_dict(data)


def dump_model(model: MarkovFlowModel, path):
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n")


def model_hash(model: MarkovFlowModel) -> str:
    # repr() of a float round-trips, so the hash is exact in the lengths
    canon = json.dumps(model_to_dict(model), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# reference models
# ---------------------------------------------------------------------------

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


def golden_model() -> MarkovFlowModel:
    """One vertex, loops a (length 1, weight +1) and b (length golden ratio, weight -1)."""
    return MarkovFlowModel(
        k=1,
        vertices=("v",),
        edges=(
            Edge("v", "v", 1.0, HomologyClass((1,))),
            Edge("v", "v", GOLDEN, HomologyClass((-1,))),
        ),
    )


def symmetric_model() -> MarkovFlowModel:
    """One vertex, two unit-length loops with weights +1 and -1."""
    return full_shift_model()


def full_shift_model() -> MarkovFlowModel:
    return MarkovFlowModel(
        k=1,
        vertices=("v",),
        edges=(
            Edge("v", "v", 1.0, HomologyClass((1,))),
            Edge("v", "v", 1.0, HomologyClass((-1,))),
        ),
    )

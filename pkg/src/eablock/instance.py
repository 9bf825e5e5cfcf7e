"""Sparse random graphs with Gaussian couplings, plus the on-disk instance format."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .streams import generator


class InstanceFormatError(ValueError):
    """A line of an instance file could not be parsed."""


class InstanceStructureError(ValueError):
    """The file parsed but describes an inconsistent graph."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph on vertices ``0..n-1``.

    ``edges[e] = (u, v)`` with ``u < v``; the row index is the stable edge id.
    Adjacency is stored as CSR with each vertex's neighbours sorted by id.
    """

    n: int
    edges: np.ndarray
    indptr: np.ndarray = field(repr=False)
    nbrs: np.ndarray = field(repr=False)
    eids: np.ndarray = field(repr=False)

    @classmethod
    def from_edges(cls, n: int, edges) -> "Graph":
        if n < 1:
            raise ValueError(f"graph needs at least one vertex, got n={n}")
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size:
            if e.min() < 0 or e.max() >= n:
                raise InstanceStructureError("edge endpoint out of range")
            if np.any(e[:, 0] == e[:, 1]):
                raise InstanceStructureError("self-loop")
            e = np.sort(e, axis=1)
            keys = e[:, 0] * n + e[:, 1]
            if np.unique(keys).size != keys.size:
                raise InstanceStructureError("duplicate edge")
        m = e.shape[0]
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
        ids = np.concatenate([np.arange(m), np.arange(m)])
        order = np.lexsort((dst, src))
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        return cls(
            n=int(n),
            edges=_readonly(np.ascontiguousarray(e)),
            indptr=_readonly(indptr),
            nbrs=_readonly(np.ascontiguousarray(dst[order])),
            eids=_readonly(np.ascontiguousarray(ids[order])),
        )

    @property
    def m(self) -> int:
        return int(self.edges.shape[0])

    def neighbors(self, v: int) -> np.ndarray:
        return self.nbrs[self.indptr[v] : self.indptr[v + 1]]

    def incident_edges(self, v: int) -> np.ndarray:
        return self.eids[self.indptr[v] : self.indptr[v + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def adjacency(self) -> list[list[tuple[int, int]]]:
        """Per-vertex list of ``(neighbour, edge id)`` pairs."""
        return [list(zip(self.neighbors(v).tolist(), self.incident_edges(v).tolist())) for v in range(self.n)]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)

    def __hash__(self) -> int:
        return hash((self.n, self.edges.tobytes()))


@dataclass(frozen=True, eq=False)
class Instance:
    graph: Graph
    couplings: np.ndarray
    beta: float

    def __post_init__(self):
        J = np.ascontiguousarray(np.asarray(self.couplings, dtype=np.float64))
        if J.shape != (self.graph.m,):
            raise InstanceStructureError(f"{J.shape[0] if J.ndim else 0} couplings for {self.graph.m} edges")
        if not np.all(np.isfinite(J)):
            raise ValueError("couplings must be finite")
        if not (math.isfinite(self.beta) and self.beta >= 0):
            raise ValueError(f"beta must be finite and non-negative, got {self.beta}")
        object.__setattr__(self, "couplings", _readonly(J))
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def n(self) -> int:
        return self.graph.n

    def coupling_csr(self) -> np.ndarray:
        """Couplings aligned with ``graph.nbrs``."""
        return self.couplings[self.graph.eids]

    def with_beta(self, beta: float) -> "Instance":
        return Instance(self.graph, self.couplings, beta)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.graph == other.graph
            and self.beta == other.beta
            and np.array_equal(self.couplings, other.couplings)
        )

    def __hash__(self) -> int:
        return hash((self.graph, self.beta, self.couplings.tobytes()))


def beta_critical(d: float) -> float:
    return math.sqrt(2 * math.pi) / d


def _pair_from_index(k: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    # Row u holds pairs (u, u+1..n-1); row_start[u] = u*(2n-u-1)/2.
    rows = np.arange(n, dtype=np.int64)
    row_start = rows * (2 * n - rows - 1) // 2
    u = np.searchsorted(row_start, k, side="right") - 1
    v = k - row_start[u] + u + 1
    return u, v


def gen_graph(n: int, d: float, seed: int) -> Graph:
    """Erdős–Rényi graph with edge probability ``min(1, d/n)``.

    Pairs are visited in lexicographic order and skipped with geometric gaps,
    which has the same law as independent coin flips per pair.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if not d > 0:
        raise ValueError(f"d must be positive, got {d}")
    p = min(1.0, d / n)
    total = n * (n - 1) // 2
    rng = generator(seed, "graph")
    chunks = []
    pos = -1
    chunk = max(1024, int(1.2 * p * total) + 64)
    while True:
        gaps = rng.geometric(p, size=chunk)
        idx = pos + np.cumsum(gaps)
        inside = idx[idx < total]
        chunks.append(inside)
        if inside.size < idx.size:
            break
        pos = int(idx[-1])
    k = np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int64)
    u, v = _pair_from_index(k.astype(np.int64), n)
    return Graph.from_edges(n, np.stack([u, v], axis=1))


def gen_couplings(graph: Graph, seed: int) -> np.ndarray:
    """One standard normal per edge, indexed by edge id."""
    return generator(seed, "couplings").standard_normal(graph.m)


def gen_instance(n: int, d: float, beta: float, seed: int, coupling_seed: int | None = None) -> Instance:
    graph = gen_graph(n, d, seed)
    J = gen_couplings(graph, seed if coupling_seed is None else coupling_seed)
    return Instance(graph, J, beta)


@dataclass
class CouplingReport:
    passed: bool
    lower: float
    upper: float
    violations: list[tuple[int, float, str]]


def validate_couplings(instance: Instance) -> CouplingReport:
    """Check ``n^(-7/3) <= |J_e| <= 10 sqrt(ln n)`` on every edge."""
    n = instance.n
    lower = n ** (-7.0 / 3.0)
    upper = 10.0 * math.sqrt(math.log(n))
    a = np.abs(instance.couplings)
    violations = []
    for e in np.flatnonzero(a < lower):
        violations.append((int(e), float(instance.couplings[e]), "below lower bound"))
    for e in np.flatnonzero(a > upper):
        violations.append((int(e), float(instance.couplings[e]), "above upper bound"))
    violations.sort()
    return CouplingReport(not violations, lower, upper, violations)


FORMAT_TAG = "# ea-instance 1"


def _parse_real(token: str) -> float:
    t = token.lower()
    if "0x" in t or t.lstrip("+-") in ("inf", "nan", "infinity"):
        return float.fromhex(token)
    return float(token)


def save_instance(instance: Instance, path, manifest: str | None = None) -> Path:
    path = Path(path)
    lines = [FORMAT_TAG, f"# edges {instance.graph.m}"]
    if manifest:
        lines.append(f"# manifest {manifest}")
    lines.append(f"{instance.n} {float(instance.beta).hex()}")
    for (u, v), J in zip(instance.graph.edges.tolist(), instance.couplings.tolist()):
        lines.append(f"{u} {v} {float(J).hex()}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def load_instance(path) -> Instance:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    declared_m = None
    header = None
    edges: list[tuple[int, int]] = []
    J: list[float] = []
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "edges":
                try:
                    declared_m = int(parts[1])
                except ValueError:
                    raise InstanceFormatError(f"{path}:{lineno}: bad edge count {parts[1]!r}") from None
            continue
        fields = line.split()
        if header is None:
            if len(fields) != 2:
                raise InstanceFormatError(f"{path}:{lineno}: header must be 'n beta', got {line!r}")
            try:
                n = int(fields[0])
            except ValueError:
                raise InstanceFormatError(f"{path}:{lineno}: field n: not an integer: {fields[0]!r}") from None
            try:
                beta = _parse_real(fields[1])
            except ValueError:
                raise InstanceFormatError(f"{path}:{lineno}: field beta: not a number: {fields[1]!r}") from None
            header = (n, beta)
            continue
        if len(fields) == 2:
            raise InstanceStructureError(f"{path}:{lineno}: edge {fields[0]} {fields[1]} has no coupling")
        if len(fields) != 3:
            raise InstanceFormatError(f"{path}:{lineno}: expected 'u v J', got {len(fields)} fields")
        try:
            u, v = int(fields[0]), int(fields[1])
        except ValueError:
            raise InstanceFormatError(f"{path}:{lineno}: field u/v: not an integer") from None
        try:
            J.append(_parse_real(fields[2]))
        except ValueError:
            raise InstanceFormatError(f"{path}:{lineno}: field J: not a number: {fields[2]!r}") from None
        edges.append((u, v))
    if header is None:
        raise InstanceFormatError(f"{path}: missing header line")
    if declared_m is not None and declared_m != len(edges):
        raise InstanceStructureError(f"{path}: declares {declared_m} edges but lists {len(edges)}")
    n, beta = header
    try:
        graph = Graph.from_edges(n, edges)
    except InstanceStructureError as exc:
        raise InstanceStructureError(f"{path}: {exc}") from None
    return Instance(graph, np.asarray(J, dtype=np.float64), beta)

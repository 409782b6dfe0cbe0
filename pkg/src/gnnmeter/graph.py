"""Graph construction, normalization, partitioning, and neighborhood sampling.

Undirected inputs are stored with both directions in CSR; ``m`` counts
undirected edges while ``col_indices`` holds 2m entries.  All containers are
immutable after construction and safe for concurrent reads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyTargets,
    InvalidPartCount,
    InvalidVertex,
    SelfLoopInput,
    ZeroDegree,
)
from .rng import sample_without_replacement

NORMALIZATIONS = ("raw", "self_loop", "sym_norm", "rw_norm")
PARTITION_STRATEGIES = ("hash", "range", "greedy_balance")


@dataclass(frozen=True)
class Graph:
    """Symmetric CSR adjacency.

    Within each row the column indices are strictly increasing (no
    multi-edges) and ``degrees[i] == row_offsets[i+1] - row_offsets[i]``.
    """

    n: int
    m: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    degrees: np.ndarray

    def neighbors(self, i: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[i]:self.row_offsets[i + 1]]

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max()) if self.n else 0

    def validate(self) -> None:
        assert self.row_offsets[0] == 0 and self.row_offsets[-1] == len(self.col_indices)
        assert np.all(np.diff(self.row_offsets) >= 0)
        if len(self.col_indices):
            assert self.col_indices.min() >= 0 and self.col_indices.max() < self.n
        assert np.array_equal(self.degrees, np.diff(self.row_offsets))
        for i in range(self.n):
            row = self.neighbors(i)
            assert np.all(np.diff(row) > 0), f"row {i} not strictly increasing"


def build_csr(edge_list, n: int) -> Graph:
    """Build the symmetric CSR graph from (u, v) pairs.

    Duplicate edges (including reversed duplicates) collapse silently;
    self-loops are rejected because the normalization modes own the diagonal.
    """
    pairs = set()
    for u, v in edge_list:
        u, v = int(u), int(v)
        if u == v:
            raise SelfLoopInput(f"self-loop at vertex {u}")
        if not (0 <= u < n) or not (0 <= v < n):
            raise InvalidVertex(f"edge ({u}, {v}) outside [0, {n})")
        pairs.add((u, v) if u < v else (v, u))

    adjacency: list[list[int]] = [[] for _ in range(n)]
    for u, v in pairs:
        adjacency[u].append(v)
        adjacency[v].append(u)

    row_offsets = np.zeros(n + 1, dtype=np.int64)
    cols: list[int] = []
    for i in range(n):
        adjacency[i].sort()
        cols.extend(adjacency[i])
        row_offsets[i + 1] = len(cols)
    col_indices = np.asarray(cols, dtype=np.int64)
    degrees = np.diff(row_offsets)
    return Graph(n=n, m=len(pairs), row_offsets=row_offsets,
                 col_indices=col_indices, degrees=degrees)


@dataclass(frozen=True)
class SparseOperator:
    """CSR matrix derived from a graph: raw A, self-loop A~, sym-norm A^, or rw-norm A-.

    ``sym_norm`` stores 1/sqrt(d~_i d~_j) on the self-loop structure;
    ``rw_norm`` stores 1/d_i on the raw structure.
    """

    kind: str
    n: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    @property
    def nnz(self) -> int:
        return len(self.col_indices)

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.row_offsets[i], self.row_offsets[i + 1]
        return self.col_indices[lo:hi], self.values[lo:hi]

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        for i in range(self.n):
            cols, vals = self.row(i)
            out[i, cols] = vals
        return out


def _with_diagonal(g: Graph) -> tuple[np.ndarray, np.ndarray]:
    """Structure of A + I with rows kept sorted."""
    row_offsets = np.zeros(g.n + 1, dtype=np.int64)
    cols: list[int] = []
    for i in range(g.n):
        row = list(g.neighbors(i))
        pos = np.searchsorted(g.neighbors(i), i)
        row.insert(int(pos), i)
        cols.extend(row)
        row_offsets[i + 1] = len(cols)
    return row_offsets, np.asarray(cols, dtype=np.int64)


def normalize(g: Graph, kind: str) -> SparseOperator:
    """Derive one of the four adjacency variants used by the models."""
    if kind not in NORMALIZATIONS:
        raise ValueError(f"unknown normalization {kind!r}")

    if kind in ("raw", "rw_norm"):
        offsets, cols = g.row_offsets.copy(), g.col_indices.copy()
        if kind == "raw":
            values = np.ones(len(cols))
        else:
            if np.any(g.degrees == 0):
                isolated = int(np.flatnonzero(g.degrees == 0)[0])
                raise ZeroDegree(f"rw_norm undefined for isolated vertex {isolated}")
            values = np.repeat(1.0 / g.degrees, g.degrees)
        return SparseOperator(kind, g.n, offsets, cols, values)

    offsets, cols = _with_diagonal(g)
    if kind == "self_loop":
        values = np.ones(len(cols))
    else:
        inv_sqrt = 1.0 / np.sqrt(g.degrees + 1.0)
        rows = np.repeat(np.arange(g.n), np.diff(offsets))
        values = inv_sqrt[rows] * inv_sqrt[cols]
    return SparseOperator(kind, g.n, offsets, cols, values)


@dataclass(frozen=True)
class Partitioning:
    """Assignment of every vertex to exactly one of P parts."""

    num_parts: int
    owner: np.ndarray
    part_sizes: np.ndarray

    def members(self, p: int) -> np.ndarray:
        return np.flatnonzero(self.owner == p)


def partition(g: Graph, num_parts: int, strategy: str = "hash") -> Partitioning:
    """Split vertices into P parts with the requested 1D strategy.

    ``greedy_balance`` assigns vertices in descending degree order to the
    part with the smallest assigned-degree sum (ties favor the lowest id).
    """
    if not 1 <= num_parts <= g.n:
        raise InvalidPartCount(f"P={num_parts} invalid for n={g.n}")
    if strategy not in PARTITION_STRATEGIES:
        raise ValueError(f"unknown partition strategy {strategy!r}")

    if strategy == "hash":
        owner = np.arange(g.n, dtype=np.int64) % num_parts
    elif strategy == "range":
        block = math.ceil(g.n / num_parts)
        owner = np.arange(g.n, dtype=np.int64) // block
    else:
        owner = np.zeros(g.n, dtype=np.int64)
        load = [0] * num_parts
        order = sorted(range(g.n), key=lambda i: (-int(g.degrees[i]), i))
        for i in order:
            p = min(range(num_parts), key=lambda q: (load[q], q))
            owner[i] = p
            load[p] += int(g.degrees[i])

    sizes = np.bincount(owner, minlength=num_parts).astype(np.int64)
    return Partitioning(num_parts=num_parts, owner=owner, part_sizes=sizes)


def neighbor_split(part: Partitioning, g: Graph, i: int) -> tuple[list[int], list[int]]:
    """Split N(i) into same-partition and remote neighbors."""
    if not 0 <= i < g.n:
        raise InvalidVertex(f"vertex {i} outside [0, {g.n})")
    me = part.owner[i]
    local, remote = [], []
    for j in g.neighbors(i):
        (local if part.owner[j] == me else remote).append(int(j))
    return local, remote


def directed_cut_edges(part: Partitioning, g: Graph) -> int:
    """Number of stored (directed) edges whose endpoints differ in owner."""
    count = 0
    for i in range(g.n):
        count += int(np.sum(part.owner[g.neighbors(i)] != part.owner[i]))
    return count


@dataclass(frozen=True)
class SampledSubgraph:
    """Fixed-fanout multi-hop sample rooted at the target vertices.

    ``layers[h]`` maps each vertex expanded at hop h+1 to its sampled
    neighbors.  ``reach`` holds the distinct vertices reachable from each
    target through the sampled edges (the target itself included), which is
    what the geometric size bound sum(c^l) constrains.
    """

    targets: tuple[int, ...]
    layers: tuple[dict[int, tuple[int, ...]], ...]
    fanout: int
    depth: int
    seed: int
    reach: dict[int, frozenset[int]] = field(default_factory=dict)

    def nodes(self) -> frozenset[int]:
        out = set(self.targets)
        for layer in self.layers:
            for v, sampled in layer.items():
                out.add(v)
                out.update(sampled)
        return frozenset(out)


def sample_neighborhood(g: Graph, targets, fanout: int, depth: int, seed: int) -> SampledSubgraph:
    """Sample min(c, d) neighbors per expanded vertex per hop.

    Draws are keyed by (seed, vertex, hop), so a vertex expanded for two
    different targets at the same hop receives the same sample and the merged
    layers stay consistent.
    """
    targets = tuple(int(t) for t in targets)
    if not targets:
        raise EmptyTargets("no target vertices given")
    for t in targets:
        if not 0 <= t < g.n:
            raise InvalidVertex(f"target {t} outside [0, {g.n})")
    if fanout < 1 or depth < 1:
        raise ValueError("fanout and depth must be >= 1")

    layers: list[dict[int, tuple[int, ...]]] = [{} for _ in range(depth)]
    reach: dict[int, frozenset[int]] = {}
    for t in targets:
        seen = {t}
        frontier = [t]
        for hop in range(1, depth + 1):
            nxt: set[int] = set()
            for v in sorted(frontier):
                if v not in layers[hop - 1]:
                    picked = sample_without_replacement(
                        [int(j) for j in g.neighbors(v)], fanout, seed, v, hop)
                    layers[hop - 1][v] = tuple(picked)
                nxt.update(layers[hop - 1][v])
            seen.update(nxt)
            frontier = list(nxt)
        reach[t] = frozenset(seen)

    return SampledSubgraph(targets=targets,
                           layers=tuple(layers),
                           fanout=fanout, depth=depth, seed=seed, reach=reach)

"""Synthetic graph generators, dataset builders, and file formats.

Edge-list files carry one ``u v`` pair per line (0-based decimal ids,
whitespace separated, ``#`` comments ignored); label files carry one
``vertex class`` pair per line.  All generators draw from the counter-based
stream, so a (generator, seed) pair is reproducible everywhere.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ConfigError
from .graph import Graph, build_csr
from .rng import rand_uniform
from .train import Labels


def path_graph(n: int) -> Graph:
    return build_csr([(i, i + 1) for i in range(n - 1)], n)


def cycle_graph(n: int) -> Graph:
    return build_csr([(i, (i + 1) % n) for i in range(n)], n)


def star_graph(n: int) -> Graph:
    return build_csr([(0, i) for i in range(1, n)], n)


def complete_graph(n: int) -> Graph:
    return build_csr([(i, j) for i in range(n) for j in range(i + 1, n)], n)


def erdos_renyi(n: int, expected_degree: float, seed: int = 0) -> Graph:
    """G(n, p) with p = expected_degree / (n - 1), one keyed draw per pair."""
    if n < 2:
        return build_csr([], n)
    p = min(1.0, expected_degree / (n - 1))
    edges = [(u, v) for u in range(n) for v in range(u + 1, n)
             if rand_uniform(seed, 0xE5, u, v) < p]
    return build_csr(edges, n)


def sbm_graph(n: int, communities: int, p_in: float, p_out: float,
              seed: int = 0) -> tuple[Graph, np.ndarray]:
    """Stochastic block model with contiguous equal blocks.

    Returns the graph and the community assignment.
    """
    if not (0 <= p_in <= 1 and 0 <= p_out <= 1):
        raise ConfigError("probabilities must lie in [0, 1]")
    block = -(-n // communities)
    comm = np.arange(n) // block
    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            p = p_in if comm[u] == comm[v] else p_out
            if rand_uniform(seed, 0x5B, u, v) < p:
                edges.append((u, v))
    return build_csr(edges, n), comm


def sbm_features(comm: np.ndarray, k: int, seed: int = 0,
                 shift: float = 1.0) -> np.ndarray:
    """Random features plus a signed per-community mean shift.

    Community c is shifted +s on dimension 2c and -s on 2c+1 (mod k), which
    keeps the columns roughly centered and the classes linearly separable.
    """
    n = len(comm)
    X = np.array([[rand_uniform(seed, 0xFE, i, j) - 0.5 for j in range(k)]
                  for i in range(n)])
    for i in range(n):
        c = int(comm[i])
        X[i, (2 * c) % k] += shift
        X[i, (2 * c + 1) % k] -= shift
    return X


def sbm_task(n: int = 60, communities: int = 2, p_in: float = 0.5,
             p_out: float = 0.02, k: int = 8, seed: int = 0):
    """The desk-scale community classification task used for training checks."""
    g, comm = sbm_graph(n, communities, p_in, p_out, seed)
    X = sbm_features(comm, k, seed)
    labels = Labels(labeled=tuple(range(n)),
                    classes=tuple(int(c) for c in comm),
                    num_classes=communities)
    return g, X, labels


GENERATORS = ("er", "sbm", "star", "path", "cycle", "complete")


def from_generator_string(text: str, seed: int = 0):
    """Parse colon syntax like ``er:64:8`` or ``sbm:60:2:0.5:0.02``.

    Returns (graph, community array or None).
    """
    parts = text.split(":")
    name, args = parts[0], parts[1:]
    try:
        if args and int(args[0]) < 1:
            raise ConfigError(f"generator size must be positive, got {args[0]}")
        if name == "er":
            n, deg = int(args[0]), float(args[1]) if len(args) > 1 else 8.0
            return erdos_renyi(n, deg, seed), None
        if name == "sbm":
            n = int(args[0])
            comms = int(args[1]) if len(args) > 1 else 2
            p_in = float(args[2]) if len(args) > 2 else 0.5
            p_out = float(args[3]) if len(args) > 3 else 0.02
            g, comm = sbm_graph(n, comms, p_in, p_out, seed)
            return g, comm
        if name == "star":
            return star_graph(int(args[0])), None
        if name == "path":
            return path_graph(int(args[0])), None
        if name == "cycle":
            return cycle_graph(int(args[0])), None
        if name == "complete":
            return complete_graph(int(args[0])), None
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"bad generator spec {text!r}: {exc}") from exc
    raise ConfigError(f"unknown generator {name!r} (choose from {GENERATORS})")


def write_edge_list(g: Graph, path) -> None:
    lines = [f"# n={g.n} m={g.m}"]
    for u in range(g.n):
        for v in g.neighbors(u):
            if u < v:
                lines.append(f"{u} {int(v)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_edge_list(path) -> Graph:
    edges = []
    max_vertex = -1
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        u, v = (int(tok) for tok in line.split()[:2])
        edges.append((u, v))
        max_vertex = max(max_vertex, u, v)
    return build_csr(edges, max_vertex + 1)


def write_labels(labels: Labels, path) -> None:
    lines = [f"{v} {c}" for v, c in zip(labels.labeled, labels.classes)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_labels(path, num_classes: int | None = None) -> Labels:
    pairs = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        v, c = (int(tok) for tok in line.split()[:2])
        pairs.append((v, c))
    classes = [c for _, c in pairs]
    count = num_classes if num_classes is not None else (max(classes) + 1 if classes else 0)
    return Labels(labeled=tuple(v for v, _ in pairs),
                  classes=tuple(classes), num_classes=count)


def random_features(n: int, k: int, seed: int = 0) -> np.ndarray:
    return np.array([[rand_uniform(seed, 0xF0, i, j) - 0.5 for j in range(k)]
                     for i in range(n)])

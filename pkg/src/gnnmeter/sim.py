"""Deterministic simulation of partition-parallel execution.

Workers (one per partition) advance in virtual time.  The synchronous mode
is bulk-synchronous: four kernel phases per layer, each ending in a global
barrier.  The asynchronous mode lets a worker compute (iteration t, layer l)
as soon as, for every input, some version inside its staleness window has
arrived; the value actually used is the newest arrived version inside the
window, so staleness is numerically visible.  The simulator itself is
single-threaded, and identical inputs always produce identical traces.

Within every per-vertex reduction, contributions are consumed in ascending
vertex order regardless of the local/remote split, so a zero-staleness run
is bit-identical to the plain forward pass.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import InvalidStaleness, NoLocalFormulation, SimulationDeadlock
from .graph import Graph, Partitioning, normalize
from .lc import layer_compute, layer_tally, conv_members
from .models import ModelSpec, activation_grad, apply_activation
from .train import Labels, TrainResult, accuracy, softmax_xent


@dataclass(frozen=True)
class StalenessConfig:
    """The six forward bounds of the stale execution equation plus the
    local/remote gradient bounds of its backward counterpart.

    (T_* = 0, L_* = 1) is the synchronous identity.
    """

    T_phi: int = 0
    T_psi_local: int = 0
    T_psi_remote: int = 0
    L_phi: int = 1
    L_psi_local: int = 1
    L_psi_remote: int = 1
    T_grad_local: int = 0
    T_grad_remote: int = 0
    L_grad_local: int = 1
    L_grad_remote: int = 1

    def validate(self) -> None:
        for name in ("T_phi", "T_psi_local", "T_psi_remote",
                     "T_grad_local", "T_grad_remote"):
            if getattr(self, name) < 0:
                raise InvalidStaleness(f"{name} must be >= 0")
        for name in ("L_phi", "L_psi_local", "L_psi_remote",
                     "L_grad_local", "L_grad_remote"):
            if getattr(self, name) < 1:
                raise InvalidStaleness(f"{name} must be >= 1")

    @property
    def is_sync(self) -> bool:
        return (self.T_phi == self.T_psi_local == self.T_psi_remote == 0
                and self.L_phi == self.L_psi_local == self.L_psi_remote == 1)

    @property
    def max_iteration_window(self) -> int:
        return max(self.T_phi, self.T_psi_local, self.T_psi_remote,
                   self.T_grad_local, self.T_grad_remote)


SYNC = StalenessConfig()


@dataclass(frozen=True)
class CostParams:
    """Virtual-time costs: one multiply-add, one communicated word, one
    global barrier."""

    cost_madd: float = 1.0
    cost_word: float = 1.0
    cost_barrier: float = 1.0

    def validate(self) -> None:
        if min(self.cost_madd, self.cost_word, self.cost_barrier) < 0:
            raise InvalidStaleness("costs must be non-negative")


@dataclass
class ReadRecord:
    kind: str          # self | local | remote
    from_part: int
    version_t: int
    version_l: int
    for_t: int
    for_l: int


@dataclass
class TraceEvent:
    worker: int
    kernel: str
    part: int
    layer: int
    iteration: int
    start: float
    end: float
    madds: int = 0
    phase: str = "forward"
    reads: list = field(default_factory=list)

    def to_json(self) -> dict:
        d = {"worker": self.worker, "kernel": self.kernel, "part": self.part,
             "layer": self.layer, "iter": self.iteration,
             "start": self.start, "end": self.end, "madds": self.madds,
             "phase": self.phase,
             "reads": [asdict(r) for r in self.reads]}
        return d


@dataclass
class Trace:
    events: list
    num_workers: int
    barrier_count: int = 0
    comm_words: int = 0
    makespan: float = 0.0
    staleness: StalenessConfig | None = None

    def to_jsonl(self) -> str:
        return "\n".join(json.dumps(e.to_json(), sort_keys=True)
                         for e in self.events)

    def audit_staleness(self) -> list:
        """Reads violating their configured bound (expected empty).

        A forward read for (t, l) must satisfy 0 <= t - t' <= T and
        1 <= l - l' <= L; a backward read for level l must satisfy
        0 <= t - t' <= T and 1 <= l' - l <= L.
        """
        cfg = self.staleness or SYNC
        bounds = {
            "self": (cfg.T_phi, cfg.L_phi),
            "local": (cfg.T_psi_local, cfg.L_psi_local),
            "remote": (cfg.T_psi_remote, cfg.L_psi_remote),
            "grad_local": (cfg.T_grad_local, cfg.L_grad_local),
            "grad_remote": (cfg.T_grad_remote, cfg.L_grad_remote),
        }
        violations = []
        for e in self.events:
            for r in e.reads:
                bt, bl = bounds[r.kind]
                t_gap = r.for_t - r.version_t
                if r.kind.startswith("grad"):
                    l_gap = r.version_l - r.for_l
                else:
                    l_gap = r.for_l - r.version_l
                if not (0 <= t_gap <= bt and 1 <= l_gap <= bl):
                    violations.append(r)
        return violations


class VersionedBuffer:
    """Per-partition store of (iteration, layer)-stamped feature blocks.

    Capacity covers the maximum staleness window plus one; older iterations
    are pruned as the owning iteration advances.
    """

    def __init__(self, window: int):
        self.window = window
        self._store: dict[tuple[int, int], tuple[np.ndarray, float]] = {}

    def put(self, t: int, l: int, value: np.ndarray, when: float) -> None:
        self._store[(t, l)] = (value, when)

    def get(self, t: int, l: int) -> tuple[np.ndarray, float]:
        return self._store[(t, l)]

    def has(self, t: int, l: int) -> bool:
        return (t, l) in self._store

    def prune(self, current_t: int) -> None:
        cutoff = current_t - self.window
        for key in [k for k in self._store if k[0] < cutoff and k[1] != 0]:
            del self._store[key]

    def __len__(self) -> int:
        return len(self._store)


class _PartitionData:
    """Static per-partition structure shared by both simulation modes."""

    def __init__(self, g: Graph, part: Partitioning):
        self.g = g
        self.part = part
        P = part.num_parts
        self.members = [part.members(p) for p in range(P)]
        # Directed cut edges out of p, and in-producers per consumer.
        self.out_cut = [0] * P
        self.in_producers: list = [set() for _ in range(P)]
        for i in range(g.n):
            pi = int(part.owner[i])
            for j in g.neighbors(i):
                pj = int(part.owner[j])
                if pi != pj:
                    self.out_cut[pi] += 1
                    self.in_producers[pj].add(pi)
        self.in_producers = [sorted(s) for s in self.in_producers]


def _newest_within(buffers, arrivals, producer: int, consumer: int, t: int,
                   l: int, bound_t: int, bound_l: int, at_time: float):
    """Newest (t', l') with t-t' <= bound_t, l-l' <= bound_l, l' <= l-1,
    arrived at the consumer by ``at_time`` (lexicographic freshness)."""
    for t_prime in range(t, max(-1, t - bound_t - 1), -1):
        for l_prime in range(l - 1, max(-1, l - bound_l - 1), -1):
            if t_prime < 0 or l_prime < 0:
                continue
            key = (t_prime, l_prime)
            if not buffers[producer].has(*key):
                continue
            when = arrivals.get((producer, t_prime, l_prime, consumer))
            if when is None:
                _, when = buffers[producer].get(*key)
            if when <= at_time + 1e-12:
                return t_prime, l_prime
    return None


def _earliest_ready(buffers, arrivals, producer, consumer, t, l,
                    bound_t, bound_l):
    """Earliest time at which any window version will have arrived."""
    best = None
    for t_prime in range(t, max(-1, t - bound_t - 1), -1):
        for l_prime in range(l - 1, max(-1, l - bound_l - 1), -1):
            if t_prime < 0 or l_prime < 0:
                continue
            if not buffers[producer].has(t_prime, l_prime):
                continue
            when = arrivals.get((producer, t_prime, l_prime, consumer))
            if when is None:
                _, when = buffers[producer].get(t_prime, l_prime)
            best = when if best is None else min(best, when)
    return best


def run_sync(g: Graph, part: Partitioning, X: np.ndarray, spec: ModelSpec,
             costs: CostParams = CostParams(), iterations: int = 1):
    """Bulk-synchronous partition-parallel forward: barrier after every
    kernel phase; numerically identical to the plain layer stack."""
    if "lc" not in spec.info.formulations:
        raise NoLocalFormulation(f"{spec.model_id} has no vertex/edge-wise form")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    costs.validate()
    X = np.asarray(X, dtype=float)
    pd = _PartitionData(g, part)
    P = part.num_parts
    events: list[TraceEvent] = []
    comm_words = 0
    barriers = 0
    clock = 0.0

    tallies = [[layer_tally(g, spec, l, [len(conv_members(g, spec, i))
                                         for i in pd.members[p]],
                            num_vertices=len(pd.members[p]))
                for p in range(P)] for l in range(spec.num_layers)]

    H = X
    for t in range(1, iterations + 1):
        H = X
        for l in range(1, spec.num_layers + 1):
            width_in = spec.widths[l - 1]
            reads_for = [
                [ReadRecord("self", p, t, l - 1, t, l),
                 ReadRecord("local", p, t, l - 1, t, l)]
                + [ReadRecord("remote", q, t, l - 1, t, l)
                   for q in pd.in_producers[p]]
                for p in range(P)
            ]
            durations = {
                "scatter": [costs.cost_word * pd.out_cut[p] * width_in
                            for p in range(P)],
                "update_edge": [costs.cost_madd * tallies[l - 1][p].work["update_edge"]
                                for p in range(P)],
                "aggregate": [costs.cost_madd * tallies[l - 1][p].work["aggregate"]
                              for p in range(P)],
                "update_vertex": [costs.cost_madd * tallies[l - 1][p].work["update_vertex"]
                                  for p in range(P)],
            }
            madds = {k: [tallies[l - 1][p].work[k] if k != "scatter" else 0
                         for p in range(P)] for k in durations}
            for kernel in ("scatter", "update_edge", "aggregate", "update_vertex"):
                for p in range(P):
                    ev = TraceEvent(worker=p, kernel=kernel, part=p, layer=l,
                                    iteration=t, start=clock,
                                    end=clock + durations[kernel][p],
                                    madds=madds[kernel][p])
                    if kernel == "update_edge":
                        ev.reads = reads_for[p]
                    events.append(ev)
                comm_words += sum(pd.out_cut) * width_in if kernel == "scatter" else 0
                clock = max(e.end for e in events[-P:]) + costs.cost_barrier
                barriers += 1

            out = np.empty((g.n, spec.widths[l]))
            for p in range(P):
                out[pd.members[p]] = layer_compute(g, spec, l - 1, H, H,
                                                   vertices=pd.members[p])
            H = out

    trace = Trace(events=events, num_workers=P, barrier_count=barriers,
                  comm_words=comm_words, makespan=clock, staleness=SYNC)
    return H, trace


def run_async(g: Graph, part: Partitioning, X: np.ndarray, spec: ModelSpec,
              stale: StalenessConfig, iterations: int = 1,
              costs: CostParams = CostParams()):
    """Greedy bounded-staleness execution of the stale forward equation.

    A worker computes (t, l) for its partition as soon as every required
    input has some version inside its window; reads resolve to the newest
    arrived version, and outputs are computed from exactly the vectors read.
    """
    if "lc" not in spec.info.formulations:
        raise NoLocalFormulation(f"{spec.model_id} has no vertex/edge-wise form")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    stale.validate()
    costs.validate()
    X = np.asarray(X, dtype=float)
    pd = _PartitionData(g, part)
    P = part.num_parts

    buffers = [VersionedBuffer(stale.max_iteration_window) for _ in range(P)]
    arrivals: dict = {}
    for p in range(P):
        buffers[p].put(0, 0, X[pd.members[p]], 0.0)
    worker_free = [0.0] * P
    events: list[TraceEvent] = []
    comm_words = 0

    for t in range(1, iterations + 1):
        for p in range(P):
            # Layer-0 state of iteration t is the immutable input.
            buffers[p].put(t, 0, X[pd.members[p]], worker_free[p])
        for l in range(1, spec.num_layers + 1):
            width_in = spec.widths[l - 1]

            # Pass 1: every worker pushes its (t, l-1) block to remote
            # consumers, so all arrival times for this round are known
            # before any reader resolves its window.
            scatter_end = [0.0] * P
            for p in range(P):
                sc_start = worker_free[p]
                sc_end = sc_start + costs.cost_word * pd.out_cut[p] * width_in
                comm_words += pd.out_cut[p] * width_in
                events.append(TraceEvent(p, "scatter", p, l, t, sc_start, sc_end))
                for q in range(P):
                    if q != p:
                        arrivals[(p, t, l - 1, q)] = sc_end
                scatter_end[p] = sc_end

            # Pass 2: compute as soon as every remote window is non-empty.
            for p in range(P):
                ready = scatter_end[p]
                blocked = []
                for q in pd.in_producers[p]:
                    when = _earliest_ready(buffers, arrivals, q, p, t, l,
                                           stale.T_psi_remote, stale.L_psi_remote)
                    if when is None:
                        blocked.append((p, t, l, q))
                    else:
                        ready = max(ready, when)
                if blocked:
                    raise SimulationDeadlock(
                        f"no readable version for task (part={p}, t={t}, l={l})",
                        blocked)

                reads = [ReadRecord("self", p, t, l - 1, t, l),
                         ReadRecord("local", p, t, l - 1, t, l)]
                neigh_view = np.zeros((g.n, width_in))
                block, _ = buffers[p].get(t, l - 1)
                neigh_view[pd.members[p]] = block
                for q in pd.in_producers[p]:
                    qt, ql = _newest_within(buffers, arrivals, q, p, t, l,
                                            stale.T_psi_remote,
                                            stale.L_psi_remote, ready)
                    reads.append(ReadRecord("remote", q, qt, ql, t, l))
                    qblock, _ = buffers[q].get(qt, ql)
                    neigh_view[pd.members[q]] = qblock

                tally = layer_tally(g, spec, l - 1,
                                    [len(conv_members(g, spec, i))
                                     for i in pd.members[p]],
                                    num_vertices=len(pd.members[p]))
                ue_end = ready + costs.cost_madd * tally.work["update_edge"]
                ag_end = ue_end + costs.cost_madd * tally.work["aggregate"]
                uv_end = ag_end + costs.cost_madd * tally.work["update_vertex"]
                events.append(TraceEvent(p, "update_edge", p, l, t, ready,
                                         ue_end, tally.work["update_edge"],
                                         reads=reads))
                events.append(TraceEvent(p, "aggregate", p, l, t, ue_end,
                                         ag_end, tally.work["aggregate"]))
                events.append(TraceEvent(p, "update_vertex", p, l, t, ag_end,
                                         uv_end, tally.work["update_vertex"]))

                out = layer_compute(g, spec, l - 1, neigh_view, neigh_view,
                                    vertices=pd.members[p])
                buffers[p].put(t, l, out, uv_end)
                worker_free[p] = uv_end
        for p in range(P):
            buffers[p].prune(t)

    H = np.empty((g.n, spec.widths[-1]))
    for p in range(P):
        block, _ = buffers[p].get(iterations, spec.num_layers)
        H[pd.members[p]] = block
    trace = Trace(events=events, num_workers=P, barrier_count=0,
                  comm_words=comm_words,
                  makespan=max((e.end for e in events), default=0.0),
                  staleness=stale)
    return H, trace


def pipeline_metrics(trace: Trace) -> dict:
    """Makespan, utilization, barrier count, words, per-kernel time share."""
    makespan = trace.makespan
    busy = sum(e.end - e.start for e in trace.events)
    per_kernel: dict[str, float] = {}
    for e in trace.events:
        per_kernel[e.kernel] = per_kernel.get(e.kernel, 0.0) + (e.end - e.start)
    share = {k: (v / busy if busy else 0.0) for k, v in sorted(per_kernel.items())}
    return {
        "makespan": makespan,
        "utilization": busy / (trace.num_workers * makespan) if makespan else 1.0,
        "barrier_count": trace.barrier_count,
        "comm_words": trace.comm_words,
        "kernel_time_share": share,
    }


def _grad_newest(buffers, arrivals, producer, consumer, t, l, bound_t,
                 bound_l, num_layers, at_time):
    """Backward counterpart: levels above l are 'older'; freshest is the
    newest iteration, then the lowest level >= l + 1."""
    for t_prime in range(t, max(0, t - bound_t) - 1, -1):
        if t_prime < 1:
            continue
        for l_prime in range(l + 1, min(num_layers, l + bound_l) + 1):
            if not buffers[producer].has(t_prime, l_prime):
                continue
            when = arrivals.get((producer, t_prime, l_prime, consumer))
            if when is None:
                _, when = buffers[producer].get(t_prime, l_prime)
            if when <= at_time + 1e-12:
                return t_prime, l_prime
    return None


def _grad_earliest(buffers, arrivals, producer, consumer, t, l, bound_t,
                   bound_l, num_layers):
    best = None
    for t_prime in range(t, max(0, t - bound_t) - 1, -1):
        if t_prime < 1:
            continue
        for l_prime in range(l + 1, min(num_layers, l + bound_l) + 1):
            if not buffers[producer].has(t_prime, l_prime):
                continue
            when = arrivals.get((producer, t_prime, l_prime, consumer))
            if when is None:
                _, when = buffers[producer].get(t_prime, l_prime)
            best = when if best is None else min(best, when)
    return best


def run_async_training(g: Graph, part: Partitioning, X: np.ndarray,
                       labels: Labels, spec: ModelSpec,
                       stale: StalenessConfig, epochs: int, lr: float,
                       costs: CostParams = CostParams()):
    """Partition-parallel GCN training with bounded-stale features and
    gradients; weight updates stay globally synchronous.

    The zero-staleness configuration reproduces the full-batch trainer's
    loss curve exactly: per-partition rows are sliced from full-shape matrix
    products, so no reassociation is introduced.
    """
    if spec.model_id != "gcn":
        raise ValueError("asynchronous training is defined for gcn only")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    stale.validate()
    costs.validate()
    X = np.asarray(X, dtype=float)
    pd = _PartitionData(g, part)
    P = part.num_parts
    A = normalize(g, "sym_norm")
    L = spec.num_layers
    row_ops = [_csr_rows(A, pd.members[p]) for p in range(P)]

    feat_buffers = [VersionedBuffer(stale.max_iteration_window) for _ in range(P)]
    grad_buffers = [VersionedBuffer(stale.max_iteration_window) for _ in range(P)]
    feat_arrivals: dict = {}
    grad_arrivals: dict = {}
    for p in range(P):
        feat_buffers[p].put(0, 0, X[pd.members[p]], 0.0)
    worker_free = [0.0] * P
    events: list[TraceEvent] = []
    comm_words = 0
    barriers = 0
    curve = []

    for t in range(1, epochs + 1):
        cache_Z: list[list] = [[None] * P for _ in range(L)]
        cache_P: list[list] = [[None] * P for _ in range(L)]
        cache_dP: list[list] = [[None] * P for _ in range(L)]
        for p in range(P):
            feat_buffers[p].put(t, 0, X[pd.members[p]], worker_free[p])

        # Forward sweep (two passes per layer: sends first, then computes).
        for l in range(1, L + 1):
            width_in = spec.widths[l - 1]
            W = spec.layers[l - 1]["W"]
            scatter_end = [0.0] * P
            for p in range(P):
                sc_start = worker_free[p]
                sc_end = sc_start + costs.cost_word * pd.out_cut[p] * width_in
                comm_words += pd.out_cut[p] * width_in
                events.append(TraceEvent(p, "scatter", p, l, t, sc_start, sc_end))
                for q in range(P):
                    if q != p:
                        feat_arrivals[(p, t, l - 1, q)] = sc_end
                scatter_end[p] = sc_end

            for p in range(P):
                ready = scatter_end[p]
                for q in pd.in_producers[p]:
                    when = _earliest_ready(feat_buffers, feat_arrivals, q, p,
                                           t, l, stale.T_psi_remote,
                                           stale.L_psi_remote)
                    if when is None:
                        raise SimulationDeadlock(
                            f"no feature version for (part={p}, t={t}, l={l})",
                            [(p, t, l, q)])
                    ready = max(ready, when)

                reads = [ReadRecord("local", p, t, l - 1, t, l)]
                view = np.zeros((g.n, width_in))
                view[pd.members[p]] = feat_buffers[p].get(t, l - 1)[0]
                for q in pd.in_producers[p]:
                    qt, ql = _newest_within(feat_buffers, feat_arrivals, q, p,
                                            t, l, stale.T_psi_remote,
                                            stale.L_psi_remote, ready)
                    reads.append(ReadRecord("remote", q, qt, ql, t, l))
                    view[pd.members[q]] = feat_buffers[q].get(qt, ql)[0]

                Z = np.zeros((g.n, width_in))
                Z[pd.members[p]] = row_ops[p](view)
                Pm = Z @ W
                Hp = apply_activation(spec.activations[l - 1],
                                      Pm[pd.members[p]])
                cache_Z[l - 1][p] = Z[pd.members[p]]
                cache_P[l - 1][p] = Pm[pd.members[p]]

                n_p = len(pd.members[p])
                fan = int(np.sum(g.degrees[pd.members[p]] + 1))
                ue = fan * width_in
                ag = fan * width_in
                uv = n_p * width_in * spec.widths[l]
                ue_end = ready + costs.cost_madd * ue
                ag_end = ue_end + costs.cost_madd * ag
                uv_end = ag_end + costs.cost_madd * uv
                events.append(TraceEvent(p, "update_edge", p, l, t, ready,
                                         ue_end, ue, reads=reads))
                events.append(TraceEvent(p, "aggregate", p, l, t, ue_end,
                                         ag_end, ag))
                events.append(TraceEvent(p, "update_vertex", p, l, t, ag_end,
                                         uv_end, uv))
                feat_buffers[p].put(t, l, Hp, uv_end)
                worker_free[p] = uv_end

        # Loss and its gradient are row-local; assembled here for bookkeeping.
        H_final = np.empty((g.n, spec.widths[-1]))
        for p in range(P):
            H_final[pd.members[p]] = feat_buffers[p].get(t, L)[0]
        loss, dY = softmax_xent(H_final, labels)
        curve.append((t - 1, loss, accuracy(H_final, labels)))

        # Backward sweep.
        for l in range(L, 0, -1):
            W = spec.layers[l - 1]["W"]
            width_in = spec.widths[l - 1]
            for p in range(P):
                start = worker_free[p]
                reads = []
                if l == L:
                    dH = dY[pd.members[p]]
                    ag_madds = 0
                    ready = start
                else:
                    ready = start
                    for q in pd.in_producers[p]:
                        when = _grad_earliest(grad_buffers, grad_arrivals, q,
                                              p, t, l, stale.T_grad_remote,
                                              stale.L_grad_remote, L)
                        if when is None:
                            raise SimulationDeadlock(
                                f"no gradient version for (part={p}, t={t}, l={l})",
                                [(p, t, l, q)])
                        ready = max(ready, when)
                    u_view = np.zeros((g.n, spec.widths[l]))
                    qt, ql = _grad_newest(grad_buffers, grad_arrivals, p, p,
                                          t, l, stale.T_grad_local,
                                          stale.L_grad_local, L, np.inf)
                    reads.append(ReadRecord("grad_local", p, qt, ql, t, l))
                    u_view[pd.members[p]] = grad_buffers[p].get(qt, ql)[0]
                    for q in pd.in_producers[p]:
                        qt, ql = _grad_newest(grad_buffers, grad_arrivals, q,
                                              p, t, l, stale.T_grad_remote,
                                              stale.L_grad_remote, L, ready)
                        reads.append(ReadRecord("grad_remote", q, qt, ql, t, l))
                        u_view[pd.members[q]] = grad_buffers[q].get(qt, ql)[0]
                    dH = row_ops[p](u_view)
                    ag_madds = int(np.sum(g.degrees[pd.members[p]] + 1)) * spec.widths[l]

                dP_pad = np.zeros((g.n, spec.widths[l]))
                dP_pad[pd.members[p]] = dH * activation_grad(
                    spec.activations[l - 1], cache_P[l - 1][p])
                cache_dP[l - 1][p] = dP_pad[pd.members[p]]
                u_next = (dP_pad @ W.T)[pd.members[p]]

                n_p = len(pd.members[p])
                uv_madds = n_p * (spec.widths[l] + 2 * width_in * spec.widths[l])
                ag_end = ready + costs.cost_madd * ag_madds
                uv_end = ag_end + costs.cost_madd * uv_madds
                events.append(TraceEvent(p, "aggregate", p, l, t, ready,
                                         ag_end, ag_madds, phase="backward",
                                         reads=reads))
                events.append(TraceEvent(p, "update_vertex", p, l, t, ag_end,
                                         uv_end, uv_madds, phase="backward"))
                if l > 1:
                    sc_dur = costs.cost_word * pd.out_cut[p] * width_in
                    comm_words += pd.out_cut[p] * width_in
                    events.append(TraceEvent(p, "scatter", p, l, t, uv_end,
                                             uv_end + sc_dur, phase="backward"))
                    uv_end += sc_dur
                grad_buffers[p].put(t, l, u_next, uv_end)
                for q in range(P):
                    if q != p:
                        grad_arrivals[(p, t, l, q)] = uv_end
                worker_free[p] = uv_end

        # Synchronous weight update (one barrier per epoch).
        update_time = max(worker_free) + costs.cost_barrier
        barriers += 1
        for l in range(L, 0, -1):
            Z_full = np.empty((g.n, spec.widths[l - 1]))
            dP_full = np.empty((g.n, spec.widths[l]))
            for p in range(P):
                Z_full[pd.members[p]] = cache_Z[l - 1][p]
                dP_full[pd.members[p]] = cache_dP[l - 1][p]
            spec.layers[l - 1]["W"] -= lr * (Z_full.T @ dP_full)
        worker_free = [update_time] * P
        for p in range(P):
            feat_buffers[p].prune(t)
            grad_buffers[p].prune(t)

    trace = Trace(events=events, num_workers=P, barrier_count=barriers,
                  comm_words=comm_words,
                  makespan=max((e.end for e in events), default=0.0),
                  staleness=stale)
    return TrainResult(spec=spec, curve=curve), trace


def _csr_rows(A, rows):
    """Row-sliced CSR multiply with the same per-row accumulation as the
    full operator (bit-identical to slicing a full SpMM)."""
    rows = np.asarray(rows)

    def apply(H: np.ndarray) -> np.ndarray:
        out = np.zeros((len(rows), H.shape[1]))
        for k, i in enumerate(rows):
            cols, vals = A.row(int(i))
            if len(cols):
                out[k] = (vals[:, None] * H[cols]).sum(axis=0)
        return out

    return apply

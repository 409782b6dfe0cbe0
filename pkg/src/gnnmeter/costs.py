"""Work/depth/communication instrumentation.

Work is counted in multiply-adds only (comparisons and copies excluded) and
every tally is an exact integer incremented at the call site of the
arithmetic it accounts for.  Depth is attributed analytically: an
elementwise pass costs 1, a reduction over fan-in f costs ceil(log2 f),
independent of the deterministic execution order used for numerics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

KERNELS = ("scatter", "update_edge", "aggregate", "update_vertex")


def log2_ceil(f: int) -> int:
    """Depth of a binary reduction tree over f inputs (0 for f <= 1)."""
    return max(0, math.ceil(math.log2(f))) if f > 1 else 0


def _zero_tally() -> dict[str, int]:
    return {k: 0 for k in KERNELS}


class OpCounter:
    """Per-run accumulator of multiply-adds, split by kernel and layer.

    Layer index -1 addresses preprocessing, -2 postprocessing.
    """

    def __init__(self):
        self.pre = _zero_tally()
        self.post = _zero_tally()
        self.layers: list[dict[str, int]] = []
        self.spmm_calls = 0
        self.comm_words = 0

    def _bucket(self, layer: int) -> dict[str, int]:
        if layer == -1:
            return self.pre
        if layer == -2:
            return self.post
        while len(self.layers) <= layer:
            self.layers.append(_zero_tally())
        return self.layers[layer]

    def add(self, kernel: str, madds: int, layer: int = 0) -> None:
        self._bucket(layer)[kernel] += int(madds)

    def total(self) -> int:
        out = sum(self.pre.values()) + sum(self.post.values())
        for tally in self.layers:
            out += sum(tally.values())
        return out

    def kernel_total(self, kernel: str) -> int:
        out = self.pre[kernel] + self.post[kernel]
        for tally in self.layers:
            out += tally[kernel]
        return out


@dataclass
class CostReport:
    """Assembled work/depth/communication record for one run.

    The generic identity total = pre + sum(per-layer) + post holds exactly by
    construction; ``work_per_layer``/``depth_per_layer`` keep the per-kernel
    split per layer.
    """

    work_pre: int = 0
    work_per_layer: list = field(default_factory=list)
    work_post: int = 0
    depth_pre: int = 0
    depth_per_layer: list = field(default_factory=list)
    depth_post: int = 0
    comm_words: int = 0
    sync_steps: int = 0

    @property
    def total_work(self) -> int:
        return self.work_pre + sum(sum(t.values()) for t in self.work_per_layer) + self.work_post

    @property
    def total_depth(self) -> int:
        return self.depth_pre + sum(sum(t.values()) for t in self.depth_per_layer) + self.depth_post

    def layer_work(self, l: int, kernel: str | None = None) -> int:
        tally = self.work_per_layer[l]
        return tally[kernel] if kernel else sum(tally.values())

    def layer_depth(self, l: int, kernel: str | None = None) -> int:
        tally = self.depth_per_layer[l]
        return tally[kernel] if kernel else sum(tally.values())

    def to_json(self) -> dict:
        return {
            "work_pre": self.work_pre,
            "work_per_layer": self.work_per_layer,
            "work_post": self.work_post,
            "depth_pre": self.depth_pre,
            "depth_per_layer": self.depth_per_layer,
            "depth_post": self.depth_post,
            "comm_words": self.comm_words,
            "sync_steps": self.sync_steps,
        }


def measure_work(run_output) -> CostReport:
    """Exact madd tallies from an instrumented run.

    Accepts the LayerOutput list of a vertex-wise forward, an OpCounter from
    the matrix engine, or a simulation Trace (summed across workers, first
    iteration).
    """
    from .lc import LayerOutput  # local import to avoid a cycle

    report = CostReport()
    if isinstance(run_output, OpCounter):
        report.work_pre = sum(run_output.pre.values())
        report.work_post = sum(run_output.post.values())
        report.work_per_layer = [dict(t) for t in run_output.layers]
        report.comm_words = run_output.comm_words
        return report

    if isinstance(run_output, (list, tuple)):
        if run_output and not isinstance(run_output[0], LayerOutput):
            raise TypeError("expected LayerOutput entries")
        report.work_per_layer = [dict(lo.kernel_trace.work) for lo in run_output]
        report.work_pre = sum(lo.prep_work for lo in run_output)
        return report

    # Simulation trace: first-iteration forward tallies summed over workers.
    events = run_output.events
    iters = max((e.iteration for e in events), default=1)
    num_layers = max((e.layer for e in events), default=0)
    per_layer = [_zero_tally() for _ in range(num_layers)]
    for e in events:
        if e.iteration == 1 and e.layer >= 1 and e.phase == "forward":
            per_layer[e.layer - 1][e.kernel] += e.madds
    report.work_per_layer = per_layer
    report.comm_words = run_output.comm_words
    report.sync_steps = run_output.barrier_count // max(1, iters)
    return report


def measure_depth(run_output) -> CostReport:
    """Critical-path attribution per the reduction rules."""
    from .lc import LayerOutput

    report = CostReport()
    if isinstance(run_output, (list, tuple)) and run_output and isinstance(run_output[0], LayerOutput):
        report.depth_per_layer = [dict(lo.kernel_trace.depth) for lo in run_output]
        report.depth_pre = max((lo.prep_depth for lo in run_output), default=0)
        return report
    raise TypeError("measure_depth expects the LayerOutput list of a forward run")


def comm_volume(part, g, k: int, num_layers: int) -> int:
    """Exact L * k * (directed cut edges) word count."""
    from .graph import directed_cut_edges

    return num_layers * k * directed_cut_edges(part, g)


@dataclass
class FitRecord:
    terms: tuple[str, ...]
    coefficients: tuple[float, ...]
    residual: float
    flagged: bool


_TERM_FUNCS = {
    "L*nnz*k": lambda m: m["L"] * m["nnz"] * m["k"],
    "L*nnz*k^2": lambda m: m["L"] * m["nnz"] * m["k"] * m["k"],
    "L*n*k^2": lambda m: m["L"] * m["n"] * m["k"] * m["k"],
    "L*K*n*k^2": lambda m: m["L"] * m["K"] * m["n"] * m["k"] * m["k"],
}


def model_work_terms(model_id: str) -> tuple[str, ...]:
    """Closed-form work terms to regress measured counters against."""
    quadratic_edge = ("ggcn", "sage_pool", "edgeconv1", "edgeconv5", "gat", "monet")
    if model_id in quadratic_edge:
        return ("L*nnz*k^2", "L*n*k^2")
    if model_id == "gin":
        return ("L*nnz*k", "L*K*n*k^2")
    return ("L*nnz*k", "L*n*k^2")


def check_asymptotic(points, model_id: str) -> FitRecord:
    """Least-squares fit of measured total work against the model's terms.

    ``points`` pairs a size record {n, nnz, k, L, K} with a CostReport.
    Residual above 5% of the measurement norm is flagged.
    """
    if len(points) < 3:
        raise ValueError("need at least 3 graph sizes for a fit")
    terms = model_work_terms(model_id)
    design = np.array([
        [_TERM_FUNCS[name](meta) for name in terms]
        for meta, _ in points
    ], dtype=float)
    measured = np.array([float(rep.total_work - rep.work_pre) for _, rep in points])
    coeffs, *_ = np.linalg.lstsq(design, measured, rcond=None)
    residual = float(np.linalg.norm(design @ coeffs - measured))
    scale = float(np.linalg.norm(measured)) or 1.0
    rel = residual / scale
    return FitRecord(terms=terms,
                     coefficients=tuple(float(c) for c in coeffs),
                     residual=rel, flagged=rel > 0.05)

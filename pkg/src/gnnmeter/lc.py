"""Vertex/edge-wise model execution (per-edge transform, aggregation, update).

One layer evaluates, for every vertex i,
``phi(h_i, reduce_{j in conv(i)} psi(h_i, h_j))`` with the model's
neighborhood convention and reducer taken from the catalog.  Numerics are
bit-reproducible: neighbor contributions are always consumed in ascending
vertex order, so concurrent evaluation over vertices cannot change results.

The simulator reuses ``layer_compute`` with per-reader feature views, which
is how stale reads become numerically visible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .costs import KERNELS, log2_ceil
from .errors import MissingContext, NoLocalFormulation, ShapeError
from .graph import Graph
from .models import HAT, ModelSpec, apply_activation


@dataclass
class PsiContext:
    """Neighborhood context for a single per-edge evaluation.

    ``deg_i``/``deg_j`` carry the self-loop degrees d~ used by fixed
    coefficients; ``neighborhood`` carries the feature rows of conv(i) in
    ascending vertex order (required by the attention softmax denominator).
    """

    deg_i: float = 1.0
    deg_j: float = 1.0
    neighborhood: np.ndarray | None = None


@dataclass
class KernelTally:
    work: dict = field(default_factory=lambda: {k: 0 for k in KERNELS})
    depth: dict = field(default_factory=lambda: {k: 0 for k in KERNELS})

    def merge(self, other: "KernelTally") -> None:
        for k in KERNELS:
            self.work[k] += other.work[k]
            self.depth[k] = max(self.depth[k], other.depth[k])


@dataclass
class LayerOutput:
    features: np.ndarray
    kernel_trace: KernelTally
    prep_work: int = 0
    prep_depth: int = 0


def _require_lc(spec: ModelSpec) -> None:
    if "lc" not in spec.info.formulations:
        raise NoLocalFormulation(f"{spec.model_id} has no vertex/edge-wise form")


def _check_width(name: str, vec: np.ndarray, want: int) -> None:
    if vec.shape[-1] != want:
        raise ShapeError(f"{name} has width {vec.shape[-1]}, expected {want}")


def psi_width(spec: ModelSpec, l: int) -> int:
    """Width of the per-edge output feeding the reducer."""
    if spec.model_id in ("edgeconv1", "edgeconv5"):
        return spec.widths[l + 1]
    return spec.widths[l]


def conv_members(g: Graph, spec: ModelSpec, i: int) -> np.ndarray:
    """conv(i) in ascending order; the hat convention inserts i itself."""
    neigh = g.neighbors(i)
    if spec.info.convention == HAT:
        pos = int(np.searchsorted(neigh, i))
        return np.insert(neigh, pos, i)
    return neigh


def _gat_coefficients(spec: ModelSpec, l: int, h_i: np.ndarray,
                      neigh: np.ndarray) -> np.ndarray:
    """Two-pass softmax attention over conv(i), max-subtracted for stability."""
    params = spec.layers[l]
    W, a = params["W"], params["a"]
    k_out = W.shape[1]
    wh_i = h_i @ W
    wh = neigh @ W
    logits = apply_activation(spec.activations[l], wh_i @ a[:k_out] + wh @ a[k_out:])
    shifted = np.exp(logits - logits.max())
    return shifted / shifted.sum()


def _psi_block(spec: ModelSpec, l: int, h_i: np.ndarray,
               neigh: np.ndarray) -> np.ndarray:
    """psi over every conv member at once; rows follow the ascending order."""
    params = spec.layers[l]
    mid = spec.model_id
    if mid in ("sage_mean", "gin", "commnet"):
        return neigh
    if mid == "vanilla_attn":
        return (neigh @ h_i)[:, None] * neigh
    if mid == "monet":
        centered = neigh - params["mu"]
        quad = np.einsum("fk,kl,fl->f", centered, params["W_inv"], centered)
        return np.exp(-0.5 * quad)[:, None] * neigh
    if mid == "gat":
        return _gat_coefficients(spec, l, h_i, neigh)[:, None] * neigh
    if mid == "agnn_cosine":
        ni = float(np.linalg.norm(h_i))
        nj = np.linalg.norm(neigh, axis=1)
        denom = ni * nj
        cos = np.divide(neigh @ h_i, denom, out=np.zeros(len(neigh)), where=denom > 0)
        return float(params["beta"][0]) * cos[:, None] * neigh
    if mid == "ggcn":
        gate = 1.0 / (1.0 + np.exp(-(h_i @ params["W1"] + neigh @ params["W2"])))
        return gate * neigh
    if mid == "sage_pool":
        return apply_activation(spec.activations[l],
                                neigh @ params["W_pool"] + params["b_pool"])
    if mid == "edgeconv1":
        return neigh @ params["W"]
    if mid == "edgeconv5":
        return apply_activation(spec.activations[l],
                                (neigh - h_i) @ params["W1"] + h_i @ params["W2"])
    raise AssertionError(f"no psi for {mid}")


def eval_psi(spec: ModelSpec, l: int, h_i: np.ndarray, h_j: np.ndarray,
             ctx: PsiContext | None = None) -> np.ndarray:
    """Per-edge transform for one (i, j); the fixed-coefficient models never
    touch learned weights here."""
    _require_lc(spec)
    k_in = spec.widths[l]
    _check_width("h_i", np.asarray(h_i, dtype=float), k_in)
    h_j = np.asarray(h_j, dtype=float)
    _check_width("h_j", h_j, k_in)
    ctx = ctx or PsiContext()

    if spec.model_id == "gcn":
        return h_j / np.sqrt(ctx.deg_i * ctx.deg_j)
    if spec.model_id == "gat":
        if ctx.neighborhood is None:
            raise MissingContext("gat psi needs the full neighborhood of i")
        coefs = _gat_coefficients(spec, l, np.asarray(h_i, dtype=float),
                                  ctx.neighborhood)
        # Identify j's coefficient by recomputing its logit against the
        # shared denominator instead of trusting a positional index.
        params = spec.layers[l]
        W, a = params["W"], params["a"]
        k_out = W.shape[1]
        wh_i = np.asarray(h_i, dtype=float) @ W
        logits = apply_activation(
            spec.activations[l],
            wh_i @ a[:k_out] + (ctx.neighborhood @ W) @ a[k_out:])
        z_j = apply_activation(spec.activations[l],
                               wh_i @ a[:k_out] + (h_j @ W) @ a[k_out:])
        return float(np.exp(z_j - logits.max()) / np.exp(logits - logits.max()).sum()) * h_j
    return _psi_block(spec, l, np.asarray(h_i, dtype=float), h_j[None, :])[0]


def aggregate(reducer: str, inputs, width: int) -> np.ndarray:
    """Elementwise reduction; the empty set reduces to zero for all reducers
    and mean divides by max(1, count)."""
    rows = [np.asarray(v, dtype=float) for v in inputs]
    for v in rows:
        _check_width("aggregate input", v, width)
    if not rows:
        return np.zeros(width)
    stacked = np.stack(rows)
    if reducer == "sum":
        return stacked.sum(axis=0)
    if reducer == "mean":
        return stacked.sum(axis=0) / max(1, len(rows))
    if reducer == "max":
        return stacked.max(axis=0)
    raise ValueError(f"unknown reducer {reducer!r}")


def eval_phi(spec: ModelSpec, l: int, h_i: np.ndarray, agg: np.ndarray) -> np.ndarray:
    """Per-vertex update followed by the layer activation."""
    _require_lc(spec)
    params = spec.layers[l]
    h_i = np.asarray(h_i, dtype=float)
    agg = np.asarray(agg, dtype=float)
    _check_width("h_i", h_i, spec.widths[l])
    _check_width("agg", agg, psi_width(spec, l))
    mid = spec.model_id

    if mid in ("gcn", "sage_mean", "vanilla_attn", "monet", "gat",
               "agnn_cosine", "ggcn"):
        out = agg @ params["W"]
    elif mid == "gin":
        out = (1.0 + spec.epsilon) * h_i + agg
        for d in range(spec.mlp_depth):
            out = out @ params[f"W{d}"]
            if d + 1 < spec.mlp_depth:
                out = np.maximum(out, 0.0)
    elif mid == "commnet":
        out = h_i @ params["W1"] + agg @ params["W2"]
    elif mid == "sage_pool":
        out = np.concatenate([h_i, agg]) @ params["W"]
    elif mid in ("edgeconv1", "edgeconv5"):
        out = agg
    else:
        raise AssertionError(f"no phi for {mid}")
    return apply_activation(spec.activations[l], out)


def _psi_work_per_edge(spec: ModelSpec, l: int) -> int:
    k_in, k_out = spec.widths[l], spec.widths[l + 1]
    return {
        "gcn": k_in,
        "sage_mean": 0, "gin": 0, "commnet": 0,
        "vanilla_attn": 2 * k_in,
        "monet": k_in * k_in + 3 * k_in,
        "gat": k_in * k_out + 2 * k_out + 2 + k_in,
        "agnn_cosine": 3 * k_in,
        "ggcn": k_in * k_in + 2 * k_in,
        "sage_pool": k_in * k_in + k_in,
        "edgeconv1": k_in * k_out,
        "edgeconv5": k_in + 2 * k_in * k_out + k_out,
    }[spec.model_id]


def _psi_work_per_vertex(spec: ModelSpec, l: int) -> int:
    """Per-edge costs shared across a vertex's edges (gates, attention keys)."""
    k_in, k_out = spec.widths[l], spec.widths[l + 1]
    return {
        "gat": k_in * k_out,      # W h_i
        "agnn_cosine": k_in,      # ||h_i||
        "ggcn": k_in * k_in,      # W1 h_i
        "edgeconv5": k_in * k_out,  # W2 h_i
    }.get(spec.model_id, 0)


def _psi_depth(spec: ModelSpec, l: int, max_fanin: int) -> int:
    """Depth of one per-edge transform.  Fixed coefficients fuse into the
    reduction tree and contribute nothing."""
    k_in, k_out = spec.widths[l], spec.widths[l + 1]
    return {
        "gcn": 0, "sage_mean": 0, "gin": 0, "commnet": 0,
        "vanilla_attn": log2_ceil(k_in) + 1,
        "monet": 2 * log2_ceil(k_in) + 1,
        "gat": log2_ceil(k_in) + log2_ceil(2 * k_out) + log2_ceil(max_fanin) + 1,
        "agnn_cosine": log2_ceil(k_in) + 1,
        "ggcn": log2_ceil(k_in) + 2,
        "sage_pool": log2_ceil(k_in) + 1,
        "edgeconv1": log2_ceil(k_in),
        "edgeconv5": log2_ceil(k_in) + 2,
    }[spec.model_id]


def _phi_work_per_vertex(spec: ModelSpec, l: int) -> int:
    k_in, k_out = spec.widths[l], spec.widths[l + 1]
    if spec.model_id == "gin":
        widths = [k_in] + [k_out] * spec.mlp_depth
        mlp = sum(widths[d] * widths[d + 1] for d in range(spec.mlp_depth))
        return 2 * k_in + mlp
    return {
        "commnet": 2 * k_in * k_out + k_out,
        "sage_pool": 2 * k_in * k_out,
        "edgeconv1": 0, "edgeconv5": 0,
    }.get(spec.model_id, k_in * k_out)


def _phi_depth(spec: ModelSpec, l: int) -> int:
    k_in, k_out = spec.widths[l], spec.widths[l + 1]
    act = 1 if spec.activations[l] != "none" else 0
    if spec.model_id == "gin":
        widths = [k_in] + [k_out] * spec.mlp_depth
        return sum(log2_ceil(w) for w in widths[:-1]) + (spec.mlp_depth - 1) + 1 + act
    if spec.model_id == "commnet":
        return log2_ceil(k_in) + 1 + act
    if spec.model_id == "sage_pool":
        return log2_ceil(2 * k_in) + act
    if spec.model_id in ("edgeconv1", "edgeconv5"):
        return act
    return log2_ceil(k_in) + act


def layer_tally(g: Graph, spec: ModelSpec, l: int, fanins,
                num_vertices: int | None = None) -> KernelTally:
    """Analytic work/depth tally for one layer given per-vertex fan-ins."""
    tally = KernelTally()
    n = g.n if num_vertices is None else num_vertices
    total_fanin = int(sum(fanins))
    max_fanin = int(max(fanins, default=0))
    width = psi_width(spec, l)

    tally.work["update_edge"] = (total_fanin * _psi_work_per_edge(spec, l)
                                 + n * _psi_work_per_vertex(spec, l))
    agg_work = total_fanin * width if spec.info.reducer in ("sum", "mean") else 0
    if spec.info.reducer == "mean":
        agg_work += n * width
    tally.work["aggregate"] = agg_work
    tally.work["update_vertex"] = n * _phi_work_per_vertex(spec, l)

    tally.depth["update_edge"] = _psi_depth(spec, l, max_fanin)
    tally.depth["aggregate"] = log2_ceil(max_fanin)
    tally.depth["update_vertex"] = _phi_depth(spec, l)
    return tally


def layer_compute(g: Graph, spec: ModelSpec, l: int, neigh_view: np.ndarray,
                  self_view: np.ndarray, vertices=None) -> np.ndarray:
    """Evaluate one layer for ``vertices`` (default all).

    ``neigh_view[j]`` is the feature row read when j appears as a neighbor;
    ``self_view[i]`` is the row used for i's own argument.  Both views
    coincide for plain forward execution and differ under staleness.
    """
    k_in = spec.widths[l]
    if neigh_view.shape != (g.n, k_in) or self_view.shape != (g.n, k_in):
        raise ShapeError(f"layer {l} expects {g.n}x{k_in} feature views")
    vertices = list(range(g.n)) if vertices is None else [int(v) for v in vertices]

    width = psi_width(spec, l)
    out = np.empty((len(vertices), spec.widths[l + 1]))
    reducer = spec.info.reducer
    for row, i in enumerate(vertices):
        conv = conv_members(g, spec, i)
        h_i = self_view[i]
        if len(conv):
            neigh = neigh_view[conv]
            psi_rows = _psi_block_dispatch(spec, l, i, h_i, conv, neigh, g)
            if reducer == "sum":
                agg = psi_rows.sum(axis=0)
            elif reducer == "mean":
                agg = psi_rows.sum(axis=0) / max(1, len(psi_rows))
            else:
                agg = psi_rows.max(axis=0)
        else:
            agg = np.zeros(width)
        out[row] = eval_phi(spec, l, h_i, agg)
    return out


def _psi_block_dispatch(spec, l, i, h_i, conv, neigh, g):
    if spec.model_id == "gcn":
        coef = 1.0 / np.sqrt(float(g.degrees[i] + 1) * (g.degrees[conv] + 1.0))
        return coef[:, None] * neigh
    return _psi_block(spec, l, h_i, neigh)


def lc_layer(g: Graph, H: np.ndarray, spec: ModelSpec, l: int) -> LayerOutput:
    """One full layer over all vertices with its kernel tallies."""
    _require_lc(spec)
    H = np.asarray(H, dtype=float)
    if H.shape[0] != g.n:
        raise ShapeError(f"feature matrix has {H.shape[0]} rows, graph has {g.n}")
    _check_width("H", H, spec.widths[l])

    features = layer_compute(g, spec, l, H, H)
    fanins = [len(conv_members(g, spec, i)) for i in range(g.n)]
    return LayerOutput(features=features,
                       kernel_trace=layer_tally(g, spec, l, fanins))


def lc_forward(g: Graph, X: np.ndarray, spec: ModelSpec,
               with_outputs: bool = False):
    """Stack the spec's layers; L = 0 returns the input unchanged."""
    _require_lc(spec)
    H = np.asarray(X, dtype=float)
    outputs: list[LayerOutput] = []
    for l in range(spec.num_layers):
        out = lc_layer(g, H, spec, l)
        if l == 0 and spec.model_id == "gcn":
            # Fixed-coefficient derivation (one madd per stored entry of the
            # normalized operator), done once per run.
            out.prep_work = int(np.sum(g.degrees + 1))
            out.prep_depth = 1
        outputs.append(out)
        H = out.features
    if with_outputs:
        return H, outputs
    return H

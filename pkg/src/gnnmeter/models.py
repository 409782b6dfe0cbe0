"""Model catalog: declarative descriptions of the 21 supported models.

Each model is either vertex/edge-wise executable (``lc``), whole-matrix
executable (``gl``), or both.  The catalog records, per model, the
per-edge/per-vertex structure (class, neighborhood convention, reducer) and
the matrix-side structure (operator kind, linear/polynomial/rational chain).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .rng import KeyedStream

# Neighborhood conventions: "plain" = N(i), "hat" = N(i) + self.  The
# in-neighbor convention of undirected storage coincides with "plain".
PLAIN, HAT = "plain", "hat"


@dataclass(frozen=True)
class ModelInfo:
    model_id: str
    model_class: str          # C-GNN | A-GNN | MP-GNN | GL
    formulations: frozenset   # subset of {"lc", "gl"}
    convention: str | None    # neighborhood for the LC aggregation
    reducer: str | None       # sum | mean | max
    gl_type: str | None       # L | P | R
    gl_operator: str | None   # normalization kind feeding the matrix chain
    psi_reads_weights: bool   # False for C-GNNs (coefficients preprocessable)


def _info(mid, cls, forms, conv=None, red=None, gtype=None, gop=None, psi_w=True):
    return ModelInfo(mid, cls, frozenset(forms), conv, red, gtype, gop, psi_w)


MODELS: dict[str, ModelInfo] = {m.model_id: m for m in [
    # class        forms         conv   reducer  type  operator
    _info("gcn", "C-GNN", ("lc", "gl"), HAT, "sum", "L", "sym_norm", psi_w=False),
    _info("sage_mean", "C-GNN", ("lc", "gl"), HAT, "mean", "L", "self_loop", psi_w=False),
    _info("gin", "C-GNN", ("lc", "gl"), PLAIN, "sum", "L", "raw", psi_w=False),
    _info("commnet", "C-GNN", ("lc", "gl"), PLAIN, "sum", "L", "raw", psi_w=False),
    _info("vanilla_attn", "A-GNN", ("lc", "gl"), PLAIN, "sum", "L", "raw"),
    _info("monet", "A-GNN", ("lc",), HAT, "sum"),
    _info("gat", "A-GNN", ("lc",), HAT, "sum"),
    _info("agnn_cosine", "A-GNN", ("lc",), HAT, "sum"),
    _info("ggcn", "MP-GNN", ("lc",), PLAIN, "sum"),
    _info("sage_pool", "MP-GNN", ("lc",), PLAIN, "max"),
    _info("edgeconv1", "MP-GNN", ("lc", "gl"), PLAIN, "sum", "L", "raw"),
    _info("edgeconv5", "MP-GNN", ("lc",), PLAIN, "max"),
    _info("sgc", "GL", ("gl",), gtype="P", gop="sym_norm"),
    _info("deepwalk", "GL", ("gl",), gtype="P", gop="rw_norm"),
    _info("chebnet", "GL", ("gl",), gtype="P", gop="rw_norm"),
    _info("dcnn_gdc", "GL", ("gl",), gtype="P", gop="rw_norm"),
    _info("node2vec", "GL", ("gl",), gtype="P", gop="rw_norm"),
    _info("line_sdne", "GL", ("gl",), gtype="P", gop="rw_norm"),
    _info("autoregress", "GL", ("gl",), gtype="R", gop="sym_norm"),
    _info("ppnp", "GL", ("gl",), gtype="R", gop="sym_norm"),
    _info("arma_parwalks", "GL", ("gl",), gtype="R", gop="sym_norm"),
]}

LC_MODELS = tuple(m for m, i in MODELS.items() if "lc" in i.formulations)
GL_MODELS = tuple(m for m, i in MODELS.items() if "gl" in i.formulations)
DUAL_MODELS = tuple(m for m, i in MODELS.items()
                    if {"lc", "gl"} <= i.formulations)


@dataclass
class ModelSpec:
    """One concrete model instance: weights, activations, hyperparameters.

    ``layers[l]`` is a dict of named parameter arrays for layer l;
    ``activations[l]`` applies at the end of layer l.  Polynomial models keep
    their coefficient vector in ``coeffs`` (index s = weight of operator
    power s); rational models use ``alpha`` or ``(a, b)``.
    """

    model_id: str
    layers: list[dict[str, np.ndarray]]
    activations: list[str]
    epsilon: float = 0.0          # gin
    mlp_depth: int = 1            # gin
    coeffs: tuple[float, ...] = ()  # polynomial models
    alpha: float = 0.5            # ppnp / autoregress
    a: float = 0.5                # arma_parwalks
    b: float = 1.0                # arma_parwalks
    p: float = 1.0                # node2vec
    q: float = 1.0                # node2vec
    theta: float = 0.5            # line_sdne
    solve_tol: float = 1e-10
    widths: tuple[int, ...] = ()

    @property
    def info(self) -> ModelInfo:
        return MODELS[self.model_id]

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def validate(self) -> None:
        if self.model_id not in MODELS:
            raise ConfigError(f"unknown model {self.model_id!r}")
        if self.epsilon < 0:
            raise ConfigError("epsilon must be >= 0")
        if self.model_id == "ppnp" and not 0 < self.alpha <= 1:
            raise ConfigError("ppnp needs 0 < alpha <= 1")
        if self.model_id == "autoregress" and self.alpha < 0:
            raise ConfigError("autoregress needs alpha >= 0")
        if self.model_id == "arma_parwalks" and not 0 <= self.a < 1:
            raise ConfigError("arma_parwalks needs 0 <= a < 1")
        if self.model_id == "node2vec" and (self.p <= 0 or self.q <= 0):
            raise ConfigError("node2vec needs p, q > 0")
        for act in self.activations:
            if act not in ("relu", "sigmoid", "none"):
                raise ConfigError(f"unknown activation {act!r}")


def glorot(rows: int, cols: int, seed: int, *keys: int) -> np.ndarray:
    """Glorot-uniform matrix from the counter-based stream."""
    limit = np.sqrt(6.0 / (rows + cols))
    stream = KeyedStream(seed, *keys)
    flat = [stream.uniform_in(-limit, limit) for _ in range(rows * cols)]
    return np.array(flat).reshape(rows, cols)


def _layer_params(model_id: str, k_in: int, k_out: int, seed: int, l: int,
                  mlp_depth: int) -> dict[str, np.ndarray]:
    g = lambda r, c, tag: glorot(r, c, seed, l, tag)
    if model_id in ("gcn", "sage_mean", "vanilla_attn", "edgeconv1"):
        return {"W": g(k_in, k_out, 0)}
    if model_id == "gin":
        widths = [k_in] + [k_out] * mlp_depth
        return {f"W{d}": g(widths[d], widths[d + 1], d) for d in range(mlp_depth)}
    if model_id == "commnet":
        return {"W1": g(k_in, k_out, 0), "W2": g(k_in, k_out, 1)}
    if model_id == "monet":
        # Inverse covariance supplied directly; a diagonal one keeps the
        # Gaussian kernel well-scaled without a runtime inversion.
        return {"W": g(k_in, k_out, 0),
                "mu": glorot(1, k_in, seed, l, 1)[0],
                "W_inv": np.eye(k_in)}
    if model_id == "gat":
        return {"W": g(k_in, k_out, 0), "a": glorot(1, 2 * k_out, seed, l, 1)[0]}
    if model_id == "agnn_cosine":
        return {"W": g(k_in, k_out, 0),
                "beta": np.array([1.0 + 0.1 * l])}
    if model_id == "ggcn":
        return {"W": g(k_in, k_out, 0), "W1": g(k_in, k_in, 1), "W2": g(k_in, k_in, 2)}
    if model_id == "sage_pool":
        return {"W": g(2 * k_in, k_out, 0), "W_pool": g(k_in, k_in, 1),
                "b_pool": glorot(1, k_in, seed, l, 2)[0]}
    if model_id == "edgeconv5":
        return {"W1": g(k_in, k_out, 0), "W2": g(k_in, k_out, 1)}
    # GL-only chains carry a single projection.
    return {"W": g(k_in, k_out, 0)}


def make_spec(model_id: str, widths, seed: int = 0, activation="relu",
              epsilon: float = 0.0, mlp_depth: int = 2, poly_order: int = 2,
              coeffs=None, alpha: float = 0.5, a: float = 0.5, b: float = 1.0,
              p: float = 1.0, q: float = 1.0, theta: float = 0.5,
              last_activation: str | None = None) -> ModelSpec:
    """Build a ready-to-run spec with Glorot-initialized weights.

    ``widths`` chains layer dimensions: widths[l] -> widths[l+1].  GL-only
    chains take exactly one projection (widths must have length 2).
    """
    info = MODELS.get(model_id)
    if info is None:
        raise ConfigError(f"unknown model {model_id!r}")
    widths = [int(w) for w in widths]
    if info.model_class == "GL" and len(widths) != 2:
        raise ConfigError(f"{model_id} runs a single-iteration chain; "
                          f"widths must be [k_in, k_out]")

    num_layers = len(widths) - 1
    layers = [_layer_params(model_id, widths[l], widths[l + 1], seed, l, mlp_depth)
              for l in range(num_layers)]
    if isinstance(activation, str):
        activations = [activation] * num_layers
    else:
        activations = list(activation)
    if last_activation is not None and num_layers:
        activations[-1] = last_activation
    if info.model_class == "GL" and isinstance(activation, str) and activation == "relu":
        # Matrix-chain models are conventionally linear; opt in explicitly.
        activations = ["none"] * num_layers

    spec = ModelSpec(model_id=model_id, layers=layers, activations=activations,
                     epsilon=epsilon, mlp_depth=mlp_depth, coeffs=(),
                     alpha=alpha, a=a, b=b, p=p, q=q, theta=theta,
                     widths=tuple(widths))
    spec.validate()

    if coeffs is None:
        if model_id == "sgc":
            coeffs = tuple([0.0] * poly_order + [1.0])
        elif model_id == "deepwalk":
            coeffs = tuple([1.0] * (poly_order + 1))
        elif model_id == "chebnet":
            coeffs = tuple(1.0 / (s + 1) for s in range(poly_order + 1))
        elif model_id == "dcnn_gdc":
            coeffs = tuple([0.0] + [1.0 / s for s in range(1, poly_order + 1)])
        elif model_id == "node2vec":
            coeffs = (1.0 / p, 1.0 - 1.0 / q, 1.0 / q)
        elif model_id == "line_sdne":
            coeffs = (0.0, 1.0, theta)
        else:
            coeffs = ()
    spec.coeffs = tuple(coeffs)
    return spec


def apply_activation(name: str, x: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(x, 0.0)
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-x))
    return x


def activation_grad(name: str, pre: np.ndarray) -> np.ndarray:
    """Derivative w.r.t. the pre-activation; ReLU uses the sigma'(0)=0 subgradient."""
    if name == "relu":
        return (pre > 0.0).astype(float)
    if name == "sigmoid":
        s = 1.0 / (1.0 + np.exp(-pre))
        return s * (1.0 - s)
    return np.ones_like(pre)

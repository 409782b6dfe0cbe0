"""Full-batch training: loss, analytic GCN backward, SGD, and the
finite-difference gradient oracle.

Only the GCN path has an analytic backward; the remaining models run
forward-only.  The loss gradient uses (softmax(Y) - T) / |labeled set|,
restricted to labeled rows, which reproduces central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyLabels, NoCache, ShapeError
from .gl import gemm, spmm
from .graph import Graph, normalize
from .models import ModelSpec, activation_grad, apply_activation, make_spec


@dataclass(frozen=True)
class Labels:
    """Labeled vertex subset with class indices and one-hot ground truth."""

    labeled: tuple[int, ...]
    classes: tuple[int, ...]
    num_classes: int

    def __post_init__(self):
        if any(c < 0 or c >= self.num_classes for c in self.classes):
            raise ValueError("class index out of range")
        if len(self.labeled) != len(self.classes):
            raise ValueError("labeled set and classes must align")

    def one_hot(self, n: int) -> np.ndarray:
        T = np.zeros((n, self.num_classes))
        for v, c in zip(self.labeled, self.classes):
            T[v, c] = 1.0
        return T

    def mask(self, n: int) -> np.ndarray:
        m = np.zeros(n, dtype=bool)
        m[list(self.labeled)] = True
        return m


@dataclass
class GradientSet:
    """Per-layer weight gradients; shapes mirror the spec's parameters."""

    weights: list[dict[str, np.ndarray]] = field(default_factory=list)

    def max_abs(self) -> float:
        return max((float(np.abs(g).max()) for layer in self.weights
                    for g in layer.values()), default=0.0)


def softmax_xent(Y: np.ndarray, labels: Labels) -> tuple[float, np.ndarray]:
    """Row-stabilized softmax cross-entropy over the labeled rows only."""
    Y = np.asarray(Y, dtype=float)
    if not labels.labeled:
        raise EmptyLabels("no labeled vertices")
    if Y.shape[1] != labels.num_classes:
        raise ShapeError(f"{Y.shape[1]} logit columns for {labels.num_classes} classes")

    shifted = Y - Y.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    log_probs = shifted - np.log(exp.sum(axis=1, keepdims=True))

    count = len(labels.labeled)
    loss = 0.0
    dY = np.zeros_like(Y)
    T = labels.one_hot(Y.shape[0])
    for v in labels.labeled:
        loss -= float(log_probs[v] @ T[v])
        dY[v] = (probs[v] - T[v]) / count
    return loss / count, dY


def predictions(Y: np.ndarray) -> np.ndarray:
    return np.argmax(Y, axis=1)


def accuracy(Y: np.ndarray, labels: Labels) -> float:
    pred = predictions(Y)
    hits = sum(1 for v, c in zip(labels.labeled, labels.classes) if pred[v] == c)
    return hits / len(labels.labeled)


@dataclass
class ForwardCache:
    """Per-layer activations of a GCN forward pass.

    aggregated[l] = A^ H^(l), preact[l] = aggregated[l] W^(l),
    hidden[l+1] = sigma(preact[l]).
    """

    hidden: list[np.ndarray]
    aggregated: list[np.ndarray]
    preact: list[np.ndarray]


def gcn_forward_cached(g: Graph, X: np.ndarray, spec: ModelSpec,
                       operator=None) -> ForwardCache:
    A = operator if operator is not None else normalize(g, "sym_norm")
    H = np.asarray(X, dtype=float)
    cache = ForwardCache(hidden=[H], aggregated=[], preact=[])
    for l in range(spec.num_layers):
        Z = spmm(A, H)
        P = gemm(Z, spec.layers[l]["W"])
        H = apply_activation(spec.activations[l], P)
        cache.aggregated.append(Z)
        cache.preact.append(P)
        cache.hidden.append(H)
    return cache


def gcn_backward(cache: ForwardCache, dY: np.ndarray, g: Graph,
                 spec: ModelSpec, operator=None) -> GradientSet:
    """Reverse-mode layer sweep: transpose-operator propagation with the
    elementwise activation derivative (sigma'(0) = 0 for ReLU)."""
    if spec.model_id != "gcn":
        raise ValueError("analytic backward is defined for gcn only")
    if not cache.preact:
        raise NoCache("forward cache is empty")
    A = operator if operator is not None else normalize(g, "sym_norm")

    grads: list[dict[str, np.ndarray]] = [dict() for _ in range(spec.num_layers)]
    dH = np.asarray(dY, dtype=float)
    for l in range(spec.num_layers - 1, -1, -1):
        dP = dH * activation_grad(spec.activations[l], cache.preact[l])
        grads[l]["W"] = cache.aggregated[l].T @ dP
        if l > 0:
            # The sym-norm operator is symmetric, so A^T propagation reuses
            # the same CSR structure.
            dH = spmm(A, dP @ spec.layers[l]["W"].T)
    return GradientSet(weights=grads)


def loss_for_weights(g: Graph, X: np.ndarray, labels: Labels,
                     spec: ModelSpec, operator=None) -> float:
    cache = gcn_forward_cached(g, X, spec, operator)
    loss, _ = softmax_xent(cache.hidden[-1], labels)
    return loss


def finite_diff_grad(g: Graph, X: np.ndarray, labels: Labels, spec: ModelSpec,
                     h: float = 1e-6) -> GradientSet:
    """Central differences per scalar weight; the verification oracle."""
    if h <= 0:
        raise ValueError("step must be positive")
    A = normalize(g, "sym_norm")
    grads: list[dict[str, np.ndarray]] = []
    for l in range(spec.num_layers):
        layer_grads = {}
        for name, W in spec.layers[l].items():
            G = np.zeros_like(W)
            it = np.nditer(W, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = W[idx]
                W[idx] = orig + h
                up = loss_for_weights(g, X, labels, spec, A)
                W[idx] = orig - h
                down = loss_for_weights(g, X, labels, spec, A)
                W[idx] = orig
                G[idx] = (up - down) / (2.0 * h)
            layer_grads[name] = G
        grads.append(layer_grads)
    return GradientSet(weights=grads)


def sgd_step(weights: list[dict[str, np.ndarray]], grads: GradientSet,
             lr: float) -> None:
    """In-place w <- w - lr * grad."""
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    for layer, layer_grads in zip(weights, grads.weights):
        for name, G in layer_grads.items():
            if layer[name].shape != G.shape:
                raise ShapeError(f"gradient shape {G.shape} vs weight {layer[name].shape}")
            layer[name] -= lr * G


@dataclass
class TrainResult:
    spec: ModelSpec
    curve: list  # (epoch, loss, train accuracy)

    @property
    def final_accuracy(self) -> float:
        return self.curve[-1][2]


def train_full_batch(g: Graph, X: np.ndarray, labels: Labels, spec=None,
                     epochs: int = 100, lr: float = 0.1, seed: int = 0,
                     widths=None) -> TrainResult:
    """Deterministic full-batch GCN training loop.

    Either pass a ready spec or widths to initialize one (Glorot from the
    counter stream keyed by ``seed``).
    """
    if spec is None:
        if widths is None:
            raise ValueError("pass a spec or the widths to initialize one")
        spec = make_spec("gcn", widths, seed=seed, last_activation="none")
    A = normalize(g, "sym_norm")
    curve = []
    for epoch in range(epochs):
        cache = gcn_forward_cached(g, X, spec, A)
        loss, dY = softmax_xent(cache.hidden[-1], labels)
        curve.append((epoch, loss, accuracy(cache.hidden[-1], labels)))
        grads = gcn_backward(cache, dY, g, spec, A)
        sgd_step(spec.layers, grads, lr)
    return TrainResult(spec=spec, curve=curve)

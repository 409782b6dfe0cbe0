"""Whole-matrix model execution: SpMM, GEMM, masked Gram products,
polynomial operator chains, and conjugate-gradient rational solves.

Sparse kernels run row by row in index order, so they are deterministic and
agree bit-for-bit across repeated runs.  Polynomial powers are applied as T
iterated SpMMs (never materializing a matrix power); rational chains solve
their SPD system by CG with a post-hoc residual certificate instead of an
explicit inverse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .costs import OpCounter
from .errors import NoGlobalFormulation, NotSymmetric, ShapeError, SolveFailed
from .graph import Graph, SparseOperator, normalize
from .models import ModelSpec, apply_activation


@dataclass
class SolveReport:
    """Certificate of one rational solve: residual <= tolerance on success."""

    iterations: int
    residual: float
    tolerance: float
    converged: bool


def spmm(A: SparseOperator, H: np.ndarray, counter: OpCounter | None = None,
         layer: int = 0, kernel: str = "aggregate") -> np.ndarray:
    """CSR row-by-row multiply-accumulate; nnz(A) * cols multiply-adds."""
    H = np.asarray(H, dtype=float)
    if H.ndim == 1:
        H = H[:, None]
    if A.n != H.shape[0]:
        raise ShapeError(f"operator is {A.n}x{A.n}, features have {H.shape[0]} rows")
    out = np.zeros((A.n, H.shape[1]))
    for i in range(A.n):
        cols, vals = A.row(i)
        if len(cols):
            out[i] = (vals[:, None] * H[cols]).sum(axis=0)
    if counter is not None:
        counter.add(kernel, A.nnz * H.shape[1], layer)
        counter.spmm_calls += 1
    return out


def gemm(A: np.ndarray, B: np.ndarray, counter: OpCounter | None = None,
         layer: int = 0, kernel: str = "update_vertex") -> np.ndarray:
    """Dense product with rows * inner * cols multiply-adds."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape[1] != B.shape[0]:
        raise ShapeError(f"gemm {A.shape} x {B.shape}")
    if counter is not None:
        counter.add(kernel, A.shape[0] * A.shape[1] * B.shape[1], layer)
    return A @ B


def masked_gram(mask: SparseOperator, H: np.ndarray,
                counter: OpCounter | None = None, layer: int = 0) -> SparseOperator:
    """Gram values H_i . H_j at the mask's stored positions only.

    The dense product H H^T is never formed; work is nnz(mask) * cols.
    """
    H = np.asarray(H, dtype=float)
    if mask.n != H.shape[0]:
        raise ShapeError(f"mask is {mask.n}x{mask.n}, features have {H.shape[0]} rows")
    values = np.empty(mask.nnz)
    for i in range(mask.n):
        lo, hi = mask.row_offsets[i], mask.row_offsets[i + 1]
        cols = mask.col_indices[lo:hi]
        if hi > lo:
            values[lo:hi] = H[cols] @ H[i]
    if counter is not None:
        counter.add("update_edge", mask.nnz * H.shape[1], layer)
    return SparseOperator("raw", mask.n, mask.row_offsets, mask.col_indices, values)


def poly_apply(coeffs, A: SparseOperator, H: np.ndarray,
               counter: OpCounter | None = None) -> np.ndarray:
    """(sum_s coeffs[s] A^s) H via running products: exactly T SpMM calls."""
    H = np.asarray(H, dtype=float)
    coeffs = [float(c) for c in coeffs]
    if not coeffs:
        raise ValueError("need at least the order-0 coefficient")
    result = coeffs[0] * H
    if counter is not None and coeffs[0] != 0.0:
        counter.add("aggregate", H.size, 0)
    power = H
    for theta in coeffs[1:]:
        power = spmm(A, power, counter)
        if theta != 0.0:
            result = result + theta * power
            if counter is not None:
                counter.add("aggregate", 2 * H.size, 0)
    return result


def _system_matvec(form: str, alpha: float, a: float, A: SparseOperator,
                   x: np.ndarray, counter: OpCounter | None) -> np.ndarray:
    Ax = spmm(A, x, counter)[:, 0] if x.ndim == 1 else spmm(A, x, counter)
    if form == "autoregress":
        return (1.0 + alpha) * x - alpha * Ax
    if form == "ppnp":
        return x - (1.0 - alpha) * Ax
    if form == "arma":
        return x - a * Ax
    raise ValueError(f"unknown rational form {form!r}")


def rational_apply(form: str, A: SparseOperator, RHS: np.ndarray,
                   tol: float = 1e-10, alpha: float = 0.5, a: float = 0.5,
                   b: float = 1.0,
                   counter: OpCounter | None = None) -> tuple[np.ndarray, SolveReport]:
    """Solve the model's SPD system column by column and scale the result.

    autoregress: ((1+alpha) I - alpha A)^-1, prefactor 1
    ppnp:        (I - (1-alpha) A)^-1,       prefactor alpha
    arma:        (I - a A)^-1,               prefactor b
    The spectral radius of the sym-norm operator is at most 1, so each system
    is positive definite for the admissible parameter ranges.
    """
    if A.kind != "sym_norm":
        raise NotSymmetric(f"rational chain needs the sym_norm operator, got {A.kind!r}")
    RHS = np.asarray(RHS, dtype=float)
    squeeze = RHS.ndim == 1
    if squeeze:
        RHS = RHS[:, None]
    if RHS.shape[0] != A.n:
        raise ShapeError(f"RHS has {RHS.shape[0]} rows, operator is {A.n}x{A.n}")

    n = A.n
    max_iters = 10 * n
    X = np.zeros_like(RHS)
    total_iters = 0
    worst_rel = 0.0
    for c in range(RHS.shape[1]):
        rhs = RHS[:, c]
        norm_rhs = float(np.linalg.norm(rhs))
        if norm_rhs == 0.0:
            continue
        x = np.zeros(n)
        r = rhs.copy()
        p = r.copy()
        rs = float(r @ r)
        iters = 0
        while np.sqrt(rs) > tol * norm_rhs:
            if iters >= max_iters:
                report = SolveReport(total_iters + iters, np.sqrt(rs) / norm_rhs,
                                     tol, False)
                raise SolveFailed(
                    f"column {c} stalled at relative residual "
                    f"{np.sqrt(rs) / norm_rhs:.3e}", report)
            Ap = _system_matvec(form, alpha, a, A, p[:, None], counter)[:, 0]
            if counter is not None:
                counter.add("update_vertex", 5 * n, 0)
            step = rs / float(p @ Ap)
            x += step * p
            r -= step * Ap
            rs_new = float(r @ r)
            p = r + (rs_new / rs) * p
            rs = rs_new
            iters += 1
        total_iters += iters
        worst_rel = max(worst_rel, np.sqrt(rs) / norm_rhs)
        X[:, c] = x

    prefactor = {"autoregress": 1.0, "ppnp": alpha, "arma": b}[form]
    out = prefactor * X
    report = SolveReport(total_iters, worst_rel, tol, True)
    return (out[:, 0] if squeeze else out), report


def model_operator(g: Graph, spec: ModelSpec) -> SparseOperator:
    """The normalization variant the model's matrix chain multiplies with."""
    return normalize(g, spec.info.gl_operator)


def _linear_layer(g: Graph, A: SparseOperator, H: np.ndarray, spec: ModelSpec,
                  l: int, counter: OpCounter | None) -> np.ndarray:
    params = spec.layers[l]
    mid = spec.model_id
    if mid == "gcn":
        out = gemm(spmm(A, H, counter, l), params["W"], counter, l)
    elif mid == "sage_mean":
        # Mean over the closed neighborhood: D~^-1 (A~ H), then project.
        summed = spmm(A, H, counter, l)
        scaled = summed / (g.degrees + 1.0)[:, None]
        if counter is not None:
            counter.add("aggregate", summed.size, l)
        out = gemm(scaled, params["W"], counter, l)
    elif mid == "gin":
        mixed = spmm(A, H, counter, l) + (1.0 + spec.epsilon) * H
        if counter is not None:
            counter.add("update_vertex", 2 * H.size, l)
        out = mixed
        for d in range(spec.mlp_depth):
            out = gemm(out, params[f"W{d}"], counter, l)
            if d + 1 < spec.mlp_depth:
                out = np.maximum(out, 0.0)
    elif mid == "commnet":
        out = (gemm(H, params["W1"], counter, l)
               + gemm(spmm(A, H, counter, l), params["W2"], counter, l))
        if counter is not None:
            counter.add("update_vertex", out.size, l)
    elif mid == "vanilla_attn":
        scores = masked_gram(A, H, counter, l)
        out = gemm(spmm(scores, H, counter, l), params["W"], counter, l)
    elif mid == "edgeconv1":
        out = gemm(spmm(A, H, counter, l), params["W"], counter, l)
    else:
        raise AssertionError(mid)
    return apply_activation(spec.activations[l], out)


def gl_forward(g: Graph, X: np.ndarray, spec: ModelSpec,
               counter: OpCounter | None = None,
               return_report: bool = False):
    """Run the model's matrix chain.

    Linear models stack L rounds of (sparse op, GEMM, activation);
    polynomial and rational chains run exactly one iteration.
    """
    if "gl" not in spec.info.formulations:
        raise NoGlobalFormulation(f"{spec.model_id} has no whole-matrix form")
    H = np.asarray(X, dtype=float)
    if H.shape[0] != g.n:
        raise ShapeError(f"feature matrix has {H.shape[0]} rows, graph has {g.n}")
    report = None

    if spec.info.gl_type == "L":
        A = model_operator(g, spec)
        for l in range(spec.num_layers):
            H = _linear_layer(g, A, H, spec, l, counter)
    elif spec.info.gl_type == "P":
        A = model_operator(g, spec)
        mixed = poly_apply(spec.coeffs, A, H, counter)
        H = apply_activation(spec.activations[0],
                             gemm(mixed, spec.layers[0]["W"], counter, 0))
    else:
        A = model_operator(g, spec)
        rhs = gemm(H, spec.layers[0]["W"], counter, 0)
        form = {"autoregress": "autoregress", "ppnp": "ppnp",
                "arma_parwalks": "arma"}[spec.model_id]
        H, report = rational_apply(form, A, rhs, tol=spec.solve_tol,
                                   alpha=spec.alpha, a=spec.a, b=spec.b,
                                   counter=counter)
        H = apply_activation(spec.activations[0], H)

    if return_report:
        return H, report
    return H

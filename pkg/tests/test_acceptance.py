"""Acceptance gate: one test per criterion, pinned tolerances, one printed
pass/fail line each.  Run with ``pytest tests/test_acceptance.py -v -s``."""

import time

import numpy as np
import pytest

from conftest import random_features, random_graph
from gnnmeter.cli import main as cli_main
from gnnmeter.costs import comm_volume, log2_ceil, measure_depth, measure_work
from gnnmeter.generate import (
    complete_graph,
    erdos_renyi,
    path_graph,
    sbm_task,
    star_graph,
)
from gnnmeter.gl import gl_forward, masked_gram, poly_apply, rational_apply, spmm
from gnnmeter.graph import normalize, partition, sample_neighborhood
from gnnmeter.lc import lc_forward
from gnnmeter.models import DUAL_MODELS, make_spec
from gnnmeter.rng import rand_u64
from gnnmeter.sim import SYNC, StalenessConfig, run_async, run_async_training, run_sync
from gnnmeter.train import (
    Labels,
    finite_diff_grad,
    gcn_backward,
    gcn_forward_cached,
    softmax_xent,
    train_full_batch,
)


def report(num, name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {num} [{name}]: {status} {detail}")
    assert ok, f"criterion {num} ({name}) failed: {detail}"


def corpus():
    return [complete_graph(3), path_graph(5), path_graph(9), star_graph(6),
            star_graph(12), erdos_renyi(14, 4.0, seed=2),
            erdos_renyi(16, 5.0, seed=11)]


def test_criterion_1_lc_gl_equivalence():
    start = time.time()
    worst = 0.0
    count = 0
    per_model = 200 // len(DUAL_MODELS) + 1
    for mid in DUAL_MODELS:
        for case in range(per_model):
            key = case * 101 + hash(mid) % 977
            n = 4 + rand_u64(key, 1) % 29
            k = 1 + rand_u64(key, 2) % 8
            layers = 1 + rand_u64(key, 3) % 3
            g = random_graph(int(n), 3.0, seed=key % 61)
            widths = [int(k)] + [int(1 + rand_u64(key, 4, l) % 8)
                                 for l in range(layers)]
            spec = make_spec(mid, widths, seed=case, activation="relu",
                             mlp_depth=2, epsilon=0.3)
            X = random_features(g.n, int(k), seed=key + 1)
            a = lc_forward(g, X, spec)
            b = gl_forward(g, X, spec)
            scale = 1.0 + max(np.abs(a).max(), np.abs(b).max())
            worst = max(worst, float(np.abs(a - b).max() / scale))
            count += 1
    elapsed = time.time() - start
    report(1, "LC=GL equivalence",
           worst <= 1e-9 and count >= 200 and elapsed < 30.0,
           f"instances={count} worst_scaled_diff={worst:.2e} time={elapsed:.1f}s")


def test_criterion_2_dense_oracle_equivalence():
    start = time.time()
    worst = 0.0
    for g in corpus():
        H = random_features(g.n, 3, seed=g.n)
        for kind in ("raw", "self_loop", "sym_norm"):
            op = normalize(g, kind)
            worst = max(worst, float(np.abs(spmm(op, H) - op.to_dense() @ H).max()))
        mask = normalize(g, "raw")
        got = masked_gram(mask, H).to_dense()
        want = np.where(mask.to_dense() != 0, H @ H.T, 0.0)
        worst = max(worst, float(np.abs(got - want).max()))
        if not np.any(g.degrees == 0):
            op = normalize(g, "rw_norm")
            coeffs = [0.2, 1.0, -0.4, 0.6]
            dense = sum(c * np.linalg.matrix_power(op.to_dense(), s) @ H
                        for s, c in enumerate(coeffs))
            worst = max(worst, float(np.abs(poly_apply(coeffs, op, H) - dense).max()))
        op = normalize(g, "sym_norm")
        out, _ = rational_apply("ppnp", op, H, alpha=0.3, tol=1e-12)
        dense = 0.3 * np.linalg.solve(np.eye(g.n) - 0.7 * op.to_dense(), H)
        worst = max(worst, float(np.abs(out - dense).max()))
    elapsed = time.time() - start
    report(2, "dense-oracle equivalence", worst <= 1e-10 and elapsed < 10.0,
           f"worst_abs_diff={worst:.2e} time={elapsed:.1f}s")


def test_criterion_3_gradient_fidelity():
    worst = 0.0
    for case in range(50):
        seed = case * 13 + 1
        g = erdos_renyi(8, 3.0, seed=seed)
        X = random_features(8, 3, seed=seed + 1)
        labeled = tuple(sorted({int(rand_u64(seed, 9, i) % 8)
                                for i in range(5)} | {0, 1}))
        labels = Labels(labeled=labeled,
                        classes=tuple(int(rand_u64(seed, 10, v) % 2)
                                      for v in labeled),
                        num_classes=2)
        spec = make_spec("gcn", [3, 4, 2], seed=seed + 2,
                         activation="sigmoid", last_activation="none")
        cache = gcn_forward_cached(g, X, spec)
        _, dY = softmax_xent(cache.hidden[-1], labels)
        analytic = gcn_backward(cache, dY, g, spec)
        numeric = finite_diff_grad(g, X, labels, spec, h=1e-6)
        for l in range(2):
            a, n = analytic.weights[l]["W"], numeric.weights[l]["W"]
            scale = np.maximum(np.abs(n), 1e-6)
            worst = max(worst, float((np.abs(a - n) / scale).max()))
    report(3, "gradient fidelity", worst <= 1e-4,
           f"instances=50 max_rel_err={worst:.2e}")


def test_criterion_4_staleness_collapse():
    worst = 0.0
    for g in corpus():
        X = random_features(g.n, 3, seed=g.n + 1)
        spec = make_spec("gcn", [3, 3, 3], seed=2)
        for P in (1, 2, 3):
            part = partition(g, min(P, g.n), "hash")
            H_lc = lc_forward(g, X, spec)
            H_sync, _ = run_sync(g, part, X, spec)
            H_async, trace = run_async(g, part, X, spec, SYNC, 1)
            worst = max(worst,
                        float(np.abs(H_async - H_sync).max()),
                        float(np.abs(H_async - H_lc).max()))
            assert not trace.audit_staleness()

    g = erdos_renyi(12, 3.0, seed=5)
    X = random_features(12, 2, seed=6)
    spec = make_spec("gcn", [2, 2, 2], seed=1)
    violations = 0
    for case in range(100):
        part = partition(g, 1 + rand_u64(case, 1) % 4, "hash")
        stale = StalenessConfig(
            T_phi=rand_u64(case, 2) % 3,
            T_psi_local=rand_u64(case, 3) % 3,
            T_psi_remote=rand_u64(case, 4) % 3,
            L_phi=1 + rand_u64(case, 5) % 2,
            L_psi_local=1 + rand_u64(case, 6) % 2,
            L_psi_remote=1 + rand_u64(case, 7) % 2)
        _, trace = run_async(g, part, X, spec, stale, 1 + rand_u64(case, 8) % 3)
        violations += len(trace.audit_staleness())
    report(4, "staleness collapse", worst <= 1e-12 and violations == 0,
           f"max_abs_diff={worst:.2e} audit_violations={violations}/100 configs")


def test_criterion_5_exact_cost_reproduction():
    ok = True
    details = []
    for g, k in [(complete_graph(3), 3), (erdos_renyi(12, 4.0, seed=3), 5),
                 (star_graph(7), 2)]:
        spec = make_spec("gcn", [k, k], seed=1)
        X = random_features(g.n, k, seed=2)
        _, outputs = lc_forward(g, X, spec, with_outputs=True)
        work = measure_work(outputs)
        depth = measure_depth(outputs)
        nnz = int((g.degrees + 1).sum())
        agg_ok = work.layer_work(0, "aggregate") == nnz * k
        uv_ok = work.layer_work(0, "update_vertex") == g.n * k * k
        d_max = int(g.degrees.max()) + 1
        depth_ok = depth.layer_depth(0) == log2_ceil(d_max) + log2_ceil(k) + 1
        part = partition(g, min(3, g.n), "hash")
        from gnnmeter.graph import directed_cut_edges

        _, trace = run_sync(g, part, X, spec)
        comm_ok = (trace.comm_words == comm_volume(part, g, k, 1)
                   == k * directed_cut_edges(part, g))
        ok = ok and agg_ok and uv_ok and depth_ok and comm_ok
        details.append(f"n={g.n}:agg={agg_ok},uv={uv_ok},depth={depth_ok},comm={comm_ok}")
    report(5, "exact cost reproduction", ok, " ".join(details))


def test_criterion_6_sampling_explosion_bound():
    checked = 0
    violations = 0
    for case in range(1000):
        n = 5 + rand_u64(case, 1) % 28
        g = random_graph(int(n), 4.0, seed=case % 97)
        fanout = 1 + rand_u64(case, 2) % 4
        depth = 1 + rand_u64(case, 3) % 3
        targets = sorted({int(rand_u64(case, 4, i) % n) for i in range(3)})
        sub = sample_neighborhood(g, targets, int(fanout), int(depth), seed=case)
        bound = sum(fanout ** l for l in range(depth + 1))
        for t in sub.targets:
            checked += 1
            if len(sub.reach[t]) > bound:
                violations += 1
    report(6, "sampling explosion bound", violations == 0 and checked >= 1000,
           f"targets_checked={checked} violations={violations}")


def test_criterion_7_convergence_sanity():
    start = time.time()
    g, X, labels = sbm_task(n=60, communities=2, p_in=0.5, p_out=0.02, k=8,
                            seed=0)
    sync_res = train_full_batch(g, X, labels, widths=[8, 8, 2], epochs=200,
                                lr=0.1, seed=1)
    sync_ok = sync_res.final_accuracy >= 0.90

    spec = make_spec("gcn", [8, 8, 2], seed=1, last_activation="none")
    part = partition(g, 3, "hash")
    stale = StalenessConfig(T_psi_remote=1, T_grad_remote=1)
    async_res, _ = run_async_training(g, part, X, labels, spec, stale,
                                      epochs=300, lr=0.1)
    sync300 = train_full_batch(g, X, labels, widths=[8, 8, 2], epochs=300,
                               lr=0.1, seed=1)
    gap = abs(async_res.final_accuracy - sync300.final_accuracy)
    elapsed = time.time() - start
    report(7, "convergence sanity",
           sync_ok and gap <= 0.05 and elapsed < 60.0,
           f"sync_acc={sync_res.final_accuracy:.3f} "
           f"async_acc={async_res.final_accuracy:.3f} gap={gap:.3f} "
           f"time={elapsed:.1f}s")


def test_criterion_8_determinism(tmp_path):
    outputs = []
    for tag in ("a", "b"):
        base = tmp_path / tag
        blobs = []
        rc = cli_main(["simulate", "--gen", "er:14:4", "--mode", "async",
                       "--t-psi-remote", "1", "--iterations", "2",
                       "--partitions", "3", "--seed", "5",
                       "--out-dir", str(base / "sim")])
        assert rc == 0
        blobs.append((base / "sim" / "trace.jsonl").read_bytes())
        blobs.append((base / "sim" / "metrics.json").read_bytes())
        rc = cli_main(["train", "--gen", "sbm:30:2", "--k", "8",
                       "--epochs", "10", "--seed", "3",
                       "--out-dir", str(base / "train")])
        assert rc == 0
        blobs.append((base / "train" / "curve.csv").read_bytes())
        rc = cli_main(["bench", "--model", "gcn", "--sizes", "32,48,64",
                       "--k", "3", "--seed", "2",
                       "--out-dir", str(base / "bench")])
        assert rc == 0
        blobs.append((base / "bench" / "bench.csv").read_bytes())
        blobs.append((base / "bench" / "fit.json").read_bytes())
        gen_path = base / "g.el"
        rc = cli_main(["gen", "--gen", "sbm:20:2", "--out", str(gen_path)])
        assert rc == 0
        blobs.append(gen_path.read_bytes())
        blobs.append(gen_path.with_suffix(".labels").read_bytes())
        outputs.append(blobs)
    identical = all(a == b for a, b in zip(outputs[0], outputs[1]))
    report(8, "determinism", identical,
           f"artifacts_compared={len(outputs[0])} byte_identical={identical}")

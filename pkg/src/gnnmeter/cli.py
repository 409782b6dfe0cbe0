"""Command-line entry point.

Subcommands: verify (vertex-wise vs matrix execution), simulate (partition
simulator), gradcheck (analytic vs finite-difference gradients), bench
(counter reports and asymptotic fits), train (full-batch or stale-parallel),
gen (synthetic datasets).

Exit codes: 0 pass, 1 usage/config error, 2 verification failure,
3 capability error.  Outputs are byte-stable for a fixed config and seed:
no timestamps are written.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .costs import check_asymptotic, measure_depth, measure_work
from .errors import (
    ConfigError,
    GnnMeterError,
    InvalidPartCount,
    InvalidStaleness,
    NoGlobalFormulation,
    NoLocalFormulation,
)
from .generate import (
    from_generator_string,
    random_features,
    read_edge_list,
    read_labels,
    sbm_features,
    write_edge_list,
    write_labels,
)
from .gl import gl_forward
from .graph import partition
from .lc import lc_forward
from .models import MODELS, make_spec
from .sim import CostParams, StalenessConfig, pipeline_metrics, run_async, run_async_training, run_sync
from .train import Labels, finite_diff_grad, gcn_backward, gcn_forward_cached, softmax_xent, train_full_batch

EXIT_OK, EXIT_CONFIG, EXIT_MISMATCH, EXIT_CAPABILITY = 0, 1, 2, 3


def _load_graph(args):
    if getattr(args, "graph", None):
        return read_edge_list(args.graph), None
    if getattr(args, "gen", None):
        return from_generator_string(args.gen, seed=args.seed)
    raise ConfigError("pass --graph FILE or --gen SPEC")


def _merge_config(args, parser):
    """Values from --config JSON fill any flag the user left at its default."""
    if not getattr(args, "config", None):
        return args
    data = json.loads(Path(args.config).read_text())
    for key, value in data.items():
        name = key.replace("-", "_")
        if not hasattr(args, name):
            raise ConfigError(f"unknown config field {key!r}")
        if parser.get_default(name) == getattr(args, name):
            setattr(args, name, value)
    return args


def _staleness(args) -> StalenessConfig:
    cfg = StalenessConfig(
        T_phi=args.t_phi, T_psi_local=args.t_psi_local,
        T_psi_remote=args.t_psi_remote, L_phi=args.l_phi,
        L_psi_local=args.l_psi_local, L_psi_remote=args.l_psi_remote,
        T_grad_local=args.t_grad_local, T_grad_remote=args.t_grad_remote,
        L_grad_local=args.l_grad_local, L_grad_remote=args.l_grad_remote)
    cfg.validate()
    return cfg


def _costs(args) -> CostParams:
    c = CostParams(cost_madd=args.cost_madd, cost_word=args.cost_word,
                   cost_barrier=args.cost_barrier)
    c.validate()
    return c


def cmd_verify(args) -> int:
    g, _ = _load_graph(args)
    widths = [args.k] * (args.layers + 1)
    info = MODELS.get(args.model)
    if info is None:
        raise ConfigError(f"unknown model {args.model!r}")
    if info.model_class == "GL":
        widths = [args.k, args.k]
    spec = make_spec(args.model, widths, seed=args.seed, activation="relu")
    try:
        a = lc_forward(g, random_features(g.n, args.k, args.seed + 1), spec)
        b = gl_forward(g, random_features(g.n, args.k, args.seed + 1), spec)
    except NoGlobalFormulation as exc:
        print(f"capability: {exc}")
        return EXIT_CAPABILITY
    except NoLocalFormulation as exc:
        print(f"capability: {exc}")
        return EXIT_CAPABILITY
    scale = 1.0 + max(np.abs(a).max(), np.abs(b).max())
    diff = float(np.abs(a - b).max())
    print(f"model={args.model} n={g.n} max_abs_diff={diff:.3e} "
          f"tolerance={1e-9 * scale:.3e}")
    return EXIT_OK if diff <= 1e-9 * scale else EXIT_MISMATCH


def cmd_simulate(args) -> int:
    if args.iterations < 1:
        raise ConfigError("iterations must be >= 1")
    g, _ = _load_graph(args)
    spec = make_spec(args.model, [args.k] * (args.layers + 1), seed=args.seed)
    part = partition(g, args.partitions, args.strategy)
    costs = _costs(args)
    stale = _staleness(args)
    if args.mode == "sync":
        _, trace = run_sync(g, part, random_features(g.n, args.k, args.seed + 1),
                            spec, costs, iterations=args.iterations)
    else:
        _, trace = run_async(g, part, random_features(g.n, args.k, args.seed + 1),
                             spec, stale, args.iterations, costs)
    violations = trace.audit_staleness()
    if violations:
        print(f"staleness audit FAILED: {len(violations)} violations")
        return EXIT_MISMATCH
    metrics = pipeline_metrics(trace)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trace.jsonl").write_text(trace.to_jsonl() + "\n")
    (out / "metrics.json").write_text(json.dumps(metrics, sort_keys=True,
                                                 indent=2) + "\n")
    print(f"makespan={metrics['makespan']} comm_words={metrics['comm_words']} "
          f"barriers={metrics['barrier_count']}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    if args.layers == 0:
        print("warning: zero-layer model, nothing to check (vacuous pass)")
        return EXIT_OK
    from .generate import erdos_renyi
    from .rng import rand_u64

    worst = 0.0
    for case in range(args.instances):
        seed = args.seed + case * 7
        g = erdos_renyi(8, 3.0, seed=seed)
        X = random_features(8, 3, seed + 1)
        labeled = tuple(sorted({int(rand_u64(seed, 9, i) % 8) for i in range(5)} | {0, 1}))
        labels = Labels(labeled=labeled,
                        classes=tuple(int(rand_u64(seed, 10, v) % 2) for v in labeled),
                        num_classes=2)
        widths = [3] + [4] * (args.layers - 1) + [2]
        spec = make_spec("gcn", widths, seed=seed + 2, activation="sigmoid",
                         last_activation="none")
        cache = gcn_forward_cached(g, X, spec)
        _, dY = softmax_xent(cache.hidden[-1], labels)
        analytic = gcn_backward(cache, dY, g, spec)
        if args.inject_sign_flip:
            analytic.weights[0]["W"] = -analytic.weights[0]["W"]
        numeric = finite_diff_grad(g, X, labels, spec, h=1e-6)
        for l in range(spec.num_layers):
            a, n = analytic.weights[l]["W"], numeric.weights[l]["W"]
            scale = np.maximum(np.abs(n), 1e-6)
            worst = max(worst, float((np.abs(a - n) / scale).max()))
    print(f"instances={args.instances} max_relative_error={worst:.3e}")
    return EXIT_OK if worst <= 1e-4 else EXIT_MISMATCH


def cmd_bench(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",")] if args.sizes else [64]
    rows = []
    points = []
    from .costs import OpCounter, comm_volume
    from .generate import erdos_renyi

    info = MODELS.get(args.model)
    if info is None:
        raise ConfigError(f"unknown model {args.model!r}")
    lc_capable = "lc" in info.formulations

    for n in sizes:
        g = erdos_renyi(n, args.degree, seed=args.seed)
        widths = [args.k] * (args.layers + 1) if lc_capable else [args.k, args.k]
        spec = make_spec(args.model, widths, seed=args.seed,
                         poly_order=args.poly_order)
        X = random_features(g.n, args.k, args.seed + 1)
        part = partition(g, min(args.partitions, g.n), args.strategy)
        comm = comm_volume(part, g, args.k, args.layers)

        def row(kernel, work, depth=0, comm_words=0):
            return {"n": g.n, "m": g.m, "k": args.k, "L": args.layers,
                    "model": args.model, "kernel": kernel, "work": work,
                    "depth": depth, "comm": comm_words}

        if lc_capable:
            _, outputs = lc_forward(g, X, spec, with_outputs=True)
            work = measure_work(outputs)
            depth = measure_depth(outputs)
            for kernel in ("scatter", "update_edge", "aggregate", "update_vertex"):
                rows.append(row(kernel,
                                work.layer_work(0, kernel) * args.layers,
                                depth.layer_depth(0, kernel),
                                comm if kernel == "scatter" else 0))
            meta = {"n": g.n, "nnz": int((g.degrees + 1).sum()), "k": args.k,
                    "L": args.layers, "K": 1}
            points.append((meta, work))
        else:
            # Matrix-only chains: report counter tallies plus the SpMM call
            # count (polynomial chains issue exactly T of them).
            counter = OpCounter()
            gl_forward(g, X, spec, counter=counter)
            work = measure_work(counter)
            for kernel in ("update_edge", "aggregate", "update_vertex"):
                rows.append(row(kernel, work.layer_work(0, kernel)))
            rows.append(row("spmm", counter.spmm_calls))

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "bench.csv").open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows to {out / 'bench.csv'}")

    if len(sizes) >= 3 and points:
        fit = check_asymptotic(points, args.model)
        (out / "fit.json").write_text(json.dumps({
            "terms": list(fit.terms),
            "coefficients": list(fit.coefficients),
            "residual": fit.residual,
            "flagged": fit.flagged,
        }, sort_keys=True, indent=2) + "\n")
        print(f"fit residual={fit.residual:.3e} flagged={fit.flagged}")
        if fit.flagged:
            return EXIT_MISMATCH
    return EXIT_OK


def cmd_train(args) -> int:
    if args.epochs < 1:
        raise ConfigError("epochs must be >= 1")
    g, comm = _load_graph(args)
    if args.labels:
        labels = read_labels(args.labels)
    elif comm is not None:
        labels = Labels(labeled=tuple(range(g.n)),
                        classes=tuple(int(c) for c in comm),
                        num_classes=int(comm.max()) + 1)
    else:
        raise ConfigError("pass --labels FILE or use an sbm generator")
    if comm is not None:
        X = sbm_features(comm, args.k, seed=args.seed)
    else:
        X = random_features(g.n, args.k, args.seed)

    widths = [args.k] + [args.hidden] * (args.layers - 1) + [labels.num_classes]
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.mode == "full":
        result = train_full_batch(g, X, labels, widths=widths,
                                  epochs=args.epochs, lr=args.lr,
                                  seed=args.seed)
    else:
        spec = make_spec("gcn", widths, seed=args.seed, last_activation="none")
        part = partition(g, args.partitions, args.strategy)
        result, trace = run_async_training(g, part, X, labels, spec,
                                           _staleness(args), args.epochs,
                                           args.lr, _costs(args))
        metrics = pipeline_metrics(trace)
        (out / "metrics.json").write_text(json.dumps(metrics, sort_keys=True,
                                                     indent=2) + "\n")
    with (out / "curve.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss", "train_acc"])
        for epoch, loss, acc in result.curve:
            writer.writerow([epoch, repr(loss), repr(acc)])
    final = result.curve[-1]
    print(f"epochs={args.epochs} final_loss={final[1]:.6f} final_acc={final[2]:.4f}")
    return EXIT_OK


def cmd_gen(args) -> int:
    g, comm = _load_graph(args)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_edge_list(g, out)
    print(f"wrote {out} (n={g.n}, m={g.m})")
    if comm is not None:
        labels = Labels(labeled=tuple(range(g.n)),
                        classes=tuple(int(c) for c in comm),
                        num_classes=int(comm.max()) + 1)
        labels_path = out.with_suffix(".labels")
        write_labels(labels, labels_path)
        print(f"wrote {labels_path}")
    return EXIT_OK


def _add_common(sub, *, graph=True):
    sub.add_argument("--config", help="JSON config file; flags override")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--out-dir", default="out")
    if graph:
        sub.add_argument("--graph", help="edge-list file")
        sub.add_argument("--gen", help="generator spec, e.g. er:64:8")


def _add_model(sub):
    sub.add_argument("--model", default="gcn", help="model id")
    sub.add_argument("--k", type=int, default=4, help="feature width")
    sub.add_argument("--layers", type=int, default=2)


def _add_parallel(sub):
    sub.add_argument("--partitions", type=int, default=2)
    sub.add_argument("--strategy", default="hash",
                     choices=("hash", "range", "greedy_balance"))
    sub.add_argument("--cost-madd", type=float, default=1.0)
    sub.add_argument("--cost-word", type=float, default=1.0)
    sub.add_argument("--cost-barrier", type=float, default=1.0)
    for name, default in [("t-phi", 0), ("t-psi-local", 0), ("t-psi-remote", 0),
                          ("t-grad-local", 0), ("t-grad-remote", 0)]:
        sub.add_argument(f"--{name}", type=int, default=default)
    for name in ("l-phi", "l-psi-local", "l-psi-remote", "l-grad-local",
                 "l-grad-remote"):
        sub.add_argument(f"--{name}", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gnnmeter",
        description="GNN execution engine with cost metering and a "
                    "partition-parallel simulator")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("verify", help="compare vertex-wise and matrix execution")
    _add_common(p)
    _add_model(p)
    p.set_defaults(func=cmd_verify)

    p = subs.add_parser("simulate", help="run the partition simulator")
    _add_common(p)
    _add_model(p)
    _add_parallel(p)
    p.add_argument("--mode", choices=("sync", "async"), default="sync")
    p.add_argument("--iterations", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = subs.add_parser("gradcheck", help="analytic vs finite-difference gradients")
    _add_common(p, graph=False)
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--inject-sign-flip", action="store_true",
                   help="test hook: corrupt the gradient to prove detection")
    p.set_defaults(func=cmd_gradcheck)

    p = subs.add_parser("bench", help="counter reports and asymptotic fits")
    _add_common(p, graph=False)
    _add_model(p)
    p.add_argument("--sizes", help="comma-separated vertex counts")
    p.add_argument("--degree", type=float, default=8.0)
    p.add_argument("--partitions", type=int, default=2)
    p.add_argument("--strategy", default="hash")
    p.add_argument("--poly-order", type=int, default=2,
                   help="operator power T for polynomial chains")
    p.set_defaults(func=cmd_bench)

    p = subs.add_parser("train", help="full-batch or stale-parallel training")
    _add_common(p)
    _add_model(p)
    _add_parallel(p)
    p.add_argument("--labels", help="labels file")
    p.add_argument("--hidden", type=int, default=8)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--mode", choices=("full", "async"), default="full")
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("gen", help="write a synthetic dataset")
    _add_common(p)
    p.add_argument("--out", required=True, help="edge-list output path")
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _merge_config(args, parser)
        return args.func(args)
    except (ConfigError, InvalidStaleness, InvalidPartCount) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GnnMeterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH


if __name__ == "__main__":
    sys.exit(main())

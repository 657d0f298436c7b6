"""Command-line front end.

Subcommands: simulate | fit | predict | evaluate | gridsearch | graph.
Exit codes: 0 success, 1 usage error, 2 data/config error, 3 numerical
failure. Every run writes its outputs atomically (temp file + rename) and
drops a manifest (resolved config, config hash, seed, versions, timings) next
to the primary output, so any run can be reproduced from the manifest alone.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import secrets
import sys
import time

import numpy as np

from . import __version__
from . import dataio, figures
from .data import NetworkTopology
from .errors import (
    ConstantColumn,
    DataError,
    DegenerateGeometry,
    GenerationFailed,
    GridExhausted,
    InsufficientData,
    InsufficientRank,
    InvalidFormat,
    InvalidInput,
    ShapeMismatch,
    UnstableSystem,
)
from .estimator import FitSettings, fit, load_model, model_to_text
from .evaluate import evaluate_model, predict_one_step, to_original_units
from .graph import build_graph, dlv_cross_correlation, export_graph, per_dlv_r2
from .selection import GridSpec, SplitSpec, grid_search
from .simulate import generate_system, simulate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

DATA_ERRORS = (DataError, ConstantColumn, InsufficientData, InvalidFormat, InvalidInput,
               FileNotFoundError, IsADirectoryError, PermissionError, json.JSONDecodeError)
NUMERIC_ERRORS = (InsufficientRank, DegenerateGeometry, GenerationFailed, UnstableSystem,
                  GridExhausted, ShapeMismatch, np.linalg.LinAlgError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _fmt_float(x):
    return "" if x is None or (isinstance(x, float) and np.isnan(x)) else repr(float(x))


def _write_text_atomic(path, text):
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _check_seed(seed):
    if seed is None:
        seed = secrets.randbits(64)
        print(f"seed: {seed}")
    if not 0 <= int(seed) < 2**64:
        raise InvalidInput(f"seed must be an unsigned 64-bit value, got {seed}")
    return int(seed)


def _write_manifest(primary_out, command, config, seed, outputs, started, elapsed):
    canonical = json.dumps(config, sort_keys=True)
    manifest = {
        "command": command,
        "config": config,
        "config_sha256": hashlib.sha256(canonical.encode()).hexdigest(),
        "seed": seed,
        "versions": {
            "netlavarx": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
        "started_unix": started,
        "elapsed_s": elapsed,
        "outputs": [str(p) for p in outputs],
    }
    _write_text_atomic(f"{primary_out}.manifest.json", json.dumps(manifest, indent=1) + "\n")


def _int_list(text, n_nodes, flag):
    vals = [int(v) for v in str(text).split(",") if v.strip() != ""]
    if len(vals) == 1:
        vals = vals * n_nodes
    if len(vals) != n_nodes:
        raise InvalidInput(f"{flag} needs 1 or {n_nodes} comma-separated values, got {len(vals)}")
    return vals


def _candidates(text):
    """Parse '1,2,5' or '1:4' (inclusive range) into a sorted candidate list."""
    text = str(text).strip()
    if ":" in text:
        lo, hi = text.split(":")
        vals = list(range(int(lo), int(hi) + 1))
    else:
        vals = [int(v) for v in text.split(",") if v.strip() != ""]
    if not vals:
        raise InvalidInput("empty candidate list")
    return sorted(set(vals))


def _metrics_csv(report):
    lines = ["scope,node,variable,r2,corr,rmse,mae"]
    for scope, node, var, r2, corr, rmse, mae in report.table_rows():
        lines.append(f"{scope},{node},{var},{_fmt_float(r2)},{_fmt_float(corr)},{_fmt_float(rmse)},{_fmt_float(mae)}")
    return "\n".join(lines) + "\n"


def _print_report(report):
    print(f"{'node':<14}{'R2':>10}{'Corr':>10}{'RMSE':>10}{'MAE':>10}")
    for node, vals in report.per_node.items():
        print(f"{node:<14}{vals['r2']:>10.4f}{vals['corr']:>10.4f}{vals['rmse']:>10.4f}{vals['mae']:>10.4f}")
    p = report.pooled
    print(f"{'pooled':<14}{p['r2']:>10.4f}{p['corr']:>10.4f}{p['rmse']:>10.4f}{p['mae']:>10.4f}")
    print("(unweighted means over columns; standardized scale unless --original-units)")


def _truth_doc(system, seed, spectral_target):
    nodes = []
    for i in range(system.topology.n_nodes):
        nodes.append(
            {
                "loadings": dataio.encode_matrix(system.loadings[i]),
                "static_loadings": dataio.encode_matrix(system.static_loadings[i]),
                "ar": [dataio.encode_matrix(b) for b in system.ar_blocks[i]],
                "input": [dataio.encode_matrix(b) for b in system.input_blocks[i]],
                "cross": {str(j): [dataio.encode_matrix(b) for b in blocks] for j, blocks in sorted(system.cross_blocks[i].items())},
                "dlv_noise_std": system.dlv_noise_std[i],
                "static_noise_std": system.static_noise_std[i],
            }
        )
    return {
        "format": "netlavarx-truth-v1",
        "seed": seed,
        "spectral_target": spectral_target,
        "topology": dataio.topology_to_doc(system.topology),
        "nodes": nodes,
    }


def _partition_doc(topology):
    nodes = []
    for i, name in enumerate(topology.node_names):
        nodes.append(
            {
                "name": name,
                "outputs": [f"{name}.y{k + 1}" for k in range(topology.output_dims[i])],
                "inputs": [f"{name}.u{k + 1}" for k in range(topology.input_dims[i])],
                "neighbors": [topology.node_names[j] for j in topology.neighbors[i]],
                "l": topology.n_dlvs[i],
                "s": topology.ar_orders[i],
            }
        )
    return {"nodes": nodes}


def cmd_simulate(args):
    started = time.time()
    seed = _check_seed(args.seed)
    p = [int(v) for v in args.p.split(",")]
    M = len(p)
    l = _int_list(args.l, M, "--l")
    s = _int_list(args.s, M, "--s")
    m = _int_list(args.m, M, "--m")
    names = [f"N{i + 1}" for i in range(M)]
    if args.neighbors == "full":
        topology = NetworkTopology.fully_connected(names, p, m, l, s)
    elif args.neighbors == "none":
        topology = NetworkTopology(names, p, m, l, s, tuple(() for _ in range(M)))
    else:
        raise InvalidInput(f"--neighbors must be 'full' or 'none', got {args.neighbors!r}")
    system = generate_system(
        topology,
        seed=seed,
        spectral_target=args.spectral_radius,
        dlv_noise_std=args.dlv_noise,
        static_noise_std=args.static_noise,
        orthogonal=args.orthogonal_loadings,
    )
    trajectory = simulate(system, args.samples, inputs=args.input_policy, seed=seed, input_std=args.input_std)
    from .data import TimeSeriesDataset

    dataset = TimeSeriesDataset.from_arrays(list(trajectory.outputs), list(trajectory.inputs), names)
    tmp = f"{args.out}.tmp.{os.getpid()}"
    dataio.write_dataset_csv(tmp, dataset)
    os.replace(tmp, args.out)
    truth_path = args.truth or f"{args.out}.truth.json"
    _write_text_atomic(truth_path, json.dumps(_truth_doc(system, seed, args.spectral_radius), indent=1) + "\n")
    partition_path = args.partition_out or _sibling(args.out, "_partition.json")
    _write_text_atomic(partition_path, json.dumps(_partition_doc(topology), indent=2) + "\n")
    config = _resolved_config(args)
    config["seed"] = seed
    _write_manifest(args.out, "simulate", config, seed, [args.out, truth_path, partition_path], started, time.time() - started)
    print(f"wrote {args.out} ({args.samples} samples, {M} nodes), truth sidecar {truth_path}, partition {partition_path}")
    return EXIT_OK


def _sibling(path, suffix):
    stem, dot, _ = str(path).rpartition(".")
    return (stem if dot else str(path)) + suffix


def _load_fit_inputs(args):
    partition = dataio.load_partition(args.partition)
    dataset = dataio.load_dataset(args.data, partition)
    l_over = _int_list(args.l, partition.n_nodes, "--l") if args.l else None
    s_over = _int_list(args.s, partition.n_nodes, "--s") if args.s else None
    return dataset, partition, l_over, s_over


def cmd_fit(args):
    started = time.time()
    dataset, partition, l_over, s_over = _load_fit_inputs(args)
    topology = partition.topology(l_over, s_over)
    settings = FitSettings(max_iter=args.max_iter, tol=args.tol, restarts=args.restarts,
                           restart_seed=args.seed if args.seed is not None else 0)
    model = fit(dataset, topology, settings)
    _write_text_atomic(args.out, model_to_text(model))
    diag = model.diagnostics
    config = _resolved_config(args)
    _write_manifest(args.out, "fit", config, args.seed, [args.out], started, time.time() - started)
    status = "converged" if diag.converged else "NOT converged"
    print(f"fit {status} after {diag.iterations} sweeps (subspace change {diag.subspace_change:.3e})")
    tm = diag.training_metrics or {}
    if tm:
        print("training (standardized): " + "  ".join(f"{k}={tm[k]:.6f}" for k in ("r2", "corr", "rmse", "mae")))
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_predict(args):
    started = time.time()
    model = load_model(args.model)
    partition = dataio.load_partition(args.partition) if args.partition else None
    if partition is not None:
        dataset = dataio.load_dataset(args.data, partition)
    else:
        dataset = _dataset_from_model_layout(args.data, model)
    result = predict_one_step(model, dataset)
    if args.original_units:
        result = to_original_units(model, result)
    names, blocks = [], []
    for i, node in enumerate(result.node_names):
        for k in range(result.outputs_predicted[i].shape[1]):
            names.append(f"{dataset.output_names[i][k]}.pred")
        blocks.append(result.outputs_predicted[i])
    matrix = np.hstack(blocks)
    index = range(result.sample_offset + 1, result.sample_offset + 1 + matrix.shape[0])
    tmp = f"{args.out}.tmp.{os.getpid()}"
    dataio.write_wide_csv(tmp, names, list(index), matrix)
    os.replace(tmp, args.out)
    config = _resolved_config(args)
    _write_manifest(args.out, "predict", config, args.seed, [args.out], started, time.time() - started)
    print(f"wrote {args.out} ({matrix.shape[0]} predicted rows, first {result.sample_offset} rows consumed as lag context)")
    return EXIT_OK


def _dataset_from_model_layout(csv_path, model):
    """Assemble a dataset using the column layout implied by the model topology."""
    topo = model.topology
    partition = dataio.PartitionConfig(
        node_names=topo.node_names,
        output_columns=tuple(tuple(f"{n}.y{k + 1}" for k in range(topo.output_dims[i])) for i, n in enumerate(topo.node_names)),
        input_columns=tuple(tuple(f"{n}.u{k + 1}" for k in range(topo.input_dims[i])) for i, n in enumerate(topo.node_names)),
        neighbor_names=tuple(None for _ in topo.node_names),
        n_dlvs=topo.n_dlvs,
        ar_orders=topo.ar_orders,
    )
    return dataio.load_dataset(csv_path, partition)


def cmd_evaluate(args):
    started = time.time()
    model = load_model(args.model)
    if args.partition:
        dataset = dataio.load_dataset(args.data, dataio.load_partition(args.partition))
    else:
        dataset = _dataset_from_model_layout(args.data, model)
    result, report = evaluate_model(model, dataset, original_units=args.original_units)
    _write_text_atomic(args.out, _metrics_csv(report))
    outputs = [args.out]
    if not args.no_figures:
        fig_metrics = _sibling(args.out, "_metrics.png")
        fig_traces = _sibling(args.out, "_traces.png")
        figures.metrics_figure(report, fig_metrics)
        figures.trace_figure(result, fig_traces)
        outputs += [fig_metrics, fig_traces]
    config = _resolved_config(args)
    _write_manifest(args.out, "evaluate", config, args.seed, outputs, started, time.time() - started)
    _print_report(report)
    print(f"wrote {', '.join(outputs)}")
    return EXIT_OK


def cmd_gridsearch(args):
    started = time.time()
    partition = dataio.load_partition(args.partition)
    dataset = dataio.load_dataset(args.data, partition)
    # any l/s in the partition file are placeholders here; cells overwrite them
    template = partition.topology([1] * partition.n_nodes, [1] * partition.n_nodes)
    s_cands = _candidates(args.s_grid) if args.s_grid else list(range(1, 9))
    if args.l_grid:
        l_cands = _candidates(args.l_grid)
        if args.per_node:
            grid = GridSpec(
                dlv_grid=tuple([tuple(l_cands)] * partition.n_nodes),
                order_grid=tuple([tuple(s_cands)] * partition.n_nodes),
                metric=args.metric,
            )
        else:
            grid = GridSpec.shared(l_cands, s_cands, partition.n_nodes, metric=args.metric)
    else:
        # default per-node range: dimension-reducing latent counts capped at 10
        dlv_grid = tuple(
            tuple(range(1, max(min(len(cols) - 1, 10), 1) + 1))
            for cols in partition.output_columns
        )
        grid = GridSpec(
            dlv_grid=dlv_grid,
            order_grid=tuple([tuple(s_cands)] * partition.n_nodes),
            metric=args.metric,
            shared_orders=not args.per_node,
        )
    split_spec = SplitSpec(train=args.train_frac, validation=args.val_frac, test=args.test_frac)
    settings = FitSettings(max_iter=args.max_iter, tol=args.tol)
    result = grid_search(dataset, template, grid, settings=settings, split_spec=split_spec, workers=args.workers)
    lines = ["cell,l,s,r2,corr,rmse,mae,parameters,selected,error"]
    for c in result.cells:
        vals = c.metrics or {}
        lines.append(
            ",".join(
                [
                    str(c.index),
                    "\"" + ",".join(map(str, c.n_dlvs)) + "\"",
                    "\"" + ",".join(map(str, c.ar_orders)) + "\"",
                    _fmt_float(vals.get("r2")),
                    _fmt_float(vals.get("corr")),
                    _fmt_float(vals.get("rmse")),
                    _fmt_float(vals.get("mae")),
                    str(c.parameter_count),
                    "1" if c.selected else "0",
                    (c.error or "").replace(",", ";"),
                ]
            )
        )
    _write_text_atomic(args.out, "\n".join(lines) + "\n")
    outputs = [args.out]
    if args.model_out:
        _write_text_atomic(args.model_out, model_to_text(result.model))
        outputs.append(args.model_out)
    if not args.no_figures:
        fig_path = _sibling(args.out, "_grid.png")
        if figures.grid_figure(result, fig_path):
            outputs.append(fig_path)
    config = _resolved_config(args)
    _write_manifest(args.out, "gridsearch", config, args.seed, outputs, started, time.time() - started)
    best = next(c for c in result.cells if c.selected)
    print(f"selected cell {best.index}: l={list(best.n_dlvs)} s={list(best.ar_orders)} "
          f"(validation {result.metric}={best.metrics[result.metric]:.6f})")
    print("test (refit on train+validation): " + "  ".join(f"{k}={result.test_metrics[k]:.6f}" for k in ("r2", "corr", "rmse", "mae")))
    print(f"wrote {', '.join(outputs)}")
    return EXIT_OK


def cmd_graph(args):
    started = time.time()
    model = load_model(args.model)
    if args.partition:
        dataset = dataio.load_dataset(args.data, dataio.load_partition(args.partition))
    else:
        dataset = _dataset_from_model_layout(args.data, model)
    corr = dlv_cross_correlation(model, dataset, max_lag=args.max_lag)
    r2 = per_dlv_r2(model, dataset)
    g = build_graph(corr, r2, model.topology, threshold=args.threshold)
    text = export_graph(g, fmt=args.format)
    if args.out:
        _write_text_atomic(args.out, text)
        config = _resolved_config(args)
        _write_manifest(args.out, "graph", config, args.seed, [args.out], started, time.time() - started)
        print(f"wrote {args.out} ({len(g.vertices)} latent variables, {len(g.edges)} edges)")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _resolved_config(args):
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def build_parser():
    parser = _Parser(prog="netlavarx", description="Networked latent dynamic system identification toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a ground-truth system and write a trajectory CSV")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--p", required=True, help="per-node output dimensions, e.g. 8,8,6")
    p.add_argument("--l", required=True, help="per-node latent counts (single value broadcasts)")
    p.add_argument("--s", required=True, help="per-node orders (single value broadcasts)")
    p.add_argument("--m", default="0", help="per-node input dimensions (default 0)")
    p.add_argument("--neighbors", default="full", help="'full' (default) or 'none'")
    p.add_argument("--spectral-radius", type=float, default=0.9)
    p.add_argument("--dlv-noise", type=float, default=1.0)
    p.add_argument("--static-noise", type=float, default=0.05)
    p.add_argument("--input-policy", default="zero", choices=["zero", "white"])
    p.add_argument("--input-std", type=float, default=1.0)
    p.add_argument("--orthogonal-loadings", action="store_true")
    p.add_argument("--truth", default=None, help="ground-truth sidecar path (default: <out>.truth.json)")
    p.add_argument("--partition-out", default=None, help="partition config path (default: <out stem>_partition.json)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a model on a CSV + partition config")
    p.add_argument("--data", required=True)
    p.add_argument("--partition", required=True)
    p.add_argument("--l", default=None, help="override per-node latent counts, e.g. 2,2,1")
    p.add_argument("--s", default=None, help="override per-node orders")
    p.add_argument("--out", required=True, help="model output path (.nlx)")
    p.add_argument("--max-iter", type=int, default=300)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--restarts", type=int, default=0)
    p.add_argument("--seed", type=int, default=None, help="seed for random restarts")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="one-step predictions from a fitted model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--partition", default=None, help="defaults to the layout stored in the model")
    p.add_argument("--out", required=True)
    p.add_argument("--original-units", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score one-step predictions; writes a metrics table and figures")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--partition", default=None)
    p.add_argument("--out", required=True, help="metrics CSV path")
    p.add_argument("--original-units", action="store_true")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gridsearch", help="grid search over latent counts and orders")
    p.add_argument("--data", required=True)
    p.add_argument("--partition", required=True)
    p.add_argument("--l-grid", default=None,
                   help="candidates: '1:4' or '1,2,5' (default: per-node 1..min(p-1, 10))")
    p.add_argument("--s-grid", default=None, help="order candidates (default: 1:8)")
    p.add_argument("--per-node", action="store_true", help="full per-node product instead of shared values")
    p.add_argument("--metric", default="rmse", choices=["rmse", "mae", "r2", "corr"])
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--train-frac", type=float, default=0.60)
    p.add_argument("--val-frac", type=float, default=0.15)
    p.add_argument("--test-frac", type=float, default=0.25)
    p.add_argument("--max-iter", type=int, default=300)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out", required=True, help="results CSV path")
    p.add_argument("--model-out", default=None, help="write the refit selected model here")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_gridsearch)

    p = sub.add_parser("graph", help="latent cross-correlation graph export")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--partition", default=None)
    p.add_argument("--threshold", type=float, default=0.1)
    p.add_argument("--format", default="dot", choices=["dot", "json"])
    p.add_argument("--max-lag", type=int, default=0)
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_graph)
    return parser


def dispatch(argv):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NUMERIC_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main():
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()

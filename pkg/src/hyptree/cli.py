"""Command-line harness.

Subcommands
-----------

* ``gen``        generate a tree with a spring layout and save it as JSON
* ``embed``      pick a curvature meeting a distortion target, save the embedding
* ``train``      fit an MLP or hyperbolic network to pair distances
* ``grid``       sweep (tree x dim x model x seed), emit a long-format CSV
* ``lowerbound`` trained-MLP distortion growth vs the constructive column

Every invocation writes ``<command>_manifest.json`` into the output directory
before any result file; the manifest lists the resolved configuration and every
output path. Manifest content is a pure function of config, seed, and library
version, so identical invocations produce byte-identical files (wall-clock time
lives in filesystem metadata only).

Exit codes: 0 success, 2 usage error, 3 distortion target unreachable on the
scale grid, 4 training diverged.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import __version__
from .embed import EmbedError, choose_curvature, hnn_realize, mlp_distortion_study, save_embedding
from .networks import par_count, save_params
from .seeding import child_seeds
from .train import TrainConfig, TrainDivergenceError, TrainError, train_embedding
from .trees import (
    WeightedTree,
    gen_binary,
    gen_random,
    gen_spider,
    gen_ternary,
    leaves,
    load_tree,
    save_tree,
    spring_layout,
    tree_from_dict,
    tree_to_dict,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_UNREACHABLE = 3
EXIT_DIVERGENCE = 4


class UsageError(ValueError):
    """Bad flags or config; argparse type callables also convert this to exit 2."""


# ----------------------------------------------------------------------
# Small shared helpers
# ----------------------------------------------------------------------

def _fmt(x) -> str:
    """Shortest round-trip decimal for a float; empty for missing values."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


def _out_path(out_dir: str, name: str) -> str:
    if os.path.isabs(name):
        return name
    return os.path.join(out_dir, name)


def _write_manifest(out_dir: str, command: str, config: dict, seed: int, outputs) -> str:
    path = _out_path(out_dir, f"{command}_manifest.json")
    doc = {
        "command": command,
        "config": config,
        "library_version": __version__,
        "seed": seed,
        "outputs": sorted(os.path.basename(p) for p in outputs),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path: str, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _load_tree_arg(path: str) -> WeightedTree:
    try:
        return load_tree(path)
    except OSError as exc:
        raise UsageError(f"cannot read tree file: {exc}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"malformed tree file {path}: {exc}") from exc


def _report_doc(report) -> dict:
    return {
        "alpha": report.alpha,
        "beta": report.beta,
        "dist": report.dist,
        "injective": report.injective,
    }


def _train_config_from_args(args, seed: int) -> TrainConfig:
    try:
        return TrainConfig(
            epochs=args.epochs,
            batch_size=args.batch_size,
            learning_rate=args.lr,
            seed=seed,
            model_kind=args.model,
            hidden_layers=args.hidden_layers,
            hidden_width=args.width,
            embed_dim=args.embed_dim,
            optimizer=args.optimizer,
            batch_norm=args.batch_norm,
            max_pairs=args.max_pairs,
        )
    except TrainError as exc:
        raise UsageError(str(exc)) from exc


# ----------------------------------------------------------------------
# gen
# ----------------------------------------------------------------------

def _generate_tree(kind: str, depth, n, seed: int, layout_dim: int) -> WeightedTree:
    if kind in ("binary", "ternary"):
        if depth is None:
            raise UsageError(f"--depth is required for --kind {kind}")
        t = gen_binary(depth) if kind == "binary" else gen_ternary(depth)
    elif kind == "random":
        if n is None:
            raise UsageError("--n is required for --kind random")
        t = gen_random(n, child_seeds(seed, "tree", 1)[0])
    else:
        raise UsageError(f"unknown tree kind {kind!r}")
    spring_layout(t, dim=layout_dim, seed=child_seeds(seed, "layout", 1)[0])
    return t


def cmd_gen(args) -> int:
    out = _out_path(args.out_dir, args.output or f"tree_{args.kind}.json")
    t = _generate_tree(args.kind, args.depth, args.n, args.seed, args.layout_dim)
    _write_manifest(
        args.out_dir, "gen",
        {"kind": args.kind, "depth": args.depth, "n": args.n, "layout_dim": args.layout_dim},
        args.seed, [out],
    )
    save_tree(t, out)
    print(f"nodes={t.n_nodes} edges={len(t.edges)} leaves={len(leaves(t))}")
    print(f"wrote {out}")
    return EXIT_OK


# ----------------------------------------------------------------------
# embed
# ----------------------------------------------------------------------

def cmd_embed(args) -> int:
    t = _load_tree_arg(args.tree)
    if args.lam <= 1.0:
        raise UsageError("--lambda must be > 1")
    if t.n_nodes < 2:
        raise UsageError("tree must have at least 2 nodes")

    out_emb = _out_path(args.out_dir, args.output or "embedding.json")
    out_report = _out_path(args.out_dir, "embed_report.json")
    outputs = [out_emb, out_report]
    out_params = _out_path(args.out_dir, "hnn_params.json")
    if args.realize_hnn:
        outputs.append(out_params)
    _write_manifest(
        args.out_dir, "embed",
        {"tree": os.path.basename(args.tree), "lambda": args.lam, "realize_hnn": args.realize_hnn},
        args.seed, outputs,
    )

    try:
        emb, kappa, report = choose_curvature(t, args.lam)
    except EmbedError as exc:
        print(f"target unreachable: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE

    save_embedding(out_emb, emb)
    _write_json(out_report, {"kappa": kappa.kappa, "tau": emb.tau, **_report_doc(report)})
    print(
        f"kappa={kappa.kappa:g} alpha={report.alpha:.6g} "
        f"beta={report.beta:.6g} dist={report.dist:.6g}"
    )
    if args.realize_hnn:
        try:
            params = hnn_realize(emb, t, seed=args.seed)
        except EmbedError as exc:
            raise UsageError(str(exc)) from exc
        save_params(out_params, params)
        pc = par_count(params)
        print(f"realized depth={pc.depth} width={pc.width} par={pc.par}")
    print(f"wrote {out_emb}")
    return EXIT_OK


# ----------------------------------------------------------------------
# train
# ----------------------------------------------------------------------

def cmd_train(args) -> int:
    t = _load_tree_arg(args.tree)
    cfg = _train_config_from_args(args, args.seed)

    out_csv = _out_path(args.out_dir, "train_loss.csv")
    out_report = _out_path(args.out_dir, "train_report.json")
    out_params = _out_path(args.out_dir, "model_params.json")
    _write_manifest(
        args.out_dir, "train",
        {"tree": os.path.basename(args.tree), "model": args.model,
         "epochs": cfg.epochs, "batch_size": cfg.batch_size,
         "learning_rate": cfg.learning_rate, "hidden_layers": cfg.hidden_layers,
         "hidden_width": cfg.hidden_width, "embed_dim": cfg.embed_dim,
         "optimizer": cfg.optimizer, "batch_norm": cfg.batch_norm,
         "max_pairs": cfg.max_pairs},
        args.seed, [out_csv, out_report, out_params],
    )

    try:
        params, history, report = train_embedding(t, cfg)
    except TrainDivergenceError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_DIVERGENCE
    except TrainError as exc:
        raise UsageError(str(exc)) from exc

    _write_csv(
        out_csv, ["epoch", "train_mse", "test_mse"],
        [[row.epoch, _fmt(row.train_mse), _fmt(row.test_mse)] for row in history],
    )
    _write_json(out_report, _report_doc(report))
    save_params(out_params, params)
    last = history[-1]
    print(
        f"model={args.model} final train_mse={last.train_mse:.6g} "
        f"test_mse={last.test_mse:.6g} dist={report.dist:.6g}"
    )
    return EXIT_OK


# ----------------------------------------------------------------------
# grid
# ----------------------------------------------------------------------

def _parse_grid_config(doc: dict) -> dict:
    if not isinstance(doc, dict):
        raise UsageError("grid config must be a JSON object")
    trees = doc.get("trees")
    if trees is None:
        kind = doc.get("kind")
        if kind is None:
            raise UsageError('grid config needs "trees" or "kind"')
        if kind in ("binary", "ternary"):
            depths = doc.get("depths") or ([doc["depth"]] if "depth" in doc else None)
            if not depths:
                raise UsageError(f'kind {kind!r} needs "depth" or "depths"')
            trees = [{"kind": kind, "depth": d} for d in depths]
        elif kind == "random":
            ns = doc.get("ns") or ([doc["n"]] if "n" in doc else None)
            if not ns:
                raise UsageError('kind "random" needs "n" or "ns"')
            trees = [{"kind": kind, "n": n} for n in ns]
        else:
            raise UsageError(f"unknown tree kind {kind!r}")
    for spec in trees:
        kind = spec.get("kind")
        if kind in ("binary", "ternary"):
            if "depth" not in spec:
                raise UsageError(f"tree spec {spec} needs a depth")
        elif kind == "random":
            if "n" not in spec:
                raise UsageError(f"tree spec {spec} needs n")
        else:
            raise UsageError(f"unknown tree kind in spec {spec}")
    dims = doc.get("dims", [2, 4, 6, 8])
    models = doc.get("models", ["mlp", "hnn"])
    seeds = doc.get("seeds", [0])
    if not trees or not dims or not models or not seeds:
        raise UsageError("grid config: trees, dims, models, seeds must be non-empty")
    bad = set(models) - {"mlp", "hnn"}
    if bad:
        raise UsageError(f"unknown model kinds {sorted(bad)}")
    train = dict(doc.get("train", {}))
    allowed = {"epochs", "batch_size", "learning_rate", "hidden_layers",
               "hidden_width", "optimizer", "batch_norm", "max_pairs"}
    unknown = set(train) - allowed
    if unknown:
        raise UsageError(
            f"train overrides {sorted(unknown)} not allowed; "
            "model_kind, embed_dim and seed come from the sweep"
        )
    return {
        "trees": trees,
        "dims": [int(d) for d in dims],
        "models": list(models),
        "seeds": [int(s) for s in seeds],
        "train": train,
        "output_dir": doc.get("output_dir"),
    }


def _grid_tree(spec: dict, index: int, seed: int) -> WeightedTree:
    kind = spec["kind"]
    if kind == "binary":
        t = gen_binary(int(spec["depth"]))
    elif kind == "ternary":
        t = gen_ternary(int(spec["depth"]))
    else:
        t = gen_random(int(spec["n"]), child_seeds(seed, f"tree-{index}", 1)[0])
    spring_layout(t, dim=2, seed=child_seeds(seed, f"layout-{index}", 1)[0])
    return t


def _grid_worker(payload: dict) -> dict:
    t = tree_from_dict(payload["tree"])
    n = t.n_nodes
    overrides = dict(payload["train"])
    if "max_pairs" not in overrides:
        overrides["max_pairs"] = min(n * (n - 1) // 2, 50 * n)
    cfg = TrainConfig(
        model_kind=payload["model"], embed_dim=payload["dim"],
        seed=payload["seed"], **overrides,
    )
    row = {
        "kind": payload["kind"], "n_nodes": n, "dim": payload["dim"],
        "model": payload["model"], "seed": payload["seed"],
        "train_mse": math.nan, "test_mse": math.nan, "dist": math.nan,
        "status": "ok",
    }
    try:
        _, history, report = train_embedding(t, cfg)
    except TrainDivergenceError as exc:
        row["status"] = f"diverged@{exc.epoch}"
        return row
    except (TrainError, FloatingPointError) as exc:
        row["status"] = f"error:{type(exc).__name__}"
        return row
    row["train_mse"] = history[-1].train_mse
    row["test_mse"] = history[-1].test_mse
    row["dist"] = report.dist
    return row


GRID_HEADER = ["kind", "n_nodes", "dim", "model", "seed", "train_mse", "test_mse", "dist", "status"]


def cmd_grid(args) -> int:
    try:
        with open(args.config) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config is not valid JSON: {exc}") from exc
    cfg = _parse_grid_config(doc)
    out_dir = cfg["output_dir"] or args.out_dir
    os.makedirs(out_dir, exist_ok=True)

    out_csv = _out_path(out_dir, "grid_results.csv")
    outputs = [out_csv]
    if args.svg:
        outputs += [_out_path(out_dir, f"grid_{m}.svg") for m in cfg["models"]]
    _write_manifest(
        out_dir, "grid",
        {"config": cfg, "pair_policy": "min(all pairs, 50*N) unless train.max_pairs set",
         "svg": args.svg},
        args.seed, outputs,
    )

    payloads = []
    for ti, spec in enumerate(cfg["trees"]):
        t = _grid_tree(spec, ti, args.seed)
        tdict = tree_to_dict(t)
        for dim in cfg["dims"]:
            for model in cfg["models"]:
                for seed in cfg["seeds"]:
                    payloads.append({
                        "tree": tdict, "kind": spec["kind"], "dim": dim,
                        "model": model, "seed": seed, "train": cfg["train"],
                    })

    if args.threads > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            rows = list(pool.map(_grid_worker, payloads))
    else:
        rows = [_grid_worker(p) for p in payloads]

    _write_csv(
        out_csv, GRID_HEADER,
        [[r["kind"], r["n_nodes"], r["dim"], r["model"], r["seed"],
          _fmt(r["train_mse"]), _fmt(r["test_mse"]), _fmt(r["dist"]), r["status"]]
         for r in rows],
    )
    if args.svg:
        for model in cfg["models"]:
            _svg_for_model(out_dir, model, rows)

    n_ok = sum(r["status"] == "ok" for r in rows)
    print(f"grid: {n_ok}/{len(rows)} rows ok, wrote {out_csv}")
    return EXIT_OK if n_ok else EXIT_DIVERGENCE


# ----------------------------------------------------------------------
# SVG heatmap (no plotting dependency; CSV stays the primary artifact)
# ----------------------------------------------------------------------

def _cell_color(t: float) -> str:
    # low values blue, high values red
    lo = (44, 123, 182)
    hi = (215, 25, 28)
    r, g, b = (round(a + (c - a) * t) for a, c in zip(lo, hi))
    return f"#{r:02x}{g:02x}{b:02x}"


def _svg_heatmap(path: str, col_labels, row_labels, values: np.ndarray, title: str) -> None:
    cell, pad_l, pad_t, pad_b = 70, 120, 50, 34
    n_rows, n_cols = values.shape
    width = pad_l + cell * n_cols + 20
    height = pad_t + cell * n_rows + pad_b
    finite = values[np.isfinite(values)]
    vmin = float(finite.min()) if finite.size else 0.0
    vmax = float(finite.max()) if finite.size else 1.0
    if vmax <= vmin:
        vmax = vmin + 1.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="monospace" font-size="12">',
        f'<text x="{pad_l}" y="20" font-size="14">{title}</text>',
    ]
    for i in range(n_rows):
        y = pad_t + i * cell
        parts.append(
            f'<text x="{pad_l - 8}" y="{y + cell / 2 + 4}" text-anchor="end">{row_labels[i]}</text>'
        )
        for j in range(n_cols):
            x = pad_l + j * cell
            v = values[i, j]
            if math.isfinite(v):
                frac = (v - vmin) / (vmax - vmin)
                fill = _cell_color(frac)
                label = f"{v:.3g}"
                text_fill = "#ffffff" if frac > 0.6 else "#000000"
            else:
                fill = "#bbbbbb"
                label = "n/a"
                text_fill = "#000000"
            parts.append(
                f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="{fill}" stroke="#ffffff"/>'
            )
            parts.append(
                f'<text x="{x + cell / 2}" y="{y + cell / 2 + 4}" text-anchor="middle" '
                f'fill="{text_fill}">{label}</text>'
            )
    for j in range(n_cols):
        x = pad_l + j * cell
        parts.append(
            f'<text x="{x + cell / 2}" y="{pad_t + n_rows * cell + 16}" '
            f'text-anchor="middle">{col_labels[j]}</text>'
        )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
        fh.write("\n")


def _svg_for_model(out_dir: str, model: str, rows) -> None:
    """Mean test MSE per (tree, dim) cell for one model kind."""
    mine = [r for r in rows if r["model"] == model]
    tree_keys = sorted({(r["kind"], r["n_nodes"]) for r in mine})
    dims = sorted({r["dim"] for r in mine})
    grid = np.full((len(tree_keys), len(dims)), math.nan)
    for i, tk in enumerate(tree_keys):
        for j, d in enumerate(dims):
            vals = [
                r["test_mse"] for r in mine
                if (r["kind"], r["n_nodes"]) == tk and r["dim"] == d
                and r["status"] == "ok" and math.isfinite(r["test_mse"])
            ]
            if vals:
                grid[i, j] = float(np.mean(vals))
    _svg_heatmap(
        _out_path(out_dir, f"grid_{model}.svg"),
        [f"dim {d}" for d in dims],
        [f"{k} n={n}" for k, n in tree_keys],
        grid,
        f"{model}: mean test MSE over seeds",
    )


# ----------------------------------------------------------------------
# lowerbound
# ----------------------------------------------------------------------

def _int_list(text: str, flag: str) -> list[int]:
    try:
        vals = [int(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise UsageError(f"{flag} expects a comma-separated integer list") from exc
    if not vals:
        raise UsageError(f"{flag} must be non-empty")
    return vals


def cmd_lowerbound(args) -> int:
    leaf_counts = _int_list(args.leaves, "--leaves")
    dims = _int_list(args.dims, "--dims")
    if args.lam <= 1.0:
        raise UsageError("--lambda must be > 1")
    args.model = "mlp"
    base_cfg = _train_config_from_args(args, args.seed)

    out_csv = _out_path(args.out_dir, "lowerbound.csv")
    out_summary = _out_path(args.out_dir, "lowerbound_summary.json")
    _write_manifest(
        args.out_dir, "lowerbound",
        {"leaves": leaf_counts, "dims": dims, "lambda": args.lam,
         "epochs": base_cfg.epochs, "batch_size": base_cfg.batch_size,
         "learning_rate": base_cfg.learning_rate,
         "hidden_layers": base_cfg.hidden_layers,
         "hidden_width": base_cfg.hidden_width,
         "study_seeds": list(args.study_seeds)},
        args.seed, [out_csv, out_summary],
    )

    # constructive column: same spider topologies, layout-independent
    hnn_col = {}
    for L in leaf_counts:
        t = gen_spider(L, leg_length=2)
        try:
            _, _, report = choose_curvature(t, args.lam)
            hnn_col[L] = (report.dist, "ok")
        except EmbedError as exc:
            hnn_col[L] = (math.nan, f"error:{exc}")

    csv_rows = []
    exponents = {}
    for dim in dims:
        rows, exponent = mlp_distortion_study(
            leaf_counts, dim, base_cfg, seeds=tuple(args.study_seeds)
        )
        exponents[str(dim)] = exponent
        for row in rows:
            hnn_dist, hnn_status = hnn_col[row["L"]]
            csv_rows.append([
                row["L"], dim, _fmt(row["dist"]), row["status"],
                _fmt(hnn_dist), hnn_status,
            ])

    _write_csv(
        out_csv,
        ["L", "dim", "mlp_dist", "mlp_status", "hnn_dist", "hnn_status"],
        csv_rows,
    )
    hnn_finite = [d for d, _ in hnn_col.values() if math.isfinite(d)]
    summary = {
        "lambda": args.lam,
        "fitted_exponent_per_dim": exponents,
        "hnn_max_dist": max(hnn_finite) if hnn_finite else math.nan,
    }
    _write_json(out_summary, summary)
    for dim in dims:
        print(f"dim={dim} fitted_exponent={exponents[str(dim)]:.4g}")
    print(f"hnn_max_dist={summary['hnn_max_dist']:.6g} (lambda={args.lam:g})")
    return EXIT_OK


# ----------------------------------------------------------------------
# parser / entry point
# ----------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="top-level seed for all streams")
    common.add_argument("--out-dir", default=".", help="directory for outputs")
    common.add_argument("--threads", type=int, default=1,
                        help="worker processes for grid rows (HYPTREE_THREADS overrides)")

    train_common = argparse.ArgumentParser(add_help=False)
    train_common.add_argument("--epochs", type=int, default=10)
    train_common.add_argument("--batch-size", type=int, default=4096)
    train_common.add_argument("--lr", type=float, default=1e-2)
    train_common.add_argument("--hidden-layers", type=int, default=4)
    train_common.add_argument("--width", type=int, default=64)
    train_common.add_argument("--embed-dim", type=int, default=2)
    train_common.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    train_common.add_argument("--batch-norm", action="store_true")
    train_common.add_argument("--max-pairs", type=int, default=None)

    p = argparse.ArgumentParser(
        prog="hyptree",
        description="trees, hyperbolic embeddings, and distance-regression experiments",
    )
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate a tree with layout")
    g.add_argument("--kind", choices=["binary", "ternary", "random"], required=True)
    g.add_argument("--depth", type=int, help="depth for binary/ternary")
    g.add_argument("--n", type=int, help="node count for random")
    g.add_argument("--layout-dim", type=int, default=2)
    g.add_argument("-o", "--output", help="tree JSON filename")
    g.set_defaults(func=cmd_gen)

    e = sub.add_parser("embed", parents=[common], help="curvature selection for a tree")
    e.add_argument("tree", help="tree JSON file")
    e.add_argument("--lambda", dest="lam", type=float, required=True,
                   help="distortion target (> 1)")
    e.add_argument("--realize-hnn", action="store_true",
                   help="also memorize the embedding into a hyperbolic network")
    e.add_argument("-o", "--output", help="embedding JSON filename")
    e.set_defaults(func=cmd_embed)

    t = sub.add_parser("train", parents=[common, train_common],
                       help="fit a model to tree pair distances")
    t.add_argument("tree", help="tree JSON file with layout")
    t.add_argument("--model", choices=["mlp", "hnn"], default="mlp")
    t.set_defaults(func=cmd_train)

    gr = sub.add_parser("grid", parents=[common], help="run an experiment grid")
    gr.add_argument("config", help="experiment config JSON")
    gr.add_argument("--svg", action="store_true", help="emit per-model heatmaps")
    gr.set_defaults(func=cmd_grid)

    lb = sub.add_parser("lowerbound", parents=[common, train_common],
                        help="trained-MLP distortion growth vs constructive embeddings")
    lb.add_argument("--leaves", default="8,16,32,64",
                    help="comma-separated spider leaf counts")
    lb.add_argument("--dims", default="2", help="comma-separated embed dims")
    lb.add_argument("--lambda", dest="lam", type=float, default=1.1,
                    help="distortion target for the constructive column")
    lb.add_argument("--study-seeds", type=lambda s: _int_list(s, "--study-seeds"),
                    default=[0, 1, 2], help="seeds per study cell (comma-separated)")
    lb.set_defaults(func=cmd_lowerbound)
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    env_threads = os.environ.get("HYPTREE_THREADS")
    if env_threads is not None:
        try:
            args.threads = int(env_threads)
        except ValueError:
            print(f"ignoring HYPTREE_THREADS={env_threads!r} (not an integer)", file=sys.stderr)
    os.makedirs(args.out_dir, exist_ok=True)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

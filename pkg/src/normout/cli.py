"""Command-line harness: generate datasets, embed, diagnose, reproduce figures.

Exit codes: 0 success, 2 usage or input error, 3 disconnected neighborhood
graph, 4 eigensolver failure.  ``NORMOUT_THREADS`` caps BLAS threads.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .datasets import (CSVFormatError, PointCloud, gen_fishbowl, gen_grid, gen_noisy_strip,
                       gen_swissroll, gen_uniform_strip, load_csv, save_csv)
from .diagnostics import DiagnosticsError, collapse_score, canonicalize_latent, diagnose
from .embedding import SolverError, build_index, embed
from .neighbors import DisconnectedGraphError, NeighborhoodError
from .weights import ALGORITHMS, DEGREE_FAMILY, WeightError, build_weights

EXIT_OK, EXIT_USAGE, EXIT_DISCONNECTED, EXIT_SOLVER = 0, 2, 3, 4
THREADS_ENV = "NORMOUT_THREADS"
DFM_EPS = 4.0  # gaussian width sigma_kernel = 2, eps = sigma_kernel^2
FIGURES = ("grid", "random-strip", "noisy-strip", "swissroll", "fishbowl")


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ helpers

def _latent_path(path: Path) -> Path:
    return path.with_name(path.stem + ".latent.csv")


def _write_cloud(cloud: PointCloud, out: Path) -> list[Path]:
    out.parent.mkdir(parents=True, exist_ok=True)
    written = [save_csv(cloud, out)]
    meta = {**cloud.meta, "n_points": cloud.n_points, "dim": cloud.dim}
    if cloud.latent is not None and not np.array_equal(cloud.latent, cloud.points):
        written.append(save_csv(cloud.latent, _latent_path(out)))
        meta["latent_csv"] = _latent_path(out).name
    meta_path = out.with_suffix(".json")
    meta_path.write_text(json.dumps(meta, indent=2) + "\n")
    written.append(meta_path)
    return written


def auto_width(points, k: int) -> float:
    """Kernel width ``eps`` from the mean distance to the K nearest neighbors."""
    index = build_index(points, k=k)
    pts = np.asarray(points, dtype=float)
    dists = [np.linalg.norm(pts[nb] - pts[i], axis=1) for i, nb in enumerate(index.neighbors)]
    return float(math.sqrt(np.mean(np.concatenate(dists))))


def _weight_options(args, points) -> dict:
    opts = {}
    if args.algorithm in DEGREE_FAMILY:
        if args.kernel is not None:
            opts["kernel"] = args.kernel
        if getattr(args, "auto_width", False):
            if args.k is None:
                raise UsageError("--auto-width needs --k")
            w = auto_width(points, args.k)
            opts["eps"] = w * w
            opts.setdefault("kernel", "gaussian")
        elif args.eps is not None:
            opts["eps"] = args.eps
        if args.algorithm == "dfm" and args.alpha is not None:
            opts["alpha"] = args.alpha
    if args.algorithm == "lle" and args.lle_reg is not None:
        opts["reg"] = args.lle_reg
    return opts


def _check_neighborhood_args(args):
    if (args.k is None) == (args.r is None):
        raise UsageError("give exactly one of --k or --r")


# ----------------------------------------------------------------- commands

def cmd_generate(args) -> int:
    if args.dataset == "grid":
        cloud = gen_grid(args.m, args.q)
    elif args.dataset == "strip":
        if args.noise is None:
            cloud = gen_uniform_strip(args.length, args.width, args.n, args.seed)
        else:
            cloud = gen_noisy_strip(args.length, args.width, args.n, args.noise, args.seed)
    elif args.dataset == "swissroll":
        cloud = gen_swissroll(args.n, args.stretch, args.seed)
    else:
        cloud = gen_fishbowl(args.n, args.stretch, args.seed)
    for p in _write_cloud(cloud, Path(args.out)):
        print(p)
    return EXIT_OK


def cmd_embed(args) -> int:
    _check_neighborhood_args(args)
    cloud = load_csv(args.input)
    opts = _weight_options(args, cloud.points)
    res = embed(cloud, args.algorithm, k=args.k, r=args.r, d=args.d, method=args.method, **opts)
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    json_path = prefix.with_suffix(".json")
    json_path.write_text(res.to_json(indent=1) + "\n")
    csv_path = save_csv(res.Y, prefix.with_suffix(".csv"))
    resid = res.constraint_residuals()
    print(f"{args.algorithm}: cost={res.cost:.6g} gram_residual={resid['gram']:.2e} "
          f"mean_residual={resid['mean']:.2e} degenerate={res.degenerate}")
    print(json_path)
    print(csv_path)
    return EXIT_OK


def _load_latent(args, cloud: PointCloud) -> np.ndarray:
    if args.latent is not None:
        return load_csv(args.latent).points
    sibling = _latent_path(Path(args.input))
    if sibling.exists():
        return load_csv(sibling).points
    if cloud.dim == 2:
        return cloud.points
    raise UsageError("no latent sample: pass --latent (inputs are not two-dimensional)")


def cmd_diagnose(args) -> int:
    _check_neighborhood_args(args)
    cloud = load_csv(args.input)
    latent = _load_latent(args, cloud)
    if latent.shape[0] != cloud.n_points:
        raise UsageError("latent and input have different numbers of rows")
    index = build_index(cloud.points, args.k, args.r)
    weights = build_weights(cloud.points, index, args.algorithm, d=2,
                            **_weight_options(args, cloud.points))
    emb = load_csv(args.embedding).points if args.embedding else None
    report = diagnose(latent, weights, embedding=emb, hat=args.hat)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(report.to_json(indent=1) + "\n")
    print(report.verdict_line())
    return EXIT_OK


def _figure_panels(figure: str, seed: int, scale: str):
    """(panel name, cloud, algorithms, k) for each panel of a figure."""
    both = ("lem", "dfm")
    if figure == "grid":
        m, q = (40, (20, 19)) if scale == "full" else (20, (10, 9))
        return [(f"{2 * m + 1}x{2 * qq + 1}", gen_grid(m, qq), both) for qq in q]
    if figure == "random-strip":
        base = gen_uniform_strip(1.0, 1.0, 3000 if scale == "full" else 1500, seed)
        out = []
        for w in (41, 39):
            pts = base.points * np.array([81.0, w])
            out.append((f"81x{w}", PointCloud(pts, pts, {**base.meta, "length": 81, "width": w}),
                        both))
        return out
    if figure == "noisy-strip":
        n = 3000 if scale == "full" else 1500
        return [("clean", gen_noisy_strip(1, 6, n, 0.0, seed), ALGORITHMS),
                ("noisy", gen_noisy_strip(1, 6, n, 1e-4, seed), ALGORITHMS)]
    if figure == "swissroll":
        n = 1600 if scale == "full" else 800
        return [(f"stretch{s}", gen_swissroll(n, s, seed), ALGORITHMS) for s in (1, 3)]
    if figure == "fishbowl":
        n = 2400 if scale == "full" else 1200
        return [(f"stretch{s}", gen_fishbowl(n, s, seed), ALGORITHMS) for s in (1, 4)]
    raise UsageError(f"unknown figure {figure!r}; choose from {', '.join(FIGURES)}")


SUMMARY_COLUMNS = ("figure", "panel", "algorithm", "k", "n_points", "aspect_ratio",
                   "collapse_score", "phi_Y", "phi_Z", "theorem2", "corollary3",
                   "degenerate", "verdict")


def cmd_reproduce(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for panel, cloud, algs in _figure_panels(args.figure, args.seed, args.scale):
        Xc, _ = canonicalize_latent(cloud.latent)
        index = build_index(cloud.points, k=args.k)
        for alg in algs:
            opts = {"kernel": "gaussian", "eps": DFM_EPS} if alg == "dfm" else {}
            res = embed(cloud, alg, index=index, k=args.k, **opts)
            weights = build_weights(cloud.points, index, alg, **opts)
            report = diagnose(cloud.latent, weights)
            score = collapse_score(res.Y, Xc)
            panel_path = out_dir / f"{args.figure}_{panel}_{alg}.csv"
            with panel_path.open("w", newline="") as fh:
                fh.write("y1,y2,x1,x2\n")
                for y, x in zip(res.Y, Xc):
                    fh.write(",".join(format(float(v), ".17g") for v in (*y, *x)) + "\n")
            rows.append({"figure": args.figure, "panel": panel, "algorithm": alg, "k": args.k,
                         "n_points": cloud.n_points, "aspect_ratio": report.aspect_ratio,
                         "collapse_score": score, "phi_Y": report.phi_Y, "phi_Z": report.phi_Z,
                         "theorem2": report.theorem2.predicts_failure,
                         "corollary3": report.corollary3.predicts_failure,
                         "degenerate": res.degenerate, "verdict": report.verdict_line()})
            print(f"{panel:>10s} {alg:>4s} collapse_score={score:.3f} "
                  f"phi_Y={report.phi_Y:.4g} phi_Z={report.phi_Z:.4g}")
    summary = out_dir / f"{args.figure}_summary.csv"
    with summary.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: format(v, ".17g") if isinstance(v, float) else v
                             for k, v in row.items()})
    print(summary)
    return EXIT_OK


# ------------------------------------------------------------------- parser

def _add_weight_args(p):
    p.add_argument("--algorithm", "-a", required=True, choices=ALGORITHMS)
    p.add_argument("--k", type=int, help="K nearest neighbors")
    p.add_argument("--r", type=float, help="r-ball radius")
    p.add_argument("--kernel", choices=("window", "gaussian"), help="LEM/DFM kernel")
    p.add_argument("--eps", type=float, help="gaussian kernel width eps (default 4 for DFM)")
    p.add_argument("--alpha", type=float, help="DFM density exponent (default 1)")
    p.add_argument("--auto-width", action="store_true",
                   help="gaussian eps = (root of mean neighbor distance)^2")
    p.add_argument("--lle-reg", choices=("auto", "none", "always"), help="LLE regularization")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="normout", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset as CSV + JSON meta")
    g.add_argument("dataset", choices=("grid", "strip", "swissroll", "fishbowl"))
    g.add_argument("--out", "-o", required=True, help="output CSV path")
    g.add_argument("--m", type=int, default=40)
    g.add_argument("--q", type=int, default=20)
    g.add_argument("--length", type=float, default=1.0)
    g.add_argument("--width", type=float, default=6.0)
    g.add_argument("--n", type=int, default=3000)
    g.add_argument("--noise", type=float, help="noise variance (strip lifted to 3-D)")
    g.add_argument("--stretch", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("embed", help="run one algorithm on a CSV point cloud")
    e.add_argument("input")
    _add_weight_args(e)
    e.add_argument("--d", type=int, default=2, help="output dimension")
    e.add_argument("--method", choices=("auto", "dense", "sparse"), default="auto")
    e.add_argument("--out", "-o", required=True, help="output prefix (.json and .csv)")
    e.set_defaults(func=cmd_embed)

    d = sub.add_parser("diagnose", help="evaluate the failure conditions")
    d.add_argument("input")
    _add_weight_args(d)
    d.add_argument("--latent", help="latent CSV (default: sibling .latent.csv or the input)")
    d.add_argument("--embedding", help="embedding CSV to score against the latent")
    d.add_argument("--hat", action="store_true", help="degree-normalized Y/Z (LEM, DFM)")
    d.add_argument("--out", "-o", help="report JSON path")
    d.set_defaults(func=cmd_diagnose)

    r = sub.add_parser("reproduce", help="paired above/below-threshold experiments")
    r.add_argument("figure", choices=FIGURES)
    r.add_argument("--out-dir", required=True)
    r.add_argument("--k", type=int, default=8)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--scale", choices=("full", "desk"), default="full",
                   help="desk halves the sample sizes")
    r.set_defaults(func=cmd_reproduce)
    return parser


def _run(args) -> int:
    threads = os.environ.get(THREADS_ENV)
    if threads:
        from threadpoolctl import threadpool_limits
        with threadpool_limits(limits=int(threads)):
            return args.func(args)
    return args.func(args)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _run(args)
    except DisconnectedGraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DISCONNECTED
    except SolverError as exc:
        print(f"error: eigensolver failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (UsageError, CSVFormatError, NeighborhoodError, WeightError, DiagnosticsError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

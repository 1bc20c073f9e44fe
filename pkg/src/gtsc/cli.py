"""Command line entry point: ``gtsc {cluster,gen,eval,scaling}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .cocluster import GtscParams, gtsc, popularity_scores
from .metrics import scores
from .synth import SynthSpec, generate
from .tensor import (
    ModeClassMap,
    SparseTensor,
    TensorFormatError,
    embed_rectangular,
    load_coordinate,
    symmetrize_square,
    write_coordinate,
)

log = logging.getLogger("gtsc")

RECT_MODES = ("x", "y", "z")


def prepare(T: SparseTensor, classes: ModeClassMap | None) -> SparseTensor:
    """Square symmetric tensor the clustering runs on."""
    if classes is not None:
        return embed_rectangular(T, classes)
    if not T.is_square:
        raise ValueError("non-square tensor needs --rectangular")
    if T.symmetric or T.is_permutation_symmetric():
        return T
    return symmetrize_square(T)


def label_rows(labels: np.ndarray, T: SparseTensor, classes: ModeClassMap | None):
    """``(index, cluster)`` rows, or ``(class, index, cluster)`` after an embedding."""
    if classes is None:
        return [(i, int(c)) for i, c in enumerate(labels)]
    offsets = classes.offsets(T.dims)
    sizes = classes.resolve(T.dims)
    return [
        (name, i, int(labels[offsets[name] + i]))
        for name in classes.class_order()
        for i in range(sizes[name])
    ]


def write_labels(path: Path, rows, rectangular: bool) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(("mode", "index", "cluster") if rectangular else ("index", "cluster"))
        w.writerows(rows)


def read_labels(path: Path) -> dict[tuple, str]:
    """Key columns (all but the last) mapped to the label in the last column."""
    out = {}
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh, delimiter="\t"))
    if not rows:
        raise ValueError(f"{path}: empty labels file")
    for row in rows[1:]:
        if not row:
            continue
        out[tuple(row[:-1])] = row[-1]
    return out


def run_pipeline(T: SparseTensor, params: GtscParams, threads: int = 1):
    tree = gtsc(T, params, threads=threads)
    return tree, popularity_scores(T, tree)


def cmd_cluster(args) -> int:
    classes = ModeClassMap.parse(args.rectangular) if args.rectangular else None
    with open(args.input) as fh:
        raw = load_coordinate(fh, one_based=args.one_based)
    T = prepare(raw, classes)
    params = GtscParams(
        alpha=args.alpha,
        phi_star=args.phi_star,
        max_size=args.max_size,
        min_size=args.min_size,
        tol_stationary=args.tol,
        seed=args.seed,
    )
    t0 = time.perf_counter()
    tree, pop = run_pipeline(T, params, args.threads)
    elapsed = time.perf_counter() - t0

    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    prefix = out / args.prefix
    labels = tree.labels
    write_labels(Path(f"{prefix}.labels.tsv"), label_rows(labels, raw, classes), classes is not None)
    with open(f"{prefix}.tree.json", "w") as fh:
        json.dump(tree.to_dict(), fh, indent=1)
    sizes = [len(c) for c in tree.clusters()]
    with open(f"{prefix}.popularity.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("cluster", "size", "score"))
        for cid in np.argsort(-pop, kind="stable"):
            w.writerow((int(cid), sizes[cid], f"{pop[cid]:.10g}"))
    print(f"{len(sizes)} clusters over {T.n} indices in {elapsed:.2f}s -> {prefix}.*")
    if args.truth:
        report(Path(f"{prefix}.labels.tsv"), Path(args.truth))
    return 0


def cmd_gen(args) -> int:
    spec = SynthSpec(
        sigma=args.sigma,
        n_groups=args.groups,
        t_within=args.within,
        t_across=args.across,
        seed=args.seed,
        rectangular=args.rectangular,
    )
    pt = generate(spec)
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"{args.prefix}.tns", "w") as fh:
        write_coordinate(pt.tensor, fh, one_based=args.one_based)
    if args.rectangular:
        rows = [(RECT_MODES[r], i, int(g)) for r, lab in enumerate(pt.labels) for i, g in enumerate(lab)]
    else:
        rows = [(i, int(g)) for i, g in enumerate(pt.labels[0])]
    write_labels(out / f"{args.prefix}.truth.tsv", rows, args.rectangular)
    print(f"dims {pt.tensor.dims}, {pt.tensor.nnz} non-zeros -> {out / args.prefix}.*")
    return 0


def report(pred_path: Path, truth_path: Path) -> dict[str, float]:
    pred, truth = read_labels(pred_path), read_labels(truth_path)
    keys = sorted(set(pred) & set(truth))
    if len(keys) < 2:
        raise ValueError("label files share fewer than two items")
    missing = len(set(pred) ^ set(truth))
    if missing:
        log.warning("%d items appear in only one label file and are ignored", missing)
    s = scores([pred[k] for k in keys], [truth[k] for k in keys])
    for name, value in s.items():
        print(f"{name.upper()}\t{value:.4f}")
    return s


def cmd_eval(args) -> int:
    report(Path(args.pred), Path(args.truth))
    return 0


def run_scaling(T: SparseTensor, fractions, seed: int = 0, params: GtscParams | None = None):
    """Time the clustering pipeline on uniform subsamples of the non-zeros of ``T``.

    Returns one dict per fraction with the sampled and symmetrized non-zero
    counts, wall-clock seconds (symmetrization included) and cluster count.
    """
    params = params or GtscParams(seed=seed)
    rows = []
    for f in fractions:
        rng = np.random.default_rng([seed, int(round(f * 1e9))])
        sub = T.subsample(f, rng) if f < 1 else T
        t0 = time.perf_counter()
        S = prepare(sub, None)
        tree, _ = run_pipeline(S, params)
        seconds = time.perf_counter() - t0
        rows.append(
            dict(
                fraction=f,
                nnz=sub.nnz,
                nnz_symmetric=S.nnz,
                seconds=seconds,
                clusters=len(tree.clusters()),
            )
        )
        log.info("fraction %.4g: %d non-zeros, %.2fs", f, S.nnz, seconds)
    return rows


def cmd_scaling(args) -> int:
    with open(args.input) as fh:
        T = load_coordinate(fh, one_based=args.one_based)
    fractions = [float(f) for f in args.fractions.split(",")]
    if any(not 0 < f <= 1 for f in fractions):
        raise ValueError("fractions must lie in (0, 1]")
    rows = run_scaling(T, fractions, args.seed)
    writer = csv.DictWriter(sys.stdout if args.output == "-" else open(args.output, "w", newline=""),
                            fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({**r, "seconds": f"{r['seconds']:.4f}"})
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gtsc", description="Spectral co-clustering of sparse tensors.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("cluster", help="cluster a coordinate-format tensor")
    c.add_argument("input")
    c.add_argument("--alpha", type=float, default=0.8)
    c.add_argument("--phi-star", type=float, default=0.4)
    c.add_argument("--max-size", type=int, default=100)
    c.add_argument("--min-size", type=int, default=5)
    c.add_argument("--tol", type=float, default=1e-10)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--rectangular", metavar="CLASSES", help="mode classes, e.g. a,b,b,c")
    c.add_argument("--one-based", action="store_true")
    c.add_argument("--threads", type=int, default=1)
    c.add_argument("--outdir", default=".")
    c.add_argument("--prefix", default="gtsc")
    c.add_argument("--truth", help="labels TSV to score the result against")
    c.set_defaults(func=cmd_cluster)

    g = sub.add_parser("gen", help="write a planted-cluster tensor and its labels")
    g.add_argument("--sigma", type=float, default=4.0)
    g.add_argument("--groups", type=int, default=20)
    g.add_argument("--within", type=int, default=10_000)
    g.add_argument("--across", type=int, default=None)
    g.add_argument("--rectangular", action="store_true")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--one-based", action="store_true")
    g.add_argument("--outdir", default=".")
    g.add_argument("--prefix", default="synth")
    g.set_defaults(func=cmd_gen)

    e = sub.add_parser("eval", help="compare two labels files")
    e.add_argument("pred")
    e.add_argument("truth")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("scaling", help="time clustering on subsampled tensors")
    s.add_argument("input")
    s.add_argument("--fractions", default="0.001,0.01,0.1,1")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--one-based", action="store_true")
    s.add_argument("-o", "--output", default="-")
    s.set_defaults(func=cmd_scaling)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, TensorFormatError) as exc:
        print(f"gtsc: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

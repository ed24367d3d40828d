#!/usr/bin/env python3
"""Convert Planetoid citation files (ind.NAME.*) to the pyrewire text layout.

    python3 scripts/planetoid_to_text.py RAW_DIR OUT_DIR --name cora

RAW_DIR holds ind.NAME.{x,y,tx,ty,allx,ally,graph,test.index}. OUT_DIR gets
NAME.edges, NAME.features, NAME.labels and NAME.classes. Test rows are put
back in index order, as the usual loaders do. Features are row-normalised
unless --raw-features is given.
"""

import argparse
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def load(raw: Path, name: str, part: str):
    with open(raw / f"ind.{name}.{part}", "rb") as f:
        return pickle.load(f, encoding="latin1")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("raw", type=Path)
    ap.add_argument("out", type=Path)
    ap.add_argument("--name", default="cora")
    ap.add_argument("--raw-features", action="store_true")
    args = ap.parse_args()

    x, y, tx, ty, allx, ally, graph = (load(args.raw, args.name, p) for p in ("x", "y", "tx", "ty", "allx", "ally", "graph"))
    test_idx = [int(l) for l in (args.raw / f"ind.{args.name}.test.index").read_text().split()]
    order = np.sort(test_idx)

    # citeseer has isolated test nodes missing from tx/ty; pad them with zeros
    if args.name == "citeseer":
        full = range(min(test_idx), max(test_idx) + 1)
        tx_ext = sp.lil_matrix((len(full), tx.shape[1]))
        tx_ext[order - min(test_idx), :] = tx
        tx = tx_ext
        ty_ext = np.zeros((len(full), ty.shape[1]))
        ty_ext[order - min(test_idx), :] = ty
        ty = ty_ext

    features = sp.vstack((allx, tx)).tolil()
    features[test_idx, :] = features[order, :]
    labels = np.vstack((ally, ty))
    labels[test_idx, :] = labels[order, :]

    features = features.toarray().astype(float)
    if not args.raw_features:
        sums = features.sum(axis=1, keepdims=True)
        sums[sums == 0] = 1.0
        features /= sums

    n = features.shape[0]
    # all-zero label rows (citeseer padding) become class 0
    y_idx = labels.argmax(axis=1)
    edges = set()
    for i, nbrs in graph.items():
        for j in nbrs:
            if i != j and i < n and j < n:
                edges.add((min(i, j), max(i, j)))

    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / f"{args.name}.edges", "w") as f:
        f.write(f"{n} 0\n")
        for i, j in sorted(edges):
            f.write(f"{i} {j} 1\n")
    with open(args.out / f"{args.name}.features", "w") as f:
        f.write(f"{n} {features.shape[1]}\n")
        for row in features:
            f.write(" ".join(repr(float(v)) if v else "0" for v in row) + "\n")
    (args.out / f"{args.name}.labels").write_text("".join(f"{c}\n" for c in y_idx))
    (args.out / f"{args.name}.classes").write_text(f"{labels.shape[1]}\n")
    print(f"{args.name}: {n} nodes, {len(edges)} edges, {features.shape[1]} features, {labels.shape[1]} classes")
    return 0


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""Convert the citation benchmarks into the portable TSV dataset layout.

Two source layouts are understood:

* LINQS raw files (`cora.content`, `cora.cites`).
* Planetoid pickles (`ind.<name>.{x,y,tx,ty,allx,ally,graph,test.index}`).

Planetoid isolated test nodes without features (CiteSeer) become zero rows with
class 0, and self loops are dropped, so the result matches the usual
PyTorch Geometric view of the data. Cora classes use the Planetoid order.

    planetoid_to_tsv.py cora /path/to/cora out/cora
    planetoid_to_tsv.py citeseer /path/to/citeseer out/citeseer
"""

import argparse
import json
import os
import pickle
import sys

import numpy as np
import scipy.sparse as sp

CORA_CLASSES = [
    "Theory",
    "Reinforcement_Learning",
    "Genetic_Algorithms",
    "Neural_Networks",
    "Probabilistic_Methods",
    "Case_Based",
    "Rule_Learning",
]


def load_linqs(src, name):
    ids, rows, labels = {}, [], []
    with open(os.path.join(src, f"{name}.content")) as f:
        for line in f:
            parts = line.split()
            ids[parts[0]] = len(ids)
            rows.append([float(v) for v in parts[1:-1]])
            labels.append(CORA_CLASSES.index(parts[-1]))
    edges = set()
    with open(os.path.join(src, f"{name}.cites")) as f:
        for line in f:
            a, b = line.split()
            if a in ids and b in ids and a != b:
                i, j = ids[a], ids[b]
                edges.add((min(i, j), max(i, j)))
    return np.array(rows), np.array(labels), sorted(edges), CORA_CLASSES


def load_planetoid(src, name):
    def part(suffix):
        with open(os.path.join(src, f"ind.{name}.{suffix}"), "rb") as f:
            return pickle.load(f, encoding="latin1")

    x, tx, allx = (sp.csr_matrix(part(s)) for s in ("x", "tx", "allx"))
    ty, ally = part("ty"), part("ally")
    graph = part("graph")
    with open(os.path.join(src, f"ind.{name}.test.index")) as f:
        test_index = np.array([int(line) for line in f])
    order = np.sort(test_index)

    # Isolated test nodes are missing from tx/ty; pad them with zeros.
    span = order[-1] - order[0] + 1
    if span != len(order):
        tx_full = sp.lil_matrix((span, tx.shape[1]))
        tx_full[order - order[0], :] = tx
        tx = tx_full.tocsr()
        ty_full = np.zeros((span, ty.shape[1]))
        ty_full[order - order[0], :] = ty
        ty = ty_full

    features = sp.vstack([allx, tx]).toarray()
    onehot = np.vstack([ally, ty])
    features[test_index, :] = features[order, :]
    onehot[test_index, :] = onehot[order, :]
    labels = onehot.argmax(axis=1)

    n = features.shape[0]
    edges = set()
    for i, nbrs in graph.items():
        for j in nbrs:
            if i != j and i < n and j < n:
                edges.add((min(i, j), max(i, j)))
    classes = [str(c) for c in range(onehot.shape[1])]
    return features, labels, sorted(edges), classes


def fmt(v):
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def write(out, features, labels, edges, classes, source):
    os.makedirs(out, exist_ok=True)
    n, d = features.shape
    meta = {"num_nodes": n, "num_features": d, "num_classes": len(classes), "class_names": classes, "source": source}
    with open(os.path.join(out, "meta.json"), "w") as f:
        json.dump(meta, f, indent=2)
        f.write("\n")
    with open(os.path.join(out, "edges.tsv"), "w") as f:
        f.writelines(f"{i}\t{j}\n" for i, j in edges)
    with open(os.path.join(out, "features.tsv"), "w") as f:
        f.writelines("\t".join(fmt(v) for v in row) + "\n" for row in features)
    with open(os.path.join(out, "labels.tsv"), "w") as f:
        f.writelines(f"{i}\t{int(y)}\n" for i, y in enumerate(labels))
    print(f"{out}: N={n} D={d} C={len(classes)} edges={len(edges)}", file=sys.stderr)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("name", help="dataset name used in the source file names")
    ap.add_argument("src", help="directory with the source files")
    ap.add_argument("out", help="output directory")
    args = ap.parse_args()
    if os.path.exists(os.path.join(args.src, f"{args.name}.content")):
        data, source = load_linqs(args.src, args.name), "linqs"
    else:
        data, source = load_planetoid(args.src, args.name), "planetoid"
    write(args.out, *data, source)


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Desk-scale experiment report: every analysis the CLI exposes, on one
synthetic corpus, written as TSVs into an output directory.

Produces the bound tables, an empirical distortion histogram, the
embedding-dimension sweep, the ensemble-size sweep, and the LSH comparison.
Runs in well under a minute on a laptop core.
"""

import argparse
import pathlib
import sys
import time

from ogeec.cli import main as ogeec


def run(outdir: pathlib.Path, seed: int) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    train = outdir / "train.txt"
    test = outdir / "test.txt"

    steps = [
        (
            "dataset",
            [
                "gen", "--n", "1500", "--d", "8000", "--labels", "150",
                "--sparsity", "15", "--labels-per-sample", "3", "--clusters", "25",
                "--seed", str(seed), "--test-n", "400",
                "--out", str(train), "--test-out", str(test),
            ],
        ),
        (
            "bounds (benchmark corpus sizes, r=200)",
            [
                "analyze", "bounds", "--ns", "196606,490449,1717899",
                "--rs", "200", "--out", str(outdir / "bounds_datasets.tsv"),
            ],
        ),
        (
            "bounds (n=196606, r sweep)",
            [
                "analyze", "bounds", "--ns", "196606",
                "--rs", "50,100,150,200,250,300,350,400",
                "--out", str(outdir / "bounds_r_sweep.tsv"),
            ],
        ),
        (
            "distortion histogram",
            [
                "analyze", "distortion", "--train", str(train), "--r", "200",
                "--seed", str(seed), "--pairs", "10000", "--pair-seed", "17",
                "--out", str(outdir / "distortion.tsv"),
            ],
        ),
        (
            "embedding-dimension sweep",
            [
                "analyze", "sweep-r", "--train", str(train), "--test", str(test),
                "--rs", "50,100,150,200,250,300,350,400", "--seed", str(seed),
                "--out", str(outdir / "sweep_r.tsv"),
            ],
        ),
        (
            "ensemble-size sweep",
            [
                "analyze", "sweep-ensemble", "--train", str(train),
                "--test", str(test), "--r", "100",
                "--sizes", "1,2,3,4,5,6,7,8,9,10", "--seed", str(seed),
                "--out", str(outdir / "sweep_ensemble.tsv"),
            ],
        ),
        (
            "LSH comparison",
            [
                "analyze", "lsh-compare", "--train", str(train), "--test", str(test),
                "--r", "100", "--seed", str(seed),
                "--predictions-out", str(outdir / "lsh_predictions.tsv"),
                "--out", str(outdir / "lsh_compare.tsv"),
            ],
        ),
    ]
    for name, argv in steps:
        t0 = time.perf_counter()
        rc = ogeec(argv)
        if rc != 0:
            print(f"step failed ({rc}): {name}", file=sys.stderr)
            raise SystemExit(rc)
        print(f"{name}: {time.perf_counter() - t0:.1f}s")
    print(f"report written under {outdir}/")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--outdir", default="desk_report", type=pathlib.Path)
    parser.add_argument("--seed", default=0, type=int)
    args = parser.parse_args()
    run(args.outdir, args.seed)

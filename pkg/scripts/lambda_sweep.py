"""Validation error of the joint objective across hidden-reconstruction weights.

    python scripts/lambda_sweep.py --values 0,0.05,0.1,0.2,0.5 --jobs 4
    python scripts/lambda_sweep.py --data data/mnist-desk/train-images-idx3-ubyte.gz \
        --labels data/mnist-desk/train-labels-idx1-ubyte.gz --layers 200
"""

import argparse
import sys

from ddae.cli import main as ddae


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data", default="synthetic:prototypes:600:16:3")
    ap.add_argument("--labels", default="")
    ap.add_argument("--layers", default="16")
    ap.add_argument("--values", default="0,0.05,0.1,0.2,0.5,1.0")
    ap.add_argument("--epochs", default="10")
    ap.add_argument("--ft-epochs", default="20")
    ap.add_argument("--seed", default="1")
    ap.add_argument("--jobs", default="1")
    ap.add_argument("--out", default="out/lambda_sweep")
    args = ap.parse_args()
    argv = [
        "sweep", "--key", "lam", "--values", args.values,
        "--data", args.data, "--layers", args.layers, "--objective", "DDAE_COM",
        "--epochs", args.epochs, "--ft-epochs", args.ft_epochs, "--eta", "0.01",
        "--momentum-start", "0.5", "--momentum-end", "0.5",
        "--valid-fraction", "0.2", "--seed", args.seed, "--jobs", args.jobs,
        "--record-time", "false", "--out", args.out,
    ]
    if args.labels:
        argv += ["--labels", args.labels]
    sys.exit(ddae(argv))


if __name__ == "__main__":
    main()

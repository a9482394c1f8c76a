"""Desk-scale MNIST run: one 200-unit layer pretrained with the joint
objective and with plain denoising, each fine-tuned for 20 epochs, then
evaluated on the 1000-image test subset. First-layer filters are exported
as PGM images.

    python scripts/make_mnist_subset.py --idx /path/to/mnist   # once
    python scripts/desk_mnist.py --out out/mnist
"""

import argparse
import os
import sys
from pathlib import Path

from ddae.cli import main as ddae

CONFIG = """\
data = {d}/train-images-idx3-ubyte.gz
labels = {d}/train-labels-idx1-ubyte.gz
test_data = {d}/t10k-images-idx3-ubyte.gz
test_labels = {d}/t10k-labels-idx1-ubyte.gz
layers = 200
objective = {objective}
input_noise = masking:25
hidden_noise = masking:25
lam = {lam}
eta = 0.01
batch_size = 20
epochs = {epochs}
momentum_start = 0.5
momentum_end = 0.5
ft_lr = 0.1
ft_epochs = 20
ft_batch_size = 20
ft_momentum_start = 0.5
ft_momentum_end = 0.5
seed = {seed}
record_time = false
"""


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    default_dir = os.environ.get("DDAE_MNIST_DIR", str(Path(__file__).resolve().parents[1] / "data" / "mnist-desk"))
    ap.add_argument("--data-dir", default=default_dir)
    ap.add_argument("--out", default="out/mnist")
    ap.add_argument("--lam", default="0.1")
    ap.add_argument("--epochs", default="10")
    ap.add_argument("--seed", default="1")
    args = ap.parse_args()
    for objective in ("DDAE_COM", "DAE"):
        out = Path(args.out) / objective.lower()
        out.mkdir(parents=True, exist_ok=True)
        cfg = out / "run.cfg"
        cfg.write_text(CONFIG.format(d=args.data_dir, objective=objective, lam=args.lam,
                                     epochs=args.epochs, seed=args.seed))
        print(f"== {objective}")
        steps = [
            ["pretrain", "--config", str(cfg), "--out", str(out)],
            ["finetune", "--config", str(cfg), "--out", str(out), "--model", str(out / "pretrained.ddae")],
            ["export-filters", "--config", str(cfg), "--model", str(out / "finetuned.ddae"),
             "--geometry", "28x28", "--out-dir", str(out / "filters")],
        ]
        for argv in steps:
            code = ddae(argv)
            if code:
                sys.exit(code)


if __name__ == "__main__":
    main()

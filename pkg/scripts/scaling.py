"""Wall time of one objective-and-gradient evaluation as the layer grows.

Prints seconds per sample for each (D_x, D_h) and the log-log slope against
D_x * D_h, so the per-sample cost can be compared with any claimed bound.

    python scripts/scaling.py --kind DDAE_COM
"""

import argparse
import time

import numpy as np

from ddae.autoencoder import NoiseSpec, ObjectiveSpec, draw_noise, init_layer, value_and_gradient
from ddae.numerics import make_rng


def seconds_per_sample(kind, dx, dh, batch, repeats):
    rng = make_rng(0)
    p = init_layer(rng, dx, dh)
    X = rng.random((batch, dx))
    spec = ObjectiveSpec(kind, NoiseSpec.masking(25), NoiseSpec.masking(25), lam=0.1, alpha=0.1)
    noise = draw_noise(rng, spec, X.shape, dh)
    value_and_gradient(p, X, spec, noise)
    t0 = time.perf_counter()
    for _ in range(repeats):
        value_and_gradient(p, X, spec, noise)
    return (time.perf_counter() - t0) / (repeats * batch)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kind", default="DDAE_COM")
    ap.add_argument("--sizes", default="64,128,256,512,1024")
    ap.add_argument("--batch", type=int, default=100)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]
    work, cost = [], []
    print("D_x   D_h   us/sample")
    for n in sizes:
        s = seconds_per_sample(args.kind, n, n, args.batch, args.repeats)
        work.append(n * n)
        cost.append(s)
        print(f"{n:<5} {n:<5} {1e6 * s:10.2f}")
    slope = np.polyfit(np.log(work), np.log(cost), 1)[0]
    print(f"log-log slope against D_x*D_h: {slope:.2f}")


if __name__ == "__main__":
    main()

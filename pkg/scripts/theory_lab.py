"""Train one small DAE layer, audit both reconstruction bounds on it and
trace the penalty and hidden-reconstruction descents on the 2-D surfaces.

    python scripts/theory_lab.py --out out/theory
"""

import argparse
from pathlib import Path

from ddae.autoencoder import DAE, NoiseSpec, ObjectiveSpec
from ddae.cli import AUDIT_HEADER, audit_rows, write_rows
from ddae.numerics import make_rng
from ddae.synthetic import rank2_sigmoid
from ddae.theory import audit_theorem1, audit_theorem2, penalty_descent_demo, rehr_descent_demo
from ddae.training import TrainConfig, train

TRAJ_HEADER = ["step", "x1", "x2", "h", "penalty", "loss", "distance"]


def traj_rows(traj):
    return [(t.step, t.x1, t.x2, t.h, t.penalty, t.loss, t.distance) for t in traj]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/theory")
    ap.add_argument("--samples", type=int, default=64)
    ap.add_argument("--dim", type=int, default=8)
    ap.add_argument("--hidden", type=int, default=16)
    ap.add_argument("--epochs", type=int, default=2000)
    ap.add_argument("--draws", type=int, default=256)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    X = rank2_sigmoid(make_rng(7), args.samples, args.dim)
    spec = ObjectiveSpec(DAE, NoiseSpec.gaussian(0.01), recon_loss="squared")
    cfg = TrainConfig(eta=0.05, batch_size=8, epochs=args.epochs, seed=args.seed,
                      momentum_start=0.5, momentum_end=0.9)
    rep = train(X, spec, cfg, n_hidden=args.hidden)
    print(f"trained: objective {rep.objectives[0]:.4g} -> {rep.objectives[-1]:.4g}")

    a1 = audit_theorem1(rep.params, X)
    write_rows(out / "audit_theorem1.csv", AUDIT_HEADER, audit_rows(a1))
    print(f"theorem 1: holding {a1.fraction_holding:.4f}, gated {a1.n_gated}/{a1.n}, "
          f"product form {a1.product_bound_fraction():.4f}")

    a2 = audit_theorem2(make_rng(args.seed), rep.params, X, NoiseSpec.masking(25), args.draws)
    write_rows(out / "audit_theorem2.csv", AUDIT_HEADER, audit_rows(a2))
    print(f"theorem 2: holding {a2.fraction_holding:.4f} over {args.draws} draws")

    for surface, x0 in (("plane", (1.0, 2.0)), ("exp_slope", (1.0, 0.5)), ("cone", (3.0, 4.0))):
        traj = penalty_descent_demo(surface, x0, 1e-3, 1000)
        write_rows(out / f"penalty_{surface}.csv", TRAJ_HEADER, traj_rows(traj))
        print(f"penalty descent on {surface}: x {x0} -> ({traj[-1].x1:.6g}, {traj[-1].x2:.6g})")
    traj = rehr_descent_demo("cone", (0.0, 0.0), (3.0, 4.0), 1e-3, 10_000)
    write_rows(out / "rehr_cone.csv", TRAJ_HEADER, traj_rows(traj))
    print(f"hidden-reconstruction descent on cone: h {traj[0].h:.3g} -> {traj[-1].h:.3g}")


if __name__ == "__main__":
    main()

"""Finite-difference training on the two-option toy task; prints loss and
training accuracy after every step."""

import argparse

from mhgrn.encoder import ModelParams
from mhgrn.qa import TOY_DIMS, accuracy, batch_loss, fd_train_step, toy_task


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=30)
    ap.add_argument("--lr", type=float, default=0.5)
    ap.add_argument("--eps", type=float, default=1e-5)
    ap.add_argument("--instances", type=int, default=20)
    ap.add_argument("--seed", type=int, default=13)
    args = ap.parse_args()
    batch = toy_task(args.instances, args.seed)
    params = ModelParams.init(**TOY_DIMS, seed=args.seed)
    print(f"params={params.size}  step 0  loss={batch_loss(params, batch):.4f}  acc={accuracy(params, batch):.2f}")
    for step in range(1, args.steps + 1):
        params, _ = fd_train_step(params, batch, eps=args.eps, lr=args.lr)
        print(f"step {step:3d}  loss={batch_loss(params, batch):.4f}  acc={accuracy(params, batch):.2f}", flush=True)


if __name__ == "__main__":
    main()

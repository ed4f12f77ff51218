"""Compare the metric-chain transfer function with brute-force trellis oracles.

Exhaustive enumeration is used for short blocks and Monte-Carlo BCJR for
long ones.  Both erasure laws are reported, with the z-score of each.
"""
import argparse

import numpy as np

from isi_scldpc.metric_chain import JOINT, PRODUCT, transfer_function
from isi_scldpc.oracle import sequence_oracle
from isi_scldpc.trellis import ChannelModel


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--channel", default="CH-III")
    ap.add_argument("--mode", choices=("exhaustive", "montecarlo"), default="montecarlo")
    ap.add_argument("-n", type=int, default=2000)
    ap.add_argument("--blocks", type=int, default=400)
    ap.add_argument("--points", type=int, default=4, help="grid points per axis")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    ch = ChannelModel.preset(args.channel)
    grid = np.linspace(0.2, 0.8, args.points)
    print(f"{'delta':>6s} {'eps':>6s} {'oracle':>9s} {'se':>8s} {'product':>9s} {'z':>6s} {'joint':>9s} {'z':>6s}")
    for k, (d, e) in enumerate((d, e) for d in grid for e in grid):
        res = sequence_oracle(ch, d, e, args.n, args.mode, blocks=args.blocks, seed=args.seed + k)
        row = [f"{d:6.3f}", f"{e:6.3f}", f"{res.rate:9.6f}", f"{res.stderr:8.2e}"]
        for law in (PRODUCT, JOINT):
            g = transfer_function(ch, d, e, law)
            z = f"{(res.rate - g) / res.stderr:6.1f}" if res.stderr > 0 else f"{'-':>6s}"
            row += [f"{g:9.6f}", z]
        print(" ".join(row))


if __name__ == "__main__":
    main()

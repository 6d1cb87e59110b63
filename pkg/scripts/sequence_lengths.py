"""Mean state and serialization lengths of scripted graph trajectories per size.

    python scripts/sequence_lengths.py --sizes 4,5,6,7,8,9,10 --n 200
"""

import argparse
import random

import numpy as np

from apmdm.tasks import arm, graph as G


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="4,5,6,7,8,9,10")
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--seed", type=int, default=11)
    a = ap.parse_args(argv)

    av = arm.arm_vocab(G.VOCAB)
    print(f"{'n':>3} {'m':>3} {'final':>7} {'state_avg':>9} {'state_max':>9} {'triplet':>8} {'steps':>6}")
    for n in map(int, a.sizes.split(",")):
        rng = random.Random(a.seed + n)
        trs = [G.graph_trajectory(G.random_instance(n, rng)) for _ in range(a.n)]
        lens = [len(x) for t in trs for x in t.states()]
        print(f"{n:>3} {trs[0].meta['m']:>3} {np.mean([len(t.final) for t in trs]):>7.1f} "
              f"{np.mean(lens):>9.1f} {max(lens):>9d} "
              f"{np.mean([len(arm.triplet_sequence(t, av)) for t in trs]):>8.1f} "
              f"{np.mean([len(t.steps) for t in trs]):>6.1f}")


if __name__ == "__main__":
    main()

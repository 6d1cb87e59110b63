"""Run the PRAM suite through both symbolic layouts and print the bridge reports.

    python scripts/verify_pram.py --variants AO,REWRITE
"""

import argparse

from apmdm import pram_suite
from apmdm.efasp.bridge import verify_source


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--programs", default="treesum16,treesum64,prefixmax8,broadcast16,countdown")
    ap.add_argument("--variants", default="AO,REWRITE")
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args(argv)

    suite = pram_suite.suite(a.seed)
    print(f"{'program':<12} {'variant':<8} {'match':<6} {'T':>5} {'steps':>6} {'ratio':>6} {'ctx':>7} {'budget':>7}")
    for name in a.programs.split(","):
        for v in a.variants.split(","):
            r = verify_source(suite[name][0], v)
            print(f"{name:<12} {v:<8} {str(r.match):<6} {r.rounds:>5} {r.decode_steps:>6} "
                  f"{r.ratio:>6.2f} {r.context_tokens:>7} {r.budget:>7}")


if __name__ == "__main__":
    main()

"""Decode held-out puzzles with the scripted denoiser and report trajectory sizes.

    python scripts/sudoku_oracle.py --puzzles data/sudoku_hard_100.txt
"""

import argparse

import numpy as np

from apmdm.tasks import sudoku as S


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--puzzles", default="data/sudoku_hard_100.txt")
    a = ap.parse_args(argv)

    solved, steps, branches = 0, [], []
    for p in S.load_puzzles(a.puzzles):
        tr = S.sudoku_trajectory(p)
        sol = S.solve(S.parse_puzzle(p))[0]
        solved += [S.ID_DIGIT.get(c[0]) for c in S.cells(tr.final)] == sol
        steps.append(len(tr.steps))
        branches.append(tr.meta["branches"])
    print(f"solved {solved}/{len(steps)}; tuples per puzzle mean {np.mean(steps):.1f} "
          f"max {max(steps)}; branches mean {np.mean(branches):.1f}")


if __name__ == "__main__":
    main()

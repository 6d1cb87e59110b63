"""Generate hard Sudoku puzzles (unique solution, singles alone do not finish).

    python scripts/make_puzzles.py --n 100 --seed 2024 --out data/sudoku_hard_100.txt
"""

import argparse
import random

from apmdm.tasks.sudoku import check_puzzle, generate_puzzle, needs_branching


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--out", default="data/sudoku_hard_100.txt")
    a = ap.parse_args(argv)
    rng = random.Random(a.seed)
    seen = set()
    with open(a.out, "w") as f:
        f.write(f"# {a.n} hard puzzles, seed {a.seed}; 0 marks a blank\n")
        while len(seen) < a.n:
            p = generate_puzzle(rng)
            if p in seen:
                continue
            check_puzzle(p)
            assert needs_branching(p)
            seen.add(p)
            f.write(p + "\n")
            f.flush()
    print(f"wrote {len(seen)} puzzles to {a.out}")


if __name__ == "__main__":
    main()

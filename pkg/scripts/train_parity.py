"""Train the d=4 parity denoiser on its four tuples and decode random inputs.

    python scripts/train_parity.py --lengths 2,8,64,256 --trials 1000
"""

import argparse
import json

import numpy as np

from apmdm.model import n_params, neural_denoiser
from apmdm.tasks import parity


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--lengths", default="2,8,64,256")
    ap.add_argument("--trials", type=int, default=1000)
    a = ap.parse_args(argv)

    res = parity.train_model(seed=a.seed, steps=a.steps)
    den = neural_denoiser(res.model, parity.VOCAB, cache=True)
    ok, total = parity.window_agreement(den)
    rng = np.random.default_rng(7)
    acc = {n: parity.accuracy(den, n, a.trials, rng) for n in map(int, a.lengths.split(","))}
    print(json.dumps({"params": n_params(res.model), "final_loss": res.final(),
                      "windows": f"{ok}/{total}", "accuracy": acc}, indent=2))


if __name__ == "__main__":
    main()

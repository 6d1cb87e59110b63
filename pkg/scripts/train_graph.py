"""Train a small denoiser on scripted min-cut trajectories and decode held-out graphs.

    python scripts/train_graph.py --n 4 --train 2000 --eval 500 --steps 4000 --out runs/graph4
"""

import argparse
import json
import random
import time
from pathlib import Path

from apmdm.model import ModelConfig, TrainConfig, load, n_params, neural_denoiser, save, train
from apmdm.tasks import graph as G


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=4)
    ap.add_argument("--train", type=int, default=2000)
    ap.add_argument("--eval", type=int, default=500)
    ap.add_argument("--steps", type=int, default=4000)
    ap.add_argument("--layers", type=int, default=4)
    ap.add_argument("--heads", type=int, default=4)
    ap.add_argument("--d", type=int, default=64)
    ap.add_argument("--lr", type=float, default=1e-3)
    ap.add_argument("--batch", type=int, default=64)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/graph")
    ap.add_argument("--init", help="checkpoint to continue from")
    a = ap.parse_args(argv)

    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(a.seed)
    trs = [G.graph_trajectory(G.random_instance(a.n, rng)) for _ in range(a.train)]
    longest = max(len(s.x) for t in trs for s in t.steps)
    model = None
    if a.init:
        model, _ = load(a.init)
        mc = model.cfg
    else:
        mc = ModelConfig(len(G.VOCAB), a.layers, a.heads, a.d, 4, max(longest + 16, 64), "rope")
    tc = TrainConfig(lr=a.lr, batch_size=a.batch, warmup=200, steps=a.steps, seed=a.seed, log_every=100)
    t0 = time.time()
    res = train(trs, G.VOCAB, mc, tc, model=model,
                on_log=lambda s, t: print(f"step {s:5d} loss {t['total']:.5f}", flush=True))
    took = time.time() - t0
    res.write_curves(out / "curves.csv")
    save(res.model, out / "model.npz", {"task": "graph", "n": a.n, "init": a.init})

    den = neural_denoiser(res.model, G.VOCAB)
    acc = G.decode_accuracy(den, a.n, a.eval, random.Random(10_000 + a.seed))
    m = {"n": a.n, "params": n_params(res.model), "train_trajectories": a.train,
         "steps": res.steps, "final_loss": res.final(), "train_seconds": round(took, 1),
         "eval": a.eval, "optimal": round(acc * a.eval), "accuracy": acc}
    (out / "metrics.json").write_text(json.dumps(m, indent=2))
    print(json.dumps(m))


if __name__ == "__main__":
    main()

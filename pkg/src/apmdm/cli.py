"""Command-line entry points.

Every run writes one manifest (command, resolved config, seed, paths,
output hashes, wall clock). Exit codes: 0 success, 1 bad input or config,
2 a declared acceptance threshold was missed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import random
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import ContractError, DenoiserOutput, StopCriterion, ao_constrain, decode

TASKS = ("sudoku", "parity", "graph", "dyck")
VARIANTS = ("ao", "ap", "rewrite", "masked-arm")
POLICY_NAMES = {"top-prob": "top-prob", "margin": "top-prob-margin", "ltr": "left-to-right"}

# Thresholds behind exit code 2, per (task, mode).
THRESHOLDS = {("parity", "oracle"): 1.0, ("parity", "trained"): 1.0,
              ("graph", "oracle"): 1.0, ("graph", "trained"): 0.99,
              ("sudoku", "oracle"): 1.0, ("sudoku", "trained"): 0.95}


class UsageError(Exception):
    pass


class ThresholdMiss(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: Optional[int]
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    hashes: dict = field(default_factory=dict)
    wall_clock: float = 0.0
    exit_code: int = 0

    def finish(self, code: int, started: float):
        self.exit_code = code
        self.wall_clock = round(time.time() - started, 3)
        self.hashes = {p: sha256(p) for p in self.outputs if Path(p).is_file()}


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# ------------------------------------------------------------------ reports


def emit_metrics(results: dict, out_dir, man: RunManifest, name: str = "metrics") -> str:
    """Write results as JSON plus a plain table; return the table."""
    table = format_table(results)
    if out_dir is not None:
        d = Path(out_dir)
        try:
            d.mkdir(parents=True, exist_ok=True)
            (d / f"{name}.json").write_text(json.dumps(results, indent=2, default=str) + "\n")
            (d / f"{name}.txt").write_text(table + "\n")
        except OSError as e:
            raise UsageError(f"cannot write metrics to {d}: {e}") from e
        man.outputs += [str(d / f"{name}.json"), str(d / f"{name}.txt")]
    return table


def format_table(results: dict) -> str:
    rows = results.get("rows")
    if rows:
        cols = list(rows[0])
        w = [max(len(str(c)), *(len(_fmt(r.get(c))) for r in rows)) for c in cols]
        lines = ["  ".join(str(c).ljust(n) for c, n in zip(cols, w))]
        lines += ["  ".join(_fmt(r.get(c)).ljust(n) for c, n in zip(cols, w)) for r in rows]
        return "\n".join(lines)
    flat = {k: v for k, v in results.items() if not isinstance(v, (list, dict))}
    n = max((len(k) for k in flat), default=0)
    return "\n".join(f"{k.ljust(n)}  {_fmt(v)}" for k, v in flat.items())


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


# ------------------------------------------------------------------ helpers


def _thresholds(text):
    if text is None:
        return None
    parts = [float(p) for p in str(text).split(",")]
    if len(parts) != 3 or not all(0 < p <= 1 for p in parts):
        raise UsageError("--thresholds takes three numbers in (0, 1], e.g. 0.5,0.5,0.5")
    return tuple(parts)


def _stop(kind: Optional[str], default: StopCriterion, max_steps: Optional[int]) -> StopCriterion:
    steps = max_steps or default.max_steps
    if kind is None:
        return StopCriterion(default.kind, default.end_token, steps)
    if kind == "fixpoint":
        return StopCriterion("fixpoint", max_steps=steps)
    if kind == "eos":
        return StopCriterion("end-token", "EOS", steps)
    if kind == "max":
        return StopCriterion("max-steps", max_steps=steps)
    raise UsageError(f"unknown stop {kind!r}")


def _load_ckpt(path):
    from .model import load

    try:
        return load(path)
    except (OSError, KeyError, ValueError) as e:
        raise UsageError(f"cannot load checkpoint {path}: {e}") from e


class _Task:
    """Per-task plumbing: vocabulary, inputs, denoisers and the correctness check."""

    def __init__(self, name: str):
        if name not in TASKS:
            raise UsageError(f"unknown task {name!r}; choose from {', '.join(TASKS)}")
        self.name = name
        if name == "parity":
            from .tasks import parity as mod
        elif name == "graph":
            from .tasks import graph as mod
        elif name == "sudoku":
            from .tasks import sudoku as mod
        else:
            from .tasks import dyck as mod
        self.mod = mod
        self.vocab = mod.VOCAB if name != "dyck" else mod.make_vocab(2)

    def scripted(self):
        if self.name == "dyck":
            return self.mod.dyck_denoiser(self.mod.DyckConfig())
        return self.mod.scripted_denoiser

    def neural(self, model, thresholds=None):
        from .model import neural_denoiser

        den = neural_denoiser(model, self.vocab, thresholds, cache=self.name == "parity")
        return self.mod.windowed(den) if self.name == "parity" else den

    def default_stop(self, inst) -> StopCriterion:
        if self.name == "graph":
            return StopCriterion("end-token", "EOS", 500)
        if self.name == "parity":
            return StopCriterion("fixpoint", max_steps=4 * len(inst) + 8)
        if self.name == "sudoku":
            return StopCriterion("fixpoint", max_steps=200_000)
        return StopCriterion("fixpoint", max_steps=200)

    def encode(self, inst):
        if self.name == "parity":
            return self.mod.encode(inst)
        if self.name == "dyck":
            return (self.vocab.id("BOS"),)
        return self.mod.encode(inst)

    def check(self, inst, final) -> bool:
        if self.name == "parity":
            return self.mod.result(final) == sum(inst) % 2
        if self.name == "graph":
            return self.mod.check_result(inst, final)["optimal"]
        if self.name == "sudoku":
            try:
                return self.mod.values(final) == self.mod.solve(self.mod.parse_puzzle(inst))[0]
            except ContractError:
                return False
        names = self.vocab.names(final)
        return names[-1] == "EOS" and self.mod.dyck_member(names[1:-1], 2)


def _parse_bits(text: str) -> list:
    if any(ch not in "01" for ch in text):
        raise UsageError(f"bits must be 0/1, got {text!r}")
    return [int(ch) for ch in text]


def _instances(task: _Task, a, rng: random.Random) -> list:
    """Evaluation or generation inputs from flags."""
    if task.name == "parity":
        if a.input:
            return [_parse_bits(a.input)]
        return [[rng.randrange(2) for _ in range(a.length)] for _ in range(a.n)]
    if task.name == "graph":
        if a.input:
            try:
                return [task.mod.GraphInstance.from_text(Path(a.input).read_text())]
            except (OSError, ValueError) as e:
                raise UsageError(f"bad graph file {a.input}: {e}") from e
        return [task.mod.random_instance(a.size, rng) for _ in range(a.n)]
    if task.name == "sudoku":
        if a.puzzles:
            try:
                ps = task.mod.load_puzzles(a.puzzles)
            except OSError as e:
                raise UsageError(f"cannot read {a.puzzles}: {e}") from e
            return ps[:a.n] if a.n else ps
        if a.input:
            return [a.input]
        return [task.mod.generate_puzzle(rng) for _ in range(a.n)]
    return [None] * a.n


def _trajectory(task: _Task, inst, rng: random.Random):
    m = task.mod
    if task.name == "parity":
        return m.parity_trajectory(inst)
    if task.name == "graph":
        return m.graph_trajectory(inst)
    if task.name == "sudoku":
        return m.sudoku_trajectory(inst)
    return m.dyck_trajectory(m.DyckConfig(), np.random.default_rng(rng.randrange(2**32)))


def _wrap_variant(den, variant: str, k, policy: str, vocab):
    if variant in (None, "ap"):
        return den, "ap"
    if variant == "rewrite":
        return den, "rewrite"
    if variant == "masked-arm":
        k, policy = 1, "left-to-right"

    def constrained(x, rng=None):
        out = den(x, rng)
        if not any(vocab.is_mask(t) for t in x):
            return DenoiserOutput(out.y, tuple((0, 0, 0) for _ in x), out.confidences, out.probs)
        return ao_constrain(out, x, k, policy, vocab)

    return constrained, "ap"


# ------------------------------------------------------------------ commands


def cmd_gen_data(a, man: RunManifest) -> dict:
    from .tasks.common import write_jsonl

    if a.task is None or a.out is None:
        raise UsageError("gen-data needs --task and --out")
    task = _Task(a.task)
    rng = random.Random(a.seed)
    a.n = a.n or 4
    if task.name == "parity" and a.canonical:
        from .tasks.common import Trajectory

        trs = []
        for t in task.mod.canonical_tuples():
            tr = Trajectory("parity", task.vocab, [t], t.x, {"canonical": True})
            trs.append(tr)
    else:
        trs = [_trajectory(task, inst, rng) for inst in _instances(task, a, rng)]
    Path(a.out).parent.mkdir(parents=True, exist_ok=True)
    n = write_jsonl(a.out, trs)
    man.outputs.append(str(a.out))
    return {"task": task.name, "episodes": len(trs), "tuples": n,
            "replay_ok": all(t.replay_ok() for t in trs)}


def cmd_train(a, man: RunManifest) -> dict:
    from .model import ModelConfig, TrainConfig, n_params, save, train
    from .tasks.common import read_jsonl

    if a.task is None or a.out is None:
        raise UsageError("train needs --task and --out")
    task = _Task(a.task)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    if a.data:
        man.inputs.append(a.data)
        try:
            data = read_jsonl(a.data, task.vocab)
        except (OSError, ValueError, KeyError) as e:
            raise UsageError(f"cannot read {a.data}: {e}") from e
    elif task.name == "parity":
        data = task.mod.canonical_tuples()
    else:
        raise UsageError("train needs --data for this task")
    cfg = a.config_dict.get("model", {})
    tcfg = a.config_dict.get("train", {})
    if task.name == "parity" and not cfg:
        cfg = {"layers": 1, "heads": 1, "d": 4, "max_len": task.mod.WINDOW, "pos": "none"}
        tcfg = {"lr": 1e-2, "warmup": 20, "batch_size": 4, "steps": 2000, **tcfg}
    mc = ModelConfig(vocab_size=len(task.vocab), **cfg)
    if a.thresholds:
        mc = ModelConfig(**{**mc.to_dict(), "thresholds": _thresholds(a.thresholds)})
    lengths = [len(s.x) for d in data for s in (d.steps if hasattr(d, "steps") else [d])]
    if lengths and max(lengths) > mc.max_len:
        raise UsageError(f"data has states of length {max(lengths)} > max_len {mc.max_len}")
    tc = TrainConfig(**{**tcfg, "seed": a.seed, **({"steps": a.steps} if a.steps else {})})
    res = train(data, task.vocab, mc, tc)
    ck = out / "model.npz"
    save(res.model, ck, {"task": task.name})
    res.write_curves(out / "curves.csv")
    man.outputs += [str(ck), str(out / "curves.csv")]
    return {"task": task.name, "params": n_params(res.model), "steps": res.steps,
            "diverged": res.diverged, "final_loss": res.final("total"),
            "final_unmask": res.final("unmask"), "checkpoint": str(ck)}


def cmd_eval(a, man: RunManifest) -> dict:
    if a.task is None:
        raise UsageError("eval needs --task")
    task = _Task(a.task)
    if task.name == "dyck":
        raise UsageError("use dyck-sample for the Dyck task")
    mode = "oracle"
    den = task.scripted()
    if a.ckpt:
        model, _ = _load_ckpt(a.ckpt)
        man.inputs.append(a.ckpt)
        den = task.neural(model, _thresholds(a.thresholds))
        mode = "trained"
    if a.puzzles:
        man.inputs.append(a.puzzles)
    a.n = a.n or (100 if task.name != "sudoku" else 10)
    rng = random.Random(a.seed)
    rows = []
    if task.name == "graph":
        sizes = [int(s) for s in a.sizes.split(",")] if a.sizes else [a.size]
    elif task.name == "parity":
        sizes = [int(s) for s in a.sizes.split(",")] if a.sizes else [a.length]
    else:
        sizes = [None]
    for size in sizes:
        if size is not None:
            if task.name == "graph":
                a.size = size
            else:
                a.length = size
        insts = _instances(task, a, rng)
        ok = 0
        steps = 0
        for inst in insts:
            x0 = task.encode(inst)
            try:
                tr = decode(den, x0, _stop(a.stop, task.default_stop(inst), a.max_steps),
                            seed=a.seed, vocab=task.vocab)
                ok += bool(task.check(inst, tr.final))
                steps += len(tr)
            except ContractError:
                pass
        row = {"size": size if size is not None else "-", "solved": ok, "total": len(insts),
               "accuracy": ok / max(len(insts), 1), "mean_steps": steps / max(len(insts), 1)}
        rows.append(row)
    res = {"task": task.name, "mode": mode, "rows": rows}
    need = a.min_accuracy if a.min_accuracy is not None else THRESHOLDS[(task.name, mode)]
    res["threshold"] = need
    res["pass"] = all(r["accuracy"] >= need for r in rows)
    return res


def cmd_decode(a, man: RunManifest) -> dict:
    if a.task is None:
        raise UsageError("decode needs --task")
    task = _Task(a.task)
    rng = random.Random(a.seed)
    a.n = 1
    inst = _instances(task, a, rng)[0]
    den = task.scripted()
    if a.ckpt:
        model, _ = _load_ckpt(a.ckpt)
        man.inputs.append(a.ckpt)
        den = task.neural(model, _thresholds(a.thresholds))
    policy = POLICY_NAMES.get(a.policy or "top-prob")
    if policy is None:
        raise UsageError(f"unknown policy {a.policy!r}")
    den, mode = _wrap_variant(den, a.variant, a.k, policy, task.vocab)
    tr = decode(den, task.encode(inst), _stop(a.stop, task.default_stop(inst), a.max_steps),
                seed=a.seed, vocab=task.vocab, mode=mode)
    if a.out:
        Path(a.out).parent.mkdir(parents=True, exist_ok=True)
        Path(a.out).write_text(tr.to_jsonl())
        man.outputs.append(str(a.out))
    final = task.vocab.names(tr.final)
    return {"task": task.name, "variant": a.variant or "ap", "steps": len(tr),
            "stop_reason": tr.stop_reason, "final_length": len(final),
            "correct": bool(task.check(inst, tr.final)), "final": " ".join(final)}


def _program_source(a, man: RunManifest) -> tuple:
    from . import pram_suite

    if a.program is None:
        raise UsageError("--program is required")
    named = pram_suite.suite(a.seed or 0)
    stem = Path(a.program).stem
    if not Path(a.program).exists() and stem in named:
        return named[stem][0], stem
    try:
        src = Path(a.program).read_text()
    except OSError as e:
        raise UsageError(f"cannot read {a.program}: {e}") from e
    man.inputs.append(a.program)
    return src, stem


def cmd_run_pram(a, man: RunManifest) -> dict:
    from .pram import AssemblyError, assemble, brent_bound, init_machine, run

    src, name = _program_source(a, man)
    try:
        prog = assemble(src)
        m = init_machine(prog, P=a.procs, S=a.mem, w=a.word)
    except (AssemblyError, ValueError) as e:
        raise UsageError(str(e)) from e
    final, met = run(m, max_rounds=a.max_steps or 100_000)
    res = {"program": name, "P": m.P, "S": m.S, "w": m.w, "rounds": met.rounds, "work": met.work,
           "brent_bound": brent_bound(met.work, met.rounds, m.P), "terminated": met.terminated,
           "output": final.output if met.trap is None else None,
           "trap": None if met.trap is None else asdict(met.trap)}
    if met.trap is not None or not met.terminated:
        res["error"] = "trap" if met.trap else "did not halt"
    return res


def cmd_verify_sim(a, man: RunManifest) -> dict:
    from .efasp.bridge import verify_simulation
    from .pram import AssemblyError, assemble, init_machine

    src, name = _program_source(a, man)
    try:
        prog = assemble(src)
        m = init_machine(prog, P=a.procs, S=a.mem, w=a.word)
    except (AssemblyError, ValueError) as e:
        raise UsageError(str(e)) from e
    variant = (a.variant or "ao").upper()
    if variant not in ("AO", "REWRITE"):
        raise UsageError("verify-sim supports --variant ao or rewrite")
    rep = verify_simulation(prog, m, variant)
    res = {"program": name, **rep.summary()}
    if variant == "AO":
        res["pass"] = rep.match and rep.ratio <= 4 and rep.context_tokens <= rep.budget
    else:
        res["pass"] = rep.match and rep.context_tokens <= rep.budget
    return res


def cmd_run_efasp(a, man: RunManifest) -> dict:
    from .efasp.bridge import code_width, pram_vocab
    from .efasp.evaluator import EvalContext, evaluate, _py
    from .efasp.lang import ParseError, parse_program

    if a.program is None:
        raise UsageError("run-efasp needs --program")
    try:
        text = Path(a.program).read_text()
    except OSError as e:
        raise UsageError(f"cannot read {a.program}: {e}") from e
    man.inputs.append(a.program)
    try:
        expr = parse_program(text)
    except ParseError as e:
        raise UsageError(f"parse error: {e}") from e
    w = a.word or 8
    vocab = pram_vocab(code_width(w))
    toks = (a.input or "").replace(",", " ").split()
    if not toks:
        raise UsageError("run-efasp needs --input tokens, e.g. \"3 1 SEP\"")
    try:
        x = tuple(int(t) if t.lstrip("-").isdigit() else vocab.id(t) for t in toks)
    except (KeyError, ValueError) as e:
        raise UsageError(f"bad token: {e}") from e
    ctx = EvalContext(x, vocab, pos=a.pos or "SEQ", word=w)
    try:
        vals = evaluate(expr, ctx)
    except (TypeError, ValueError, KeyError, IndexError) as e:
        raise UsageError(f"evaluation failed ({e}); bridge programs run under verify-sim") from e
    return {"program": Path(a.program).stem, "length": len(x),
            "values": [_py(v) for v in vals], "output": " ".join(str(_py(v)) for v in vals)}


def cmd_dyck_sample(a, man: RunManifest) -> dict:
    from .tasks.dyck import DyckConfig, dyck_check, dyck_sample

    cfg = DyckConfig(k=a.k or 2, **a.config_dict.get("dyck", {}))
    rng = np.random.default_rng(a.seed)
    n = a.n or 10
    samples = [dyck_sample(cfg, rng) for _ in range(n)]
    bad = [s for s in samples if not dyck_check(s.tokens, cfg.k)[0]]
    if a.out:
        Path(a.out).parent.mkdir(parents=True, exist_ok=True)
        with open(a.out, "w") as f:
            for s in samples:
                f.write(" ".join(s.tokens) + "\n")
        man.outputs.append(str(a.out))
    lens = [len(s.tokens) for s in samples]
    return {"k": cfg.k, "samples": n, "members": n - len(bad), "mean_length": float(np.mean(lens)),
            "max_length": max(lens), "resampled": sum(s.resampled for s in samples),
            "pass": not bad}


def cmd_selftest(a, man: RunManifest) -> dict:
    """Fast end-to-end checks of every component."""
    from .core import rewrite_as_apmdm, rewrite_step, apply_transition, Vocab
    from .efasp.bridge import verify_source
    from . import pram_suite
    from .tasks import dyck, graph, parity, sudoku

    rows = []

    def check(name, fn):
        t = time.time()
        try:
            ok = bool(fn())
        except Exception as e:  # report, do not crash
            ok = False
            name += f" ({type(e).__name__}: {e})"
        rows.append({"check": name, "ok": ok, "seconds": round(time.time() - t, 2)})

    rng = random.Random(a.seed)

    def three_step():
        v = Vocab(["a", "b", "c", "M"])
        for _ in range(200):
            n = rng.randrange(1, 9)
            x = tuple(rng.randrange(4) for _ in range(n))
            y = tuple(rng.randrange(3) for _ in range(n))
            r = tuple(rng.randrange(2) for _ in range(n))
            s = x
            for xi, out in rewrite_as_apmdm(x, y, r, v):
                s = apply_transition(xi, out, v)
            if s != rewrite_step(x, y, r):
                return False
        return True

    check("three-step rewrite", three_step)
    src, want = pram_suite.suite(0)["treesum16"]
    check("verify-sim treesum16 AO", lambda: verify_source(src, "AO").match)
    check("verify-sim treesum16 REWRITE", lambda: verify_source(src, "REWRITE").match)
    check("parity scripted n<=10", lambda: all(
        parity.result(parity.run_scripted(b).final) == sum(b) % 2
        for n in range(11) for b in [[rng.randrange(2) for _ in range(n)] for _ in range(5)]))
    check("graph scripted n=5", lambda: all(
        graph.check_result(g, graph.run_scripted(g).final)["optimal"]
        for g in [graph.random_instance(5, rng) for _ in range(10)]))
    check("sudoku 17-clue", lambda: sudoku.sudoku_trajectory(sudoku.SEVENTEEN).meta["solved"])
    check("dyck samples", lambda: all(
        dyck.dyck_member(dyck.dyck_sample(dyck.DyckConfig(), np.random.default_rng(i)).tokens, 2)
        for i in range(100)))
    res = {"rows": rows, "pass": all(r["ok"] for r in rows)}
    return res


COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train, "eval": cmd_eval, "decode": cmd_decode,
            "run-pram": cmd_run_pram, "run-efasp": cmd_run_efasp, "verify-sim": cmd_verify_sim,
            "dyck-sample": cmd_dyck_sample, "selftest": cmd_selftest}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n\n{self.format_usage()}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="apmdm", description="Any-process masked diffusion toolkit.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name, help=(COMMANDS[name].__doc__ or name).strip().splitlines()[0])
        s.add_argument("--task", choices=TASKS)
        s.add_argument("--variant", choices=VARIANTS)
        s.add_argument("--seed", type=int)
        s.add_argument("--out")
        s.add_argument("--ckpt")
        s.add_argument("--steps", type=int, help="training steps")
        s.add_argument("--max-steps", type=int, help="decode or run budget")
        s.add_argument("--stop", choices=("fixpoint", "eos", "max"))
        s.add_argument("--k", type=int)
        s.add_argument("--policy", choices=tuple(POLICY_NAMES))
        s.add_argument("--thresholds", help="r,i,d control thresholds")
        s.add_argument("--config", help="JSON file with defaults; flags win")
        s.add_argument("--manifest", help="manifest path (default derived from --out)")
        s.add_argument("--n", type=int, help="number of episodes, instances or samples")
        s.add_argument("--length", type=int, help="parity input length")
        s.add_argument("--size", type=int, help="graph node count")
        s.add_argument("--sizes", help="comma-separated sizes for eval")
        s.add_argument("--input", help="single instance: bits, graph file, puzzle or tokens")
        s.add_argument("--puzzles", help="file of 81-character puzzles")
        s.add_argument("--data", help="trajectory file for training")
        s.add_argument("--program", help="PRAM assembly, suite name or E-FASP source")
        s.add_argument("--procs", type=int)
        s.add_argument("--mem", type=int)
        s.add_argument("--word", type=int)
        s.add_argument("--pos", choices=("SEQ", "BiPE"))
        s.add_argument("--min-accuracy", type=float)
        s.add_argument("--canonical", action="store_true", help="parity: the four training tuples")
    return p


DEFAULTS = {"seed": 0, "length": 8, "size": 4}


def _resolve(a) -> argparse.Namespace:
    cfg = {}
    if a.config:
        try:
            cfg = json.loads(Path(a.config).read_text())
        except (OSError, ValueError) as e:
            raise UsageError(f"bad config {a.config}: {e}") from e
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object")
    a.config_dict = {k: v for k, v in cfg.items() if isinstance(v, dict)}
    for k, v in {**DEFAULTS, **{k: v for k, v in cfg.items() if not isinstance(v, dict)}}.items():
        key = k.replace("-", "_")
        if not hasattr(a, key):
            raise UsageError(f"unknown config key {k!r}")
        if getattr(a, key) is None:
            setattr(a, key, v)
    _thresholds(a.thresholds)
    return a


FILE_OUTPUTS = ("gen-data", "decode", "dyck-sample")  # --out names a file for these


def _out_is_dir(a) -> bool:
    o = Path(a.out)
    return a.command not in FILE_OUTPUTS and (o.is_dir() or not o.suffix)


def _manifest_path(a) -> Path:
    if a.manifest:
        return Path(a.manifest)
    if a.out:
        o = Path(a.out)
        return o / "manifest.json" if _out_is_dir(a) else o.with_name(o.name + ".manifest.json")
    return Path(f"apmdm-{a.command}.manifest.json")


def dispatch(argv=None) -> int:
    started = time.time()
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    if a.command is None:
        parser.print_help(sys.stderr)
        return 1
    man = None
    code = 0
    try:
        a = _resolve(a)
        snap = {k: v for k, v in vars(a).items() if k not in ("config_dict",)}
        snap["config_sections"] = a.config_dict
        man = RunManifest(a.command, snap, a.seed)
        res = COMMANDS[a.command](a, man)
        out_dir = None
        if a.out:
            o = Path(a.out)
            out_dir = o if _out_is_dir(a) else o.parent
        table = emit_metrics(res, out_dir, man, f"{a.command}-metrics")
        print(table)
        if res.get("error"):
            code = 1
        elif res.get("pass") is False:
            code = 2
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        code = 1
    except ContractError as e:
        print(f"error: {e}", file=sys.stderr)
        code = 1
    if man is None:
        man = RunManifest(a.command, {}, None)
    man.finish(code, started)
    path = _manifest_path(a)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(asdict(man), indent=2, default=str) + "\n")
    except OSError as e:
        print(f"error: cannot write manifest {path}: {e}", file=sys.stderr)
        return 1
    return code


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()

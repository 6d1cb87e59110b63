"""Running E-FASP programs as symbolic denoisers that simulate a PRAM.

Two layouts are supported. AO appends one round of processor blocks per
decode step and only ever unmasks; REWRITE keeps memory and processor
state in place and overwrites it each step, so its length never grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import numpy as np

from ..core import (ContractError, DenoiserOutput, StopCriterion, Vocab, ZERO, ao_constrain,
                    decode)
from ..pram import OPCODES, PramMachine, Program, RoundRecord, init_machine, run
from .evaluator import EvalContext, evaluate
from .lang import Node, parse_program

SPECIALS = ("SEP", "NIL", "HALT", "M")
HALTED_OP = len(OPCODES)  # table row for processors that already halted

PROGRAMS = {
    "AO": "ao_pram.efasp",
    "REWRITE": "rewrite_pram.efasp",
    "REWRITE3": "rewrite_pram_r3.efasp",
}
BLOCK = {"AO": 8, "REWRITE": 8, "REWRITE3": 4}
NREGS = {"AO": 5, "REWRITE": 5, "REWRITE3": 3}


def _variant(v: str) -> str:
    v = v.upper()
    if v not in PROGRAMS:
        raise ContractError(f"unknown variant {v!r}")
    return v


def load_program(variant: str) -> Node:
    folder = resources.files(__package__).joinpath("programs")
    text = folder.joinpath(PROGRAMS[_variant(variant)]).read_text()
    return parse_program(text)


def code_width(w: int, program: Optional[Program] = None) -> int:
    """Bits of the numeric token range: the word, widened to hold every pc."""
    n = len(program) if program is not None else 0
    return max(w, math.ceil(math.log2(n + 1)) if n else 1)


def pram_vocab(width: int) -> Vocab:
    return Vocab([str(i) for i in range(1 << width)] + list(SPECIALS), mask_tokens=("M",),
                 special={"sep": "SEP", "nil": "NIL", "halt": "HALT"})


def instruction_table(program: Program, w: int) -> np.ndarray:
    """Rows (op, r, s, imm mod 2^w, target), plus a final row for halted processors."""
    rows = []
    for ins in program.instructions:
        rows.append((OPCODES.index(ins.op), ins.r or 0, ins.s or 0, (ins.c or 0) % (1 << w),
                     ins.target or 0))
    rows.append((HALTED_OP, 0, 0, 0, 0))
    return np.array(rows, dtype=np.int64)


def _constants(program: Program, w: int) -> dict:
    if w & (w - 1):
        raise ContractError(f"word width {w} must be a power of two for the shift circuit")
    c = {op: i for i, op in enumerate(OPCODES)}
    c.update(W=w, LOGW=int(math.log2(w)), OUT=program.out, BIG=1 << 22)
    return c


def _num(x: int, vocab: Vocab) -> int:
    if not 0 <= x < len(vocab) - len(SPECIALS):
        raise ContractError(f"value {x} outside the codec range")
    return x


def pram_bridge_encode(m: PramMachine, variant: str, length: Optional[int] = None,
                       vocab: Optional[Vocab] = None) -> tuple:
    """Initial decode state for a freshly initialized machine.

    AO: (P, addr/value pairs of nonzero cells, SEP, masks). REWRITE: (P,
    M[0..k) up to the last nonzero cell, masks for the remaining cells and
    the processor region). length pads AO with masks; REWRITE ignores it.
    """
    variant = _variant(variant)
    vocab = vocab or pram_vocab(code_width(m.w, m.program))
    M = vocab.mask
    head = [_num(m.P, vocab)]
    if variant == "AO":
        for a, v in enumerate(m.mem):
            if v:
                head += [_num(a, vocab), _num(v, vocab)]
        head.append(vocab.id("SEP"))
        length = len(head) + 8 * m.P + 16 if length is None else length
        return tuple(head) + (M,) * max(0, length - len(head))
    nz = [a for a, v in enumerate(m.mem) if v]
    k = nz[-1] + 1 if nz else 0
    head += [_num(v, vocab) for v in m.mem[:k]]
    return tuple(head) + (M,) * (m.S - k + BLOCK[variant] * m.P)


@dataclass
class SymbolicDenoiser:
    """A Denoiser backed by an E-FASP program.

    AO: y is the argmax of the emitted logits, score the argmax logit;
    zero-score masks keep their mask. REWRITE: the last output column is
    the rewrite bit, carried in the remask field for rewrite-mode decoding.
    """

    expr: Node
    variant: str
    template: EvalContext

    def __post_init__(self):
        self.variant = _variant(self.variant)
        out = evaluate(self.expr, self.template)
        want = len(self.template.codec) + (0 if self.variant == "AO" else 1)
        if out.ndim != 2 or out.shape[1] != want:
            raise ContractError(f"program emits dim {out.shape[1:] or 0}, variant needs {want}")

    def raw(self, x) -> np.ndarray:
        return evaluate(self.expr, self.template.with_tokens(x))

    def __call__(self, x, rng=None) -> DenoiserOutput:
        vocab = self.template.codec
        out = self.raw(x)
        V = len(vocab)
        logits = out[:, :V]
        y = np.argmax(logits, axis=1)
        score = logits[np.arange(len(x)), y]
        fill = vocab.base_ids[0]
        y = tuple(fill if vocab.is_mask(int(t)) else int(t) for t in y)
        if self.variant == "AO":
            prop = DenoiserOutput(y, (ZERO,) * len(x), tuple(float(s) for s in score))
            return ao_constrain(prop, tuple(x), None, "top-prob", vocab)
        bit = out[:, V]
        return DenoiserOutput(y, tuple((int(b != 0), 0, 0) for b in bit))


def symbolic_denoiser(expr: Node, variant: str, template: EvalContext) -> SymbolicDenoiser:
    return SymbolicDenoiser(expr, variant, template)


@dataclass
class SimReport:
    variant: str
    match: bool
    pram_output: int
    decoded_output: Optional[int]
    rounds: int
    decode_steps: int
    context_tokens: int
    budget: int  # 16*P*T for AO, 4*S for REWRITE
    max_index: int  # largest position ever written, 0-based
    blocks_ok: bool
    divergence: Optional[dict] = None
    stop_reason: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        return self.decode_steps / max(self.rounds, 1)

    def summary(self) -> dict:
        return {"variant": self.variant, "match": self.match, "pram_output": self.pram_output,
                "decoded_output": self.decoded_output, "rounds": self.rounds,
                "decode_steps": self.decode_steps, "ratio": round(self.ratio, 4),
                "context_tokens": self.context_tokens, "budget": self.budget,
                "blocks_ok": self.blocks_ok, "divergence": self.divergence,
                "stop_reason": self.stop_reason}


def _expected_blocks(history, P: int, nregs: int, block: int, vocab: Vocab, with_log: bool):
    halt, nil = vocab.id("HALT"), vocab.id("NIL")
    for rec in history:
        row = []
        for pid in range(P):
            pc = rec.pcs[pid]
            blk = [halt if pc is None else pc] + list(rec.regs[pid][:nregs])
            if with_log:
                a_v = rec.stores.get(pid)
                blk += [a_v[0], a_v[1]] if a_v else [nil, nil]
            blk += [nil] * (block - len(blk))
            row += blk
        yield row


def _first_diff(got, want, offset: int):
    for j, (g, w) in enumerate(zip(got, want)):
        if g != w:
            return offset + j
    return offset + min(len(got), len(want)) if len(got) != len(want) else None


def verify_simulation(program: Program, machine: PramMachine, variant: str,
                      max_rounds: int = 100_000) -> SimReport:
    """Run the reference machine and the symbolic decode side by side."""
    variant = _variant(variant)
    if program.max_register() >= NREGS[variant]:
        raise ContractError(f"{variant} layout carries R0..R{NREGS[variant] - 1} only")
    final, met = run(machine, max_rounds=max_rounds, record=True)
    if met.trap is not None or not met.terminated:
        raise ContractError(f"reference run did not halt cleanly: {met.trap}")
    T, P, w = met.rounds, machine.P, machine.w
    vocab = pram_vocab(code_width(w, program))
    block = BLOCK[variant]
    if variant == "AO":
        unit = 8 * P + 8
        n_in = 2 * sum(1 for v in machine.mem if v) + 2
        x0 = pram_bridge_encode(machine, variant, n_in + (T + 2) * unit, vocab)
        pos, budget = "SEQ", 16 * P * T
    else:
        x0 = pram_bridge_encode(machine, variant, vocab=vocab)
        pos, budget = "BiPE", 4 * machine.S
    ctx = EvalContext(x0, vocab, pos=pos, word=w, constants=_constants(program, w),
                      table=instruction_table(program, w))
    den = symbolic_denoiser(load_program(variant), variant, ctx)
    mode = "ap" if variant == "AO" else "rewrite"
    trace = decode(den, x0, StopCriterion("fixpoint", max_steps=4 * T + 8), seed=0, vocab=vocab,
                   mode=mode)
    steps = len(trace.outputs)
    states = trace.states
    touched = [j for s0, s1 in zip(states, states[1:]) for j, (a, b) in enumerate(zip(s0, s1)) if a != b]
    max_index = max(touched, default=-1)
    xf = trace.final
    numeric = len(vocab) - len(SPECIALS)
    div, blocks_ok, decoded = None, True, None
    nregs = NREGS[variant]
    want = list(_expected_blocks(met.history, P, nregs, block, vocab, variant == "AO"))
    start_rec = RoundRecord(machine.pcs, machine.regs, {})
    init_row = next(_expected_blocks([start_rec], P, nregs, block, vocab, variant == "AO"))
    if variant == "AO":
        sep = vocab.id("SEP")
        seps = [j for j, t in enumerate(xf) if t == sep]
        # block k (k = 0 is the initial state) follows SEP number k
        for k, row in enumerate([init_row] + want):
            if k >= len(seps):
                div, blocks_ok = {"round": k, "position": None, "reason": "missing round"}, False
                break
            start = seps[k] + 8
            got = list(xf[start:start + 8 * P])
            j = _first_diff(got, row, start)
            if j is not None:
                div, blocks_ok = {"round": k, "position": j}, False
                break
        if seps:
            j = seps[-1] + 8
            if j < len(xf) and xf[j] < numeric:
                decoded = xf[j]
        context = (max(j for j, t in enumerate(xf) if t != vocab.mask) + 1)
    else:
        proc_b = len(x0) - block * P
        for k, row in enumerate(want, start=1):
            if k + 1 >= len(states):
                div, blocks_ok = {"round": k, "position": None, "reason": "missing round"}, False
                break
            got = list(states[k + 1][proc_b:])
            j = _first_diff(got, row, proc_b)
            if j is not None:
                div, blocks_ok = {"round": k, "position": j}, False
                break
        mem = xf[1:1 + machine.S]
        if list(mem) != list(final.mem) and div is None:
            j = next(a for a in range(machine.S) if mem[a] != final.mem[a])
            div, blocks_ok = {"round": T, "position": j + 1, "reason": "memory"}, False
        t = xf[1 + program.out]
        decoded = t if t < numeric else None
        context = len(xf)
    match = decoded == final.output and trace.stop_reason == "fixpoint"
    return SimReport(variant, match, final.output, decoded, T, steps, context, budget, max_index,
                     blocks_ok, div, trace.stop_reason, {"work": met.work, "length": len(x0)})


def verify_source(src: str, variant: str, **kw) -> SimReport:
    from ..pram import assemble

    prog = assemble(src)
    return verify_simulation(prog, init_machine(prog), variant, **kw)

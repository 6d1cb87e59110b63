"""Word-RAM instruction set and a synchronous CREW PRAM.

Assembly format, one instruction per line::

    .procs 4          ; directives: .procs .memsize .word .mem addr value .out addr
    loop: LOAD R2, [R3]
          STORE [R3], R2
          LOADI R2, -3
          ADD R2, R1    ; also SUB AND XOR SHL SHR
          BRZ R2, loop
          JMP loop
          HALT

Arithmetic is mod 2^w, shift amounts are taken mod w and SHR is logical.
A round executes every live processor against the round-start memory,
then commits register writes, memory writes and program counters.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Optional

OPCODES = ("LOAD", "STORE", "LOADI", "ADD", "SUB", "AND", "XOR", "SHL", "SHR", "BRZ", "JMP", "HALT")
ALU = ("ADD", "SUB", "AND", "XOR", "SHL", "SHR")
IMM_MIN, IMM_MAX = -15, 15
DEFAULT_NREGS = 6


class AssemblyError(ValueError):
    def __init__(self, msg: str, line: int):
        super().__init__(f"line {line}: {msg}")
        self.line = line


@dataclass(frozen=True)
class Instruction:
    op: str
    r: Optional[int] = None
    s: Optional[int] = None
    c: Optional[int] = None
    target: Optional[int] = None  # resolved label index
    label: Optional[str] = None
    line: int = 0

    def __str__(self):
        if self.op == "LOAD":
            return f"LOAD R{self.r}, [R{self.s}]"
        if self.op == "STORE":
            return f"STORE [R{self.s}], R{self.r}"
        if self.op == "LOADI":
            return f"LOADI R{self.r}, {self.c}"
        if self.op in ALU:
            return f"{self.op} R{self.r}, R{self.s}"
        if self.op == "BRZ":
            return f"BRZ R{self.r}, {self.label}"
        if self.op == "JMP":
            return f"JMP {self.label}"
        return "HALT"


@dataclass(frozen=True)
class Program:
    instructions: tuple
    labels: dict
    procs: Optional[int] = None
    memsize: Optional[int] = None
    word: Optional[int] = None
    mem: tuple = ()  # (addr, value) pairs
    out: int = 0
    nregs: int = DEFAULT_NREGS

    def __len__(self):
        return len(self.instructions)

    def max_register(self) -> int:
        regs = [-1]
        for ins in self.instructions:
            regs += [x for x in (ins.r, ins.s) if x is not None]
        return max(regs)


_LABEL = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*:")
_REG = re.compile(r"^[Rr](\d+)$")
_MEM = re.compile(r"^\[\s*([Rr]\d+)\s*\]$")


def _reg(tok: str, line: int, nregs: int) -> int:
    m = _REG.match(tok.strip())
    if not m:
        raise AssemblyError(f"expected register, got {tok.strip()!r}", line)
    k = int(m.group(1))
    if k >= nregs:
        raise AssemblyError(f"register R{k} out of range (R0..R{nregs - 1})", line)
    return k


def _memreg(tok: str, line: int, nregs: int) -> int:
    m = _MEM.match(tok.strip())
    if not m:
        raise AssemblyError(f"expected [Rs], got {tok.strip()!r}", line)
    return _reg(m.group(1), line, nregs)


def _int(tok: str, line: int) -> int:
    try:
        return int(tok.strip(), 0)
    except ValueError:
        raise AssemblyError(f"expected integer, got {tok.strip()!r}", line) from None


def assemble(text: str, nregs: int = DEFAULT_NREGS, imm_range=(IMM_MIN, IMM_MAX)) -> Program:
    raw = []  # (op, operands, line, label-or-None)
    labels: dict = {}
    directives = {"mem": []}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split(";", 1)[0].strip()
        while True:
            m = _LABEL.match(line)
            if not m:
                break
            name = m.group(1)
            if name.upper() in OPCODES:
                break
            if name in labels:
                raise AssemblyError(f"duplicate label {name!r}", lineno)
            labels[name] = len(raw)
            line = line[m.end():].strip()
        if not line:
            continue
        if line.startswith("."):
            parts = line[1:].split()
            key = parts[0].lower()
            args = [_int(p, lineno) for p in parts[1:]]
            if key == "mem" and len(args) == 2:
                directives["mem"].append((args[0], args[1]))
            elif key in ("procs", "memsize", "word", "out") and len(args) == 1:
                directives[key] = args[0]
            else:
                raise AssemblyError(f"bad directive {line!r}", lineno)
            continue
        op, _, rest = line.partition(" ")
        op = op.upper()
        if op not in OPCODES:
            raise AssemblyError(f"unknown opcode {op!r}", lineno)
        operands = [t for t in (x.strip() for x in rest.split(",")) if t] if rest.strip() else []
        raw.append((op, operands, lineno))

    ins = []
    for op, ops, lineno in raw:
        want = {"HALT": 0, "JMP": 1}.get(op, 2)
        if len(ops) != want:
            raise AssemblyError(f"{op} takes {want} operand(s), got {len(ops)}", lineno)
        if op == "LOAD":
            ins.append(Instruction(op, r=_reg(ops[0], lineno, nregs), s=_memreg(ops[1], lineno, nregs), line=lineno))
        elif op == "STORE":
            ins.append(Instruction(op, s=_memreg(ops[0], lineno, nregs), r=_reg(ops[1], lineno, nregs), line=lineno))
        elif op == "LOADI":
            c = _int(ops[1], lineno)
            if not imm_range[0] <= c <= imm_range[1]:
                raise AssemblyError(f"immediate {c} outside [{imm_range[0]}, {imm_range[1]}]", lineno)
            ins.append(Instruction(op, r=_reg(ops[0], lineno, nregs), c=c, line=lineno))
        elif op in ALU:
            ins.append(Instruction(op, r=_reg(ops[0], lineno, nregs), s=_reg(ops[1], lineno, nregs), line=lineno))
        elif op in ("BRZ", "JMP"):
            name = ops[-1]
            if name not in labels:
                raise AssemblyError(f"undeclared label {name!r}", lineno)
            r = _reg(ops[0], lineno, nregs) if op == "BRZ" else None
            ins.append(Instruction(op, r=r, target=labels[name], label=name, line=lineno))
        else:
            ins.append(Instruction(op, line=lineno))
    return Program(tuple(ins), labels, directives.get("procs"), directives.get("memsize"),
                   directives.get("word"), tuple(directives["mem"]), directives.get("out", 0), nregs)


# ---------------------------------------------------------------- machine

@dataclass(frozen=True)
class Trap:
    kind: str  # write-conflict | address | pc
    round: int
    pids: tuple
    detail: str = ""


@dataclass(frozen=True)
class PramMachine:
    program: Program
    w: int
    S: int
    P: int
    pcs: tuple  # int or None (halted) per processor
    regs: tuple  # per processor tuple of words
    mem: tuple
    round: int = 0
    trap: Optional[Trap] = None

    @property
    def terminated(self) -> bool:
        return all(pc is None for pc in self.pcs)

    @property
    def output(self) -> int:
        return self.mem[self.program.out]


def init_machine(program: Program, P: Optional[int] = None, S: Optional[int] = None,
                 w: Optional[int] = None, mem=None, preload_p: bool = True) -> PramMachine:
    """Fresh machine: R0 = pid, R1 = P (if preload_p), memory zero plus .mem cells."""
    P = P or program.procs or 1
    S = S or program.memsize or 64
    w = w or program.word or 16
    if w < math.ceil(math.log2(max(S, 2))) or w < math.ceil(math.log2(max(P, 2))):
        raise ValueError(f"word size {w} too small for S={S}, P={P}")
    cells = [0] * S
    items = list(program.mem) + (list(mem.items()) if isinstance(mem, dict) else list(mem or []))
    for a, v in items:
        if not 0 <= a < S:
            raise ValueError(f"memory address {a} outside [0, {S})")
        cells[a] = v % (1 << w)
    regs = []
    for pid in range(P):
        r = [0] * program.nregs
        r[0] = pid
        if preload_p and program.nregs > 1:
            r[1] = P % (1 << w)
        regs.append(tuple(r))
    return PramMachine(program, w, S, P, (0,) * P, tuple(regs), tuple(cells))


def alu(op: str, a: int, b: int, w: int) -> int:
    mask = (1 << w) - 1
    if op == "ADD":
        return (a + b) & mask
    if op == "SUB":
        return (a - b) & mask
    if op == "AND":
        return a & b
    if op == "XOR":
        return a ^ b
    if op == "SHL":
        return (a << (b % w)) & mask
    if op == "SHR":
        return a >> (b % w)
    raise ValueError(op)


@dataclass
class RoundRecord:
    pcs: tuple  # after the round
    regs: tuple
    stores: dict  # pid -> (addr, value) for processors that stored


def step_round(m: PramMachine, record: Optional[list] = None) -> PramMachine:
    """Execute one synchronous round; a trap is returned inside the machine."""
    if m.trap is not None or m.terminated:
        return m
    prog, mask = m.program, (1 << m.w) - 1
    regs = [list(r) for r in m.regs]
    pcs = list(m.pcs)
    writes: dict = {}
    stores: dict = {}
    for pid, pc in enumerate(m.pcs):
        if pc is None:
            continue
        if not 0 <= pc < len(prog):
            return replace(m, trap=Trap("pc", m.round, (pid,), f"pc {pc} outside program"))
        ins = prog.instructions[pc]
        R = m.regs[pid]
        nxt = pc + 1
        op = ins.op
        if op == "LOAD":
            a = R[ins.s]
            if a >= m.S:
                return replace(m, trap=Trap("address", m.round, (pid,), f"load from {a}"))
            regs[pid][ins.r] = m.mem[a]
        elif op == "STORE":
            a = R[ins.s]
            if a >= m.S:
                return replace(m, trap=Trap("address", m.round, (pid,), f"store to {a}"))
            writes.setdefault(a, []).append((pid, R[ins.r]))
            stores[pid] = (a, R[ins.r])
        elif op == "LOADI":
            regs[pid][ins.r] = ins.c & mask
        elif op in ALU:
            regs[pid][ins.r] = alu(op, R[ins.r], R[ins.s], m.w)
        elif op == "BRZ":
            if R[ins.r] == 0:
                nxt = ins.target
        elif op == "JMP":
            nxt = ins.target
        else:
            nxt = None
        pcs[pid] = nxt
    conflicts = sorted(a for a, ws in writes.items() if len(ws) > 1)
    if conflicts:
        a = conflicts[0]
        return replace(m, trap=Trap("write-conflict", m.round, tuple(p for p, _ in writes[a]),
                                    f"address {a}"))
    mem = list(m.mem)
    for a, ((_, v),) in writes.items():
        mem[a] = v
    out = replace(m, pcs=tuple(pcs), regs=tuple(tuple(r) for r in regs), mem=tuple(mem),
                  round=m.round + 1)
    if record is not None:
        record.append(RoundRecord(out.pcs, out.regs, stores))
    return out


@dataclass
class RunMetrics:
    rounds: int = 0
    work: int = 0
    active: list = field(default_factory=list)  # live processors per round
    trap: Optional[Trap] = None
    terminated: bool = False
    history: Optional[list] = None

    @property
    def span(self) -> int:
        return self.rounds


def run(m: PramMachine, max_rounds: int = 100_000, record: bool = False):
    if max_rounds <= 0:
        raise ValueError("max_rounds must be positive")
    met = RunMetrics(history=[] if record else None)
    for _ in range(max_rounds):
        if m.terminated:
            break
        live = sum(pc is not None for pc in m.pcs)
        nxt = step_round(m, met.history)
        if nxt.trap is not None:
            met.trap = nxt.trap
            return nxt, met
        met.rounds += 1
        met.work += live
        met.active.append(live)
        m = nxt
    met.terminated = m.terminated
    return m, met


def brent_time(active, p: int) -> int:
    """Rounds needed to replay the run on p physical processors."""
    return sum(-(-a // p) for a in active)


def brent_bound(work: int, span: int, p: int) -> int:
    return -(-work // p) + span


# ---------------------------------------------------------------- sequential

def run_sequential(program: Program, mem, w: int, regs, max_steps: int = 1_000_000):
    """Direct single-processor interpreter with immediate memory writes.

    Returns (memory, log); log holds (pc, opcode, registers-after, store).
    """
    mem = list(mem)
    R = list(regs)
    top = 1 << w
    pc, log = 0, []
    for _ in range(max_steps):
        if not 0 <= pc < len(program.instructions):
            raise RuntimeError(f"pc {pc} outside program")
        ins = program.instructions[pc]
        store = None
        jump = None
        if ins.op == "HALT":
            log.append((pc, "HALT", tuple(R), None))
            return mem, log
        if ins.op == "LOAD":
            R[ins.r] = mem[R[ins.s]]
        elif ins.op == "STORE":
            mem[R[ins.s]] = R[ins.r]
            store = (R[ins.s], R[ins.r])
        elif ins.op == "LOADI":
            R[ins.r] = ins.c % top
        elif ins.op == "ADD":
            R[ins.r] = (R[ins.r] + R[ins.s]) % top
        elif ins.op == "SUB":
            R[ins.r] = (R[ins.r] - R[ins.s]) % top
        elif ins.op == "AND":
            R[ins.r] = R[ins.r] & R[ins.s]
        elif ins.op == "XOR":
            R[ins.r] = R[ins.r] ^ R[ins.s]
        elif ins.op == "SHL":
            R[ins.r] = (R[ins.r] * 2 ** (R[ins.s] % w)) % top
        elif ins.op == "SHR":
            R[ins.r] = R[ins.r] // 2 ** (R[ins.s] % w)
        elif ins.op == "BRZ":
            jump = ins.target if R[ins.r] == 0 else None
        elif ins.op == "JMP":
            jump = ins.target
        log.append((pc, ins.op, tuple(R), store))
        pc = pc + 1 if jump is None else jump
    raise RuntimeError("step budget exhausted")

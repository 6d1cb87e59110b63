"""Assembly generators for the PRAM verification suite.

All programs use registers R0..R4 only (R0 = pid, R1 = P on entry) and
keep every processor in lockstep: both sides of a data-dependent branch
take the same number of rounds, so phases never overlap across processors.
"""

from __future__ import annotations

import itertools

from .pram import IMM_MAX, Program, assemble

_ids = itertools.count()


def _label(stem: str) -> str:
    return f"{stem}_{next(_ids)}"


def const(reg: str, value: int, tmp: str) -> list:
    """Load a nonnegative constant using 4-bit chunks."""
    if 0 <= value <= IMM_MAX:
        return [f"LOADI {reg}, {value}"]
    hi, lo = divmod(value, 16)
    return const(reg, hi, tmp) + [f"LOADI {tmp}, 4", f"SHL {reg}, {tmp}",
                                  f"LOADI {tmp}, {lo}", f"ADD {reg}, {tmp}"]


def copy(dst: str, src: str) -> list:
    return [f"XOR {dst}, {dst}", f"ADD {dst}, {src}"]


def nop() -> list:
    lab = _label("nop")
    return [f"JMP {lab}", f"{lab}:"]


def _pad(lines: list, n: int) -> list:
    return lines + sum((nop() for _ in range(n)), [])


def _count(lines: list) -> int:
    return sum(1 for ln in lines if not ln.rstrip().endswith(":"))


def if_zero(reg: str, then: list, other: list) -> list:
    """Branch on reg == 0 with both paths equally long."""
    t, o = _count(then), _count(other)
    width = max(t, o)
    l_then, l_join = _label("then"), _label("join")
    return ([f"BRZ {reg}, {l_then}"] + _pad(other, width - o) + [f"JMP {l_join}", f"{l_then}:"]
            + _pad(then, width - t) + nop() + [f"{l_join}:"])


def sign(dst: str, src: str, shift_tmp: str, w: int) -> list:
    """dst <- 1 if src (read as signed) is negative else 0."""
    head = [] if dst == src else copy(dst, src)
    return head + [f"LOADI {shift_tmp}, {w - 1}", f"SHR {dst}, {shift_tmp}"]


def _index(reg: str, t: int, P: int, tmp: str) -> list:
    out = copy(reg, "R0")
    if t:
        out += const(tmp, t * P, "R1") + [f"ADD {reg}, {tmp}"]
    return out


def _header(P: int, S: int, w: int, values, out: int) -> list:
    lines = [f".procs {P}", f".memsize {S}", f".word {w}", f".out {out}"]
    lines += [f".mem {a} {v}" for a, v in enumerate(values) if v]
    return lines


def treesum(values, P: int, w: int = 8, S: int = None) -> str:
    """Pairwise tree reduction; the sum lands in M[0]."""
    n = len(values)
    assert n & (n - 1) == 0 and n >= 2, "n must be a power of two"
    S = S or max(2 * n, 16)
    body = []
    level, s = 0, 1
    while s < n:
        npairs = n // (2 * s)
        for t in range(-(-npairs // P)):
            work = [f"LOADI R3, {level + 1}", "SHL R2, R3", "LOAD R3, [R2]"]
            work += const("R4", s, "R1") + ["ADD R2, R4", "LOAD R4, [R2]", "ADD R3, R4"]
            work += const("R4", s, "R1") + ["SUB R2, R4", "STORE [R2], R3"]
            body += _index("R2", t, P, "R3")
            if (t + 1) * P > npairs:
                body += const("R3", npairs, "R1") + copy("R4", "R2") + ["SUB R4, R3"]
                body += sign("R4", "R4", "R3", w)
                body += if_zero("R4", [], work)
            else:
                body += work
        level, s = level + 1, s * 2
    return "\n".join(_header(P, S, w, values, 0) + body + ["HALT"]) + "\n"


def prefixmax(values, P: int, w: int = 8, S: int = None) -> str:
    """Doubling prefix maximum with two buffers; result row ends at .out."""
    n = len(values)
    assert n % P == 0, "P must divide n"
    S = S or max(2 * n, 16)
    body = []
    src, dst, d = 0, n, 1
    while d < n:
        for t in range(n // P):
            body += _index("R2", t, P, "R3")
            body += const("R3", src, "R1") + ["ADD R3, R2", "LOAD R3, [R3]"]  # R3 = src[i]
            body += const("R4", d, "R1") + copy("R1", "R2") + ["SUB R1, R4"]  # R1 = i - d
            body += sign("R4", "R1", "R2", w)
            store = _index("R2", t, P, "R4") + const("R4", dst, "R1") + ["ADD R4, R2", "STORE [R4], R3"]
            keep = store
            take = const("R4", src, "R2") + ["ADD R4, R1", "LOAD R4, [R4]"]  # R4 = src[i-d]
            take += copy("R1", "R3") + ["SUB R1, R4"]
            take += sign("R1", "R1", "R2", w)
            take += if_zero("R1", [], copy("R3", "R4"))
            take += store
            body += if_zero("R4", take, keep)
        src, dst, d = dst, src, d * 2
    return "\n".join(_header(P, S, w, values, src + n - 1) + body + ["HALT"]) + "\n"


def broadcast(value: int, n: int, P: int, w: int = 8, S: int = None) -> str:
    """Copy M[0] into M[0..n) by doubling."""
    S = S or max(2 * n, 16)
    body = []
    d = 1
    while d < n:
        width = min(d, n - d)
        for t in range(-(-width // P)):
            work = const("R3", d, "R1") + ["ADD R3, R2", "LOAD R4, [R2]", "STORE [R3], R4"]
            body += _index("R2", t, P, "R3")
            if (t + 1) * P > width:
                body += const("R3", width, "R1") + copy("R4", "R2") + ["SUB R4, R3"]
                body += sign("R4", "R4", "R3", w)
                body += if_zero("R4", [], work)
            else:
                body += work
        d *= 2
    return "\n".join(_header(P, S, w, [value], n - 1) + body + ["HALT"]) + "\n"


def countdown(k: int, P: int, w: int = 8, S: int = 16) -> str:
    """Every processor loops k times and writes its count to M[pid]."""
    lines = _header(P, S, w, [], 0)
    lines += const("R2", k, "R3") + ["LOADI R3, 1", "XOR R4, R4",
                                     "loop: BRZ R2, done", "SUB R2, R3", "ADD R4, R3", "JMP loop",
                                     "done: STORE [R0], R4", "HALT"]
    return "\n".join(lines) + "\n"


def vecdouble(values, P: int, w: int = 8, S: int = None) -> str:
    """M[i] <- 2*M[i] for every cell, P processors striding."""
    n = len(values)
    assert n % P == 0, "P must divide n"
    S = S or max(n, 16)
    body = []
    for t in range(n // P):
        body += _index("R2", t, P, "R3") + ["LOAD R3, [R2]", "LOADI R4, 1", "SHL R3, R4", "STORE [R2], R3"]
    return "\n".join(_header(P, S, w, values, 0) + body + ["HALT"]) + "\n"


def suite(seed: int = 0) -> dict:
    """Named (source, oracle) pairs for the five-program suite."""
    import random

    rng = random.Random(seed)
    v16 = [rng.randrange(0, 8) for _ in range(16)]
    v8 = [rng.randrange(0, 100) for _ in range(8)]
    v64 = [rng.randrange(0, 4) for _ in range(64)]
    return {
        "treesum16": (treesum(v16, 4), sum(v16) % 256),
        "treesum64": (treesum(v64, 8), sum(v64) % 256),
        "prefixmax8": (prefixmax(v8, 4), max(v8)),
        "broadcast16": (broadcast(37, 16, 8), 37),
        "countdown": (countdown(9, 2), 9),
        "vecdouble": (vecdouble(v16, 4), (2 * v16[0]) % 256),
    }


def load(src: str) -> Program:
    return assemble(src)

"""Sudoku solving as remask/unmask edits over a 324-token grid.

Each cell is (value, color, marker, SEP). The scripted policy is a pure
function of the state: which phase it is in is read off the mask pattern.

    no masks       contradiction mark, naked single, branch, backtrack,
                   final cleanup, or nothing when solved
    (M,M,M)        second half of assign / branch / contradiction
    (v,c,M)+(M,M,M) second half of a backtrack
    (M,M,v_old)    first half of recovery with the next candidate
    (v,c,M) alone  second half of recovery (BRANCH or NORMAL)

Branch j gets COLOR_((j-1) mod 15 + 1); depth is the number of BRANCH cells.
"""

from __future__ import annotations

import random
from typing import Optional

from ..core import (ZERO, ContractError, DenoiserOutput, StopCriterion, Vocab, apply_transition,
                    decode)
from .common import Recorder, Trajectory

DIGITS = [str(d) for d in range(1, 10)]
COLORS = [f"COLOR_{i}" for i in range(1, 16)]
VOCAB = Vocab(["EMPTY", "M"] + DIGITS + ["WHITE"] + COLORS + ["NORMAL", "SKULL", "BRANCH", "SEPARATOR"])
EMPTY, M, WHITE, NORMAL, SKULL, BRANCH, SEP = VOCAB.ids(
    ["EMPTY", "M", "WHITE", "NORMAL", "SKULL", "BRANCH", "SEPARATOR"])
DIGIT_ID = {d: VOCAB.id(str(d)) for d in range(1, 10)}
ID_DIGIT = {v: k for k, v in DIGIT_ID.items()}
COLOR_ID = [VOCAB.id(c) for c in COLORS]
STATE_LEN = 324
REMASK = (1, 0, 0)

_PEERS = []
for _i in range(81):
    r, c = divmod(_i, 9)
    b = (r // 3) * 3 + c // 3
    _PEERS.append(sorted({j for j in range(81) if j != _i and (
        j // 9 == r or j % 9 == c or ((j // 9) // 3) * 3 + (j % 9) // 3 == b)}))


def color_of(depth: int) -> int:
    return WHITE if depth == 0 else COLOR_ID[(depth - 1) % 15]


def parse_puzzle(text: str) -> list:
    s = "".join(ch for ch in text if ch.isdigit() or ch == ".")
    if len(s) != 81:
        raise ContractError(f"puzzle needs 81 cells, got {len(s)}")
    return [0 if ch in "0." else int(ch) for ch in s]


def encode(puzzle) -> tuple:
    if isinstance(puzzle, str):
        puzzle = parse_puzzle(puzzle)
    out = []
    for v in puzzle:
        out += [DIGIT_ID[v] if v else EMPTY, WHITE, NORMAL, SEP]
    return tuple(out)


def cells(x) -> list:
    if len(x) != STATE_LEN:
        raise ContractError(f"sudoku state has {len(x)} tokens, expected {STATE_LEN}")
    return [tuple(x[4 * i:4 * i + 3]) for i in range(81)]


def values(x) -> list:
    """Digits per cell, 0 for EMPTY or masked values."""
    return [ID_DIGIT.get(c[0], 0) for c in cells(x)]


def candidates(vals, i) -> list:
    used = {vals[j] for j in _PEERS[i]}
    return [d for d in range(1, 10) if d not in used]


_UNITS = ([[r * 9 + c for c in range(9)] for r in range(9)]
          + [[r * 9 + c for r in range(9)] for c in range(9)]
          + [[(br + r) * 9 + bc + c for r in range(3) for c in range(3)]
             for br in (0, 3, 6) for bc in (0, 3, 6)])
_CELL_UNITS = [[u for u in _UNITS if i in u] for i in range(81)]


def forced(vals, i) -> Optional[int]:
    """The digit cell i must take: a naked or hidden single, else None."""
    cand = candidates(vals, i)
    if len(cand) == 1:
        return cand[0]
    for v in cand:
        for u in _CELL_UNITS[i]:
            if not any(j != i and not vals[j] and v in candidates(vals, j) for j in u):
                return v
    return None


def has_conflict(vals) -> bool:
    return any(v and any(vals[j] == v for j in _PEERS[i]) for i, v in enumerate(vals))


class _Out:
    def __init__(self, x):
        self.x = x
        self.y = [EMPTY if t == M else t for t in x]
        self.c = [ZERO] * len(x)

    def remask(self, i, slots=(0, 1, 2)):
        for s in slots:
            self.c[4 * i + s] = REMASK

    def put(self, i, slot, tok):
        self.y[4 * i + slot] = tok

    def done(self) -> DenoiserOutput:
        return DenoiserOutput(tuple(self.y), tuple(self.c))


def _deepest_branch(cs, depth):
    col = color_of(depth)
    hits = [i for i, c in enumerate(cs) if c[2] == BRANCH and c[1] == col]
    return hits[-1] if hits else None


def policy(x, rng=None) -> DenoiserOutput:
    """The scripted Sudoku denoiser."""
    cs = cells(x)
    vals = values(x)
    out = _Out(x)
    masked = [i for i, c in enumerate(cs) if M in c]
    depth = sum(c[2] == BRANCH for c in cs)

    if not masked:
        if any(c[2] == SKULL for c in cs):
            # backtrack, first half
            b = _deepest_branch(cs, depth)
            if b is None:
                raise ContractError("contradiction with no open branch: puzzle has no solution")
            col = color_of(depth)
            for i, c in enumerate(cs):
                if i != b and c[1] == col:
                    out.remask(i)
            out.remask(b, (2,))
            return out.done()
        empty = [i for i in range(81) if not vals[i]]
        if not empty:
            if depth:
                for i, c in enumerate(cs):
                    if c[2] == BRANCH:
                        out.remask(i, (2,))
                    elif c[1] != WHITE:
                        out.remask(i, (1,))
            return out.done()
        counts = {i: len(candidates(vals, i)) for i in empty}
        dead = [i for i in empty if counts[i] == 0]
        single = [i for i in empty if counts[i] == 1]
        if dead:
            out.remask(dead[0])
        elif single:
            out.remask(single[0])
        elif (hidden := next((i for i in empty if forced(vals, i) is not None), None)) is not None:
            out.remask(hidden)
        else:
            out.remask(min(empty, key=lambda i: (counts[i], i)))
        return out.done()

    full = [i for i in masked if cs[i] == (M, M, M)]
    marker_only = [i for i in masked if cs[i][0] != M and cs[i][1] != M and cs[i][2] == M]
    recover = [i for i in masked if cs[i][0] == M and cs[i][1] == M and cs[i][2] != M]

    if all(vals[i] for i in range(81)) and not full and not recover:
        # cleanup, second half: branch cells keep their color
        for i in masked:
            if cs[i][1] == M:
                out.put(i, 1, WHITE)
            if cs[i][2] == M:
                out.put(i, 2, NORMAL)
        return out.done()
    if full and marker_only:
        # backtrack, second half
        for i in full:
            out.put(i, 0, EMPTY)
            out.put(i, 1, WHITE)
            out.put(i, 2, NORMAL)
        for b in marker_only:
            out.remask(b, (0, 1))
            out.put(b, 2, cs[b][0])
        return out.done()
    if full:
        for i in full:
            cand = candidates(vals, i)
            v = forced(vals, i) if cand else None
            if not cand:
                out.put(i, 0, EMPTY)
                out.put(i, 1, color_of(depth))
                out.put(i, 2, SKULL)
            elif v is not None:
                out.put(i, 0, DIGIT_ID[v])
                out.put(i, 1, color_of(depth))
                out.put(i, 2, NORMAL)
            else:
                out.put(i, 0, DIGIT_ID[cand[0]])
                out.put(i, 1, color_of(depth + 1))
                out.put(i, 2, BRANCH)
        return out.done()
    if recover:
        for b in recover:
            old = ID_DIGIT[cs[b][2]]
            rest = [d for d in candidates(vals, b) if d > old]
            if not rest:
                raise ContractError(f"branch at cell {b} has no alternative left")
            # depth counts the open branches; this one is open again
            col = color_of(depth + 1) if len(rest) > 1 else color_of(depth)
            out.put(b, 0, DIGIT_ID[rest[0]])
            out.put(b, 1, col)
            out.remask(b, (2,))
        return out.done()
    if marker_only:
        for b in marker_only:
            out.put(b, 2, BRANCH if cs[b][1] == color_of(depth + 1) and cs[b][1] != WHITE else NORMAL)
        return out.done()
    raise ContractError("unrecognized sudoku state")


scripted_denoiser = policy


def solve(puzzle, limit: int = 2):
    """Independent oracle: plain recursive search with bitmasks.

    Returns (first solution or None, number of solutions found up to limit).
    """
    if isinstance(puzzle, str):
        puzzle = parse_puzzle(puzzle)
    grid = list(puzzle)
    rows, cols, boxes = [0] * 9, [0] * 9, [0] * 9
    for i, v in enumerate(grid):
        if v:
            r, c = divmod(i, 9)
            bit = 1 << v
            if rows[r] & bit or cols[c] & bit or boxes[(r // 3) * 3 + c // 3] & bit:
                return None, 0
            rows[r] |= bit
            cols[c] |= bit
            boxes[(r // 3) * 3 + c // 3] |= bit
    found = []

    def rec():
        best, best_opts = None, None
        for i in range(81):
            if grid[i]:
                continue
            r, c = divmod(i, 9)
            used = rows[r] | cols[c] | boxes[(r // 3) * 3 + c // 3]
            opts = [v for v in range(1, 10) if not used >> v & 1]
            if best is None or len(opts) < len(best_opts):
                best, best_opts = i, opts
                if len(opts) <= 1:
                    break
        if best is None:
            found.append(list(grid))
            return len(found) >= limit
        r, c = divmod(best, 9)
        b = (r // 3) * 3 + c // 3
        for v in best_opts:
            bit = 1 << v
            grid[best] = v
            rows[r] |= bit
            cols[c] |= bit
            boxes[b] |= bit
            if rec():
                return True
            rows[r] &= ~bit
            cols[c] &= ~bit
            boxes[b] &= ~bit
        grid[best] = 0
        return False

    rec()
    return (found[0] if found else None), len(found)


def check_puzzle(puzzle) -> list:
    p = parse_puzzle(puzzle) if isinstance(puzzle, str) else list(puzzle)
    givens = sum(1 for v in p if v)
    if givens < 17:
        raise ContractError(f"only {givens} givens; at least 17 are needed")
    sol, n = solve(p)
    if n == 0:
        raise ContractError("puzzle has no solution")
    if n > 1:
        raise ContractError("puzzle has more than one solution")
    return sol


def sudoku_trajectory(puzzle, rng=None, max_steps: int = 200_000) -> Trajectory:
    """Record the scripted policy from the puzzle to its fixpoint."""
    sol = check_puzzle(puzzle)
    p = parse_puzzle(puzzle) if isinstance(puzzle, str) else list(puzzle)
    rec = Recorder("sudoku", VOCAB, encode(p), {"puzzle": "".join(map(str, p))})
    for _ in range(max_steps):
        out = policy(rec.x)
        if apply_transition(rec.x, out, VOCAB) == rec.x:
            break
        rec.step(out.y, out.controls)
    else:
        raise ContractError("step budget exhausted")
    rec.tr.meta["solved"] = values(rec.x) == sol
    rec.tr.meta["branches"] = sum(1 for s in rec.tr.steps for i in range(81)
                                  if s.x[4 * i:4 * i + 3] == (M, M, M)
                                  and s.apply(VOCAB)[4 * i + 2] == BRANCH)
    return rec.tr


def run_scripted(puzzle, max_steps: int = 200_000):
    return decode(policy, encode(puzzle), StopCriterion("fixpoint", max_steps=max_steps), seed=0,
                  vocab=VOCAB)


def needs_branching(puzzle) -> bool:
    """True if naked and hidden singles alone do not finish the puzzle."""
    vals = parse_puzzle(puzzle) if isinstance(puzzle, str) else list(puzzle)
    while True:
        empty = [i for i in range(81) if not vals[i]]
        if not empty:
            return False
        if any(not candidates(vals, i) for i in empty):
            return True
        i = next((i for i in empty if forced(vals, i) is not None), None)
        if i is None:
            return True
        vals[i] = forced(vals, i)


def random_solution(rng: random.Random) -> list:
    grid = [0] * 81

    def rec(i):
        if i == 81:
            return True
        opts = candidates(grid, i)
        rng.shuffle(opts)
        for v in opts:
            grid[i] = v
            if rec(i + 1):
                return True
        grid[i] = 0
        return False

    rec(0)
    return grid


def generate_puzzle(rng: random.Random, hard: bool = True, min_givens: int = 17) -> str:
    """Remove clues while the solution stays unique; hard puzzles need branching."""
    while True:
        grid = random_solution(rng)
        order = list(range(81))
        rng.shuffle(order)
        p = list(grid)
        for i in order:
            if sum(1 for v in p if v) <= min_givens:
                break
            keep = p[i]
            p[i] = 0
            if solve(p)[1] != 1:
                p[i] = keep
        if not hard or needs_branching(p):
            return "".join(map(str, p))


# A well-known 17-clue puzzle with a unique solution.
SEVENTEEN = "000000010400000000020000000000050407008000300001090000300400200050100000000806000"


def load_puzzles(path) -> list:
    with open(path) as f:
        return [ln.strip() for ln in f if ln.strip() and not ln.startswith("#")]

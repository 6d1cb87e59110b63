import pytest

from apmdm import pram_suite
from apmdm.core import ContractError
from apmdm.efasp.bridge import (SymbolicDenoiser, _constants, code_width, instruction_table, load_program,
                                pram_bridge_encode, pram_vocab, verify_source)
from apmdm.efasp.evaluator import EvalContext
from apmdm.pram import assemble, init_machine

HALT2 = ".procs 2\n.memsize 4\n.word 4\nHALT\n"


def _machine(mem, P=2, S=4, w=4):
    return init_machine(assemble("HALT"), P=P, S=S, w=w, mem=mem)


def test_ao_encoding():
    m = _machine({1: 3, 2: 9})
    V = pram_vocab(4)
    x = V.names(pram_bridge_encode(m, "AO", length=12, vocab=V))
    assert x == ["2", "1", "3", "2", "9", "SEP"] + ["M"] * 6


def test_rewrite_encoding_trims_trailing_zero_cells():
    m = _machine({1: 3}, S=6)
    V = pram_vocab(4)
    x = V.names(pram_bridge_encode(m, "REWRITE", vocab=V))
    assert x[:3] == ["2", "0", "3"]
    assert x[3:] == ["M"] * (6 - 2 + 8 * 2)


def test_rewrite_length_fixed_by_machine():
    m = _machine({})
    assert len(pram_bridge_encode(m, "REWRITE")) == 1 + 4 + 8 * 2


def test_codec_range_checked():
    m = _machine({0: 15}, P=2, S=4, w=4)
    with pytest.raises(ContractError):
        pram_bridge_encode(m, "AO", vocab=pram_vocab(2))


def test_code_width_covers_pc():
    prog = assemble("\n".join(["LOADI R2, 1"] * 20) + "\nHALT")
    assert code_width(4, prog) == 5
    assert code_width(8, prog) == 8


def test_instruction_table_has_halted_row():
    prog = assemble("LOADI R2, -1\nHALT")
    t = instruction_table(prog, 8)
    assert t.shape == (3, 5) and t[0, 3] == 255


def test_unknown_variant():
    with pytest.raises(ContractError):
        pram_bridge_encode(_machine({}), "XYZ")


def test_program_output_dim_checked():
    # the AO program does not emit the rewrite bit, so the REWRITE wrapper refuses it
    m = _machine({})
    prog = m.program
    V = pram_vocab(4)
    x0 = pram_bridge_encode(m, "AO", vocab=V)
    ctx = EvalContext(x0, V, pos="SEQ", word=4, constants=_constants(prog, 4),
                      table=instruction_table(prog, 4))
    with pytest.raises(ContractError):
        SymbolicDenoiser(load_program("AO"), "REWRITE", ctx)


@pytest.mark.parametrize("variant", ["AO", "REWRITE", "REWRITE3"])
def test_halt_only_program(variant):
    r = verify_source(HALT2, variant)
    assert r.match and r.blocks_ok and r.rounds == 1


@pytest.mark.parametrize("variant", ["AO", "REWRITE"])
def test_small_countdown(variant):
    r = verify_source(pram_suite.countdown(3, 2), variant)
    assert r.match and r.blocks_ok, r.summary()
    assert r.pram_output == 3


def test_ao_bounds():
    r = verify_source(pram_suite.vecdouble([1, 2, 3, 4], 2), "AO")
    assert r.match
    assert r.ratio <= 4
    assert r.context_tokens <= 16 * 2 * r.rounds


def test_rewrite_context_bound():
    r = verify_source(pram_suite.vecdouble([1, 2, 3, 4], 2), "REWRITE")
    assert r.match and r.context_tokens <= 4 * 16


def test_register_limit_enforced():
    src = ".procs 1\n.memsize 4\n.word 4\nLOADI R5, 1\nHALT\n"
    with pytest.raises(ContractError):
        verify_source(src, "AO")


def test_summary_fields():
    s = verify_source(HALT2, "AO").summary()
    for k in ("match", "ratio", "context_tokens", "budget", "rounds", "decode_steps"):
        assert k in s

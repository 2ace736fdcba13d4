from dataclasses import replace
from fractions import Fraction

from hypothesis import given
from hypothesis import strategies as st
import pytest

from polar_encoder_autogen.errors import (
    FormulaStructureError,
    FormulaSyntaxError,
    InvariantViolation,
    ParameterError,
)
from polar_encoder_autogen.formula import (
    AtomKind,
    Stage,
    format_formula,
    general_formula,
    hardware_formula,
    parse_formula,
    perm,
    placeholder,
    specialize,
    validate,
    valid_parallelisms,
)

F32_8 = "(I4xXP)(I2xP4)(I4xS4)(I4xXP)(I4xS2)(I4xXP)(P8)(I4xXP)(I2xP4)(I4xS4)(I4xXP)"
F32_8_GENERAL = "(I4xXP)(I2xP4)(I4xW4)(I4xXP)(I4xW2)(I4xXP)(W1)(I4xXP)(I2xP4)(I4xS4)(I4xXP)"
F8_4 = "(I2xXP)(P4)(I2xS2)(I2xXP)(P4)(I2xS2)(I2xXP)"


def all_points(max_n=12):
    return [(1 << n, 1 << m) for n in range(3, max_n + 1) for m in range(2, n)]


def test_specialized_formula_32_8():
    assert format_formula(hardware_formula(32, 8)) == F32_8


def test_general_formula_32_8():
    f = general_formula(32, 8)
    assert format_formula(f) == F32_8_GENERAL
    assert f.has_placeholders
    assert format_formula(specialize(f)) == F32_8


def test_general_formula_8_4():
    assert format_formula(general_formula(8, 4)) == "(I2xXP)(P4)(I2xW2)(I2xXP)(P4)(I2xS2)(I2xXP)"
    assert format_formula(hardware_formula(8, 4)) == F8_4


def test_specialize_16_8():
    f = hardware_formula(16, 8)
    inner = [f.stages[2], f.stages[4]]
    assert inner == [Stage(4, f.stages[2].atom), Stage(1, perm(8))]
    assert f.stages[2].atom.kind == AtomKind.SWITCH and int(f.stages[2].atom.size) == 2


def test_reciprocal_placeholders_become_grouped_permutations():
    # N=32, M=16: inner subscripts 2, 1, 1/2
    f = general_formula(32, 16)
    assert "(W1/2)" in format_formula(f)
    s = specialize(f)
    assert s.stages[6] == Stage(2, perm(8))
    assert parse_formula(format_formula(f)) == f


@pytest.mark.parametrize("N, M, bound", [(32, 2, "at least 4"), (31, 8, "power of two"), (16, 16, "at most N/2"), (4, 4, "at least 8")])
def test_bad_parameters(N, M, bound):
    with pytest.raises(ParameterError, match=bound):
        general_formula(N, M)


def test_parse_minimal_formula():
    f = parse_formula(F8_4)
    assert (f.N, f.M) == (8, 4)
    assert f == hardware_formula(8, 4)
    assert parse_formula("  (I2xXP) (P4)(I2xS2)\n(I2xXP)(P4) (I2xS2)(I2xXP) ") == f


def test_parse_errors():
    with pytest.raises(FormulaStructureError):
        parse_formula("(I4xXP)(I3xP4)")
    with pytest.raises(FormulaStructureError, match="lane"):
        parse_formula("(I4xXP)(I2xP4)(I2xS4)")
    with pytest.raises(FormulaStructureError, match="switch"):
        parse_formula("(I2xXP)(P4)")
    with pytest.raises(FormulaSyntaxError) as info:
        parse_formula("(I4xXP)(I2xQ4)")
    assert info.value.position == 7
    with pytest.raises(FormulaSyntaxError):
        parse_formula("")


@pytest.mark.parametrize("N, M", all_points())
def test_generated_formulas_are_valid_and_round_trip(N, M):
    f = hardware_formula(N, M)
    n = N.bit_length() - 1
    assert not f.has_placeholders
    assert validate(f) == []
    assert len(f.stages) == 2 * n + 1
    assert sum(1 for s in f.stages if s.atom.kind == AtomKind.XP) == n
    assert all(s.lanes == M for s in f.stages)
    text = format_formula(f)
    assert parse_formula(text) == f
    assert format_formula(parse_formula(text)) == text

    g = general_formula(N, M)
    assert parse_formula(format_formula(g)) == g
    assert validate(g, allow_placeholders=True) == []


@pytest.mark.parametrize("N, M", all_points())
def test_switch_sizes(N, M):
    sizes = hardware_formula(N, M).switch_sizes()
    inner = []
    K = N // M
    while K >= 2:
        inner.append(K)
        K //= 2
    assert sizes == inner + [N // M]


@given(st.sampled_from(all_points(10)))
def test_format_is_idempotent(point):
    text = format_formula(hardware_formula(*point))
    assert format_formula(parse_formula(format_formula(parse_formula(text)))) == text


def test_validate_negatives():
    f = hardware_formula(32, 8)
    dropped = replace(f, stages=f.stages[:3] + f.stages[4:])
    assert any("template" in v for v in validate(dropped))

    tiny = replace(f, stages=f.stages[:1] + (Stage(4, perm(2)),) + f.stages[2:])
    assert any("permutation size" in v for v in validate(tiny))

    assert any("placeholder" in v for v in validate(general_formula(32, 8)))


def test_valid_parallelisms():
    assert valid_parallelisms(8) == [4]
    assert valid_parallelisms(1024) == [4, 8, 16, 32, 64, 128, 256, 512]


@pytest.mark.parametrize("v", [Fraction(1, 4), Fraction(3), Fraction(3, 4)])
def test_unrealisable_placeholder_is_an_internal_error(v):
    g = general_formula(32, 8)
    bad = replace(g, stages=g.stages[:6] + (Stage(1, placeholder(v)),) + g.stages[7:])
    with pytest.raises(InvariantViolation):
        specialize(bad)

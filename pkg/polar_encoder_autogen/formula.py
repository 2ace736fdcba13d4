"""
Stage-sequence formulas for the pipelined encoder.

A formula is read left to right as the order in which data flows through
the pipeline. Every stage is ``I_k ⊗ atom`` and spans exactly M lanes.
The text form writes the Kronecker product as ``x``, for example
``(I2xXP)(P4)(I2xS2)(I2xXP)(P4)(I2xS2)(I2xXP)`` for N=8, M=4.

Grammar::

    formula := group+
    group   := "(" [ "I" INT "x" ] atom ")"
    atom    := "XP" | "S" INT | "P" INT | "W" INT [ "/" INT ]

Whitespace between groups is ignored. ``W`` subscripts are dyadic
rationals; values below one are written as ``1/k``.
"""

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
import re
from typing import List, Tuple

from loguru import logger

from polar_encoder_autogen.errors import (
    FormulaStructureError,
    FormulaSyntaxError,
    InvariantViolation,
    ParameterError,
)
from polar_encoder_autogen.polar_core import MIN_CODE_LENGTH, is_power_of_two, log2_exact

MIN_PARALLELISM = 4


class AtomKind(str, Enum):
    XP = "XP"
    SWITCH = "S"
    PERM = "P"
    W = "W"


@dataclass(frozen=True)
class Atom:
    """One building block: XP, a switch S_K, a permutation P_P or a placeholder W_v."""

    kind: AtomKind
    size: Fraction = Fraction(2)

    @property
    def width(self) -> int:
        """Number of lanes one copy of the atom occupies."""
        if self.kind == AtomKind.PERM:
            return int(self.size)
        return 2

    @property
    def text(self) -> str:
        if self.kind == AtomKind.XP:
            return "XP"
        if self.kind == AtomKind.W and self.size < 1:
            return f"W{self.size.numerator}/{self.size.denominator}"
        return f"{self.kind.value}{int(self.size)}"


def xp() -> Atom:
    return Atom(AtomKind.XP)


def switch(K: int) -> Atom:
    return Atom(AtomKind.SWITCH, Fraction(K))


def perm(P: int) -> Atom:
    return Atom(AtomKind.PERM, Fraction(P))


def placeholder(v) -> Atom:
    return Atom(AtomKind.W, Fraction(v))


@dataclass(frozen=True)
class Stage:
    """``I_copies ⊗ atom``."""

    copies: int
    atom: Atom

    @property
    def lanes(self) -> int:
        return self.copies * self.atom.width

    @property
    def full_width(self) -> bool:
        """W_v with v <= 1 becomes a permutation across the whole datapath."""
        return self.atom.kind == AtomKind.W and self.atom.size <= 1

    @property
    def text(self) -> str:
        if self.copies == 1 or self.full_width:
            return f"({self.atom.text})"
        return f"(I{self.copies}x{self.atom.text})"


@dataclass(frozen=True)
class Formula:
    N: int
    M: int
    stages: Tuple[Stage, ...]

    @property
    def has_placeholders(self) -> bool:
        return any(s.atom.kind == AtomKind.W for s in self.stages)

    def switch_sizes(self) -> List[int]:
        return [int(s.atom.size) for s in self.stages if s.atom.kind == AtomKind.SWITCH]


def parameter_errors(N, M) -> List[str]:
    """Every violated bound of (N, M), in a fixed order."""
    errors = []
    if not is_power_of_two(N):
        errors.append(f"N must be a power of two (got {N})")
    elif N < MIN_CODE_LENGTH:
        errors.append(f"N must be at least {MIN_CODE_LENGTH} (got {N})")
    if not is_power_of_two(M):
        errors.append(f"M must be a power of two (got {M})")
    elif M < MIN_PARALLELISM:
        errors.append(f"M must be at least {MIN_PARALLELISM} (got {M})")
    elif is_power_of_two(N) and M > N // 2:
        errors.append(f"M must be at most N/2 = {N // 2} (got {M})")
    return errors


def check_parameters(N, M):
    errors = parameter_errors(N, M)
    if errors:
        raise ParameterError("; ".join(errors))


def valid_parallelisms(N: int) -> List[int]:
    """All legal M for code length N, ascending."""
    check_parameters(N, MIN_PARALLELISM)
    return [1 << k for k in range(2, log2_exact(N))]


def general_formula(N: int, M: int) -> Formula:
    """
    Build the stage sequence with W placeholders for the inner stages.

    Layout: an XP stage, a P4 stage, then for i = 0 .. log2(N)-3 a
    placeholder W_{N/(2^i·M)} followed by an XP stage, then P4, the final
    switch S_{N/M} and a last XP stage.
    """
    check_parameters(N, M)
    n = log2_exact(N)
    half = M // 2
    stages = [Stage(half, xp()), Stage(M // 4, perm(4))]
    for i in range(n - 2):
        stages.append(Stage(half, placeholder(Fraction(N, (1 << i) * M))))
        stages.append(Stage(half, xp()))
    stages += [Stage(M // 4, perm(4)), Stage(half, switch(N // M)), Stage(half, xp())]
    return Formula(N, M, tuple(stages))


def _specialize_stage(stage: Stage, M: int) -> Stage:
    v = stage.atom.size
    if v >= 2 and v.denominator == 1 and is_power_of_two(v.numerator):
        return Stage(stage.copies, switch(v.numerator))
    if v <= 1 and v.numerator == 1 and is_power_of_two(v.denominator):
        k = v.denominator
        if M % k or M // k < 4:
            raise InvariantViolation(f"W{stage.atom.text[1:]} cannot be realised with M={M}")
        return Stage(k, perm(M // k))
    raise InvariantViolation(f"Placeholder {stage.atom.text} has no hardware realisation")


def specialize(f: Formula) -> Formula:
    """
    Replace each placeholder W_v by hardware.

    v >= 2 becomes I_{M/2} ⊗ S_v; v = 1/k becomes I_k ⊗ P_{M/k}. A formula
    without placeholders is returned unchanged.
    """
    stages = []
    for stage in f.stages:
        if stage.atom.kind == AtomKind.W:
            stages.append(_specialize_stage(stage, f.M))
        else:
            stages.append(stage)
    specialized = Formula(f.N, f.M, tuple(stages))
    logger.debug(f"Specialized N={f.N}, M={f.M}: {format_formula(specialized)}")
    return specialized


def hardware_formula(N: int, M: int) -> Formula:
    """Shorthand for specialize(general_formula(N, M))."""
    return specialize(general_formula(N, M))


def format_formula(f: Formula) -> str:
    return "".join(stage.text for stage in f.stages)


_GROUP_RE = re.compile(
    r"\s*\((?:I(?P<copies>\d+)x)?"
    r"(?:(?P<xp>XP)|S(?P<switch>\d+)|P(?P<perm>\d+)|W(?P<wnum>\d+)(?:/(?P<wden>\d+))?)\)"
)


def _parse_groups(text: str) -> List[Stage]:
    stages = []
    pos = 0
    end = len(text.rstrip())
    while pos < end:
        match = _GROUP_RE.match(text, pos)
        if match is None:
            # point at the first non-blank character of the bad group
            while pos < end and text[pos].isspace():
                pos += 1
            raise FormulaSyntaxError(f"Unexpected input {text[pos:pos + 8]!r}", position=pos)
        copies = int(match["copies"]) if match["copies"] is not None else 1
        if match["xp"]:
            atom = xp()
        elif match["switch"] is not None:
            atom = switch(int(match["switch"]))
        elif match["perm"] is not None:
            atom = perm(int(match["perm"]))
        else:
            den = int(match["wden"]) if match["wden"] is not None else 1
            if den == 0:
                raise FormulaSyntaxError("Zero denominator in W subscript", position=match.start())
            atom = placeholder(Fraction(int(match["wnum"]), den))
        stages.append(Stage(copies, atom))
        pos = match.end()
    if not stages:
        raise FormulaSyntaxError("Empty formula", position=0)
    return stages


def parse_formula(text: str) -> Formula:
    """
    Parse formula text.

    M is the common lane span of the stages; N is recovered as M times the
    size of the last switch stage.

    Raises:
        FormulaSyntaxError: text does not match the grammar
        FormulaStructureError: sizes are not powers of two, lane spans
            differ, or there is no switch stage to recover N from
    """
    stages = _parse_groups(text)
    for index, stage in enumerate(stages):
        if not is_power_of_two(stage.copies):
            raise FormulaStructureError(
                f"Stage {index} {stage.text}: I{stage.copies} is not a power of two"
            )
        size = stage.atom.size
        if stage.atom.kind != AtomKind.XP and not (
            is_power_of_two(size.numerator) and is_power_of_two(size.denominator)
        ):
            raise FormulaStructureError(
                f"Stage {index} {stage.text}: size {stage.atom.text[1:]} is not a power of two"
            )
        if stage.atom.kind in (AtomKind.SWITCH, AtomKind.PERM) and size.denominator != 1:
            raise FormulaStructureError(f"Stage {index} {stage.text}: size must be an integer")

    # bare W_v (v <= 1) groups take the span of the rest of the formula
    spans = {stage.lanes for stage in stages if not (stage.full_width and stage.copies == 1)}
    if len(spans) != 1:
        raise FormulaStructureError(f"Stages span different lane counts: {sorted(spans)}")
    M = spans.pop()
    stages = [
        Stage(M // 2, stage.atom) if stage.full_width and stage.copies == 1 else stage
        for stage in stages
    ]

    switches = [s for s in stages if s.atom.kind == AtomKind.SWITCH]
    if not switches:
        raise FormulaStructureError("No switch stage; cannot recover N")
    N = int(switches[-1].atom.size) * M
    return Formula(N, M, tuple(stages))


def validate(f: Formula, allow_placeholders: bool = False) -> List[str]:
    """
    List every structural problem of a formula; empty means valid.

    Checks the (N, M) bounds, the sizes of every atom, the M-lane span of
    every stage, the absence of W placeholders (unless allowed) and
    conformance to the stage template for (N, M).
    """
    violations = list(parameter_errors(f.N, f.M))

    for index, stage in enumerate(f.stages):
        atom = stage.atom
        if not is_power_of_two(stage.copies):
            violations.append(f"stage {index}: I{stage.copies} is not a power of two")
        if atom.kind == AtomKind.SWITCH and (
            atom.size.denominator != 1 or not is_power_of_two(atom.size.numerator) or atom.size < 2
        ):
            violations.append(f"stage {index}: switch size {atom.text[1:]} must be a power of two >= 2")
        if atom.kind == AtomKind.PERM and (
            atom.size.denominator != 1 or not is_power_of_two(atom.size.numerator) or atom.size < 4
        ):
            violations.append(f"stage {index}: permutation size {atom.text[1:]} must be a power of two >= 4")
        if atom.kind == AtomKind.W and not allow_placeholders:
            violations.append(f"stage {index}: placeholder {atom.text} must be specialized")
        if stage.lanes != f.M:
            violations.append(f"stage {index}: spans {stage.lanes} lanes, expected {f.M}")

    if parameter_errors(f.N, f.M):
        return violations

    n = log2_exact(f.N)
    expected_count = 2 * n + 1
    if len(f.stages) != expected_count:
        violations.append(f"template: {len(f.stages)} stages, expected {expected_count}")
    xp_count = sum(1 for s in f.stages if s.atom.kind == AtomKind.XP)
    if xp_count != n:
        violations.append(f"template: {xp_count} XP stages, expected {n}")

    general = general_formula(f.N, f.M)
    hardware = specialize(general)
    for index, got in enumerate(f.stages[: len(general.stages)]):
        want = general.stages[index] if got.atom.kind == AtomKind.W else hardware.stages[index]
        if got != want:
            violations.append(f"template: stage {index} is {got.text}, expected {want.text}")
            break
    return violations

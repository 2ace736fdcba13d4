"""
Flat structural netlist of a specialized formula.

Cells are numbered left to right by stage and top to bottom within a
stage, which is also a valid evaluation order for the combinational
cells. Wire 0 .. M-1 are the primary inputs, lane l on wire l.

Switch S_K (D = K/2 delay elements per side) is built with its D delays
on the lane-1 input and its other D delays on the lane-0 output. With a
modulus-K counter reset to phase 0 and crossing while the counter MSB is
set, this exchanges lane-address bit 0 with time bit log2(K)-1 of the
stream at a latency of D cycles.
"""

from dataclasses import dataclass, field
from enum import Enum
import json
from typing import Any, Dict, List, Optional, Sequence, Tuple

from loguru import logger

from polar_encoder_autogen.errors import FormulaStructureError, InvariantViolation
from polar_encoder_autogen.formula import AtomKind, Formula, format_formula, parse_formula, validate
from polar_encoder_autogen.polar_core import log2_exact

# Calibrated switch construction, frozen for every (N, M)
DELAY_SIDE = "bottom-in/top-out"
ALT_DELAY_SIDE = "top-in/bottom-out"
SWITCH_PHASE = 0


class CellKind(str, Enum):
    XP = "xp"
    DELAY = "delay"
    SWITCH = "switch"
    PERM = "perm"


@dataclass(frozen=True)
class Cell:
    id: int
    kind: CellKind
    inputs: Tuple[int, ...]
    outputs: Tuple[int, ...]
    stage: int
    params: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class Netlist:
    """
    Elaborated design.

    Attributes:
        N, M: code length and parallelism
        formula: canonical text of the source formula
        cells: all cells, cells[i].id == i
        inputs, outputs: wire id of each lane, lane 0 first
        num_wires: wire ids are 0 .. num_wires-1
        latency: cycles from first input slice to first output slice
        delay_side: switch construction, DELAY_SIDE unless calibrating
    """

    N: int
    M: int
    formula: str
    cells: Tuple[Cell, ...]
    inputs: Tuple[int, ...]
    outputs: Tuple[int, ...]
    num_wires: int
    latency: int
    delay_side: str = DELAY_SIDE

    def census(self) -> Dict[str, int]:
        counts = {kind.value: 0 for kind in CellKind}
        for cell in self.cells:
            counts[cell.kind.value] += 1
        return counts


def permutation_table(P: int) -> List[int]:
    """
    Fixed wiring of P_P: output lane i takes input lane table[i].

    Even lanes of the lower half and odd lanes of the upper half stay in
    place; odd lane i of the lower half swaps with lane i - 1 + P/2. The
    result is an involution that exchanges lane-address bits 0 and
    log2(P)-1.
    """
    if P < 4:
        raise FormulaStructureError(f"Permutation size must be at least 4 (got {P})")
    log2_exact(P)
    half = P // 2
    table: List[Optional[int]] = [None] * P
    for i in range(0, half, 2):
        table[i] = i
    for i in range(P - 1, half, -2):
        table[i] = i
    for i in range(1, half, 2):
        table[i] = i - 1 + half
        table[i - 1 + half] = i
    if None in table or sorted(table) != list(range(P)):
        raise InvariantViolation(f"Permutation table for P={P} is not a bijection")
    return table


class _Builder:
    def __init__(self, M: int):
        self.cells: List[Cell] = []
        self.num_wires = M

    def add(self, kind, inputs, n_outputs, stage, params=None) -> Tuple[int, ...]:
        outputs = tuple(range(self.num_wires, self.num_wires + n_outputs))
        self.num_wires += n_outputs
        self.cells.append(
            Cell(len(self.cells), kind, tuple(inputs), outputs, stage, dict(params or {}))
        )
        return outputs

    def delay_chain(self, wire: int, depth: int, stage: int) -> int:
        for _ in range(depth):
            (wire,) = self.add(CellKind.DELAY, (wire,), 1, stage)
        return wire


def elaborate(
    f: Formula, phases: Optional[Sequence[int]] = None, delay_side: str = DELAY_SIDE
) -> Netlist:
    """
    Elaborate a specialized formula into cells and wires.

    Args:
        f: W-free formula that passes validate()
        phases: counter reset value per switch stage, SWITCH_PHASE if None
        delay_side: DELAY_SIDE, or ALT_DELAY_SIDE for calibration sweeps

    Returns:
        Netlist
    """
    if f.has_placeholders:
        raise FormulaStructureError("Formula still contains W placeholders; specialize it first")
    problems = validate(f)
    if problems:
        raise FormulaStructureError("Invalid formula: " + "; ".join(problems))
    if delay_side not in (DELAY_SIDE, ALT_DELAY_SIDE):
        raise FormulaStructureError(f"Unknown delay side {delay_side!r}")

    switch_stages = [i for i, s in enumerate(f.stages) if s.atom.kind == AtomKind.SWITCH]
    if phases is None:
        phases = [SWITCH_PHASE] * len(switch_stages)
    if len(phases) != len(switch_stages):
        raise FormulaStructureError(
            f"{len(phases)} switch phases given for {len(switch_stages)} switch stages"
        )
    phase_of = dict(zip(switch_stages, phases))

    builder = _Builder(f.M)
    lanes = list(range(f.M))
    latency = 0
    for index, stage in enumerate(f.stages):
        atom = stage.atom
        if atom.kind == AtomKind.XP:
            for c in range(stage.copies):
                top, bottom = lanes[2 * c], lanes[2 * c + 1]
                lanes[2 * c], lanes[2 * c + 1] = builder.add(CellKind.XP, (top, bottom), 2, index)

        elif atom.kind == AtomKind.PERM:
            P = int(atom.size)
            table = permutation_table(P)
            for c in range(stage.copies):
                group = lanes[c * P:(c + 1) * P]
                lanes[c * P:(c + 1) * P] = builder.add(
                    CellKind.PERM, group, P, index, {"size": P, "table": table}
                )

        elif atom.kind == AtomKind.SWITCH:
            K = int(atom.size)
            depth = K // 2
            params = {"modulus": K, "phase": phase_of[index] % K, "valid_tap": latency}
            for c in range(stage.copies):
                top, bottom = lanes[2 * c], lanes[2 * c + 1]
                if delay_side == DELAY_SIDE:
                    bottom = builder.delay_chain(bottom, depth, index)
                    out0, out1 = builder.add(CellKind.SWITCH, (top, bottom), 2, index, params)
                    out0 = builder.delay_chain(out0, depth, index)
                else:
                    top = builder.delay_chain(top, depth, index)
                    out0, out1 = builder.add(CellKind.SWITCH, (top, bottom), 2, index, params)
                    out1 = builder.delay_chain(out1, depth, index)
                lanes[2 * c], lanes[2 * c + 1] = out0, out1
            latency += depth

    nl = Netlist(
        N=f.N,
        M=f.M,
        formula=format_formula(f),
        cells=tuple(builder.cells),
        inputs=tuple(range(f.M)),
        outputs=tuple(lanes),
        num_wires=builder.num_wires,
        latency=latency,
        delay_side=delay_side,
    )
    logger.debug(f"Elaborated N={f.N}, M={f.M}: {nl.census()}, latency {latency}")
    return nl


def xor_count(nl: Netlist) -> int:
    return sum(1 for c in nl.cells if c.kind == CellKind.XP)


def mem_count(nl: Netlist) -> int:
    return sum(1 for c in nl.cells if c.kind == CellKind.DELAY)


def lane_depths(nl: Netlist) -> List[int]:
    """
    Register depth of every output lane with all switches straight.

    Raises InvariantViolation when an XP cell combines operands of
    different depth, since such operands belong to different cycles.
    """
    depth = {wire: 0 for wire in nl.inputs}
    for cell in nl.cells:
        ins = [depth[w] for w in cell.inputs]
        if cell.kind == CellKind.DELAY:
            outs = [ins[0] + 1]
        elif cell.kind == CellKind.PERM:
            outs = [ins[i] for i in cell.params["table"]]
        elif cell.kind == CellKind.XP:
            if ins[0] != ins[1]:
                raise InvariantViolation(f"XP cell {cell.id} combines depths {ins[0]} and {ins[1]}")
            outs = ins
        else:
            outs = ins
        depth.update(zip(cell.outputs, outs))
    return [depth[w] for w in nl.outputs]


def latency_cycles(nl: Netlist) -> int:
    """Structural latency; closed form 3N/(2M) - 1."""
    depths = set(lane_depths(nl))
    if len(depths) != 1:
        raise InvariantViolation(f"Output lanes have unequal latency: {sorted(depths)}")
    latency = depths.pop()
    expected = 3 * nl.N // (2 * nl.M) - 1
    if latency != expected:
        raise InvariantViolation(f"Latency {latency} differs from closed form {expected}")
    return latency


@dataclass(frozen=True)
class LaneBitLayout:
    """
    Which source-index bit sits on each lane-address and time bit.

    Index bits refer to positions in the source word u; the output
    layout lane bit b = index bit b, time bit k = index bit m+k is the
    bit-reversed codeword in natural order.
    """

    lane_bits: Tuple[int, ...]
    time_bits: Tuple[int, ...]


def lane_bit_trace(f: Formula) -> List[Tuple[str, LaneBitLayout, Optional[int]]]:
    """
    Trace the index-bit layout through a specialized formula.

    Returns one (stage text, layout after the stage, butterfly bit) entry
    per stage; the butterfly bit is the index bit an XP stage folds and
    None for other stages.
    """
    n, m = log2_exact(f.N), log2_exact(f.M)
    # input slice i carries (u[(M/2)i + j], u[(M/2)i + j + N/2]) on lanes 2j, 2j+1
    lane = [n - 1] + list(range(m - 1))
    time = [m - 1 + k for k in range(n - m)]
    trace = []
    for stage in f.stages:
        atom = stage.atom
        folded = None
        if atom.kind == AtomKind.XP:
            folded = lane[0]
        elif atom.kind == AtomKind.PERM:
            hi = log2_exact(int(atom.size)) - 1
            lane[0], lane[hi] = lane[hi], lane[0]
        elif atom.kind == AtomKind.SWITCH:
            hi = log2_exact(int(atom.size)) - 1
            lane[0], time[hi] = time[hi], lane[0]
        else:
            raise FormulaStructureError(f"Cannot trace placeholder {atom.text}")
        trace.append((stage.text, LaneBitLayout(tuple(lane), tuple(time)), folded))
    return trace


def _transposition(stage) -> str:
    atom = stage.atom
    if atom.kind == AtomKind.PERM:
        return f"lane bit 0 <-> lane bit {log2_exact(int(atom.size)) - 1}"
    if atom.kind == AtomKind.SWITCH:
        return f"lane bit 0 <-> time bit {log2_exact(int(atom.size)) - 1}"
    return ""


@dataclass(frozen=True)
class StageCost:
    index: int
    symbol: str
    xor_count: int
    mem_count: int
    latency: int
    action: str


@dataclass(frozen=True)
class CostReport:
    N: int
    M: int
    xor_count: int
    mem_count: int
    latency: int
    bits_per_cycle: int
    stages: Tuple[StageCost, ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.N,
            "m": self.M,
            "xor_count": self.xor_count,
            "mem_count": self.mem_count,
            "latency": self.latency,
            "bits_per_cycle": self.bits_per_cycle,
            "stages": [
                {
                    "index": s.index,
                    "symbol": s.symbol,
                    "xor": s.xor_count,
                    "mem": s.mem_count,
                    "latency": s.latency,
                    "action": s.action,
                }
                for s in self.stages
            ],
        }


def cost_report(nl: Netlist, f: Optional[Formula] = None) -> CostReport:
    """
    Walk the netlist and cross-check against the closed forms.

    #XOR = (M/2)·log2 N, #MEM = 3N/2 - M, latency = 3N/(2M) - 1. Any
    disagreement raises InvariantViolation. The per-stage breakdown comes
    from ``f``, or from the formula text stored in the netlist.
    """
    if f is None:
        f = parse_formula(nl.formula)
    n = log2_exact(nl.N)
    xors, mems = xor_count(nl), mem_count(nl)
    if xors != (nl.M // 2) * n:
        raise InvariantViolation(f"Walked XOR count {xors} differs from (M/2)·log2 N = {(nl.M // 2) * n}")
    if mems != 3 * nl.N // 2 - nl.M:
        raise InvariantViolation(f"Walked delay count {mems} differs from 3N/2 - M = {3 * nl.N // 2 - nl.M}")
    latency = latency_cycles(nl)

    stages = []
    trace = lane_bit_trace(f)
    for index, stage in enumerate(f.stages):
        cells = [c for c in nl.cells if c.stage == index]
        folded = trace[index][2]
        action = f"butterfly on index bit {folded}" if folded is not None else _transposition(stage)
        stage_latency = int(stage.atom.size) // 2 if stage.atom.kind == AtomKind.SWITCH else 0
        stages.append(
            StageCost(
                index=index,
                symbol=stage.text,
                xor_count=sum(1 for c in cells if c.kind == CellKind.XP),
                mem_count=sum(1 for c in cells if c.kind == CellKind.DELAY),
                latency=stage_latency,
                action=action,
            )
        )
    return CostReport(nl.N, nl.M, xors, mems, latency, nl.M, tuple(stages))


def to_json(nl: Netlist) -> str:
    """Serialise with a stable key order; equal netlists give equal text."""
    doc = {
        "n": nl.N,
        "m": nl.M,
        "formula": nl.formula,
        "latency": nl.latency,
        "delay_side": nl.delay_side,
        "num_wires": nl.num_wires,
        "cells": [
            {
                "id": c.id,
                "kind": c.kind.value,
                "params": c.params,
                "in": list(c.inputs),
                "out": list(c.outputs),
                "stage": c.stage,
            }
            for c in nl.cells
        ],
        "inputs": list(nl.inputs),
        "outputs": list(nl.outputs),
    }
    return json.dumps(doc, indent=1) + "\n"


def from_json(text: str) -> Netlist:
    doc = json.loads(text)
    try:
        cells = tuple(
            Cell(
                id=c["id"],
                kind=CellKind(c["kind"]),
                inputs=tuple(c["in"]),
                outputs=tuple(c["out"]),
                stage=c["stage"],
                params=dict(c["params"]),
            )
            for c in doc["cells"]
        )
        return Netlist(
            N=doc["n"],
            M=doc["m"],
            formula=doc["formula"],
            cells=cells,
            inputs=tuple(doc["inputs"]),
            outputs=tuple(doc["outputs"]),
            num_wires=doc["num_wires"],
            latency=doc["latency"],
            delay_side=doc["delay_side"],
        )
    except (KeyError, ValueError) as e:
        raise FormulaStructureError(f"Malformed netlist document: {e}") from e

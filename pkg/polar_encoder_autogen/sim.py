"""
Cycle-accurate, bit-true simulation of an elaborated netlist.

Each clock cycle is evaluated in two phases. First every combinational
cell is computed from the primary inputs and the current register
contents, level by level; then every delay register loads its input and
every switch counter whose stage-input valid bit is high advances.

Streams are described per frame as N/M slices of M bits. Slice i of the
input carries u[(M/2)·i + j] on lane 2j and u[(M/2)·i + j + N/2] on lane
2j+1; slice s of the output carries the bit-reversed codeword positions
M·s .. M·s + M - 1 in lane order.

WORKFLOW:
1. input_schedule / output_schedule turn a source word into slices
2. run_frames streams frames through a netlist (gapless or with gaps)
3. verify_equivalence compares every output slice with encode_reference
4. read_vectors / write_vectors move slices to and from hex vector files
"""

from dataclasses import dataclass, field
from functools import lru_cache
from graphlib import CycleError, TopologicalSorter
from itertools import product
from pathlib import Path
import re
from typing import Dict, List, Optional, Sequence, Tuple

from loguru import logger
import numpy as np

from polar_encoder_autogen.errors import ParameterError, SimulationError, VectorFileError
from polar_encoder_autogen.formula import check_parameters, hardware_formula
from polar_encoder_autogen.netlist import DELAY_SIDE, CellKind, Netlist, elaborate
from polar_encoder_autogen.polar_core import as_bits, bitrev_permute, encode_reference

# Exhaustive input sweeps are used up to this code length
EXHAUSTIVE_MAX_N = 8

# (N, M) points the switch construction is calibrated on
CALIBRATION_SIZES = ((8, 4), (32, 8))


def input_schedule(u, N: int, M: int) -> np.ndarray:
    """Split a source word into its N/M input slices, shape (N/M, M)."""
    check_parameters(N, M)
    u = as_bits(u, N)
    rows = N // M
    slices = np.empty((rows, M), dtype=np.uint8)
    slices[:, 0::2] = u[: N // 2].reshape(rows, M // 2)
    slices[:, 1::2] = u[N // 2:].reshape(rows, M // 2)
    return slices


def output_schedule(x, N: int, M: int) -> np.ndarray:
    """Expected output slices of codeword x: bitrev(x) cut into rows of M."""
    check_parameters(N, M)
    return bitrev_permute(as_bits(x, N)).reshape(N // M, M)


@dataclass(frozen=True)
class FrameSchedule:
    """One source word with its input slices and expected output slices."""

    N: int
    M: int
    u: np.ndarray
    inputs: np.ndarray
    expected: np.ndarray


def frame_schedule(u, N: int, M: int) -> FrameSchedule:
    u = as_bits(u, N)
    return FrameSchedule(N, M, u, input_schedule(u, N, M), output_schedule(encode_reference(u, N), N, M))


def random_frames(N: int, count: int, seed: int) -> List[np.ndarray]:
    """Deterministic random source words; the same (N, count, seed) always gives the same frames."""
    if count < 0:
        raise ParameterError(f"Frame count must be non-negative (got {count})")
    rng = np.random.default_rng(seed)
    return list(rng.integers(0, 2, size=(count, N), dtype=np.uint8))


@dataclass
class _Program:
    M: int
    latency: int
    num_wires: int
    inputs: np.ndarray
    outputs: np.ndarray
    delay_in: np.ndarray
    delay_out: np.ndarray
    switch_modulus: np.ndarray
    switch_phase: np.ndarray
    switch_tap: np.ndarray
    groups: List[tuple] = field(default_factory=list)


def _array(values) -> np.ndarray:
    return np.asarray(values, dtype=np.int64)


@lru_cache(maxsize=64)
def _compile(nl: Netlist) -> _Program:
    delays = [c for c in nl.cells if c.kind == CellKind.DELAY]
    switches = [c for c in nl.cells if c.kind == CellKind.SWITCH]
    comb = [c for c in nl.cells if c.kind != CellKind.DELAY]

    driven = set(nl.inputs)
    for cell in nl.cells:
        driven.update(cell.outputs)
    for cell in nl.cells:
        undriven = [w for w in cell.inputs if w not in driven]
        if undriven:
            raise SimulationError(f"Cell {cell.id} reads undriven wires {undriven}")

    driver = {w: c.id for c in comb for w in c.outputs}
    deps = {c.id: {driver[w] for w in c.inputs if w in driver} for c in comb}
    try:
        order = list(TopologicalSorter(deps).static_order())
    except CycleError as e:
        raise SimulationError(f"Combinational loop through cells {e.args[1]}") from e
    level: Dict[int, int] = {}
    for cid in order:
        level[cid] = 1 + max((level[d] for d in deps[cid]), default=0)

    counter_index = {c.id: i for i, c in enumerate(switches)}
    by_level: Dict[Tuple[int, str], list] = {}
    for cell in comb:
        by_level.setdefault((level[cell.id], cell.kind.value), []).append(cell)

    groups = []
    for (_, kind), cells in sorted(by_level.items()):
        if kind == CellKind.XP.value:
            groups.append(
                (
                    CellKind.XP,
                    _array([c.inputs[0] for c in cells]),
                    _array([c.inputs[1] for c in cells]),
                    _array([c.outputs[0] for c in cells]),
                    _array([c.outputs[1] for c in cells]),
                )
            )
        elif kind == CellKind.PERM.value:
            src = [c.inputs[t] for c in cells for t in c.params["table"]]
            dst = [w for c in cells for w in c.outputs]
            groups.append((CellKind.PERM, _array(src), _array(dst)))
        else:
            groups.append(
                (
                    CellKind.SWITCH,
                    _array([c.inputs[0] for c in cells]),
                    _array([c.inputs[1] for c in cells]),
                    _array([c.outputs[0] for c in cells]),
                    _array([c.outputs[1] for c in cells]),
                    _array([counter_index[c.id] for c in cells]),
                    _array([c.params["modulus"] // 2 for c in cells]),
                )
            )

    taps = [c.params["valid_tap"] for c in switches]
    if any(t < 0 or t > nl.latency for t in taps):
        raise SimulationError(f"Switch valid taps {taps} fall outside the valid chain")
    logger.debug(f"Compiled netlist N={nl.N}, M={nl.M} into {len(groups)} evaluation groups")
    return _Program(
        M=nl.M,
        latency=nl.latency,
        num_wires=nl.num_wires,
        inputs=_array(nl.inputs),
        outputs=_array(nl.outputs),
        delay_in=_array([c.inputs[0] for c in delays]),
        delay_out=_array([c.outputs[0] for c in delays]),
        switch_modulus=_array([c.params["modulus"] for c in switches]),
        switch_phase=_array([c.params["phase"] for c in switches]),
        switch_tap=_array(taps),
        groups=groups,
    )


class SimState:
    """
    Architectural state of one running design.

    Attributes:
        registers: content of every delay cell, in cell order
        counters: value of every switch counter, in cell order
        valid: shadow valid chain, valid[k] is in_valid of k cycles ago
        cycle: number of completed clock cycles since reset
    """

    def __init__(self, nl: Optional[Netlist] = None):
        self.netlist: Optional[Netlist] = None
        self.cycle = 0
        self.registers = None
        self.counters = None
        self.valid = None
        self._program: Optional[_Program] = None
        self._wires = None
        if nl is not None:
            self.reset(nl)

    def reset(self, nl: Netlist):
        """Synchronous reset: registers cleared, counters loaded with their phase."""
        program = _compile(nl)
        self.netlist = nl
        self._program = program
        self.cycle = 0
        self.registers = np.zeros(len(program.delay_in), dtype=np.uint8)
        self.counters = program.switch_phase.copy()
        self.valid = np.zeros(program.latency + 1, dtype=np.uint8)
        self._wires = np.zeros(program.num_wires, dtype=np.uint8)

    def _require(self, nl: Netlist) -> _Program:
        if self._program is None:
            raise SimulationError("Simulation state is not initialised; call reset(netlist) first")
        if self.netlist is not nl:
            raise SimulationError("Simulation state belongs to a different netlist")
        return self._program


def step(state: SimState, nl: Netlist, in_vec, in_valid: bool) -> Tuple[np.ndarray, bool]:
    """Advance one clock cycle; returns the output slice and out_valid of this cycle."""
    program = state._require(nl)
    in_vec = np.asarray(in_vec, dtype=np.uint8)
    if in_vec.shape != (program.M,):
        raise SimulationError(f"Input slice has shape {in_vec.shape}, expected ({program.M},)")

    w = state._wires
    w[program.inputs] = in_vec
    w[program.delay_out] = state.registers
    for group in program.groups:
        kind = group[0]
        if kind == CellKind.XP:
            _, a, b, o0, o1 = group
            bv = w[b]
            w[o0] = w[a] ^ bv
            w[o1] = bv
        elif kind == CellKind.PERM:
            _, src, dst = group
            w[dst] = w[src]
        else:
            _, a, b, o0, o1, counter, half = group
            cross = state.counters[counter] >= half
            av, bv = w[a], w[b]
            w[o0] = np.where(cross, bv, av)
            w[o1] = np.where(cross, av, bv)
    out = w[program.outputs]

    state.valid[0] = 1 if in_valid else 0
    out_valid = bool(state.valid[program.latency])

    state.registers = w[program.delay_in]
    enabled = state.valid[program.switch_tap].astype(bool)
    state.counters = np.where(
        enabled, (state.counters + 1) % program.switch_modulus, state.counters
    )
    state.valid[1:] = state.valid[:-1].copy()
    state.cycle += 1
    return out, out_valid


@dataclass
class StreamRun:
    """
    Result of streaming frames through a design.

    Attributes:
        outputs: output slices per completed frame, each (N/M, M)
        out_cycles: clock cycle of every output slice, per frame
        latency: cycles from the first valid input to the first valid output
        bits_per_cycle: output bits per cycle over the output window
        trace: (cycle, in_valid, out_valid, output bits) per cycle if recorded
    """

    outputs: List[np.ndarray]
    out_cycles: List[List[int]]
    latency: Optional[int]
    cycles: int
    bits_per_cycle: float
    trace: Optional[List[tuple]] = None


def run_stream(
    nl: Netlist, slice_frames: Sequence, gap: int = 0, record_trace: bool = False
) -> StreamRun:
    """
    Drive frames of input slices and collect the output slices.

    Args:
        nl: Design to simulate
        slice_frames: Per frame an (N/M, M) array of input slices
        gap: Invalid cycles inserted between consecutive frames
        record_trace: Keep a per-cycle trace of valid bits and outputs
    """
    if gap < 0:
        raise SimulationError(f"Gap must be non-negative (got {gap})")
    rows_per_frame = nl.N // nl.M
    zeros = np.zeros(nl.M, dtype=np.uint8)
    feed = []
    for k, frame in enumerate(slice_frames):
        frame = np.asarray(frame, dtype=np.uint8)
        if frame.shape != (rows_per_frame, nl.M):
            raise SimulationError(
                f"Frame {k} has shape {frame.shape}, expected ({rows_per_frame}, {nl.M})"
            )
        if k and gap:
            feed.extend([(zeros, False)] * gap)
        feed.extend((row, True) for row in frame)

    state = SimState(nl)
    rows, cycles, trace = [], [], []
    first_in = None
    total = len(feed) + nl.latency + 1 if feed else 0
    for cycle in range(total):
        row, valid = feed[cycle] if cycle < len(feed) else (zeros, False)
        out, out_valid = step(state, nl, row, valid)
        if valid and first_in is None:
            first_in = cycle
        if out_valid:
            rows.append(out)
            cycles.append(cycle)
        if record_trace:
            trace.append((cycle, valid, out_valid, tuple(int(b) for b in out)))

    complete = len(rows) // rows_per_frame
    outputs = [np.array(rows[k * rows_per_frame:(k + 1) * rows_per_frame]) for k in range(complete)]
    out_cycles = [cycles[k * rows_per_frame:(k + 1) * rows_per_frame] for k in range(complete)]
    latency = cycles[0] - first_in if cycles and first_in is not None else None
    bits_per_cycle = nl.M * len(cycles) / (cycles[-1] - cycles[0] + 1) if cycles else 0.0
    return StreamRun(outputs, out_cycles, latency, total, bits_per_cycle, trace if record_trace else None)


def run_frames(nl: Netlist, frames: Sequence, gap: int = 0, record_trace: bool = False) -> StreamRun:
    """Stream source words (N bits each) through the design."""
    slices = [input_schedule(u, nl.N, nl.M) for u in frames]
    return run_stream(nl, slices, gap=gap, record_trace=record_trace)


@dataclass(frozen=True)
class Mismatch:
    frame: int
    slice: int
    cycle: Optional[int]
    lane: Optional[int]
    expected: Optional[int]
    actual: Optional[int]

    def describe(self) -> str:
        if self.lane is None:
            return f"frame {self.frame}: output missing"
        return (
            f"frame {self.frame}, slice {self.slice}, cycle {self.cycle}, lane {self.lane}: "
            f"expected {self.expected}, got {self.actual}"
        )


@dataclass(frozen=True)
class EquivalenceReport:
    N: int
    M: int
    frames_checked: int
    frames_passed: int
    latency: Optional[int]
    expected_latency: int
    bits_per_cycle: float
    mismatch: Optional[Mismatch] = None

    @property
    def passed(self) -> bool:
        return (
            self.frames_passed == self.frames_checked
            and self.mismatch is None
            and (self.frames_checked == 0 or self.latency == self.expected_latency)
        )

    def describe(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"N={self.N} M={self.M}: {status} {self.frames_passed}/{self.frames_checked} frames"
        if self.latency != self.expected_latency and self.frames_checked:
            text += f", latency {self.latency} (expected {self.expected_latency})"
        if self.mismatch is not None:
            text += f"; first mismatch at {self.mismatch.describe()}"
        return text


def _compare(nl: Netlist, frames: Sequence, run: StreamRun, first_frame: int = 0):
    passed, mismatch = 0, None
    for k, u in enumerate(frames):
        expected = output_schedule(encode_reference(u, nl.N), nl.N, nl.M)
        if k >= len(run.outputs):
            mismatch = mismatch or Mismatch(first_frame + k, 0, None, None, None, None)
            continue
        diff = np.argwhere(run.outputs[k] != expected)
        if len(diff):
            s, lane = (int(v) for v in diff[0])
            mismatch = mismatch or Mismatch(
                first_frame + k,
                s,
                run.out_cycles[k][s],
                lane,
                int(expected[s, lane]),
                int(run.outputs[k][s, lane]),
            )
        else:
            passed += 1
    return passed, mismatch


def check_frames(nl: Netlist, frames: Sequence, gap: int = 0, isolated: bool = False) -> EquivalenceReport:
    """
    Simulate frames and compare every slice with the golden model.

    With ``isolated`` every frame gets its own run from reset; otherwise
    all frames are streamed back to back.
    """
    expected_latency = 3 * nl.N // (2 * nl.M) - 1
    frames = list(frames)
    if isolated:
        passed, mismatch, latency, bpc = 0, None, None, 0.0
        for k, u in enumerate(frames):
            run = run_frames(nl, [u])
            ok, bad = _compare(nl, [u], run, first_frame=k)
            passed += ok
            mismatch = mismatch or bad
            if latency is None or run.latency != expected_latency:
                latency = run.latency
            bpc = run.bits_per_cycle
    else:
        run = run_frames(nl, frames, gap=gap)
        passed, mismatch = _compare(nl, frames, run)
        latency, bpc = run.latency, run.bits_per_cycle
    return EquivalenceReport(nl.N, nl.M, len(frames), passed, latency, expected_latency, bpc, mismatch)


def verify_equivalence(
    N: int, M: int, num_frames: int = 10, seed: int = 1, gap: int = 0, netlist: Optional[Netlist] = None
) -> EquivalenceReport:
    """
    Stream ``num_frames`` seeded random frames and compare with the oracle.

    Args:
        N, M: Design point
        num_frames: Frames streamed back to back (with ``gap`` idle cycles between)
        seed: Seed of the frame generator
        gap: Idle cycles between frames
        netlist: Design to check instead of a freshly elaborated one
    """
    check_parameters(N, M)
    nl = netlist if netlist is not None else elaborate(hardware_formula(N, M))
    report = check_frames(nl, random_frames(N, num_frames, seed), gap=gap)
    logger.debug(report.describe())
    return report


def verify_exhaustive(N: int, M: int, netlist: Optional[Netlist] = None) -> EquivalenceReport:
    """
    Prove equivalence over every input word.

    Up to EXHAUSTIVE_MAX_N all 2^N words are run as isolated frames.
    Above that the zero word and the N unit vectors are streamed back to
    back: the design is GF(2)-linear, so agreeing on a basis means
    agreeing everywhere.
    """
    check_parameters(N, M)
    nl = netlist if netlist is not None else elaborate(hardware_formula(N, M))
    if N <= EXHAUSTIVE_MAX_N:
        words = [[(value >> i) & 1 for i in range(N)] for value in range(1 << N)]
        return check_frames(nl, words, isolated=True)
    basis = [np.zeros(N, dtype=np.uint8)] + list(np.eye(N, dtype=np.uint8))
    return check_frames(nl, basis)


def calibrate_phases(N: int, M: int, delay_side: str = DELAY_SIDE) -> Optional[Tuple[int, ...]]:
    """
    Find counter reset phases that make the (N, M) design correct.

    Sweeps phase 0 and K/2 for every switch stage, in lexicographic order,
    and returns the first combination passing the basis proof plus a few
    random back-to-back frames; None if no combination passes.
    """
    f = hardware_formula(N, M)
    sizes = f.switch_sizes()
    words = [np.zeros(N, dtype=np.uint8)] + list(np.eye(N, dtype=np.uint8))
    words += random_frames(N, 4, seed=0)
    for phases in product(*[(0, K // 2) for K in sizes]):
        nl = elaborate(f, phases=phases, delay_side=delay_side)
        if check_frames(nl, words).passed:
            logger.info(f"Calibrated N={N}, M={M} ({delay_side}): phases {phases}")
            return tuple(phases)
    logger.warning(f"No phase combination works for N={N}, M={M} ({delay_side})")
    return None


def calibrate(sizes=CALIBRATION_SIZES, delay_side: str = DELAY_SIDE) -> Dict[Tuple[int, int], Optional[Tuple[int, ...]]]:
    return {(N, M): calibrate_phases(N, M, delay_side) for N, M in sizes}


def format_vector(bits) -> str:
    """Hex text of one slice; lane M-1 is the most significant bit."""
    bits = np.asarray(bits, dtype=np.uint8)
    M = bits.size
    value = int("".join("1" if b else "0" for b in bits[::-1]), 2)
    return format(value, f"0{M // 4}x")


_HEX_RE = re.compile(r"[0-9a-fA-F]+")


def parse_vector(token: str, M: int, line: Optional[int] = None) -> np.ndarray:
    if len(token) != M // 4:
        raise VectorFileError(f"expected {M // 4} hex digits, found {len(token)} in {token!r}", line)
    if not _HEX_RE.fullmatch(token):
        raise VectorFileError(f"not a hex vector: {token!r}", line)
    value = int(token, 16)
    return np.array([int(c) for c in format(value, f"0{M}b")[::-1]], dtype=np.uint8)


def vectors_to_text(frames: Sequence, M: int, header: Sequence[str] = ()) -> str:
    """Render frames of slices; a blank line separates frames."""
    lines = [f"# {h}" for h in header]
    lines.append(f"# {M} lanes per vector, lane {M - 1} is the most significant bit")
    for k, frame in enumerate(frames):
        if k:
            lines.append("")
        lines.extend(format_vector(row) for row in frame)
    return "\n".join(lines) + "\n"


def write_vectors(path, frames: Sequence, M: int, header: Sequence[str] = ()) -> Path:
    path = Path(path)
    path.write_text(vectors_to_text(frames, M, header))
    logger.debug(f"Wrote {len(frames)} frames of vectors to {path}")
    return path


def read_vectors(path, M: int, rows_per_frame: Optional[int] = None) -> List[np.ndarray]:
    """
    Read a vector file back into frames of slices.

    '#' starts a comment, blank lines separate frames. With
    ``rows_per_frame`` every frame must hold exactly that many vectors.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise VectorFileError(f"cannot read {path}: {e}") from e

    frames, current, starts = [], [], []
    for number, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("#", 1)[0].strip()
        if not content:
            if not raw.strip() and current:
                frames.append(current)
                current = []
            continue
        tokens = content.split()
        if len(tokens) != 1:
            raise VectorFileError(f"expected one vector per line, found {len(tokens)}", number)
        if not current:
            starts.append(number)
        current.append(parse_vector(tokens[0], M, number))
    if current:
        frames.append(current)

    result = []
    for start, frame in zip(starts, frames):
        if rows_per_frame is not None and len(frame) != rows_per_frame:
            raise VectorFileError(
                f"frame has {len(frame)} vectors, expected {rows_per_frame}", start
            )
        result.append(np.array(frame, dtype=np.uint8))
    return result


def check_idle_stable(nl: Netlist, state: SimState, cycles: int) -> bool:
    """True when ``cycles`` idle cycles leave the outputs unchanged."""
    zeros = np.zeros(nl.M, dtype=np.uint8)
    first, first_valid = step(state, nl, zeros, False)
    for _ in range(cycles - 1):
        out, out_valid = step(state, nl, zeros, False)
        if out_valid or first_valid or not np.array_equal(out, first):
            return False
    return True


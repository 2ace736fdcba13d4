"""
Verilog-2001 emission of an elaborated netlist.

The top module instantiates one leaf cell per netlist cell and routes
every wire through a single net vector ``w``, so the emitted structure
stays in one-to-one correspondence with the netlist and the simulator
remains the reference for its behaviour. ``out_valid`` is ``in_valid``
delayed by the design latency; each switch counter is enabled by the tap
of that chain matching its stage input.

Output tree per design (``write_output_tree``)::

    polar_enc_N{N}_M{M}/
        top.v  cells.v  tb.v
        netlist.json  cost.json  manifest.json
        stimulus.txt  expected.txt
"""

from dataclasses import dataclass, field
import json
from pathlib import Path
import re
from typing import Dict, List, NamedTuple, Sequence

from loguru import logger
import numpy as np

from polar_encoder_autogen.errors import InvariantViolation, SimulationError
from polar_encoder_autogen.netlist import CellKind, CostReport, Netlist, permutation_table, to_json
from polar_encoder_autogen.polar_core import log2_exact
from polar_encoder_autogen.sim import vectors_to_text

STIMULUS_FILE = "stimulus.txt"
EXPECTED_FILE = "expected.txt"


def design_name(N: int, M: int) -> str:
    return f"polar_enc_N{N}_M{M}"


@dataclass(frozen=True)
class RtlBundle:
    N: int
    M: int
    top: str
    cells: str
    testbench: str
    manifest: Dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return design_name(self.N, self.M)

    def files(self) -> Dict[str, str]:
        return {"top.v": self.top, "cells.v": self.cells, "tb.v": self.testbench}


def _perm_modules(nl: Netlist) -> Dict[tuple, str]:
    """Module name for every distinct permutation table, in first-use order."""
    names: Dict[tuple, str] = {}
    per_size: Dict[int, int] = {}
    for cell in nl.cells:
        if cell.kind != CellKind.PERM:
            continue
        key = (cell.params["size"], tuple(cell.params["table"]))
        if key in names:
            continue
        P = key[0]
        count = per_size.get(P, 0)
        canonical = list(key[1]) == permutation_table(P)
        names[key] = f"pe_perm{P}" if canonical and count == 0 else f"pe_perm{P}_v{count}"
        per_size[P] = count + 1
    return names


def emit_cells(nl: Netlist) -> str:
    lines = [
        f"// Leaf cells of {design_name(nl.N, nl.M)}",
        "",
        "// XOR-and-pass: o0 = a xor b, o1 = b",
        "module pe_xp (",
        "  input  wire a,",
        "  input  wire b,",
        "  output wire o0,",
        "  output wire o1",
        ");",
        "  assign o0 = a ^ b;",
        "  assign o1 = b;",
        "endmodule",
        "",
        "// One delay element",
        "module pe_delay (",
        "  input  wire clk,",
        "  input  wire rst,",
        "  input  wire d,",
        "  output reg  q",
        ");",
        "  always @(posedge clk) begin",
        "    if (rst) q <= 1'b0;",
        "    else     q <= d;",
        "  end",
        "endmodule",
        "",
        "// Switch crossbar; crosses while the counter MSB is set.",
        "// The counter counts valid stage inputs modulo K and resets to PHASE.",
        "module pe_switch #(",
        "  parameter K = 2,",
        "  parameter CW = 1,",
        "  parameter PHASE = 0",
        ") (",
        "  input  wire clk,",
        "  input  wire rst,",
        "  input  wire en,",
        "  input  wire a,",
        "  input  wire b,",
        "  output wire o0,",
        "  output wire o1",
        ");",
        "  reg [CW-1:0] cnt;",
        "  wire cross = cnt[CW-1];",
        "  assign o0 = cross ? b : a;",
        "  assign o1 = cross ? a : b;",
        "  always @(posedge clk) begin",
        "    if (rst)     cnt <= PHASE;",
        "    else if (en) cnt <= cnt + 1'b1;",
        "  end",
        "endmodule",
    ]
    for (P, table), name in _perm_modules(nl).items():
        lines += [
            "",
            f"// Fixed {P}-lane rewiring",
            f"module {name} (",
            f"  input  wire [{P - 1}:0] i,",
            f"  output wire [{P - 1}:0] o",
            ");",
        ]
        lines += [f"  assign o[{j}] = i[{src}];" for j, src in enumerate(table)]
        lines.append("endmodule")
    return "\n".join(lines) + "\n"


def _bus(wires: Sequence[int]) -> str:
    return "{" + ", ".join(f"w[{wire}]" for wire in reversed(wires)) + "}"


def emit_top(nl: Netlist) -> str:
    name = design_name(nl.N, nl.M)
    M, L = nl.M, nl.latency
    census = nl.census()
    perm_names = _perm_modules(nl)
    lines = [
        f"// {name}: pipelined polar encoder, N={nl.N}, M={M}",
        f"// formula: {nl.formula}",
        f"// cells: {census['xp']} xp, {census['delay']} delay, "
        f"{census['switch']} switch, {census['perm']} perm; latency {L} cycles",
        f"// switch delays: {nl.delay_side}",
        f"module {name} (",
        "  input  wire clk,",
        "  input  wire rst,",
        "  input  wire in_valid,",
        f"  input  wire [{M - 1}:0] u,",
        "  output wire out_valid,",
        f"  output wire [{M - 1}:0] x",
        ");",
        f"  wire [{nl.num_wires - 1}:0] w;",
        f"  reg  [{L}:1] vpipe;",
        f"  wire [{L}:0] v = {{vpipe, in_valid}};",
        "",
        "  always @(posedge clk) begin",
        f"    if (rst) vpipe <= {{{L}{{1'b0}}}};",
        f"    else     vpipe <= {{vpipe[{L - 1}:1], in_valid}};" if L > 1 else "    else     vpipe <= in_valid;",
        "  end",
        f"  assign out_valid = v[{L}];",
        "",
    ]
    lines += [f"  assign w[{wire}] = u[{lane}];" for lane, wire in enumerate(nl.inputs)]
    lines.append("")
    for cell in nl.cells:
        inst = f"c{cell.id}"
        if cell.kind == CellKind.XP:
            a, b = cell.inputs
            o0, o1 = cell.outputs
            lines.append(f"  pe_xp {inst} (.a(w[{a}]), .b(w[{b}]), .o0(w[{o0}]), .o1(w[{o1}]));")
        elif cell.kind == CellKind.DELAY:
            lines.append(
                f"  pe_delay {inst} (.clk(clk), .rst(rst), "
                f".d(w[{cell.inputs[0]}]), .q(w[{cell.outputs[0]}]));"
            )
        elif cell.kind == CellKind.SWITCH:
            K = cell.params["modulus"]
            width = max(1, log2_exact(K))
            a, b = cell.inputs
            o0, o1 = cell.outputs
            lines.append(
                f"  pe_switch #(.K({K}), .CW({width}), .PHASE({cell.params['phase']})) {inst} "
                f"(.clk(clk), .rst(rst), .en(v[{cell.params['valid_tap']}]), "
                f".a(w[{a}]), .b(w[{b}]), .o0(w[{o0}]), .o1(w[{o1}]));"
            )
        else:
            module = perm_names[(cell.params["size"], tuple(cell.params["table"]))]
            lines.append(f"  {module} {inst} (.i({_bus(cell.inputs)}), .o({_bus(cell.outputs)}));")
    lines.append("")
    lines.append(f"  assign x = {_bus(nl.outputs)};")
    lines.append("endmodule")
    return "\n".join(lines) + "\n"


def _slice_count(frames) -> int:
    return sum(len(frame) for frame in frames)


def emit_testbench(nl: Netlist, stimulus: Sequence = (), expected: Sequence = ()) -> str:
    """
    Self-checking testbench for the design.

    The vectors themselves are read at run time from stimulus.txt and
    expected.txt; only their counts are baked in. Frames are driven back
    to back and every valid output is compared in its cycle. The first
    mismatching cycle is reported and the run ends with PASS or FAIL
    (``$fatal`` on failure unless TB_NO_FATAL is defined).
    """
    n_stim, n_exp = _slice_count(stimulus), _slice_count(expected)
    if n_stim != n_exp:
        raise SimulationError(f"Stimulus has {n_stim} vectors but expected has {n_exp}")
    for frame in list(stimulus) + list(expected):
        if np.asarray(frame).shape[-1] != nl.M:
            raise SimulationError(f"Vector width {np.asarray(frame).shape[-1]} differs from M={nl.M}")

    name = design_name(nl.N, nl.M)
    M = nl.M
    depth = max(n_stim, 1)
    lines = [
        "`timescale 1ns/1ps",
        f"// Self-checking testbench for {name}",
        f"module tb_{name};",
        f"  localparam M = {M};",
        f"  localparam LATENCY = {nl.latency};",
        f"  localparam N_VEC = {n_stim};",
        f"  localparam LINE_BITS = {8 * (M // 4 + 128)};",
        "",
        "  reg clk = 1'b0;",
        "  reg rst = 1'b1;",
        "  reg in_valid = 1'b0;",
        "  reg [M-1:0] u = {M{1'b0}};",
        "  wire out_valid;",
        "  wire [M-1:0] x;",
        "",
        f"  reg [M-1:0] stim_mem [0:{depth - 1}];",
        f"  reg [M-1:0] exp_mem  [0:{depth - 1}];",
        "  reg [LINE_BITS-1:0] line;",
        "  reg [M-1:0] vec;",
        "  integer fd, rc, n_stim, n_exp, k, cycle, n_out, errors;",
        "",
        f"  {name} dut (",
        "    .clk(clk), .rst(rst), .in_valid(in_valid), .u(u),",
        "    .out_valid(out_valid), .x(x)",
        "  );",
        "",
        "  always #5 clk = ~clk;",
        "",
        "  always @(posedge clk) begin",
        "    if (!rst) begin",
        "      if (out_valid) begin",
        "        if (n_out >= N_VEC) begin",
        "          if (errors == 0)",
        '            $display("first mismatch at cycle %0d: unexpected output %h", cycle, x);',
        "          errors = errors + 1;",
        "        end else if (x !== exp_mem[n_out]) begin",
        "          if (errors == 0)",
        '            $display("first mismatch at cycle %0d, vector %0d: expected %h, got %h",',
        "                     cycle, n_out, exp_mem[n_out], x);",
        "          errors = errors + 1;",
        "        end",
        "        n_out = n_out + 1;",
        "      end",
        "      cycle = cycle + 1;",
        "    end",
        "  end",
        "",
        "  initial begin",
        "    cycle = 0; n_out = 0; errors = 0; n_stim = 0; n_exp = 0;",
        "",
        f'    fd = $fopen("{STIMULUS_FILE}", "r");',
        "    if (fd == 0) begin",
        f'      $display("FAIL: cannot open {STIMULUS_FILE}");',
        "      $finish;",
        "    end",
        "    while (!$feof(fd)) begin",
        "      rc = $fgets(line, fd);",
        "      if (rc > 0 && $sscanf(line, \"%h\", vec) == 1) begin",
        "        if (n_stim < N_VEC) stim_mem[n_stim] = vec;",
        "        n_stim = n_stim + 1;",
        "      end",
        "    end",
        "    $fclose(fd);",
        "",
        f'    fd = $fopen("{EXPECTED_FILE}", "r");',
        "    if (fd == 0) begin",
        f'      $display("FAIL: cannot open {EXPECTED_FILE}");',
        "      $finish;",
        "    end",
        "    while (!$feof(fd)) begin",
        "      rc = $fgets(line, fd);",
        "      if (rc > 0 && $sscanf(line, \"%h\", vec) == 1) begin",
        "        if (n_exp < N_VEC) exp_mem[n_exp] = vec;",
        "        n_exp = n_exp + 1;",
        "      end",
        "    end",
        "    $fclose(fd);",
        "",
        "    if (n_stim != N_VEC || n_exp != N_VEC) begin",
        '      $display("FAIL: read %0d stimulus and %0d expected vectors, built for %0d",',
        "               n_stim, n_exp, N_VEC);",
        "      $finish;",
        "    end",
        "",
        "    repeat (2) @(negedge clk);",
        "    rst = 1'b0;",
        "    for (k = 0; k < N_VEC; k = k + 1) begin",
        "      in_valid = 1'b1;",
        "      u = stim_mem[k];",
        "      @(negedge clk);",
        "    end",
        "    in_valid = 1'b0;",
        "    u = {M{1'b0}};",
        "    repeat (LATENCY + 4) @(negedge clk);",
        "",
        "    if (n_out != N_VEC && errors == 0) begin",
        '      $display("FAIL: %0d output vectors, expected %0d", n_out, N_VEC);',
        "      errors = errors + 1;",
        "    end",
        "    if (errors == 0) begin",
        f'      $display("PASS: {name}, %0d vectors", n_out);',
        "      $finish;",
        "    end else begin",
        f'      $display("FAIL: {name}, %0d errors", errors);',
        "`ifdef TB_NO_FATAL",
        "      $finish;",
        "`else",
        '      $fatal(1, "FAIL");',
        "`endif",
        "    end",
        "  end",
        "endmodule",
    ]
    return "\n".join(lines) + "\n"


def emit_verilog(nl: Netlist, stimulus: Sequence = (), expected: Sequence = ()) -> RtlBundle:
    """Emit top module, leaf cells and testbench; identical inputs give identical text."""
    manifest = {
        "design": design_name(nl.N, nl.M),
        "n": nl.N,
        "m": nl.M,
        "formula": nl.formula,
        "latency": nl.latency,
        "delay_side": nl.delay_side,
        "vectors": _slice_count(stimulus),
        "files": [
            "top.v",
            "cells.v",
            "tb.v",
            "netlist.json",
            "cost.json",
            STIMULUS_FILE,
            EXPECTED_FILE,
            "manifest.json",
        ],
    }
    bundle = RtlBundle(
        N=nl.N,
        M=nl.M,
        top=emit_top(nl),
        cells=emit_cells(nl),
        testbench=emit_testbench(nl, stimulus, expected),
        manifest=manifest,
    )
    logger.debug(f"Emitted {bundle.name}: {len(bundle.top.splitlines())} top-level lines")
    return bundle


class StructuralCounts(NamedTuple):
    xor_count: int
    register_count: int


_COMMENT_RE = re.compile(r"//[^\n]*")
_MODULE_RE = re.compile(r"\bmodule\s+(\w+)(.*?)\bendmodule\b", re.S)
_INSTANCE_RE = re.compile(r"^\s*(\w+)\s*(?:#\(.*?\)\s*)?(c\d+)\s*\(", re.M)
_OUTPUT_REG_RE = re.compile(r"\boutput\s+reg\b(\s*\[(\d+):(\d+)\])?")


def _leaf_census(cells_text: str) -> Dict[str, StructuralCounts]:
    census = {}
    for name, body in _MODULE_RE.findall(_COMMENT_RE.sub("", cells_text)):
        xors = body.count("^")
        regs = 0
        for match in _OUTPUT_REG_RE.finditer(body):
            regs += int(match.group(2)) - int(match.group(3)) + 1 if match.group(1) else 1
        census[name] = StructuralCounts(xors, regs)
    return census


def instance_census(bundle: RtlBundle) -> Dict[str, int]:
    """Number of instances per leaf module in the top module."""
    counts: Dict[str, int] = {}
    for module, _ in _INSTANCE_RE.findall(_COMMENT_RE.sub("", bundle.top)):
        counts[module] = counts.get(module, 0) + 1
    return counts


def structural_counts(bundle: RtlBundle) -> StructuralCounts:
    """
    Count XOR operators and data registers by parsing the emitted text.

    XORs are ``^`` operators inside leaf modules and data registers are
    ``output reg`` bits of leaf modules, each multiplied by the number of
    instances in the top module.
    """
    leaves = _leaf_census(bundle.cells)
    instances = instance_census(bundle)
    if not leaves or not instances:
        raise InvariantViolation(f"Could not parse the emitted Verilog of {bundle.name}")
    xors = regs = 0
    for module, count in instances.items():
        if module not in leaves:
            raise InvariantViolation(f"Top module instantiates unknown cell {module}")
        xors += count * leaves[module].xor_count
        regs += count * leaves[module].register_count
    return StructuralCounts(xors, regs)


def write_output_tree(
    bundle: RtlBundle,
    nl: Netlist,
    report: CostReport,
    stimulus: Sequence,
    expected: Sequence,
    out_dir,
) -> Path:
    """Write the complete per-design output directory and return its path."""
    target = Path(out_dir) / bundle.name
    target.mkdir(parents=True, exist_ok=True)
    for filename, text in bundle.files().items():
        (target / filename).write_text(text)
    (target / "netlist.json").write_text(to_json(nl))
    (target / "cost.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    header: List[str] = [f"{bundle.name} input vectors"]
    (target / STIMULUS_FILE).write_text(vectors_to_text(stimulus, nl.M, header))
    (target / EXPECTED_FILE).write_text(vectors_to_text(expected, nl.M, output_header(bundle.name)))
    (target / "manifest.json").write_text(json.dumps(bundle.manifest, indent=2) + "\n")
    logger.info(f"Wrote {len(bundle.manifest['files'])} files to {target}")
    return target


def output_header(name: str) -> List[str]:
    return [f"{name} output vectors"]

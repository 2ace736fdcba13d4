import json
import random
import re

import pytest

from polar_encoder_autogen.errors import InvariantViolation, SimulationError
from polar_encoder_autogen.formula import hardware_formula
from polar_encoder_autogen.netlist import cost_report, elaborate
from polar_encoder_autogen.polar_core import encode_reference
from polar_encoder_autogen.rtl import (
    RtlBundle,
    design_name,
    emit_testbench,
    emit_verilog,
    instance_census,
    structural_counts,
    write_output_tree,
)
from polar_encoder_autogen.sim import input_schedule, output_schedule, random_frames, read_vectors


def build(N, M, frames=0, seed=1):
    f = hardware_formula(N, M)
    nl = elaborate(f)
    words = random_frames(N, frames, seed)
    stimulus = [input_schedule(u, N, M) for u in words]
    expected = [output_schedule(encode_reference(u, N), N, M) for u in words]
    return f, nl, stimulus, expected


def test_counts_of_worked_example():
    _, nl, stim, exp = build(32, 8, frames=2)
    bundle = emit_verilog(nl, stim, exp)
    assert structural_counts(bundle) == (20, 40)
    assert bundle.name == "polar_enc_N32_M8"
    assert "module polar_enc_N32_M8 (" in bundle.top


def test_counts_of_minimal_design():
    _, nl, _, _ = build(8, 4)
    assert structural_counts(emit_verilog(nl)) == (6, 8)


@pytest.mark.parametrize("N, M, counts", [(1024, 4, (20, 1532)), (1024, 512, (2560, 1024))])
def test_counts_at_extremes(N, M, counts):
    _, nl, _, _ = build(N, M)
    assert structural_counts(emit_verilog(nl)) == counts


def test_counts_match_cost_report_on_random_points():
    rng = random.Random(2024)
    candidates = [(1 << n, 1 << m) for n in range(3, 12) for m in range(2, n)]
    for N, M in rng.sample(candidates, 20):
        f, nl, _, _ = build(N, M)
        bundle = emit_verilog(nl)
        report = cost_report(nl, f)
        assert structural_counts(bundle) == (report.xor_count, report.mem_count)
        census = nl.census()
        instances = instance_census(bundle)
        assert instances.get("pe_xp", 0) == census["xp"]
        assert instances.get("pe_delay", 0) == census["delay"]
        assert instances.get("pe_switch", 0) == census["switch"]
        assert sum(v for k, v in instances.items() if k.startswith("pe_perm")) == census["perm"]


def test_emission_is_deterministic():
    _, nl, stim, exp = build(64, 16, frames=3)
    first = emit_verilog(nl, stim, exp)
    _, nl2, stim2, exp2 = build(64, 16, frames=3)
    second = emit_verilog(nl2, stim2, exp2)
    assert first.files() == second.files()
    assert first.manifest == second.manifest


def test_switch_parameters_and_valid_chain():
    _, nl, _, _ = build(32, 8)
    top = emit_verilog(nl).top
    assert re.search(r"pe_switch #\(\.K\(4\), \.CW\(2\), \.PHASE\(0\)\) c\d+ \(.*\.en\(v\[0\]\)", top)
    assert "reg  [5:1] vpipe;" in top
    assert "assign out_valid = v[5];" in top
    taps = {int(t) for t in re.findall(r"\.en\(v\[(\d+)\]\)", top)}
    assert taps == {0, 2, 3}


def test_permutation_modules():
    _, nl, _, _ = build(32, 8)
    cells = emit_verilog(nl).cells
    assert "module pe_perm4 (" in cells
    assert "module pe_perm8 (" in cells
    assert "assign o[1] = i[4];" in cells


def test_testbench_contents():
    _, nl, stim, exp = build(32, 8, frames=10)
    tb = emit_testbench(nl, stim, exp)
    assert "localparam N_VEC = 40;" in tb
    assert "localparam LATENCY = 5;" in tb
    assert '$fopen("stimulus.txt", "r")' in tb
    assert "first mismatch at cycle" in tb
    assert "$fatal(1" in tb and "`ifdef TB_NO_FATAL" in tb
    assert "PASS" in tb and "FAIL" in tb


def test_empty_testbench_expects_no_output():
    _, nl, _, _ = build(16, 4)
    tb = emit_testbench(nl, [], [])
    assert "localparam N_VEC = 0;" in tb
    assert "unexpected output" in tb


def test_testbench_rejects_length_mismatch():
    _, nl, stim, exp = build(16, 4, frames=2)
    with pytest.raises(SimulationError, match="vectors"):
        emit_testbench(nl, stim, exp[:1])


def test_unparseable_bundle_is_an_internal_error():
    bundle = RtlBundle(N=8, M=4, top="module x; endmodule\n", cells="", testbench="")
    with pytest.raises(InvariantViolation):
        structural_counts(bundle)


def test_output_tree(tmp_path):
    f, nl, stim, exp = build(32, 8, frames=2, seed=3)
    bundle = emit_verilog(nl, stim, exp)
    target = write_output_tree(bundle, nl, cost_report(nl, f), stim, exp, tmp_path)
    assert target == tmp_path / design_name(32, 8)
    names = sorted(p.name for p in target.iterdir())
    assert names == sorted(
        ["top.v", "cells.v", "tb.v", "netlist.json", "cost.json", "stimulus.txt", "expected.txt", "manifest.json"]
    )
    cost = json.loads((target / "cost.json").read_text())
    assert (cost["xor_count"], cost["mem_count"], cost["latency"]) == (20, 40, 5)
    manifest = json.loads((target / "manifest.json").read_text())
    assert manifest["design"] == "polar_enc_N32_M8"
    assert len(read_vectors(target / "expected.txt", 8, rows_per_frame=4)) == 2

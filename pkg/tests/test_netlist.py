import json
from dataclasses import replace

import pytest

from polar_encoder_autogen.errors import FormulaStructureError, InvariantViolation
from polar_encoder_autogen.formula import general_formula, hardware_formula
from polar_encoder_autogen.netlist import (
    DELAY_SIDE,
    CellKind,
    cost_report,
    elaborate,
    from_json,
    lane_bit_trace,
    lane_depths,
    permutation_table,
    to_json,
)


def all_points(max_n=11):
    return [(1 << n, 1 << m) for n in range(3, max_n + 1) for m in range(2, n)]


def test_permutation_tables():
    assert permutation_table(4) == [0, 2, 1, 3]
    assert permutation_table(8) == [0, 4, 2, 6, 1, 5, 3, 7]
    assert permutation_table(16) == [0, 8, 2, 10, 4, 12, 6, 14, 1, 9, 3, 11, 5, 13, 7, 15]
    with pytest.raises(FormulaStructureError):
        permutation_table(2)


@pytest.mark.parametrize("P", [4, 8, 16, 32, 64, 128, 256, 512, 1024])
def test_permutation_is_bit_transposition(P):
    table = permutation_table(P)
    hi = P.bit_length() - 2
    assert [table[t] for t in table] == list(range(P))
    for i, src in enumerate(table):
        b0, bhi = i & 1, (i >> hi) & 1
        swapped = (i & ~1 & ~(1 << hi)) | (bhi << 0) | (b0 << hi)
        assert src == swapped


def test_worked_example_32_8():
    f = hardware_formula(32, 8)
    nl = elaborate(f)
    report = cost_report(nl, f)
    assert (report.xor_count, report.mem_count, report.latency) == (20, 40, 5)
    assert report.bits_per_cycle == 8
    assert nl.census() == {"xp": 20, "delay": 40, "switch": 12, "perm": 5}
    assert len(report.stages) == 11
    assert sum(s.mem_count for s in report.stages) == 40
    assert sum(s.latency for s in report.stages) == 5


def test_minimal_design_8_4():
    report = cost_report(elaborate(hardware_formula(8, 4)))
    assert (report.xor_count, report.mem_count, report.latency) == (6, 8, 2)


def test_large_design_2048_1024():
    report = cost_report(elaborate(hardware_formula(2048, 1024)))
    assert (report.xor_count, report.mem_count, report.latency) == (5632, 2048, 2)


@pytest.mark.parametrize("N, M", all_points())
def test_walked_counts_match_closed_forms(N, M):
    n = N.bit_length() - 1
    nl = elaborate(hardware_formula(N, M))
    report = cost_report(nl)
    assert report.xor_count == (M // 2) * n
    assert report.mem_count == 3 * N // 2 - M
    assert report.latency == 3 * N // (2 * M) - 1 == nl.latency
    assert set(lane_depths(nl)) == {report.latency}


def test_cell_numbering_and_wires():
    nl = elaborate(hardware_formula(16, 4))
    assert [c.id for c in nl.cells] == list(range(len(nl.cells)))
    assert nl.inputs == (0, 1, 2, 3)
    assert [c.stage for c in nl.cells] == sorted(c.stage for c in nl.cells)
    produced = [w for c in nl.cells for w in c.outputs]
    assert len(produced) == len(set(produced))
    assert nl.num_wires == len(produced) + 4
    for switch in (c for c in nl.cells if c.kind == CellKind.SWITCH):
        assert switch.params["phase"] == 0
        assert 0 <= switch.params["valid_tap"] < nl.latency


def test_switch_delays_sit_on_bottom_input_and_top_output():
    nl = elaborate(hardware_formula(8, 4))
    assert nl.delay_side == DELAY_SIDE
    driver = {w: c for c in nl.cells for w in c.outputs}
    readers = {w: c for c in nl.cells for w in c.inputs}
    for switch in (c for c in nl.cells if c.kind == CellKind.SWITCH):
        top, bottom = switch.inputs
        assert driver[bottom].kind == CellKind.DELAY
        assert driver.get(top) is None or driver[top].kind != CellKind.DELAY
        out0, out1 = switch.outputs
        assert readers[out0].kind == CellKind.DELAY
        assert readers.get(out1) is None or readers[out1].kind != CellKind.DELAY


def test_elaborate_refuses_placeholders_and_bad_phases():
    with pytest.raises(FormulaStructureError, match="placeholder"):
        elaborate(general_formula(32, 8))
    with pytest.raises(FormulaStructureError, match="phases"):
        elaborate(hardware_formula(32, 8), phases=[0])


def test_cost_report_detects_missing_delay():
    nl = elaborate(hardware_formula(16, 4))
    index = next(i for i, c in enumerate(nl.cells) if c.kind == CellKind.DELAY)
    victim = nl.cells[index]
    # bypass the delay: its reader now sees a wire one cycle early
    bypass = replace(victim, kind=CellKind.PERM, params={"size": 1, "table": [0]})
    broken = replace(nl, cells=nl.cells[:index] + (bypass,) + nl.cells[index + 1:])
    with pytest.raises(InvariantViolation):
        cost_report(broken)


@pytest.mark.parametrize("N, M", all_points(10))
def test_lane_bit_trace_ends_in_natural_order(N, M):
    n, m = N.bit_length() - 1, M.bit_length() - 1
    trace = lane_bit_trace(hardware_formula(N, M))
    folded = [bit for _, _, bit in trace if bit is not None]
    assert sorted(folded) == list(range(n))
    final = trace[-1][1]
    assert final.lane_bits == tuple(range(m))
    assert final.time_bits == tuple(range(m, n))


def test_json_is_stable_and_round_trips():
    nl = elaborate(hardware_formula(32, 8))
    text = to_json(nl)
    assert text == to_json(elaborate(hardware_formula(32, 8)))
    again = from_json(text)
    assert to_json(again) == text
    assert again.census() == nl.census()
    assert list(json.loads(text))[:2] == ["n", "m"]


def test_cost_report_reads_stages_from_the_netlist():
    f = hardware_formula(32, 8)
    nl = elaborate(f)
    report = cost_report(nl)
    assert report.stages == cost_report(nl, f).stages
    assert len(report.stages) == 11
    assert report.stages[2].action == "lane bit 0 <-> time bit 1"
    assert cost_report(from_json(to_json(nl))).stages == report.stages

import pytest

from polar_encoder_autogen.errors import ParameterError
from polar_encoder_autogen.explore import (
    SweepRunner,
    design_points,
    explore,
    reports_to_frame,
    rows_to_frame,
    verify_sweep,
)

TABLE_MHZ = {4: 519.535, 32: 407.05, 128: 340.518, 256: 348.712, 512: 356.223}


def test_explore_1024_has_eight_designs():
    rows = explore(1024)
    assert [r.M for r in rows] == [4, 8, 16, 32, 64, 128, 256, 512]
    for r in rows:
        assert r.xor_count == (r.M // 2) * 10
        assert r.mem_count == 1536 - r.M
        assert r.latency_cycles == 1536 // r.M - 1
        assert r.bits_per_cycle == r.M
        assert r.est_throughput is None


@pytest.mark.parametrize("N", [8, 16, 64, 4096])
def test_row_count(N):
    expected = max(1, N.bit_length() - 1 - 2)
    assert len(explore(N)) == expected


def test_throughput_matches_measured_clock_rates():
    df = rows_to_frame(explore(1024, freq=TABLE_MHZ)).set_index("M")
    assert df.loc[4, "throughput_gbps"] == pytest.approx(2.07814, rel=1e-4)
    assert df.loc[512, "throughput_gbps"] == pytest.approx(182.386, rel=1e-4)
    # reference throughputs of the FPGA builds: 2.07 and 182.38 Gbps
    assert abs(df.loc[4, "throughput_gbps"] / 2.07 - 1) < 0.01
    assert abs(df.loc[512, "throughput_gbps"] / 182.38 - 1) < 0.01
    assert df.loc[4, "throughput_gain_pct"] == pytest.approx(0.0)
    assert df.loc[512, "throughput_gain_pct"] > 8000
    assert df["fmax_mhz"].isna().sum() == 3


def test_single_frequency_applies_to_every_row():
    for r in explore(64, freq=100.0):
        assert r.est_throughput == pytest.approx(r.M * 100e6)


def test_bad_inputs():
    with pytest.raises(ParameterError):
        explore(100)
    with pytest.raises(ParameterError, match="positive"):
        explore(64, freq=-5)


def test_design_points():
    assert design_points([8, 16]) == [(8, 4), (16, 4), (16, 8)]
    assert design_points([16, 32], [4, 16]) == [(16, 4), (32, 4), (32, 16)]
    with pytest.raises(ParameterError):
        design_points([8], [64])


def test_verify_sweep_in_process():
    points = design_points([8, 16, 32])
    reports = verify_sweep(points, frames=3, seed=5)
    assert [(r.N, r.M) for r in reports] == points
    assert all(r.passed for r in reports)
    df = reports_to_frame(reports)
    assert list(df["status"]) == ["PASS"] * len(points)
    assert df.loc[0, "frames"] == "3/3"


def test_exhaustive_sweep_counts_frames():
    (report,) = verify_sweep([(8, 4)], exhaustive=True)
    assert report.passed
    assert reports_to_frame([report]).loc[0, "frames"] == "256/256"


def test_single_worker_runner_stays_in_process():
    with SweepRunner(1) as runner:
        assert runner.client is None
        assert runner.map(lambda p: p[0] * p[1], [(8, 4), (16, 8)]) == [32, 128]


@pytest.mark.slow
def test_dask_sweep_keeps_point_order():
    points = design_points([16, 32, 64])
    reports = verify_sweep(points, frames=2, seed=1, workers=2)
    assert [(r.N, r.M) for r in reports] == points
    assert all(r.passed for r in reports)

"""
Design-space exploration and multi-point verification sweeps.

For a code length N every power-of-two parallelism 4 <= M <= N/2 gives a
distinct design; explore() lists their cost, latency and throughput.
SweepRunner fans verification of many (N, M) points out over a dask
cluster, or runs them in process with a tqdm progress bar.
"""

from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import dask
from dask.distributed import Client
from loguru import logger
import pandas as pd
from tqdm import tqdm

from polar_encoder_autogen.errors import ParameterError
from polar_encoder_autogen.formula import check_parameters, hardware_formula, valid_parallelisms
from polar_encoder_autogen.netlist import cost_report, elaborate
from polar_encoder_autogen.sim import EquivalenceReport, verify_equivalence, verify_exhaustive

Frequency = Union[None, float, Mapping[int, float]]


@dataclass(frozen=True)
class ExploreRow:
    M: int
    xor_count: int
    mem_count: int
    latency_cycles: int
    bits_per_cycle: int
    fmax_mhz: Optional[float] = None
    est_throughput: Optional[float] = None  # bits per second


def _frequency_for(freq: Frequency, M: int) -> Optional[float]:
    if freq is None:
        return None
    if isinstance(freq, Mapping):
        value = freq.get(M)
        return float(value) if value is not None else None
    return float(freq)


def explore(N: int, freq: Frequency = None) -> List[ExploreRow]:
    """
    One row per legal M for code length N, ascending in M.

    Args:
        N: Code length
        freq: Clock frequency in MHz, a single value for every row or a
            mapping from M to MHz; rows without a frequency get no
            throughput estimate

    Returns:
        List of ExploreRow
    """
    rows = []
    for M in valid_parallelisms(N):
        f = hardware_formula(N, M)
        report = cost_report(elaborate(f))
        mhz = _frequency_for(freq, M)
        if mhz is not None and mhz <= 0:
            raise ParameterError(f"Frequency for M={M} must be positive (got {mhz})")
        rows.append(
            ExploreRow(
                M=M,
                xor_count=report.xor_count,
                mem_count=report.mem_count,
                latency_cycles=report.latency,
                bits_per_cycle=report.bits_per_cycle,
                fmax_mhz=mhz,
                est_throughput=report.bits_per_cycle * mhz * 1e6 if mhz is not None else None,
            )
        )
    logger.debug(f"Explored N={N}: {len(rows)} designs")
    return rows


def rows_to_frame(rows: Sequence[ExploreRow]) -> pd.DataFrame:
    """
    Tabulate explore rows.

    Adds throughput in Gbps and the throughput gain over the smallest-M
    row that has a frequency, in percent.
    """
    df = pd.DataFrame([asdict(r) for r in rows])
    if df.empty:
        return df
    df["throughput_gbps"] = df["est_throughput"] / 1e9
    known = df["throughput_gbps"].dropna()
    if not known.empty:
        base = known.iloc[0]
        df["throughput_gain_pct"] = (df["throughput_gbps"] / base - 1.0) * 100.0
    else:
        df["throughput_gain_pct"] = None
    return df.drop(columns=["est_throughput"])


def _verify_point(point: Tuple[int, int], frames: int, seed: int, gap: int, exhaustive: bool) -> EquivalenceReport:
    N, M = point
    if exhaustive:
        return verify_exhaustive(N, M)
    return verify_equivalence(N, M, num_frames=frames, seed=seed, gap=gap)


class SweepRunner:
    """
    Run a function over independent (N, M) points.

    With more than one worker a dask.distributed cluster is started; if
    that fails, or with a single worker, points run in process. Results
    always come back in the order of the input points.
    """

    def __init__(self, n_workers: int = 1):
        self.n_workers = n_workers
        self.client = None
        if n_workers > 1:
            self.setup_dask_client(n_workers)

    def setup_dask_client(self, n_workers=None):
        """Setup Dask client for parallel sweeps."""
        try:
            self.client = Client(n_workers=n_workers, threads_per_worker=1, silence_logs=False)
            workers = self.client.scheduler_info()["workers"]
            logger.info(f"Dask client initialized with {len(workers)} workers")
            logger.info(f"Dashboard: {self.client.dashboard_link}")
        except Exception as e:
            logger.warning(f"Could not setup Dask client: {e}")
            logger.warning("Falling back to in-process sweep")
            self.client = None

    def map(self, fn: Callable, points: Sequence, desc: str = "points", **kwargs) -> List:
        if self.client is not None:
            tasks = [dask.delayed(fn)(point, **kwargs) for point in points]
            return list(dask.compute(*tasks))
        return [fn(point, **kwargs) for point in tqdm(points, desc=desc, disable=len(points) < 2)]

    def close(self):
        """Clean up Dask client."""
        if self.client:
            self.client.close()
            self.client = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def design_points(code_lengths: Sequence[int], parallelisms: Optional[Sequence[int]] = None) -> List[Tuple[int, int]]:
    """
    Every (N, M) pair to sweep.

    With ``parallelisms`` None all legal M are used for each N; otherwise
    only the listed M that are legal for that N.
    """
    points = []
    for N in code_lengths:
        legal = valid_parallelisms(N)
        chosen = legal if parallelisms is None else [M for M in parallelisms if M in legal]
        if parallelisms is not None:
            for M in parallelisms:
                if M not in legal:
                    logger.warning(f"Skipping M={M} for N={N}: M must satisfy 4 <= M <= N/2")
        points.extend((N, M) for M in chosen)
    if not points:
        raise ParameterError("No valid (N, M) design points selected")
    return points


def verify_sweep(
    points: Sequence[Tuple[int, int]],
    frames: int = 10,
    seed: int = 1,
    gap: int = 0,
    exhaustive: bool = False,
    workers: int = 1,
) -> List[EquivalenceReport]:
    if frames < 0:
        raise ParameterError(f"Frame count must be non-negative (got {frames})")
    for N, M in points:
        check_parameters(N, M)
    with SweepRunner(workers) as runner:
        return runner.map(
            _verify_point, points, desc="verify", frames=frames, seed=seed, gap=gap, exhaustive=exhaustive
        )


def reports_to_frame(reports: Sequence[EquivalenceReport]) -> pd.DataFrame:
    records: List[Dict] = []
    for r in reports:
        records.append(
            {
                "N": r.N,
                "M": r.M,
                "frames": f"{r.frames_passed}/{r.frames_checked}",
                "latency": r.latency,
                "expected_latency": r.expected_latency,
                "bits_per_cycle": r.bits_per_cycle,
                "status": "PASS" if r.passed else "FAIL",
            }
        )
    return pd.DataFrame.from_records(records)

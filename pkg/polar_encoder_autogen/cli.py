#!/usr/bin/env python3
"""
Command-line front end of the polar encoder generator.

WORKFLOW:
1. formula  - print the stage formula of a design (--general keeps W placeholders)
2. report   - per-stage cost table of a design
3. gen      - write Verilog, testbench, netlist, cost and vector files
4. sim      - simulate a design on random frames or a stimulus file
5. verify   - check designs against the golden encoder over a sweep of (N, M)
6. explore  - list every design of a code length with cost and throughput

Defaults for every command come from the lower-case sections of
config.yaml (or the file given by --config / $POLAR_AUTOGEN_CONFIG);
flags on the command line win.

Exit codes: 0 success, 1 verification or self-check failure, 2 usage error.

Examples:
  polar-autogen formula -N 32 -M 8
  polar-autogen gen -N 32 -M 8 -o out/
  polar-autogen verify -N 8..1024 -M all --frames 10 --seed 1
  polar-autogen explore -N 1024 --freq table
"""

from pathlib import Path
from typing import List, NoReturn, Optional

from loguru import logger
import pandas as pd
import typer

from polar_encoder_autogen.config import command_defaults, get_yaml_value, set_log_level
from polar_encoder_autogen.errors import InvariantViolation, PolarAutogenError, ParameterError
from polar_encoder_autogen.explore import (
    design_points,
    explore as explore_designs,
    reports_to_frame,
    rows_to_frame,
    verify_sweep,
)
from polar_encoder_autogen.formula import format_formula, general_formula, hardware_formula, specialize
from polar_encoder_autogen.netlist import DELAY_SIDE, SWITCH_PHASE, cost_report, elaborate
from polar_encoder_autogen.polar_core import MIN_CODE_LENGTH, encode_reference, is_power_of_two
from polar_encoder_autogen.rtl import (
    design_name,
    emit_verilog,
    output_header,
    structural_counts,
    write_output_tree,
)
from polar_encoder_autogen.sim import (
    input_schedule,
    output_schedule,
    random_frames,
    read_vectors,
    run_stream,
    write_vectors,
)

app = typer.Typer(
    help="Generate, simulate and verify pipelined polar encoder hardware.",
    add_completion=False,
    no_args_is_help=True,
)

CODE_LENGTH_HELP = "Code length N (power of two, N >= 8)"
PARALLELISM_HELP = "Parallelism M, bits per cycle (power of two, 4 <= M <= N/2)"


def _fail(error, code: int = 2) -> NoReturn:
    # failed self-checks are not usage errors
    if isinstance(error, InvariantViolation):
        code = 1
    typer.echo(f"Error: {error}", err=True)
    raise typer.Exit(code=code)


def parse_code_lengths(text) -> List[int]:
    """
    Expand ``8..1024`` over powers of two, or read a comma list.

    Every value must be a power of two of at least 8.
    """
    text = str(text).strip()
    if ".." in text:
        lo_text, hi_text = text.split("..", 1)
        try:
            lo, hi = int(lo_text), int(hi_text)
        except ValueError:
            raise ParameterError(f"Bad code length range {text!r}") from None
        values = [1 << k for k in range(hi.bit_length() + 1) if lo <= (1 << k) <= hi]
    else:
        try:
            values = [int(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise ParameterError(f"Bad code length list {text!r}") from None
    if not values:
        raise ParameterError(f"No power-of-two code length in {text!r}")
    for N in values:
        if not is_power_of_two(N):
            raise ParameterError(f"N must be a power of two (got {N})")
        if N < MIN_CODE_LENGTH:
            raise ParameterError(f"N must be at least {MIN_CODE_LENGTH} (got {N})")
    return values


def parse_parallelisms(text) -> Optional[List[int]]:
    """``all`` selects every legal M; otherwise a comma list."""
    text = str(text).strip()
    if text.lower() == "all":
        return None
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ParameterError(f"Bad parallelism list {text!r}") from None


def parse_freq(text, config_path=None):
    """
    Frequency option: a single MHz value, ``M=MHz,...`` pairs, or
    ``table`` for EXPLORE.fmax_mhz from the config file.
    """
    if text is None:
        return None
    text = str(text).strip()
    if text.lower() == "table":
        table = get_yaml_value(["EXPLORE", "fmax_mhz"], yaml_path=config_path)
        if not isinstance(table, dict) or not table:
            raise ParameterError("No EXPLORE.fmax_mhz table in the config file")
        try:
            return {int(M): float(mhz) for M, mhz in table.items()}
        except (TypeError, ValueError):
            raise ParameterError(f"Bad EXPLORE.fmax_mhz table {table!r}") from None
    try:
        if "=" in text:
            pairs = [item.split("=", 1) for item in text.split(",") if item.strip()]
            return {int(M): float(mhz) for M, mhz in pairs}
        return float(text)
    except ValueError:
        raise ParameterError(f"Bad frequency {text!r}") from None


@app.callback()
def main(
    ctx: typer.Context,
    config: Optional[Path] = typer.Option(
        None, "--config", "-c", help="Configuration file (default: config.yaml or $POLAR_AUTOGEN_CONFIG)"
    ),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging"),
):
    """Generate, simulate and verify pipelined polar encoder hardware."""
    set_log_level("DEBUG" if verbose else "INFO")
    ctx.obj = {"config": config}
    ctx.default_map = command_defaults(config)

    delay_side = get_yaml_value(["NETLIST", "delay_side"], yaml_path=config, fallback=DELAY_SIDE)
    phase = get_yaml_value(["NETLIST", "switch_phase"], yaml_path=config, fallback=SWITCH_PHASE)
    if delay_side != DELAY_SIDE or phase != SWITCH_PHASE:
        logger.warning(
            f"Config NETLIST settings ({delay_side}, phase {phase}) differ from the calibrated "
            f"construction ({DELAY_SIDE}, phase {SWITCH_PHASE}); using the calibrated one"
        )


@app.command()
def formula(
    code_length: int = typer.Option(..., "-N", "--code-length", help=CODE_LENGTH_HELP),
    parallelism: int = typer.Option(..., "-M", "--parallelism", help=PARALLELISM_HELP),
    general: bool = typer.Option(False, "--general", help="Keep the W placeholders"),
):
    """Print the stage formula of a design."""
    try:
        f = general_formula(code_length, parallelism)
        if not general:
            f = specialize(f)
    except PolarAutogenError as e:
        _fail(e)
    typer.echo(format_formula(f))


@app.command()
def report(
    code_length: int = typer.Option(..., "-N", "--code-length", help=CODE_LENGTH_HELP),
    parallelism: int = typer.Option(..., "-M", "--parallelism", help=PARALLELISM_HELP),
):
    """Per-stage XOR, delay and latency table of a design."""
    try:
        f = hardware_formula(code_length, parallelism)
        rep = cost_report(elaborate(f), f)
    except PolarAutogenError as e:
        _fail(e)
    typer.echo(format_formula(f))
    typer.echo(pd.DataFrame(rep.to_dict()["stages"]).to_string(index=False))
    typer.echo(
        f"total: {rep.xor_count} XOR, {rep.mem_count} delay elements, "
        f"latency {rep.latency} cycles, {rep.bits_per_cycle} bits/cycle"
    )


@app.command()
def gen(
    code_length: int = typer.Option(..., "-N", "--code-length", help=CODE_LENGTH_HELP),
    parallelism: int = typer.Option(..., "-M", "--parallelism", help=PARALLELISM_HELP),
    out_dir: Path = typer.Option(Path("out"), "--out-dir", "-o", help="Output directory"),
    frames: int = typer.Option(10, "--frames", help="Random frames in the test vectors"),
    seed: int = typer.Option(1, "--seed", help="Seed of the random frames"),
):
    """Write Verilog, testbench, netlist, cost report and test vectors."""
    try:
        f = hardware_formula(code_length, parallelism)
        nl = elaborate(f)
        rep = cost_report(nl, f)
        words = random_frames(code_length, frames, seed)
        stimulus = [input_schedule(u, code_length, parallelism) for u in words]
        expected = [output_schedule(encode_reference(u, code_length), code_length, parallelism) for u in words]
        bundle = emit_verilog(nl, stimulus, expected)
        counts = structural_counts(bundle)
        if counts != (rep.xor_count, rep.mem_count):
            raise InvariantViolation(f"Emitted Verilog counts {counts} differ from the cost report")
        target = write_output_tree(bundle, nl, rep, stimulus, expected, out_dir)
    except OSError as e:
        _fail(f"cannot write output: {e}")
    except PolarAutogenError as e:
        _fail(e)

    typer.echo(f"✓ Wrote {target}")
    typer.echo(f"  formula: {nl.formula}")
    typer.echo(f"  xor={rep.xor_count} mem={rep.mem_count} latency={rep.latency}")


@app.command()
def sim(
    code_length: int = typer.Option(..., "-N", "--code-length", help=CODE_LENGTH_HELP),
    parallelism: int = typer.Option(..., "-M", "--parallelism", help=PARALLELISM_HELP),
    stimulus: Optional[Path] = typer.Option(None, "--stimulus", "-s", help="Stimulus vector file"),
    frames: int = typer.Option(1, "--frames", help="Random frames when no stimulus is given"),
    seed: int = typer.Option(1, "--seed", help="Seed of the random frames"),
    gap: int = typer.Option(0, "--gap", help="Idle cycles between frames"),
    output: Optional[Path] = typer.Option(
        None, "--output", "-o", help="Response file (default: out/<design>/response.txt)"
    ),
):
    """Simulate a design and write its response vectors."""
    name = design_name(code_length, parallelism)
    try:
        nl = elaborate(hardware_formula(code_length, parallelism))
        if stimulus is not None:
            slice_frames = read_vectors(stimulus, parallelism, rows_per_frame=code_length // parallelism)
        else:
            slice_frames = [input_schedule(u, code_length, parallelism) for u in random_frames(code_length, frames, seed)]
        run = run_stream(nl, slice_frames, gap=gap)
        output = output or Path("out") / name / "response.txt"
        output.parent.mkdir(parents=True, exist_ok=True)
        write_vectors(output, run.outputs, parallelism, output_header(name))
    except OSError as e:
        _fail(f"cannot write response: {e}")
    except PolarAutogenError as e:
        _fail(e)

    typer.echo(f"latency: {run.latency} cycles" if run.latency is not None else "latency: n/a (no input)")
    typer.echo(f"bits/cycle: {run.bits_per_cycle:g}")
    typer.echo(f"✓ {len(run.outputs)} frames written to {output}")


@app.command()
def verify(
    code_length: str = typer.Option("8..1024", "-N", "--code-length", help="N, a comma list, or a range such as 8..1024"),
    parallelism: str = typer.Option("all", "-M", "--parallelism", help="M, a comma list, or 'all'"),
    frames: int = typer.Option(10, "--frames", help="Random frames per design"),
    seed: int = typer.Option(1, "--seed", help="Seed of the random frames"),
    gap: int = typer.Option(0, "--gap", help="Idle cycles between frames"),
    exhaustive: bool = typer.Option(False, "--exhaustive", help="Every input word (N <= 8) or the unit-vector basis"),
    workers: int = typer.Option(1, "--workers", help="Dask workers; 1 runs in process"),
    tsv: Optional[Path] = typer.Option(None, "--tsv", help="Also write the summary as TSV"),
):
    """Check designs against the golden encoder."""
    try:
        points = design_points(parse_code_lengths(code_length), parse_parallelisms(parallelism))
        reports = verify_sweep(points, frames=frames, seed=seed, gap=gap, exhaustive=exhaustive, workers=workers)
    except PolarAutogenError as e:
        _fail(e)

    df = reports_to_frame(reports)
    typer.echo(df.to_string(index=False))
    if tsv is not None:
        df.to_csv(tsv, sep="\t", index=False)
        typer.echo(f"✓ Summary written to {tsv}")

    failures = [r for r in reports if not r.passed]
    for r in failures:
        typer.echo(r.describe(), err=True)
    if failures:
        typer.echo(f"✗ {len(failures)} of {len(reports)} designs failed", err=True)
        raise typer.Exit(code=1)
    typer.echo(f"✓ All {len(reports)} designs match the golden encoder")


@app.command()
def explore(
    ctx: typer.Context,
    code_length: int = typer.Option(..., "-N", "--code-length", help=CODE_LENGTH_HELP),
    freq: Optional[str] = typer.Option(
        None, "--freq", "-f", help="Clock in MHz: one value, M=MHz pairs, or 'table'"
    ),
    tsv: Optional[Path] = typer.Option(None, "--tsv", help="Also write the table as TSV"),
):
    """List every design of a code length with cost and throughput."""
    config = (ctx.obj or {}).get("config")
    try:
        rows = explore_designs(code_length, freq=parse_freq(freq, config))
    except PolarAutogenError as e:
        _fail(e)

    df = rows_to_frame(rows)
    typer.echo(df.to_string(index=False, float_format=lambda v: f"{v:.3f}"))
    if tsv is not None:
        df.to_csv(tsv, sep="\t", index=False)
        typer.echo(f"✓ Table written to {tsv}")


if __name__ == "__main__":
    app()

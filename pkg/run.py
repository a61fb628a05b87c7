#!/usr/bin/env python3
"""
Startup script for the coordinate THP sweeps

Runs BER / sum-rate sweeps for cTHP, dTHP and the ZF-CBF baseline and
writes the rows as CSV or JSON.

Usage:
    python run.py --scenario 3,3,3,3x8 --streams 2,2,2,2 --algo all \
        --ebn0 0:4:28 --trials 500 --seed 7 --out results.csv

Defaults (trials, frames, seed, epsilon, ...) come from config.py and can
be set through THP_* environment variables or a .env file.
"""

import logging
import sys

import click

from config import get_config
from coordinate import ALL_INIT_MODES
from experiments import ALL_ALGORITHMS, format_results, run_sweeps, write_results
from models import (SCENARIO_PRESETS, Algorithm, ConfigError, CoordinateConfig, parse_ebn0_grid,
                    parse_scenario, preset_scenario)
from sigproc import RNG_ALGORITHM

log = logging.getLogger("coordinate-thp.run")

LOG_FORMAT = "%(asctime)s %(levelname)s %(message)s"


def _algorithms(name):
    if name == "all":
        return list(ALL_ALGORITHMS)
    return [Algorithm(name)]


@click.command(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--scenario", default=None, help='Receive antennas per user and N_t, e.g. "3,3,3,3x8".')
@click.option("--preset", type=click.Choice(list(SCENARIO_PRESETS)), default=None,
              help="Named scenario instead of --scenario/--streams.")
@click.option("--streams", default=None, help='Streams per user, e.g. "2,2,2,2" (default: N_k).')
@click.option("--mod", "modulation", type=click.Choice(["qpsk", "16qam"], case_sensitive=False),
              default="qpsk", show_default=True)
@click.option("--algo", type=click.Choice(["dthp", "cthp", "zf", "all"], case_sensitive=False),
              default="all", show_default=True)
@click.option("--ebn0", default="0:4:28", show_default=True, help="Eb/N0 grid start:step:stop in dB.")
@click.option("--trials", type=click.IntRange(min=1), default=None, help="Channel draws per point.")
@click.option("--frames", type=click.IntRange(min=0), default=None,
              help="Frames per draw and point (0 = sum-rate only).")
@click.option("--seed", type=click.IntRange(min=0), default=None)
@click.option("--epsilon", type=click.FloatRange(min=0, min_open=True), default=None,
              help="Residual MUI threshold.")
@click.option("--max-iters", type=click.IntRange(min=1), default=None)
@click.option("--tau-override", type=click.FloatRange(min=0, min_open=True), default=None,
              help="Modulo period instead of the constellation default.")
@click.option("--init", "init_mode", type=click.Choice(list(ALL_INIT_MODES)), default="gaussian",
              show_default=True, help="Receive filter initialization.")
@click.option("--out", default="-", show_default=True, help="Output file, - for stdout.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.option("--jobs", type=int, default=None, help="Parallel draws (joblib n_jobs).")
@click.option("--with-bound", is_flag=True, help="Append cooperative upper bound rows.")
@click.option("--profile", default=None, help="Config profile: quick, desk or default.")
@click.option("--log-level", default=None,
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
@click.option("--progress/--no-progress", default=None, help="Show a progress bar on stderr.")
def main(scenario, preset, streams, modulation, algo, ebn0, trials, frames, seed, epsilon,
         max_iters, tau_override, init_mode, out, fmt, jobs, with_bound, profile, log_level, progress):
    """Coordinate THP for overloaded MU-MIMO: BER and sum-rate sweeps."""
    try:
        cfg = get_config(profile)
    except ConfigError as e:
        raise click.BadParameter(str(e), param_hint="--profile")

    logging.basicConfig(level=(log_level or cfg.LOG_LEVEL).upper(), format=LOG_FORMAT)

    if (scenario is None) == (preset is None):
        raise click.UsageError("Give exactly one of --scenario or --preset")
    if preset is not None and streams is not None:
        raise click.UsageError("--streams cannot be combined with --preset")
    try:
        if preset is not None:
            sc = preset_scenario(preset, modulation, tau_override=tau_override)
        else:
            sc = parse_scenario(scenario, streams, modulation, tau_override=tau_override)
    except ConfigError as e:
        raise click.BadParameter(str(e), param_hint="--scenario/--streams")
    try:
        grid = parse_ebn0_grid(ebn0)
    except ConfigError as e:
        raise click.BadParameter(str(e), param_hint="--ebn0")

    coord = CoordinateConfig(
        epsilon=epsilon if epsilon is not None else cfg.EPSILON,
        max_iters=max_iters if max_iters is not None else cfg.MAX_ITERS,
        init_mode=ALL_INIT_MODES[init_mode],
    )
    trials = trials if trials is not None else cfg.TRIALS
    frames = frames if frames is not None else cfg.FRAMES
    seed = seed if seed is not None else cfg.SEED

    log.info("Scenario %s streams %s, %s, %d Eb/N0 points, seed %d (%s)",
             sc.label, ",".join(map(str, sc.r_k)), modulation, len(grid), seed, RNG_ALGORITHM)

    try:
        rows = run_sweeps(
            sc, _algorithms(algo.lower()), grid, trials, coord, seed, frames=frames,
            n_jobs=jobs if jobs is not None else cfg.N_JOBS, with_bound=with_bound,
            progress=progress if progress is not None else cfg.PROGRESS,
        )
    except ConfigError as e:
        raise click.UsageError(str(e))

    if out == "-":
        click.echo(format_results(rows, fmt), nl=False)
        return
    write_results(rows, out, fmt)


def run_cli(argv=None):
    """Run the command and return its exit code (0 ok, 2 configuration error)."""
    try:
        main.main(args=argv, prog_name="run.py", standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.Abort:
        click.echo("Aborted!", err=True)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(run_cli())

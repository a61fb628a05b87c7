# experiments.py
"""Monte Carlo BER and sum-rate sweeps over Eb/N0, reference bound, persistence."""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from functools import partial
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from coordinate import CoordinateState, coordinate, draw_user_channels, end_to_end_transmit
from models import Algorithm, ConfigError, CoordinateConfig, ScenarioConfig, SweepResult
from numerics import RankDeficient
from sigproc import (Constellation, NoiseModel, RngStream, StreamPurpose, map_bits,
                     random_bits)
from thp import ThpFilters, ThpVariant

log = logging.getLogger("coordinate-thp.experiments")

ALL_ALGORITHMS = (Algorithm.DTHP, Algorithm.CTHP, Algorithm.ZF)
BOUND_LABEL = "Coop-Bound"
RESULT_COLUMNS = ["algo", "ebn0_db", "ber", "sum_rate_bits", "avg_iterations",
                  "convergence_rate", "trials", "seed"]
CHANNEL_ATTEMPTS = 3


def ebn0_to_noise_var(ebn0_db: float, sc: ScenarioConfig,
                      c: Optional[Constellation] = None) -> NoiseModel:
    """sigma_n^2 = N_r E_s / (N_t N 10^(Eb/N0 / 10))."""
    c = c or sc.constellation
    snr = 10.0 ** (ebn0_db / 10.0)
    return NoiseModel(sc.n_r * c.energy / (sc.n_t * c.bits_per_symbol * snr))


def sweep_stream(seed: int, purpose: StreamPurpose, draw: int, index: int = 0) -> RngStream:
    """Stream for one purpose of one draw (index = attempt or grid point)."""
    return RngStream(seed, index, path=(int(purpose), draw))


def thp_sum_rate(filters: ThpFilters, sigma_n_sq: float, sigma_s_sq: float = 1.0,
                 noise_gain=1.0) -> float:
    """Gaussian-input rate of the parallel channels v + G n (dTHP) or v + beta n (cTHP)."""
    if filters.variant is ThpVariant.DTHP:
        scale_sq = filters.g ** 2
    else:
        scale_sq = np.full(filters.r, filters.beta ** 2)
    snr = sigma_s_sq / (scale_sq * sigma_n_sq * np.asarray(noise_gain))
    return float(np.sum(np.log2(1.0 + snr)))


def linear_sum_rate(effective: np.ndarray, sigma_n_sq: float, sigma_s_sq: float = 1.0,
                    noise_gain=1.0) -> float:
    """Per-stream SINR from the diagonal of H_e P_e, off-diagonals as interference."""
    power = np.abs(effective) ** 2 * sigma_s_sq
    signal = np.diag(power)
    interference = power.sum(axis=1) - signal
    sinr = signal / (interference + sigma_n_sq * np.asarray(noise_gain))
    return float(np.sum(np.log2(1.0 + sinr)))


def stream_sum_rate(state: CoordinateState, noise: NoiseModel) -> float:
    sigma_s_sq = state.scenario.constellation.energy
    # W_k shapes the noise of user k
    noise_gain = np.concatenate([np.sum(np.abs(W_k) ** 2, axis=1) for W_k in state.W])
    if state.tx_filters is not None:
        return thp_sum_rate(state.tx_filters, noise.sigma_n_sq, sigma_s_sq, noise_gain)
    return linear_sum_rate(state.effective_channel, noise.sigma_n_sq, sigma_s_sq, noise_gain)


def cooperative_bound(H, xi: float, sigma_n_sq: float) -> float:
    """
    log2 det(I + xi / (N_t sigma_n^2) H H^H): full-cooperation capacity with
    uniform transmit power. An upper reference curve, not the DPC region.
    """
    H = np.vstack(H) if isinstance(H, (list, tuple)) else np.atleast_2d(np.asarray(H))
    H = H.astype(np.complex128)
    n_r, n_t = H.shape
    gram = np.eye(n_r) + (xi / (n_t * sigma_n_sq)) * (H @ H.conj().T)
    _, logdet = np.linalg.slogdet(gram)
    return float(logdet / np.log(2.0))


@dataclass
class DrawOutcome:
    errors: np.ndarray
    rates: np.ndarray
    iterations: int
    converged: bool


def channel_attempts(sc: ScenarioConfig, seed: int, draw: int) -> Iterator[Tuple[int, List[np.ndarray]]]:
    """Full-rank channel candidates of realization `draw`, in attempt order."""
    for attempt in range(CHANNEL_ATTEMPTS):
        H = draw_user_channels(sc, sweep_stream(seed, StreamPurpose.CHANNEL, draw, attempt))
        if np.linalg.matrix_rank(np.vstack(H)) < min(sc.n_r, sc.n_t):
            log.warning("Draw %d attempt %d: rank-deficient channel; redrawing", draw, attempt)
            continue
        yield attempt, H


def coordinated_draw(sc: ScenarioConfig, algorithm: Algorithm, cfg: CoordinateConfig,
                     seed: int, draw: int) -> CoordinateState:
    """Channel realization `draw` and its coordination; redraws rank-deficient channels."""
    for attempt, H in channel_attempts(sc, seed, draw):
        try:
            return coordinate(H, cfg, algorithm, sc, sweep_stream(seed, StreamPurpose.W_INIT, draw, attempt))
        except RankDeficient as e:
            log.warning("Draw %d attempt %d rank deficient (%s); redrawing channel", draw, attempt, e)
    raise RankDeficient(f"Draw {draw}: no full-rank channel in {CHANNEL_ATTEMPTS} attempts")


def simulate_draw(sc: ScenarioConfig, algorithm: Algorithm, noises: Sequence[NoiseModel],
                  cfg: CoordinateConfig, seed: int, draw: int, frames: int) -> DrawOutcome:
    """Coordinate once, then transmit `frames` frames at every grid point."""
    state = coordinated_draw(sc, algorithm, cfg, seed, draw)
    c = sc.constellation
    errors = np.zeros(len(noises), dtype=np.int64)
    rates = np.zeros(len(noises))
    for j, noise in enumerate(noises):
        rates[j] = stream_sum_rate(state, noise)
        if frames:
            bits = random_bits(frames * sc.r * c.bits_per_symbol,
                               sweep_stream(seed, StreamPurpose.BITS, draw, j))
            detected = end_to_end_transmit(state, map_bits(bits, c), noise,
                                           sweep_stream(seed, StreamPurpose.NOISE, draw, j))
            errors[j] = np.count_nonzero(detected != bits)
    return DrawOutcome(errors=errors, rates=rates, iterations=state.iterations_used,
                       converged=state.converged)


def _run_draws(func, trials: int, n_jobs: int, progress: bool, desc: str) -> list:
    """Call func(draw=i) for i < trials; results come back in draw order."""
    tasks = (delayed(func)(draw=draw) for draw in range(trials))
    results = Parallel(n_jobs=n_jobs, return_as="generator")(tasks)
    return list(tqdm(results, total=trials, desc=desc, disable=not progress, leave=False))


def _sweep(sc: ScenarioConfig, algorithm, ebn0_grid: Iterable[float], trials: int,
           cfg: CoordinateConfig, seed: int, frames: int, n_jobs: int,
           progress: bool) -> List[SweepResult]:
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    if frames < 0:
        raise ConfigError(f"frames must be >= 0, got {frames}")
    algorithm = Algorithm(algorithm)
    grid = [float(e) for e in ebn0_grid]
    noises = [ebn0_to_noise_var(e, sc) for e in grid]

    log.info("%s %s: %d draws x %d frames over %d Eb/N0 points",
             algorithm.label, sc.label, trials, frames, len(grid))
    outcomes: List[DrawOutcome] = _run_draws(
        partial(simulate_draw, sc, algorithm, noises, cfg, seed, frames=frames),
        trials, n_jobs, progress, f"{algorithm.label} {sc.label}",
    )

    iterations = np.array([o.iterations for o in outcomes], dtype=float)
    converged = np.array([o.converged for o in outcomes], dtype=bool)
    if not converged.all():
        log.warning("%s: %d of %d draws did not converge within %d iterations",
                    algorithm.label, int((~converged).sum()), trials, cfg.max_iters)

    errors = np.sum([o.errors for o in outcomes], axis=0)
    rates = np.mean([o.rates for o in outcomes], axis=0)
    n_bits = trials * frames * sc.r * sc.constellation.bits_per_symbol

    rows = []
    for j, ebn0 in enumerate(grid):
        ber = float(errors[j] / n_bits) if frames else None
        rows.append(SweepResult(
            algo=algorithm.label, ebn0_db=ebn0, ber=ber, sum_rate_bits=float(rates[j]),
            avg_iterations=float(iterations.mean()), convergence_rate=float(converged.mean()),
            trials=trials, seed=seed,
        ))
        log.info("%s %5.1f dB: BER %s, sum-rate %.3f bit/use", algorithm.label, ebn0,
                 "-" if ber is None else f"{ber:.3e}", rates[j])
    return rows


def ber_sweep(sc: ScenarioConfig, algo, ebn0_grid: Iterable[float], trials: int,
              cfg: CoordinateConfig, seed: int, frames: int = 100, n_jobs: int = 1,
              progress: bool = False) -> List[SweepResult]:
    """BER over `trials` channel draws x `frames` frames per grid point; unconverged draws count."""
    if frames < 1:
        raise ConfigError(f"A BER sweep needs frames >= 1, got {frames}")
    return _sweep(sc, algo, ebn0_grid, trials, cfg, seed, frames, n_jobs, progress)


def sumrate_sweep(sc: ScenarioConfig, algo, ebn0_grid: Iterable[float], trials: int,
                  cfg: CoordinateConfig, seed: int, n_jobs: int = 1,
                  progress: bool = False) -> List[SweepResult]:
    """Closed-form parallel-channel sum-rate averaged over channel draws (no BER)."""
    return _sweep(sc, algo, ebn0_grid, trials, cfg, seed, 0, n_jobs, progress)


def _bound_draw(sc: ScenarioConfig, noises: Sequence[NoiseModel], seed: int, draw: int) -> np.ndarray:
    _, H = next(channel_attempts(sc, seed, draw), (None, None))
    if H is None:
        raise RankDeficient(f"Draw {draw}: no full-rank channel in {CHANNEL_ATTEMPTS} attempts")
    return np.array([cooperative_bound(H, sc.xi, n.sigma_n_sq) for n in noises])


def bound_sweep(sc: ScenarioConfig, ebn0_grid: Iterable[float], trials: int, seed: int,
                n_jobs: int = 1, progress: bool = False) -> List[SweepResult]:
    """Cooperative upper bound averaged over the same channel draws as the sweeps."""
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    grid = [float(e) for e in ebn0_grid]
    noises = [ebn0_to_noise_var(e, sc) for e in grid]
    bounds = np.mean(_run_draws(partial(_bound_draw, sc, noises, seed), trials, n_jobs, progress,
                                BOUND_LABEL), axis=0)
    return [
        SweepResult(algo=BOUND_LABEL, ebn0_db=e, ber=None, sum_rate_bits=float(b),
                    avg_iterations=0.0, convergence_rate=1.0, trials=trials, seed=seed)
        for e, b in zip(grid, bounds)
    ]


def run_sweeps(sc: ScenarioConfig, algorithms: Sequence[Algorithm], ebn0_grid: Sequence[float],
               trials: int, cfg: CoordinateConfig, seed: int, frames: int = 100,
               n_jobs: int = 1, with_bound: bool = False,
               progress: bool = False) -> List[SweepResult]:
    """All requested algorithms in order, then the bound rows."""
    rows: List[SweepResult] = []
    for algo in algorithms:
        if frames:
            rows += ber_sweep(sc, algo, ebn0_grid, trials, cfg, seed, frames, n_jobs, progress)
        else:
            rows += sumrate_sweep(sc, algo, ebn0_grid, trials, cfg, seed, n_jobs, progress)
    if with_bound:
        rows += bound_sweep(sc, ebn0_grid, trials, seed, n_jobs, progress)
    return rows


def results_frame(results: Sequence[SweepResult]) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump() for r in results], columns=RESULT_COLUMNS)


def format_results(results: Sequence[SweepResult], fmt: str = "csv") -> str:
    df = results_frame(results)
    if fmt == "csv":
        return df.to_csv(index=False, float_format="%.10g", lineterminator="\n")
    if fmt == "json":
        return df.to_json(orient="records", double_precision=10, indent=2) + "\n"
    raise ConfigError(f"Unknown output format '{fmt}' (csv or json)")


def write_results(results: Sequence[SweepResult], path: str, fmt: str = "csv") -> str:
    text = format_results(results, fmt)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    log.info("Wrote %d rows to %s", len(results), path)
    return text

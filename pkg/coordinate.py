# coordinate.py
"""
Iterative coordinate filters for overloaded broadcast channels.

Each user k applies an r_k x N_k filter W_k so that the stacked equivalent
channel H_e = [W_1 H_1; ...; W_K H_K] has at most N_t rows. The loop
alternates between synthesizing a precoder P_e for H_e and matching every
W_k to its own block of H P_e, until the residual multi-user interference
(the energy of H_e^(p+1) P_e^(p) outside the per-user diagonal blocks) drops
below epsilon. Interference between the streams of one user is left to the
precoder that is re-synthesized on the final H_e for transmission.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from models import Algorithm, ConfigError, CoordinateConfig, ScenarioConfig
from numerics import (ComplexMatrix, RankDeficient, lq_decompose,
                      off_diagonal_frobenius, pseudo_inverse)
from sigproc import (NoiseModel, RandomSource, RngStream, StreamPurpose, SymbolFrame,
                     detect_symbols, generate_channel, generate_noise)
from thp import ThpFilters, ThpVariant, receive, synthesize_filters, thp_encode

log = logging.getLogger("coordinate-thp.coordinate")

# CLI spelling -> CoordinateConfig.init_mode
ALL_INIT_MODES = {"gaussian": "gaussian-orthonormalized", "identity": "identity"}


@dataclass(frozen=True, eq=False)
class CoordinateState:
    W: Tuple[ComplexMatrix, ...]         # r_k x N_k per user
    H_e: ComplexMatrix                   # r x N_t, row-block k = W_k H_k
    filters: Optional[ThpFilters]        # last iteration, synthesized on H_e^(p); None for ZF
    P_e: ComplexMatrix                   # N_t x r composite precoder P_e^(p)
    residual_mui: float                  # multiuser_interference(H_e P_e, scenario)
    iterations_used: int
    converged: bool
    algorithm: Algorithm
    H: Tuple[ComplexMatrix, ...]         # N_k x N_t per user
    scenario: ScenarioConfig
    tx_filters: Optional[ThpFilters] = None  # matched to the returned W
    tx_precoder: Optional[ComplexMatrix] = None
    history: Tuple[float, ...] = ()

    @property
    def effective_channel(self) -> ComplexMatrix:
        """H_e times the transmit precoder; diagonal up to rounding."""
        return self.H_e @ self.tx_precoder


def split_channel(H: ComplexMatrix, sc: ScenarioConfig) -> List[ComplexMatrix]:
    """Cut a stacked N_r x N_t channel into per-user blocks."""
    return [H[sc.user_rows(k)] for k in range(sc.k)]


def draw_user_channels(sc: ScenarioConfig, rng: RandomSource) -> List[ComplexMatrix]:
    return split_channel(generate_channel(sc.n_r, sc.n_t, rng), sc)


def _validate_channels(H: Sequence[ComplexMatrix], sc: ScenarioConfig) -> Tuple[ComplexMatrix, ...]:
    if isinstance(H, np.ndarray) and H.ndim == 2:
        H = split_channel(H, sc)
    if len(H) != sc.k:
        raise ConfigError(f"{len(H)} user channels given for {sc.k} users")
    out = []
    for k, H_k in enumerate(H):
        H_k = np.asarray(H_k, dtype=np.complex128)
        if H_k.shape != (sc.n_k[k], sc.n_t):
            raise ConfigError(f"User {k} channel has shape {H_k.shape}, expected {(sc.n_k[k], sc.n_t)}")
        out.append(H_k)
    return tuple(out)


def initial_receive_filters(sc: ScenarioConfig, init_mode: str,
                            rng: Optional[RandomSource] = None) -> List[ComplexMatrix]:
    """Random W_k with orthonormal rows, or the leading rows of I."""
    if init_mode == "identity":
        return [np.eye(r, n, dtype=np.complex128) for r, n in zip(sc.r_k, sc.n_k)]
    if rng is None:
        raise ValueError("Random W initialization needs an rng")
    W = []
    for r, n in zip(sc.r_k, sc.n_k):
        W.append(lq_decompose(generate_channel(r, n, rng))[1])
    return W


def equivalent_channel(W: Sequence[ComplexMatrix], H: Sequence[ComplexMatrix]) -> ComplexMatrix:
    return np.vstack([W_k @ H_k for W_k, H_k in zip(W, H)])


def update_receive_filters(H: Sequence[ComplexMatrix], P_e: ComplexMatrix,
                           sc: ScenarioConfig) -> List[ComplexMatrix]:
    """W_k = rows-normalized (H_k P_e[:, streams of k])^H."""
    W = []
    for k, H_k in enumerate(H):
        block = H_k @ P_e[:, sc.user_streams(k)]
        W_k = block.conj().T
        norms = np.linalg.norm(W_k, axis=1)
        if np.any(norms == 0.0):
            raise RankDeficient(f"User {k} receive filter collapsed to zero")
        W.append(W_k / norms[:, None])
    return W


def zf_precoder(H_e: ComplexMatrix, xi: float) -> ComplexMatrix:
    """Pseudo-inverse with unit-norm columns, scaled to total power xi."""
    P = pseudo_inverse(H_e)
    P = P / np.linalg.norm(P, axis=0, keepdims=True)
    return P * np.sqrt(xi / H_e.shape[0])


def synthesize_precoder(H_e: ComplexMatrix, algorithm: Algorithm, sc: ScenarioConfig,
                        ) -> Tuple[Optional[ThpFilters], ComplexMatrix]:
    """THP filters and composite precoder, or the linear ZF precoder."""
    if algorithm is Algorithm.ZF:
        return None, zf_precoder(H_e, sc.xi)
    filters = synthesize_filters(H_e, algorithm.variant, sc.xi, sc.constellation.energy)
    return filters, filters.composite_precoder()


def multiuser_interference(M: ComplexMatrix, sc: ScenarioConfig) -> float:
    """Frobenius norm of M outside the r_k x r_k blocks that belong to one user."""
    return off_diagonal_frobenius(M, sc.r_k)


def coordination_step(H: Sequence[ComplexMatrix], W: Sequence[ComplexMatrix],
                      algorithm: Algorithm, sc: ScenarioConfig):
    """
    One loop pass starting from receive filters W: equivalent channel,
    precoder, receive filter update, residual MUI.

    Returns (W_next, H_e_next, filters, P_e, residual_mui) where filters and
    P_e were synthesized on the equivalent channel of W.
    """
    H_e = equivalent_channel(W, H)
    filters, P_e = synthesize_precoder(H_e, algorithm, sc)
    W_next = update_receive_filters(H, P_e, sc)
    H_e_next = equivalent_channel(W_next, H)
    return W_next, H_e_next, filters, P_e, multiuser_interference(H_e_next @ P_e, sc)


def _run_loop(H: Tuple[ComplexMatrix, ...], W: List[ComplexMatrix], cfg: CoordinateConfig,
              algorithm: Algorithm, sc: ScenarioConfig) -> CoordinateState:
    history: List[float] = []
    converged = False
    for p in range(1, cfg.max_iters + 1):
        W, H_e, filters, P_e, mui = coordination_step(H, W, algorithm, sc)
        history.append(mui)
        log.debug("%s iteration %d: residual MUI %.3e", algorithm.label, p, mui)
        if mui < cfg.epsilon:
            converged = True
            break

    tx_filters, tx_precoder = synthesize_precoder(H_e, algorithm, sc)
    return CoordinateState(
        W=tuple(W), H_e=H_e, filters=filters, P_e=P_e,
        residual_mui=history[-1], iterations_used=len(history), converged=converged,
        algorithm=algorithm, H=H, scenario=sc, tx_filters=tx_filters,
        tx_precoder=tx_precoder, history=tuple(history),
    )


def _coordinate(H, cfg: CoordinateConfig, algorithm: Algorithm, sc: ScenarioConfig,
                rng: Optional[RandomSource]) -> CoordinateState:
    H = _validate_channels(H, sc)
    for attempt in range(2):
        if isinstance(rng, RngStream):
            init_rng = rng.spawn(StreamPurpose.W_INIT).spawn(attempt)
        else:
            init_rng = rng
        W = initial_receive_filters(sc, cfg.init_mode, init_rng)
        try:
            state = _run_loop(H, W, cfg, algorithm, sc)
        except RankDeficient:
            if attempt:
                raise
            log.warning("Rank-deficient equivalent channel for %s; redrawing W", algorithm.label)
            continue
        if not state.converged:
            log.debug("%s did not converge in %d iterations (MUI %.3e)",
                      algorithm.label, cfg.max_iters, state.residual_mui)
        return state


def run_coordination(H, cfg: CoordinateConfig, variant: ThpVariant, scenario: ScenarioConfig,
                     rng: Optional[RandomSource] = None) -> CoordinateState:
    """Iterative coordinate THP (cTHP or dTHP) for the per-user channels H."""
    return _coordinate(H, cfg, Algorithm(ThpVariant(variant).value), scenario, rng)


def run_coordination_zf(H, cfg: CoordinateConfig, scenario: ScenarioConfig,
                        rng: Optional[RandomSource] = None) -> CoordinateState:
    """Same loop with the linear zero-forcing precoder."""
    return _coordinate(H, cfg, Algorithm.ZF, scenario, rng)


def coordinate(H, cfg: CoordinateConfig, algorithm: Algorithm, scenario: ScenarioConfig,
               rng: Optional[RandomSource] = None) -> CoordinateState:
    algorithm = Algorithm(algorithm)
    if algorithm is Algorithm.ZF:
        return run_coordination_zf(H, cfg, scenario, rng)
    return run_coordination(H, cfg, algorithm.variant, scenario, rng)


def end_to_end_transmit(state: CoordinateState, s: SymbolFrame,
                        noise: Optional[NoiseModel] = None,
                        rng: Optional[RandomSource] = None) -> np.ndarray:
    """
    Send frames of r symbols (frame-major in `s`) over the true channel:
    y_k = W_k (H_k x~ + n_k), then the variant's receive chain, fold, slice.
    Returns the detected bits in the order of `s.bit_payload`.
    """
    sc = state.scenario
    c = sc.constellation
    symbols = np.asarray(s.s, dtype=np.complex128)
    if symbols.size % sc.r:
        raise ValueError(f"{symbols.size} symbols do not fill frames of r={sc.r}")
    S = symbols.reshape(-1, sc.r).T
    n_frames = S.shape[1]

    if state.tx_filters is not None:
        x_tilde = thp_encode(S, state.tx_filters, c).x_tilde
    else:
        x_tilde = state.tx_precoder @ S

    if noise is not None:
        if rng is None:
            raise ValueError("A noisy transmission needs an rng")
        n = generate_noise(sc.n_r, noise, rng, n_frames)
    else:
        n = np.zeros((sc.n_r, n_frames), dtype=np.complex128)

    y = np.vstack([
        W_k @ (H_k @ x_tilde + n[sc.user_rows(k)])
        for k, (W_k, H_k) in enumerate(zip(state.W, state.H))
    ])

    if state.tx_filters is not None:
        z = receive(y, state.tx_filters)
        fold = True
    else:
        z = y / np.diag(state.effective_channel)[:, None]
        fold = False
    _, bits = detect_symbols(z.T.ravel(), c, fold=fold)
    return bits

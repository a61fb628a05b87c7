# sigproc.py
"""Constellations, modulo arithmetic, channel/noise draws and seeded RNG streams."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional, Tuple, Union

import numpy as np

from numerics import ComplexMatrix

# Generator algorithm for every stream: PCG64 seeded by
# SeedSequence(entropy=seed, spawn_key=(*path, stream_id)).
RNG_ALGORITHM = "numpy.PCG64/SeedSequence"


class LengthMismatch(ValueError):
    """Input length does not fit the expected frame layout."""


class StreamPurpose(IntEnum):
    CHANNEL = 0
    NOISE = 1
    BITS = 2
    W_INIT = 3


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream identified by (seed, path, stream_id)."""

    seed: int
    stream_id: int = 0
    path: Tuple[int, ...] = ()

    def spawn(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, int(stream_id), self.path + (self.stream_id,))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path + (self.stream_id,))
        return np.random.Generator(np.random.PCG64(seq))


RandomSource = Union[RngStream, np.random.Generator]


def _generator(rng: RandomSource) -> np.random.Generator:
    # an RngStream restarts its sequence on every call; a Generator keeps consuming
    if isinstance(rng, RngStream):
        return rng.generator()
    return rng


@dataclass(frozen=True)
class NoiseModel:
    sigma_n_sq: float

    def __post_init__(self):
        if not np.isfinite(self.sigma_n_sq) or self.sigma_n_sq <= 0:
            raise ValueError(f"Noise variance must be positive and finite, got {self.sigma_n_sq}")


@dataclass(frozen=True, eq=False)
class Constellation:
    """
    Unit-energy constellation. `points[label]` is the symbol carrying the
    bit pattern `label` (MSB first); the first half of the bits selects the
    in-phase level, the second half the quadrature level.
    """

    name: str
    points: np.ndarray
    bits_per_symbol: int
    tau: float
    labels: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        half = self.tau / 2
        if np.any(np.abs(self.points.real) >= half) or np.any(np.abs(self.points.imag) >= half):
            raise ValueError(f"tau={self.tau:g} does not enclose every {self.name} point")
        shifts = np.arange(self.bits_per_symbol - 1, -1, -1)
        table = (np.arange(self.points.size)[:, None] >> shifts) & 1
        object.__setattr__(self, "labels", table.astype(np.uint8))

    @property
    def energy(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))


# Gray PAM levels per axis, indexed by the axis bit pattern
_PAM_GRAY = {
    1: np.array([+1, -1]),
    2: np.array([+3, +1, -3, -1]),  # 00 -> +3, 01 -> +1, 10 -> -3, 11 -> -1
}

QPSK_TAU = 2 * np.sqrt(2.0)
QAM16_TAU = 8 / np.sqrt(10.0)


def _gray_qam(name: str, bits_per_symbol: int, scale: float, tau: float) -> Constellation:
    half = bits_per_symbol // 2
    levels = _PAM_GRAY[half]
    labels = np.arange(2 ** bits_per_symbol)
    i_level = levels[labels >> half]
    q_level = levels[labels & ((1 << half) - 1)]
    points = (i_level + 1j * q_level) * scale
    return Constellation(name, points.astype(np.complex128), bits_per_symbol, float(tau))


def get_constellation(name: str, tau: Optional[float] = None) -> Constellation:
    """QPSK or 16-QAM with the standard modulo period, unless `tau` overrides it."""
    key = name.lower().replace("-", "")
    if key == "qpsk":
        return _gray_qam("qpsk", 2, 1 / np.sqrt(2.0), tau or QPSK_TAU)
    if key in ("16qam", "qam16"):
        return _gray_qam("16qam", 4, 1 / np.sqrt(10.0), tau or QAM16_TAU)
    raise ValueError(f"Unsupported modulation '{name}' (qpsk or 16qam)")


@dataclass(frozen=True, eq=False)
class SymbolFrame:
    s: np.ndarray
    bit_payload: np.ndarray

    def __len__(self) -> int:
        return int(self.s.size)


def _fold(a: np.ndarray, tau: float) -> np.ndarray:
    out = a - np.floor(a / tau + 0.5) * tau
    # keep the half-open interval [-tau/2, tau/2) under rounding
    out = np.where(out >= tau / 2, out - tau, out)
    return np.where(out < -tau / 2, out + tau, out)


def modulo_reduce(x, tau: float):
    """Fold real and imaginary parts independently into [-tau/2, tau/2)."""
    if tau <= 0:
        raise ValueError(f"Modulo period must be positive, got {tau}")
    x = np.asarray(x, dtype=np.complex128)
    out = _fold(x.real, tau) + 1j * _fold(x.imag, tau)
    return out[()] if out.ndim == 0 else out


def map_bits(bits, c: Constellation) -> SymbolFrame:
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    n = c.bits_per_symbol
    if bits.size % n:
        raise LengthMismatch(f"{bits.size} bits is not a multiple of {n} bits/symbol")
    weights = 1 << np.arange(n - 1, -1, -1)
    labels = bits.reshape(-1, n) @ weights
    return SymbolFrame(s=c.points[labels], bit_payload=bits)


def detect_symbols(r, c: Constellation, fold: bool = True) -> Tuple[SymbolFrame, np.ndarray]:
    """
    Fold the received values back into the fundamental region (unless
    `fold` is False) and slice to the nearest point. np.argmin keeps the
    lowest table index on ties.
    """
    r = np.asarray(r, dtype=np.complex128).ravel()
    if fold:
        r = modulo_reduce(r, c.tau)
    dist = np.abs(r[:, None] - c.points[None, :]) ** 2
    labels = np.argmin(dist, axis=1)
    bits = c.labels[labels].ravel()
    return SymbolFrame(s=c.points[labels], bit_payload=bits), bits


def _check_dims(*dims: int) -> None:
    for d in dims:
        if int(d) < 1:
            raise ValueError(f"Dimensions must be >= 1, got {dims}")


def generate_channel(n_r: int, n_t: int, rng: RandomSource) -> ComplexMatrix:
    """i.i.d. CN(0, 1) entries (variance 1/2 per real dimension)."""
    _check_dims(n_r, n_t)
    gen = _generator(rng)
    re = gen.standard_normal((n_r, n_t))
    im = gen.standard_normal((n_r, n_t))
    return (re + 1j * im) / np.sqrt(2.0)


def generate_noise(n_dims: int, noise: NoiseModel, rng: RandomSource,
                   n_frames: Optional[int] = None) -> np.ndarray:
    _check_dims(n_dims)
    shape = (n_dims,) if n_frames is None else (n_dims, n_frames)
    gen = _generator(rng)
    scale = np.sqrt(noise.sigma_n_sq / 2.0)
    return scale * (gen.standard_normal(shape) + 1j * gen.standard_normal(shape))


def random_bits(n_bits: int, rng: RandomSource) -> np.ndarray:
    return _generator(rng).integers(0, 2, size=n_bits, dtype=np.uint8)

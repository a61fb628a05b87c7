# models.py
"""Validated configuration and result models."""
from __future__ import annotations

import re
from enum import Enum
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import (BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt,
                      ValidationError, model_validator)

from sigproc import Constellation, get_constellation
from thp import ThpVariant


class ConfigError(ValueError):
    """Infeasible or malformed scenario / run configuration."""


class Algorithm(str, Enum):
    CTHP = "cthp"
    DTHP = "dthp"
    ZF = "zf"

    @property
    def label(self) -> str:
        return {"cthp": "cTHP", "dthp": "dTHP", "zf": "ZF-CBF"}[self.value]

    @property
    def variant(self) -> Optional[ThpVariant]:
        return None if self is Algorithm.ZF else ThpVariant(self.value)


class ScenarioConfig(BaseModel):
    """Antenna / user / stream topology, e.g. (3,3,3,3)x8 with r_k = 2."""
    model_config = ConfigDict(frozen=True)

    n_t: PositiveInt
    n_k: Tuple[PositiveInt, ...]
    r_k: Tuple[PositiveInt, ...]
    modulation: Literal["qpsk", "16qam"] = "qpsk"
    xi: Optional[PositiveFloat] = None
    tau_override: Optional[PositiveFloat] = None

    @model_validator(mode="before")
    @classmethod
    def _default_power(cls, data):
        # xi defaults to r * sigma_s^2 (unit-energy constellations)
        if isinstance(data, dict) and data.get("xi") is None and data.get("r_k"):
            data = {**data, "xi": float(sum(data["r_k"]))}
        return data

    @model_validator(mode="after")
    def _check_topology(self):
        if not self.n_k:
            raise ValueError("At least one user is required")
        if len(self.r_k) != len(self.n_k):
            raise ValueError(f"{len(self.r_k)} stream counts given for {len(self.n_k)} users")
        for k, (n, r) in enumerate(zip(self.n_k, self.r_k)):
            if r > n:
                raise ValueError(f"User {k} has r_k={r} > N_k={n}")
        if sum(self.r_k) > self.n_t:
            raise ValueError(f"r={sum(self.r_k)} streams exceed N_t={self.n_t} transmit antennas")
        return self

    @property
    def k(self) -> int:
        return len(self.n_k)

    @property
    def n_r(self) -> int:
        return sum(self.n_k)

    @property
    def r(self) -> int:
        return sum(self.r_k)

    @property
    def label(self) -> str:
        return f"({','.join(map(str, self.n_k))})x{self.n_t}"

    @property
    def constellation(self) -> Constellation:
        return get_constellation(self.modulation, self.tau_override)

    def user_rows(self, k: int) -> slice:
        start = sum(self.n_k[:k])
        return slice(start, start + self.n_k[k])

    def user_streams(self, k: int) -> slice:
        start = sum(self.r_k[:k])
        return slice(start, start + self.r_k[k])


class CoordinateConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    epsilon: PositiveFloat = 1e-5
    max_iters: PositiveInt = 50
    init_mode: Literal["gaussian-orthonormalized", "identity"] = "gaussian-orthonormalized"


class SweepResult(BaseModel):
    """One row of a BER / sum-rate sweep."""
    model_config = ConfigDict(frozen=True)

    algo: str
    ebn0_db: float
    ber: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    sum_rate_bits: float = Field(ge=0.0)
    avg_iterations: float = Field(ge=0.0)
    convergence_rate: float = Field(ge=0.0, le=1.0)
    trials: PositiveInt
    seed: int


# name -> (scenario, streams) of the two broadcast channels compared in the BER
# and sum-rate curves: overloaded N_r > N_t, and the normal case N_r = N_t
SCENARIO_PRESETS = {
    "overloaded": ("3,3,3,3x8", "2,2,2,2"),
    "normal": ("2,2,2,2x8", None),
}

_SCENARIO_RE = re.compile(r"^\s*(\d+(?:\s*,\s*\d+)*)\s*[xX]\s*(\d+)\s*$")
_INT_LIST_RE = re.compile(r"^\s*\d+(?:\s*,\s*\d+)*\s*$")


def _int_list(text: str, what: str) -> Tuple[int, ...]:
    if not _INT_LIST_RE.match(text):
        raise ConfigError(f"Malformed {what} '{text}' (expected e.g. 2,2,2,2)")
    return tuple(int(t) for t in text.split(","))


def parse_scenario(text: str, streams: Optional[str] = None, modulation: str = "qpsk",
                   xi: Optional[float] = None, tau_override: Optional[float] = None) -> ScenarioConfig:
    """
    Build a scenario from "N_1,...,N_Kx N_t" plus optional per-user streams.
    Without `streams` every user gets r_k = N_k.
    """
    match = _SCENARIO_RE.match(text or "")
    if not match:
        raise ConfigError(f"Malformed scenario '{text}' (expected e.g. 3,3,3,3x8)")
    n_k = _int_list(match.group(1), "scenario")
    n_t = int(match.group(2))
    r_k = _int_list(streams, "stream list") if streams else n_k
    try:
        return ScenarioConfig(n_t=n_t, n_k=n_k, r_k=r_k, modulation=modulation.lower(),
                              xi=xi, tau_override=tau_override)
    except ValidationError as e:
        raise ConfigError(f"Infeasible scenario {text} with streams {r_k}: "
                          f"{e.errors()[0]['msg']}") from e


def preset_scenario(name: str, modulation: str = "qpsk",
                    tau_override: Optional[float] = None) -> ScenarioConfig:
    try:
        text, streams = SCENARIO_PRESETS[name]
    except KeyError:
        raise ConfigError(f"Unknown scenario preset '{name}' ({', '.join(SCENARIO_PRESETS)})") from None
    return parse_scenario(text, streams, modulation, tau_override=tau_override)


def parse_ebn0_grid(text: str) -> List[float]:
    """Inclusive "start:step:stop" grid in dB."""
    try:
        start, step, stop = (float(t) for t in text.split(":"))
    except ValueError:
        raise ConfigError(f"Malformed Eb/N0 grid '{text}' (expected start:step:stop)") from None
    if step <= 0 or stop < start:
        raise ConfigError(f"Empty Eb/N0 grid '{text}'")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 10) for i in range(n)]

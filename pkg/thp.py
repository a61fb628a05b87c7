# thp.py
"""Tomlinson-Harashima precoding: filter synthesis, modulo encoder, receive scaling.

Two structures share the same LQ-derived filters and differ in where the
diagonal scaling G sits:

    dTHP:  x~ = F x              receivers apply G
    cTHP:  x~ = (1/beta) F G x   receivers apply beta

With H_e = L Q, F = Q^H and G = diag(L)^-1, the noiseless receive chain
returns v = B x = s + d for either structure.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np

from numerics import ComplexMatrix, lower_triangular_inverse, lq_decompose
from sigproc import Constellation, LengthMismatch, SymbolFrame, modulo_reduce

log = logging.getLogger("coordinate-thp.thp")


class ThpVariant(str, Enum):
    CTHP = "cthp"
    DTHP = "dthp"


@dataclass(frozen=True, eq=False)
class ThpFilters:
    F: ComplexMatrix  # N_t x r feedforward, orthonormal columns
    G: ComplexMatrix  # r x r diagonal scaling, g_ii = 1 / l_ii
    B: ComplexMatrix  # r x r feedback, unit lower triangular
    beta: float
    variant: ThpVariant

    @property
    def r(self) -> int:
        return self.B.shape[0]

    @property
    def g(self) -> np.ndarray:
        return np.diag(self.G).real

    def composite_precoder(self) -> ComplexMatrix:
        """P_e = F G B^-1 (cTHP) or F B^-1 (dTHP)."""
        b_inv = lower_triangular_inverse(self.B)
        if self.variant is ThpVariant.CTHP:
            return self.F @ self.G @ b_inv
        return self.F @ b_inv


@dataclass(frozen=True, eq=False)
class TxFrame:
    x: np.ndarray        # r (x frames), after the feedback loop
    x_tilde: np.ndarray  # N_t (x frames), antenna domain
    d: np.ndarray        # implied lattice perturbation, oracle only


def synthesize_filters(H_e, variant: ThpVariant, xi: float, sigma_s_sq: float = 1.0) -> ThpFilters:
    if xi <= 0 or sigma_s_sq <= 0:
        raise ValueError(f"Power budget and symbol variance must be positive (xi={xi}, sigma_s^2={sigma_s_sq})")
    variant = ThpVariant(variant)

    L, Q = lq_decompose(H_e)
    g = 1.0 / np.diag(L).real
    G = np.diag(g).astype(np.complex128)
    B = G @ L if variant is ThpVariant.DTHP else L @ G
    np.fill_diagonal(B, 1.0)

    if variant is ThpVariant.CTHP:
        # modulo loss ignored: E|x_i|^2 ~ sigma_s^2
        beta = float(np.sqrt(sigma_s_sq * np.sum(g ** 2) / xi))
    else:
        beta = 1.0
    return ThpFilters(F=Q.conj().T, G=G, B=B, beta=beta, variant=variant)


def _lattice_round(a: np.ndarray, tau: float) -> np.ndarray:
    return tau * (np.round(a.real / tau) + 1j * np.round(a.imag / tau))


def thp_encode(s: Union[SymbolFrame, np.ndarray], f: ThpFilters, c: Constellation) -> TxFrame:
    """Successive encoder x_i = M(s_i - sum_{j<i} b_ij x_j) in natural stream order."""
    s = np.asarray(s.s if isinstance(s, SymbolFrame) else s, dtype=np.complex128)
    if s.shape[0] != f.r:
        raise LengthMismatch(f"Frame carries {s.shape[0]} streams, filters expect {f.r}")

    x = np.zeros_like(s)
    for i in range(f.r):
        x[i] = modulo_reduce(s[i] - f.B[i, :i] @ x[:i], c.tau)

    d = _lattice_round(f.B @ x - s, c.tau)
    if f.variant is ThpVariant.CTHP:
        x_tilde = f.F @ (f.G @ x) / f.beta
    else:
        x_tilde = f.F @ x
    return TxFrame(x=x, x_tilde=x_tilde, d=d)


def receive(y_raw, f: ThpFilters) -> np.ndarray:
    """Receive scaling: beta * y (cTHP) or G y (dTHP)."""
    y_raw = np.asarray(y_raw, dtype=np.complex128)
    if f.variant is ThpVariant.CTHP:
        return f.beta * y_raw
    return f.G @ y_raw


def estimate_beta(x: np.ndarray, f: ThpFilters, xi: float) -> float:
    """Empirical cTHP scaling from a batch of encoded frames (r x frames)."""
    x = np.asarray(x, dtype=np.complex128).reshape(f.r, -1)
    power = np.mean(np.sum(np.abs(f.F @ (f.G @ x)) ** 2, axis=0))
    beta = float(np.sqrt(power / xi))
    log.debug("Empirical beta %.6f over %d frames", beta, x.shape[1])
    return beta

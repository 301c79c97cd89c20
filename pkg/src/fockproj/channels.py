"""Photon-loss channel as a Kraus sum on truncated densities.

E_n(L) = (L/(1-L))^{n/2} (a^n/sqrt(n!)) (1-L)^{n/2 hat-n basis}; entries are
square roots of binomial probabilities, so everything is built from the
closed matrix elements <m|E_n|m+n> = sqrt(C(m+n,n) L^n (1-L)^m) for
stability at any order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import ConfigurationError, DimensionMismatchError
from .fock import DenseOperator, DensityOperator, FockVector


@dataclass(frozen=True)
class LossSpec:
    """Loss rate plus which modes the channel acts on (None = every mode)."""

    L: float
    n_max: int | None = None
    modes: tuple | None = None

    def __post_init__(self):
        if not 0.0 <= self.L < 1.0:
            raise ConfigurationError(f"loss rate must satisfy 0 <= L < 1, got {self.L!r}")
        if self.n_max is not None and self.n_max < 0:
            raise ConfigurationError(f"n_max must be non-negative, got {self.n_max!r}")
        if self.modes is not None:
            object.__setattr__(self, "modes", tuple(int(m) for m in self.modes))

    def to_json(self):
        doc = {"L": self.L}
        if self.n_max is not None:
            doc["n_max"] = self.n_max
        if self.modes is not None:
            doc["modes"] = list(self.modes)
        return doc

    @classmethod
    def from_json(cls, doc):
        modes = doc.get("modes")
        return cls(doc["L"], doc.get("n_max"),
                   tuple(modes) if modes is not None else None)


def _kraus_matrix(n, L, cutoff):
    m = np.arange(cutoff - n)
    logv = 0.5 * (gammaln(m + n + 1) - gammaln(n + 1) - gammaln(m + 1)
                  + n * np.log(L) + m * np.log1p(-L))
    mat = np.zeros((cutoff, cutoff), dtype=np.complex128)
    mat[m, m + n] = np.exp(logv)
    return mat


def loss_kraus(spec, cutoff):
    """Kraus operators E_0..E_{n_max} of the loss channel in truncation."""
    L = spec.L
    if L == 0.0:
        return [DenseOperator(np.eye(cutoff, dtype=np.complex128), cutoff, unitary=True)]
    n_max = cutoff - 1 if spec.n_max is None else min(spec.n_max, cutoff - 1)
    return [DenseOperator(_kraus_matrix(n, L, cutoff), cutoff)
            for n in range(n_max + 1)]


def _apply_one_mode(tensor, kraus, mode, modes):
    """Sum_n E_n rho E_n^dag on one tensor axis pair (mode, modes+mode)."""
    out = np.zeros_like(tensor)
    for e in kraus:
        left = np.tensordot(e, tensor, axes=([1], [mode]))
        left = np.moveaxis(left, 0, mode)
        right = np.tensordot(left, e.conj(), axes=([modes + mode], [1]))
        out += np.moveaxis(right, -1, modes + mode)
    return out


def apply_loss(state, spec, cutoff=None):
    """Apply the loss channel per flagged mode; pure inputs are promoted."""
    if isinstance(state, FockVector):
        state = state.density()
    if not isinstance(state, DensityOperator):
        raise DimensionMismatchError(f"cannot apply loss to {type(state).__name__}")
    d, modes = state.cutoff, state.modes
    targets = range(modes) if spec.modes is None else spec.modes
    for m in targets:
        if not 0 <= m < modes:
            raise DimensionMismatchError(f"mode {m} outside 0..{modes - 1}")
    kraus = [k.data for k in loss_kraus(spec, d)]
    tensor = state.data.reshape((d,) * (2 * modes))
    for m in targets:
        tensor = _apply_one_mode(tensor, kraus, m, modes)
    return DensityOperator(tensor.reshape(d ** modes, d ** modes), d, modes)

"""Single-ancilla repeated-LCU post-selection.

Each post-selected round applies Q = p0 I + p1 U; N rounds of Q followed
by N of Q^dag concentrate a Gaussian-binomial weight over powers U^k,
which for U = exp(i dx0 (p - eta x^2)) converges to the smeared projector
with gamma = 1/(4 N p0 p1 dx0^2).  The ancilla is never materialized:
post-selecting it on |0> is exactly the map Q.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DegenerateProjectionError
from . import fock
from . import gates
from .fock import DenseOperator, FockVector

#: Guard against absurd repetition counts from tiny step sizes.
MAX_REPETITIONS = 10 ** 6


@dataclass(frozen=True)
class LcuConfig:
    p0: float
    U: DenseOperator
    N: int
    delta_x0: float | None = None
    r: float | None = None
    delta_r: float | None = None
    eta: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.p0 <= 1.0:
            raise ConfigurationError(f"p0 must lie in [0,1], got {self.p0!r}")
        if self.N < 1:
            raise ConfigurationError(f"N must be >= 1, got {self.N!r}")
        if not self.U.unitary:
            raise ConfigurationError("step operator must be flagged unitary")

    @property
    def p1(self):
        return 1.0 - self.p0


@dataclass(frozen=True)
class LcuOutcome:
    state: FockVector
    probability: float
    step_probabilities: tuple
    N: int
    implied_gamma: float | None = None
    implied_delta_r: float | None = None


def lcu_step(state, p0, U, conjugate=False):
    """One post-selected round; returns (normalized state, success probability)."""
    mat = U.data if isinstance(U, DenseOperator) else np.asarray(U)
    psi = state.data
    upsi = mat.conj().T @ psi if conjugate else mat @ psi
    out = p0 * psi + (1.0 - p0) * upsi
    prob = float(np.vdot(out, out).real)
    if prob < 1e-300:
        raise DegenerateProjectionError("LCU step annihilated the state")
    return FockVector(out / math.sqrt(prob), state.cutoff, state.modes), prob


def lcu_repeat(config, state):
    """N rounds of Q then N of Q^dag from a normalized input state."""
    state = state.normalized()
    probs = []
    for conjugate in (False, True):
        for _ in range(config.N):
            state, p = lcu_step(state, config.p0, config.U, conjugate)
            probs.append(p)
    cumulative = float(np.prod(probs))
    implied_gamma = None
    implied_delta_r = None
    if config.delta_x0 is not None:
        implied_gamma = 1.0 / (4.0 * config.N * config.p0 * config.p1
                               * config.delta_x0 ** 2)
        implied_delta_r = 0.5 * math.log1p(
            1.0 / (2.0 * implied_gamma * math.exp(2.0 * (config.r or 0.0))))
    return LcuOutcome(state, cumulative, tuple(probs), config.N,
                      implied_gamma, implied_delta_r)


def repetitions_for(r, delta_r, delta_x0, p0=0.5):
    """Round the repetition-count formula to the nearest integer >= 1."""
    if delta_x0 <= 0:
        raise ConfigurationError(f"delta_x0 must be positive, got {delta_x0!r}")
    p1 = 1.0 - p0
    exact = math.exp(2.0 * r) * math.expm1(2.0 * delta_r) / (2.0 * p0 * p1 * delta_x0 ** 2)
    n = max(1, round(exact))
    if n > MAX_REPETITIONS:
        raise ConfigurationError(
            f"N = {n} repetitions exceed {MAX_REPETITIONS}; raise delta_x0")
    return n


def cps_step_unitary(delta_x0, eta, cutoff):
    """U = exp(i dx0 (p - eta x^2)) built from the truncated generator."""
    x = fock.quadrature_x(cutoff)
    p = fock.quadrature_p(cutoff)
    return fock.matrix_exponential(1j * delta_x0 * (p - eta * (x @ x)))


def lcu_project_cps(r, delta_r, eta, delta_x0, cutoff, p0=0.5):
    """Raise the squeezing of CPS(r, eta) by delta_r via repeated LCU."""
    n = repetitions_for(r, delta_r, delta_x0, p0)
    u = cps_step_unitary(delta_x0, eta, cutoff)
    config = LcuConfig(p0, u, n, delta_x0=delta_x0, r=r, delta_r=delta_r, eta=eta)
    start, _ = gates.build_resource_state(
        gates.ResourceStateSpec(gates.ResourceStateKind.CPS, r=r, eta=eta), cutoff)
    return lcu_repeat(config, start)

"""Nullifier variances, closed-form reference curves, and dB conversions."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import ConfigurationError, DimensionMismatchError
from . import fock
from .projectors import delta_r_from_gamma

LN10 = math.log(10.0)


class NullifierKind(str, enum.Enum):
    SQ_X = "SqX"
    CPS_PARABOLA = "CpsParabola"
    CLUSTER_PAIR = "ClusterPair"


@dataclass(frozen=True)
class NullifierSpec:
    kind: NullifierKind
    eta: float | None = None
    g: float | None = None

    def __post_init__(self):
        kind = NullifierKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is NullifierKind.CPS_PARABOLA and self.eta is None:
            raise ConfigurationError("CpsParabola nullifier requires eta")
        if kind is NullifierKind.CLUSTER_PAIR and self.g is None:
            raise ConfigurationError("ClusterPair nullifier requires g")


def nullifier_matrices(spec, cutoff):
    """Dense nullifier operators for the given kind (one or two of them)."""
    x = fock.quadrature_x(cutoff)
    p = fock.quadrature_p(cutoff)
    if spec.kind is NullifierKind.SQ_X:
        return (x,)
    if spec.kind is NullifierKind.CPS_PARABOLA:
        return (p - spec.eta * (x @ x),)
    x1 = fock.embed_single_mode(x, 0, 2)
    x2 = fock.embed_single_mode(x, 1, 2)
    p1 = fock.embed_single_mode(p, 0, 2)
    p2 = fock.embed_single_mode(p, 1, 2)
    return (p1 - spec.g * x2, p2 - spec.g * x1)


def nullifier_variance(spec, state):
    """Var(N) for one-mode kinds; Var(N1)+Var(N2) for the cluster pair."""
    expected = 2 if spec.kind is NullifierKind.CLUSTER_PAIR else 1
    if state.modes != expected:
        raise DimensionMismatchError(
            f"{spec.kind.value} nullifier needs {expected} modes, state has {state.modes}")
    return float(sum(fock.variance(n, state)
                     for n in nullifier_matrices(spec, state.cutoff)))


class Curve(str, enum.Enum):
    CPS_NULLIFIER = "CpsNullifier"
    CLUSTER_NULLIFIER = "ClusterNullifier"
    CPS_PROB = "CpsProb"
    CLUSTER_PROB = "ClusterProb"
    DELTA_R = "DeltaR"


def analytic_reference(curve, *, r=None, delta_r=None, gamma=None):
    """Closed-form target value for one of the published curves."""
    curve = Curve(curve)
    if curve is Curve.CPS_NULLIFIER:
        return math.exp(-2.0 * (r + delta_r)) / 2.0
    if curve is Curve.CLUSTER_NULLIFIER:
        return math.exp(-2.0 * (r + delta_r))
    if curve is Curve.CPS_PROB:
        return math.exp(-delta_r)
    if curve is Curve.CLUSTER_PROB:
        return math.exp(-2.0 * delta_r)
    return delta_r_from_gamma(gamma, r if r is not None else 0.0)


def db_conversions(value, direction):
    """r = ln(10)*dB/20 and its inverse; direction is 'db_to_r' or 'r_to_db'."""
    if direction == "db_to_r":
        return LN10 * value / 20.0
    if direction == "r_to_db":
        return 20.0 * value / LN10
    raise ConfigurationError(f"unknown conversion direction {direction!r}")


def db_to_r(db):
    return db_conversions(db, "db_to_r")


def r_to_db(r):
    return db_conversions(r, "r_to_db")

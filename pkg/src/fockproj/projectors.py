"""Smeared projectors onto higher-squeezing subspaces.

A smeared projector is a Gaussian-weighted sum of displacement-built
unitaries whose continuum limit is a positive operator exp(-N^2/4gamma)
for a nullifier N (x, p, EPR pair, cluster pair, or the cubic-phase
nullifier p - eta x^2).  Acting on the matching resource state it raises
the squeezing level by Delta_r = (1/2) ln(1 + 1/(2 gamma e^{2r})) and
scales the norm by e^{-Delta_r/2} per nullifier.

Both representations are provided: the discrete term list (what a
sampling scheme implements) and the closed exponential form (the oracle
the term sum must converge to).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DimensionMismatchError
from . import fock
from . import gates
from .fock import DenseOperator, DensityOperator, FockVector
from .gates import GateKind, GateSpec

SQRT2 = math.sqrt(2.0)

DEFAULT_POINT_COUNT = 201
DEFAULT_SIGMA_SPAN = 5.0
#: Point count of the coarse literal-range grid mode.
PAPER_POINT_COUNT = 30


class SpanPolicy(str, enum.Enum):
    #: Uniform points over +-sqrt(2*gamma) (the literal quoted range; note
    #: this shrinks relative to the weight sigma = 1/sqrt(2*gamma) as gamma
    #: grows, so it is kept only as a reproduction mode).
    PAPER_LITERAL = "PaperLiteral"
    #: Uniform points over +-k*sigma, sigma = 1/sqrt(2*gamma).
    SIGMA_SCALED = "SigmaScaled"


class ProjectorKind(str, enum.Enum):
    SQ = "Sq"
    ASQ = "Asq"
    EPR = "EPR"
    CLUSTER = "Cluster"
    CPS = "CPS"


_TWO_MODE_KINDS = {ProjectorKind.EPR, ProjectorKind.CLUSTER}


# ---------------------------------------------------------------------------
# gamma <-> Delta_r

def delta_r_from_gamma(gamma, r=0.0):
    """Squeezing increase produced at input squeezing r by weight exponent gamma."""
    if gamma <= 0:
        raise ConfigurationError(f"gamma must be positive, got {gamma!r}")
    return 0.5 * math.log1p(1.0 / (2.0 * gamma * math.exp(2.0 * r)))


def gamma_from_delta_r(delta_r, r=0.0):
    """Exact inverse of delta_r_from_gamma."""
    if delta_r <= 0:
        raise ConfigurationError(f"delta_r must be positive, got {delta_r!r}")
    return 1.0 / (2.0 * math.exp(2.0 * r) * math.expm1(2.0 * delta_r))


# ---------------------------------------------------------------------------
# Gaussian quadrature grid

@dataclass(frozen=True)
class GaussianGrid:
    """Midpoint-rule discretization of sqrt(gamma/pi) exp(-gamma x^2) dx."""

    gamma: float
    points: np.ndarray
    weights: np.ndarray
    policy: SpanPolicy
    sigma_span: float = DEFAULT_SIGMA_SPAN

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        wts = np.asarray(self.weights, dtype=float)
        if self.gamma <= 0:
            raise ConfigurationError(f"gamma must be positive, got {self.gamma!r}")
        if pts.ndim != 1 or pts.shape != wts.shape or pts.size == 0:
            raise ConfigurationError("points and weights must be matching 1-D arrays")
        if np.any(wts < 0):
            raise ConfigurationError("weights must be non-negative")
        if not np.allclose(pts, -pts[::-1], atol=1e-12):
            raise ConfigurationError("points must be symmetric about 0")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)

    @property
    def point_count(self):
        return self.points.size

    @property
    def sigma(self):
        return 1.0 / math.sqrt(2.0 * self.gamma)


def discretize_gaussian(gamma, point_count, policy=SpanPolicy.SIGMA_SCALED,
                        sigma_span=DEFAULT_SIGMA_SPAN):
    """Uniform midpoint grid for the unit-mass Gaussian weight."""
    if gamma <= 0:
        raise ConfigurationError(f"gamma must be positive, got {gamma!r}")
    if not isinstance(point_count, (int, np.integer)) or point_count < 1:
        raise ConfigurationError(f"point_count must be a positive integer, got {point_count!r}")
    policy = SpanPolicy(policy)
    if policy is SpanPolicy.PAPER_LITERAL:
        half = math.sqrt(2.0 * gamma)
    else:
        if sigma_span <= 0:
            raise ConfigurationError(f"sigma_span must be positive, got {sigma_span!r}")
        half = sigma_span / math.sqrt(2.0 * gamma)
    dx = 2.0 * half / point_count
    pts = -half + (np.arange(point_count) + 0.5) * dx
    # exact symmetrization kills the ~1e-16 drift that breaks w(x) == w(-x)
    pts = (pts - pts[::-1]) / 2.0
    wts = math.sqrt(gamma / math.pi) * np.exp(-gamma * pts ** 2) * dx
    return GaussianGrid(gamma, pts, wts, policy, sigma_span)


# ---------------------------------------------------------------------------
# Cubic-phase stabilizer factorization

@dataclass(frozen=True)
class GaussianFactorization:
    """Displacement/phase-shift/squeeze factorization of a Gaussian unitary.

    The product D(alpha) R(phi2) S(r) R(phi1) reproduces the factored
    operator up to the global phase e^{i phase}: the four affine
    parameters pin the operator only modulo U(1), and for the cubic-phase
    stabilizer that residual phase is nonzero.  Multiply by e^{i phase}
    to recover the target exactly.
    """

    alpha: complex
    phi1: float
    r: float
    phi2: float
    phase: float = 0.0

    def gate_specs(self):
        """Factor sequence in application order (first applied first)."""
        return (
            GateSpec(GateKind.PHASE_SHIFT, phi=self.phi1),
            GateSpec(GateKind.SQUEEZE, r=self.r),
            GateSpec(GateKind.PHASE_SHIFT, phi=self.phi2),
            GateSpec(GateKind.DISPLACEMENT, alpha=self.alpha),
        )


def cps_stabilizer_factorization(x0, eta):
    """Factor exp(-i x0 (p - eta x^2)) into displacement, phase shifts and squeeze.

    Returns parameters with e^{i phase} D(alpha) R(phi2) S(r) R(phi1)
    equal to the stabilizer exactly;  phase = arctan(eta x0)/2 - eta x0^3/6.
    """
    x0 = float(x0)
    eta = float(eta)
    if not (math.isfinite(x0) and math.isfinite(eta)):
        raise ConfigurationError("x0 and eta must be finite")
    s = math.hypot(1.0, eta * x0)
    return GaussianFactorization(
        alpha=(x0 + 1j * eta * x0 * x0) / SQRT2,
        phi1=math.atan(s + eta * x0),
        r=math.log(s + eta * x0),
        phi2=-math.atan(s - eta * x0),
        phase=0.5 * math.atan(eta * x0) - eta * x0 ** 3 / 6.0,
    )


def compose_factorization(fact, cutoff, include_phase=True):
    """Dense matrix of the factor product, optionally with the exact phase."""
    n = np.arange(cutoff)
    r1 = np.exp(1j * fact.phi1 * n)
    r2 = np.exp(1j * fact.phi2 * n)
    s = gates.squeeze_batch([fact.r], cutoff)[0]
    d = gates.displacement_batch([fact.alpha], cutoff)[0]
    mat = d @ ((r2[:, None] * s) * r1[None, :])
    if include_phase:
        mat = np.exp(1j * fact.phase) * mat
    return DenseOperator(mat, cutoff, modes=1, unitary=True)


# ---------------------------------------------------------------------------
# Smeared projectors

@dataclass(frozen=True)
class ProjectorTerm:
    """One summand: weight * phase * (tensor product of per-mode factor chains)."""

    weight: float
    factors: tuple  # tuple over modes of tuples of GateSpec, application order
    phase: complex = 1.0 + 0.0j


@dataclass(frozen=True)
class SmearedProjector:
    kind: ProjectorKind
    gamma: float
    grid: GaussianGrid
    modes: int
    terms: tuple
    g: float | None = None
    eta: float | None = None

    def to_json(self):
        doc = {
            "kind": self.kind.value,
            "gamma": self.gamma,
            "policy": self.grid.policy.value,
            "point_count": int(self.grid.point_count),
            "sigma_span": self.grid.sigma_span,
        }
        if self.g is not None:
            doc["g"] = self.g
        if self.eta is not None:
            doc["eta"] = self.eta
        return doc

    @classmethod
    def from_json(cls, doc):
        return build_smeared_projector(
            ProjectorKind(doc["kind"]),
            doc["gamma"],
            g=doc.get("g"),
            eta=doc.get("eta"),
            point_count=doc["point_count"],
            policy=SpanPolicy(doc["policy"]),
            sigma_span=doc.get("sigma_span", DEFAULT_SIGMA_SPAN),
        )


def grid_gamma_for(kind, gamma):
    """Weight exponent of the sampling grid realizing exponent gamma.

    The EPR nullifiers carry a factor sqrt(2) relative to the normal-mode
    quadratures, so the closed form divides by 8*gamma and the sampling
    grid must be built from 2*gamma for gamma to keep its per-nullifier
    Delta_r meaning.
    """
    kind = ProjectorKind(kind)
    return 2.0 * gamma if kind is ProjectorKind.EPR else gamma


def _displacement_spec(alpha):
    return GateSpec(GateKind.DISPLACEMENT, alpha=alpha)


def _build_terms(kind, grid, g, eta):
    pts = grid.points
    wts = grid.weights
    if kind is ProjectorKind.SQ:
        return tuple(
            ProjectorTerm(w, ((_displacement_spec(1j * p / SQRT2),),))
            for p, w in zip(pts, wts)
        )
    if kind is ProjectorKind.ASQ:
        return tuple(
            ProjectorTerm(w, ((_displacement_spec(x / SQRT2),),))
            for x, w in zip(pts, wts)
        )
    if kind is ProjectorKind.EPR:
        return tuple(
            ProjectorTerm(
                wx * wp,
                ((_displacement_spec((x + 1j * p) / SQRT2),),
                 (_displacement_spec((x - 1j * p) / SQRT2),)),
            )
            for x, wx in zip(pts, wts)
            for p, wp in zip(pts, wts)
        )
    if kind is ProjectorKind.CLUSTER:
        return tuple(
            ProjectorTerm(
                w1 * w2,
                ((_displacement_spec((x1 + 1j * g * x2) / SQRT2),),
                 (_displacement_spec((x2 + 1j * g * x1) / SQRT2),)),
            )
            for x1, w1 in zip(pts, wts)
            for x2, w2 in zip(pts, wts)
        )
    if kind is ProjectorKind.CPS:
        terms = []
        for x, w in zip(pts, wts):
            fact = cps_stabilizer_factorization(x, eta)
            terms.append(ProjectorTerm(w, (fact.gate_specs(),),
                                       phase=np.exp(1j * fact.phase)))
        return tuple(terms)
    raise ConfigurationError(f"unknown projector kind {kind!r}")


def build_smeared_projector(kind, gamma, *, g=None, eta=None, grid=None,
                            point_count=None, policy=SpanPolicy.SIGMA_SCALED,
                            sigma_span=DEFAULT_SIGMA_SPAN):
    """Assemble the weighted term list for a smeared projector."""
    kind = ProjectorKind(kind)
    if gamma <= 0:
        raise ConfigurationError(f"gamma must be positive, got {gamma!r}")
    if kind is ProjectorKind.CLUSTER and g is None:
        raise ConfigurationError("Cluster projector requires the gain g")
    if kind is ProjectorKind.CPS and eta is None:
        raise ConfigurationError("CPS projector requires the nonlinearity eta")
    if kind is not ProjectorKind.CLUSTER:
        g = None
    if kind is not ProjectorKind.CPS:
        eta = None
    expected = grid_gamma_for(kind, gamma)
    if grid is None:
        if point_count is None:
            point_count = DEFAULT_POINT_COUNT
        grid = discretize_gaussian(expected, point_count, policy, sigma_span)
    elif not math.isclose(grid.gamma, expected, rel_tol=1e-9):
        raise ConfigurationError(
            f"grid gamma {grid.gamma!r} does not match required weight "
            f"exponent {expected!r} for kind {kind.value}")
    modes = 2 if kind in _TWO_MODE_KINDS else 1
    terms = _build_terms(kind, grid, g, eta)
    return SmearedProjector(kind, float(gamma), grid, modes, terms, g=g, eta=eta)


# ---------------------------------------------------------------------------
# Fast evaluation paths
#
# Two-mode sums factor exactly: BCH-splitting each term's joint displacement
# into per-axis factors produces phases that cancel against the reordering
# phase, leaving  P = [sum_i w_i A_i (x) E_i] @ [sum_j w_j C_j (x) B_j].

def _one_mode_stack(proj, cutoff):
    """(weights*phases, stack of term unitaries) for single-mode kinds."""
    pts = proj.grid.points
    wts = proj.grid.weights.astype(np.complex128)
    if proj.kind is ProjectorKind.SQ:
        return wts, gates.displacement_batch(1j * pts / SQRT2, cutoff)
    if proj.kind is ProjectorKind.ASQ:
        return wts, gates.displacement_batch(pts / SQRT2, cutoff)
    # CPS: e^{i theta} D R2 S R1 per point, batched over the grid
    eta = proj.eta
    s = np.hypot(1.0, eta * pts)
    alphas = (pts + 1j * eta * pts ** 2) / SQRT2
    phi1 = np.arctan(s + eta * pts)
    rs = np.log(s + eta * pts)
    phi2 = -np.arctan(s - eta * pts)
    theta = 0.5 * np.arctan(eta * pts) - eta * pts ** 3 / 6.0
    n = np.arange(cutoff)
    smat = gates.squeeze_batch(rs, cutoff)
    dmat = gates.displacement_batch(alphas, cutoff)
    inner = np.exp(1j * np.outer(phi2, n))[:, :, None] * smat \
        * np.exp(1j * np.outer(phi1, n))[:, None, :]
    stack = np.einsum("kij,kjl->kil", dmat, inner, optimize=True)
    return wts * np.exp(1j * theta), stack


def _pair_sums(proj, cutoff):
    """The two kron-sum factors (M, N) of a two-mode smeared projector."""
    pts = proj.grid.points
    wts = proj.grid.weights
    if proj.kind is ProjectorKind.EPR:
        a = gates.displacement_batch(pts / SQRT2, cutoff)
        c = gates.displacement_batch(1j * pts / SQRT2, cutoff)
        e = gates.displacement_batch(-1j * pts / SQRT2, cutoff)
        return (wts, a, a), (wts, c, e)
    g = proj.g
    a = gates.displacement_batch(pts / SQRT2, cutoff)
    eg = gates.displacement_batch(1j * g * pts / SQRT2, cutoff)
    return (wts, a, eg), (wts, eg, a)


def _kron_sum(weights, left, right):
    d = left.shape[1]
    n = left.shape[0]
    flat = (weights[:, None] * left.reshape(n, d * d)).T @ right.reshape(n, d * d)
    return flat.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)


def dense_operator(proj, cutoff):
    """Materialize the term sum as a dense matrix."""
    if proj.modes == 1:
        wts, stack = _one_mode_stack(proj, cutoff)
        return DenseOperator(np.einsum("k,kij->ij", wts, stack, optimize=True),
                             cutoff, modes=1)
    (w1, a, e), (w2, c, b) = _pair_sums(proj, cutoff)
    mat = _kron_sum(w1, a, e) @ _kron_sum(w2, c, b)
    return DenseOperator(mat, cutoff, modes=2)


def exact_projector_form(kind, gamma, *, g=None, eta=None, cutoff=None):
    """Closed exponential exp(-N^2/4gamma) (per commuting nullifier N)."""
    kind = ProjectorKind(kind)
    if gamma <= 0:
        raise ConfigurationError(f"gamma must be positive, got {gamma!r}")
    if cutoff is None:
        raise ConfigurationError("cutoff is required")
    x = fock.quadrature_x(cutoff)
    p = fock.quadrature_p(cutoff)
    if kind is ProjectorKind.SQ:
        gen = -(x @ x) / (4.0 * gamma)
        modes = 1
    elif kind is ProjectorKind.ASQ:
        gen = -(p @ p) / (4.0 * gamma)
        modes = 1
    elif kind is ProjectorKind.CPS:
        if eta is None:
            raise ConfigurationError("CPS form requires eta")
        n1 = p - eta * (x @ x)
        gen = -(n1 @ n1) / (4.0 * gamma)
        modes = 1
    elif kind is ProjectorKind.EPR:
        x1 = fock.embed_single_mode(x, 0, 2)
        x2 = fock.embed_single_mode(x, 1, 2)
        p1 = fock.embed_single_mode(p, 0, 2)
        p2 = fock.embed_single_mode(p, 1, 2)
        n1 = x1 - x2
        n2 = p1 + p2
        gen = -(n1 @ n1 + n2 @ n2) / (8.0 * gamma)
        modes = 2
    elif kind is ProjectorKind.CLUSTER:
        if g is None:
            raise ConfigurationError("Cluster form requires g")
        x1 = fock.embed_single_mode(x, 0, 2)
        x2 = fock.embed_single_mode(x, 1, 2)
        p1 = fock.embed_single_mode(p, 0, 2)
        p2 = fock.embed_single_mode(p, 1, 2)
        n1 = p1 - g * x2
        n2 = p2 - g * x1
        gen = -(n1 @ n1 + n2 @ n2) / (4.0 * gamma)
        modes = 2
    else:
        raise ConfigurationError(f"unknown projector kind {kind!r}")
    return fock.matrix_exponential(DenseOperator(gen, cutoff, modes=modes))


def _apply_smeared_vector(proj, state):
    d = state.cutoff
    if proj.modes == 1:
        wts, stack = _one_mode_stack(proj, d)
        out = np.einsum("k,kij,j->i", wts, stack, state.data, optimize=True)
        return out
    (w1, a, e), (w2, c, b) = _pair_sums(proj, d)
    psi = state.data.reshape(d, d)
    # (C (x) B) psi  ==  C @ Psi @ B^T  in row-major mode ordering
    mid = np.einsum("j,jik,kl,jml->im", w2, c, psi, b, optimize=True)
    out = np.einsum("i,ijk,kl,iml->jm", w1, a, mid, e, optimize=True)
    return out.reshape(d * d)


def apply_projector(proj, state):
    """Apply a smeared projector or dense operator; returns (result, probability).

    The result is unnormalized: P|psi> with q = ||P psi||^2, or P rho P^dag
    with q = Tr[P rho P^dag].  Callers renormalize when needed.
    """
    if isinstance(proj, SmearedProjector):
        if isinstance(state, FockVector):
            if state.modes != proj.modes:
                raise DimensionMismatchError(
                    f"projector has {proj.modes} modes, state has {state.modes}")
            out = _apply_smeared_vector(proj, state)
            vec = FockVector(out, state.cutoff, state.modes)
            return vec, float(vec.norm() ** 2)
        if isinstance(state, DensityOperator):
            dense = dense_operator(proj, state.cutoff)
            return apply_projector(dense, state)
        raise DimensionMismatchError(f"cannot project {type(state).__name__}")
    mat = proj.data if isinstance(proj, DenseOperator) else np.asarray(proj)
    if isinstance(state, FockVector):
        if mat.shape[1] != state.data.size:
            raise DimensionMismatchError(
                f"operator {mat.shape} vs state {state.data.size}")
        vec = FockVector(mat @ state.data, state.cutoff, state.modes)
        return vec, float(vec.norm() ** 2)
    if isinstance(state, DensityOperator):
        if mat.shape[1] != state.data.shape[0]:
            raise DimensionMismatchError(
                f"operator {mat.shape} vs density {state.data.shape}")
        rho = mat @ state.data @ mat.conj().T
        out = DensityOperator(rho, state.cutoff, state.modes)
        return out, float(out.trace().real)
    raise DimensionMismatchError(f"cannot project {type(state).__name__}")

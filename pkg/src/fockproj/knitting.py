"""CZ'-gate teleportation on four truncated modes, and the knitted estimator
that replaces the physical cluster resource with virtually projected vacua."""

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import fock, gates, projectors
from .errors import (
    ConfigurationError,
    DegenerateProjectionError,
    DimensionMismatchError,
    NumericError,
    SpectralWindowError,
    StructureError,
)
from .fock import DensityOperator, FockVector
from .projectors import ProjectorKind
from .vqed import _finalize

DEFAULT_TELEPORT_CUTOFF = 18
DEFAULT_GRID_SPAN = 6.0
DEFAULT_GRID_POINTS = 121
# A handful of live cutoff**4 complex tensors; keep them well under RAM.
MEMORY_BUDGET_BYTES = 2 ** 31
_TRACE_TOL = 1e-6


class Quadrature(str, enum.Enum):
    X = "X"
    P = "P"


class TeleportMode(str, enum.Enum):
    ENSEMBLE_AVERAGED = "EnsembleAveraged"
    SAMPLED = "Sampled"


class KnitObservable(str, enum.Enum):
    """Output observables the knitted estimator reconstructs across the cut."""

    X1 = "X1"
    P1 = "P1"
    X2 = "X2"
    P2 = "P2"
    X1X2 = "X1X2"
    P1P2 = "P1P2"


def spectral_window(cutoff):
    """Largest |m| whose single Hermite row is trusted at this cutoff."""
    return 0.6 * math.sqrt(2.0 * cutoff)


def _position_rows(ms, cutoff):
    """phi_n(m) rows: <x=m|n> via the stable upward Hermite recurrence."""
    ms = np.asarray(ms, dtype=float).ravel()
    rows = np.zeros((ms.size, cutoff))
    rows[:, 0] = np.pi ** -0.25 * np.exp(-0.5 * ms * ms)
    if cutoff > 1:
        rows[:, 1] = rows[:, 0] * ms * math.sqrt(2.0)
    for n in range(2, cutoff):
        rows[:, n] = (rows[:, n - 1] * ms * math.sqrt(2.0 / n)
                      - rows[:, n - 2] * math.sqrt((n - 1) / n))
    return rows


def homodyne_projector(m, quadrature, cutoff):
    """Bra <x=m| (or <p=m|) over the number basis as a length-cutoff row."""
    window = spectral_window(cutoff)
    if abs(m) > window + 1e-12:
        raise SpectralWindowError(
            f"outcome {m} outside the spectral window +-{window:.3f} at cutoff {cutoff}")
    row = _position_rows([float(m)], cutoff)[0].astype(np.complex128)
    if Quadrature(quadrature) is Quadrature.P:
        row = row * (-1j) ** np.arange(cutoff)
    return row


@dataclass(frozen=True)
class HomodyneModel:
    """Grid homodyne readout: Hermite-function rows with midpoint weights.

    Outcome probabilities are spacing * |<m|psi>|^2; mass outside the grid is
    dropped and downstream results renormalize by the captured mass.  Grids
    may span the full Fock support sqrt(2*cutoff + 1) even where an isolated
    row sits beyond the conservative `spectral_window` bound; completeness
    over a +-6 span holds for any state that fits the cutoff.
    """

    span: float = DEFAULT_GRID_SPAN
    points: int = DEFAULT_GRID_POINTS

    def __post_init__(self):
        if not (self.span > 0.0 and math.isfinite(self.span)):
            raise ConfigurationError(f"grid span must be positive, got {self.span}")
        if int(self.points) != self.points or self.points < 3:
            raise ConfigurationError(f"need at least 3 grid points, got {self.points}")

    @property
    def grid(self):
        return np.linspace(-self.span, self.span, self.points)

    @property
    def spacing(self):
        return 2.0 * self.span / (self.points - 1)

    def rows(self, quadrature, cutoff):
        """All outcome bras stacked as a (points, cutoff) matrix."""
        rows = _position_rows(self.grid, cutoff).astype(np.complex128)
        if Quadrature(quadrature) is Quadrature.P:
            rows = rows * ((-1j) ** np.arange(cutoff))[None, :]
        return rows

    def validate_span(self, cutoff):
        support = math.sqrt(2.0 * cutoff + 1.0)
        if self.span > support + 1e-12:
            raise SpectralWindowError(
                f"grid span {self.span} exceeds the Fock support +-{support:.3f} "
                f"at cutoff {cutoff}")


@dataclass(frozen=True)
class TeleportSample:
    m1: float
    m2: float
    state: FockVector


@dataclass(frozen=True)
class TeleportResult:
    """Teleported output: grid-averaged density or per-sample pure states."""

    mode: TeleportMode
    cutoff: int
    model: HomodyneModel
    captured: float
    probabilities: np.ndarray
    density: DensityOperator | None = None
    samples: tuple[TeleportSample, ...] | None = None

    def __post_init__(self):
        if self.density is not None:
            err = abs(self.density.trace().real - 1.0)
            if err > _TRACE_TOL:
                raise NumericError(
                    f"averaged output trace off by {err:.2e} after grid normalization")


# ---------------------------------------------------------------------------
# Four-mode engine (modes ordered c = input 1, a, b = ancillas, f = input 2)


@lru_cache(maxsize=8)
def _x_eigensystem(cutoff):
    w, v = np.linalg.eigh(fock.quadrature_x(cutoff))
    return w, v


def _apply_mode(tensor, mat, axis):
    out = np.tensordot(mat, tensor, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis)


def _cz_axes(tensor, i, j, g, cutoff):
    """exp(i g x_i x_j) on two tensor axes via the truncated-x eigenbasis.

    Equals gates.cz exactly: both exponentiate the same truncated generator.
    """
    if i > j:
        i, j = j, i
    w, v = _x_eigensystem(cutoff)
    vh = v.conj().T
    t = _apply_mode(tensor, vh, i)
    t = _apply_mode(t, vh, j)
    shape = [cutoff if k in (i, j) else 1 for k in range(t.ndim)]
    t = t * np.exp(1j * g * np.outer(w, w)).reshape(shape)
    t = _apply_mode(t, v, i)
    return _apply_mode(t, v, j)


def _rotation_diag(cutoff):
    """R(-pi/2) = exp(-i pi n/2) diagonal."""
    return (-1j) ** np.arange(cutoff)


def _ancilla_vector(r, cutoff):
    """Truncated, renormalized S(-r)|0>.

    Deliberately unguarded: at high r the discarded tail maps to out-of-grid
    homodyne outcomes and is accounted for by the captured mass.
    """
    amps = gates.squeezed_vacuum_amplitudes(-r, cutoff)
    return amps / np.linalg.norm(amps)


def _single_mode_input(psi, name, cutoff):
    if not isinstance(psi, FockVector):
        raise TypeError(f"{name} must be a FockVector")
    if psi.modes != 1:
        raise DimensionMismatchError(f"{name} must be single-mode, got {psi.modes}")
    if cutoff is not None and psi.cutoff != cutoff:
        raise DimensionMismatchError(
            f"{name} cutoff {psi.cutoff} != {cutoff} of the other input")
    return psi.normalized().data


def _memory_guard(cutoff):
    need = 6 * 16 * cutoff ** 4
    if need > MEMORY_BUDGET_BYTES:
        raise ConfigurationError(
            f"four-mode stage at cutoff {cutoff} needs ~{need / 2 ** 30:.1f} GiB "
            f"of intermediates; budget is {MEMORY_BUDGET_BYTES / 2 ** 30:.1f} GiB")


def _check_gain(g):
    if abs(g - 1.0) > 1e-12:
        raise ConfigurationError(
            "teleportation gain is fixed at 1; other gains are realized through "
            "the virtual cluster's g parameter")


def _resource_tensor(resource, r, cutoff):
    if resource is None:
        sq = _ancilla_vector(r, cutoff)
        return _cz_axes(np.outer(sq, sq), 0, 1, 1.0, cutoff)
    if not isinstance(resource, FockVector):
        raise TypeError("resource override must be a FockVector")
    if resource.modes != 2 or resource.cutoff != cutoff:
        raise DimensionMismatchError(
            f"resource must be two-mode at cutoff {cutoff}, got "
            f"modes={resource.modes}, cutoff={resource.cutoff}")
    return resource.normalized().reshaped()


def _teleport_blocks(psi1, psi2, resource_t, model, cutoff, feedforward):
    """Yield (i1, blk) with blk[m2, a, b] the corrected unnormalized branches
    for outcome m1 = grid[i1] (no grid weights applied)."""
    rows = model.rows(Quadrature.P, cutoff)
    t4 = np.einsum("c,ab,f->cabf", psi1, resource_t, psi2, optimize=True)
    t4 = _cz_axes(t4, 0, 1, 1.0, cutoff)
    t4 = _cz_axes(t4, 2, 3, 1.0, cutoff)
    t1 = np.tensordot(rows, t4, axes=([1], [0]))  # (m1, a, b, f)
    del t4
    grid = model.grid
    rot = _rotation_diag(cutoff)
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    for i1, m1 in enumerate(grid):
        blk = np.tensordot(rows, t1[i1], axes=([1], [2]))  # (m2, a, b)
        if feedforward:
            da = fock._displacement_batch(-(m1 + 1j * grid) * inv_sqrt2, cutoff)
            db = fock._displacement_batch(-(grid + 1j * m1) * inv_sqrt2, cutoff)
            blk = np.einsum("nij,njb->nib", da, blk, optimize=True)
            blk = np.einsum("nib,nlb->nil", blk, db, optimize=True)
        blk *= rot[None, :, None]
        blk *= rot[None, None, :]
        yield i1, blk


def cz_prime_output(psi1, psi2, g=1.0):
    """Reference CZ'(g)(psi1 x psi2), applied matrix-free.

    Uses CZ' = (R^dag x R^dag) C_z (R x R) with R = R(pi/2), which holds for
    the truncated generators because R is a number-diagonal unitary.
    """
    cutoff = psi1.cutoff
    v1 = _single_mode_input(psi1, "psi1", None)
    v2 = _single_mode_input(psi2, "psi2", cutoff)
    rdiag = (1j) ** np.arange(cutoff)
    t = np.outer(v1 * rdiag, v2 * rdiag)
    t = _cz_axes(t, 0, 1, g, cutoff)
    t = t * np.outer(rdiag.conj(), rdiag.conj())
    return FockVector(t.ravel(), cutoff, 2)


def teleport_czp(psi1, psi2, r, g=1.0, *, model=None, mode=TeleportMode.ENSEMBLE_AVERAGED,
                 samples=None, seed=None, resource=None, feedforward=True):
    """Teleport psi1 x psi2 through a C_z cluster, realizing CZ'(1).

    Circuit on modes (c, a, b, f): couple C_z(c, a) and C_z(f, b) to the
    two-mode resource (default C_z(S(-r)|0>)^x2 on a, b), measure p on the
    input wires over the grid model, apply the feedforward displacements
    D(-(m1 + i m2)/sqrt(2)) and D(-(m2 + i m1)/sqrt(2)) to the ancilla wires,
    then rotate both outputs by R(-pi/2).
    """
    _check_gain(g)
    mode = TeleportMode(mode)
    v1 = _single_mode_input(psi1, "psi1", None)
    cutoff = psi1.cutoff
    v2 = _single_mode_input(psi2, "psi2", cutoff)
    model = model if model is not None else HomodyneModel()
    model.validate_span(cutoff)
    _memory_guard(cutoff)
    resource_t = _resource_tensor(resource, r, cutoff)
    weight = model.spacing ** 2
    if mode is TeleportMode.ENSEMBLE_AVERAGED:
        pmf = np.zeros((model.points, model.points))
        rho = np.zeros((cutoff * cutoff, cutoff * cutoff), dtype=np.complex128)
        for i1, blk in _teleport_blocks(v1, v2, resource_t, model, cutoff, feedforward):
            flat = blk.reshape(model.points, -1)
            pmf[i1] = weight * np.einsum("na,na->n", flat.conj(), flat).real
            rho += weight * (flat.T @ flat.conj())
        captured = float(pmf.sum())
        if captured <= _TRACE_TOL:
            raise DegenerateProjectionError("grid captured numerically no outcome mass")
        return TeleportResult(
            mode, cutoff, model, captured, pmf / captured,
            density=DensityOperator(rho / captured, cutoff, 2))
    if samples is None or int(samples) < 1:
        raise ConfigurationError("Sampled mode needs samples >= 1")
    if seed is None:
        raise ConfigurationError("Sampled mode needs an explicit seed")
    return _teleport_sampled(v1, v2, resource_t, model, cutoff, feedforward,
                             int(samples), seed)


def _teleport_sampled(v1, v2, resource_t, model, cutoff, feedforward, samples, seed):
    """Sequential inverse-CDF sampling: measure wire c, collapse, then wire f."""
    rows = model.rows(Quadrature.P, cutoff)
    t4 = np.einsum("c,ab,f->cabf", v1, resource_t, v2, optimize=True)
    t4 = _cz_axes(t4, 0, 1, 1.0, cutoff)
    t4 = _cz_axes(t4, 2, 3, 1.0, cutoff)
    t1 = np.tensordot(rows, t4, axes=([1], [0]))  # (m1, a, b, f)
    del t4
    grid = model.grid
    weight = model.spacing ** 2
    # joint pmf over both wires, computed wire-by-wire to keep memory flat
    joint = np.empty((model.points, model.points))
    for i1 in range(model.points):
        c2 = np.tensordot(rows, t1[i1], axes=([1], [2]))  # (m2, a, b)
        joint[i1] = weight * np.einsum("nab,nab->n", c2.conj(), c2).real
    captured = float(joint.sum())
    if captured <= _TRACE_TOL:
        raise DegenerateProjectionError("grid captured numerically no outcome mass")
    marginal1 = joint.sum(axis=1)
    cum1 = np.cumsum(marginal1)
    rng = np.random.default_rng(seed)
    rot = _rotation_diag(cutoff)
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    out = []
    cache = {}
    for _ in range(samples):
        i1 = int(np.searchsorted(cum1, rng.random() * captured, side="right"))
        i1 = min(i1, model.points - 1)
        if i1 not in cache:
            cache[i1] = np.tensordot(rows, t1[i1], axes=([1], [2]))
        c2 = cache[i1]
        row = joint[i1]
        cum2 = np.cumsum(row)
        i2 = int(np.searchsorted(cum2, rng.random() * cum2[-1], side="right"))
        i2 = min(i2, model.points - 1)
        m1, m2 = float(grid[i1]), float(grid[i2])
        branch = c2[i2]
        if feedforward:
            da = fock._displacement_batch([-(m1 + 1j * m2) * inv_sqrt2], cutoff)[0]
            db = fock._displacement_batch([-(m2 + 1j * m1) * inv_sqrt2], cutoff)[0]
            branch = da @ branch @ db.T
        branch = branch * np.outer(rot, rot)
        state = FockVector(branch.ravel(), cutoff, 2).normalized()
        out.append(TeleportSample(m1, m2, state))
    return TeleportResult(TeleportMode.SAMPLED, cutoff, model, captured,
                          joint / captured, samples=tuple(out))


def teleport_czp_fidelity(psi1, psi2, r, *, target=None, model=None,
                          resource=None, feedforward=True):
    """Streaming fidelity of the grid-averaged output against a pure target.

    Avoids materializing the averaged density operator, so it stays cheap at
    the cutoffs the r = 2+ regime needs.  Returns (fidelity, captured mass).
    """
    v1 = _single_mode_input(psi1, "psi1", None)
    cutoff = psi1.cutoff
    v2 = _single_mode_input(psi2, "psi2", cutoff)
    model = model if model is not None else HomodyneModel()
    model.validate_span(cutoff)
    _memory_guard(cutoff)
    if target is None:
        target = cz_prime_output(psi1, psi2)
    tconj = target.normalized().reshaped().conj()
    resource_t = _resource_tensor(resource, r, cutoff)
    num = 0.0
    captured = 0.0
    for _, blk in _teleport_blocks(v1, v2, resource_t, model, cutoff, feedforward):
        captured += np.einsum("nab,nab->", blk.conj(), blk).real
        ov = np.einsum("nab,ab->n", blk, tconj, optimize=True)
        num += float(np.sum(np.abs(ov) ** 2))
    if captured <= _TRACE_TOL:
        raise DegenerateProjectionError("grid captured numerically no outcome mass")
    return num / captured, captured * model.spacing ** 2


# ---------------------------------------------------------------------------
# Circuit knitting: virtual cluster resource + separable teleportation halves


CUT_SIDE_A = frozenset({0, 1})
CUT_SIDE_B = frozenset({2, 3})


@dataclass(frozen=True)
class KnitOperation:
    name: str
    modes: frozenset


def knit_program():
    """Per-trajectory operation schedule (mode ids: 0 = input 1, 1 = ancilla a,
    2 = ancilla b, 3 = input 2).  Only classical records cross the cut."""
    return (
        KnitOperation("sampled displacement D(theta_A) on ancilla a", frozenset({1})),
        KnitOperation("sampled displacement D(theta_B) on ancilla b", frozenset({2})),
        KnitOperation("C_z coupling input 1 / ancilla a", frozenset({0, 1})),
        KnitOperation("C_z coupling input 2 / ancilla b", frozenset({2, 3})),
        KnitOperation("p measurement on input wire 1", frozenset({0})),
        KnitOperation("p measurement on input wire 2", frozenset({3})),
        KnitOperation("feedforward displacement on ancilla a", frozenset({1})),
        KnitOperation("feedforward displacement on ancilla b", frozenset({2})),
        KnitOperation("output rotation R(-pi/2) on ancilla a", frozenset({1})),
        KnitOperation("output rotation R(-pi/2) on ancilla b", frozenset({2})),
    )


def _assert_cut_separable(program):
    for op in program:
        if not (op.modes <= CUT_SIDE_A or op.modes <= CUT_SIDE_B):
            raise StructureError(
                f"operation {op.name!r} straddles the cut: modes {sorted(op.modes)}")


def _side_moments(input_vec, anc_l, anc_lp, rows, grid, dm, x_mat, p_mat, cutoff):
    """Grid-summed sandwich moments between the two Hadamard-test branches
    of one teleportation half (input wire collapsed, ancilla wire open)."""
    t_l = _cz_axes(np.outer(input_vec, anc_l), 0, 1, 1.0, cutoff)
    t_lp = _cz_axes(np.outer(input_vec, anc_lp), 0, 1, 1.0, cutoff)
    r_l = rows @ t_l      # (m, ancilla)
    r_lp = rows @ t_lp
    s_i = np.einsum("ma,ma->m", r_lp.conj(), r_l)
    s_x = np.einsum("ma,ab,mb->m", r_lp.conj(), x_mat, r_l, optimize=True)
    s_p = np.einsum("ma,ab,mb->m", r_lp.conj(), p_mat, r_l, optimize=True)
    return {
        "I": dm * s_i.sum(),
        "mI": dm * (grid * s_i).sum(),
        "x": dm * s_x.sum(),
        "p": dm * s_p.sum(),
        "mp": dm * (grid * s_p).sum(),
    }


def _assemble(observable, ta, tb):
    """Joint sandwich from per-side moments.

    In the Heisenberg picture the feedforward and R(-pi/2) reduce to
    x_out1 = p_a - m2, p_out1 = m1 - x_a (and symmetrically for side B),
    so every supported observable is a short sum of per-side grid moments.
    """
    if observable is KnitObservable.X1:
        return ta["p"] * tb["I"] - ta["I"] * tb["mI"]
    if observable is KnitObservable.P1:
        return (ta["mI"] - ta["x"]) * tb["I"]
    if observable is KnitObservable.X2:
        return ta["I"] * tb["p"] - ta["mI"] * tb["I"]
    if observable is KnitObservable.P2:
        return ta["I"] * (tb["mI"] - tb["x"])
    if observable is KnitObservable.X1X2:
        return (ta["p"] * tb["p"] - ta["mp"] * tb["I"]
                - ta["I"] * tb["mp"] + ta["mI"] * tb["mI"])
    if observable is KnitObservable.P1P2:
        return (ta["mI"] * tb["mI"] - ta["mI"] * tb["x"]
                - ta["x"] * tb["mI"] + ta["x"] * tb["x"])
    raise ConfigurationError(f"unsupported knit observable {observable!r}")


def knit_czp_expectation(psi1, psi2, observable, gamma, g=1.0, *,
                         trajectories, seed, model=None):
    """Knitted <M> after a virtual CZ' between the two inputs.

    The physical cluster resource is replaced by two vacuum ancillas plus
    virtual-projection sampling of the gain-g cluster projector: per
    trajectory a pair (x1, x2) is drawn from the product Gaussian and the
    per-mode displacements D((x1 + i g x2)/sqrt(2)), D((x2 + i g x1)/sqrt(2))
    are inserted on the two sides of the cut.  Measurements, feedforward and
    output rotations are folded into classical post-processing of per-side
    grid moments, so every quantum operation acts on one side only.
    """
    observable = KnitObservable(observable)
    _assert_cut_separable(knit_program())
    v1 = _single_mode_input(psi1, "psi1", None)
    cutoff = psi1.cutoff
    v2 = _single_mode_input(psi2, "psi2", cutoff)
    if trajectories < 1:
        raise ConfigurationError("need at least one trajectory")
    model = model if model is not None else HomodyneModel()
    model.validate_span(cutoff)
    grid_gamma = projectors.grid_gamma_for(ProjectorKind.CLUSTER, gamma)
    if grid_gamma <= 0.0:
        raise ConfigurationError(f"gamma must be positive, got {gamma}")
    sigma = math.sqrt(1.0 / (2.0 * grid_gamma))
    rows = model.rows(Quadrature.P, cutoff)
    grid = model.grid
    dm = model.spacing
    x_mat = fock.quadrature_x(cutoff)
    p_mat = fock.quadrature_p(cutoff)
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    mu_num = np.empty(trajectories, dtype=np.complex128)
    mu_den = np.empty(trajectories, dtype=np.complex128)
    for t in range(trajectories):
        rng = np.random.default_rng((seed, t))
        x1, x2 = rng.normal(0.0, sigma, size=2)
        y1, y2 = rng.normal(0.0, sigma, size=2)
        thetas = np.array([
            (x1 + 1j * g * x2), (y1 + 1j * g * y2),   # ancilla a: l, l'
            (x2 + 1j * g * x1), (y2 + 1j * g * y1),   # ancilla b: l, l'
        ]) * inv_sqrt2
        anc = fock._displacement_batch(thetas, cutoff)[:, :, 0]
        ta = _side_moments(v1, anc[0], anc[1], rows, grid, dm, x_mat, p_mat, cutoff)
        tb = _side_moments(v2, anc[2], anc[3], rows, grid, dm, x_mat, p_mat, cutoff)
        mu_den[t] = ta["I"] * tb["I"]
        mu_num[t] = _assemble(observable, ta, tb)
    return _finalize(mu_num, mu_den, trajectories, seed, 1.0)

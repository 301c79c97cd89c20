"""Dense truncated-Fock-space states, operators and core numerics.

Conventions
-----------
* Single-mode Hilbert space is truncated to ``cutoff`` levels ``|0..cutoff-1>``.
* Quadratures follow ``hbar = 1``: ``x = (a + a^dag)/sqrt(2)``,
  ``p = -i (a - a^dag)/sqrt(2)``, so the vacuum variance of either is 1/2.
* Multi-mode amplitudes are stored mode-major: the flat index of occupation
  ``(n_1, ..., n_M)`` is ``n_1*cutoff^(M-1) + ... + n_M``, i.e. plain
  ``numpy.kron`` ordering with mode 1 most significant.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm as _scipy_expm

from .errors import (
    ConfigurationError,
    DegenerateProjectionError,
    DimensionMismatchError,
    InvalidDimensionError,
    NumericError,
)

# Structural tolerances used across the package.
HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
NORM_TOL = 1e-10


def _check_cutoff(cutoff, modes=1):
    if not isinstance(cutoff, (int, np.integer)) or cutoff < 2:
        raise InvalidDimensionError(f"cutoff must be an integer >= 2, got {cutoff!r}")
    if not isinstance(modes, (int, np.integer)) or modes < 1:
        raise InvalidDimensionError(f"modes must be an integer >= 1, got {modes!r}")


def _check_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{what} contains NaN or Inf entries")


@dataclass(frozen=True)
class FockVector:
    """Pure state amplitudes over the truncated multi-mode Fock basis."""

    data: np.ndarray
    cutoff: int
    modes: int = 1

    def __post_init__(self):
        _check_cutoff(self.cutoff, self.modes)
        arr = np.ascontiguousarray(self.data, dtype=np.complex128)
        if arr.ndim != 1 or arr.size != self.cutoff ** self.modes:
            raise DimensionMismatchError(
                f"state length {arr.size} != cutoff**modes = {self.cutoff ** self.modes}"
            )
        _check_finite(arr, "state vector")
        object.__setattr__(self, "data", arr)

    @property
    def dim(self):
        return self.data.size

    def norm(self):
        return float(np.linalg.norm(self.data))

    def normalized(self):
        n = self.norm()
        if n < NORM_TOL:
            raise DegenerateProjectionError("cannot normalize a numerically null state")
        return FockVector(self.data / n, self.cutoff, self.modes)

    def overlap(self, other):
        """Inner product <self|other>."""
        _check_same_space(self, other)
        return complex(np.vdot(self.data, other.data))

    def density(self):
        return DensityOperator(np.outer(self.data, self.data.conj()), self.cutoff, self.modes)

    def reshaped(self):
        """Amplitudes as a modes-dimensional tensor (cutoff per axis)."""
        return self.data.reshape((self.cutoff,) * self.modes)


@dataclass(frozen=True)
class DensityOperator:
    """Dense (possibly unnormalized) density matrix on the truncated space."""

    data: np.ndarray
    cutoff: int
    modes: int = 1

    def __post_init__(self):
        _check_cutoff(self.cutoff, self.modes)
        arr = np.ascontiguousarray(self.data, dtype=np.complex128)
        dim = self.cutoff ** self.modes
        if arr.shape != (dim, dim):
            raise DimensionMismatchError(f"density shape {arr.shape} != ({dim}, {dim})")
        _check_finite(arr, "density operator")
        object.__setattr__(self, "data", arr)

    @property
    def dim(self):
        return self.data.shape[0]

    def trace(self):
        return complex(np.trace(self.data))

    def normalized(self):
        tr = self.trace().real
        if tr < NORM_TOL:
            raise DegenerateProjectionError("cannot normalize a numerically null density")
        return DensityOperator(self.data / tr, self.cutoff, self.modes)


@dataclass(frozen=True)
class DenseOperator:
    """Dense operator on the truncated space, optionally flagged unitary."""

    data: np.ndarray
    cutoff: int
    modes: int = 1
    unitary: bool = field(default=False)

    def __post_init__(self):
        _check_cutoff(self.cutoff, self.modes)
        arr = np.ascontiguousarray(self.data, dtype=np.complex128)
        dim = self.cutoff ** self.modes
        if arr.shape != (dim, dim):
            raise DimensionMismatchError(f"operator shape {arr.shape} != ({dim}, {dim})")
        _check_finite(arr, "operator")
        object.__setattr__(self, "data", arr)

    @property
    def dim(self):
        return self.data.shape[0]

    def dag(self):
        return DenseOperator(self.data.conj().T, self.cutoff, self.modes, self.unitary)

    def __matmul__(self, other):
        if isinstance(other, DenseOperator):
            _check_same_space(self, other)
            return DenseOperator(
                self.data @ other.data, self.cutoff, self.modes, self.unitary and other.unitary
            )
        if isinstance(other, FockVector):
            _check_same_space(self, other)
            return FockVector(self.data @ other.data, self.cutoff, self.modes)
        return NotImplemented


def _check_same_space(a, b):
    if a.cutoff != b.cutoff or a.modes != b.modes:
        raise DimensionMismatchError(
            f"operands live on different spaces: "
            f"(cutoff={a.cutoff}, modes={a.modes}) vs (cutoff={b.cutoff}, modes={b.modes})"
        )


# ---------------------------------------------------------------------------
# Ladder and quadrature matrices


def build_ladder(cutoff):
    """Single-mode annihilation matrix: <n-1|a|n> = sqrt(n)."""
    _check_cutoff(cutoff)
    return np.diag(np.sqrt(np.arange(1.0, cutoff)), k=1).astype(np.complex128)


def number_operator(cutoff):
    return np.diag(np.arange(cutoff)).astype(np.complex128)


def quadrature_x(cutoff):
    a = build_ladder(cutoff)
    return (a + a.conj().T) / np.sqrt(2.0)


def quadrature_p(cutoff):
    a = build_ladder(cutoff)
    return -1j * (a - a.conj().T) / np.sqrt(2.0)


def truncated_commutator(cutoff):
    """[a, a^dag] in truncation: diag(1, ..., 1, -(cutoff-1))."""
    a = build_ladder(cutoff)
    return a @ a.conj().T - a.conj().T @ a


def embed_single_mode(op, mode, modes, cutoff=None):
    """Tensor a single-mode matrix into `modes` modes at position `mode`."""
    mat = op.data if isinstance(op, DenseOperator) else np.asarray(op, dtype=np.complex128)
    if cutoff is None:
        cutoff = mat.shape[0]
    if mat.shape != (cutoff, cutoff):
        raise DimensionMismatchError(f"expected ({cutoff},{cutoff}) block, got {mat.shape}")
    if not 0 <= mode < modes:
        raise InvalidDimensionError(f"mode index {mode} outside 0..{modes - 1}")
    out = np.eye(1, dtype=np.complex128)
    for m in range(modes):
        out = np.kron(out, mat if m == mode else np.eye(cutoff, dtype=np.complex128))
    return out


def tensor_states(*states):
    cutoff = states[0].cutoff
    vec = np.ones(1, dtype=np.complex128)
    modes = 0
    for s in states:
        if s.cutoff != cutoff:
            raise DimensionMismatchError("tensor factors must share the cutoff")
        vec = np.kron(vec, s.data)
        modes += s.modes
    return FockVector(vec, cutoff, modes)


def vacuum(cutoff, modes=1):
    _check_cutoff(cutoff, modes)
    vec = np.zeros(cutoff ** modes, dtype=np.complex128)
    vec[0] = 1.0
    return FockVector(vec, cutoff, modes)


def basis_state(cutoff, occupations):
    """|n_1, ..., n_M> with mode-major flat indexing."""
    ns = np.atleast_1d(np.asarray(occupations, dtype=int))
    modes = ns.size
    _check_cutoff(cutoff, modes)
    if np.any(ns < 0) or np.any(ns >= cutoff):
        raise InvalidDimensionError(f"occupations {ns.tolist()} outside 0..{cutoff - 1}")
    idx = 0
    for n in ns:
        idx = idx * cutoff + int(n)
    vec = np.zeros(cutoff ** modes, dtype=np.complex128)
    vec[idx] = 1.0
    return FockVector(vec, cutoff, modes)


# ---------------------------------------------------------------------------
# Matrix exponential


def _is_hermitian(mat, tol):
    return np.max(np.abs(mat - mat.conj().T)) <= tol * max(1.0, np.max(np.abs(mat)))


def matrix_exponential(generator, cutoff=None, modes=None):
    """exp(A) for a dense square matrix.

    Hermitian and anti-Hermitian generators take an exact eigendecomposition
    route (the result of an anti-Hermitian generator is then unitary to
    rounding and flagged as such); anything else falls back to
    scaling-and-squaring.
    """
    mat = generator.data if isinstance(generator, DenseOperator) else None
    if mat is not None:
        cutoff = generator.cutoff
        modes = generator.modes
    else:
        mat = np.asarray(generator, dtype=np.complex128)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DimensionMismatchError(f"generator must be square, got shape {mat.shape}")
    _check_finite(mat, "generator")
    if cutoff is None:
        cutoff = mat.shape[0]
        modes = 1
    unitary = False
    if _is_hermitian(mat, HERMITIAN_TOL):
        w, v = np.linalg.eigh(mat)
        out = (v * np.exp(w)) @ v.conj().T
    elif _is_hermitian(1j * mat, HERMITIAN_TOL):
        # A = -iH with H Hermitian; exp(A) is unitary.
        w, v = np.linalg.eigh(1j * mat)
        out = (v * np.exp(-1j * w)) @ v.conj().T
        unitary = True
    else:
        out = _scipy_expm(mat)
    if not np.all(np.isfinite(out)):
        raise NumericError("matrix exponential overflowed")
    return DenseOperator(out, cutoff, modes, unitary)


# ---------------------------------------------------------------------------
# Expectations


def _as_matrix(op):
    return op.data if isinstance(op, DenseOperator) else np.asarray(op, dtype=np.complex128)


def expectation(op, state):
    """<A> for a FockVector or DensityOperator state."""
    mat = _as_matrix(op)
    if isinstance(state, FockVector):
        val = np.vdot(state.data, mat @ state.data)
        nrm = np.vdot(state.data, state.data).real
    elif isinstance(state, DensityOperator):
        val = np.trace(mat @ state.data)
        nrm = state.trace().real
    else:
        raise TypeError(f"unsupported state type {type(state).__name__}")
    if nrm < NORM_TOL:
        raise DegenerateProjectionError("expectation of a numerically null state")
    return complex(val / nrm)


def variance(op, state):
    mat = _as_matrix(op)
    mean = expectation(mat, state).real
    second = expectation(mat @ mat, state).real
    return second - mean ** 2


def fidelity(a, b):
    """Uhlmann fidelity; |<a|b>|^2 for pure pairs, <psi|rho|psi> for mixed.

    Inputs are normalized internally, so unnormalized projections compare by
    direction only.
    """
    if isinstance(a, DensityOperator) and isinstance(b, FockVector):
        a, b = b, a
    if isinstance(a, FockVector) and isinstance(b, DensityOperator):
        _check_same_space(a, b)
        psi = a.normalized().data
        rho = b.normalized().data
        return float(np.real(np.vdot(psi, rho @ psi)))
    if isinstance(a, FockVector) and isinstance(b, FockVector):
        _check_same_space(a, b)
        return float(abs(np.vdot(a.normalized().data, b.normalized().data)) ** 2)
    if isinstance(a, DensityOperator) and isinstance(b, DensityOperator):
        _check_same_space(a, b)
        rho = a.normalized().data
        sigma = b.normalized().data
        w, v = np.linalg.eigh(rho)
        root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
        inner = np.linalg.eigvalsh(root @ sigma @ root)
        return float(np.sum(np.sqrt(np.clip(inner, 0.0, None))) ** 2)
    raise TypeError("fidelity supports pure and density operands")


def partial_trace(rho, keep):
    """Reduced density operator over the modes listed in `keep` (sorted)."""
    if isinstance(rho, FockVector):
        rho = rho.density()
    if not isinstance(rho, DensityOperator):
        raise TypeError(f"unsupported state type {type(rho).__name__}")
    keep = tuple(sorted(keep))
    if not keep or any(m < 0 or m >= rho.modes for m in keep):
        raise ConfigurationError(f"keep={keep} invalid for {rho.modes} modes")
    d, modes = rho.cutoff, rho.modes
    tensor = rho.data.reshape((d,) * (2 * modes))
    for m in reversed(range(modes)):
        if m not in keep:
            tensor = np.trace(tensor, axis1=m, axis2=m + (tensor.ndim // 2))
    dim = d ** len(keep)
    return DensityOperator(tensor.reshape(dim, dim), d, len(keep))


# ---------------------------------------------------------------------------
# Low-energy block


def low_block_size(cutoff):
    """Number of leading per-mode levels trusted by truncation-aware checks."""
    return (2 * cutoff) // 3


def low_block_indices(cutoff, modes=1, block=None):
    if block is None:
        block = low_block_size(cutoff)
    idx = np.arange(cutoff ** modes)
    keep = np.ones_like(idx, dtype=bool)
    rem = idx
    for _ in range(modes):
        keep &= (rem % cutoff) < block
        rem = rem // cutoff
    return idx[keep]


def low_block(mat, cutoff, modes=1, block=None):
    """Submatrix of `mat` on the low-energy block (every mode below `block`)."""
    arr = _as_matrix(mat)
    idx = low_block_indices(cutoff, modes, block)
    return arr[np.ix_(idx, idx)]


def low_block_max_error(a, b, cutoff, modes=1, block=None):
    return float(np.max(np.abs(low_block(a, cutoff, modes, block) - low_block(b, cutoff, modes, block))))


# ---------------------------------------------------------------------------
# Phase space


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """Wigner samples W(x, p) on a uniform rectangular grid.

    values[i, j] corresponds to (xs[i], ps[j]).
    """

    xs: np.ndarray
    ps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "xs", np.asarray(self.xs, dtype=float))
        object.__setattr__(self, "ps", np.asarray(self.ps, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.shape != (self.xs.size, self.ps.size):
            raise DimensionMismatchError("wigner grid shape mismatch")

    def integral(self):
        dx = self.xs[1] - self.xs[0] if self.xs.size > 1 else 1.0
        dp = self.ps[1] - self.ps[0] if self.ps.size > 1 else 1.0
        return float(np.sum(self.values) * dx * dp)


def _displacement_batch(alphas, cutoff):
    """Matrices exp(alpha a^dag - alpha* a) for a 1-D array of alphas.

    Uses D(alpha) = R(theta) exp(-i sqrt(2)|alpha| p) R(-theta), which equals
    the matrix exponential of the truncated generator exactly (truncation
    commutes with number rotations).
    """
    alphas = np.asarray(alphas, dtype=np.complex128).ravel()
    w, v = np.linalg.eigh(quadrature_p(cutoff))
    phases = np.exp(-1j * np.sqrt(2.0) * np.outer(np.abs(alphas), w))
    core = np.einsum("ij,kj,lj->kil", v, phases, v.conj(), optimize=True)
    n = np.arange(cutoff)
    theta = np.angle(alphas)
    rot = np.exp(1j * np.outer(theta, n))
    return rot[:, :, None] * core * rot.conj()[:, None, :]


def wigner(state, xs, ps):
    """Wigner function from displaced parity: W = <D(beta) P D(beta)^dag>/pi
    with beta = (x + i p)/sqrt(2) and P the photon-number parity."""
    if isinstance(state, FockVector):
        vec = state.normalized().data
        rho = None
    elif isinstance(state, DensityOperator):
        rho = state.normalized().data
        vec = None
    else:
        raise TypeError("wigner expects a FockVector or DensityOperator")
    if state.modes != 1:
        raise DimensionMismatchError("wigner is defined for single-mode states")
    cutoff = state.cutoff
    xs = np.asarray(xs, dtype=float)
    ps = np.asarray(ps, dtype=float)
    parity = (-1.0) ** np.arange(cutoff)
    betas = (xs[:, None] + 1j * ps[None, :]).ravel() / np.sqrt(2.0)
    vals = np.empty(betas.size, dtype=float)
    # Process in chunks to bound the memory of the batched displacements.
    chunk = 512
    for start in range(0, betas.size, chunk):
        dmats = _displacement_batch(-betas[start:start + chunk], cutoff)
        if vec is not None:
            disp = np.einsum("kij,j->ki", dmats, vec, optimize=True)
            vals[start:start + chunk] = np.einsum(
                "ki,i,ki->k", disp.conj(), parity, disp, optimize=True
            ).real
        else:
            left = np.einsum("kij,jl->kil", dmats, rho, optimize=True)
            vals[start:start + chunk] = np.einsum(
                "kil,i,kil->k", left, parity, dmats.conj(), optimize=True
            ).real
    return PhaseSpaceGrid(xs, ps, vals.reshape(xs.size, ps.size) / np.pi)

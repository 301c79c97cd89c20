"""Monte-Carlo virtual projection via Hadamard tests.

A smeared projector is consumed as a sampling form ``P = c * sum_l p_l U_l``
with ``p_l`` a probability distribution and the dropped constant ``c``
carried alongside.  Each trajectory draws a stabilizer pair (l, l'), runs
the single-ancilla interference circuit (exactly, or with a finite shot
budget), and contributes an unbiased sample of the numerator and
denominator of the post-selected expectation value.  A two-ancilla variant
virtually entangles separable states.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import analytics, fock, gates, projectors
from .errors import (
    ConfigurationError,
    DimensionMismatchError,
    NumericError,
    StructureError,
    UnstableDenominatorError,
)
from .fock import DenseOperator, FockVector

DISTRIBUTION_TOL = 1e-12
_BATCH_CHUNK = 2048


class SamplingMode(str, enum.Enum):
    EXACT_EXPECTATION = "ExactExpectation"
    SHOT_SAMPLED = "ShotSampled"


# ---------------------------------------------------------------------------
# Sampling decompositions


def _normalize_weights(weights):
    """Split complex term weights into (probabilities, unit phases, constant)."""
    weights = np.asarray(weights, dtype=np.complex128).ravel()
    mags = np.abs(weights)
    constant = float(mags.sum())
    if not constant > 0.0:
        raise ConfigurationError("decomposition weights must not all vanish")
    probs = mags / constant
    if abs(float(probs.sum()) - 1.0) > DISTRIBUTION_TOL:
        raise ConfigurationError("sampling distribution failed to normalize")
    phases = np.where(mags > 0.0, weights / np.where(mags > 0.0, mags, 1.0), 1.0)
    return probs, phases, constant


def _draw(cumulative, rng):
    idx = int(np.searchsorted(cumulative, rng.random(), side="right"))
    return min(idx, cumulative.size - 1)


class TermDecomposition:
    """Explicit product-form terms: U_l = factors[0][l] (x) ... (x) factors[m-1][l].

    Weight phases are folded into the first mode's factors so the sampled
    unitaries absorb them and the carried constant stays real positive.
    """

    separable = True

    def __init__(self, factors, weights, cutoff):
        factors = tuple(np.asarray(f, dtype=np.complex128) for f in factors)
        if len(factors) not in (1, 2):
            raise ConfigurationError("term decompositions support 1 or 2 modes")
        probs, phases, constant = _normalize_weights(weights)
        n = probs.size
        d = int(cutoff)
        for f in factors:
            if f.shape != (n, d, d):
                raise DimensionMismatchError(
                    f"factor stack shape {f.shape} does not match "
                    f"{n} terms at cutoff {d}")
        self.cutoff = d
        self.modes = len(factors)
        self.probabilities = probs
        self.constant = constant
        self.factors = (factors[0] * phases[:, None, None],) + factors[1:]
        self._cumulative = np.cumsum(probs)

    @property
    def term_count(self):
        return self.probabilities.size

    def sample(self, rng):
        return _draw(self._cumulative, rng)

    def unitary(self, label):
        mats = [f[label] for f in self.factors]
        out = mats[0]
        for m in mats[1:]:
            out = np.kron(out, m)
        return out

    def subsystem_branch(self, label, mode, vec):
        return self.factors[mode][label] @ vec

    def branch(self, label, vec):
        if self.modes == 1:
            return self.factors[0][label] @ vec
        return self.factors[0][label] @ vec @ self.factors[1][label].T

    def branch_batch(self, labels, vec):
        idx = np.asarray(labels, dtype=int)
        uniq, inverse = np.unique(idx, return_inverse=True)
        if self.modes == 1:
            outs = np.einsum("kij,j->ki", self.factors[0][uniq], vec,
                             optimize=True)
        else:
            outs = np.einsum("kij,jl,kml->kim", self.factors[0][uniq], vec,
                             self.factors[1][uniq], optimize=True)
        return outs[inverse]

    def subsystem_branch_batch(self, labels, mode, vec):
        idx = np.asarray(labels, dtype=int)
        uniq, inverse = np.unique(idx, return_inverse=True)
        outs = np.einsum("kij,j->ki", self.factors[mode][uniq], vec,
                         optimize=True)
        return outs[inverse]


class PairGridDecomposition:
    """Two-mode grid sum in factored form: term (i, j) = (A_i C_j) (x) (E_i B_j).

    The two grid indices are independent under the sampling distribution, so
    a pair draw is two one-dimensional draws.
    """

    separable = True

    def __init__(self, proj, cutoff):
        if proj.modes != 2:
            raise ConfigurationError("pair-grid form needs a two-mode projector")
        (w1, a, e), (w2, c, b) = projectors._pair_sums(proj, cutoff)
        p1, _, c1 = _normalize_weights(w1)
        p2, _, c2 = _normalize_weights(w2)
        self.cutoff = int(cutoff)
        self.modes = 2
        self.kind = proj.kind
        self.probabilities = np.outer(p1, p2).ravel()
        self.constant = c1 * c2
        self._cum1 = np.cumsum(p1)
        self._cum2 = np.cumsum(p2)
        self._a, self._e, self._c, self._b = a, e, c, b

    @property
    def term_count(self):
        return self._cum1.size * self._cum2.size

    def sample(self, rng):
        return (_draw(self._cum1, rng), _draw(self._cum2, rng))

    def unitary(self, label):
        i, j = label
        return np.kron(self._a[i] @ self._c[j], self._e[i] @ self._b[j])

    def subsystem_branch(self, label, mode, vec):
        i, j = label
        if mode == 0:
            return self._a[i] @ (self._c[j] @ vec)
        return self._e[i] @ (self._b[j] @ vec)

    def branch(self, label, vec):
        i, j = label
        return self._a[i] @ (self._c[j] @ vec @ self._b[j].T) @ self._e[i].T

    def branch_batch(self, labels, vec):
        out = np.empty((len(labels),) + vec.shape, dtype=np.complex128)
        cache = {}
        for t, (i, j) in enumerate(labels):
            mid = cache.get(j)
            if mid is None:
                mid = self._c[j] @ vec @ self._b[j].T
                cache[j] = mid
            out[t] = self._a[i] @ mid @ self._e[i].T
        return out

    def subsystem_branch_batch(self, labels, mode, vec):
        first = self._c if mode == 0 else self._b
        second = self._a if mode == 0 else self._e
        ii = np.fromiter((lab[0] for lab in labels), dtype=int, count=len(labels))
        jj = np.fromiter((lab[1] for lab in labels), dtype=int, count=len(labels))
        uj, inv = np.unique(jj, return_inverse=True)
        mids = np.einsum("kij,j->ki", first[uj], vec, optimize=True)[inv]
        out = np.empty((len(labels), vec.size), dtype=np.complex128)
        for start in range(0, len(labels), _BATCH_CHUNK):
            stop = start + _BATCH_CHUNK
            out[start:stop] = np.einsum(
                "tij,tj->ti", second[ii[start:stop]], mids[start:stop],
                optimize=True)
        return out


class GaussianCpsDecomposition:
    """Continuous stabilizer family exp(-i x0 (p - eta x^2)), x0 ~ N(0, 1/(2 gamma)).

    The Gaussian weight is already a unit-mass density, so the carried
    constant is exactly 1.
    """

    separable = False
    modes = 1
    constant = 1.0

    def __init__(self, gamma, eta, cutoff):
        if gamma <= 0:
            raise ConfigurationError(f"gamma must be positive, got {gamma!r}")
        self.gamma = float(gamma)
        self.eta = float(eta)
        self.cutoff = int(cutoff)
        self.sigma = 1.0 / math.sqrt(2.0 * gamma)
        a = fock.build_ladder(cutoff)
        k = 1j * (a @ a - a.conj().T @ a.conj().T) / 2.0
        self._kw, self._kv = np.linalg.eigh(k)
        self._pw, self._pv = np.linalg.eigh(fock.quadrature_p(cutoff))
        self._levels = np.arange(cutoff)

    def sample(self, rng):
        return float(rng.normal(0.0, self.sigma))

    def unitary(self, x0):
        fact = projectors.cps_stabilizer_factorization(x0, self.eta)
        return projectors.compose_factorization(fact, self.cutoff).data

    def branch(self, x0, vec):
        return self.branch_batch(np.asarray([x0]), vec)[0]

    @staticmethod
    def _rotate(rows, basis, coefs, spectrum):
        tmp = rows @ basis.conj()
        tmp *= np.exp(1j * np.outer(coefs, spectrum))
        return tmp @ basis.T

    def branch_batch(self, x0s, vec):
        x = np.asarray(x0s, dtype=float).ravel()
        eta = self.eta
        n = self._levels
        s = np.hypot(1.0, eta * x)
        out = np.exp(1j * np.outer(np.arctan(s + eta * x), n)) * vec[None, :]
        out = self._rotate(out, self._kv, -np.log(s + eta * x), self._kw)
        out *= np.exp(-1j * np.outer(np.arctan(s - eta * x), n))
        alphas = (x + 1j * eta * x * x) / projectors.SQRT2
        ang = np.angle(alphas)
        out *= np.exp(-1j * np.outer(ang, n))
        out = self._rotate(out, self._pv, -projectors.SQRT2 * np.abs(alphas),
                           self._pw)
        out *= np.exp(1j * np.outer(ang, n))
        theta = 0.5 * np.arctan(eta * x) - eta * x ** 3 / 6.0
        out *= np.exp(1j * theta)[:, None]
        return out


def identity_decomposition(cutoff, modes=1):
    eye = np.eye(cutoff, dtype=np.complex128)[None]
    return TermDecomposition((eye,) * modes, np.ones(1), cutoff)


def grid_decomposition(proj, cutoff):
    """Sampling form of a smeared projector's term sum at the given cutoff."""
    if proj.modes == 1:
        scales, stack = projectors._one_mode_stack(proj, cutoff)
        return TermDecomposition((stack,), scales, cutoff)
    return PairGridDecomposition(proj, cutoff)


def bell_projector_decomposition():
    """Qubit Bell projector |Phi+><Phi+| = (II + XX + (iY)(x)(iY) + ZZ)/4."""
    eye = np.eye(2, dtype=np.complex128)
    sx = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
    iy = np.array([[0.0, 1.0], [-1.0, 0.0]], dtype=np.complex128)
    sz = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=np.complex128)
    stack = np.stack([eye, sx, iy, sz])
    return TermDecomposition((stack, stack), np.full(4, 0.25), 2)


# ---------------------------------------------------------------------------
# Pair sampling


@dataclass(frozen=True)
class StabilizerPair:
    """One sampled pair; `composed` is U_{l'} U_l^dag, the controlled unitary."""

    l: object
    l_prime: object
    u: np.ndarray
    u_prime: np.ndarray
    composed: np.ndarray


def sample_stabilizer_pair(decomposition, rng):
    l = decomposition.sample(rng)
    l_prime = decomposition.sample(rng)
    u = decomposition.unitary(l)
    u_prime = decomposition.unitary(l_prime)
    return StabilizerPair(l, l_prime, u, u_prime, u_prime @ u.conj().T)


# ---------------------------------------------------------------------------
# Plans


@dataclass(frozen=True, eq=False)
class VqedPlan:
    """One virtual-projection experiment: state, insertions, readout."""

    state: FockVector
    insertions: tuple
    observable: object
    trajectories: int
    seed: int
    mode: SamplingMode = SamplingMode.EXACT_EXPECTATION
    shots: int | None = None
    processes: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", SamplingMode(self.mode))
        object.__setattr__(self, "insertions", tuple(self.insertions))
        if not isinstance(self.state, FockVector):
            raise ConfigurationError("plan state must be a FockVector")
        object.__setattr__(self, "state", self.state.normalized())
        if not self.insertions:
            raise ConfigurationError("plan needs at least one insertion point")
        if self.trajectories < 1:
            raise ConfigurationError("sample count must be >= 1")
        for ins in self.insertions:
            if ins.modes != self.state.modes or ins.cutoff != self.state.cutoff:
                raise DimensionMismatchError(
                    "insertion decomposition does not act on the plan state")
            probs = getattr(ins, "probabilities", None)
            if probs is not None and abs(float(probs.sum()) - 1.0) > DISTRIBUTION_TOL:
                raise ConfigurationError("insertion distribution must sum to 1")
        mat = observable_matrix(self.observable)
        if mat.shape != (self.state.dim, self.state.dim):
            raise DimensionMismatchError(
                f"observable shape {mat.shape} does not match state dim "
                f"{self.state.dim}")
        if self.mode is SamplingMode.SHOT_SAMPLED:
            if self.shots is None or int(self.shots) < 2:
                raise ConfigurationError("shot mode needs shots >= 2 per trajectory")
            if len(self.insertions) != 1:
                raise ConfigurationError("shot mode supports a single insertion point")
            object.__setattr__(self, "shots", int(self.shots))
        if self.processes is not None:
            procs = tuple(self.processes)
            if len(procs) != len(self.insertions) + 1:
                raise ConfigurationError(
                    "processes must have one entry per segment "
                    "(len(insertions) + 1)")
            for proc in procs:
                if proc is None:
                    continue
                pmat = observable_matrix(proc)
                if pmat.shape != (self.state.dim, self.state.dim):
                    raise DimensionMismatchError("process does not act on the state")
            object.__setattr__(self, "processes", procs)

    @property
    def constant(self):
        out = 1.0
        for ins in self.insertions:
            out *= ins.constant
        return out


def observable_matrix(op):
    if isinstance(op, DenseOperator):
        return op.data
    return np.asarray(op, dtype=np.complex128)


@dataclass(frozen=True)
class EstimatorReport:
    """Trajectory means and the jackknife ratio estimate ratio = Re num / Re den."""

    num_mean: complex
    den_mean: complex
    num_se: float
    den_se: float
    ratio: float
    ratio_se: float
    trajectories: int
    seed: int
    constant: float

    @property
    def probability(self):
        """Projection-probability estimate constant^2 * Re<mu_den>."""
        return self.constant ** 2 * self.den_mean.real

    def to_json(self):
        return {
            "num_mean": [self.num_mean.real, self.num_mean.imag],
            "den_mean": [self.den_mean.real, self.den_mean.imag],
            "num_se": self.num_se,
            "den_se": self.den_se,
            "ratio": self.ratio,
            "ratio_se": self.ratio_se,
            "trajectories": self.trajectories,
            "seed": self.seed,
            "constant": self.constant,
            "probability": self.probability,
        }


# ---------------------------------------------------------------------------
# Trajectory circuits


def _apply_square(mat, vec):
    if vec.ndim == 1:
        return mat @ vec
    return (mat @ vec.ravel()).reshape(vec.shape)


def _state_array(state):
    return state.data if state.modes == 1 else state.reshaped()


def _branches(plan, labels):
    """Unprimed and primed interference branches (b = U_l path, a = U_l')."""
    if len(labels) != len(plan.insertions):
        raise ConfigurationError("one (l, l') pair per insertion point required")
    vec = _state_array(plan.state)
    procs = plan.processes or (None,) * (len(plan.insertions) + 1)
    a = b = vec
    for k, ins in enumerate(plan.insertions):
        if procs[k] is not None:
            pmat = observable_matrix(procs[k])
            a = _apply_square(pmat, a)
            b = _apply_square(pmat, b)
        l, l_prime = labels[k]
        b = ins.branch(l, b)
        a = ins.branch(l_prime, a)
    if procs[-1] is not None:
        pmat = observable_matrix(procs[-1])
        a = _apply_square(pmat, a)
        b = _apply_square(pmat, b)
    return a, b


def _shot_readout(a, b, evals, basis, shots, rng):
    """Sampled ancilla X/Y readings joint with a projective observable draw."""
    ax = basis.conj().T @ a.ravel()
    bx = basis.conj().T @ b.ravel()
    n_x = shots // 2
    n_y = shots - n_x
    # X half samples the branches (a +/- b)/2; Y half (a -/+ i b)/2.
    out_den = 0.0 + 0.0j
    out_num = 0.0 + 0.0j
    for factor, count in ((1.0, n_x), (-1.0j, n_y)):
        plus = (ax + factor * bx) / 2.0
        minus = (ax - factor * bx) / 2.0
        pmf = np.concatenate((np.abs(plus) ** 2, np.abs(minus) ** 2))
        pmf = pmf / pmf.sum()
        draws = rng.choice(pmf.size, size=count, p=pmf)
        signs = np.where(draws < evals.size, 1.0, -1.0)
        vals = evals[draws % evals.size]
        unit = 1.0 if factor == 1.0 else 1.0j
        out_den += unit * signs.mean()
        out_num += unit * (signs * vals).mean()
    return out_den, out_num


def hadamard_test_trajectory(plan, labels, rng=None):
    """One trajectory's (mu_den, mu_num); labels is one (l, l') per insertion."""
    a, b = _branches(plan, labels)
    mat = observable_matrix(plan.observable)
    if plan.mode is SamplingMode.EXACT_EXPECTATION:
        mu_den = complex(np.vdot(a, b))
        mu_num = complex(np.vdot(a, _apply_square(mat, b)))
        return mu_den, mu_num
    if rng is None:
        raise ConfigurationError("shot-sampled trajectories need an rng")
    evals, basis = np.linalg.eigh(mat)
    return _shot_readout(a, b, evals, basis, plan.shots, rng)


def _jackknife_ratio(num_re, den_re):
    total_num = num_re.sum()
    total_den = den_re.sum()
    count = num_re.size
    if count == 1:
        return 0.0
    loo_den = total_den - den_re
    if np.any(loo_den == 0.0):
        raise UnstableDenominatorError(
            "leave-one-out denominator vanished; sampling overhead too large")
    loo = (total_num - num_re) / loo_den
    return float(np.sqrt((count - 1) / count * ((loo - loo.mean()) ** 2).sum()))


def _finalize(mu_num, mu_den, trajectories, seed, constant):
    num_mean = complex(mu_num.mean())
    den_mean = complex(mu_den.mean())
    if trajectories > 1:
        scale = 1.0 / math.sqrt(trajectories)
        num_se = float(mu_num.real.std(ddof=1)) * scale
        den_se = float(mu_den.real.std(ddof=1)) * scale
        imag_se = float(mu_den.imag.std(ddof=1)) * scale
    else:
        num_se = den_se = imag_se = 0.0
    if abs(den_mean.imag) > 8.0 * imag_se + 1e-9:
        raise NumericError(
            f"denominator imaginary part {den_mean.imag:.3e} fails to vanish; "
            "the decomposition does not represent a Hermitian projector")
    if abs(den_mean.real) < 5.0 * den_se or den_mean.real == 0.0:
        raise UnstableDenominatorError(
            f"denominator mean {den_mean.real:.3e} is within 5 standard errors "
            f"({den_se:.3e}) of zero; sampling overhead has blown up")
    ratio = float(num_mean.real / den_mean.real)
    ratio_se = _jackknife_ratio(mu_num.real, mu_den.real)
    return EstimatorReport(num_mean, den_mean, num_se, den_se, ratio, ratio_se,
                           trajectories, seed, constant)


def _batched_exact(plan, labels_all):
    ins = plan.insertions[0]
    vec = _state_array(plan.state)
    unprimed = [pairs[0][0] for pairs in labels_all]
    primed = [pairs[0][1] for pairs in labels_all]
    b = ins.branch_batch(unprimed, vec)
    a = ins.branch_batch(primed, vec)
    count = len(labels_all)
    bf = b.reshape(count, -1)
    af = a.reshape(count, -1)
    mat = observable_matrix(plan.observable)
    mu_den = np.einsum("ti,ti->t", af.conj(), bf, optimize=True)
    mu_num = np.einsum("ti,ti->t", af.conj(), bf @ mat.T, optimize=True)
    return mu_num, mu_den


def vqed_estimate(plan):
    """Run the trajectory loop and form the post-selected ratio estimate."""
    count = plan.trajectories
    use_batch = (plan.mode is SamplingMode.EXACT_EXPECTATION
                 and len(plan.insertions) == 1 and plan.processes is None)
    labels_all = []
    mu_num = np.empty(count, dtype=np.complex128)
    mu_den = np.empty(count, dtype=np.complex128)
    basis = None
    if plan.mode is SamplingMode.SHOT_SAMPLED:
        evals, basis = np.linalg.eigh(observable_matrix(plan.observable))
    for t in range(count):
        rng = np.random.default_rng((plan.seed, t))
        labels = tuple((ins.sample(rng), ins.sample(rng))
                       for ins in plan.insertions)
        if use_batch:
            labels_all.append(labels)
        elif basis is not None:
            a, b = _branches(plan, labels)
            mu_den[t], mu_num[t] = _shot_readout(a, b, evals, basis,
                                                 plan.shots, rng)
        else:
            mu_den[t], mu_num[t] = hadamard_test_trajectory(plan, labels)
    if use_batch:
        mu_num, mu_den = _batched_exact(plan, labels_all)
    return _finalize(mu_num, mu_den, count, plan.seed, plan.constant)


# ---------------------------------------------------------------------------
# Virtual entanglement (one ancilla per subsystem)


def _check_separable(decomposition):
    if decomposition.modes != 2 or not getattr(decomposition, "separable", False):
        raise StructureError(
            "virtual entanglement needs a two-mode decomposition whose terms "
            "are tensor products of per-subsystem unitaries")


def _virtual_exact(dec, vec_a, vec_b, mat, labels_all):
    unprimed = [lab[0] for lab in labels_all]
    primed = [lab[1] for lab in labels_all]
    branches = {}
    for name, labs, vec, mode in (("ba", unprimed, vec_a, 0),
                                  ("aa", primed, vec_a, 0),
                                  ("bb", unprimed, vec_b, 1),
                                  ("ab", primed, vec_b, 1)):
        branches[name] = dec.subsystem_branch_batch(labs, mode, vec)
    count = len(labels_all)
    mu_den = (np.einsum("ti,ti->t", branches["aa"].conj(), branches["ba"])
              * np.einsum("ti,ti->t", branches["ab"].conj(), branches["bb"]))
    mu_num = np.empty(count, dtype=np.complex128)
    for start in range(0, count, _BATCH_CHUNK):
        stop = start + _BATCH_CHUNK
        joint_b = np.einsum("ti,tj->tij", branches["ba"][start:stop],
                            branches["bb"][start:stop]).reshape(
                                min(stop, count) - start, -1)
        joint_a = np.einsum("ti,tj->tij", branches["aa"][start:stop],
                            branches["ab"][start:stop]).reshape(
                                min(stop, count) - start, -1)
        mu_num[start:stop] = np.einsum("tk,tk->t", joint_a.conj(),
                                       joint_b @ mat.T, optimize=True)
    return mu_num, mu_den


def _virtual_shot(dec, vec_a, vec_b, evals, basis, label, shots, rng):
    l, l_prime = label
    b_a = dec.subsystem_branch(l, 0, vec_a)
    a_a = dec.subsystem_branch(l_prime, 0, vec_a)
    b_b = dec.subsystem_branch(l, 1, vec_b)
    a_b = dec.subsystem_branch(l_prime, 1, vec_b)
    n_x = shots // 2
    n_y = shots - n_x
    out_den = 0.0 + 0.0j
    out_num = 0.0 + 0.0j
    # XX half uses branch combinations (a + s b); YY half (a - i s b).
    for factor, count, orient in ((1.0, n_x, 1.0), (-1.0j, n_y, -1.0)):
        combos = []
        signs = []
        for s_a in (1.0, -1.0):
            left = a_a + factor * s_a * b_a
            for s_b in (1.0, -1.0):
                right = a_b + factor * s_b * b_b
                combos.append(basis.conj().T @ (np.kron(left, right) / 4.0))
                signs.append(s_a * s_b)
        pmf = (np.abs(np.stack(combos)) ** 2).ravel()
        pmf = pmf / pmf.sum()
        draws = rng.choice(pmf.size, size=count, p=pmf)
        ss = np.asarray(signs)[draws // evals.size]
        vals = evals[draws % evals.size]
        out_den += orient * ss.mean()
        out_num += orient * (ss * vals).mean()
    return out_den, out_num


def virtual_entangle_estimate(state_a, state_b, decomposition, observable, *,
                              trajectories, seed,
                              mode=SamplingMode.EXACT_EXPECTATION, shots=None):
    """Virtually project two separable single-mode states onto an entangled one.

    Each subsystem gets its own ancilla; combining the X(x)X and Y(x)Y
    readings reproduces Re <a_A (x) a_B| M |b_A (x) b_B> per trajectory, so
    the trajectory mean matches Tr[M P (rho_A (x) rho_B) P^dag] divided by
    the squared carried constant.
    """
    mode = SamplingMode(mode)
    _check_separable(decomposition)
    for state in (state_a, state_b):
        if not isinstance(state, FockVector) or state.modes != 1:
            raise ConfigurationError(
                "virtual entanglement expects single-mode FockVector inputs")
        if state.cutoff != decomposition.cutoff:
            raise DimensionMismatchError("state cutoff does not match decomposition")
    if trajectories < 1:
        raise ConfigurationError("sample count must be >= 1")
    vec_a = state_a.normalized().data
    vec_b = state_b.normalized().data
    mat = observable_matrix(observable)
    dim = decomposition.cutoff ** 2
    if mat.shape != (dim, dim):
        raise DimensionMismatchError(
            f"observable shape {mat.shape} does not match joint dim {dim}")
    count = int(trajectories)
    labels_all = []
    mu_num = np.empty(count, dtype=np.complex128)
    mu_den = np.empty(count, dtype=np.complex128)
    basis = None
    if mode is SamplingMode.SHOT_SAMPLED:
        if shots is None or int(shots) < 2:
            raise ConfigurationError("shot mode needs shots >= 2 per trajectory")
        evals, basis = np.linalg.eigh(mat)
    for t in range(count):
        rng = np.random.default_rng((seed, t))
        label = (decomposition.sample(rng), decomposition.sample(rng))
        if basis is None:
            labels_all.append(label)
        else:
            mu_den[t], mu_num[t] = _virtual_shot(
                decomposition, vec_a, vec_b, evals, basis, label,
                int(shots), rng)
    if basis is None:
        mu_num, mu_den = _virtual_exact(decomposition, vec_a, vec_b, mat,
                                        labels_all)
    return _finalize(mu_num, mu_den, count, seed, decomposition.constant)


# ---------------------------------------------------------------------------
# Convenience plans and overhead diagnostics


def cps_plan(r, delta_r, eta, *, cutoff, trajectories, seed, observable=None,
             mode=SamplingMode.EXACT_EXPECTATION, shots=None):
    """Plan projecting extra squeezing Delta_r onto the CPS resource at r."""
    gamma = projectors.gamma_from_delta_r(delta_r, r)
    state, _ = gates.build_resource_state(
        gates.ResourceStateSpec(gates.ResourceStateKind.CPS, r=r, eta=eta),
        cutoff)
    if observable is None:
        nul = analytics.nullifier_matrices(
            analytics.NullifierSpec(analytics.NullifierKind.CPS_PARABOLA,
                                    eta=eta), cutoff)[0]
        observable = nul @ nul
    decomposition = GaussianCpsDecomposition(gamma, eta, cutoff)
    return VqedPlan(state, (decomposition,), observable, trajectories, seed,
                    mode=mode, shots=shots)


def variance_slope(qs, variances):
    """Log-log slope of estimator variance against projection strength q."""
    qs = np.asarray(qs, dtype=float)
    variances = np.asarray(variances, dtype=float)
    if qs.size != variances.size or qs.size < 2:
        raise ConfigurationError("slope needs at least two (q, variance) pairs")
    if np.any(qs <= 0) or np.any(variances <= 0):
        raise ConfigurationError("slope inputs must be positive")
    return float(np.polyfit(np.log(qs), np.log(variances), 1)[0])

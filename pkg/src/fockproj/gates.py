"""Gaussian and cubic-phase gates plus the resource states they prepare."""

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import fock
from .errors import ConfigurationError, DimensionMismatchError, TruncationError
from .fock import DenseOperator, FockVector, matrix_exponential

# Pre-renormalization norm below this raises a cutoff-too-small error.
TRUNCATION_NORM_TOL = 1e-6


class GateKind(str, enum.Enum):
    DISPLACEMENT = "Displacement"
    SQUEEZE = "Squeeze"
    PHASE_SHIFT = "PhaseShift"
    CUBIC_PHASE = "CubicPhase"
    BEAM_SPLITTER_5050 = "BeamSplitter5050"
    CZ = "CZ"
    CZ_PRIME = "CZprime"


_TWO_MODE = {GateKind.BEAM_SPLITTER_5050, GateKind.CZ, GateKind.CZ_PRIME}


@dataclass(frozen=True)
class GateSpec:
    """Declarative gate description; `targets` index modes of the register."""

    kind: GateKind
    alpha: complex = 0.0
    r: float = 0.0
    phi: float = 0.0
    eta: float = 0.0
    g: float = 1.0
    targets: tuple = (0,)

    def __post_init__(self):
        kind = GateKind(self.kind)
        object.__setattr__(self, "kind", kind)
        targets = tuple(int(t) for t in np.atleast_1d(self.targets))
        object.__setattr__(self, "targets", targets)
        want = 2 if kind in _TWO_MODE else 1
        if len(targets) != want or len(set(targets)) != len(targets):
            raise ConfigurationError(
                f"{kind.value} acts on {want} distinct mode(s), got targets={targets}"
            )

    def to_json(self):
        out = {"kind": self.kind.value, "targets": list(self.targets)}
        if self.kind == GateKind.DISPLACEMENT:
            a = complex(self.alpha)
            out["alpha"] = [a.real, a.imag]
        elif self.kind == GateKind.SQUEEZE:
            out["r"] = self.r
        elif self.kind == GateKind.PHASE_SHIFT:
            out["phi"] = self.phi
        elif self.kind == GateKind.CUBIC_PHASE:
            out["eta"] = self.eta
        elif self.kind in (GateKind.CZ, GateKind.CZ_PRIME):
            out["g"] = self.g
        return out

    @staticmethod
    def from_json(obj):
        try:
            kind = GateKind(obj["kind"])
        except (KeyError, ValueError) as exc:
            raise ConfigurationError(f"unknown gate kind in {obj!r}") from exc
        kwargs = {"kind": kind, "targets": tuple(obj.get("targets", (0,)))}
        if "alpha" in obj:
            re, im = obj["alpha"]
            kwargs["alpha"] = complex(re, im)
        for key in ("r", "phi", "eta", "g"):
            if key in obj:
                kwargs[key] = float(obj[key])
        return GateSpec(**kwargs)


# ---------------------------------------------------------------------------
# Generators (single-mode matrices unless stated otherwise)


def _generator(spec, cutoff):
    a = fock.build_ladder(cutoff)
    ad = a.conj().T
    kind = spec.kind
    if kind == GateKind.DISPLACEMENT:
        alpha = complex(spec.alpha)
        return alpha * ad - np.conj(alpha) * a
    if kind == GateKind.SQUEEZE:
        return spec.r * (a @ a - ad @ ad) / 2.0
    if kind == GateKind.PHASE_SHIFT:
        return 1j * spec.phi * (ad @ a)
    if kind == GateKind.CUBIC_PHASE:
        x = fock.quadrature_x(cutoff)
        return 1j * spec.eta * (x @ x @ x) / 3.0
    raise ConfigurationError(f"no single-mode generator for {kind}")


def _two_mode_generator(spec, cutoff):
    kind = spec.kind
    if kind == GateKind.BEAM_SPLITTER_5050:
        a = fock.build_ladder(cutoff)
        ad = a.conj().T
        eye = np.eye(cutoff)
        return (np.pi / 4.0) * (np.kron(a, ad) - np.kron(ad, a))
    if kind == GateKind.CZ:
        x = fock.quadrature_x(cutoff)
        return 1j * spec.g * np.kron(x, x)
    if kind == GateKind.CZ_PRIME:
        p = fock.quadrature_p(cutoff)
        return 1j * spec.g * np.kron(p, p)
    raise ConfigurationError(f"no two-mode generator for {kind}")


def build_gate(spec, cutoff, modes=None):
    """Unitary matrix of `spec` on a register of `modes` modes.

    The gate is the matrix exponential of the truncated generator, embedded
    at spec.targets by tensor products.
    """
    spec = spec if isinstance(spec, GateSpec) else GateSpec(**spec)
    if modes is None:
        modes = max(spec.targets) + 1
    if any(t >= modes for t in spec.targets):
        raise ConfigurationError(f"targets {spec.targets} exceed register of {modes} modes")
    if spec.kind in _TWO_MODE:
        block = _two_mode_generator(spec, cutoff)
        i, j = spec.targets
        if modes == 2 and (i, j) == (0, 1):
            gen = block
        else:
            gen = _embed_two_mode(block, i, j, modes, cutoff)
    else:
        block = _generator(spec, cutoff)
        (t,) = spec.targets
        gen = fock.embed_single_mode(block, t, modes, cutoff) if modes > 1 else block
    out = matrix_exponential(gen, cutoff=cutoff, modes=modes)
    return out


def _embed_two_mode(block, i, j, modes, cutoff):
    """Embed a two-mode generator acting on (i, j) into `modes` modes."""
    dim = cutoff ** modes
    tensor = block.reshape(cutoff, cutoff, cutoff, cutoff)
    full = np.zeros((dim, dim), dtype=np.complex128)
    # Build by summing kron factors of the generator's operator-Schmidt form.
    # A two-mode generator from quadrature products is a short sum already;
    # generic path: SVD across the (i out/in, j out/in) split.
    mat = tensor.transpose(0, 2, 1, 3).reshape(cutoff * cutoff, cutoff * cutoff)
    u, s, vh = np.linalg.svd(mat)
    for k in range(len(s)):
        if s[k] < 1e-14 * s[0]:
            break
        left = (u[:, k] * s[k]).reshape(cutoff, cutoff)
        right = vh[k, :].reshape(cutoff, cutoff)
        term = np.eye(1, dtype=np.complex128)
        for m in range(modes):
            if m == i:
                term = np.kron(term, left)
            elif m == j:
                term = np.kron(term, right)
            else:
                term = np.kron(term, np.eye(cutoff))
        full += term
    return full


def displacement(alpha, cutoff):
    return build_gate(GateSpec(GateKind.DISPLACEMENT, alpha=alpha), cutoff)


def squeeze(r, cutoff):
    return build_gate(GateSpec(GateKind.SQUEEZE, r=r), cutoff)


def phase_shift(phi, cutoff):
    return build_gate(GateSpec(GateKind.PHASE_SHIFT, phi=phi), cutoff)


def cubic_phase(eta, cutoff):
    return build_gate(GateSpec(GateKind.CUBIC_PHASE, eta=eta), cutoff)


def beam_splitter_5050(cutoff):
    return build_gate(GateSpec(GateKind.BEAM_SPLITTER_5050, targets=(0, 1)), cutoff)


def cz(g, cutoff):
    return build_gate(GateSpec(GateKind.CZ, g=g, targets=(0, 1)), cutoff)


def cz_prime(g, cutoff):
    return build_gate(GateSpec(GateKind.CZ_PRIME, g=g, targets=(0, 1)), cutoff)


def conjugate_quadrature(gate, quad):
    """U Q U^dag for a gate U and quadrature (or any) matrix Q."""
    u = gate.data if isinstance(gate, DenseOperator) else np.asarray(gate)
    q = quad.data if isinstance(quad, DenseOperator) else np.asarray(quad)
    if u.shape != q.shape:
        raise DimensionMismatchError(f"gate {u.shape} vs quadrature {q.shape}")
    return u @ q @ u.conj().T


# ---------------------------------------------------------------------------
# Batched gate families (exactly the per-parameter matrix exponentials)


def displacement_batch(alphas, cutoff):
    """Stack of displacement matrices, one per entry of `alphas`."""
    return fock._displacement_batch(alphas, cutoff)


def squeeze_batch(rs, cutoff):
    """Stack of squeeze matrices S(r) = exp(-i r K), K = i(a^2 - a^dag^2)/2."""
    rs = np.asarray(rs, dtype=float).ravel()
    a = fock.build_ladder(cutoff)
    k = 1j * (a @ a - a.conj().T @ a.conj().T) / 2.0
    w, v = np.linalg.eigh(k)
    phases = np.exp(-1j * np.outer(rs, w))
    return np.einsum("ij,kj,lj->kil", v, phases, v.conj(), optimize=True)


# ---------------------------------------------------------------------------
# Resource states


class ResourceStateKind(str, enum.Enum):
    SQUEEZED_VACUUM = "SqueezedVacuum"
    ANTI_SQUEEZED_VACUUM = "AntiSqueezedVacuum"
    EPR_STAR = "EPRstar"
    CLUSTER = "Cluster"
    CPS = "CPS"


@dataclass(frozen=True)
class ResourceStateSpec:
    kind: ResourceStateKind
    r: float = 0.0
    eta: float = 0.0
    g: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ResourceStateKind(self.kind))

    def to_json(self):
        out = {"kind": self.kind.value, "r": self.r}
        if self.kind == ResourceStateKind.CPS:
            out["eta"] = self.eta
        if self.kind == ResourceStateKind.CLUSTER:
            out["g"] = self.g
        return out

    @staticmethod
    def from_json(obj):
        try:
            kind = ResourceStateKind(obj["kind"])
        except (KeyError, ValueError) as exc:
            raise ConfigurationError(f"unknown resource state kind in {obj!r}") from exc
        return ResourceStateSpec(
            kind,
            r=float(obj.get("r", 0.0)),
            eta=float(obj.get("eta", 0.0)),
            g=float(obj.get("g", 1.0)),
        )


def squeezed_vacuum_amplitudes(r, cutoff):
    """Exact Fock amplitudes of S(r)|0>, truncated (no renormalization).

    c_{2k} = (-tanh r)^k sqrt((2k)!)/(2^k k!)/sqrt(cosh r); odd levels vanish.
    """
    amps = np.zeros(cutoff, dtype=np.complex128)
    c = 1.0 / math.sqrt(math.cosh(r))
    t = math.tanh(r)
    amps[0] = c
    for k in range(1, (cutoff + 1) // 2):
        c *= -t * math.sqrt((2 * k - 1) * (2 * k)) / (2.0 * k)
        amps[2 * k] = c
    return amps


def _squeezed_vacuum(r, cutoff):
    amps = squeezed_vacuum_amplitudes(r, cutoff)
    pre_norm = float(np.linalg.norm(amps))
    if pre_norm < 1.0 - TRUNCATION_NORM_TOL:
        raise TruncationError(
            f"squeezed vacuum at r={r} keeps norm {pre_norm:.8f} < 1-{TRUNCATION_NORM_TOL} "
            f"at cutoff {cutoff}; raise the cutoff"
        )
    return FockVector(amps / pre_norm, cutoff), pre_norm


def build_resource_state(spec, cutoff):
    """Build the resource state; returns (state, pre-renormalization norm).

    Squeezed factors use the exact truncated Fock expansion, so the reported
    norm measures the truncation loss; subsequent gates are the exactly
    unitary truncated exponentials and preserve it.
    """
    spec = spec if isinstance(spec, ResourceStateSpec) else ResourceStateSpec(**spec)
    kind = spec.kind
    if kind == ResourceStateKind.SQUEEZED_VACUUM:
        return _squeezed_vacuum(spec.r, cutoff)
    if kind == ResourceStateKind.ANTI_SQUEEZED_VACUUM:
        return _squeezed_vacuum(-spec.r, cutoff)
    if kind == ResourceStateKind.CPS:
        base, pre = _squeezed_vacuum(-spec.r, cutoff)
        return cubic_phase(spec.eta, cutoff) @ base, pre
    if kind == ResourceStateKind.EPR_STAR:
        plus, pre1 = _squeezed_vacuum(spec.r, cutoff)
        minus, pre2 = _squeezed_vacuum(-spec.r, cutoff)
        pair = fock.tensor_states(plus, minus)
        return beam_splitter_5050(cutoff) @ pair, pre1 * pre2
    if kind == ResourceStateKind.CLUSTER:
        one, pre = _squeezed_vacuum(-spec.r, cutoff)
        pair = fock.tensor_states(one, one)
        return cz(spec.g, cutoff) @ pair, pre * pre
    raise ConfigurationError(f"unknown resource state kind {kind!r}")

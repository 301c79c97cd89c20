import math

import numpy as np
import pytest

from fockproj import fock, gates
from fockproj.errors import ConfigurationError

CUTOFF = 24


def _unitarity_error(op):
    eye = np.eye(op.data.shape[0])
    return np.max(np.abs(op.data @ op.data.conj().T - eye))


@pytest.mark.parametrize("spec", [
    gates.GateSpec(gates.GateKind.DISPLACEMENT, alpha=0.7 - 0.2j),
    gates.GateSpec(gates.GateKind.SQUEEZE, r=0.6),
    gates.GateSpec(gates.GateKind.PHASE_SHIFT, phi=1.1),
    gates.GateSpec(gates.GateKind.CUBIC_PHASE, eta=0.15),
    gates.GateSpec(gates.GateKind.BEAM_SPLITTER_5050, targets=(0, 1)),
    gates.GateSpec(gates.GateKind.CZ, g=1.0, targets=(0, 1)),
    gates.GateSpec(gates.GateKind.CZ_PRIME, g=0.8, targets=(0, 1)),
])
def test_all_built_gates_are_unitary(spec):
    modes = 2 if spec.kind in (gates.GateKind.BEAM_SPLITTER_5050,
                               gates.GateKind.CZ, gates.GateKind.CZ_PRIME) else 1
    u = gates.build_gate(spec, 12, modes=modes)
    assert u.unitary
    assert _unitarity_error(u) < 1e-10


def test_gate_spec_json_round_trip():
    spec = gates.GateSpec(gates.GateKind.CZ_PRIME, g=0.5, targets=(0, 1))
    assert gates.GateSpec.from_json(spec.to_json()) == spec
    spec = gates.GateSpec(gates.GateKind.DISPLACEMENT, alpha=1.0 + 2.0j)
    assert gates.GateSpec.from_json(spec.to_json()) == spec


def test_displacement_moves_the_mean():
    alpha = 0.6 + 0.3j
    state = gates.displacement(alpha, 40) @ fock.vacuum(40)
    x_mean = fock.expectation(fock.quadrature_x(40), state).real
    p_mean = fock.expectation(fock.quadrature_p(40), state).real
    assert x_mean == pytest.approx(math.sqrt(2) * alpha.real, abs=1e-10)
    assert p_mean == pytest.approx(math.sqrt(2) * alpha.imag, abs=1e-10)


def test_squeeze_scales_x_variance():
    r = 0.5
    state = gates.squeeze(r, 50) @ fock.vacuum(50)
    var_x = fock.variance(fock.quadrature_x(50), state)
    var_p = fock.variance(fock.quadrature_p(50), state)
    assert var_x == pytest.approx(math.exp(-2 * r) / 2, rel=1e-8)
    assert var_p == pytest.approx(math.exp(2 * r) / 2, rel=1e-8)


def test_squeezed_vacuum_amplitudes_match_squeeze_gate():
    # truncated exponential and exact truncated expansion agree on the low
    # block; the top of the band carries the usual truncation disagreement
    amps = gates.squeezed_vacuum_amplitudes(0.4, 40)
    via_gate = (gates.squeeze(0.4, 40) @ fock.vacuum(40)).data
    block = fock.low_block_size(40)
    assert np.max(np.abs(amps[:block] - via_gate[:block])) < 1e-12
    assert np.max(np.abs(amps - via_gate)) < 1e-8
    assert np.max(np.abs(amps[1::2])) == 0.0  # odd levels vanish


def test_phase_shift_is_number_diagonal():
    u = gates.phase_shift(0.7, 10).data
    off = u - np.diag(np.diag(u))
    assert np.max(np.abs(off)) < 1e-12
    assert np.allclose(np.diag(u), np.exp(1j * 0.7 * np.arange(10)))


def test_cubic_phase_commutes_with_x():
    u = gates.cubic_phase(0.2, 30).data
    x = fock.quadrature_x(30)
    # exp(i eta x^3 / 3) is a function of x alone
    assert np.max(np.abs(u @ x - x @ u)) < 1e-9


def test_cz_prime_is_fourier_conjugate_of_cz():
    g, cutoff = 1.0, 14
    r = gates.phase_shift(math.pi / 2, cutoff).data
    rr = np.kron(r, r)
    czp = gates.cz_prime(g, cutoff).data
    cz = gates.cz(g, cutoff).data
    assert np.max(np.abs(czp - rr.conj().T @ cz @ rr)) < 1e-10


def test_cz_is_diagonal_in_x_basis_low_block():
    g, cutoff = 0.7, 40
    x = fock.quadrature_x(cutoff)
    x1 = fock.embed_single_mode(x, 0, 2)
    x2 = fock.embed_single_mode(x, 1, 2)
    want = fock.matrix_exponential(1j * g * (x1 @ x2), cutoff, 2)
    got = gates.cz(g, cutoff)
    assert fock.low_block_max_error(got.data, want.data, cutoff, 2) < 1e-10


def test_beam_splitter_preserves_total_photon_number():
    cutoff = 10
    bs = gates.beam_splitter_5050(cutoff).data
    n = fock.number_operator(cutoff)
    total = fock.embed_single_mode(n, 0, 2) + fock.embed_single_mode(n, 1, 2)
    assert np.max(np.abs(bs @ total - total @ bs)) < 1e-10


def test_resource_state_spec_json_round_trip():
    for spec in (gates.ResourceStateSpec(gates.ResourceStateKind.CPS, r=0.3, eta=0.1),
                 gates.ResourceStateSpec(gates.ResourceStateKind.CLUSTER, r=0.5, g=1.0),
                 gates.ResourceStateSpec(gates.ResourceStateKind.SQUEEZED_VACUUM, r=0.2)):
        assert gates.ResourceStateSpec.from_json(spec.to_json()) == spec
    with pytest.raises(ConfigurationError):
        gates.ResourceStateSpec.from_json({"kind": "Nope"})


def test_build_resource_states():
    sq, pre = gates.build_resource_state(
        gates.ResourceStateSpec(gates.ResourceStateKind.SQUEEZED_VACUUM, r=0.3), 40)
    assert sq.modes == 1
    assert pre == pytest.approx(1.0, abs=1e-10)
    anti, _ = gates.build_resource_state(
        gates.ResourceStateSpec(gates.ResourceStateKind.ANTI_SQUEEZED_VACUUM, r=0.3), 40)
    var_anti = fock.variance(fock.quadrature_x(40), anti)
    assert var_anti == pytest.approx(math.exp(0.6) / 2, rel=1e-8)

    cluster, _ = gates.build_resource_state(
        gates.ResourceStateSpec(gates.ResourceStateKind.CLUSTER, r=0.4, g=1.0), 16)
    assert cluster.modes == 2
    x = fock.quadrature_x(16)
    p = fock.quadrature_p(16)
    n1 = fock.embed_single_mode(p, 0, 2) - fock.embed_single_mode(x, 1, 2)
    # single cluster nullifier variance: e^{-2r}/2
    assert fock.variance(n1, cluster) == pytest.approx(math.exp(-0.8) / 2, rel=1e-3)

    cps, _ = gates.build_resource_state(
        gates.ResourceStateSpec(gates.ResourceStateKind.CPS, r=0.3, eta=0.1), 50)
    nul = fock.quadrature_p(50) - 0.1 * (fock.quadrature_x(50) @ fock.quadrature_x(50))
    assert fock.variance(nul, cps) == pytest.approx(math.exp(-0.6) / 2, rel=1e-6)


def test_epr_star_quadrature_correlations():
    epr, _ = gates.build_resource_state(
        gates.ResourceStateSpec(gates.ResourceStateKind.EPR_STAR, r=0.5), 20)
    x = fock.quadrature_x(20)
    p = fock.quadrature_p(20)
    x1, x2 = (fock.embed_single_mode(x, m, 2) for m in (0, 1))
    p1, p2 = (fock.embed_single_mode(p, m, 2) for m in (0, 1))
    assert fock.variance(x1 + x2, epr) == pytest.approx(math.exp(-1.0), rel=1e-4)
    assert fock.variance(p1 - p2, epr) == pytest.approx(math.exp(-1.0), rel=1e-4)
    assert fock.variance(x1 - x2, epr) == pytest.approx(math.exp(1.0), rel=1e-4)
    assert fock.variance(p1 + p2, epr) == pytest.approx(math.exp(1.0), rel=1e-4)

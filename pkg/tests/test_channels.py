import numpy as np
import pytest

from fockproj import channels, fock, gates
from fockproj.errors import ConfigurationError, DimensionMismatchError


@pytest.mark.parametrize("L", [0.05, 0.3, 0.7])
def test_kraus_completeness(L):
    kraus = channels.loss_kraus(channels.LossSpec(L), 30)
    total = sum(k.data.conj().T @ k.data for k in kraus)
    assert np.max(np.abs(total - np.eye(30))) < 1e-10


def test_trace_preservation_on_mixed_state():
    rng = np.random.default_rng(5)
    m = rng.normal(size=(20, 20)) + 1j * rng.normal(size=(20, 20))
    rho = fock.DensityOperator(m @ m.conj().T, 20).normalized()
    out = channels.apply_loss(rho, channels.LossSpec(0.25))
    assert abs(out.trace().real - 1.0) < 1e-10


def test_loss_attenuates_mean_photon_number():
    one = fock.basis_state(10, 1)
    out = channels.apply_loss(one, channels.LossSpec(0.3))
    n = fock.number_operator(10)
    assert fock.expectation(n, out).real == pytest.approx(0.7, abs=1e-12)
    # coherent state stays coherent with |alpha|^2 -> (1-L)|alpha|^2
    coh = gates.displacement(0.8, 30) @ fock.vacuum(30)
    out = channels.apply_loss(coh, channels.LossSpec(0.4))
    n30 = fock.number_operator(30)
    assert fock.expectation(n30, out).real == pytest.approx(0.6 * 0.64, abs=1e-10)


def test_zero_loss_is_identity():
    state = gates.displacement(0.5, 15) @ fock.vacuum(15)
    out = channels.apply_loss(state, channels.LossSpec(0.0))
    assert np.max(np.abs(out.data - state.density().data)) < 1e-14


def test_loss_on_selected_mode_only():
    one_one = fock.basis_state(8, [1, 1])
    out = channels.apply_loss(one_one, channels.LossSpec(0.5, modes=(0,)))
    n = fock.number_operator(8)
    n0 = fock.embed_single_mode(n, 0, 2)
    n1 = fock.embed_single_mode(n, 1, 2)
    assert fock.expectation(n0, out).real == pytest.approx(0.5, abs=1e-12)
    assert fock.expectation(n1, out).real == pytest.approx(1.0, abs=1e-12)


def test_truncated_kraus_order():
    spec = channels.LossSpec(0.3, n_max=2)
    kraus = channels.loss_kraus(spec, 12)
    assert len(kraus) == 3


def test_loss_spec_validation_and_json():
    with pytest.raises(ConfigurationError):
        channels.LossSpec(1.0)
    with pytest.raises(ConfigurationError):
        channels.LossSpec(-0.1)
    spec = channels.LossSpec(0.2, n_max=5, modes=(1,))
    assert channels.LossSpec.from_json(spec.to_json()) == spec


def test_loss_rejects_bad_mode_index():
    with pytest.raises(DimensionMismatchError):
        channels.apply_loss(fock.vacuum(6), channels.LossSpec(0.1, modes=(1,)))

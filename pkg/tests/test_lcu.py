import math

import numpy as np
import pytest

from fockproj import fock, gates, lcu, projectors
from fockproj.errors import ConfigurationError


def test_repetitions_formula():
    # N = e^{2r} (e^{2 dr} - 1) / (2 p0 p1 dx0^2), rounded
    dr = 0.5 * math.log(2.0)
    assert lcu.repetitions_for(0.0, dr, 0.05) == 800
    assert lcu.repetitions_for(0.0, dr, 0.05, p0=0.5) == round(
        math.expm1(2 * dr) / (2 * 0.25 * 0.0025))
    # stronger initial squeezing costs exponentially more rounds
    assert lcu.repetitions_for(0.5, dr, 0.05) > lcu.repetitions_for(0.0, dr, 0.05)


def test_repetitions_guard():
    with pytest.raises(ConfigurationError):
        lcu.repetitions_for(0.0, 0.5, -1.0)
    with pytest.raises(ConfigurationError):
        lcu.repetitions_for(5.0, 3.0, 1e-6)


def test_step_unitary_is_unitary():
    u = lcu.cps_step_unitary(0.05, 0.1, 20)
    assert u.unitary
    err = np.max(np.abs(u.data @ u.data.conj().T - np.eye(20)))
    assert err < 1e-10


def test_lcu_step_probability_and_norm():
    u = lcu.cps_step_unitary(0.05, 0.0, 30)
    state, prob = lcu.lcu_step(fock.vacuum(30), 0.5, u)
    assert 0.0 < prob <= 1.0
    assert np.vdot(state.data, state.data).real == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("eta", [0.0, 0.1])
def test_lcu_projects_cps_to_target(eta):
    # repeated-LCU emulation of the smeared projector: high fidelity to the
    # extra-squeezed CPS, cumulative success probability near e^{-dr}
    r, dr = 0.0, 0.5 * math.log(2.0)
    outcome = lcu.lcu_project_cps(r, dr, eta, delta_x0=0.05, cutoff=60)
    assert outcome.N == 800
    target, _ = gates.build_resource_state(
        gates.ResourceStateSpec(gates.ResourceStateKind.CPS, r=r + dr, eta=eta), 60)
    assert fock.fidelity(outcome.state, target) > 0.9999
    assert outcome.probability == pytest.approx(math.exp(-dr), rel=0.01)
    assert outcome.implied_delta_r == pytest.approx(dr, rel=1e-3)
    assert len(outcome.step_probabilities) == 2 * outcome.N


def test_lcu_probability_decreases_with_rounds():
    u = lcu.cps_step_unitary(0.1, 0.0, 40)
    start, _ = gates.build_resource_state(
        gates.ResourceStateSpec(gates.ResourceStateKind.CPS, r=0.0, eta=0.0), 40)
    probs = []
    for n in (25, 50, 100, 200):
        config = lcu.LcuConfig(0.5, u, n, delta_x0=0.1, r=0.0)
        probs.append(lcu.lcu_repeat(config, start).probability)
    assert all(a > b for a, b in zip(probs, probs[1:]))
    # each N implies its own projected gamma
    assert lcu.LcuConfig(0.5, u, 100, delta_x0=0.1).p1 == 0.5


def test_lcu_config_validation():
    u = lcu.cps_step_unitary(0.05, 0.0, 10)
    with pytest.raises(ConfigurationError):
        lcu.LcuConfig(1.5, u, 10)
    with pytest.raises(ConfigurationError):
        lcu.LcuConfig(0.5, u, 0)
    not_unitary = fock.DenseOperator(np.eye(10) * 2.0, 10)
    with pytest.raises(ConfigurationError):
        lcu.LcuConfig(0.5, not_unitary, 10)

import math

import numpy as np
import pytest

from fockproj import fock, gates, projectors, vqed
from fockproj.errors import ConfigurationError, DimensionMismatchError


def _projected_oracle(proj, state, observable):
    out, _ = projectors.apply_projector(proj, state)
    return float(np.real(fock.expectation(observable, out.normalized())))


def test_grid_decomposition_estimates_projected_nullifier():
    # P_sq sampling plan against the dense-matrix oracle: <x^2> after the
    # squeezing projector on vacuum is e^{-2 dr}/2
    r, dr, cutoff = 0.0, 0.5 * math.log(2.0), 40
    gamma = projectors.gamma_from_delta_r(dr, r)
    proj = projectors.build_smeared_projector(projectors.ProjectorKind.SQ, gamma)
    state, _ = gates.build_resource_state(
        gates.ResourceStateSpec(gates.ResourceStateKind.SQUEEZED_VACUUM, r=r), cutoff)
    x = fock.quadrature_x(cutoff)
    obs = x @ x
    plan = vqed.VqedPlan(state, (vqed.grid_decomposition(proj, cutoff),), obs,
                         trajectories=10_000, seed=11)
    rep = vqed.vqed_estimate(plan)
    oracle = _projected_oracle(proj, state, obs)
    assert oracle == pytest.approx(0.25, abs=1e-4)
    assert abs(rep.ratio - oracle) < 3 * rep.ratio_se
    assert rep.ratio == pytest.approx(0.245100, abs=1e-5)
    assert rep.ratio_se == pytest.approx(0.002714, abs=1e-5)
    # denominator estimates the projection probability
    assert abs(rep.probability - math.exp(-dr)) < 3 * rep.den_se


def test_gaussian_cps_decomposition_plan():
    rep = vqed.vqed_estimate(vqed.cps_plan(
        0.0, 0.5 * math.log(2.0), 0.1, cutoff=40, trajectories=10_000, seed=21))
    assert rep.ratio == pytest.approx(0.250538, abs=1e-5)
    assert abs(rep.ratio - 0.25) < 3 * rep.ratio_se


def test_virtual_cluster_entanglement():
    # two vacuum modes virtually projected onto the g=1 cluster; the first
    # nullifier variance of the projected pair is exactly 1/3 at gamma = 1/2
    cutoff, gamma = 18, 0.5
    proj = projectors.build_smeared_projector(
        projectors.ProjectorKind.CLUSTER, gamma, g=1.0, point_count=41)
    dec = vqed.grid_decomposition(proj, cutoff)
    x = fock.quadrature_x(cutoff)
    p = fock.quadrature_p(cutoff)
    n1 = fock.embed_single_mode(p, 0, 2) - fock.embed_single_mode(x, 1, 2)
    obs = n1 @ n1
    rep = vqed.virtual_entangle_estimate(
        fock.vacuum(cutoff), fock.vacuum(cutoff), dec, obs,
        trajectories=10_000, seed=17)
    dense = projectors.dense_operator(proj, cutoff)
    virt, q = projectors.apply_projector(dense, fock.vacuum(cutoff, 2))
    oracle = float(np.real(fock.expectation(obs, virt.normalized())))
    assert oracle == pytest.approx(1 / 3, abs=1e-6)
    assert abs(rep.ratio - oracle) < 3 * rep.ratio_se
    assert rep.ratio == pytest.approx(0.335962, abs=1e-5)
    assert rep.probability == pytest.approx(0.332840, abs=1e-5)
    # vacuum-pair capture probability: gamma / (1 + gamma)
    assert q == pytest.approx(gamma / (1 + gamma), abs=1e-6)


def test_bell_projector_sanity():
    # qubit Bell-pair projection of |00>: ZZ reads +1 deterministically
    dec = vqed.bell_projector_decomposition()
    zz = np.kron(np.diag([1.0, -1.0]), np.diag([1.0, -1.0])).astype(complex)
    zero = fock.FockVector(np.array([1.0, 0.0], dtype=complex), 2)
    rep = vqed.virtual_entangle_estimate(zero, zero, dec, zz,
                                         trajectories=4000, seed=3)
    assert rep.ratio == pytest.approx(1.0, abs=1e-12)
    assert rep.probability == pytest.approx(0.5, abs=0.02)


def test_shot_sampled_mode_adds_variance_but_stays_unbiased():
    base = dict(cutoff=30, trajectories=3000)
    exact = vqed.vqed_estimate(vqed.cps_plan(
        0.0, 0.5 * math.log(2.0), 0.0, seed=7, **base))
    shot = vqed.vqed_estimate(vqed.cps_plan(
        0.0, 0.5 * math.log(2.0), 0.0, seed=7, mode=vqed.SamplingMode.SHOT_SAMPLED,
        shots=64, **base))
    assert abs(shot.ratio - 0.25) < 4 * shot.ratio_se
    assert shot.ratio_se > exact.ratio_se


def test_seed_determinism_of_reports():
    plan = vqed.cps_plan(0.0, 0.4, 0.1, cutoff=30, trajectories=500, seed=42)
    a = vqed.vqed_estimate(plan)
    b = vqed.vqed_estimate(vqed.cps_plan(
        0.0, 0.4, 0.1, cutoff=30, trajectories=500, seed=42))
    assert a.ratio == b.ratio
    assert a.ratio_se == b.ratio_se
    c = vqed.vqed_estimate(vqed.cps_plan(
        0.0, 0.4, 0.1, cutoff=30, trajectories=500, seed=43))
    assert c.ratio != a.ratio


def test_report_json_round_trip():
    rep = vqed.vqed_estimate(vqed.cps_plan(
        0.0, 0.4, 0.0, cutoff=20, trajectories=200, seed=1))
    doc = rep.to_json()
    assert doc["trajectories"] == 200
    assert doc["seed"] == 1
    assert doc["ratio"] == rep.ratio


def test_variance_slope_on_synthetic_power_law():
    qs = np.array([0.9, 0.7, 0.5, 0.3])
    slope = vqed.variance_slope(qs, 2.0 * qs ** -2.0)
    assert slope == pytest.approx(-2.0, abs=1e-12)
    with pytest.raises(ConfigurationError):
        vqed.variance_slope([0.5], [1.0])
    with pytest.raises(ConfigurationError):
        vqed.variance_slope([0.5, -0.1], [1.0, 1.0])


def test_sampling_overhead_slope_in_expected_band():
    # estimator variance vs projection strength q: O(q^-2) overhead
    qs, variances = [], []
    for dr in (0.35, 0.69, 1.04):
        ses = []
        for seed in (101, 102, 103):
            rep = vqed.vqed_estimate(vqed.cps_plan(
                0.0, dr, 0.0, cutoff=120, trajectories=4000, seed=seed))
            ses.append(rep.ratio_se)
        qs.append(math.exp(-dr))
        variances.append(float(np.mean(np.square(ses))))
    slope = vqed.variance_slope(qs, variances)
    assert -2.5 < slope < -1.5


def test_plan_validation():
    state = fock.vacuum(10)
    dec = vqed.identity_decomposition(10)
    obs = fock.number_operator(10)
    with pytest.raises(ConfigurationError):
        vqed.VqedPlan(state, (), obs, trajectories=10, seed=0)
    with pytest.raises(ConfigurationError):
        vqed.VqedPlan(state, (dec,), obs, trajectories=0, seed=0)
    with pytest.raises(DimensionMismatchError):
        vqed.VqedPlan(state, (dec,), np.eye(5), trajectories=10, seed=0)
    with pytest.raises(ConfigurationError):
        vqed.VqedPlan(state, (dec,), obs, trajectories=10, seed=0,
                      mode=vqed.SamplingMode.SHOT_SAMPLED)

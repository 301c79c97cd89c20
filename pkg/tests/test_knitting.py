import math

import numpy as np
import pytest

from fockproj import fock, gates, knitting, projectors
from fockproj.errors import (ConfigurationError, DimensionMismatchError,
                             SpectralWindowError)


def _coherent(alpha, cutoff):
    return gates.displacement(alpha, cutoff) @ fock.vacuum(cutoff)


# ---------------------------------------------------------------------------
# Homodyne model


def test_homodyne_projector_resolves_identity():
    # completeness holds on the levels whose Fock support fits the window;
    # higher levels leak outcome mass past the grid edge
    cutoff = 24
    model = knitting.HomodyneModel(span=6.0, points=161)
    rows = model.rows(knitting.Quadrature.X, cutoff)
    total = model.spacing * (rows.conj().T @ rows)
    assert np.max(np.abs(total[:10, :10] - np.eye(10))) < 1e-6
    assert np.max(np.abs(total - np.eye(cutoff))) < 0.5  # top levels leak


def test_homodyne_rows_match_hermite_values():
    # <m=0 | n> ~ pi^{-1/4} e^{-m^2/2} at the origin
    row = knitting.homodyne_projector(0.0, knitting.Quadrature.X, 10)
    assert row[0] == pytest.approx(math.pi ** -0.25)
    assert abs(row[1]) < 1e-14  # odd Hermite vanishes at 0


def test_homodyne_projector_window_guard():
    with pytest.raises(SpectralWindowError):
        knitting.homodyne_projector(50.0, knitting.Quadrature.X, 20)


def test_model_span_guard():
    # grid wider than the Fock support of the cutoff is rejected
    model = knitting.HomodyneModel(span=12.0, points=61)
    with pytest.raises(SpectralWindowError):
        model.validate_span(10)


# ---------------------------------------------------------------------------
# CZ' teleportation


def test_cz_prime_output_matches_dense_gate():
    cutoff = 14
    psi1 = _coherent(0.3, cutoff)
    psi2 = _coherent(-0.2, cutoff)
    ref = knitting.cz_prime_output(psi1, psi2, g=1.0)
    joint = fock.tensor_states(psi1, psi2)
    dense = gates.cz_prime(1.0, cutoff) @ joint
    assert fock.fidelity(ref, dense) == pytest.approx(1.0, abs=1e-12)


def test_teleport_reproduces_ideal_fidelity_law():
    # grid-averaged teleported output vs CZ' reference: F = 1/(1 + e^{-2r}/2)
    cutoff = 30
    psi = _coherent(0.3, cutoff)
    for r in (0.5, 1.0):
        fid, captured = knitting.teleport_czp_fidelity(psi, psi, r)
        want = 1.0 / (1.0 + math.exp(-2.0 * r) / 2.0)
        assert fid == pytest.approx(want, abs=5e-3)
        assert 0.98 < captured <= 1.0 + 1e-9


def test_feedforward_is_what_levels_the_outcomes():
    cutoff = 30
    psi = _coherent(0.3, cutoff)
    fid_on, _ = knitting.teleport_czp_fidelity(psi, psi, 1.0)
    fid_off, _ = knitting.teleport_czp_fidelity(psi, psi, 1.0, feedforward=False)
    assert fid_on == pytest.approx(0.93752, abs=1e-4)
    assert fid_off == pytest.approx(0.22469, abs=1e-4)


def test_teleport_result_density_is_normalized():
    cutoff = 18
    res = knitting.teleport_czp(fock.vacuum(cutoff), fock.vacuum(cutoff), 0.8)
    assert res.density is not None
    assert abs(res.density.trace().real - 1.0) < 1e-9
    assert res.probabilities.shape == (res.model.points, res.model.points)
    assert res.probabilities.sum() == pytest.approx(1.0, abs=1e-12)


def test_teleport_sampled_mode_is_seed_deterministic():
    cutoff = 18
    psi = _coherent(0.2, cutoff)
    kw = dict(mode=knitting.TeleportMode.SAMPLED, samples=5, seed=9)
    a = knitting.teleport_czp(psi, psi, 0.6, **kw)
    b = knitting.teleport_czp(psi, psi, 0.6, **kw)
    assert [(s.m1, s.m2) for s in a.samples] == [(s.m1, s.m2) for s in b.samples]
    for sa, sb in zip(a.samples, b.samples):
        assert np.array_equal(sa.state.data, sb.state.data)
    c = knitting.teleport_czp(psi, psi, 0.6, mode=knitting.TeleportMode.SAMPLED,
                              samples=5, seed=10)
    assert [(s.m1, s.m2) for s in a.samples] != [(s.m1, s.m2) for s in c.samples]


def test_teleport_sampled_mode_needs_seed_and_samples():
    psi = fock.vacuum(18)
    with pytest.raises(ConfigurationError):
        knitting.teleport_czp(psi, psi, 0.5, mode=knitting.TeleportMode.SAMPLED,
                              samples=5)
    with pytest.raises(ConfigurationError):
        knitting.teleport_czp(psi, psi, 0.5, mode=knitting.TeleportMode.SAMPLED,
                              seed=1)


def test_teleport_resource_override_gives_maximal_mixing_for_vacuum():
    # vacuum resource (no squeezing, no CZ coupling) scrambles the inputs:
    # reduced output of either wire is the fully dephased single-mode state
    cutoff = 12
    model = knitting.HomodyneModel(span=4.5, points=61)
    psi = _coherent(0.4, cutoff)
    res = knitting.teleport_czp(psi, psi, 0.0, model=model,
                                resource=fock.vacuum(cutoff, 2))
    rho1 = fock.partial_trace(res.density, keep=(0,))
    purity = float(np.real(np.trace(rho1.data @ rho1.data)))
    assert purity == pytest.approx(0.500068, abs=1e-5)


def test_teleport_rejects_nonunit_gain():
    psi = fock.vacuum(10)
    with pytest.raises(ConfigurationError):
        knitting.teleport_czp(psi, psi, 0.5, g=0.9)


# ---------------------------------------------------------------------------
# Knit program structure


def test_knit_program_is_cut_separable():
    program = knitting.knit_program()
    knitting._assert_cut_separable(program)
    for op in program:
        assert (op.modes <= knitting.CUT_SIDE_A) or (op.modes <= knitting.CUT_SIDE_B)


def test_cut_sides_partition_the_register():
    assert knitting.CUT_SIDE_A | knitting.CUT_SIDE_B == {0, 1, 2, 3}
    assert not (knitting.CUT_SIDE_A & knitting.CUT_SIDE_B)


# ---------------------------------------------------------------------------
# Knit estimator


def test_knit_estimator_is_seed_deterministic():
    psi = _coherent(0.3, 20)
    kw = dict(trajectories=50, seed=4)
    a = knitting.knit_czp_expectation(psi, psi, "X1", 0.5, **kw)
    b = knitting.knit_czp_expectation(psi, psi, "X1", 0.5, **kw)
    assert a.ratio == b.ratio
    assert a.ratio_se == b.ratio_se


def test_knit_estimator_accepts_virtual_gain():
    # the physical teleport is pinned to g = 1, but the knit estimator may
    # realize any gain through the inserted displacements
    psi = fock.vacuum(20)
    rep = knitting.knit_czp_expectation(psi, psi, "X1", 0.5, 0.8,
                                        trajectories=40, seed=0)
    assert math.isfinite(rep.ratio)
    assert math.isfinite(rep.probability)


def test_knit_denominator_estimates_vacuum_capture():
    # E[mu_den] = gamma/(1+gamma) for vacuum inputs
    gamma = 0.5
    rep = knitting.knit_czp_expectation(
        fock.vacuum(20), fock.vacuum(20), "X1", gamma, trajectories=400, seed=8)
    assert abs(rep.probability - gamma / (1 + gamma)) < 4 * rep.den_se


def test_knit_first_moment_matches_virtual_resource_teleport():
    # cheap version of the estimator-vs-oracle check: <X1> of the knitted
    # CZ' on coherent inputs, against teleportation through the exact
    # virtually-projected resource
    cutoff, gamma = 20, 0.5
    psi = _coherent(0.3, cutoff)
    rep = knitting.knit_czp_expectation(psi, psi, "X1", gamma,
                                        trajectories=200, seed=23)
    proj = projectors.build_smeared_projector(
        projectors.ProjectorKind.CLUSTER, gamma, g=1.0, point_count=61)
    virt, _ = projectors.apply_projector(proj, fock.vacuum(cutoff, 2))
    oracle_res = knitting.teleport_czp(psi, psi, 0.0, resource=virt.normalized())
    x1 = fock.embed_single_mode(fock.quadrature_x(cutoff), 0, 2)
    oracle = float(np.real(fock.expectation(x1, oracle_res.density)))
    assert abs(rep.ratio - oracle) < max(3 * rep.ratio_se, 1e-4)

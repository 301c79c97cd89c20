import math

import numpy as np
import pytest

from fockproj import analytics, fock, gates
from fockproj.errors import DimensionMismatchError


def test_db_conversions():
    # 3 dB of squeezing: r = ln(10) * 3 / 20
    assert analytics.db_to_r(3.0) == pytest.approx(0.34538776394910686, abs=1e-15)
    assert analytics.r_to_db(analytics.db_to_r(7.3)) == pytest.approx(7.3, abs=1e-12)
    assert analytics.db_to_r(0.0) == 0.0


def test_cps_nullifier_variance_matches_analytic():
    r, eta = analytics.db_to_r(3.0), 0.1
    state, _ = gates.build_resource_state(
        gates.ResourceStateSpec(gates.ResourceStateKind.CPS, r=r, eta=eta), 60)
    spec = analytics.NullifierSpec(analytics.NullifierKind.CPS_PARABOLA, eta=eta)
    var = analytics.nullifier_variance(spec, state)
    assert var == pytest.approx(math.exp(-2 * r) / 2, rel=1e-10)


def test_cluster_nullifier_pair_sum_matches_analytic():
    r = analytics.db_to_r(3.0)
    state, _ = gates.build_resource_state(
        gates.ResourceStateSpec(gates.ResourceStateKind.CLUSTER, r=r, g=1.0), 24)
    spec = analytics.NullifierSpec(analytics.NullifierKind.CLUSTER_PAIR, g=1.0)
    var = analytics.nullifier_variance(spec, state)
    # two nullifiers at e^{-2r}/2 each
    assert var == pytest.approx(math.exp(-2 * r), rel=1e-6)


def test_sq_nullifier_is_x_variance():
    state, _ = gates.build_resource_state(
        gates.ResourceStateSpec(gates.ResourceStateKind.SQUEEZED_VACUUM, r=0.4), 40)
    spec = analytics.NullifierSpec(analytics.NullifierKind.SQ_X)
    assert analytics.nullifier_variance(spec, state) == pytest.approx(
        math.exp(-0.8) / 2, rel=1e-10)


def test_nullifier_mode_count_is_enforced():
    spec = analytics.NullifierSpec(analytics.NullifierKind.CLUSTER_PAIR, g=1.0)
    with pytest.raises(DimensionMismatchError):
        analytics.nullifier_variance(spec, fock.vacuum(10))


def test_analytic_reference_curves():
    r, dr = 0.2, 0.3
    assert analytics.analytic_reference(
        analytics.Curve.CPS_NULLIFIER, r=r, delta_r=dr) == pytest.approx(
            math.exp(-2 * (r + dr)) / 2)
    assert analytics.analytic_reference(
        analytics.Curve.CLUSTER_NULLIFIER, r=r, delta_r=dr) == pytest.approx(
            math.exp(-2 * (r + dr)))
    assert analytics.analytic_reference(
        analytics.Curve.CPS_PROB, r=r, delta_r=dr) == pytest.approx(math.exp(-dr))
    assert analytics.analytic_reference(
        analytics.Curve.CLUSTER_PROB, r=r, delta_r=dr) == pytest.approx(
            math.exp(-2 * dr))


def test_delta_r_curve_inverts_gamma():
    got = analytics.analytic_reference(analytics.Curve.DELTA_R, gamma=0.5, r=0.0,
                                       delta_r=None)
    assert got == pytest.approx(0.5 * math.log(2.0))

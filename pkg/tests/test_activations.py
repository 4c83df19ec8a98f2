"""Activation catalog: evaluation, one-sided derivatives, reflection, tie
points, 1-D envelopes, and ranges, checked against brute-force hull oracles."""

import math
import zlib

import numpy as np
import pytest

from conftest import ALL_ACTIVATIONS, STFE_ACTIVATIONS, lower_hull_1d, random_interval, upper_hull_1d
from stfehull import activations as A
from stfehull.activations import Interval


def test_eval_examples():
    assert A.sigmoid().value(0.0) == 0.5
    assert A.relu().value(-3.0) == 0.0
    # direct formula evaluation, lambda * alpha * (e^-1.13 - 1)
    assert A.selu().value(-1.13) == pytest.approx(-1.1901713609881972, abs=1e-12)


def test_eval_vectorized():
    zs = np.linspace(-4, 4, 17)
    for act in ALL_ACTIVATIONS:
        vec = act.value(zs)
        assert vec.shape == zs.shape
        for z, v in zip(zs, vec):
            assert act.value(float(z)) == pytest.approx(v, abs=0.0)


def test_derivative_examples():
    assert A.relu().derivative(0.0, "left") == 0.0
    assert A.relu().derivative(0.0, "right") == 1.0
    assert A.sigmoid().derivative(0.0, "left") == pytest.approx(0.25, abs=1e-15)
    assert A.sigmoid().derivative(0.0, "right") == pytest.approx(0.25, abs=1e-15)
    for side in ("left", "right"):
        assert A.elu(1.0).derivative(-1.0, side) == pytest.approx(math.exp(-1), rel=1e-14)


def test_derivative_matches_finite_differences():
    rng = np.random.default_rng(3)
    for act in ALL_ACTIVATIONS:
        kinks = {k for k, _l, _r in act.kinks()}
        zs = rng.uniform(-5, 5, 60)
        zs = np.array([z for z in zs if min((abs(z - k) for k in kinks), default=1.0) > 1e-3])
        fd = (act.value(zs + 1e-6) - act.value(zs - 1e-6)) / 2e-6
        assert np.allclose(act.derivative(zs, "left"), fd, rtol=1e-4, atol=1e-7), act.tag


def test_reflect_examples():
    r = A.reflect(A.relu())
    assert isinstance(r.shape, A.Concave)
    zs = np.linspace(-3, 3, 31)
    assert np.allclose(r.value(zs), np.minimum(zs, 0.0))
    assert A.reflect(A.sigmoid()).value(0.0) == pytest.approx(-0.5)


def test_reflect_involution():
    rng = np.random.default_rng(11)
    zs = rng.uniform(-6, 6, 100)
    for act in ALL_ACTIVATIONS:
        back = A.reflect(A.reflect(act))
        assert np.array_equal(back.value(zs), act.value(zs)), act.tag


def test_shape_second_difference_signs():
    """SShaped means convex left of the inflection, concave right of it; the
    silu family's point reflection satisfies this on (-inf, bend]."""
    h = 1e-3

    def second_diff(act, zs):
        return act.value(zs + h) + act.value(zs - h) - 2 * act.value(zs)

    for act in ALL_ACTIVATIONS:
        shape = act.shape
        if isinstance(shape, A.SShaped):
            z = shape.inflection
            left = np.linspace(z - 6, z - 0.05, 80)
            right = np.linspace(z + 0.05, z + 6, 80)
            assert np.all(second_diff(act, left) >= -1e-12), act.tag
            assert np.all(second_diff(act, right) <= 1e-12), act.tag
        elif isinstance(shape, A.Convex):
            zs = np.linspace(-6, 6, 120)
            ks = {k for k, _l, _r in act.kinks()}
            zs = np.array([z for z in zs if min((abs(z - k) for k in ks), default=1) > 2 * h])
            assert np.all(second_diff(act, zs) >= -1e-12), act.tag
    # reflected silu is SShaped with the negated inflection; the claim is exact
    # up to +bend, past which the original's far concave tail re-enters.
    si = A.silu()
    r = A.reflect(si)
    assert isinstance(r.shape, A.SShaped)
    assert r.shape.inflection == pytest.approx(-A.SILU_BEND)
    zj = r.shape.inflection
    left = np.linspace(zj - 6, zj - 0.05, 80)
    right = np.linspace(zj + 0.05, A.SILU_BEND - 0.05, 80)
    assert np.all(second_diff(r, left) >= -1e-12)
    assert np.all(second_diff(r, right) <= 1e-12)


def test_parameter_validation():
    with pytest.raises(ValueError):
        A.leaky_relu(0.0)
    with pytest.raises(ValueError):
        A.leaky_relu(1.0)
    with pytest.raises(ValueError):
        A.elu(0.0)
    with pytest.raises(ValueError):
        A.penalized_tanh(1.0)
    assert isinstance(A.elu(0.5).shape, A.Convex)
    assert isinstance(A.elu(1.5).shape, A.SShaped)
    assert A.selu().params() == {"lambda": 1.0507, "alpha": 1.67326}


def test_unknown_tag():
    with pytest.raises(A.UnknownActivationError):
        A.make_activation("swishish")
    with pytest.raises(A.UnknownActivationError):
        A.make_activation("elu", beta=2.0)


def test_serialization_round_trip():
    for act in ALL_ACTIVATIONS:
        if act.tag.startswith(("reflected", "mirrored")):
            continue
        back = A.activation_from_dict(act.to_dict())
        assert back == act


# -- tie points


def test_tie_point_selu_kink():
    assert A.tie_point(A.selu(), Interval(-1.13, 0.5)) == 0.0


def test_tie_point_relu_jump():
    assert A.tie_point(A.relu(), Interval(-1.0, 0.3)) == 0.3
    assert A.tie_point(A.relu(), Interval(-1.0, 1e-6)) == 1e-6
    assert A.tie_point(A.relu(), Interval(-1.0, 0.0)) == -1.0
    assert A.tie_point(A.relu(), Interval(0.25, 2.0)) == 0.25  # affine stretch


def test_tie_point_sigmoid_tangency():
    iv = Interval(-10.0, 5.0)
    act = A.sigmoid()
    t = A.tie_point(act, iv)
    assert 0.0 < t < 5.0
    slope = (act.value(t) - act.value(iv.lo)) / (t - iv.lo)
    assert slope == pytest.approx(act.derivative(t), rel=1e-9)
    # the resulting secant overestimates the function everywhere
    zs = np.linspace(iv.lo, t, 10000)
    secant = act.value(iv.lo) + slope * (zs - iv.lo)
    assert np.min(secant - act.value(zs)) >= -1e-12


def test_tie_point_no_secant_form_raises():
    # silu on a range dominated by its left concave tail has a
    # function-then-secant envelope, so no tie point exists
    with pytest.raises(A.EnvelopeError):
        A.tie_point(A.silu(), Interval(-6.0, -1.0))


def test_tie_point_rejects_bad_interval():
    with pytest.raises(ValueError):
        Interval(1.0, 0.0)
    with pytest.raises(ValueError):
        Interval(0.0, math.inf)


# -- 1-D envelopes


def test_conc_env_1d_examples():
    act = A.sigmoid()
    iv = Interval(-10.0, 5.0)
    assert A.conc_env_1d(act, iv, 5.0) == pytest.approx(act.value(5.0), abs=1e-15)
    assert A.conc_env_1d(A.relu(), Interval(-1, 1), 0.0) == pytest.approx(0.5, abs=1e-15)
    zs = np.linspace(0, 2, 100)
    assert np.allclose(A.conc_env_1d(A.tanh(), Interval(0, 2), zs), np.tanh(zs), atol=1e-15)


def test_conc_env_1d_outside_interval():
    with pytest.raises(ValueError):
        A.conc_env_1d(A.sigmoid(), Interval(0, 1), 2.0)


def test_conc_env_1d_supergrad_examples():
    assert A.conc_env_1d_supergrad(A.relu(), Interval(-1, 1), -0.5) == pytest.approx(0.5)
    act = A.sigmoid()
    iv = Interval(-10, 5)
    assert A.conc_env_1d_supergrad(act, iv, 4.9) == pytest.approx(act.derivative(4.9))


def test_conc_env_1d_supergrad_finite_difference():
    rng = np.random.default_rng(5)
    checked = 0
    for act in ALL_ACTIVATIONS:
        iv = random_interval(rng)
        curve = A.ConcaveEnvelope1D(act, iv)
        special = {curve.tie, iv.lo, iv.hi} | {k for k, _l, _r in act.kinks()}
        special.discard(None)
        zs = rng.uniform(iv.lo, iv.hi, 40)
        zs = [z for z in zs if min(abs(z - s) for s in special) > 1e-4]
        for z in zs[:20]:
            fd = (curve.value(z + 1e-6) - curve.value(z - 1e-6)) / 2e-6
            g = curve.supergrad(z)
            assert g == pytest.approx(fd, rel=1e-4, abs=1e-7), (act.tag, iv, z)
            checked += 1
    assert checked >= 100


def test_supergradient_inequality_1d():
    rng = np.random.default_rng(6)
    for act in ALL_ACTIVATIONS:
        for _ in range(10):
            iv = random_interval(rng)
            curve = A.ConcaveEnvelope1D(act, iv)
            z0 = rng.uniform(iv.lo, iv.hi)
            v0, g0 = curve.value(z0), curve.supergrad(z0)
            zs = np.linspace(iv.lo, iv.hi, 257)
            assert np.max(curve.value(zs) - (v0 + g0 * (zs - z0))) <= 1e-9, (act.tag, iv)


@pytest.mark.parametrize("act", ALL_ACTIVATIONS, ids=lambda a: a.tag)
def test_stfe_envelope_validity(act):
    """Envelope overestimates the function on random intervals, with equality
    at both endpoints."""
    rng = np.random.default_rng(zlib.crc32(act.tag.encode()))
    for _ in range(100):
        iv = random_interval(rng)
        zs = np.linspace(iv.lo, iv.hi, 1000)
        env = A.conc_env_1d(act, iv, zs)
        gaps = act.value(zs) - env
        assert np.max(gaps) <= 1e-9, (act.tag, iv)
        assert abs(env[0] - act.value(iv.lo)) <= 1e-9
        assert abs(env[-1] - act.value(iv.hi)) <= 1e-9


@pytest.mark.parametrize("act", ALL_ACTIVATIONS, ids=lambda a: a.tag)
def test_upper_hull_oracle_equivalence(act):
    rng = np.random.default_rng(zlib.crc32(act.tag.encode()) + 1)
    for _ in range(12):
        iv = random_interval(rng)
        zq = np.linspace(iv.lo, iv.hi, 512)
        env = A.conc_env_1d(act, iv, zq)
        hull = upper_hull_1d(act, iv.lo, iv.hi, zq, n=10000)
        assert np.max(np.abs(env - hull)) <= 1e-4, (act.tag, iv)


def test_shrinking_upper_bound_above_tie_keeps_envelope():
    """Bringing the upper endpoint down to any point past the tie leaves the
    envelope (and the tie point) unchanged on the surviving interval."""
    rng = np.random.default_rng(7)
    for act in STFE_ACTIVATIONS:
        for _ in range(8):
            iv = random_interval(rng)
            tie = A.tie_point(act, iv)
            if tie >= iv.hi:
                continue
            new_hi = rng.uniform(tie, iv.hi)
            small = Interval(iv.lo, new_hi)
            assert A.tie_point(act, small) == pytest.approx(tie, abs=1e-9)
            zs = np.linspace(iv.lo, new_hi, 400)
            assert np.allclose(
                A.conc_env_1d(act, small, zs), A.conc_env_1d(act, iv, zs), atol=1e-9
            ), (act.tag, iv, new_hi)


def test_shrinking_upper_bound_below_tie_gives_pure_secant():
    rng = np.random.default_rng(8)
    for act in STFE_ACTIVATIONS:
        for _ in range(8):
            iv = random_interval(rng)
            tie = A.tie_point(act, iv)
            if tie <= iv.lo:
                continue
            new_hi = rng.uniform(iv.lo + 1e-6, tie)
            small = Interval(iv.lo, new_hi)
            zs = np.linspace(iv.lo, new_hi, 200)
            f_lo, f_hi = act.value(iv.lo), act.value(new_hi)
            secant = f_lo + (f_hi - f_lo) / (new_hi - iv.lo) * (zs - iv.lo)
            assert np.allclose(A.conc_env_1d(act, small, zs), secant, atol=1e-9), (act.tag, iv)


def test_raising_lower_bound_never_raises_tie():
    rng = np.random.default_rng(9)
    for act in STFE_ACTIVATIONS:
        for _ in range(8):
            iv = random_interval(rng)
            tie = A.tie_point(act, iv)
            if tie <= iv.lo:
                continue
            new_lo = rng.uniform(iv.lo, tie)
            tie2 = A.tie_point(act, Interval(new_lo, iv.hi))
            assert tie2 <= tie + 1e-9, (act.tag, iv, new_lo)


def test_reflect_duality_against_lower_hull():
    """conc of the reflection on the mirrored interval equals the negated
    convex envelope, itself checked against a brute-force lower hull."""
    rng = np.random.default_rng(10)
    for act in ALL_ACTIVATIONS:
        for _ in range(6):
            iv = random_interval(rng)
            zq = np.linspace(iv.lo, iv.hi, 400)
            refl_iv = Interval(-iv.hi, -iv.lo)
            via_reflection = -A.conc_env_1d(A.reflect(act), refl_iv, -zq)
            hull = lower_hull_1d(act, iv.lo, iv.hi, zq, n=10000)
            assert np.max(np.abs(via_reflection - hull)) <= 1e-4, (act.tag, iv)
            direct = A.ConvexEnvelope1D(act, iv).value(zq)
            assert np.max(np.abs(direct - via_reflection)) <= 1e-12


def test_convex_envelope_linear_pieces_are_valid():
    rng = np.random.default_rng(12)
    for act in ALL_ACTIVATIONS:
        for _ in range(6):
            iv = random_interval(rng)
            zs = np.linspace(iv.lo, iv.hi, 600)
            fs = act.value(zs)
            for slope, intercept in A.ConvexEnvelope1D(act, iv).linear_pieces():
                assert np.min(fs - (slope * zs + intercept)) >= -1e-9, (act.tag, iv)
            for slope, intercept in A.ConcaveEnvelope1D(act, iv).linear_pieces():
                assert np.max(fs - (slope * zs + intercept)) <= 1e-9, (act.tag, iv)


# -- ranges


def test_range_on_interval_monotone():
    act = A.sigmoid()
    iv = Interval(-10, 5)
    r = A.range_on_interval(act, iv)
    assert (r.lo, r.hi) == (act.value(-10.0), act.value(5.0))
    assert A.range_on_interval(A.relu(), Interval(-2, -1)) == Interval(0.0, 0.0)


def test_range_on_interval_silu_grid_oracle():
    act = A.silu()
    iv = Interval(-3.0, 1.0)
    r = A.range_on_interval(act, iv)
    grid = act.value(np.linspace(iv.lo, iv.hi, 100000))
    assert r.lo == pytest.approx(float(grid.min()), abs=1e-6)
    assert r.hi == pytest.approx(float(grid.max()), abs=1e-6)
    assert r.hi == pytest.approx(max(act.value(-3.0), act.value(1.0)), abs=1e-12)
    assert r.lo == pytest.approx(act.value(A.SILU_STATIONARY), abs=1e-12)


def test_range_on_interval_random_grid_oracle():
    rng = np.random.default_rng(13)
    for act in ALL_ACTIVATIONS:
        for _ in range(5):
            iv = random_interval(rng)
            r = A.range_on_interval(act, iv)
            grid = act.value(np.linspace(iv.lo, iv.hi, 20001))
            assert r.lo <= grid.min() + 1e-9 and grid.min() <= r.lo + 1e-6
            assert r.hi >= grid.max() - 1e-9 and grid.max() >= r.hi - 1e-6

"""Play-operator update: projection oracle, variational inequality,
rate independence and the threshold-Lipschitz / cone invariants."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from porohyst import MemoryCurve, ThresholdGrid, curve_update, play_update
from porohyst.errors import InvalidThresholdError

from conftest import random_consistent_curve


def projection_oracle(xi_prev, u, r):
    """Minimise (xi - xi_prev)^2 over the band [u - r, u + r] by KKT
    candidate enumeration (interior stationary point or a band edge)."""
    candidates = [c for c in (xi_prev, u - r, u + r) if u - r <= c <= u + r]
    return min(candidates, key=lambda c: (c - xi_prev) ** 2)


def vi_residual(xi_prev, u, r, xi):
    """Worst violation of the discrete variational inequality."""
    feas = abs(u - xi) - r
    worst = min((xi - xi_prev) * (u - xi - z) for z in (-r, r))
    return max(feas, -worst)


def test_play_update_examples():
    assert play_update(0.5, 0.0, 1.0) == 0.5  # inside the band, frozen
    assert play_update(0.0, 2.0, 0.5) == 1.5
    assert play_update(0.0, -2.0, 0.5) == -1.5


def test_play_update_rejects_bad_threshold():
    with pytest.raises(InvalidThresholdError):
        play_update(0.0, 1.0, 0.0)
    with pytest.raises(InvalidThresholdError):
        play_update(0.0, 1.0, -1.0)


def test_play_matches_projection_oracle_bulk():
    rng = np.random.default_rng(7)
    for _ in range(10_000):
        xi_prev = rng.uniform(-3, 3)
        u = rng.uniform(-3, 3)
        r = rng.uniform(1e-6, 3)
        xi = play_update(xi_prev, u, r)
        assert xi == projection_oracle(xi_prev, u, r)
        assert vi_residual(xi_prev, u, r, xi) <= 1e-12


@given(
    xi_prev=st.floats(-5, 5),
    u=st.floats(-5, 5),
    r=st.floats(1e-9, 5),
)
def test_play_vi_property(xi_prev, u, r):
    xi = play_update(xi_prev, u, r)
    assert abs(u - xi) <= r * (1 + 1e-12) + 1e-12
    assert vi_residual(xi_prev, u, r, xi) <= 1e-12


@settings(max_examples=50, deadline=None)
@given(
    start=st.floats(-0.9, 0.9),
    end=st.floats(-0.9, 0.9),
    k=st.integers(1, 9),
)
def test_rate_independence_on_monotone_paths(start, end, k):
    """Subdividing a monotone segment changes nothing, exactly."""
    grid = ThresholdGrid(lam=1.0, count=32)
    base = MemoryCurve.virgin(grid)
    base = curve_update(base, start)  # consistent state at the path start
    direct = curve_update(base, end)
    stepped = base
    for i in range(1, k + 1):
        w = end if i == k else start + (end - start) * i / k
        stepped = curve_update(stepped, w)
    np.testing.assert_array_equal(direct.xi, stepped.xi)


def test_lipschitz_in_threshold_preserved(rng, tgrid):
    curve = MemoryCurve.virgin(tgrid)
    for u in rng.uniform(-1, 1, size=200):
        curve = curve_update(curve, float(u))
        steps = np.abs(np.diff(curve.xi))
        assert np.all(steps <= tgrid.dr + 1e-14)


def test_cone_bound_under_bounded_inputs(rng, tgrid):
    lam, nodes = tgrid.lam, tgrid.nodes
    cone = np.maximum(0.0, lam - nodes)
    curve = MemoryCurve.virgin(tgrid)
    for u in rng.uniform(-lam, lam, size=1000):
        curve = curve_update(curve, float(u))
        assert np.max(np.abs(curve.xi) - cone) <= 1e-12


def test_curve_update_examples(tgrid):
    lam2 = ThresholdGrid(lam=2.0, count=128)
    virgin = MemoryCurve.virgin(lam2)
    unchanged = curve_update(virgin, 0.0)
    np.testing.assert_array_equal(unchanged.xi, virgin.xi)

    loaded = curve_update(virgin, 1.0)
    np.testing.assert_allclose(loaded.xi, np.maximum(0.0, 1.0 - lam2.nodes), atol=0)

    back = curve_update(loaded, 0.0)
    expect = np.minimum(np.maximum(0.0, 1.0 - lam2.nodes), lam2.nodes)
    np.testing.assert_allclose(back.xi, expect, atol=0)


def test_consistent_random_state_helper(rng, tgrid):
    curve = random_consistent_curve(rng, tgrid)
    assert np.max(np.abs(curve.xi) - np.maximum(0.0, tgrid.lam - tgrid.nodes)) <= 1e-12

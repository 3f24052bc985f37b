"""Operator output, branch maps, energy bookkeeping and memory metrics."""

import numpy as np
import pytest

from porohyst import (
    MemoryCurve,
    ThresholdGrid,
    active_level,
    branch_slope,
    branch_value,
    curve_update,
    dissipation_increment,
    memory_distance,
    preisach_output,
    stored_energy,
)
from porohyst.errors import GridMismatchError

from conftest import random_consistent_curve, unit_density


@pytest.fixture(scope="module")
def lam2():
    return ThresholdGrid(lam=2.0, count=1024)


@pytest.fixture(scope="module")
def dens2():
    return unit_density(lam=2.0)


def fine_reference_output(path, lam=2.0, count=100_000):
    """Fine-grid reference run for the loaded-curve output integrals."""
    grid = ThresholdGrid(lam=lam, count=count)
    curve = MemoryCurve.virgin(grid)
    for u in path:
        curve = curve_update(curve, u)
    dens = unit_density(lam=lam)
    return preisach_output(curve, dens)


def test_output_virgin_offset(lam2):
    dens = unit_density(lam=2.0, gbar=0.3)
    assert preisach_output(MemoryCurve.virgin(lam2), dens) == pytest.approx(0.3, abs=0)


def test_output_closed_forms(lam2, dens2):
    loaded = curve_update(MemoryCurve.virgin(lam2), 1.0)
    dr = lam2.dr
    assert preisach_output(loaded, dens2) == pytest.approx(0.5, abs=4 * dr * dr)
    assert preisach_output(loaded, dens2) == pytest.approx(
        fine_reference_output([1.0]), abs=4 * dr * dr
    )
    back = curve_update(loaded, 0.0)
    assert preisach_output(back, dens2) == pytest.approx(0.25, abs=4 * dr * dr)
    assert preisach_output(back, dens2) == pytest.approx(
        fine_reference_output([1.0, 0.0]), abs=4 * dr * dr
    )


def test_stored_energy_values(lam2, dens2, rng):
    assert stored_energy(MemoryCurve.virgin(lam2), dens2) == 0.0
    loaded = curve_update(MemoryCurve.virgin(lam2), 1.0)
    assert stored_energy(loaded, dens2) == pytest.approx(1.0 / 6.0, abs=4 * lam2.dr**2)
    for _ in range(200):
        curve = random_consistent_curve(rng, lam2, n_moves=5)
        e = stored_energy(curve, dens2)
        assert e >= -1e-15
        # coercivity against the quadratic lower bound
        lower = 0.5 * dens2.rho0 * lam2.dr * float(np.sum(curve.xi**2))
        assert e >= lower - 1e-12


def test_dissipation_closed_forms(lam2, dens2):
    virgin = MemoryCurve.virgin(lam2)
    assert dissipation_increment(virgin, virgin, dens2) == 0.0
    loaded = curve_update(virgin, 1.0)
    tol = 4 * lam2.dr**2
    assert dissipation_increment(virgin, loaded, dens2) == pytest.approx(1.0 / 6.0, abs=tol)
    back = curve_update(loaded, 0.0)
    total = dissipation_increment(virgin, loaded, dens2) + dissipation_increment(
        loaded, back, dens2
    )
    assert total == pytest.approx(5.0 / 24.0, abs=2 * tol)


def test_memory_distance_metric(lam2, dens2, rng):
    virgin = MemoryCurve.virgin(lam2)
    assert memory_distance(virgin, virgin) == 0.0
    loaded = curve_update(virgin, 1.0)
    assert memory_distance(virgin, loaded) == pytest.approx(1.0 / 6.0, abs=4 * lam2.dr**2)
    for _ in range(50):
        a = random_consistent_curve(rng, lam2, 4)
        b = random_consistent_curve(rng, lam2, 4)
        c = random_consistent_curve(rng, lam2, 4)
        dab, dba = memory_distance(a, b), memory_distance(b, a)
        assert dab == pytest.approx(dba, rel=1e-13)
        assert memory_distance(a, c) <= dab + memory_distance(b, c) + 1e-12


def test_memory_distance_grid_mismatch(lam2):
    other = ThresholdGrid(lam=2.0, count=512)
    with pytest.raises(GridMismatchError):
        memory_distance(MemoryCurve.virgin(lam2), MemoryCurve.virgin(other))


def test_branch_value_examples(lam2, dens2, gid2=None):
    from porohyst.density import identity_map

    gmap = identity_map(2.0)
    virgin = MemoryCurve.virgin(lam2)
    assert branch_value(virgin, dens2, gmap, 1.0) == pytest.approx(0.5, abs=4 * lam2.dr**2)
    loaded = curve_update(virgin, 0.7)
    s_prev = preisach_output(loaded, dens2)
    assert branch_value(loaded, dens2, gmap, 0.7) == pytest.approx(s_prev, abs=0)


def test_branch_monotonicity(lam2, dens2, rng):
    from porohyst.density import identity_map

    gmap = identity_map(2.0)
    for _ in range(1000):
        curve = random_consistent_curve(rng, lam2, 3)
        u = rng.uniform(-2, 2)
        delta = rng.uniform(0, 0.5)
        assert (
            branch_value(curve, dens2, gmap, u + delta)
            >= branch_value(curve, dens2, gmap, u) - 1e-14
        )


def test_branch_slope_properties(lam2, dens2, rng):
    from porohyst.density import identity_map

    gmap = identity_map(2.0)
    virgin = MemoryCurve.virgin(lam2)
    loaded = curve_update(virgin, 0.7)
    # at the committed input the branch is flat (turning-point degeneracy)
    assert branch_slope(loaded, dens2, gmap, 0.7) == 0.0
    # finite-difference oracle at the virgin ascent
    h = 1e-7
    fd = (branch_value(virgin, dens2, gmap, 1.0 + h) - branch_value(virgin, dens2, gmap, 1.0)) / h
    got = branch_slope(virgin, dens2, gmap, 1.0)
    assert got == pytest.approx(1.0, abs=2 * lam2.dr)
    assert got == pytest.approx(fd, abs=2 * lam2.dr)
    cap = dens2.rho1 * lam2.lam * gmap.g_hi
    for _ in range(1000):
        curve = random_consistent_curve(rng, lam2, 3)
        s = branch_slope(curve, dens2, gmap, rng.uniform(-2, 2))
        assert 0.0 <= s <= cap + 1e-12


def test_active_level_examples():
    grid = ThresholdGrid(lam=2.0, count=256)
    virgin = MemoryCurve.virgin(grid)
    assert active_level(virgin, 0.0) == 0.0
    loaded = curve_update(virgin, 1.0)
    assert active_level(loaded, 1.0) == pytest.approx(1.0, abs=grid.dr)
    half = curve_update(loaded, 0.5)
    assert active_level(half, 0.5) == pytest.approx(0.25, abs=grid.dr)


# ---------------------------------------------------------------------------
# scalar energy balance
# ---------------------------------------------------------------------------


def run_scalar_path(targets, level, dens, grid, h_base=0.05):
    """Resolve a piecewise-monotone input into micro-steps; return the
    energy-balance defect |work - (dE + D)| and the step resolution."""
    curve = MemoryCurve.virgin(grid)
    s_prev = preisach_output(curve, dens)
    e0 = stored_energy(curve, dens)
    work = diss = 0.0
    u_prev, hmax = 0.0, 0.0
    for tgt in targets:
        seg = tgt - u_prev
        n = max(2, int(np.ceil(abs(seg) / h_base))) * 2**level
        hmax = max(hmax, abs(seg) / n)
        for i in range(1, n + 1):
            u = u_prev + seg * i / n
            nxt = curve_update(curve, float(u))
            s = preisach_output(nxt, dens)
            diss += dissipation_increment(curve, nxt, dens)
            work += u * (s - s_prev)
            curve, s_prev = nxt, s
        u_prev = tgt
    defect = abs(work - (stored_energy(curve, dens) - e0 + diss))
    return defect, hmax


def test_energy_balance_halves_with_resolution(rng):
    grid = ThresholdGrid(lam=1.0, count=256)
    dens = unit_density(lam=1.0)
    for _ in range(5):
        targets = rng.uniform(-1, 1, size=int(rng.integers(3, 6)))
        d0, h0 = run_scalar_path(targets, 0, dens, grid)
        d1, _ = run_scalar_path(targets, 1, dens, grid)
        tv = abs(targets[0]) + float(np.sum(np.abs(np.diff(targets))))
        assert d0 <= dens.rho1 * grid.lam * tv * h0
        assert 1.8 <= d0 / d1 <= 2.2


def test_closed_loop_work_is_dissipation(rng):
    """On the second traversal of a loop the stored energy is periodic,
    so the enclosed work equals the dissipation, up to O(h)."""
    grid = ThresholdGrid(lam=1.0, count=256)
    dens = unit_density(lam=1.0)
    lo, hi = -0.6, 0.8
    curve = MemoryCurve.virgin(grid)
    for u in (hi, lo, hi, lo):  # first traversal fixes the cycle
        curve = curve_update(curve, u)
    s_prev = preisach_output(curve, dens)
    e0 = stored_energy(curve, dens)
    n = 400
    work = diss = 0.0
    path = np.concatenate([np.linspace(lo, hi, n)[1:], np.linspace(hi, lo, n)[1:]])
    for u in path:
        nxt = curve_update(curve, float(u))
        s = preisach_output(nxt, dens)
        diss += dissipation_increment(curve, nxt, dens)
        work += u * (s - s_prev)
        curve, s_prev = nxt, s
    assert stored_energy(curve, dens) == pytest.approx(e0, abs=1e-12)
    assert diss >= 0.0
    h = (hi - lo) / (n - 1)
    assert work == pytest.approx(diss, abs=dens.rho1 * 4 * (hi - lo) * h)

"""Density primitives psi / Psi, bounds validation, the tabulated
integrator against a quadrature oracle, and the input transformation."""

import numpy as np
import pytest
from scipy.integrate import quad

from porohyst import ThresholdGrid
from porohyst.density import ConvexifiableMap, PreisachDensity, identity_map
from porohyst.errors import ConfigError, DomainError

from conftest import unit_density


def test_uniform_psi_values():
    dens = unit_density(lam=1.0)
    assert dens.psi(0.3, 0.7) == pytest.approx(0.7, abs=0)
    assert dens.psi(0.3, 0.0) == 0.0
    assert dens.Psi(0.3, 1.0) == pytest.approx(0.5, abs=0)
    assert dens.Psi(0.3, -1.0) == pytest.approx(0.5, abs=0)  # even


def test_separable_psi_analytic():
    # rho(r, v) = 1 + v^2: psi(1) = 1 + 1/3, Psi(1) = 1/2 + 1/12
    dens = PreisachDensity(
        kind="separable", lam=1.0, rho0=0.5, rho1=2.5, gbar=0.0,
        params={"r_coeffs": [1.0], "v_coeffs": [1.0, 0.0, 1.0]},
    )
    assert dens.psi(0.5, 1.0) == pytest.approx(4.0 / 3.0, rel=1e-14)
    assert dens.Psi(0.5, 1.0) == pytest.approx(7.0 / 12.0, rel=1e-14)


def test_psi_rejects_out_of_domain():
    dens = unit_density()
    with pytest.raises(DomainError):
        dens.psi(0.5, 1.5)
    with pytest.raises(DomainError):
        dens.Psi(0.5, -1.5)


def test_density_bound_validation():
    with pytest.raises(ConfigError):
        PreisachDensity(
            kind="uniform", lam=1.0, rho0=1.0, rho1=1.1, gbar=0.0,
            params={"value": 1.0},  # rho0 not strictly below the value
        )
    with pytest.raises(ConfigError):
        PreisachDensity(
            kind="separable", lam=1.0, rho0=0.5, rho1=1.5, gbar=0.0,
            params={"r_coeffs": [1.0], "v_coeffs": [1.0, 0.0, 1.0]},  # tops at 2
        )


def _tab_density():
    rs = np.linspace(0.0, 1.0, 5)
    vs = np.linspace(-1.6, 1.6, 9)
    tab = 1.0 + 0.3 * np.outer(rs, np.ones_like(vs)) + 0.2 * np.sin(vs)[None, :] ** 2
    return PreisachDensity(
        kind="tabulated", lam=1.0, rho0=0.5, rho1=2.0, gbar=0.0,
        params={"r": rs.tolist(), "v": vs.tolist(), "rho": tab.tolist()},
    )


def test_tabulated_psi_matches_quadrature_oracle():
    # the evaluator is exact for the fine resampling of the bilinear table,
    # which stays within O(dv^2) of the table itself at its slope kinks
    dens = _tab_density()
    for r in (0.13, 0.5, 0.91):
        for xi in (-0.95, -0.3, 0.0, 0.4, 0.97):
            want, _ = quad(lambda v: float(dens.rho(r, v)), 0.0, xi, limit=200)
            assert float(dens.psi(r, xi)) == pytest.approx(want, abs=2e-6)
            want2, _ = quad(lambda v: float(dens.psi(r, v)), 0.0, xi, limit=200)
            assert float(dens.Psi(r, xi)) == pytest.approx(want2, abs=2e-6)


def test_tabulated_primitives_internally_exact():
    # Psi' = psi and psi' = rho for the evaluator's own density model
    dens = _tab_density()
    h = 1e-6
    for r in (0.2, 0.77):
        for xi in (-0.8, -0.1, 0.33, 0.9):
            dpsi = (float(dens.Psi(r, xi + h)) - float(dens.Psi(r, xi - h))) / (2 * h)
            assert dpsi == pytest.approx(float(dens.psi(r, xi)), abs=1e-8)
            drho = (float(dens.psi(r, xi + h)) - float(dens.psi(r, xi - h))) / (2 * h)
            assert drho == pytest.approx(float(dens.rho(r, xi)), abs=2e-3)


def test_psi_strictly_increasing():
    dens = _tab_density()
    xs = np.linspace(-0.99, 0.99, 101)
    vals = np.array([float(dens.psi(0.4, x)) for x in xs])
    assert np.all(np.diff(vals) > 0)


def test_node_model_matches_pointwise_psi(tgrid):
    from porohyst._kernels_py import _Psi_matrix, _psi_matrix, _rho_matrix

    for dens in (unit_density(), _tab_density()):
        model = dens.node_model(tgrid)
        xs = np.linspace(-0.98, 0.98, 7)
        xi = np.tile(xs[:, None], (1, tgrid.count))
        got = _psi_matrix(model, xi)
        got_P = _Psi_matrix(model, xi)
        got_r = _rho_matrix(model, xi)
        for i, x in enumerate(xs):
            for j in (0, tgrid.count // 2, tgrid.count - 1):
                r = tgrid.nodes[j]
                assert got[i, j] == pytest.approx(float(dens.psi(r, x)), rel=1e-12, abs=1e-12)
                assert got_P[i, j] == pytest.approx(float(dens.Psi(r, x)), rel=1e-12, abs=1e-12)
                assert got_r[i, j] == pytest.approx(float(dens.rho(r, x)), rel=1e-12, abs=1e-12)


def test_psi_times_xi_dominates_Psi(rng):
    # psi(xi) xi - Psi(xi) >= rho0 xi^2 / 2, the coercivity the energy needs
    dens = _tab_density()
    for _ in range(50):
        r = rng.uniform(0.05, 0.95)
        xi = rng.uniform(-1, 1)
        lhs = float(dens.psi(r, xi)) * xi - float(dens.Psi(r, xi))
        assert lhs >= 0.5 * dens.rho0 * xi * xi - 1e-12


# ---------------------------------------------------------------------------
# input transformation
# ---------------------------------------------------------------------------


def test_identity_map():
    g = identity_map(1.0)
    u = np.linspace(-1, 1, 11)
    np.testing.assert_array_equal(g.g(u), u)
    np.testing.assert_array_equal(g.gprime(u), np.ones_like(u))
    assert g.g_lo == g.g_hi == 1.0


def test_cubic_map_bounds_and_derivative():
    g = ConvexifiableMap.make("cubic_odd", 1.0, {"a": 0.7, "b": 0.3})
    assert float(g.g(0.0)) == 0.0
    u = np.linspace(-1, 1, 201)
    vals = g.g(u)
    assert np.max(np.abs(vals)) <= 1.0 + 1e-12
    # finite-difference check of gprime (interior; the linear extension
    # kinks the curvature exactly at the domain edges)
    h = 1e-6
    ui = u[1:-1]
    fd = (g.g(ui + h) - g.g(ui - h)) / (2 * h)
    np.testing.assert_allclose(g.gprime(ui), fd, rtol=1e-7, atol=1e-7)
    assert np.all(g.gprime(u) >= g.g_lo - 1e-12)
    assert np.all(g.gprime(u) <= g.g_hi + 1e-12)
    # second-derivative bound
    fd2 = (g.g(ui + h) - 2 * g.g(ui) + g.g(ui - h)) / h**2
    assert np.max(np.abs(fd2)) <= g.g2_bound * (1 + 1e-4) + 1e-4


def test_cubic_map_rejects_escape():
    with pytest.raises(ConfigError):
        ConvexifiableMap.make("cubic_odd", 1.0, {"a": 1.0, "b": 0.5})


def test_tabulated_map_and_inverse():
    us = np.linspace(-1.2, 1.2, 25)
    gs = 0.8 * us + 0.1 * np.tanh(2 * us)
    g = ConvexifiableMap.make("tabulated_monotone", 1.0, {"u": us.tolist(), "g": gs.tolist()})
    u = np.linspace(-1, 1, 41)
    w = g.g(u)
    np.testing.assert_allclose(g.inverse(w), u, atol=1e-10)
    assert g.g_lo > 0


def test_linear_extension_outside_range():
    g = ConvexifiableMap.make("cubic_odd", 1.0, {"a": 0.5, "b": 0.1})
    inside = float(g.g(1.0))
    slope = float(g.gprime(1.0))
    assert float(g.g(1.5)) == pytest.approx(inside + 0.5 * slope, rel=1e-12)


def test_gmap_rejects_nonmonotone():
    with pytest.raises(ConfigError):
        ConvexifiableMap.make("cubic_odd", 1.0, {"a": 0.1, "b": -0.2})
    with pytest.raises(ConfigError):
        ConvexifiableMap.make(
            "tabulated_monotone", 1.0,
            {"u": [-1.5, 0.0, 1.5], "g": [0.5, 0.0, 1.0]},
        )

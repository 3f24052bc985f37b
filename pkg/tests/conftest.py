import numpy as np
import pytest

from porohyst import ThresholdGrid
from porohyst.density import PreisachDensity, identity_map
from porohyst.scenario import scenario_from_dict


def unit_density(lam=1.0, gbar=0.0, value=1.0):
    """Uniform density rho = value with bracketing bounds."""
    return PreisachDensity(
        kind="uniform",
        lam=lam,
        rho0=0.9 * value,
        rho1=1.1 * value,
        gbar=gbar,
        params={"value": value},
    )


def cosine_config(**overrides):
    """The standard 1D relaxation scenario used across the suite."""
    cfg = {
        "dim": 1,
        "nx": 128,
        "lx": 1.0,
        "tau": 1e-3,
        "t_end": 2.0,
        "thresholds": 64,
        "lambda": 1.0,
        "density": {
            "kind": "uniform",
            "rho0": 0.9,
            "rho1": 1.1,
            "gbar": 0.5,
            "params": {"value": 1.0},
        },
        "gmap": {"kind": "identity"},
        "compat_l": 2.5,
        "initial": {"kind": "cosine", "params": {"amplitude": 0.1, "k": 1}},
        "memory_mode": "auto_admissible",
        "snapshot_every": 0,
        "out_dir": "out",
        "solver": {"tol_abs": 1e-11, "tol_rel": 1e-12},
    }
    cfg.update(overrides)
    return cfg


def cosine_scenario(**overrides):
    return scenario_from_dict(cosine_config(**overrides))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def tgrid():
    return ThresholdGrid(lam=1.0, count=64)


@pytest.fixture(scope="session")
def udensity():
    return unit_density()


@pytest.fixture(scope="session")
def gid():
    return identity_map(1.0)


def random_consistent_curve(rng, tgrid, n_moves=8):
    """A memory curve reachable by inputs confined to [-lam, lam]."""
    from porohyst import MemoryCurve, curve_update

    curve = MemoryCurve.virgin(tgrid)
    for u in rng.uniform(-tgrid.lam, tgrid.lam, size=n_moves):
        curve = curve_update(curve, float(u))
    return curve

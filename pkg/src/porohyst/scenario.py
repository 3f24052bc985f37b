"""Scenario configuration: a single JSON document, validated fail-fast.

Top-level keys (exact): dim, nx, ny, lx, ly, tau, t_end, steady_tol,
thresholds, lambda, density, gmap, compat_l, initial, memory_mode,
snapshot_every, out_dir, solver.  Unknown keys are rejected anywhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .density import ConvexifiableMap, PreisachDensity
from .errors import ConfigError
from .hysteresis import ThresholdGrid
from .spatial import Grid
from .stepper import Problem, SolverOptions

_TOP_KEYS = {
    "dim", "nx", "ny", "lx", "ly", "tau", "t_end", "steady_tol",
    "thresholds", "lambda", "density", "gmap", "compat_l", "initial",
    "memory_mode", "snapshot_every", "out_dir", "solver",
}
_DENSITY_KEYS = {"kind", "rho0", "rho1", "gbar", "params"}
_GMAP_KEYS = {"kind", "params"}
_INITIAL_KEYS = {"kind", "params"}
_SOLVER_KEYS = {
    "tol_abs", "tol_rel", "max_newton", "eps_deg",
    "relax_omega", "max_relax", "inner_tol", "inner_max_iter",
}
_MEMORY_MODES = ("auto_admissible", "virgin_clamped")


def _check_keys(mapping, allowed, where):
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def _need(mapping, key, where):
    if key not in mapping:
        raise ConfigError(f"missing key {key!r} in {where}")
    return mapping[key]


def _positive(value, name):
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {value!r}") from None
    if not v > 0.0:
        raise ConfigError(f"{name} must be positive, got {v}")
    return v


@dataclass(frozen=True)
class Scenario:
    dim: int
    nx: int
    ny: int
    lx: float
    ly: float
    tau: float
    t_end: float | None
    steady_tol: float | None
    thresholds: int
    lam: float
    density_cfg: dict
    gmap_cfg: dict
    compat_l: float
    initial_cfg: dict
    memory_mode: str
    snapshot_every: int
    out_dir: str
    solver_cfg: dict = field(default_factory=dict)

    # ---- builders -------------------------------------------------------

    def grid(self) -> Grid:
        return Grid(dim=self.dim, nx=self.nx, lx=self.lx, ny=self.ny, ly=self.ly)

    def threshold_grid(self) -> ThresholdGrid:
        return ThresholdGrid(lam=self.lam, count=self.thresholds)

    def density(self) -> PreisachDensity:
        cfg = self.density_cfg
        return PreisachDensity(
            kind=cfg["kind"],
            lam=self.lam,
            rho0=float(cfg["rho0"]),
            rho1=float(cfg["rho1"]),
            gbar=float(cfg.get("gbar", 0.0)),
            params=dict(cfg.get("params", {})),
        )

    def gmap(self) -> ConvexifiableMap:
        return ConvexifiableMap.make(
            self.gmap_cfg["kind"], self.lam, self.gmap_cfg.get("params", {})
        )

    def problem(self) -> Problem:
        return Problem(
            grid=self.grid(),
            tgrid=self.threshold_grid(),
            density=self.density(),
            gmap=self.gmap(),
            compat_L=self.compat_l,
        )

    def solver_options(self) -> SolverOptions:
        return SolverOptions(**self.solver_cfg)

    def initial_field(self, grid: Grid) -> np.ndarray:
        kind = self.initial_cfg["kind"]
        params = self.initial_cfg.get("params", {})
        centers = grid.cell_centers()
        x = centers[0]
        if kind == "constant":
            return np.full(grid.shape, float(params["value"]))
        if kind == "cosine":
            a = float(params["amplitude"])
            k = params.get("k", 1)
            if grid.dim == 1:
                return a * np.cos(int(k) * np.pi * x / grid.lx)
            kx, ky = (k if np.iterable(k) else (k, k))
            y = centers[1]
            return a * np.outer(
                np.cos(int(kx) * np.pi * x / grid.lx),
                np.cos(int(ky) * np.pi * y / grid.ly),
            )
        if kind == "gaussian":
            a = float(params["amplitude"])
            sig = _positive(params["sigma"], "initial.params.sigma")
            x0 = float(params.get("x0", 0.5 * grid.lx))
            if grid.dim == 1:
                return a * np.exp(-((x - x0) ** 2) / (2 * sig * sig))
            y0 = float(params.get("y0", 0.5 * grid.ly))
            y = centers[1]
            rsq = (x[:, None] - x0) ** 2 + (y[None, :] - y0) ** 2
            return a * np.exp(-rsq / (2 * sig * sig))
        if kind == "step":
            a = float(params["amplitude"])
            x0 = float(params.get("x0", 0.5 * grid.lx))
            vals = np.where(x < x0, a, -a)
            if grid.dim == 1:
                return vals
            return np.repeat(vals[:, None], grid.ny, axis=1)
        raise ConfigError(f"unknown initial condition kind {kind!r}")

    def config_echo(self) -> dict:
        return {
            "dim": self.dim, "nx": self.nx, "ny": self.ny,
            "lx": self.lx, "ly": self.ly, "tau": self.tau,
            "t_end": self.t_end, "steady_tol": self.steady_tol,
            "thresholds": self.thresholds, "lambda": self.lam,
            "density": self.density_cfg, "gmap": self.gmap_cfg,
            "compat_l": self.compat_l, "initial": self.initial_cfg,
            "memory_mode": self.memory_mode,
            "snapshot_every": self.snapshot_every,
            "out_dir": self.out_dir, "solver": self.solver_cfg,
            "steady_window_steps": 100,
        }


def scenario_from_dict(raw: dict) -> Scenario:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    _check_keys(raw, _TOP_KEYS, "config")
    dim = int(_need(raw, "dim", "config"))
    if dim not in (1, 2):
        raise ConfigError(f"dim must be 1 or 2, got {dim}")
    nx = int(_need(raw, "nx", "config"))
    lx = _positive(_need(raw, "lx", "config"), "lx")
    ny = int(raw.get("ny", 1))
    ly = float(raw.get("ly", 1.0))
    if dim == 2:
        if "ny" not in raw or "ly" not in raw:
            raise ConfigError("2D scenarios require ny and ly")
        ly = _positive(ly, "ly")
    tau = _positive(_need(raw, "tau", "config"), "tau")
    t_end = raw.get("t_end")
    steady_tol = raw.get("steady_tol")
    if t_end is None and steady_tol is None:
        raise ConfigError("provide t_end, steady_tol or both as a stopping rule")
    if t_end is not None:
        t_end = _positive(t_end, "t_end")
    if steady_tol is not None:
        steady_tol = float(steady_tol)
    thresholds = int(_need(raw, "thresholds", "config"))
    lam = _positive(_need(raw, "lambda", "config"), "lambda")
    compat_l = _positive(_need(raw, "compat_l", "config"), "compat_l")

    density_cfg = _need(raw, "density", "config")
    _check_keys(density_cfg, _DENSITY_KEYS, "density")
    for key in ("kind", "rho0", "rho1"):
        _need(density_cfg, key, "density")

    gmap_cfg = _need(raw, "gmap", "config")
    _check_keys(gmap_cfg, _GMAP_KEYS, "gmap")
    _need(gmap_cfg, "kind", "gmap")

    initial_cfg = _need(raw, "initial", "config")
    _check_keys(initial_cfg, _INITIAL_KEYS, "initial")
    _need(initial_cfg, "kind", "initial")

    memory_mode = str(_need(raw, "memory_mode", "config"))
    snapshot_every = int(raw.get("snapshot_every", 0))
    if snapshot_every < 0:
        raise ConfigError("snapshot_every must be >= 0")
    out_dir = str(raw.get("out_dir", "out"))

    solver_cfg = dict(raw.get("solver", {}))
    _check_keys(solver_cfg, _SOLVER_KEYS, "solver")

    scenario = Scenario(
        dim=dim, nx=nx, ny=ny, lx=lx, ly=ly, tau=tau,
        t_end=t_end, steady_tol=steady_tol,
        thresholds=thresholds, lam=lam,
        density_cfg=density_cfg, gmap_cfg=gmap_cfg,
        compat_l=compat_l, initial_cfg=initial_cfg,
        memory_mode=memory_mode, snapshot_every=snapshot_every,
        out_dir=out_dir, solver_cfg=solver_cfg,
    )
    _validate_semantics(scenario)
    return scenario


def _validate_semantics(sc: Scenario) -> None:
    # construct everything once so bad parameters fail before the run starts
    grid = sc.grid()
    sc.threshold_grid()
    sc.density()
    sc.gmap()
    sc.solver_options()
    u0 = sc.initial_field(grid)
    if float(np.max(np.abs(u0))) > sc.lam * (1 + 1e-12):
        raise ConfigError(
            f"initial pressure peaks at {float(np.max(np.abs(u0))):.6g}, "
            f"above lambda={sc.lam}"
        )
    if sc.memory_mode not in _MEMORY_MODES and not Path(sc.memory_mode).exists():
        raise ConfigError(
            f"memory_mode must be one of {_MEMORY_MODES} or an existing memory "
            f"file path, got {sc.memory_mode!r}"
        )


def load_config(path) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return scenario_from_dict(raw)


def load_memory_file(path, grid: Grid, tgrid: ThresholdGrid) -> np.ndarray:
    """Read a memory state matrix from a cell_index,r,xi CSV file."""
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except OSError as exc:
        raise ConfigError(f"cannot read memory file {path}: {exc}") from exc
    if data.shape[1] != 3:
        raise ConfigError("memory file must have columns cell_index,r,xi")
    n, count = grid.ncells, tgrid.count
    if data.shape[0] != n * count:
        raise ConfigError(
            f"memory file has {data.shape[0]} rows, expected {n * count}"
        )
    order = np.lexsort((data[:, 1], data[:, 0]))
    data = data[order]
    cells = data[:, 0].astype(int).reshape(n, count)
    if not np.array_equal(cells[:, 0], np.arange(n)):
        raise ConfigError("memory file cell indices must cover 0..ncells-1")
    rvals = data[:, 1].reshape(n, count)
    if not np.allclose(rvals, tgrid.nodes[None, :], rtol=0, atol=1e-9 * tgrid.lam):
        raise ConfigError("memory file threshold nodes do not match the grid")
    return np.ascontiguousarray(data[:, 2].reshape(n, count))

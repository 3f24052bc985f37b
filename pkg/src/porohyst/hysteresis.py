"""Scalar hysteresis engine: play states, memory curves and their calculus.

The memory at one spatial point is the curve r -> xi^r sampled on a fixed
midpoint threshold grid.  Updating the memory for a new input value is a
per-node projection (the time-discrete play operator); the operator output,
stored energy, dissipation and distances are midpoint-rule integrals over
the threshold variable.

All operations are pure: they never mutate their arguments and are safe to
call concurrently on distinct curves.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels
from .errors import (
    DomainError,
    GridMismatchError,
    HypothesisError,
    InvalidThresholdError,
)

_SLOPE_RTOL = 1e-8  # relative tolerance for the initial-memory slope check


@dataclass(frozen=True)
class ThresholdGrid:
    """Midpoint grid r_j = (j - 1/2) * lam / count on (0, lam).

    ``lam`` is the maximal threshold: play states vanish identically for
    r >= lam as long as the driving input stays inside [-lam, lam].
    """

    lam: float
    count: int = 128

    def __post_init__(self):
        if self.lam <= 0.0:
            raise ValueError("lam must be positive")
        if self.count < 2:
            raise ValueError("at least two threshold nodes are required")

    @property
    def dr(self) -> float:
        return self.lam / self.count

    @cached_property
    def nodes(self) -> np.ndarray:
        return (np.arange(self.count, dtype=float) + 0.5) * self.dr


@dataclass(frozen=True)
class MemoryCurve:
    """Sampled play states xi^{r_j} over a threshold grid."""

    grid: ThresholdGrid
    xi: np.ndarray

    def __post_init__(self):
        xi = np.ascontiguousarray(np.asarray(self.xi, dtype=float))
        if xi.shape != (self.grid.count,):
            raise ValueError(f"xi must have shape ({self.grid.count},)")
        object.__setattr__(self, "xi", xi)

    @classmethod
    def virgin(cls, grid: ThresholdGrid) -> "MemoryCurve":
        return cls(grid, np.zeros(grid.count))


@dataclass(frozen=True)
class Violation:
    cell: int
    condition: str  # C0 | C1 | C2 | Lipschitz | LambdaFeasibility
    magnitude: float


@dataclass(frozen=True)
class HypothesisReport:
    violations: tuple = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations


# ---------------------------------------------------------------------------
# play and curve updates
# ---------------------------------------------------------------------------


def play_update(xi_prev: float, u: float, r: float) -> float:
    """One implicit step of the play with threshold r.

    Projects the previous state onto the band [u - r, u + r]; the result
    is the unique solution of the discrete variational inequality
    |u - xi| <= r, (xi - xi_prev)(u - xi - z) >= 0 for all |z| <= r.
    """
    if not r > 0.0:
        raise InvalidThresholdError(f"threshold must be positive, got {r}")
    return max(u - r, min(xi_prev, u + r))


def curve_update(curve: MemoryCurve, u: float) -> MemoryCurve:
    """Apply the play update at every threshold node."""
    xi = curve.xi.copy().reshape(1, -1)
    kernels.commit_plays(xi, np.array([float(u)]), curve.grid.nodes)
    return MemoryCurve(curve.grid, xi[0])


# ---------------------------------------------------------------------------
# outputs, energy, dissipation
# ---------------------------------------------------------------------------


def preisach_output(curve: MemoryCurve, density) -> float:
    """gbar + dr * sum_j psi(r_j, xi_j), the operator output."""
    model = density.node_model(curve.grid)
    s, _ = kernels.memory_outputs(curve.xi.reshape(1, -1), model)
    return float(s[0])


def branch_value(curve_prev: MemoryCurve, density, gmap, u: float) -> float:
    """Tentative output after input u, without committing the memory.

    Nondecreasing in u; strictly increasing once the transformed input
    moves far enough to re-attach thresholds.
    """
    model = density.node_model(curve_prev.grid)
    w = np.array([float(gmap.g(u))])
    b, _ = kernels.branch_eval(curve_prev.xi.reshape(1, -1), w, model)
    return float(b[0])


def branch_slope(curve_prev: MemoryCurve, density, gmap, u: float) -> float:
    """One-sided derivative of branch_value at u.

    Equals g'(u) * dr * sum of rho over the nodes the tentative update
    moved; exactly zero at a turning point (no node re-attached yet),
    and never above g_hi * rho1 * lam.
    """
    model = density.node_model(curve_prev.grid)
    w = np.array([float(gmap.g(u))])
    _, s = kernels.branch_eval(curve_prev.xi.reshape(1, -1), w, model, want_slope=True)
    return float(gmap.gprime(u)) * float(s[0])


def stored_energy(curve: MemoryCurve, density) -> float:
    """dr * sum_j (psi(r_j, xi_j) xi_j - Psi(r_j, xi_j)), always >= 0."""
    model = density.node_model(curve.grid)
    _, e = kernels.memory_outputs(curve.xi.reshape(1, -1), model)
    return float(e[0])


def dissipation_increment(curve_prev: MemoryCurve, curve_next: MemoryCurve, density) -> float:
    """Energy dissipated between two states of one monotone update.

    dr * sum_j r_j |psi(r_j, xi_j_next) - psi(r_j, xi_j_prev)|; since each
    node moves monotonically within a single update, this equals the time
    integral of r rho |xi_t| over the step exactly.
    """
    if curve_prev.grid is not curve_next.grid and curve_prev.grid != curve_next.grid:
        raise GridMismatchError("curves live on different threshold grids")
    model = density.node_model(curve_prev.grid)
    d = kernels.dissipation_between(
        curve_prev.xi.reshape(1, -1), curve_next.xi.reshape(1, -1), model
    )
    return float(d[0])


def memory_distance(curve_a: MemoryCurve, curve_b: MemoryCurve) -> float:
    """Threshold-weighted L1 distance dr * sum_j r_j |xi_j^a - xi_j^b|."""
    if curve_a.grid is not curve_b.grid and curve_a.grid != curve_b.grid:
        raise GridMismatchError("curves live on different threshold grids")
    d = kernels.weighted_distance(
        curve_a.xi.reshape(1, -1),
        curve_b.xi.reshape(1, -1),
        curve_a.grid.nodes,
        curve_a.grid.dr,
    )
    return float(d[0])


def active_level(curve: MemoryCurve, u: float) -> float:
    """Largest node still pinned to the input, 0 if none.

    A node counts as pinned when |xi_j - u| exceeds r_j - dr/2 strictly;
    below the returned level every play sits on its band edge.
    """
    lev = kernels.active_levels(
        curve.xi.reshape(1, -1), np.array([float(u)]), curve.grid.nodes, curve.grid.dr
    )
    return float(lev[0])


# ---------------------------------------------------------------------------
# admissible initial memory
# ---------------------------------------------------------------------------


def admissible_memory(u0: float, lap_u0: float, Lconst: float, grid: ThresholdGrid) -> MemoryCurve:
    """Initial memory compatible with pressure u0 and curvature lap_u0.

    The curve anchors at u0, descends with slope -sign(lap_u0) down to the
    depth r0 = sqrt(|lap_u0|) / Lconst and then returns to zero along the
    shortest 1-Lipschitz path.  Raises HypothesisError when the curve
    cannot vanish by lam.
    """
    if Lconst <= 0.0:
        raise ValueError("Lconst must be positive")
    lam = grid.lam
    if abs(u0) > lam * (1 + 1e-12):
        raise DomainError(f"|u0|={abs(u0)} exceeds lam={lam}")
    xi, bad = _admissible_values(
        np.array([float(u0)]), np.array([float(lap_u0)]), Lconst, grid
    )
    if bad:
        _, cond, mag = bad[0]
        raise HypothesisError(
            f"initial memory infeasible ({cond}, excess {mag:.3g})",
            violations=[Violation(0, cond, mag)],
        )
    return MemoryCurve(grid, xi[0])


def _admissible_values(u0, lap, Lconst, grid):
    """Vectorised admissible-memory construction over cells.

    Returns the (ncells, R) state matrix and a list of
    (cell, condition, magnitude) feasibility failures.
    """
    lam, nodes = grid.lam, grid.nodes
    r0 = np.sqrt(np.abs(lap)) / Lconst
    d = np.sign(lap)
    v0 = u0 - d * r0
    seg = u0[:, None] - d[:, None] * nodes[None, :]
    tail = np.sign(v0)[:, None] * np.maximum(
        0.0, np.abs(v0)[:, None] - (nodes[None, :] - r0[:, None])
    )
    xi = np.where(nodes[None, :] < r0[:, None], seg, tail)
    bad = []
    tol = 1e-12 * max(1.0, lam)
    for c in np.nonzero(r0 > lam + tol)[0]:
        bad.append((int(c), "C1", float(r0[c] - lam)))
    reach = r0 + np.abs(v0)
    for c in np.nonzero(reach > lam + tol)[0]:
        if r0[c] <= lam + tol:
            bad.append((int(c), "LambdaFeasibility", float(reach[c] - lam)))
    return xi, bad


def validate_hypothesis(
    curve: MemoryCurve, u0: float, lap_u0: float, Lconst: float
) -> HypothesisReport:
    """Check the initial compatibility conditions on one curve.

    Verifies the anchor value (C0), the feasibility of the slope depth
    (C1), the slope direction below that depth (C2), the 1-Lipschitz
    property across nodes and the vanishing-by-lam cone bound.  Violations
    are reported, never raised.
    """
    rows = validate_memory_batch(
        curve.xi.reshape(1, -1),
        np.array([float(u0)]),
        np.array([float(lap_u0)]),
        Lconst,
        curve.grid,
    )
    return HypothesisReport(tuple(rows))


def validate_memory_batch(xi, u0, lap, Lconst, grid) -> list[Violation]:
    """Per-cell hypothesis checks on an (ncells, R) state matrix."""
    lam, dr, nodes = grid.lam, grid.dr, grid.nodes
    out: list[Violation] = []
    # C0: anchor extrapolated through the first two nodes
    anchor = 1.5 * xi[:, 0] - 0.5 * xi[:, 1]
    c0 = np.abs(anchor - u0)
    for c in np.nonzero(c0 > dr)[0]:
        out.append(Violation(int(c), "C0", float(c0[c])))
    # C1: slope depth must fit under lam
    r0 = np.sqrt(np.abs(lap)) / Lconst
    for c in np.nonzero(r0 > lam + 1e-12 * max(1.0, lam))[0]:
        out.append(Violation(int(c), "C1", float(r0[c] - lam)))
    # C2: slope equals -sign(lap) on node pairs fully below r0
    slopes = np.diff(xi, axis=1) / dr
    inside = nodes[None, 1:] <= r0[:, None]
    want = -np.sign(lap)[:, None]
    err = np.where(inside & (lap[:, None] != 0.0), np.abs(slopes - want), 0.0)
    worst = err.max(axis=1) if err.shape[1] else np.zeros(xi.shape[0])
    for c in np.nonzero(worst > _SLOPE_RTOL)[0]:
        out.append(Violation(int(c), "C2", float(worst[c])))
    # Lipschitz in the threshold variable
    lip = np.abs(np.diff(xi, axis=1)) - dr
    worst = lip.max(axis=1) if lip.shape[1] else np.zeros(xi.shape[0])
    tol = 1e-10 * dr + 1e-14
    for c in np.nonzero(worst > tol)[0]:
        out.append(Violation(int(c), "Lipschitz", float(worst[c])))
    # cone bound: the curve must be able to vanish by lam
    excess = (np.abs(xi) - np.maximum(0.0, lam - nodes)[None, :]).max(axis=1)
    for c in np.nonzero(excess > 1e-12 * max(1.0, lam))[0]:
        out.append(Violation(int(c), "LambdaFeasibility", float(excess[c])))
    return out


def clamped_memory_values(u0, grid):
    """Virgin-clamped profile sign(u0) * max(0, |u0| - r) over cells.

    Hypothesis-compatible only where the initial pressure field has zero
    Laplacian; used as a preset and in the startup validation path.
    """
    nodes = grid.nodes
    return np.sign(u0)[:, None] * np.maximum(0.0, np.abs(u0)[:, None] - nodes[None, :])


__all__ = [
    "ThresholdGrid",
    "MemoryCurve",
    "Violation",
    "HypothesisReport",
    "play_update",
    "curve_update",
    "preisach_output",
    "branch_value",
    "branch_slope",
    "stored_energy",
    "dissipation_increment",
    "memory_distance",
    "active_level",
    "admissible_memory",
    "validate_hypothesis",
    "validate_memory_batch",
    "clamped_memory_values",
]

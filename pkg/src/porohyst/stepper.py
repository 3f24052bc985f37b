"""Implicit time stepping for the hysteresis diffusion system.

Each step solves the strictly monotone per-cell system

    B(u) - s_prev - tau * laplacian(u) = 0

where B is the tentative operator output against the committed memory.
A damped Newton iteration with a floored diagonal Jacobian is tried first;
on stall, a globally convergent relaxation iteration with a majorant of
the branch slope takes over.  Converged iterates solve the unmodified
residual, so the Jacobian floor never biases the solution.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels, spatial
from .density import ConvexifiableMap, PreisachDensity
from .errors import ConfigError, HypothesisError, SolverFailure, SpdSolveError
from .hysteresis import (
    ThresholdGrid,
    Violation,
    _admissible_values,
    clamped_memory_values,
    validate_memory_batch,
)
from .orlicz import orlicz_functions
from .spatial import Grid


@dataclass(frozen=True)
class Problem:
    """Grid, thresholds, density and input map bundled for the stepper."""

    grid: Grid
    tgrid: ThresholdGrid
    density: PreisachDensity
    gmap: ConvexifiableMap
    compat_L: float

    @property
    def model(self):
        return self.density.node_model(self.tgrid)

    @property
    def slope_majorant(self) -> float:
        """Upper bound rho1 * lam * g_hi for the branch slope."""
        return self.density.rho1 * self.tgrid.lam * self.gmap.g_hi


@dataclass(frozen=True)
class SolverOptions:
    """Newton / relaxation tolerances; None fields are scaled per problem."""

    tol_abs: float | None = None  # default 1e-11 * rho1 * lam
    tol_rel: float = 1e-10
    max_newton: int = 20
    eps_deg: float | None = None  # Jacobian floor, default 1e-10 * rho1 * lam
    relax_omega: float | None = None  # default rho1 * lam * g_hi
    max_relax: int = 500
    inner_tol: float = 1e-12
    inner_max_iter: int = 5000

    def resolved(self, problem: Problem) -> "SolverOptions":
        scale = problem.density.rho1 * problem.tgrid.lam
        return replace(
            self,
            tol_abs=self.tol_abs if self.tol_abs is not None else 1e-11 * scale,
            eps_deg=self.eps_deg if self.eps_deg is not None else 1e-10 * scale,
            relax_omega=(
                self.relax_omega if self.relax_omega is not None else problem.slope_majorant
            ),
        )


@dataclass
class SimState:
    """Coupled state: pressure, per-cell memory, cached saturation, time.

    ``xi`` holds the play states in the transformed input variable,
    one row per cell (C-order flattening of the field arrays).
    """

    grid: Grid
    tgrid: ThresholdGrid
    u: np.ndarray
    xi: np.ndarray
    s: np.ndarray
    t: float = 0.0
    step_index: int = 0


@dataclass(frozen=True)
class StepReport:
    newton_iters: int
    relax_iters: int
    final_residual: float
    dissipation: float
    stored_energy: float
    mass: float
    gradient_energy: float
    orlicz_increment: float
    lp_increment: float
    max_abs_laplacian: float
    # run-level bookkeeping for the a-priori bounds
    twosided_excess: float
    max_abs_u: float
    cone_excess: float
    residual_history: tuple = field(default_factory=tuple)


def init_state(problem: Problem, u0: np.ndarray, memory_mode: str, memory_xi=None) -> SimState:
    """Build the initial coupled state and validate the memory hypothesis.

    memory_mode is one of ``auto_admissible`` (construct per-cell curves
    from the discrete Laplacian of u0), ``virgin_clamped`` (clamped
    profile, valid only where the Laplacian vanishes) or ``file``
    (memory_xi provides the (ncells, R) state matrix).
    """
    grid, tgrid = problem.grid, problem.tgrid
    u0 = np.asarray(u0, dtype=float).reshape(grid.shape)
    lam = tgrid.lam
    if float(np.max(np.abs(u0))) > lam * (1 + 1e-12):
        raise ConfigError(f"initial pressure exceeds lam={lam}")
    w0 = problem.gmap.g(u0.ravel())
    lap0 = spatial.laplacian(grid, u0).ravel()
    if memory_mode == "auto_admissible":
        xi, bad = _admissible_values(w0, lap0, problem.compat_L, tgrid)
        if bad:
            vio = [Violation(c, cond, mag) for c, cond, mag in bad]
            raise HypothesisError(
                f"admissible memory infeasible at {len(bad)} cell(s)", violations=vio
            )
    elif memory_mode == "virgin_clamped":
        xi = clamped_memory_values(w0, tgrid)
    elif memory_mode == "file":
        if memory_xi is None:
            raise ConfigError("memory_mode=file requires a memory state matrix")
        xi = np.ascontiguousarray(memory_xi, dtype=float)
        if xi.shape != (grid.ncells, tgrid.count):
            raise ConfigError(
                f"memory state has shape {xi.shape}, expected {(grid.ncells, tgrid.count)}"
            )
    else:
        raise ConfigError(f"unknown memory mode {memory_mode!r}")
    violations = validate_memory_batch(xi, w0, lap0, problem.compat_L, tgrid)
    if violations:
        cells = sorted({v.cell for v in violations})
        raise HypothesisError(
            f"initial memory violates the compatibility hypothesis at "
            f"{len(cells)} cell(s)",
            violations=violations,
        )
    s0, _ = kernels.memory_outputs(xi, problem.model)
    return SimState(grid=grid, tgrid=tgrid, u=u0, xi=np.ascontiguousarray(xi), s=s0.reshape(grid.shape))


def residual_eval(problem: Problem, state: SimState, u_cand: np.ndarray, tau: float) -> np.ndarray:
    """F(u) = B(u) - s_prev - tau * laplacian(u), cellwise."""
    b, _ = kernels.branch_eval(state.xi, problem.gmap.g(u_cand.ravel()), problem.model)
    return b.reshape(state.grid.shape) - state.s - tau * spatial.laplacian(state.grid, u_cand)


def _branch_and_slope(problem, state, u):
    b, srow = kernels.branch_eval(
        state.xi, problem.gmap.g(u.ravel()), problem.model, want_slope=True
    )
    slope = problem.gmap.gprime(u.ravel()) * srow
    return b.reshape(state.grid.shape), slope.reshape(state.grid.shape)


def step(problem: Problem, state: SimState, tau: float, opts: SolverOptions | None = None):
    """Advance one implicit step; returns (next_state, StepReport)."""
    if not tau > 0.0:
        raise ValueError("tau must be positive")
    opts = (opts or SolverOptions()).resolved(problem)
    grid = state.grid
    tol = opts.tol_abs + opts.tol_rel * float(np.max(np.abs(state.s)))

    u = state.u.copy()
    F = residual_eval(problem, state, u, tau)
    res_inf = float(np.max(np.abs(F)))
    history = [res_inf]
    newton_iters = 0
    relax_iters = 0

    while res_inf > tol and newton_iters < opts.max_newton:
        _, slope = _branch_and_slope(problem, state, u)
        diag = np.maximum(slope, opts.eps_deg)
        try:
            delta = spatial.spd_solve(
                grid, diag, tau, -F, tol=opts.inner_tol, max_iter=opts.inner_max_iter
            )
        except SpdSolveError:
            break
        f0 = float(np.linalg.norm(F.ravel()))
        alpha = 1.0
        accepted = False
        for _ in range(30):
            u_try = u + alpha * delta
            F_try = residual_eval(problem, state, u_try, tau)
            if float(np.linalg.norm(F_try.ravel())) <= (1.0 - 1e-4 * alpha) * f0:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        u, F = u_try, F_try
        res_inf = float(np.max(np.abs(F)))
        history.append(res_inf)
        newton_iters += 1

    if res_inf > tol:
        # globally convergent fallback: omega majorises the branch slope
        omega = opts.relax_omega
        omega_field = np.full(grid.shape, omega)
        while relax_iters < opts.max_relax:
            b, _ = kernels.branch_eval(state.xi, problem.gmap.g(u.ravel()), problem.model)
            rhs = omega * u - (b.reshape(grid.shape) - state.s)
            u = spatial.spd_solve(
                grid, omega_field, tau, rhs, tol=opts.inner_tol, max_iter=opts.inner_max_iter
            )
            F = residual_eval(problem, state, u, tau)
            res_inf = float(np.max(np.abs(F)))
            history.append(res_inf)
            relax_iters += 1
            if res_inf <= tol:
                break
        else:
            raise SolverFailure(
                f"step {state.step_index + 1}: residual {res_inf:.3e} above "
                f"tolerance {tol:.3e} after Newton and relaxation",
                residual_history=history,
            )

    # commit memory at the accepted pressure
    w_prev = problem.gmap.g(state.u.ravel())
    w_next = problem.gmap.g(u.ravel())
    xi_next = state.xi.copy()
    kernels.commit_plays(xi_next, w_next, problem.tgrid.nodes)
    s_row, energy_row = kernels.memory_outputs(xi_next, problem.model)
    s_next = s_row.reshape(grid.shape)
    diss_row = kernels.dissipation_between(state.xi, xi_next, problem.model)

    measure = grid.cell_measure
    dw = np.abs(w_next - w_prev)
    du = (u - state.u).ravel()
    orl = orlicz_functions(grid.dim, tau)
    lap_next = spatial.laplacian(grid, u)

    ds = (s_next - state.s).ravel()
    c2s = problem.slope_majorant
    scale = max(float(np.max(ds * ds)), (opts.tol_abs) ** 2)
    excess1 = float(np.max(ds * ds - c2s * ds * du)) / scale
    scale2 = max(c2s * float(np.max(du * du)), opts.tol_abs)
    excess2 = float(np.max(ds * du - c2s * du * du)) / scale2

    lam, nodes = problem.tgrid.lam, problem.tgrid.nodes
    cone = float(np.max(np.abs(xi_next) - np.maximum(0.0, lam - nodes)[None, :]))

    report = StepReport(
        newton_iters=newton_iters,
        relax_iters=relax_iters,
        final_residual=res_inf,
        dissipation=float(np.sum(diss_row)) * measure,
        stored_energy=float(np.sum(energy_row)) * measure,
        mass=spatial.integrate(grid, s_next),
        gradient_energy=spatial.gradient_energy(grid, u),
        orlicz_increment=float(np.sum(orl.Q(dw / tau))) * measure,
        lp_increment=float(np.sum(np.abs(du / tau) ** orl.p)) * measure,
        max_abs_laplacian=float(np.max(np.abs(lap_next))),
        twosided_excess=max(excess1, excess2),
        max_abs_u=float(np.max(np.abs(u))),
        cone_excess=cone,
        residual_history=tuple(history),
    )
    next_state = SimState(
        grid=grid,
        tgrid=state.tgrid,
        u=u,
        xi=xi_next,
        s=s_next,
        t=state.t + tau,
        step_index=state.step_index + 1,
    )
    return next_state, report


# ---------------------------------------------------------------------------
# backward step
# ---------------------------------------------------------------------------


def _reverse_branch_values(model, xi, w0, d, r0, delta):
    """Memory a half step into the past, continued along the active branch.

    For cells moving back by delta (in the transformed variable), nodes in
    the pinned prefix follow the earlier input, a 1-Lipschitz splice of
    width delta/2 reconnects to the frozen part, and deeper nodes keep
    their values (clipped into the consistency band).  Returns the operator
    output of that backward memory per cell.
    """
    nodes = model.nodes
    v = w0 - d * delta
    pin = nodes[None, :] <= (r0 - 0.5 * delta)[:, None]
    splice = nodes[None, :] <= r0[:, None]
    lam_v = np.where(
        pin,
        v[:, None] - d[:, None] * nodes[None, :],
        np.where(
            splice,
            w0[:, None] - d[:, None] * (2.0 * r0[:, None] - nodes[None, :]),
            np.clip(xi, v[:, None] - nodes[None, :], v[:, None] + nodes[None, :]),
        ),
    )
    s, _ = kernels.memory_outputs(np.ascontiguousarray(lam_v), model)
    return s


def backward_step(problem: Problem, state0: SimState, tau: float):
    """Construct the pre-initial pressure and output realising the scheme at i = 0.

    Solves, per cell, the monotone scalar equation "backward output equals
    s0 - tau * laplacian(u0)" by bisection over the backward increment,
    walking back along the branch the initial memory encodes.  Requires
    tau < rho0 / (2 L^2); the increment |u0 - u_-1| is then O(tau)
    uniformly.  Returns (u_minus1, g_minus1) as fields.
    """
    rho0, L = problem.density.rho0, problem.compat_L
    if not tau < rho0 / (2.0 * L * L):
        raise ValueError(
            f"tau={tau} too large for the backward step; need tau < rho0/(2 L^2) "
            f"= {rho0 / (2 * L * L):.6g}"
        )
    grid, tgrid, model = problem.grid, problem.tgrid, problem.model
    u0 = state0.u
    w0 = problem.gmap.g(u0.ravel())
    lap0 = spatial.laplacian(grid, u0).ravel()
    s0 = state0.s.ravel()
    target = s0 - tau * lap0

    d = np.sign(lap0)
    r0 = np.sqrt(np.abs(lap0)) / L
    solvable = (d != 0.0) & (r0 >= tgrid.nodes[0])

    delta_lo = np.zeros_like(w0)
    delta_hi = np.where(solvable, np.minimum(r0, tgrid.lam), 0.0)

    # residual in the walking direction: h(delta) = d * (B(delta) - target),
    # h(0) = tau |lap0| >= 0, decreasing in delta
    def h(delta):
        vals = _reverse_branch_values(model, state0.xi, w0, d, r0, delta)
        return d * (vals - target)

    h_hi = h(delta_hi)
    bad = solvable & (h_hi > 0.0)
    if np.any(bad):
        cells = np.nonzero(bad)[0][:20]
        raise HypothesisError(
            "backward step bracket failure (initial memory lacks the depth "
            f"required by the hypothesis) at cells {cells.tolist()}",
            violations=[Violation(int(c), "C1", float(h_hi[c])) for c in cells],
        )
    for _ in range(90):
        mid = 0.5 * (delta_lo + delta_hi)
        pos = h(mid) > 0.0
        delta_lo = np.where(solvable & pos, mid, delta_lo)
        delta_hi = np.where(solvable & ~pos, mid, delta_hi)
    delta = np.where(solvable, 0.5 * (delta_lo + delta_hi), 0.0)

    g_m1 = _reverse_branch_values(model, state0.xi, w0, d, r0, delta)
    g_m1 = np.where(solvable, g_m1, target)
    u_m1 = problem.gmap.inverse(w0 - d * delta)
    return u_m1.reshape(grid.shape), g_m1.reshape(grid.shape)

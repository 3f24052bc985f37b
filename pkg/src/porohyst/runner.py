"""Run loop, diagnostics aggregation and all file output.

Produces, per run: ``timeseries.csv`` (one row per step, flushed as it
goes), ``snapshot_<step>.csv`` / ``memory_<step>.csv`` at the configured
cadence, and ``summary.json``.  Re-running the same configuration with the
same kernel backend reproduces ``timeseries.csv`` byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import kernels, spatial
from .errors import OutputError
from .orlicz import orlicz_functions
from .scenario import Scenario, load_memory_file
from .stepper import SimState, init_state, step

STEADY_WINDOW = 100  # trailing steps compared for mean-pressure stagnation

_TIMESERIES_HEADER = "step,t,mass,V,E,D_cum,U_mean,orlicz_budget,newton_iters,residual"


def _fmt(x) -> str:
    return f"{x:.17g}"


@dataclass
class TimeSeries:
    """Columns of timeseries.csv plus the constants diagnostics need."""

    step: np.ndarray
    t: np.ndarray
    mass: np.ndarray
    V: np.ndarray
    E: np.ndarray
    D_cum: np.ndarray
    U_mean: np.ndarray
    orlicz_budget: np.ndarray
    newton_iters: np.ndarray
    residual: np.ndarray
    lp_budget: np.ndarray
    tau: float
    mu1h: float
    decay_c: float


@dataclass
class FieldHistory:
    times: np.ndarray
    u: np.ndarray  # (nrec, *shape)
    s: np.ndarray


@dataclass
class RunResult:
    scenario: Scenario
    series: TimeSeries
    summary: dict
    final_state: SimState
    u_at_end: np.ndarray | None
    omega_series: list
    diagnostics: dict
    history: FieldHistory | None = None


# ---------------------------------------------------------------------------
# diagnostics on series
# ---------------------------------------------------------------------------


def steady_detect(series: TimeSeries, tol, window: int = STEADY_WINDOW):
    """First time with V <= tol^2 and a stagnant trailing mean pressure.

    Returns None when never detected; tol <= 0 disables detection.
    """
    if tol is None or tol <= 0.0:
        return None
    V, U, t = series.V, series.U_mean, series.t
    for i in range(window, len(t)):
        if V[i] <= tol * tol and abs(U[i] - U[i - window]) <= tol:
            return float(t[i])
    return None


def decay_fit(series: TimeSeries):
    """Least-squares decay rate of log V and the a-priori bound rate.

    Fits over records with V in [1e-20, V0/2]; requires at least 10 of
    them.  Returns (mu_hat, bound_rate) with bound_rate =
    log(1 + mu1h * tau / c) / tau.
    """
    V, t = series.V, series.t
    v0 = V[0]
    mask = (V >= 1e-20) & (V <= 0.5 * v0) & (V > 1e-30)
    bound_rate = np.log1p(series.mu1h * series.tau / series.decay_c) / series.tau
    if int(np.sum(mask)) < 10:
        raise ValueError("not enough records in the fitting window")
    ts, vs = t[mask], np.log(V[mask])
    slope = np.polyfit(ts, vs, 1)[0]
    return float(-slope), float(bound_rate)


def orlicz_budget(series: TimeSeries):
    """Accumulated budgets: (convex-generator total, plain L^p total)."""
    return float(series.orlicz_budget[-1]), float(series.lp_budget[-1])


def interpolate_output(history: FieldHistory, t: float, kind: str = "linear"):
    """Fields (u, s) at time t from recorded steps.

    ``linear`` interpolates both fields in time (the continuous-time
    interpolant of the scheme); ``constant`` returns the right-endpoint
    step values, right-continuous at record times.
    """
    times = history.times
    if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
        raise ValueError(f"t={t} outside the recorded span [{times[0]}, {times[-1]}]")
    t = min(max(t, times[0]), times[-1])
    if kind == "constant":
        i = int(np.searchsorted(times, t, side="right"))
        i = min(i, len(times) - 1)
        return history.u[i].copy(), history.s[i].copy()
    if kind != "linear":
        raise ValueError(f"unknown interpolation kind {kind!r}")
    i = int(np.searchsorted(times, t, side="right")) - 1
    i = min(max(i, 0), len(times) - 2)
    t0, t1 = times[i], times[i + 1]
    lam = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
    u = (1 - lam) * history.u[i] + lam * history.u[i + 1]
    s = (1 - lam) * history.s[i] + lam * history.s[i + 1]
    return u, s


# ---------------------------------------------------------------------------
# output writers
# ---------------------------------------------------------------------------


def _write_snapshot(out: Path, state: SimState, problem, step_no: int):
    grid = state.grid
    w = problem.gmap.g(state.u.ravel())
    lev = kernels.active_levels(state.xi, w, state.tgrid.nodes, state.tgrid.dr)
    u, s = state.u.ravel(), state.s.ravel()
    try:
        with open(out / f"snapshot_{step_no}.csv", "w", encoding="utf-8") as fh:
            if grid.dim == 1:
                (x,) = grid.cell_centers()
                fh.write("cell_index,x,u,s,active_level\n")
                for c in range(grid.ncells):
                    fh.write(
                        f"{c},{_fmt(x[c])},{_fmt(u[c])},{_fmt(s[c])},{_fmt(lev[c])}\n"
                    )
            else:
                x, y = grid.cell_centers()
                fh.write("cell_index,x,y,u,s,active_level\n")
                for c in range(grid.ncells):
                    i, j = divmod(c, grid.ny)
                    fh.write(
                        f"{c},{_fmt(x[i])},{_fmt(y[j])},{_fmt(u[c])},{_fmt(s[c])},"
                        f"{_fmt(lev[c])}\n"
                    )
        with open(out / f"memory_{step_no}.csv", "w", encoding="utf-8") as fh:
            fh.write("cell_index,r,xi\n")
            nodes = state.tgrid.nodes
            for c in range(grid.ncells):
                row = state.xi[c]
                for j in range(nodes.size):
                    fh.write(f"{c},{_fmt(nodes[j])},{_fmt(row[j])}\n")
    except OSError as exc:
        raise OutputError(f"cannot write snapshot files: {exc}") from exc


# ---------------------------------------------------------------------------
# the run loop
# ---------------------------------------------------------------------------


def run(
    scenario: Scenario,
    out_dir=None,
    write_outputs: bool = True,
    record_fields: bool = False,
) -> RunResult:
    problem = scenario.problem()
    grid = problem.grid
    tau = scenario.tau
    u0 = scenario.initial_field(grid)
    memory_xi = None
    mode = scenario.memory_mode
    if mode not in ("auto_admissible", "virgin_clamped"):
        memory_xi = load_memory_file(mode, grid, problem.tgrid)
        mode = "file"
    state = init_state(problem, u0, mode, memory_xi)
    opts = scenario.solver_options()

    out = Path(out_dir if out_dir is not None else scenario.out_dir)
    ts_file = None
    if write_outputs:
        try:
            out.mkdir(parents=True, exist_ok=True)
            ts_file = open(out / "timeseries.csv", "w", encoding="utf-8")
            ts_file.write(_TIMESERIES_HEADER + "\n")
        except OSError as exc:
            raise OutputError(f"cannot open output files in {out}: {exc}") from exc

    measure = grid.measure
    mu1h = spatial.first_nonzero_eigenvalue(grid)
    decay_c = problem.slope_majorant
    orl = orlicz_functions(grid.dim, tau)

    cols = {name: [] for name in (
        "step", "t", "mass", "V", "E", "D_cum", "U_mean",
        "orlicz_budget", "newton_iters", "residual", "lp_budget",
    )}

    def push(step_no, t, mass, V, E, dcum, umean, budget, nit, res, lp):
        row = (step_no, t, mass, V, E, dcum, umean, budget, nit, res)
        for name, val in zip(cols, row + (lp,)):
            cols[name].append(val)
        if ts_file is not None:
            try:
                ts_file.write(
                    f"{step_no},{_fmt(t)},{_fmt(mass)},{_fmt(V)},{_fmt(E)},"
                    f"{_fmt(dcum)},{_fmt(umean)},{_fmt(budget)},{nit},{_fmt(res)}\n"
                )
                ts_file.flush()
            except OSError as exc:
                raise OutputError(f"cannot write timeseries: {exc}") from exc

    s0_row, e0_row = kernels.memory_outputs(state.xi, problem.model)
    mass0 = spatial.integrate(grid, state.s)
    push(
        0, 0.0, mass0, spatial.gradient_energy(grid, state.u),
        float(np.sum(e0_row)) * grid.cell_measure, 0.0,
        spatial.integrate(grid, state.u) / measure, 0.0, 0, 0.0, 0.0,
    )

    snap_every = scenario.snapshot_every
    omega_snaps = [(0.0, state.xi.copy())]
    if write_outputs:
        _write_snapshot(out, state, problem, 0)

    hist_t, hist_u, hist_s = [0.0], [state.u.copy()], [state.s.copy()]

    n_steps = None
    if scenario.t_end is not None:
        n_steps = max(1, int(np.ceil(scenario.t_end / tau - 1e-9)))
    max_steps = n_steps if n_steps is not None else 10_000_000

    d_cum = 0.0
    budget = 0.0
    lp_budget = 0.0
    steady_time = None
    max_abs_u = float(np.max(np.abs(state.u)))
    cone_excess = float(
        np.max(np.abs(state.xi) - np.maximum(0.0, problem.tgrid.lam - problem.tgrid.nodes)[None, :])
    )
    twosided_excess = 0.0
    u_prev_t, u_prev = 0.0, state.u.copy()
    u_at_end = None

    i = 0
    while i < max_steps:
        i += 1
        u_prev_t, u_prev = state.t, state.u.copy()
        state, rep = step(problem, state, tau, opts)
        t = i * tau
        state.t = t  # keep t = i * tau free of accumulation drift
        d_cum += rep.dissipation
        budget += tau * rep.orlicz_increment
        lp_budget += tau * rep.lp_increment
        umean = spatial.integrate(grid, state.u) / measure
        push(
            i, t, rep.mass, rep.gradient_energy, rep.stored_energy, d_cum,
            umean, budget, rep.newton_iters, rep.final_residual, lp_budget,
        )
        max_abs_u = max(max_abs_u, rep.max_abs_u)
        cone_excess = max(cone_excess, rep.cone_excess)
        twosided_excess = max(twosided_excess, rep.twosided_excess)
        if record_fields:
            hist_t.append(t)
            hist_u.append(state.u.copy())
            hist_s.append(state.s.copy())
        if snap_every and i % snap_every == 0:
            omega_snaps.append((t, state.xi.copy()))
            if write_outputs:
                _write_snapshot(out, state, problem, i)
        if scenario.t_end is not None and t >= scenario.t_end - 1e-12 * tau:
            u_at_end = state.u.copy()
            if t > scenario.t_end + 1e-12 * tau:
                frac = (scenario.t_end - u_prev_t) / (t - u_prev_t)
                u_at_end = u_prev + frac * (state.u - u_prev)
            break
        if scenario.steady_tol is not None and scenario.steady_tol > 0.0 and i >= STEADY_WINDOW:
            V_now = cols["V"][-1]
            du_mean = abs(cols["U_mean"][-1] - cols["U_mean"][-1 - STEADY_WINDOW])
            if V_now <= scenario.steady_tol**2 and du_mean <= scenario.steady_tol:
                steady_time = t
                break

    if not (snap_every and i % snap_every == 0):
        omega_snaps.append((state.t, state.xi.copy()))
        if write_outputs:
            _write_snapshot(out, state, problem, i)
    if ts_file is not None:
        ts_file.close()

    series = TimeSeries(
        step=np.array(cols["step"], dtype=int),
        t=np.array(cols["t"]),
        mass=np.array(cols["mass"]),
        V=np.array(cols["V"]),
        E=np.array(cols["E"]),
        D_cum=np.array(cols["D_cum"]),
        U_mean=np.array(cols["U_mean"]),
        orlicz_budget=np.array(cols["orlicz_budget"]),
        newton_iters=np.array(cols["newton_iters"], dtype=int),
        residual=np.array(cols["residual"]),
        lp_budget=np.array(cols["lp_budget"]),
        tau=tau,
        mu1h=mu1h,
        decay_c=decay_c,
    )

    final_xi = state.xi
    omega_series = [
        [t_snap, float(np.sum(kernels.weighted_distance(
            xi_snap, final_xi, problem.tgrid.nodes, problem.tgrid.dr
        ))) * grid.cell_measure]
        for t_snap, xi_snap in omega_snaps
    ]

    try:
        mu_hat, bound_rate = decay_fit(series)
    except ValueError:
        mu_hat = None
        bound_rate = float(np.log1p(mu1h * tau / decay_c) / tau)

    summary = {
        "u_bar": float(series.U_mean[-1]),
        "decay_rate_fit": mu_hat,
        "decay_rate_bound": bound_rate,
        "orlicz_budget_total": float(series.orlicz_budget[-1]),
        "lp_budget_total": float(series.lp_budget[-1]),
        "dissipation_total": float(series.D_cum[-1]),
        "steady_time": steady_time,
        "omega_bar_series": omega_series,
        "config_echo": scenario.config_echo(),
    }
    if write_outputs:
        try:
            with open(out / "summary.json", "w", encoding="utf-8") as fh:
                json.dump(summary, fh, indent=2)
                fh.write("\n")
        except OSError as exc:
            raise OutputError(f"cannot write summary.json: {exc}") from exc

    history = None
    if record_fields:
        history = FieldHistory(
            times=np.array(hist_t), u=np.stack(hist_u), s=np.stack(hist_s)
        )

    diagnostics = {
        "max_abs_u": max_abs_u,
        "cone_excess": cone_excess,
        "twosided_excess": twosided_excess,
        "steps": int(series.step[-1]),
    }
    return RunResult(
        scenario=scenario,
        series=series,
        summary=summary,
        final_state=state,
        u_at_end=u_at_end,
        omega_series=omega_series,
        diagnostics=diagnostics,
        history=history,
    )


def tau_refinement(scenario: Scenario, levels: int, out_dir=None, write_outputs: bool = True):
    """Empirical step-size Cauchy check: runs at tau, tau/2, tau/4, ...

    Compares the pressure fields at the common final time for each
    adjacent pair in the sup norm; returns the table rows and writes
    ``tau_refinement.csv`` when requested.
    """
    if levels < 2:
        raise ValueError("need at least 2 refinement levels")
    if scenario.t_end is None:
        raise ValueError("tau refinement requires a t_end stopping rule")
    out = Path(out_dir if out_dir is not None else scenario.out_dir)
    fields = []
    taus = []
    for lvl in range(levels):
        tau_l = scenario.tau / (2**lvl)
        sub = replace(scenario, tau=tau_l, steady_tol=None)
        sub_dir = out / f"tau_{lvl}" if write_outputs else None
        res = run(sub, out_dir=sub_dir, write_outputs=write_outputs)
        fields.append(res.u_at_end)
        taus.append(tau_l)
    rows = []
    for a, b in zip(range(levels - 1), range(1, levels)):
        diff = float(np.max(np.abs(fields[a] - fields[b])))
        rows.append({"tau_coarse": taus[a], "tau_fine": taus[b], "sup_diff": diff})
    if write_outputs:
        try:
            out.mkdir(parents=True, exist_ok=True)
            with open(out / "tau_refinement.csv", "w", encoding="utf-8") as fh:
                fh.write("tau_coarse,tau_fine,sup_diff\n")
                for row in rows:
                    fh.write(
                        f"{_fmt(row['tau_coarse'])},{_fmt(row['tau_fine'])},"
                        f"{_fmt(row['sup_diff'])}\n"
                    )
        except OSError as exc:
            raise OutputError(f"cannot write tau_refinement.csv: {exc}") from exc
    return rows

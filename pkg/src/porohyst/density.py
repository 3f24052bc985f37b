"""Preisach densities and the monotone input transformation.

A density rho(r, v) defines, per threshold r, the primitives

    psi(r, xi) = integral of rho(r, v) dv from 0 to xi
    Psi(r, xi) = integral of psi(r, v) dv from 0 to xi

which drive the operator output, its stored energy and its dissipation.
Three density kinds are supported:

* ``uniform``   rho = const, closed forms.
* ``separable`` rho(r, v) = p(r) * q(v) with polynomial factors, closed forms.
* ``tabulated`` rho sampled on a rectangular (r, v) grid; the density is
  taken to be the bilinear interpolant of the samples and psi / Psi are
  integrated exactly for that interpolant (exceeding the accuracy of a
  fixed-panel composite rule at the same resolution).

For the batched kernels every density is lowered to a ``DensityNodeModel``:
either per-node polynomial coefficients or per-node lookup tables with
exact piecewise integration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError

POLY_MODE = 0
TABLE_MODE = 1

_TABLE_PANELS = 1024  # fine v-grid cells per node for tabulated densities
_EXTEND = 1.5  # tables cover [-_EXTEND*lam, _EXTEND*lam] for solver overshoot


@dataclass(frozen=True)
class DensityNodeModel:
    """Density expanded on the threshold nodes, ready for the kernels.

    Polynomial mode: rho(r_j, v) = sum_k rho_c[j, k] v^k and

        psi(r_j, v) = sum_k psi_c[j, k] v^(k+1)
        Psi(r_j, v) = sum_k Psi_c[j, k] v^(k+2)

    Table mode: per node j, values on the uniform grid v0 + m*dv with
    rho linear within each cell, psi_t/Psi_t the exact cumulative
    integrals of that interpolant anchored at v = 0.
    """

    mode: int
    nodes: np.ndarray
    dr: float
    gbar: float
    rho_c: np.ndarray | None = None
    psi_c: np.ndarray | None = None
    Psi_c: np.ndarray | None = None
    v0: float = 0.0
    dv: float = 1.0
    rho_t: np.ndarray | None = None
    psi_t: np.ndarray | None = None
    Psi_t: np.ndarray | None = None


def _poly_eval(coeffs, x):
    """Evaluate sum_k coeffs[k] x^k (coeffs is a plain list)."""
    out = np.zeros_like(np.asarray(x, dtype=float))
    for c in reversed(coeffs):
        out = out * x + c
    return out


@dataclass(frozen=True)
class PreisachDensity:
    """Density rho(r, v) with certified bounds and output offset.

    ``rho0``/``rho1`` are the certified lower and upper bounds of rho on
    (0, lam) x (-lam, lam); they enter solver majorants and diagnostic
    constants, so they must bracket the actual values strictly.
    ``gbar`` is the constant output offset added to the threshold integral.
    """

    kind: str
    lam: float
    rho0: float
    rho1: float
    gbar: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("uniform", "separable", "tabulated"):
            raise ConfigError(f"unknown density kind {self.kind!r}")
        if not (0.0 < self.rho0 < self.rho1):
            raise ConfigError("density bounds must satisfy 0 < rho0 < rho1")
        if self.lam <= 0.0:
            raise ConfigError("lam must be positive")
        if self.kind == "uniform":
            if "value" not in self.params:
                raise ConfigError("uniform density needs params.value")
        elif self.kind == "separable":
            for key in ("r_coeffs", "v_coeffs"):
                if key not in self.params or not self.params[key]:
                    raise ConfigError(f"separable density needs params.{key}")
        else:
            for key in ("r", "v", "rho"):
                if key not in self.params:
                    raise ConfigError(f"tabulated density needs params.{key}")
            rs = np.asarray(self.params["r"], dtype=float)
            vs = np.asarray(self.params["v"], dtype=float)
            tab = np.asarray(self.params["rho"], dtype=float)
            if tab.shape != (rs.size, vs.size):
                raise ConfigError("tabulated density: rho shape must be (len(r), len(v))")
            if rs.size < 2 or vs.size < 2:
                raise ConfigError("tabulated density needs at least a 2x2 table")
            if np.any(np.diff(rs) <= 0) or np.any(np.diff(vs) <= 0):
                raise ConfigError("tabulated density: r and v must be strictly increasing")
        self.validate_bounds()

    # -- point evaluation ------------------------------------------------

    def rho(self, r, v):
        r = np.asarray(r, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.kind == "uniform":
            return np.broadcast_to(float(self.params["value"]), np.broadcast(r, v).shape).copy()
        if self.kind == "separable":
            return _poly_eval(self.params["r_coeffs"], r) * _poly_eval(self.params["v_coeffs"], v)
        return self._rho_bilinear(r, v)

    def _rho_bilinear(self, r, v):
        rs = np.asarray(self.params["r"], dtype=float)
        vs = np.asarray(self.params["v"], dtype=float)
        tab = np.asarray(self.params["rho"], dtype=float)
        r = np.clip(r, rs[0], rs[-1])
        v = np.clip(v, vs[0], vs[-1])
        i = np.clip(np.searchsorted(rs, r) - 1, 0, rs.size - 2)
        j = np.clip(np.searchsorted(vs, v) - 1, 0, vs.size - 2)
        tr = (r - rs[i]) / (rs[i + 1] - rs[i])
        tv = (v - vs[j]) / (vs[j + 1] - vs[j])
        return (
            tab[i, j] * (1 - tr) * (1 - tv)
            + tab[i + 1, j] * tr * (1 - tv)
            + tab[i, j + 1] * (1 - tr) * tv
            + tab[i + 1, j + 1] * tr * tv
        )

    def psi(self, r, xi):
        """psi(r, xi) = integral of rho(r, .) from 0 to xi. Requires |xi| <= lam."""
        self._check_domain(xi)
        if self.kind == "uniform":
            return float(self.params["value"]) * np.asarray(xi, dtype=float)
        if self.kind == "separable":
            vc = list(self.params["v_coeffs"])
            prim = [0.0] + [c / (k + 1) for k, c in enumerate(vc)]
            return _poly_eval(self.params["r_coeffs"], r) * _poly_eval(prim, xi)
        return self._table_eval(r, xi, order=1)

    def Psi(self, r, xi):
        """Psi(r, xi) = integral of psi(r, .) from 0 to xi. Requires |xi| <= lam."""
        self._check_domain(xi)
        if self.kind == "uniform":
            return 0.5 * float(self.params["value"]) * np.asarray(xi, dtype=float) ** 2
        if self.kind == "separable":
            vc = list(self.params["v_coeffs"])
            prim2 = [0.0, 0.0] + [c / ((k + 1) * (k + 2)) for k, c in enumerate(vc)]
            return _poly_eval(self.params["r_coeffs"], r) * _poly_eval(prim2, xi)
        return self._table_eval(r, xi, order=2)

    def _check_domain(self, xi):
        if np.any(np.abs(np.asarray(xi, dtype=float)) > self.lam * (1 + 1e-12)):
            raise DomainError(f"|xi| exceeds lam={self.lam}")

    def _table_eval(self, r, xi, order):
        vg, rho_row = self._row_at(r)
        psi_row, Psi_row = _cumulative_tables(vg, rho_row)
        k, d, dv = _locate(vg, np.asarray(xi, dtype=float))
        rk = rho_row[k]
        drho = rho_row[k + 1] - rk
        if order == 1:
            return psi_row[k] + rk * d + drho * d * d / (2.0 * dv)
        psik = psi_row[k]
        return Psi_row[k] + psik * d + rk * d * d / 2.0 + drho * d**3 / (6.0 * dv)

    def _row_at(self, r):
        npanels = _TABLE_PANELS
        vg = np.linspace(-_EXTEND * self.lam, _EXTEND * self.lam, npanels + 1)
        return vg, self._rho_bilinear(np.full(vg.shape, float(r)), vg)

    # -- validation ------------------------------------------------------

    def validate_bounds(self, samples=33):
        """Check rho1 > rho > rho0 > 0 on a sample grid of (0,lam)x(-lam,lam)."""
        rs = np.linspace(self.lam / (2 * samples), self.lam * (1 - 0.5 / samples), samples)
        vs = np.linspace(-self.lam * (1 - 0.5 / samples), self.lam * (1 - 0.5 / samples), samples)
        vals = self.rho(rs[:, None], vs[None, :])
        lo, hi = float(np.min(vals)), float(np.max(vals))
        if not (self.rho0 < lo and hi < self.rho1):
            raise ConfigError(
                f"density values in [{lo:.6g}, {hi:.6g}] violate the declared "
                f"bounds ({self.rho0:.6g}, {self.rho1:.6g})"
            )

    # -- kernel lowering --------------------------------------------------

    def node_model(self, tgrid) -> DensityNodeModel:
        cache = self.__dict__.setdefault("_node_model_cache", {})
        hit = cache.get(id(tgrid))
        if hit is not None and hit[0] is tgrid:
            return hit[1]
        model = self._build_node_model(tgrid)
        cache[id(tgrid)] = (tgrid, model)
        return model

    def _build_node_model(self, tgrid) -> DensityNodeModel:
        nodes = tgrid.nodes
        if self.kind in ("uniform", "separable"):
            if self.kind == "uniform":
                pr = np.ones_like(nodes) * float(self.params["value"])
                vc = np.array([1.0])
            else:
                pr = _poly_eval(self.params["r_coeffs"], nodes)
                vc = np.asarray(self.params["v_coeffs"], dtype=float)
            rho_c = pr[:, None] * vc[None, :]
            ks = np.arange(vc.size, dtype=float)
            psi_c = rho_c / (ks + 1.0)
            Psi_c = psi_c / (ks + 2.0)
            return DensityNodeModel(
                mode=POLY_MODE,
                nodes=nodes,
                dr=tgrid.dr,
                gbar=self.gbar,
                rho_c=np.ascontiguousarray(rho_c),
                psi_c=np.ascontiguousarray(psi_c),
                Psi_c=np.ascontiguousarray(Psi_c),
            )
        vg = np.linspace(-_EXTEND * self.lam, _EXTEND * self.lam, _TABLE_PANELS + 1)
        rho_t = self._rho_bilinear(nodes[:, None], vg[None, :])
        psi_t = np.empty_like(rho_t)
        Psi_t = np.empty_like(rho_t)
        for j in range(nodes.size):
            psi_t[j], Psi_t[j] = _cumulative_tables(vg, rho_t[j])
        return DensityNodeModel(
            mode=TABLE_MODE,
            nodes=nodes,
            dr=tgrid.dr,
            gbar=self.gbar,
            v0=float(vg[0]),
            dv=float(vg[1] - vg[0]),
            rho_t=np.ascontiguousarray(rho_t),
            psi_t=np.ascontiguousarray(psi_t),
            Psi_t=np.ascontiguousarray(Psi_t),
        )


def _locate(vg, x):
    dv = vg[1] - vg[0]
    x = np.clip(x, vg[0], vg[-1])
    k = np.clip(((x - vg[0]) / dv).astype(np.intp), 0, vg.size - 2)
    return k, x - (vg[0] + k * dv), dv


def _cumulative_tables(vg, rho_row):
    """Exact cumulative integrals of the piecewise-linear rho, anchored at 0."""
    dv = vg[1] - vg[0]
    mids = 0.5 * (rho_row[:-1] + rho_row[1:]) * dv
    psi = np.concatenate(([0.0], np.cumsum(mids)))
    # integral of psi over a full cell: psi_k*dv + rho_k*dv^2/2 + drho*dv^2/6
    inc = psi[:-1] * dv + rho_row[:-1] * dv * dv / 2.0 + np.diff(rho_row) * dv * dv / 6.0
    Psi = np.concatenate(([0.0], np.cumsum(inc)))
    # re-anchor both at v = 0 (vg straddles zero by construction)
    k0, d0, _ = _locate(vg, np.asarray(0.0))
    k0 = int(k0)
    rk = rho_row[k0]
    drho = rho_row[k0 + 1] - rk
    psi0 = psi[k0] + rk * d0 + drho * d0 * d0 / (2.0 * dv)
    Psi0 = Psi[k0] + psi[k0] * d0 + rk * d0 * d0 / 2.0 + drho * d0**3 / (6.0 * dv)
    psi -= psi0
    Psi = Psi - Psi0 - psi0 * (vg - vg[k0] - d0)
    return psi, Psi


# ---------------------------------------------------------------------------
# monotone input transformation g
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvexifiableMap:
    """Smooth increasing change of the input variable, w = g(u).

    g maps [-lam, lam] into itself with g(0) = 0 and derivative bounds
    0 < g_lo <= g'(u) <= g_hi; g2_bound bounds |g''|.  Outside [-lam, lam]
    the map continues linearly with the end slopes, so iterative solvers
    may safely overshoot the physical range.
    """

    kind: str
    lam: float
    params: dict
    g_lo: float
    g_hi: float
    g2_bound: float

    @classmethod
    def make(cls, kind, lam, params=None) -> "ConvexifiableMap":
        params = dict(params or {})
        if kind == "identity":
            return cls("identity", lam, {}, 1.0, 1.0, 0.0)
        if kind == "cubic_odd":
            a = float(params.get("a", 1.0))
            b = float(params.get("b", 0.0))
            lo = a + min(0.0, 3.0 * b * lam * lam)
            hi = a + max(0.0, 3.0 * b * lam * lam)
            if lo <= 0.0:
                raise ConfigError("cubic_odd map not increasing on [-lam, lam]")
            if abs(a * lam + b * lam**3) > lam * (1 + 1e-12):
                raise ConfigError("cubic_odd map leaves [-lam, lam]")
            return cls("cubic_odd", lam, {"a": a, "b": b}, lo, hi, 6.0 * abs(b) * lam)
        if kind == "tabulated_monotone":
            us = np.asarray(params.get("u", ()), dtype=float)
            gs = np.asarray(params.get("g", ()), dtype=float)
            if us.size < 3 or us.size != gs.size:
                raise ConfigError("tabulated_monotone map needs matching u/g arrays (>= 3 points)")
            if np.any(np.diff(us) <= 0) or np.any(np.diff(gs) <= 0):
                raise ConfigError("tabulated_monotone map must be strictly increasing")
            if not (us[0] <= -lam and us[-1] >= lam):
                raise ConfigError("tabulated_monotone map must cover [-lam, lam]")
            from scipy.interpolate import PchipInterpolator

            interp = PchipInterpolator(us, gs)
            if abs(float(interp(0.0))) > 1e-12 * max(1.0, lam):
                raise ConfigError("tabulated_monotone map must satisfy g(0) = 0")
            uu = np.linspace(-lam, lam, 2049)
            d1 = interp.derivative()(uu)
            lo, hi = float(np.min(d1)), float(np.max(d1))
            if lo <= 0.0:
                raise ConfigError("tabulated_monotone map has nonpositive slope on [-lam, lam]")
            d2 = np.max(np.abs(np.diff(d1) / (uu[1] - uu[0])))
            if max(abs(float(interp(-lam))), abs(float(interp(lam)))) > lam * (1 + 1e-12):
                raise ConfigError("tabulated_monotone map leaves [-lam, lam]")
            obj = cls("tabulated_monotone", lam, {"u": us, "g": gs}, lo, hi, float(d2))
            object.__setattr__(obj, "_interp", interp)
            return obj
        raise ConfigError(f"unknown gmap kind {kind!r}")

    def g(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "identity":
            return u.copy()
        lam = self.lam
        core = np.clip(u, -lam, lam)
        if self.kind == "cubic_odd":
            a, b = self.params["a"], self.params["b"]
            vals = a * core + b * core**3
            end_slope = a + 3.0 * b * lam * lam
        else:
            vals = self._interp(core)
            end_slope = float(self._interp.derivative()(lam))
        over = u - core
        return vals + end_slope * over

    def gprime(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "identity":
            return np.ones_like(u)
        lam = self.lam
        core = np.clip(u, -lam, lam)
        if self.kind == "cubic_odd":
            a, b = self.params["a"], self.params["b"]
            return a + 3.0 * b * core**2
        return np.asarray(self._interp.derivative()(core), dtype=float)

    def inverse(self, w):
        """Invert g by bisection (g is strictly increasing)."""
        w = np.asarray(w, dtype=float)
        if self.kind == "identity":
            return w.copy()
        pad = (np.max(np.abs(w)) + self.lam) / self.g_lo + 1.0
        lo = np.full(w.shape, -self.lam - pad)
        hi = np.full(w.shape, self.lam + pad)
        for _ in range(90):
            mid = 0.5 * (lo + hi)
            below = self.g(mid) < w
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)


def identity_map(lam) -> ConvexifiableMap:
    return ConvexifiableMap.make("identity", lam)

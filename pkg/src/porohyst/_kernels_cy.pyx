# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the batched hot kernels.

Semantics twin of ``_kernels_py``; loops are fused per cell and node so no
temporary (ncells, R) arrays are allocated.
"""

import numpy as np

BACKEND_NAME = "compiled"

POLY_MODE = 0
TABLE_MODE = 1

cdef int _POLY = 0


cdef inline double _horner(const double[:, ::1] c, Py_ssize_t j, double x) noexcept nogil:
    cdef Py_ssize_t k = c.shape[1] - 1
    cdef double acc = 0.0
    while k >= 0:
        acc = acc * x + c[j, k]
        k -= 1
    return acc


cdef inline Py_ssize_t _cell_of(double x, double v0, double dv, Py_ssize_t m) noexcept nogil:
    cdef double pos = (x - v0) / dv
    cdef Py_ssize_t k = <Py_ssize_t> pos
    if k < 0:
        k = 0
    if k > m - 2:
        k = m - 2
    return k


cdef inline double _clampx(double x, double v0, double dv, Py_ssize_t m) noexcept nogil:
    cdef double hi = v0 + dv * (m - 1)
    if x < v0:
        return v0
    if x > hi:
        return hi
    return x


cdef class _Model:
    """Typed view of a DensityNodeModel for nogil loops."""
    cdef int mode
    cdef double dr, gbar, v0, dv
    cdef Py_ssize_t m
    cdef double[::1] nodes
    cdef double[:, ::1] rho_c, psi_c, Psi_c, rho_t, psi_t, Psi_t

    def __init__(self, model):
        self.mode = model.mode
        self.dr = model.dr
        self.gbar = model.gbar
        self.nodes = model.nodes
        if self.mode == _POLY:
            self.rho_c = model.rho_c
            self.psi_c = model.psi_c
            self.Psi_c = model.Psi_c
            self.m = 0
        else:
            self.v0 = model.v0
            self.dv = model.dv
            self.rho_t = model.rho_t
            self.psi_t = model.psi_t
            self.Psi_t = model.Psi_t
            self.m = model.rho_t.shape[1]

    cdef inline double psi(self, Py_ssize_t j, double x) noexcept nogil:
        cdef double xx, d, rk, drho
        cdef Py_ssize_t k
        if self.mode == _POLY:
            return _horner(self.psi_c, j, x) * x
        xx = _clampx(x, self.v0, self.dv, self.m)
        k = _cell_of(xx, self.v0, self.dv, self.m)
        d = xx - (self.v0 + k * self.dv)
        rk = self.rho_t[j, k]
        drho = self.rho_t[j, k + 1] - rk
        return self.psi_t[j, k] + rk * d + drho * d * d / (2.0 * self.dv)

    cdef inline double Psi(self, Py_ssize_t j, double x) noexcept nogil:
        cdef double xx, d, rk, drho
        cdef Py_ssize_t k
        if self.mode == _POLY:
            return _horner(self.Psi_c, j, x) * x * x
        xx = _clampx(x, self.v0, self.dv, self.m)
        k = _cell_of(xx, self.v0, self.dv, self.m)
        d = xx - (self.v0 + k * self.dv)
        rk = self.rho_t[j, k]
        drho = self.rho_t[j, k + 1] - rk
        return (
            self.Psi_t[j, k]
            + self.psi_t[j, k] * d
            + rk * d * d / 2.0
            + drho * d * d * d / (6.0 * self.dv)
        )

    cdef inline double rho(self, Py_ssize_t j, double x) noexcept nogil:
        cdef double xx, d, rk
        cdef Py_ssize_t k
        if self.mode == _POLY:
            return _horner(self.rho_c, j, x)
        xx = _clampx(x, self.v0, self.dv, self.m)
        k = _cell_of(xx, self.v0, self.dv, self.m)
        d = xx - (self.v0 + k * self.dv)
        rk = self.rho_t[j, k]
        return rk + (self.rho_t[j, k + 1] - rk) * (d / self.dv)


def commit_plays(double[:, ::1] xi, double[::1] w, double[::1] nodes):
    """Project every play state onto its band [w - r, w + r], in place."""
    cdef Py_ssize_t n = xi.shape[0], R = xi.shape[1], c, j
    cdef double lo, hi, wc
    with nogil:
        for c in range(n):
            wc = w[c]
            for j in range(R):
                lo = wc - nodes[j]
                hi = wc + nodes[j]
                if xi[c, j] < lo:
                    xi[c, j] = lo
                elif xi[c, j] > hi:
                    xi[c, j] = hi


def branch_eval(double[:, ::1] xi, double[::1] w, model, bint want_slope=False):
    """Tentative operator output (and optionally slope sum) per cell."""
    cdef _Model m = _Model(model)
    cdef Py_ssize_t n = xi.shape[0], R = xi.shape[1], c, j
    b_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] b = b_arr
    s_arr = None
    cdef double[::1] s = None
    cdef double acc, sacc, lo, hi, wc, xt
    cdef bint moved
    if want_slope:
        s_arr = np.empty(n, dtype=np.float64)
        s = s_arr
    with nogil:
        for c in range(n):
            wc = w[c]
            acc = 0.0
            sacc = 0.0
            for j in range(R):
                lo = wc - m.nodes[j]
                hi = wc + m.nodes[j]
                xt = xi[c, j]
                moved = False
                if xt < lo:
                    xt = lo
                    moved = True
                elif xt > hi:
                    xt = hi
                    moved = True
                acc += m.psi(j, xt)
                if want_slope and moved:
                    sacc += m.rho(j, xt)
            b[c] = m.gbar + m.dr * acc
            if want_slope:
                s[c] = m.dr * sacc
    if want_slope:
        return b_arr, s_arr
    return b_arr, None


def memory_outputs(double[:, ::1] xi, model):
    """Committed output and stored energy per cell."""
    cdef _Model m = _Model(model)
    cdef Py_ssize_t n = xi.shape[0], R = xi.shape[1], c, j
    s_arr = np.empty(n, dtype=np.float64)
    e_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] s = s_arr
    cdef double[::1] e = e_arr
    cdef double acc, eacc, x, p
    with nogil:
        for c in range(n):
            acc = 0.0
            eacc = 0.0
            for j in range(R):
                x = xi[c, j]
                p = m.psi(j, x)
                acc += p
                eacc += p * x - m.Psi(j, x)
            s[c] = m.gbar + m.dr * acc
            e[c] = m.dr * eacc
    return s_arr, e_arr


def dissipation_between(double[:, ::1] xi_a, double[:, ::1] xi_b, model):
    """dr * sum_j r_j |psi(r_j, xi_b) - psi(r_j, xi_a)| per cell."""
    cdef _Model m = _Model(model)
    cdef Py_ssize_t n = xi_a.shape[0], R = xi_a.shape[1], c, j
    d_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] d = d_arr
    cdef double acc, dp
    with nogil:
        for c in range(n):
            acc = 0.0
            for j in range(R):
                dp = m.psi(j, xi_b[c, j]) - m.psi(j, xi_a[c, j])
                if dp < 0.0:
                    dp = -dp
                acc += m.nodes[j] * dp
            d[c] = m.dr * acc
    return d_arr


def weighted_distance(double[:, ::1] xi_a, double[:, ::1] xi_b, double[::1] nodes, double dr):
    """Threshold-weighted L1 distance between memory states, per cell."""
    cdef Py_ssize_t n = xi_a.shape[0], R = xi_a.shape[1], c, j
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double acc, dx
    with nogil:
        for c in range(n):
            acc = 0.0
            for j in range(R):
                dx = xi_a[c, j] - xi_b[c, j]
                if dx < 0.0:
                    dx = -dx
                acc += nodes[j] * dx
            out[c] = dr * acc
    return out_arr


def active_levels(double[:, ::1] xi, double[::1] w, double[::1] nodes, double dr):
    """Largest node with |xi - w| strictly above r - dr/2, else 0, per cell."""
    cdef Py_ssize_t n = xi.shape[0], R = xi.shape[1], c, j
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double lev, gap
    with nogil:
        for c in range(n):
            lev = 0.0
            for j in range(R):
                gap = xi[c, j] - w[c]
                if gap < 0.0:
                    gap = -gap
                if gap > nodes[j] - 0.5 * dr:
                    if nodes[j] > lev:
                        lev = nodes[j]
            out[c] = lev
    return out_arr


def laplacian_1d(double[::1] f, double hx):
    cdef Py_ssize_t n = f.shape[0], i
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double inv = 1.0 / (hx * hx)
    with nogil:
        out[0] = (f[1] - f[0]) * inv
        for i in range(1, n - 1):
            out[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) * inv
        out[n - 1] = (f[n - 2] - f[n - 1]) * inv
    return out_arr


def laplacian_2d(double[:, ::1] f, double hx, double hy):
    cdef Py_ssize_t nx = f.shape[0], ny = f.shape[1], i, j
    out_arr = np.empty((nx, ny), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double ivx = 1.0 / (hx * hx), ivy = 1.0 / (hy * hy)
    cdef double up, dn, le, ri
    with nogil:
        for i in range(nx):
            for j in range(ny):
                up = f[i - 1, j] if i > 0 else f[0, j]
                dn = f[i + 1, j] if i < nx - 1 else f[nx - 1, j]
                le = f[i, j - 1] if j > 0 else f[i, 0]
                ri = f[i, j + 1] if j < ny - 1 else f[i, ny - 1]
                out[i, j] = (up + dn - 2.0 * f[i, j]) * ivx + (le + ri - 2.0 * f[i, j]) * ivy
    return out_arr

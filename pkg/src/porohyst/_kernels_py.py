"""NumPy implementations of the batched hot kernels.

Semantics twin of the compiled extension ``_kernels_cy``; the dispatch in
:mod:`porohyst.kernels` picks whichever is available.  All functions take
play states ``xi`` of shape (ncells, R), per-cell inputs ``w`` of shape
(ncells,) and the threshold nodes of shape (R,).  Results are float64.
"""

from __future__ import annotations

import numpy as np

from .density import POLY_MODE

BACKEND_NAME = "python"


def _psi_matrix(model, xi):
    """psi(r_j, xi[c, j]) for a (ncells, R) state matrix."""
    if model.mode == POLY_MODE:
        acc = np.zeros_like(xi)
        coeffs = model.psi_c
        for k in range(coeffs.shape[1] - 1, -1, -1):
            acc = acc * xi + coeffs[:, k][None, :]
        return acc * xi
    k, d, dv = _table_locate(model, xi)
    cols = np.arange(xi.shape[1])[None, :]
    rk = model.rho_t[cols, k]
    drho = model.rho_t[cols, k + 1] - rk
    return model.psi_t[cols, k] + rk * d + drho * d * d / (2.0 * dv)


def _Psi_matrix(model, xi):
    if model.mode == POLY_MODE:
        acc = np.zeros_like(xi)
        coeffs = model.Psi_c
        for k in range(coeffs.shape[1] - 1, -1, -1):
            acc = acc * xi + coeffs[:, k][None, :]
        return acc * xi * xi
    k, d, dv = _table_locate(model, xi)
    cols = np.arange(xi.shape[1])[None, :]
    rk = model.rho_t[cols, k]
    drho = model.rho_t[cols, k + 1] - rk
    psik = model.psi_t[cols, k]
    return model.Psi_t[cols, k] + psik * d + rk * d * d / 2.0 + drho * d**3 / (6.0 * dv)


def _rho_matrix(model, xi):
    if model.mode == POLY_MODE:
        acc = np.zeros_like(xi)
        coeffs = model.rho_c
        for k in range(coeffs.shape[1] - 1, -1, -1):
            acc = acc * xi + coeffs[:, k][None, :]
        return acc
    k, d, dv = _table_locate(model, xi)
    cols = np.arange(xi.shape[1])[None, :]
    rk = model.rho_t[cols, k]
    return rk + (model.rho_t[cols, k + 1] - rk) * (d / dv)


def _table_locate(model, xi):
    dv = model.dv
    pos = np.clip(xi, model.v0, model.v0 + dv * (model.rho_t.shape[1] - 1))
    k = np.clip(((pos - model.v0) / dv).astype(np.intp), 0, model.rho_t.shape[1] - 2)
    return k, pos - (model.v0 + k * dv), dv


def commit_plays(xi, w, nodes):
    """Project every play state onto its band [w - r, w + r], in place."""
    np.clip(xi, w[:, None] - nodes[None, :], w[:, None] + nodes[None, :], out=xi)


def branch_eval(xi, w, model, want_slope=False):
    """Tentative operator output per cell, without committing memory.

    Returns (B, S): B[c] = gbar + dr * sum_j psi(r_j, clip(xi[c,j], w[c]-r_j, w[c]+r_j))
    and, when requested, S[c] = dr * sum over moved nodes of rho(r_j, xi_tent).
    """
    nodes = model.nodes
    lo = w[:, None] - nodes[None, :]
    hi = w[:, None] + nodes[None, :]
    xt = np.clip(xi, lo, hi)
    B = model.gbar + model.dr * np.sum(_psi_matrix(model, xt), axis=1)
    if not want_slope:
        return B, None
    moved = xt != xi
    S = model.dr * np.sum(np.where(moved, _rho_matrix(model, xt), 0.0), axis=1)
    return B, S


def memory_outputs(xi, model):
    """Committed output and stored energy per cell."""
    psi = _psi_matrix(model, xi)
    Psi = _Psi_matrix(model, xi)
    s = model.gbar + model.dr * np.sum(psi, axis=1)
    energy = model.dr * np.sum(psi * xi - Psi, axis=1)
    return s, energy


def dissipation_between(xi_a, xi_b, model):
    """dr * sum_j r_j |psi(r_j, xi_b) - psi(r_j, xi_a)| per cell."""
    dpsi = _psi_matrix(model, xi_b) - _psi_matrix(model, xi_a)
    return model.dr * np.sum(model.nodes[None, :] * np.abs(dpsi), axis=1)


def weighted_distance(xi_a, xi_b, nodes, dr):
    """Threshold-weighted L1 distance between memory states, per cell."""
    return dr * np.sum(nodes[None, :] * np.abs(xi_a - xi_b), axis=1)


def active_levels(xi, w, nodes, dr):
    """Largest node with |xi - w| strictly above r - dr/2, else 0, per cell."""
    pinned = np.abs(xi - w[:, None]) > (nodes - 0.5 * dr)[None, :]
    return np.max(np.where(pinned, nodes[None, :], 0.0), axis=1)


def laplacian_1d(f, hx):
    out = np.empty_like(f)
    out[1:-1] = f[2:] - 2.0 * f[1:-1] + f[:-2]
    out[0] = f[1] - f[0]
    out[-1] = f[-2] - f[-1]
    out /= hx * hx
    return out


def laplacian_2d(f, hx, hy):
    out = np.empty_like(f)
    out[1:-1, :] = f[2:, :] - 2.0 * f[1:-1, :] + f[:-2, :]
    out[0, :] = f[1, :] - f[0, :]
    out[-1, :] = f[-2, :] - f[-1, :]
    out /= hx * hx
    tmp = np.empty_like(f)
    tmp[:, 1:-1] = f[:, 2:] - 2.0 * f[:, 1:-1] + f[:, :-2]
    tmp[:, 0] = f[:, 1] - f[:, 0]
    tmp[:, -1] = f[:, -2] - f[:, -1]
    out += tmp / (hy * hy)
    return out

"""Dimension-dependent convex budget generators.

For spatial dimension N (p = 1 + 2/N) the functions below measure the
time derivative of the transformed pressure.  Q is convex with Q(0) = 0,
behaves like z^3 near zero and like z^p at infinity, and M is its Hoelder
companion with M <= K * Q for a finite K.  Only F and fprime depend on the
step size tau; Q and M are step-free, so budgets computed at different tau
are directly comparable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _powm1(base_minus1, expo):
    """(1 + x)^expo - 1 evaluated stably for small x."""
    return np.expm1(expo * np.log1p(base_minus1))


@dataclass(frozen=True)
class OrliczFunctions:
    """Evaluators Q, M, F, fprime for one spatial dimension and step size."""

    dim: int
    p: float
    tau: float

    def fprime(self, v):
        v = np.abs(np.asarray(v, dtype=float))
        if self.dim == 1:
            return np.ones_like(v)
        return (self.tau + v) ** (self.p - 3.0)

    def F(self, v):
        """Primitive of the odd function f with f' = fprime, F(0) = 0."""
        a = np.abs(np.asarray(v, dtype=float)) / self.tau
        p, tau = self.p, self.tau
        if self.dim == 1:
            return 0.5 * np.asarray(v, dtype=float) ** 2
        if self.dim == 2:
            return tau * ((1.0 + a) * np.log1p(a) - a)
        return tau ** (p - 1.0) / (2.0 - p) * (a - _powm1(a, p - 1.0) / (p - 1.0))

    def Q(self, z):
        z = np.asarray(np.abs(z), dtype=float)
        p = self.p
        if self.dim == 1:
            return 0.5 * z**3
        if self.dim == 2:
            # z^2 - z log(1+z); series for small z avoids cancellation
            small = z < 1e-4
            zs = np.where(small, z, 0.0)
            series = zs**3 / 2.0 - zs**4 / 3.0 + zs**5 / 4.0
            direct = z * (z - np.log1p(np.where(small, 1.0, z)))
            return np.where(small, series, direct)
        return z * (_powm1(z, p - 1.0) / (p - 1.0) + _powm1(z, p - 2.0) / (2.0 - p))

    def M(self, z):
        z = np.asarray(np.abs(z), dtype=float)
        p = self.p
        if self.dim == 1:
            return z**3
        if self.dim == 2:
            return z**4 / (1.0 + z) ** 2
        pp = p / (p - 1.0)
        return z ** (2.0 * pp) * (1.0 + z) ** (p * (p - 3.0) / (p - 1.0))


def orlicz_functions(dim, tau) -> OrliczFunctions:
    """Budget generators for dimension dim in {1, 2, 3} and step tau > 0."""
    if dim not in (1, 2, 3):
        raise ValueError(f"unsupported dimension {dim}; expected 1, 2 or 3")
    if not tau > 0.0:
        raise ValueError("tau must be positive")
    return OrliczFunctions(dim=dim, p=1.0 + 2.0 / dim, tau=float(tau))

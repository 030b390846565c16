"""Radial plateau bumps on the Fourier side and their spatial profiles.

A profile is identically 1 on |xi| <= plateau, identically 0 on
|xi| >= support, and drops smoothly (C^infinity) in between.  The spatial
side is recovered by the radial inverse transform

    f(r) = 2 pi r^(1-n/2) integral_0^support  F(s) J_{n/2-1}(2 pi r s) s^(n/2) ds,

tabulated once per (profile, dimension, range) and interpolated.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gamma, jv, roots_legendre

from .util import InvalidConfigError, UniformTable


def _transition(u: np.ndarray) -> np.ndarray:
    """C^inf monotone map [0,1] -> [1,0]."""

    def g(v):
        out = np.zeros_like(v)
        pos = v > 0
        out[pos] = np.exp(-1.0 / v[pos])
        return out

    a = g(1.0 - u)
    b = g(u)
    return a / (a + b)


def sphere_area(n: int) -> float:
    """|S^(n-1)|."""
    return 2.0 * math.pi ** (n / 2) / gamma(n / 2)


class BumpProfile:
    """Fourier-side radial plateau profile with exact 1/0 regions."""

    def __init__(self, plateau: float = 0.5, support: float = 1.0, table_step=1e-5):
        if not (0 < plateau < support):
            raise InvalidConfigError("need 0 < plateau < support")
        self.plateau = float(plateau)
        self.support = float(support)
        count = int(round(support / table_step)) + 1
        grid = np.linspace(0.0, support, count)
        u = (grid - plateau) / (support - plateau)
        vals = np.where(u <= 0, 1.0, np.where(u >= 1, 0.0, _transition(np.clip(u, 0, 1))))
        # the C^inf transition saturates in floating point, so table nodes
        # adjacent to the plateau are exactly 1 and interpolation stays exact
        # on the whole plateau (same at the vanishing end)
        self._table = UniformTable(0.0, support, vals)
        self._spatial_cache: dict = {}

    def hat(self, s) -> np.ndarray:
        """Profile value at radius s (vectorized); exact on the plateau and
        beyond the support (arguments past the support clamp to 0)."""
        return self._table(np.abs(np.asarray(s, dtype=np.float64)))

    def hat_table(self) -> "UniformTable":
        return self._table

    def hat_at_scale(self, t: float, s) -> np.ndarray:
        """Scaled bump value: profile(t * s); matches f_t(x) = t^-n f(x/t)."""
        return self.hat(np.asarray(s) * t)

    def mass(self, n: int) -> float:
        """integral of the profile over R^n = spatial value at 0."""
        nodes, weights = roots_legendre(400)
        s = 0.5 * self.support * (nodes + 1.0)
        w = 0.5 * self.support * weights
        return sphere_area(n) * float(np.sum(w * self.hat(s) * s ** (n - 1)))

    def _spatial_table(self, n: int, rmax: float) -> UniformTable:
        key = (n, math.ceil(rmax))
        if key in self._spatial_cache:
            return self._spatial_cache[key]
        rmax = math.ceil(rmax)
        nodes, weights = roots_legendre(max(400, int(80 * rmax)))
        s = 0.5 * self.support * (nodes + 1.0)
        w = 0.5 * self.support * weights * self.hat(s)
        nu = n / 2.0 - 1.0
        r = np.arange(0.0, rmax + 2e-3, 1e-3)
        vals = np.empty_like(r)
        vals[0] = self.mass(n)
        rr = r[1:, None]
        integ = np.sum(
            w[None, :] * jv(nu, 2.0 * math.pi * rr * s[None, :]) * s[None, :] ** (n / 2.0),
            axis=1,
        )
        vals[1:] = 2.0 * math.pi * r[1:] ** (1.0 - n / 2.0) * integ
        table = UniformTable(0.0, r[-1], vals)
        self._spatial_cache[key] = table
        return table

    def spatial(self, r, n: int) -> np.ndarray:
        """Spatial profile value at radius |x| = r in R^n."""
        r = np.abs(np.asarray(r, dtype=np.float64))
        rmax = float(r.max()) if r.size else 1.0
        return self._spatial_table(n, max(rmax, 1.0))(r)

    def spatial_scaled(self, x, t: float, n: int) -> np.ndarray:
        """f_t(x) = t^-n f(x/t) at points x (last axis = coordinates)."""
        r = np.sqrt(np.sum(np.asarray(x, dtype=np.float64) ** 2, axis=-1))
        return self.spatial(r / t, n) / t**n


def low_cutoff() -> BumpProfile:
    """The convolution-bump profile: 1 on |xi| <= 1/2, 0 on |xi| >= 1."""
    return BumpProfile(0.5, 1.0)


def wide_cutoff() -> BumpProfile:
    """The frequency-split profile: 1 on |xi| <= 1, 0 on |xi| >= 2."""
    return BumpProfile(1.0, 2.0)

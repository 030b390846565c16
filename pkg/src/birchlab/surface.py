"""The weighted surface measure phi dmu / |grad R| on the level set {R = 1}
and its Fourier transform.

For the sphere with a cutoff that is constant on the unit sphere the
transform is radial and exact (Bessel); general forms fall back to thin-shell
quadrature via the coarea identity

    integral_{R=1} g phi/|grad R| dmu  =  lim (1/2 eps) integral_{|R-1|<eps} g phi dx,

realized as a reusable node/weight set, with an error estimate from a refined
node set.  Flagged results are returned, never silently degraded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import jv, roots_legendre

from .bumps import sphere_area
from .forms import CutoffFunction, IntegralForm
from .util import InvalidConfigError, UniformTable

BESSEL = "bessel-sphere"
LEVELSET = "level-set-quadrature"
MONTECARLO = "monte-carlo"


def is_unit_sphere_form(form: IntegralForm) -> bool:
    return (
        form.degree == 2
        and form.is_diagonal()
        and all(c == 1 for c in form.diagonal_coefficients())
    )


def _phi_on_unit_sphere(phi: CutoffFunction):
    """Constant value of phi on {|x| = 1}, or None if not constant there."""
    if phi.kind == CutoffFunction.ONE:
        return 1.0
    if phi.kind == CutoffFunction.SMOOTH:
        return float(phi.radial(np.array(1.0))) if phi.param > 1 else None
    if phi.kind == CutoffFunction.BOX:
        return 1.0 if phi.param >= 1 else None
    return None


@dataclass
class SurfaceValue:
    value: complex
    error: float
    flagged: bool


class SurfaceMeasure:
    """Evaluator for the transform of phi dmu/|grad R| on {R = 1}."""

    def __init__(
        self,
        form: IntegralForm,
        phi: CutoffFunction,
        method: str = "auto",
        mesh: float = 0.02,
        eps: float = 0.02,
        mc_samples: int = 200000,
        seed: int = 7,
        tol: float = 5e-3,
    ):
        self.form = form
        self.phi = phi
        self.n = form.dimension
        self.tol = tol
        sphere_const = (
            _phi_on_unit_sphere(phi) if is_unit_sphere_form(form) else None
        )
        if method == "auto":
            method = BESSEL if sphere_const is not None else LEVELSET
        if method == BESSEL and sphere_const is None:
            raise InvalidConfigError(
                "bessel method needs the unit-sphere form and a cutoff that is "
                "constant on the sphere"
            )
        self.method = method
        self._sphere_phi = sphere_const
        self._nodes = None
        self._weights = None
        self._nodes_fine = None
        self._weights_fine = None
        self._radial_cache: dict = {}
        self.mesh = mesh
        self.eps = eps
        self.mc_samples = mc_samples
        self.seed = seed

    # -- radial fast path -------------------------------------------------------

    @property
    def has_radial(self) -> bool:
        return self.method == BESSEL

    def mass(self) -> float:
        if self.has_radial:
            return float(self._sphere_phi / 2.0 * sphere_area(self.n))
        return float(np.real(self.transform(np.zeros(self.n)).value))

    def transform_radial(self, rho) -> np.ndarray:
        """Transform value at radius rho = |xi| (sphere path only): the
        classical radial Bessel formula for sphere surface measure, scaled by
        phi/|grad R| = phi/2 on the unit sphere."""
        if not self.has_radial:
            raise InvalidConfigError("radial transform needs the bessel method")
        rho = np.abs(np.asarray(rho, dtype=np.float64))
        nu = self.n / 2.0 - 1.0
        out = np.empty_like(rho)
        small = rho < 1e-12
        out[small] = sphere_area(self.n)
        rs = rho[~small]
        out[~small] = (
            2.0 * math.pi * rs ** (-nu) * jv(nu, 2.0 * math.pi * rs)
        )
        return out * (self._sphere_phi / 2.0)

    def radial_table(self, rho_max: float, step: float = 5e-5) -> UniformTable:
        key = (math.ceil(rho_max), step)
        if key not in self._radial_cache:
            grid = np.arange(0.0, math.ceil(rho_max) + 2 * step, step)
            self._radial_cache[key] = UniformTable(
                0.0, grid[-1], self.transform_radial(grid)
            )
        return self._radial_cache[key]

    # -- quadrature paths ---------------------------------------------------------

    def _support_box(self) -> float:
        r = self.phi.support_radius()
        if (
            self.form.all_monomials_nonnegative()
            and self.form.is_diagonal()
            and all(c > 0 for c in self.form.diagonal_coefficients())
        ):
            # the level set itself is bounded; trim the box to it
            coeffs = self.form.diagonal_coefficients()
            level = max((2.0 / c) ** (1.0 / self.form.degree) for c in coeffs)
            r = level if r is None else min(r, level)
        if r is None:
            raise InvalidConfigError(
                "constant-one cutoff with a non-definite form: no bounding box"
            )
        return float(r)

    def _build_nodes(self, mesh: float, eps: float):
        """Chunked scan of the box for cells with |R - 1| < eps."""
        r = self._support_box()
        axis = np.arange(-r, r + mesh, mesh)
        tail = [axis] * (self.n - 1)
        tail_count = len(axis) ** (self.n - 1)
        chunk = max(1, int(2e6 // max(tail_count, 1)))
        tail_grids = np.meshgrid(*tail, indexing="ij") if tail else []
        tail_pts = (
            np.stack([g.reshape(-1) for g in tail_grids], axis=-1)
            if tail
            else np.zeros((1, 0))
        )
        pts_out = []
        for start in range(0, len(axis), chunk):
            head = axis[start : start + chunk]
            pts = np.concatenate(
                [
                    np.repeat(head, len(tail_pts))[:, None],
                    np.tile(tail_pts, (len(head), 1)),
                ],
                axis=1,
            )
            vals = self.form(pts)
            pts_out.append(pts[np.abs(vals - 1.0) < eps])
        pts = np.concatenate(pts_out, axis=0)
        w = self.phi(pts) * mesh**self.n / (2.0 * eps)
        keep = w > 0
        return pts[keep], w[keep]

    def nodes(self, fine: bool = False):
        """Quadrature nodes and weights representing the measure."""
        if self.method == MONTECARLO:
            return self._mc_nodes(fine)
        if fine:
            if self._nodes_fine is None:
                self._nodes_fine, self._weights_fine = self._build_nodes(
                    self.mesh / 2.0, self.eps / 2.0
                )
            return self._nodes_fine, self._weights_fine
        if self._nodes is None:
            self._nodes, self._weights = self._build_nodes(self.mesh, self.eps)
        return self._nodes, self._weights

    def _mc_nodes(self, fine: bool = False):
        if fine and self._nodes_fine is not None:
            return self._nodes_fine, self._weights_fine
        if not fine and self._nodes is not None:
            return self._nodes, self._weights
        r = self._support_box()
        rng = np.random.default_rng(self.seed + (1 if fine else 0))
        count = self.mc_samples * (2 if fine else 1)
        pts = rng.uniform(-r, r, size=(count, self.n))
        vals = self.form(pts)
        eps = self.eps / (2.0 if fine else 1.0)
        keep = np.abs(vals - 1.0) < eps
        pts = pts[keep]
        vol = (2.0 * r) ** self.n
        w = self.phi(pts) * vol / (2.0 * eps * count)
        keep2 = w > 0
        pts, w = pts[keep2], w[keep2]
        if fine:
            self._nodes_fine, self._weights_fine = pts, w
        else:
            self._nodes, self._weights = pts, w
        return pts, w

    def transform(self, xi) -> SurfaceValue:
        """d-sigma-hat(xi) = sum w_j e(-x_j . xi), with an error estimate from
        the refined node set (flagged when above tol)."""
        xi = np.asarray(xi, dtype=np.float64)
        if self.has_radial:
            v = float(self.transform_radial(np.array([np.linalg.norm(xi)]))[0])
            return SurfaceValue(v, 0.0, False)
        coarse = self._transform_with(xi, *self.nodes(False))
        fine = self._transform_with(xi, *self.nodes(True))
        err = abs(coarse - fine)
        return SurfaceValue(fine, err, err > self.tol)

    @staticmethod
    def _transform_with(xi, pts, w) -> complex:
        phases = np.exp(-2j * math.pi * (pts @ xi))
        return complex(np.sum(w * phases))

    def sphere_product_nodes(self, polar: int = 48, azimuth: int = 96):
        """Product quadrature on the unit sphere (n = 2 or 3) for spatial
        convolutions: returns nodes on {|x|=1} and weights including
        phi/|grad R|."""
        if not is_unit_sphere_form(self.form):
            raise InvalidConfigError("product nodes need the unit sphere form")
        if self.n == 2:
            theta = 2.0 * math.pi * np.arange(azimuth) / azimuth
            pts = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
            w = np.full(azimuth, 2.0 * math.pi / azimuth)
        elif self.n == 3:
            u, gl_w = roots_legendre(polar)
            theta = 2.0 * math.pi * np.arange(azimuth) / azimuth
            su = np.sqrt(1.0 - u**2)
            pts = np.stack(
                [
                    np.outer(su, np.cos(theta)).reshape(-1),
                    np.outer(su, np.sin(theta)).reshape(-1),
                    np.repeat(u, azimuth),
                ],
                axis=-1,
            )
            w = np.repeat(gl_w, azimuth) * (2.0 * math.pi / azimuth)
        else:
            raise InvalidConfigError("product nodes implemented for n <= 3")
        w = w * self.phi(pts) / 2.0
        return pts, w

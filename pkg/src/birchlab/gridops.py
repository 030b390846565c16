"""Finitely supported grid functions on Z^n, single-scale shell averages,
radii sequences, pointwise maximal operators, and stopping-time truncation.

The average M_lam f(x) = r^{-1} sum_{R(y)=lam} phi(y/lam^(1/d)) f(x-y) is a
normalized convolution: weights sum to r, so sup and l1 norms never grow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .dyadic import DyadicCube, all_dyadic_subcubes
from .forms import CutoffFunction, IntegralForm
from .lattice import LatticeShell, enumerate_shell
from .util import InvalidConfigError


class NotRepresentedError(RuntimeError):
    """lambda has no lattice points in the cutoff's support."""


class InadmissibleStoppingTime(RuntimeError):
    def __init__(self, cube):
        self.cube = cube
        super().__init__(f"stopping time violates admissibility at {cube}")


# -- grid functions -------------------------------------------------------------


@dataclass
class GridFunction:
    """Dense complex values on the lattice box origin + [0, extents)."""

    origin: np.ndarray
    values: np.ndarray
    characteristic: bool = False

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.int64)
        self.values = np.asarray(self.values)
        if self.values.ndim != len(self.origin):
            raise InvalidConfigError("origin/values dimension mismatch")
        if self.characteristic:
            vals = np.unique(np.abs(self.values))
            if not np.all(np.isin(vals, (0.0, 1.0))):
                raise InvalidConfigError("characteristic flag on non-0/1 values")

    @property
    def extents(self):
        return np.array(self.values.shape, dtype=np.int64)

    @property
    def dimension(self):
        return self.values.ndim

    @staticmethod
    def delta(n: int, at=None):
        at = np.zeros(n, dtype=np.int64) if at is None else np.asarray(at)
        return GridFunction(at, np.ones((1,) * n), characteristic=True)

    @staticmethod
    def from_points(points, n: int, box=None):
        """Characteristic function of a finite point set."""
        pts = np.asarray(list(points), dtype=np.int64).reshape(-1, n)
        if len(pts) == 0:
            raise InvalidConfigError("empty point set")
        lo = pts.min(axis=0) if box is None else np.asarray(box[0], dtype=np.int64)
        hi = pts.max(axis=0) + 1 if box is None else np.asarray(box[1], dtype=np.int64)
        vals = np.zeros(tuple(hi - lo), dtype=np.float64)
        vals[tuple((pts - lo).T)] = 1.0
        return GridFunction(lo, vals, characteristic=True)

    @staticmethod
    def ones_box(lo, hi):
        lo = np.asarray(lo, dtype=np.int64)
        hi = np.asarray(hi, dtype=np.int64)
        return GridFunction(lo, np.ones(tuple(hi - lo)), characteristic=True)

    def norm(self, p) -> float:
        a = np.abs(self.values)
        if p == math.inf:
            return float(a.max()) if a.size else 0.0
        return float((a**p).sum() ** (1.0 / p))

    def value_at(self, x) -> complex:
        idx = np.asarray(x, dtype=np.int64) - self.origin
        if np.any(idx < 0) or np.any(idx >= self.extents):
            return 0.0
        return self.values[tuple(idx)]

    def restrict_box(self, lo, hi) -> np.ndarray:
        """Values on the half-open box [lo, hi), zero-extended."""
        lo = np.asarray(lo, dtype=np.int64)
        hi = np.asarray(hi, dtype=np.int64)
        out = np.zeros(tuple(hi - lo), dtype=self.values.dtype)
        src_lo = np.maximum(lo, self.origin)
        src_hi = np.minimum(hi, self.origin + self.extents)
        if np.any(src_lo >= src_hi):
            return out
        src = tuple(
            slice(a - o, b - o) for a, b, o in zip(src_lo, src_hi, self.origin)
        )
        dst = tuple(slice(a - o, b - o) for a, b, o in zip(src_lo, src_hi, lo))
        out[dst] = self.values[src]
        return out

    def cube_average(self, box, p) -> float:
        """<f>_{B,p} = ((1/|B|) sum_{m in B} |f(m)|^p)^(1/p); p=inf -> max."""
        lo, hi = box
        vals = np.abs(self.restrict_box(lo, hi))
        size = float(np.prod(np.asarray(hi) - np.asarray(lo)))
        if p == math.inf:
            return float(vals.max()) if vals.size else 0.0
        return float(((vals**p).sum() / size) ** (1.0 / p))

    def translated(self, z) -> "GridFunction":
        return GridFunction(
            self.origin + np.asarray(z, dtype=np.int64),
            self.values.copy(),
            self.characteristic,
        )

    # binary grid file: one JSON header line, then raw little-endian values
    def save(self, path) -> None:
        import json

        header = {
            "magic": "birchlab-grid-v1",
            "origin": self.origin.tolist(),
            "extents": self.extents.tolist(),
            "dtype": str(self.values.dtype),
            "characteristic": bool(self.characteristic),
        }
        with open(path, "wb") as fh:
            fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
            fh.write(np.ascontiguousarray(self.values).tobytes())

    @staticmethod
    def load(path) -> "GridFunction":
        import json

        with open(path, "rb") as fh:
            header = json.loads(fh.readline().decode())
            if header.get("magic") != "birchlab-grid-v1":
                raise IOError(f"not a grid file: {path}")
            shape = tuple(header["extents"])
            vals = np.frombuffer(fh.read(), dtype=np.dtype(header["dtype"]))
            vals = vals.reshape(shape).copy()
        return GridFunction(
            np.array(header["origin"]), vals, header.get("characteristic", False)
        )


# -- radii sequences -------------------------------------------------------------

LACUNARY = "lacunary"
FACTORIAL = "factorial-sparse"
EXPLICIT = "explicit"


@dataclass(frozen=True)
class RadiiSequence:
    kind: str
    values: tuple
    mu: tuple = ()
    ratio: float = 0.0
    prefix_consistent: bool | None = None

    def __post_init__(self):
        if list(self.values) != sorted(set(self.values)):
            raise InvalidConfigError("sequence must be strictly increasing")
        if self.kind == LACUNARY:
            c = self.ratio
            for a, b in zip(self.values, self.values[1:]):
                if b / a < c - 1e-12:
                    raise InvalidConfigError("lacunarity ratio violated")


def make_sequence(kind: str, params, count: int) -> RadiiSequence:
    """lacunary: params=(c, lambda1); factorial-sparse: params=mu list or
    'pow2' for mu_k = 2^k; explicit: params=list of radii."""
    if count < 1:
        raise InvalidConfigError("count >= 1 required")
    if kind == LACUNARY:
        c, lam1 = params
        if c <= 1:
            raise InvalidConfigError("lacunary needs c > 1")
        vals = [int(lam1)]
        while len(vals) < count:
            vals.append(max(vals[-1] + 1, math.ceil(vals[-1] * c)))
        return RadiiSequence(LACUNARY, tuple(vals), ratio=float(c))
    if kind == FACTORIAL:
        if params == "pow2" or params is None:
            mu = [2**k for k in range(1, count + 1)]
        else:
            mu = [int(m) for m in params][:count]
        if len(mu) < count:
            raise InvalidConfigError("not enough mu values")
        if any(b <= a for a, b in zip(mu, mu[1:])):
            raise InvalidConfigError("mu must be strictly increasing")
        vals = tuple(math.factorial(m) for m in mu)
        # growth of log(mu_k)/log(k) is checkable only on the prefix, and
        # only from k=3 (log 1 = 0, and the k=2 ratio is not yet monotone
        # even for mu = 2^k); report prefix consistency, never the limit.
        ratios = [math.log(mu[k - 1]) / math.log(k) for k in range(3, count + 1)]
        consistent = all(b >= a - 1e-12 for a, b in zip(ratios, ratios[1:]))
        return RadiiSequence(FACTORIAL, vals, mu=tuple(mu), prefix_consistent=consistent)
    if kind == EXPLICIT:
        vals = tuple(int(v) for v in params)[:count]
        return RadiiSequence(EXPLICIT, vals)
    raise InvalidConfigError(f"unknown sequence kind {kind!r}")


def verify_represented(
    seq: RadiiSequence, form: IntegralForm, phi: CutoffFunction, **kw
):
    """Check every radius is a represented value; returns the empty radii."""
    missing = []
    for lam in seq.values:
        if enumerate_shell(form, phi, lam, **kw).is_empty():
            missing.append(lam)
    return missing


# -- averages ---------------------------------------------------------------------


def _shell_for(form, phi, lam, shell, **kw):
    if shell is not None:
        return shell
    return enumerate_shell(form, phi, lam, **kw)


def apply_average(
    form: IntegralForm,
    phi: CutoffFunction,
    lam: int,
    f: GridFunction,
    mode: str = "direct",
    shell: LatticeShell | None = None,
    **kw,
) -> GridFunction:
    """(M_lam f)(x) = r^{-1} sum_shell w_y f(x - y); output box is the input
    box dilated by the shell bounding box."""
    shell = _shell_for(form, phi, lam, shell, **kw)
    if shell.is_empty():
        raise NotRepresentedError(f"lambda={lam} is not a represented value")
    smin, smax = shell.bounding_box()
    out_origin = f.origin + smin
    out_shape = tuple(f.extents + (smax - smin))
    kernel = shell.weights / shell.r_value
    if mode == "direct":
        out = np.zeros(out_shape, dtype=np.complex128)
        for y, w in zip(shell.points, kernel):
            dst = tuple(
                slice(int(y[i] - smin[i]), int(y[i] - smin[i] + f.extents[i]))
                for i in range(f.dimension)
            )
            out[dst] += w * f.values
        return GridFunction(out_origin, out)
    if mode == "fft":
        tor = [int(sfft.next_fast_len(s)) for s in out_shape]
        kgrid = np.zeros(tor, dtype=np.float64)
        np.add.at(kgrid, tuple((shell.points - smin).T), kernel)
        fpad = np.zeros(tor, dtype=np.complex128)
        fpad[tuple(slice(0, s) for s in f.extents)] = f.values
        conv = sfft.ifftn(sfft.fftn(fpad) * sfft.fftn(kgrid.astype(np.complex128)))
        out = conv[tuple(slice(0, s) for s in out_shape)]
        return GridFunction(out_origin, out)
    raise InvalidConfigError(f"unknown mode {mode!r}")


def maximal(
    form: IntegralForm,
    phi: CutoffFunction,
    seq: RadiiSequence,
    f: GridFunction,
    mode: str = "direct",
    shells: dict | None = None,
    **kw,
):
    """sup_k |M_{lam_k} f| pointwise, with the argmax index per point.

    The reduction is a pointwise max taken in ascending radius order, so it
    is deterministic and order-independent; ties keep the smallest index.
    """
    partials = []
    for lam in seq.values:
        shell = shells.get(lam) if shells else None
        partials.append(apply_average(form, phi, lam, f, mode, shell=shell, **kw))
    lo = np.min([g.origin for g in partials], axis=0)
    hi = np.max([g.origin + g.extents for g in partials], axis=0)
    stack = np.stack([np.abs(g.restrict_box(lo, hi)) for g in partials])
    best = np.max(stack, axis=0)
    arg = np.argmax(stack, axis=0)
    return GridFunction(lo, best), arg


@dataclass
class StoppingTime:
    """Radius assignment tau on a root dyadic cube, with the density
    threshold C that defines which subcubes force large radii."""

    root: DyadicCube
    tau: np.ndarray  # dense int64 over the root cube, C-order
    C: float

    def __post_init__(self):
        self.tau = np.asarray(self.tau, dtype=np.int64)
        if self.tau.shape != (self.root.side,) * self.root.dimension:
            raise InvalidConfigError("tau array must cover the root cube")

    def min_over(self, cube: DyadicCube) -> int:
        lo = np.array(cube.corner) - np.array(self.root.corner)
        sl = tuple(slice(int(a), int(a + cube.side)) for a in lo)
        return int(self.tau[sl].min())

    def find_violation(self, f: GridFunction):
        """First dyadic P inside the root with <f>_{3P} > C <f>_{3Q} whose
        tau minimum fails min tau > side(P); None when admissible."""
        base = f.cube_average(self.root.triple_box(), 1)
        for P in all_dyadic_subcubes(self.root, proper=True):
            if f.cube_average(P.triple_box(), 1) > self.C * base:
                if self.min_over(P) <= P.side:
                    return P
        return None


def maximal_with_stopping_time(
    form: IntegralForm,
    phi: CutoffFunction,
    tau: StoppingTime,
    f: GridFunction,
    mode: str = "direct",
    validate: bool = True,
    **kw,
) -> GridFunction:
    """(M_tau f)(x) = M_{tau(x)} f(x) on the root cube."""
    if validate:
        bad = tau.find_violation(f)
        if bad is not None:
            raise InadmissibleStoppingTime(bad)
    root = tau.root
    lo = np.array(root.corner, dtype=np.int64)
    hi = lo + root.side
    out = np.zeros((root.side,) * root.dimension, dtype=np.complex128)
    for lam in np.unique(tau.tau):
        g = apply_average(form, phi, int(lam), f, mode, **kw)
        mask = tau.tau == lam
        out[mask] = g.restrict_box(lo, hi)[mask]
    return GridFunction(lo, out)

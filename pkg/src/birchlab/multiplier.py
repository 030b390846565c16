"""Fourier-side reconstruction of the shell average.

Pieces are sampled on uniform odd-sized grids of the torus [-1/2,1/2)^n.
Every arithmetic piece is a locally finite sum of bumps centered at rationals
b/q: for each grid point only the lattice cells adjacent to q*xi can
contribute, so evaluation walks the 2^n corner candidates per q (Gray-code
order, one update per step) instead of the full b-sum.

Pieces that contain the surface-measure transform are scaled by
lam^(n/d-1) / r(lam) so that they live on the same normalization as the
exact multiplier (which is 1 at xi = 0); pass normalized=False for the raw
arithmetic formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .arith import WeylTable, tuple_gcd, units, weyl_sum
from .bumps import BumpProfile, low_cutoff
from .forms import CutoffFunction, IntegralForm
from .lattice import LatticeShell, enumerate_shell
from .surface import SurfaceMeasure
from .util import InvalidConfigError, check_budget, e

try:  # the hot main-term loop compiles with numba when available
    import numba
except ImportError:  # pragma: no cover
    numba = None

DEFAULT_GRID_BUDGET = 4.5e7
DEFAULT_CHUNK = 1 << 18


class TorusGrid:
    """Uniform grid xi = (j - (G-1)/2)/G per axis, G odd so xi=0 is sampled."""

    def __init__(self, n: int, G: int):
        if G % 2 == 0 or G < 3:
            raise InvalidConfigError("grid size must be odd and >= 3")
        self.n = n
        self.G = G
        self.half = G // 2
        self.total = G**n

    def xi_block(self, start: int, stop: int) -> np.ndarray:
        idx = np.arange(start, stop, dtype=np.int64)
        out = np.empty((len(idx), self.n), dtype=np.float64)
        rest = idx
        for axis in range(self.n - 1, -1, -1):
            out[:, axis] = (rest % self.G - self.half) / self.G
            rest = rest // self.G
        return out

    def chunks(self, chunk: int = DEFAULT_CHUNK):
        for start in range(0, self.total, chunk):
            stop = min(start + chunk, self.total)
            yield start, stop, self.xi_block(start, stop)

    @property
    def zero_flat_index(self) -> int:
        idx = 0
        for _ in range(self.n):
            idx = idx * self.G + self.half
        return idx


@dataclass
class MultiplierGrid:
    label: str
    grid: TorusGrid
    samples: np.ndarray  # flat complex128, length G^n

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.samples)))

    def l2_mean(self) -> float:
        return float(np.sqrt(np.mean(np.abs(self.samples) ** 2)))

    def value_at_zero(self) -> complex:
        return complex(self.samples[self.grid.zero_flat_index])

    def nd(self) -> np.ndarray:
        return self.samples.reshape((self.grid.G,) * self.grid.n)


# -- exact multiplier ---------------------------------------------------------------


def exact_multiplier(
    form: IntegralForm,
    phi: CutoffFunction,
    lam: int,
    G: int,
    shell: LatticeShell | None = None,
    budget: float = DEFAULT_GRID_BUDGET,
    workers: int = 1,
    **kw,
) -> MultiplierGrid:
    """w-hat(xi_j) = r^{-1} sum_shell w_y e(-y . xi_j) on the full grid.

    The grid values are the DFT of the weight field reduced mod G (exact by
    periodicity of the characters), so one FFT covers the whole grid.
    """
    grid = TorusGrid(form.dimension, G)
    check_budget("multiplier grid", float(grid.total), budget)
    if shell is None:
        shell = enumerate_shell(form, phi, lam, **kw)
    if shell.is_empty():
        raise InvalidConfigError(f"lambda={lam} not represented inside the cutoff")
    acc = np.zeros((G,) * form.dimension, dtype=np.float64)
    np.add.at(acc, tuple(np.mod(shell.points, G).T), shell.weights / shell.r_value)
    spec = sfft.fftn(acc, workers=workers)
    # fftn samples at frequencies j/G; our grid wants (j - half)/G
    shifted = np.roll(spec, grid.half, axis=tuple(range(form.dimension)))
    return MultiplierGrid("what", grid, shifted.reshape(-1))


def exact_multiplier_at(
    form: IntegralForm,
    phi: CutoffFunction,
    lam: int,
    xi_points,
    shell: LatticeShell | None = None,
    **kw,
) -> np.ndarray:
    """Direct evaluation at arbitrary xi (independent summation oracle)."""
    if shell is None:
        shell = enumerate_shell(form, phi, lam, **kw)
    if shell.is_empty():
        raise InvalidConfigError(f"lambda={lam} not represented inside the cutoff")
    xi = np.atleast_2d(np.asarray(xi_points, dtype=np.float64))
    out = np.zeros(len(xi), dtype=np.complex128)
    chunk = max(1, int(2e6 // max(len(xi), 1)))
    for start in range(0, shell.size, chunk):
        pts = shell.points[start : start + chunk].astype(np.float64)
        w = shell.weights[start : start + chunk]
        out += (w[None, :] * e(-xi @ pts.T)).sum(axis=1)
    return out / shell.r_value


# -- arithmetic coefficient tables ----------------------------------------------------


def h_table(form: IntegralForm, lam: int, q: int, budget=DEFAULT_GRID_BUDGET):
    """H_q[b] = sum_{a in U_q} e_q(-a lam) F_q(a, b), dense over Z_q^n."""
    check_budget("h table", float(q) ** form.dimension, budget)
    table = WeylTable(form, q)
    out = np.zeros((q,) * form.dimension, dtype=np.complex128)
    for a in units(q):
        out += complex(e(-a * (lam % q) / q)) * table.slice(a)
    return out


def s_table(form: IntegralForm, L: int, budget=DEFAULT_GRID_BUDGET):
    """S[b] = sum_{a in Z_L} F_L(a, b); the coefficient of both the
    factorized multiplier and its arithmetic factor."""
    check_budget("s table", float(L) ** form.dimension, budget)
    table = WeylTable(form, L)
    out = np.zeros((L,) * form.dimension, dtype=np.complex128)
    for a in range(L):
        out += table.slice(a)
    return out


def m222_table(form: IntegralForm, L: int, N: int, budget=DEFAULT_GRID_BUDGET):
    """D[b] = sum over a in Z_L with L/gcd(a,b,L) > N of F_L(a, b)."""
    check_budget("m222 table", float(L) ** form.dimension * L, budget)
    table = WeylTable(form, L)
    n = form.dimension
    shape = (L,) * n
    # gcd of all components of b with L, per cell
    axes = np.meshgrid(*([np.arange(L)] * n), indexing="ij")
    gb = np.full(shape, L, dtype=np.int64)
    gcd = np.gcd
    for ax in axes:
        gb = gcd(gb, ax)
    out = np.zeros(shape, dtype=np.complex128)
    for a in range(L):
        nu = gcd(gb, math.gcd(a, L))
        mask = (L // nu) > N
        out += np.where(mask, table.slice(a), 0.0)
    return out


def m221_tables(form: IntegralForm, L: int, N: int, budget=DEFAULT_GRID_BUDGET):
    """Per reduced denominator q = L/nu <= N: C_q[b'] = sum over a in Z_L with
    gcd(a, nu b', L) = nu of F_L(a, nu b')."""
    table = WeylTable(form, L)
    n = form.dimension
    out = {}
    for q in range(1, N + 1):
        if L % q:
            continue
        nu = L // q
        check_budget("m221 table", float(q) ** n * L, budget)
        C = np.zeros((q,) * n, dtype=np.complex128)
        for bp in np.ndindex(*(q,) * n):
            b = tuple(nu * x for x in bp)
            total = 0.0 + 0j
            for a in range(L):
                if tuple_gcd(a, b, L) == nu:
                    total += table.value(a, b)
            C[bp] = total
        out[q] = C
    return out


# -- locally finite bump sums ----------------------------------------------------------


def _local_terms(xi: np.ndarray, q: int, radius: float, coeff_flat: np.ndarray):
    """Yield (indices, distances, coefficients) for every lattice point b/q
    (periodized) within `radius` of each xi row.

    Candidates are the 2^n corners floor(q xi) + delta; the walk is in
    Gray-code order so each step updates one axis of the running distance
    and flat b-index.
    """
    m, n = xi.shape
    qxi = q * xi
    k0 = np.floor(qxi).astype(np.int64)
    d0 = [xi[:, i] - k0[:, i] / q for i in range(n)]
    sq0 = [d * d for d in d0]
    sq1 = [(d - 1.0 / q) * (d - 1.0 / q) for d in d0]
    strides = [q ** (n - 1 - i) for i in range(n)]
    f0 = [np.mod(k0[:, i], q) * strides[i] for i in range(n)]
    f1 = [np.mod(k0[:, i] + 1, q) * strides[i] for i in range(n)]
    dist2 = sq0[0].copy()
    for i in range(1, n):
        dist2 += sq0[i]
    bflat = f0[0].copy()
    for i in range(1, n):
        bflat += f0[i]
    delta = [0] * n
    radius2 = radius * radius
    for step in range(1 << n):
        if step:
            j = (step & -step).bit_length() - 1
            if delta[j] == 0:
                dist2 += sq1[j] - sq0[j]
                bflat += f1[j] - f0[j]
                delta[j] = 1
            else:
                dist2 += sq0[j] - sq1[j]
                bflat += f0[j] - f1[j]
                delta[j] = 0
        idx = np.nonzero(dist2 < radius2)[0]
        if idx.size:
            yield idx, np.sqrt(dist2[idx]), coeff_flat[bflat[idx]]


def _make_mt_kernel():
    if numba is None:
        return None

    @numba.njit(cache=True, fastmath=True)
    def kernel(
        xi,
        qmax,
        N,
        h_flat,
        h_off,
        p_vals,
        p_off,
        p_inv,
        p_top,
        w_vals,
        w_off,
        w_inv,
        w_top,
        gray_axis,
        out_c,
        out_m12,
        out_m22,
        out_m23,
    ):
        m, n = xi.shape
        combos = 1 << n
        sd = np.empty(n)
        bd = np.empty(n, dtype=np.int64)
        for j in range(m):
            for q in range(1, qmax + 1):
                r = 1.0 / q
                r2 = r * r
                dist2 = 0.0
                bidx = 0
                stride = 1
                for i in range(n - 1, -1, -1):
                    x = xi[j, i]
                    k = int(math.floor(q * x))
                    d0 = x - k * r
                    d1 = d0 - r
                    s0 = d0 * d0
                    sd[i] = d1 * d1 - s0
                    b0 = k % q
                    if b0 < 0:
                        b0 += q
                    b1 = b0 + 1
                    if b1 == q:
                        b1 = 0
                    bd[i] = (b1 - b0) * stride
                    dist2 += s0
                    bidx += b0 * stride
                    stride *= q
                bits = 0
                base = h_off[q]
                pbase = p_off[q]
                pinv = p_inv[q]
                ptop = p_top[q]
                wbase = w_off[q]
                winv = w_inv[q]
                wtop = w_top[q]
                low_q = q <= N
                for step in range(combos):
                    if step > 0:
                        ax = gray_axis[step]
                        if (bits >> ax) & 1:
                            dist2 -= sd[ax]
                            bidx -= bd[ax]
                            bits &= ~(1 << ax)
                        else:
                            dist2 += sd[ax]
                            bidx += bd[ax]
                            bits |= 1 << ax
                    if dist2 < r2:
                        coeff = h_flat[base + bidx]
                        if coeff.real == 0.0 and coeff.imag == 0.0:
                            continue
                        dist = math.sqrt(dist2)
                        t = dist * pinv
                        if t > ptop:
                            t = ptop
                        iz = int(t)
                        pv = p_vals[pbase + iz]
                        pv += (p_vals[pbase + iz + 1] - pv) * (t - iz)
                        term = coeff * pv
                        out_c[j] += term
                        if low_q:
                            t = dist * winv
                            if t > wtop:
                                t = wtop
                            iw = int(t)
                            wv = w_vals[wbase + iw]
                            wv += (w_vals[wbase + iw + 1] - wv) * (t - iw)
                            t2 = coeff * wv
                            out_m12[j] += t2
                            out_m22[j] += term - t2
                        else:
                            out_m23[j] += term

    return kernel


_MT_KERNEL = _make_mt_kernel()


def _gray_axes(n: int) -> np.ndarray:
    """Axis flipped at each step of the Gray walk over {0,1}^n."""
    out = np.zeros(1 << n, dtype=np.int64)
    for step in range(1, 1 << n):
        out[step] = (step & -step).bit_length() - 1
    return out


class MainTermEvaluator:
    """Streaming evaluator for c_lam and its frequency split m12/m22/m23.

    m12 keeps the narrowed bump (scale q lam^(1/d) / N), m22 the annulus
    between it and the q-bump, m23 the q > N tail; their sum telescopes to
    c_lam exactly, so the partition identity holds to rounding.
    """

    def __init__(
        self,
        form: IntegralForm,
        phi: CutoffFunction,
        lam: int,
        N: int,
        dsig: SurfaceMeasure | None = None,
        zeta: BumpProfile | None = None,
        normalized: bool = True,
        shell: LatticeShell | None = None,
        **kw,
    ):
        self.form = form
        self.lam = lam
        self.lamd = lam ** (1.0 / form.degree)
        self.qmax = int(math.floor(self.lamd + 1e-9))
        if not (1 <= N <= self.qmax):
            raise InvalidConfigError("need 1 <= N <= lam^(1/d)")
        self.N = N
        self.zeta = zeta or low_cutoff()
        self.dsig = dsig or SurfaceMeasure(form, phi)
        if not self.dsig.has_radial:
            raise InvalidConfigError(
                "main-term evaluation needs a radial surface transform; "
                "use the sphere form or precompute a radial table"
            )
        self._ds = self.dsig.radial_table(self.lamd + 1.0)
        self.h = {q: h_table(form, lam, q).reshape(-1) for q in range(1, self.qmax + 1)}
        if normalized:
            if shell is None:
                shell = enumerate_shell(form, phi, lam, **kw)
            self.scale = lam ** (form.dimension / form.degree - 1.0) / shell.r_value
        else:
            self.scale = 1.0
        self._h_off = np.zeros(self.qmax + 1, dtype=np.int64)
        total = 0
        for q in range(1, self.qmax + 1):
            self._h_off[q] = total
            total += len(self.h[q])
        self._h_flat = np.concatenate([self.h[q] for q in range(1, self.qmax + 1)])
        self._gray = _gray_axes(form.dimension)
        self._build_product_tables()

    def _build_product_tables(self, entries: int = 40000):
        """Per-q tables of zeta(q d) * transform(lam^(1/d) d) on d in [0,1/q]
        (and the wide-bump variant for q <= N): one lookup per survivor."""
        p_vals, w_vals = [], []
        self._p_off = np.zeros(self.qmax + 1, dtype=np.int64)
        self._w_off = np.zeros(self.qmax + 1, dtype=np.int64)
        self._p_inv = np.zeros(self.qmax + 1)
        self._w_inv = np.zeros(self.qmax + 1)
        self._p_top = np.zeros(self.qmax + 1)
        self._w_top = np.zeros(self.qmax + 1)
        pc = wc = 0
        for q in range(1, self.qmax + 1):
            span = 1.0 / q
            d = np.linspace(0.0, span, entries)
            ds = self._ds(self.lamd * d)
            pv = self.zeta.hat(q * d) * ds
            self._p_off[q] = pc
            self._p_inv[q] = (entries - 1) / span
            self._p_top[q] = entries - 1.000001
            p_vals.append(pv)
            pc += entries
            if q <= self.N:
                wide = q * self.lamd / self.N
                wv = self.zeta.hat(wide * d) * ds
                self._w_off[q] = wc
                self._w_inv[q] = (entries - 1) / span
                self._w_top[q] = entries - 1.000001
                w_vals.append(wv)
                wc += entries
        self._p_vals = np.concatenate(p_vals)
        self._w_vals = np.concatenate(w_vals) if w_vals else np.zeros(1)

    def evaluate(self, xi: np.ndarray) -> dict:
        m = len(xi)
        c = np.zeros(m, dtype=np.complex128)
        m12 = np.zeros(m, dtype=np.complex128)
        m22 = np.zeros(m, dtype=np.complex128)
        m23 = np.zeros(m, dtype=np.complex128)
        if _MT_KERNEL is not None:
            _MT_KERNEL(
                np.ascontiguousarray(xi),
                self.qmax,
                self.N,
                self._h_flat,
                self._h_off,
                self._p_vals,
                self._p_off,
                self._p_inv,
                self._p_top,
                self._w_vals,
                self._w_off,
                self._w_inv,
                self._w_top,
                self._gray,
                c,
                m12,
                m22,
                m23,
            )
        else:
            for q in range(1, self.qmax + 1):
                wide = q * self.lamd / self.N
                for idx, dist, coeff in _local_terms(xi, q, 1.0 / q, self.h[q]):
                    ds = self._ds(self.lamd * dist)
                    term = coeff * (ds * self.zeta.hat(q * dist))
                    c[idx] += term
                    if q <= self.N:
                        t2 = coeff * (ds * self.zeta.hat(wide * dist))
                        m12[idx] += t2
                        m22[idx] += term - t2
                    else:
                        m23[idx] += term
        s = self.scale
        return {"c": c * s, "m12": m12 * s, "m22": m22 * s, "m23": m23 * s}


class LPieceEvaluator:
    """Streaming evaluator for the factorial-modulus pieces: the factorized
    multiplier omega = v * s, its factors, and the gcd-split halves of the
    composite-denominator correction."""

    def __init__(
        self,
        form: IntegralForm,
        phi: CutoffFunction,
        lam: int,
        N: int,
        L: int | None = None,
        dsig: SurfaceMeasure | None = None,
        zeta: BumpProfile | None = None,
        normalized: bool = True,
        shell: LatticeShell | None = None,
        **kw,
    ):
        self.form = form
        self.lam = lam
        self.lamd = lam ** (1.0 / form.degree)
        self.N = N
        self.L = math.factorial(N) if L is None else L
        lcm = 1
        for q in range(1, N + 1):
            lcm = lcm * q // math.gcd(lcm, q)
        if self.L % lcm:
            raise InvalidConfigError("L must be divisible by every q <= N")
        self.zeta = zeta or low_cutoff()
        self.dsig = dsig or SurfaceMeasure(form, phi)
        if not self.dsig.has_radial:
            raise InvalidConfigError("factorized pieces need a radial transform")
        self._ds = self.dsig.radial_table(self.lamd + 1.0)
        self._s_table = s_table(form, self.L).reshape(-1)
        self._ones = np.ones(self.L**form.dimension, dtype=np.float64)
        self._m222 = None
        self._m221 = None
        if normalized:
            if shell is None:
                shell = enumerate_shell(form, phi, lam, **kw)
            self.scale = lam ** (form.dimension / form.degree - 1.0) / shell.r_value
        else:
            self.scale = 1.0

    def _need_m22_tables(self):
        if self._m222 is None:
            self._m222 = m222_table(self.form, self.L, self.N).reshape(-1)
            self._m221 = {
                q: C.reshape(-1) for q, C in m221_tables(self.form, self.L, self.N).items()
            }

    def evaluate(self, xi: np.ndarray, labels=("omega", "v", "s")) -> dict:
        m = len(xi)
        L = self.L
        want = set(labels)
        out = {k: np.zeros(m, dtype=np.complex128) for k in want - {"crossfree"}}
        if {"omega", "s"} & want:
            for idx, dist, cf in _local_terms(xi, L, 1.0 / (2.0 * L), self._s_table):
                z2 = self.zeta.hat(2.0 * L * dist)
                if "s" in want:
                    out["s"][idx] += cf * z2
                if "omega" in want:
                    out["omega"][idx] += cf * (z2 * self._ds(self.lamd * dist))
        if "m222" in want:
            self._need_m22_tables()
            for idx, dist, cf in _local_terms(xi, L, 1.0 / (2.0 * L), self._m222):
                z2 = self.zeta.hat(2.0 * L * dist)
                out["m222"][idx] += cf * (z2 * self._ds(self.lamd * dist))
        if {"v", "crossfree"} & want:
            sum_l = np.zeros(m)
            sum_2l = np.zeros(m)
            diag = np.zeros(m)
            for idx, dist, _ in _local_terms(xi, L, 1.0 / L, self._ones):
                zl = self.zeta.hat(L * dist)
                if "v" in want:
                    out["v"][idx] += zl * self._ds(self.lamd * dist)
                if "crossfree" in want:
                    z2 = self.zeta.hat(2.0 * L * dist)
                    sum_l[idx] += zl
                    sum_2l[idx] += np.abs(z2)
                    diag[idx] += zl * np.abs(z2)
            if "crossfree" in want:
                out["crossfree"] = sum_l * sum_2l - diag == 0.0
        if "m221" in want:
            self._need_m22_tables()
            for q, C in self._m221.items():
                for idx, dist, cf in _local_terms(xi, q, 1.0 / q, C):
                    zdiff = self.zeta.hat(2.0 * L * dist) - self.zeta.hat(q * dist)
                    out["m221"][idx] += cf * (zdiff * self._ds(self.lamd * dist))
        for k in out:
            if k not in ("s", "crossfree"):
                # the arithmetic factor s carries no measure normalization
                out[k] = out[k] * self.scale
        return out


# -- public piece ops --------------------------------------------------------------------

PIECE_LABELS = (
    "m11",
    "m12",
    "m21",
    "m22",
    "m221",
    "m222",
    "m23",
    "omega",
    "v",
    "s",
    "c",
)


def main_term(
    form: IntegralForm,
    phi: CutoffFunction,
    lam: int,
    G: int,
    N: int | None = None,
    budget: float = DEFAULT_GRID_BUDGET,
    chunk: int = DEFAULT_CHUNK,
    **kw,
) -> MultiplierGrid:
    """c_lam sampled on the torus grid."""
    grid = TorusGrid(form.dimension, G)
    check_budget("multiplier grid", float(grid.total), budget)
    ev = MainTermEvaluator(form, phi, lam, N or 1, **kw)
    samples = np.empty(grid.total, dtype=np.complex128)
    for start, stop, xi in grid.chunks(chunk):
        samples[start:stop] = ev.evaluate(xi)["c"]
    return MultiplierGrid("c", grid, samples)


def piece(
    label: str,
    form: IntegralForm,
    phi: CutoffFunction,
    lam: int,
    G: int,
    N: int,
    L: int | None = None,
    budget: float = DEFAULT_GRID_BUDGET,
    chunk: int = DEFAULT_CHUNK,
    normalized: bool = True,
    **kw,
) -> MultiplierGrid:
    """Grid samples of a named decomposition piece."""
    if label not in PIECE_LABELS:
        raise InvalidConfigError(f"unknown piece {label!r}")
    grid = TorusGrid(form.dimension, G)
    check_budget("multiplier grid", float(grid.total), budget)
    shell = kw.pop("shell", None)
    if label == "m11":
        lamd = lam ** (1.0 / form.degree)
        if lamd <= N:
            return MultiplierGrid(
                label,
                grid,
                exact_multiplier(form, phi, lam, G, shell=shell, budget=budget).samples,
            )
        return MultiplierGrid(label, grid, np.zeros(grid.total, dtype=np.complex128))
    if label in ("c", "m12", "m22", "m23", "m21"):
        if label == "m21" and not normalized:
            raise InvalidConfigError("m21 mixes normalizations unless normalized=True")
        ev = MainTermEvaluator(
            form, phi, lam, N, normalized=normalized, shell=shell, **kw
        )
        samples = np.empty(grid.total, dtype=np.complex128)
        key = "c" if label == "m21" else label
        for start, stop, xi in grid.chunks(chunk):
            samples[start:stop] = ev.evaluate(xi)[key]
        if label == "m21":
            what = exact_multiplier(form, phi, lam, G, shell=shell, budget=budget)
            samples = what.samples - samples
        return MultiplierGrid(label, grid, samples)
    ev = LPieceEvaluator(form, phi, lam, N, L=L, normalized=normalized, shell=shell, **kw)
    samples = np.empty(grid.total, dtype=np.complex128)
    for start, stop, xi in grid.chunks(chunk):
        samples[start:stop] = ev.evaluate(xi, labels=(label,))[label]
    return MultiplierGrid(label, grid, samples)


def factorization_check(
    form: IntegralForm,
    phi: CutoffFunction,
    lam: int,
    N: int,
    G: int,
    L: int | None = None,
    chunk: int = DEFAULT_CHUNK,
    **kw,
):
    """max |omega - v*s| over grid points where no cross pair of bumps
    overlaps, plus the fraction of such points."""
    grid = TorusGrid(form.dimension, G)
    ev = LPieceEvaluator(form, phi, lam, N, L=L, **kw)
    worst = 0.0
    eligible = 0
    for start, stop, xi in grid.chunks(chunk):
        vals = ev.evaluate(xi, labels=("omega", "v", "s", "crossfree"))
        mask = vals["crossfree"]
        eligible += int(mask.sum())
        if mask.any():
            err = np.abs(vals["omega"][mask] - vals["v"][mask] * vals["s"][mask])
            worst = max(worst, float(err.max()))
    return worst, eligible / grid.total


def reconstruction_report(
    form: IntegralForm,
    phi: CutoffFunction,
    lam: int,
    N: int,
    G: int,
    chunk: int = DEFAULT_CHUNK,
    workers: int = 1,
    **kw,
) -> dict:
    """One streaming pass over the grid: partition error
    max |c - (m12+m22+m23)|, reconstruction error max |what - c - m21| with
    m21 = what - c, and the sup norms of the pieces."""
    shell = enumerate_shell(form, phi, lam, **kw)
    what = exact_multiplier(form, phi, lam, G, shell=shell, workers=workers)
    ev = MainTermEvaluator(form, phi, lam, N, shell=shell)
    grid = what.grid
    part_err = 0.0
    recon_err = 0.0
    sup = {k: 0.0 for k in ("c", "m12", "m22", "m23", "m21", "what")}
    for start, stop, xi in grid.chunks(chunk):
        vals = ev.evaluate(xi)
        wchunk = what.samples[start:stop]
        m21 = wchunk - vals["c"]
        part_err = max(
            part_err,
            float(
                np.max(np.abs(vals["c"] - (vals["m12"] + vals["m22"] + vals["m23"])))
            ),
        )
        recon_err = max(recon_err, float(np.max(np.abs(wchunk - vals["c"] - m21))))
        for k in ("c", "m12", "m22", "m23"):
            sup[k] = max(sup[k], float(np.max(np.abs(vals[k]))))
        sup["m21"] = max(sup["m21"], float(np.max(np.abs(m21))))
        sup["what"] = max(sup["what"], float(np.max(np.abs(wchunk))))
    return {
        "partition_error": part_err,
        "reconstruction_error": recon_err,
        "sup": sup,
        "r_value": shell.r_value,
    }


# -- kernel of the arithmetic factor -----------------------------------------------------


def kernel_of_s(
    form: IntegralForm,
    N: int,
    box,
    L: int | None = None,
    zeta: BumpProfile | None = None,
    bump_scale: str = "2L",
):
    """Closed-form kernel of the arithmetic factor on the lattice box:
    L * zeta_scale(x) * [R(x) = 0 mod L], where scale follows the defining
    bump (2L) or the alternative single-L convention.

    Returns (points, values, l1_mass)."""
    L = math.factorial(N) if L is None else L
    zeta = zeta or low_cutoff()
    scale = 2.0 * L if bump_scale == "2L" else float(L)
    lo, hi = box
    axes = [np.arange(a, b + 1, dtype=np.int64) for a, b in zip(lo, hi)]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=-1)
    vals_mod = np.mod(form(pts), L) == 0
    n = form.dimension
    r = np.sqrt(np.sum(pts.astype(np.float64) ** 2, axis=-1))
    zvals = zeta.spatial(r / scale, n) / scale**n
    values = L * zvals * vals_mod
    return pts, values, float(np.sum(np.abs(values)))


def kernel_of_s_bruteforce(
    form: IntegralForm,
    L: int,
    points: np.ndarray,
    zeta: BumpProfile | None = None,
    bump_scale: str = "2L",
) -> np.ndarray:
    """Independent oracle: zeta_scale(x) * sum_{a in Z_L} sum_{b in Z_L^n}
    F_L(a,b) e(x.b/L) with the Weyl sums computed by direct summation."""
    zeta = zeta or low_cutoff()
    scale = 2.0 * L if bump_scale == "2L" else float(L)
    n = form.dimension
    pts = np.asarray(points, dtype=np.int64)
    total = np.zeros(len(pts), dtype=np.complex128)
    for a in range(L):
        for b in np.ndindex(*(L,) * n):
            F = weyl_sum(form, L, a, list(b), method="direct")
            phases = e(np.mod(pts @ np.array(b, dtype=np.int64), L) / L)
            total += F * phases
    r = np.sqrt(np.sum(pts.astype(np.float64) ** 2, axis=-1))
    zvals = zeta.spatial(r / scale, n) / scale**n
    return zvals * total


# -- cross-cutting checks ------------------------------------------------------------------


def plancherel_check(
    form: IntegralForm,
    phi: CutoffFunction,
    lam: int,
    T: int,
    seed: int = 0,
    **kw,
):
    """l2 norm of the periodized average computed spatially vs through the
    multiplier samples; returns (spatial, fourier)."""
    shell = enumerate_shell(form, phi, lam, **kw)
    if shell.is_empty():
        raise InvalidConfigError("empty shell")
    n = form.dimension
    rng = np.random.default_rng(seed)
    f = rng.standard_normal((T,) * n) + 1j * rng.standard_normal((T,) * n)
    kernel = np.zeros((T,) * n, dtype=np.float64)
    np.add.at(kernel, tuple(np.mod(shell.points, T).T), shell.weights / shell.r_value)
    fhat = sfft.fftn(f)
    khat = sfft.fftn(kernel)
    g = sfft.ifftn(fhat * khat)
    spatial = float(np.sqrt(np.sum(np.abs(g) ** 2)))
    fourier = float(np.sqrt(np.sum(np.abs(fhat * khat) ** 2) / T**n))
    return spatial, fourier


def lowpass_surface_convolution(
    dsig: SurfaceMeasure,
    zeta: BumpProfile,
    t: float,
    x_points: np.ndarray,
):
    """(zeta_t * dsigma)(x) by spatial quadrature against measure nodes."""
    if dsig.has_radial and dsig.n <= 3:
        nodes, w = dsig.sphere_product_nodes()
    else:
        nodes, w = dsig.nodes()
    x = np.atleast_2d(np.asarray(x_points, dtype=np.float64))
    out = np.empty(len(x))
    n = dsig.n
    chunk = max(1, int(2e6 // max(len(nodes), 1)))
    for start in range(0, len(x), chunk):
        diff = x[start : start + chunk, None, :] - nodes[None, :, :]
        r = np.sqrt(np.sum(diff**2, axis=-1))
        out[start : start + chunk] = (zeta.spatial(r / t, n) / t**n) @ w
    return out

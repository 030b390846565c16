"""Sparse collections on dyadic cubes, sparse forms, exact region geometry,
the stopping-time recursion as an executable certificate search, and
improving-norm scans for the single-scale average.

Witness sets are unions of dyadic cubes (the canonical decomposition of
"cube minus stopping children"), so cardinalities and disjointness are exact
without materializing point sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.signal import fftconvolve

from .dyadic import DyadicCube, complement_decomposition
from .forms import CutoffFunction, IntegralForm, constants
from .gridops import GridFunction
from .lattice import LatticeShell, enumerate_shell
from .util import InvalidConfigError


# -- region geometry -----------------------------------------------------------------


@dataclass(frozen=True)
class Region:
    """Convex region in the (1/p, 1/q) square with exact rational vertices,
    oriented counterclockwise; membership tests are exact."""

    name: str
    vertices: tuple  # of (Fraction, Fraction)

    def __post_init__(self):
        if len(self.vertices) < 3:
            raise InvalidConfigError("region needs >= 3 vertices")
        for x, y in self.vertices:
            if not (0 <= x <= 1 and 0 <= y <= 1):
                raise InvalidConfigError("vertices must lie in the unit square")
        if self.signed_area() < 0:
            object.__setattr__(self, "vertices", tuple(reversed(self.vertices)))
        m = len(self.vertices)
        for i in range(m):
            a, b, c = (
                self.vertices[i],
                self.vertices[(i + 1) % m],
                self.vertices[(i + 2) % m],
            )
            if _cross(a, b, c) < 0:
                raise InvalidConfigError("region is not convex")

    def signed_area(self) -> Fraction:
        s = Fraction(0)
        m = len(self.vertices)
        for i in range(m):
            x1, y1 = self.vertices[i]
            x2, y2 = self.vertices[(i + 1) % m]
            s += x1 * y2 - x2 * y1
        return s / 2

    def area(self) -> Fraction:
        return abs(self.signed_area())

    def contains(self, point, open_region: bool = True) -> bool:
        p = (Fraction(point[0]), Fraction(point[1]))
        m = len(self.vertices)
        for i in range(m):
            c = _cross(self.vertices[i], self.vertices[(i + 1) % m], p)
            if c < 0 or (open_region and c == 0):
                return False
        return True

    def contains_region(self, other: "Region", strict: bool = False) -> bool:
        """Open-set containment: every vertex of other in the closure; strict
        additionally requires the regions to differ."""
        ok = all(self.contains(v, open_region=False) for v in other.vertices)
        if not ok:
            return False
        return other.area() < self.area() if strict else True

    def barycenter(self):
        m = len(self.vertices)
        x = sum(v[0] for v in self.vertices) / m
        y = sum(v[1] for v in self.vertices) / m
        return (x, y)

    def midpoint_vertex_to_barycenter(self, i: int):
        bx, by = self.barycenter()
        vx, vy = self.vertices[i]
        return ((vx + bx) / 2, (vy + by) / 2)


def _cross(a, b, c) -> Fraction:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def region(name: str, form_or_n, phi: CutoffFunction | None = None) -> Region:
    """Named regions of the sparse-bound landscape, exact rationals.

    Sn needs the form (through eta); Pn and the polygon need only the
    dimension; Vn and Dn need c (through the form's rank data).
    """
    if isinstance(form_or_n, IntegralForm):
        form = form_or_n
        n = form.dimension
        cst = constants(form)
        c, eta = cst.c_R, cst.eta_R
    else:
        form = None
        n = int(form_or_n)
        c = eta = None
    F = Fraction
    if name == "Sn":
        if eta is None:
            raise InvalidConfigError("Sn needs a form")
        s2 = (1 + 2 * eta) / (2 * (1 + eta))
        return Region("Sn", ((F(0), F(1)), (s2, s2), (F(1), F(0))))
    if name == "Pn":
        v = F(n - 1, n + 1)
        return Region("Pn", ((F(0), F(1)), (v, v), (F(1), F(0))))
    if name == "Vn":
        if c is None:
            raise InvalidConfigError("Vn needs a form")
        v = (2 * c - 1) / (2 * c)
        return Region("Vn", ((F(1), F(0)), (v, v), (F(0), F(1))))
    if name == "Dn":
        if c is None:
            raise InvalidConfigError("Dn needs a form")
        return Region(
            "Dn",
            ((F(0), F(0)), ((2 * c - 1) / (2 * c), 1 / (2 * c)), (F(1), F(1))),
        )
    if name == "KLM-polygon":
        denom = n**3 - 2 * n**2 + n - 2
        return Region(
            "KLM-polygon",
            (
                (F(n - 2, n), F(2, n)),
                (F(n - 2, n), F(n - 2, n)),
                (F(n**3 - 4 * n**2 + 4 * n + 1, denom), F(n**3 - 4 * n**2 + 6 * n - 7, denom)),
                (F(0), F(1)),
            ),
        )
    raise InvalidConfigError(f"unknown region {name!r}")


def region_svg(regions, path: str | None = None, size: int = 480) -> str:
    """Static SVG of the regions in the unit (1/p, 1/q) square, with labeled
    vertices; the polygon is shaded, triangles are outlined."""
    pad = 50
    span = size - 2 * pad

    def xy(v):
        return (pad + float(v[0]) * span, size - pad - float(v[1]) * span)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<line x1="{pad}" y1="{size-pad}" x2="{size-pad+20}" y2="{size-pad}" '
        'stroke="black" stroke-width="1.5"/>',
        f'<line x1="{pad}" y1="{size-pad}" x2="{pad}" y2="{pad-20}" '
        'stroke="black" stroke-width="1.5"/>',
        f'<text x="{size-pad+24}" y="{size-pad+5}" font-size="14">1/p</text>',
        f'<text x="{pad-12}" y="{pad-26}" font-size="14">1/q</text>',
    ]
    palette = ["#7fc4dd", "#9f9fdf", "#dd9f9f", "#9fdf9f"]
    for k, reg in enumerate(regions):
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in (xy(v) for v in reg.vertices))
        fill = palette[k % len(palette)] if len(reg.vertices) > 3 else "none"
        opacity = "0.45" if fill != "none" else "1"
        parts.append(
            f'<polygon points="{pts}" fill="{fill}" fill-opacity="{opacity}" '
            f'stroke="{palette[k % len(palette)]}" stroke-width="2"/>'
        )
        for i, v in enumerate(reg.vertices):
            x, y = xy(v)
            parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" fill="black"/>')
            parts.append(
                f'<text x="{x+6:.2f}" y="{y-6:.2f}" font-size="11">'
                f"{reg.name}[{i}]=({v[0]},{v[1]})</text>"
            )
    parts.append("</svg>")
    svg = "\n".join(parts)
    if path:
        with open(path, "w") as fh:
            fh.write(svg)
    return svg


# -- sparse collections -----------------------------------------------------------------


class InvalidCollectionError(ValueError):
    def __init__(self, message, offenders=()):
        self.offenders = list(offenders)
        super().__init__(f"{message}: {self.offenders}" if offenders else message)


@dataclass
class SparseCollection:
    """Cubes with witness sets, each witness a disjoint union of dyadic
    cubes contained in its cube."""

    entries: list  # of (DyadicCube, tuple of DyadicCube)

    def cubes(self):
        return [q for q, _ in self.entries]

    def witness_size(self, i: int) -> int:
        return sum(w.size for w in self.entries[i][1])

    def validate(self) -> None:
        flat = []
        for q, witness in self.entries:
            total = 0
            for w in witness:
                if not q.contains_cube(w):
                    raise InvalidCollectionError("witness outside its cube", [(q, w)])
                total += w.size
                flat.append(w)
            if 4 * total <= q.size:
                raise InvalidCollectionError(
                    "witness density |E| > |Q|/4 violated", [q]
                )
        index = {}
        for w in flat:
            key = (w.level, w.corner)
            if key in index:
                raise InvalidCollectionError("duplicate witness cube", [w])
            index[key] = w
        max_level = max((w.level for w in flat), default=0)
        for w in flat:
            side = w.side
            corner = w.corner
            for lvl in range(w.level + 1, max_level + 1):
                side2 = 1 << lvl
                anc = tuple((c // side2) * side2 for c in corner)
                if (lvl, anc) in index:
                    raise InvalidCollectionError(
                        "overlapping witness cubes", [w, index[(lvl, anc)]]
                    )


def sparse_form_value(
    collection: SparseCollection, p: float, q: float, f, g, validate: bool = True
) -> float:
    """Lambda_{S,p,q}(f,g) = sum_Q |Q| <f>_{Q,p} <g>_{Q,q}.

    f and g may be GridFunctions or integer point arrays (characteristic
    sets)."""
    if validate:
        collection.validate()
    total = 0.0
    for cube, _ in collection.entries:
        lo, hi = cube.box()
        total += cube.size * _cube_avg(f, lo, hi, p) * _cube_avg(g, lo, hi, q)
    return total


def _cube_avg(f, lo, hi, p) -> float:
    if isinstance(f, GridFunction):
        return f.cube_average((lo, hi), p)
    pts = np.asarray(f, dtype=np.int64)
    inside = np.all((pts >= lo) & (pts < hi), axis=1)
    size = float(np.prod(hi - lo))
    frac = float(inside.sum()) / size
    if p == math.inf:
        return 1.0 if inside.any() else 0.0
    return frac ** (1.0 / p)


# -- point-set machinery for the recursion -------------------------------------------------


def _points_in_box(pts: np.ndarray, lo, hi) -> np.ndarray:
    return np.all((pts >= lo) & (pts < hi), axis=1)


class _ShellKit:
    """Shared shell data: per-radius point offsets, weights, and fast
    membership counting of F against x - shell."""

    def __init__(self, form, phi, radii, shells=None, **kw):
        self.n = form.dimension
        self.shells = {}
        for lam in radii:
            shell = (shells or {}).get(lam) or enumerate_shell(form, phi, lam, **kw)
            if shell.is_empty():
                raise InvalidConfigError(f"radius {lam} not represented")
            self.shells[lam] = shell

    def encode(self, pts: np.ndarray, offset: int, stride: int) -> np.ndarray:
        code = np.zeros(len(pts), dtype=np.int64)
        for i in range(self.n):
            code = code * stride + (pts[:, i] + offset)
        return code

    def averages_at(self, lam: int, xs: np.ndarray, f_codes: np.ndarray, offset, stride):
        """M_lam 1_F at each x in xs, given sorted encoded F."""
        shell = self.shells[lam]
        if len(xs) == 0:
            return np.zeros(0)
        out = np.empty(len(xs))
        w = shell.weights / shell.r_value
        block = max(1, int(4e6 // max(shell.size, 1)))
        for start in range(0, len(xs), block):
            diffs = xs[start : start + block, None, :] - shell.points[None, :, :]
            codes = np.zeros(diffs.shape[:2], dtype=np.int64)
            for i in range(self.n):
                codes = codes * stride + (diffs[:, :, i] + offset)
            hits = np.isin(codes, f_codes)
            out[start : start + block] = (hits * w[None, :]).sum(axis=1)
        return out


class PackingError(RuntimeError):
    """The stopping cubes exceed a quarter of the parent; C is too small."""


@dataclass
class RecursionCertificate:
    nodes: list = field(default_factory=list)  # per-node dicts
    pairing: float = 0.0  # <M_tau f, g> at the root node

    def max_ratio(self) -> float:
        return max((nd["ratio"] for nd in self.nodes), default=0.0)


def stopping_time_recursion(
    form: IntegralForm,
    phi: CutoffFunction,
    seq,
    F: np.ndarray,
    G: np.ndarray,
    root: DyadicCube,
    C: float | None = None,
    p: float = 2.0,
    q: float = 2.0,
    max_depth: int = 32,
    shells=None,
    **kw,
):
    """Density-stopping recursion producing a 1/4-sparse collection and a
    pairing certificate.

    At each node Q it finds the maximal dyadic P inside Q with
    <f>_{3P} > C <f>_{3Q}, keeps E_Q = Q minus those P, evaluates the
    stopping-truncated pairing <M_tau f, g> with tau maximizing over the
    radii admissible at each point (> side(P) under a stopping cube, all
    radii <= side(Q) elsewhere), and recurses into each P with f 1_{3P} and
    g 1_P.
    """
    n = form.dimension
    if C is None:
        C = 4.0 * 3.0**n
    F = np.asarray(F, dtype=np.int64).reshape(-1, n)
    G = np.asarray(G, dtype=np.int64).reshape(-1, n)
    radii = list(getattr(seq, "values", seq))
    kit = _ShellKit(form, phi, radii, shells=shells, **kw)
    span = 4 * root.side
    offset, stride = 2 * span, 8 * span
    entries = []
    cert = RecursionCertificate()

    def node(cube: DyadicCube, f_pts: np.ndarray, g_pts: np.ndarray, depth: int):
        if depth > max_depth:
            raise RecursionError("stopping recursion exceeded max depth")
        tlo, thi = cube.triple_box()
        base = len(f_pts) / float(np.prod(thi - tlo))
        stopping = []

        def search(pc: DyadicCube, fl: np.ndarray):
            b_lo, b_hi = pc.triple_box()
            sub = fl[_points_in_box(fl, b_lo, b_hi)]
            if len(sub) == 0:
                return
            if len(sub) / float(np.prod(b_hi - b_lo)) > C * base:
                stopping.append((pc, sub))
                return
            for ch in pc.children():
                search(ch, sub)

        if base > 0:
            for ch in cube.children():
                search(ch, f_pts)
        covered = sum(pc.size for pc, _ in stopping)
        if 4 * covered > cube.size:
            raise PackingError(
                f"stopping cubes cover {covered} > |Q|/4 = {cube.size // 4}; "
                f"raise C (currently {C})"
            )
        witness = tuple(complement_decomposition(cube, [pc for pc, _ in stopping]))
        entries.append((cube, witness))

        # pairing at this node: allowed radii per g-point
        pairing = 0.0
        if len(g_pts) and len(f_pts):
            f_codes = np.sort(kit.encode(f_pts, offset, stride))
            floor_side = np.zeros(len(g_pts), dtype=np.int64)
            for pc, _ in stopping:
                plo, phi_ = pc.box()
                inside = _points_in_box(g_pts, plo, phi_)
                floor_side[inside] = pc.side
            best = np.zeros(len(g_pts))
            for lam in radii:
                if lam > cube.side:
                    continue
                eligible = floor_side < lam
                if not eligible.any():
                    continue
                vals = kit.averages_at(
                    lam, g_pts[eligible], f_codes, offset, stride
                )
                best[eligible] = np.maximum(best[eligible], vals)
            pairing = float(best.sum())
        favg = (len(f_pts) / float(np.prod(thi - tlo))) ** (1.0 / p)
        gavg = (len(g_pts) / float(cube.size)) ** (1.0 / q)
        den = cube.size * favg * gavg
        cert.nodes.append(
            {
                "cube": cube,
                "stopping": len(stopping),
                "pairing": pairing,
                "ratio": (pairing / den) if den > 0 else 0.0,
            }
        )
        if depth == 0:
            cert.pairing = pairing

        for pc, f_sub in stopping:
            b_lo, b_hi = pc.box()
            g_sub = g_pts[_points_in_box(g_pts, b_lo, b_hi)]
            if len(g_sub) == 0:
                continue
            node(pc, f_sub, g_sub, depth + 1)

    tlo, thi = root.triple_box()
    F = F[_points_in_box(F, tlo, thi)]
    qlo, qhi = root.box()
    G = G[_points_in_box(G, qlo, qhi)]
    node(root, F, G, 0)
    collection = SparseCollection(entries)
    collection.validate()
    return collection, cert


# -- improving ratios -------------------------------------------------------------------


@dataclass
class ImprovingReport:
    lam: int
    p: float
    q: float
    max_ratio: float
    family_ratios: dict


def improving_ratio(
    form: IntegralForm,
    phi: CutoffFunction,
    lam: int,
    p: float,
    q: float,
    trials: int = 200,
    seed: int = 0,
    shell: LatticeShell | None = None,
    **kw,
) -> ImprovingReport:
    """Empirical sup over characteristic pairs of
    <M_lam 1_F, 1_G> / (|E| <1_F>_{E,p} <1_G>_{E,q}) with F, G inside
    E = [0, lam^(1/d)]^n; random pairs plus fixed adversarial presets."""
    n = form.dimension
    side = int(math.floor(lam ** (1.0 / form.degree) + 1e-9)) + 1
    E_size = side**n
    if shell is None:
        shell = enumerate_shell(form, phi, lam, **kw)
    if shell.is_empty():
        raise InvalidConfigError(f"lambda={lam} not represented")
    smin, smax = shell.bounding_box()
    kshape = tuple(smax - smin + 1)
    kernel = np.zeros(kshape)
    np.add.at(kernel, tuple((shell.points - smin).T), shell.weights / shell.r_value)

    def pair_value(f_arr, g_pts):
        conv = fftconvolve(f_arr, kernel)  # origin at 0 + smin
        # value at x: conv[x - smin]; g points live in [0, side)^n
        idx = g_pts - smin[None, :]
        ok = np.all((idx >= 0) & (idx < np.array(conv.shape)), axis=1)
        return float(conv[tuple(idx[ok].T)].sum())

    def ratio(f_arr, g_pts):
        nf = float(f_arr.sum())
        ng = float(len(g_pts))
        if nf == 0 or ng == 0:
            return 0.0
        value = pair_value(f_arr, g_pts)
        den = E_size * (nf / E_size) ** (1.0 / p) * (ng / E_size) ** (1.0 / q)
        return value / den

    rng = np.random.default_rng(seed)
    box_axes = [np.arange(side)] * n
    all_pts = np.stack(np.meshgrid(*box_axes, indexing="ij"), axis=-1).reshape(-1, n)

    def random_subset_arr(density):
        return (rng.random((side,) * n) < density).astype(np.float64)

    def arr_from_pts(pts):
        a = np.zeros((side,) * n)
        if len(pts):
            a[tuple(pts.T)] = 1.0
        return a

    family = {}
    # random pairs
    best_rand = 0.0
    for _ in range(trials):
        f_arr = random_subset_arr(rng.random() ** 2)
        g_mask = rng.random(len(all_pts)) < rng.random() ** 2
        g_pts = all_pts[g_mask]
        best_rand = max(best_rand, ratio(f_arr, g_pts))
    family["random"] = best_rand

    center = np.full(n, side // 2, dtype=np.int64)
    full_arr = np.ones((side,) * n)
    point_g = center[None, :]
    shell_pts = center[None, :] - shell.points
    inside = np.all((shell_pts >= 0) & (shell_pts < side), axis=1)
    shell_set = np.unique(shell_pts[inside], axis=0)
    slab = all_pts[all_pts[:, 0] < max(1, side // 2)]
    presets = {
        "full-full": (full_arr, all_pts),
        "point-point": (arr_from_pts(shell_set[:1]) if len(shell_set) else full_arr, point_g),
        "shell-point": (arr_from_pts(shell_set) if len(shell_set) else full_arr, point_g),
        "point-full": (arr_from_pts(center[None, :]), all_pts),
        "full-point": (full_arr, point_g),
        "slab-slab": (arr_from_pts(slab), slab),
        "slab-full": (arr_from_pts(slab), all_pts),
        "shell-full": (arr_from_pts(shell_set) if len(shell_set) else full_arr, all_pts),
    }
    for name, (f_arr, g_pts) in presets.items():
        family[name] = ratio(f_arr, g_pts)
    return ImprovingReport(lam, p, q, max(family.values()), family)


# -- operator norm scaling ------------------------------------------------------------------


@dataclass
class NormScanReport:
    lambdas: list
    lower_bounds: list
    slope: float
    reference_exponent: float


def norm_lower_bound(
    form: IntegralForm,
    phi: CutoffFunction,
    lam: int,
    p: float,
    q_dual: float,
    trials: int = 100,
    seed: int = 0,
    **kw,
) -> float:
    """Lower bound for ||M_lam||_{l^p -> l^{q'}} via <Mf, g>/(|f|_p |g|_q)
    over the adversarial family; q is the dual index of q'."""
    q = q_dual / (q_dual - 1.0) if q_dual != math.inf else 1.0
    n = form.dimension
    side = int(math.floor(lam ** (1.0 / form.degree) + 1e-9)) + 1
    shell = enumerate_shell(form, phi, lam, **kw)
    if shell.is_empty():
        return 0.0
    smin, smax = shell.bounding_box()
    kernel = np.zeros(tuple(smax - smin + 1))
    np.add.at(kernel, tuple((shell.points - smin).T), shell.weights / shell.r_value)
    rng = np.random.default_rng(seed)
    best = 0.0

    def value(f_arr, g_arr):
        conv = fftconvolve(f_arr, kernel)
        lo = smin
        # overlap of conv (origin smin) with g (origin 0)
        sl_conv = []
        sl_g = []
        for i in range(n):
            a = max(0, -int(lo[i]))
            b = min(conv.shape[i], side - int(lo[i]))
            if a >= b:
                return 0.0
            sl_conv.append(slice(a, b))
            sl_g.append(slice(a + int(lo[i]), b + int(lo[i])))
        return float(np.sum(conv[tuple(sl_conv)] * g_arr[tuple(sl_g)]))

    def norm_arr(a, r):
        if r == math.inf:
            return float(np.max(a))
        return float(np.sum(a**r) ** (1.0 / r))

    cases = []
    full = np.ones((side,) * n)
    point = np.zeros((side,) * n)
    point[(side // 2,) * n] = 1.0
    shellarr = np.zeros((side,) * n)
    center = np.full(n, side // 2, dtype=np.int64)
    spts = center[None, :] - shell.points
    inside = np.all((spts >= 0) & (spts < side), axis=1)
    if inside.any():
        shellarr[tuple(spts[inside].T)] = 1.0
    slab = np.zeros((side,) * n)
    slab[: max(1, side // 2)] = 1.0
    cases += [(full, full), (point, point), (shellarr, point), (point, full),
              (full, point), (slab, slab), (shellarr, full), (slab, full)]
    for _ in range(trials):
        fa = (rng.random((side,) * n) < rng.random() ** 2).astype(float)
        ga = (rng.random((side,) * n) < rng.random() ** 2).astype(float)
        cases.append((fa, ga))
    for fa, ga in cases:
        nf, ng = norm_arr(fa, p), norm_arr(ga, q)
        if nf == 0 or ng == 0:
            continue
        best = max(best, value(fa, ga) / (nf * ng))
    return best


def norm_scaling_scan(
    form: IntegralForm,
    phi: CutoffFunction,
    p: float,
    q_dual: float,
    lambdas,
    trials: int = 100,
    seed: int = 0,
    **kw,
) -> NormScanReport:
    from .util import lsq_slope

    bounds = [
        norm_lower_bound(form, phi, lam, p, q_dual, trials=trials, seed=seed + i, **kw)
        for i, lam in enumerate(lambdas)
    ]
    ref = form.dimension * (1.0 / q_dual - 1.0 / p)
    xs = np.log([float(x) for x in lambdas])
    ys = np.log(np.maximum(bounds, 1e-300))
    return NormScanReport(list(lambdas), bounds, lsq_slope(xs, ys), ref)


def power_iteration_l2(
    form: IntegralForm,
    phi: CutoffFunction,
    lam: int,
    T: int = 16,
    iters: int = 12,
    seed: int = 0,
    **kw,
):
    """Rayleigh-quotient lower bounds for ||M_lam||_{2->2} by power iteration
    of M^2 on the periodized torus of side T; the sequence is nondecreasing
    and each value samples the true multiplier."""
    import scipy.fft as sfft

    shell = enumerate_shell(form, phi, lam, **kw)
    n = form.dimension
    kernel = np.zeros((T,) * n)
    np.add.at(kernel, tuple(np.mod(shell.points, T).T), shell.weights / shell.r_value)
    khat = sfft.fftn(kernel)
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((T,) * n)
    vals = []
    for _ in range(iters):
        ghat = sfft.fftn(g)
        mg = sfft.ifftn(ghat * khat).real
        vals.append(float(np.linalg.norm(mg) / np.linalg.norm(g)))
        g = sfft.ifftn(sfft.fftn(mg) * np.conj(khat)).real
        norm = np.linalg.norm(g)
        if norm == 0:
            break
        g /= norm
    return vals

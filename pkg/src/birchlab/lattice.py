"""Weighted lattice shells {y : R(y) = lambda}, on-disk shell cache, and the
regular-value scanner.

Enumeration uses a pruned coordinate recursion for diagonal even-power forms
(each assigned prefix bounds the remainder) and a chunked full box scan for
everything else; correctness beats speed when monotonicity is unavailable.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .forms import CutoffFunction, IntegralForm, form_from_json
from .util import BudgetError, InvalidConfigError, check_budget, stable_hash

DEFAULT_BOX_BUDGET = 2.0e8


class EnumerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class LatticeShell:
    lam: int
    points: np.ndarray  # (m, n) int64, lexicographically sorted
    weights: np.ndarray  # (m,) float64 in (0, 1]
    r_value: float

    @property
    def size(self) -> int:
        return len(self.points)

    def is_empty(self) -> bool:
        return len(self.points) == 0

    def bounding_box(self):
        """(min, max) per coordinate; zeros for an empty shell."""
        if self.is_empty():
            n = self.points.shape[1] if self.points.ndim == 2 else 0
            z = np.zeros(n, dtype=np.int64)
            return z, z
        return self.points.min(axis=0), self.points.max(axis=0)

    def validate(self, form: IntegralForm) -> None:
        if self.size:
            vals = form(self.points.astype(object))
            if not np.all(vals == self.lam):
                raise AssertionError("shell contains a point off the level set")
        if np.any(self.weights <= 0) or np.any(self.weights > 1):
            raise AssertionError("weights outside (0, 1]")
        if abs(math.fsum(self.weights) - self.r_value) > 1e-12 * max(1.0, self.r_value):
            raise AssertionError("r_value out of sync with weights")


def _axis_bounds(form: IntegralForm, phi: CutoffFunction, lam: int):
    scale = lam ** (1.0 / form.degree)
    r = phi.support_radius()
    if r is not None:
        b = int(math.floor(r * scale + 1e-9))
        return [b] * form.dimension
    if form.all_monomials_nonnegative() and form.is_diagonal():
        coeffs = form.diagonal_coefficients()
        if all(c > 0 for c in coeffs):
            return [
                int(math.floor((lam / c) ** (1.0 / form.degree) + 1e-9))
                for c in coeffs
            ]
    raise EnumerationError(
        "constant-one cutoff needs a positive-definite diagonal form to bound the box"
    )


def _diagonal_even_enumerate(coeffs, d, lam, bounds):
    """Points of sum_i c_i y_i^d = lam, c_i > 0, d even, via recursion with
    exact integer arithmetic and an integer-root test on the last axis."""
    n = len(coeffs)
    out = []
    point = [0] * n

    def root_candidates(residual, c, bound):
        if residual < 0 or residual % c:
            return []
        target = residual // c
        if target == 0:
            return [0]
        r = round(target ** (1.0 / d))
        for cand in (r - 1, r, r + 1):
            if cand >= 0 and cand**d == target and cand <= bound:
                return [cand, -cand] if cand > 0 else [0]
        return []

    def rec(i, residual):
        if i == n - 1:
            for y in root_candidates(residual, coeffs[i], bounds[i]):
                point[i] = y
                out.append(tuple(point))
            return
        c = coeffs[i]
        b = min(bounds[i], int(math.floor((residual / c) ** (1.0 / d) + 1e-9)))
        for a in range(0, b + 1):
            rest = residual - c * a**d
            if rest < 0:
                break
            for y in (a, -a) if a else (0,):
                point[i] = y
                rec(i + 1, rest)

    rec(0, lam)
    return out


def _box_scan(form, lam, bounds, x1_values=None):
    """Chunked scan of the full integer box; exact integer evaluation."""
    n = form.dimension
    axes = [np.arange(-b, b + 1, dtype=np.int64) for b in bounds]
    if x1_values is not None:
        axes[0] = np.asarray(x1_values, dtype=np.int64)
    tail = axes[1:]
    tail_shape = tuple(len(a) for a in tail)
    tail_count = int(np.prod(tail_shape)) if tail else 1
    out = []
    chunk = max(1, int(2e6 // max(tail_count, 1)))
    for start in range(0, len(axes[0]), chunk):
        head = axes[0][start : start + chunk]
        grids = np.meshgrid(head, *tail, indexing="ij")
        pts = np.stack([g.reshape(-1) for g in grids], axis=-1)
        vals = form(pts)
        hit = pts[vals == lam]
        out.extend(map(tuple, hit))
    return out


def _enumerate_worker(args):
    form_json, lam, bounds, x1_values = args
    form = form_from_json(form_json)
    return _box_scan(form, lam, bounds, x1_values)


def enumerate_shell(
    form: IntegralForm,
    phi: CutoffFunction,
    lam: int,
    box_budget: float = DEFAULT_BOX_BUDGET,
    workers: int = 1,
) -> LatticeShell:
    """All y with R(y) = lam and phi(y / lam^(1/d)) > 0, with weights."""
    if lam < 1:
        raise InvalidConfigError("lambda >= 1 required")
    bounds = _axis_bounds(form, phi, lam)
    volume = 1.0
    for b in bounds:
        volume *= 2 * b + 1
    diagonal_fast = form.is_diagonal() and form.all_monomials_nonnegative() and all(
        c > 0 for c in form.diagonal_coefficients()
    )
    if not diagonal_fast:
        check_budget("box scan", volume, box_budget)

    if diagonal_fast:
        pts = _diagonal_even_enumerate(
            form.diagonal_coefficients(), form.degree, lam, bounds
        )
    elif workers > 1:
        x1 = np.arange(-bounds[0], bounds[0] + 1, dtype=np.int64)
        slices = np.array_split(x1, workers)
        form_json = dict(form.canonical_descriptor())
        jobs = [(form_json, lam, bounds, s.tolist()) for s in slices if len(s)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_enumerate_worker, jobs))
        pts = [p for part in parts for p in part]
    else:
        pts = _box_scan(form, lam, bounds)

    pts = sorted(pts)
    points = np.array(pts, dtype=np.int64).reshape(len(pts), form.dimension)
    scale = lam ** (1.0 / form.degree)
    weights = phi(points / scale) if len(pts) else np.zeros(0)
    keep = weights > 0
    points = points[keep]
    weights = weights[keep]
    r_value = math.fsum(weights)
    return LatticeShell(lam, points, weights, r_value)


# -- disk cache ----------------------------------------------------------------

MAGIC = "birchlab-shell-v1"


def cache_key(form: IntegralForm, phi: CutoffFunction) -> str:
    return stable_hash(
        {"form": form.canonical_descriptor(), "phi": phi.descriptor()}
    )


class ShellCache:
    """cache/<form-phi-hash>/<lambda>.shell, little-endian binary records."""

    def __init__(self, root: str):
        self.root = root

    def path(self, form, phi, lam) -> str:
        return os.path.join(self.root, cache_key(form, phi), f"{lam}.shell")

    def store(self, form, phi, shell: LatticeShell) -> str:
        path = self.path(form, phi, shell.lam)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        header = {
            "magic": MAGIC,
            "lambda": shell.lam,
            "count": shell.size,
            "dimension": int(form.dimension),
            "r_value": shell.r_value,
            "form": {**form.canonical_descriptor(), "birch_rank": form.birch_rank},
            "phi": phi.descriptor(),
        }
        with open(path, "wb") as fh:
            fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
            fh.write(shell.points.astype("<i8").tobytes())
            fh.write(shell.weights.astype("<f8").tobytes())
        return path

    @staticmethod
    def load_file(path):
        """(header dict, shell) from a shell file."""
        with open(path, "rb") as fh:
            header = json.loads(fh.readline().decode())
            if header.get("magic") != MAGIC:
                raise IOError(f"bad shell file {path}")
            count, dim = header["count"], header["dimension"]
            points = np.frombuffer(fh.read(count * dim * 8), dtype="<i8")
            points = points.reshape(count, dim).astype(np.int64)
            weights = np.frombuffer(fh.read(count * 8), dtype="<f8").astype(np.float64)
        return header, LatticeShell(header["lambda"], points, weights, header["r_value"])

    def load(self, form, phi, lam) -> LatticeShell | None:
        path = self.path(form, phi, lam)
        if not os.path.exists(path):
            return None
        return self.load_file(path)[1]

    def get(self, form, phi, lam, **kw) -> LatticeShell:
        shell = self.load(form, phi, lam)
        if shell is None:
            shell = enumerate_shell(form, phi, lam, **kw)
            self.store(form, phi, shell)
        return shell

    def entries(self):
        if not os.path.isdir(self.root):
            return []
        out = []
        for h in sorted(os.listdir(self.root)):
            sub = os.path.join(self.root, h)
            if not os.path.isdir(sub):
                continue
            for f in sorted(os.listdir(sub)):
                if f.endswith(".shell"):
                    out.append((h, int(f[:-6]), os.path.join(sub, f)))
        return out

    def purge(self) -> int:
        removed = 0
        for _, _, path in self.entries():
            os.remove(path)
            removed += 1
        if os.path.isdir(self.root):
            for h in os.listdir(self.root):
                sub = os.path.join(self.root, h)
                if os.path.isdir(sub) and not os.listdir(sub):
                    os.rmdir(sub)
        return removed


# -- regular-value scan ----------------------------------------------------------


@dataclass
class RegularValueReport:
    lambdas: list
    ratios: list
    flagged: list
    progressions: list  # (start, step, members)


def scan_regular_values(
    form: IntegralForm,
    phi: CutoffFunction,
    lam_range,
    band=(0.1, 100.0),
    modulus_bound: int = 16,
    box_budget: float = DEFAULT_BOX_BUDGET,
    cache: ShellCache | None = None,
) -> RegularValueReport:
    """Ratios r(lam)/lam^(n/d-1) over the range; lambdas whose ratio falls in
    the band are flagged, and full arithmetic progressions of flagged values
    (>= 3 members, scanning moduli up to the bound) are reported."""
    c_lo, c_hi = band
    if c_lo <= 0:
        raise InvalidConfigError("band lower end must be positive")
    lambdas = list(lam_range)
    exponent = form.dimension / form.degree - 1
    ratios = []
    for lam in lambdas:
        shell = (
            cache.get(form, phi, lam, box_budget=box_budget)
            if cache
            else enumerate_shell(form, phi, lam, box_budget=box_budget)
        )
        ratios.append(shell.r_value / lam**exponent)
    flagged = [lam for lam, rho in zip(lambdas, ratios) if c_lo <= rho <= c_hi]
    flagged_set = set(flagged)
    scanned = set(lambdas)
    lo, hi = min(lambdas), max(lambdas)
    progressions = []
    for step in range(1, modulus_bound + 1):
        for residue in range(step):
            members = [
                x for x in range(lo, hi + 1) if x % step == residue and x in scanned
            ]
            run = []
            for x in members:
                if x in flagged_set:
                    run.append(x)
                else:
                    if len(run) >= 3:
                        progressions.append((run[0], step, len(run)))
                    run = []
            if len(run) >= 3:
                progressions.append((run[0], step, len(run)))
    # drop progressions that are sub-runs of a reported coarser run with the
    # same step start parity; keep the raw list otherwise (report, not claim)
    progressions.sort(key=lambda t: (t[1], t[0]))
    return RegularValueReport(lambdas, ratios, flagged, progressions)

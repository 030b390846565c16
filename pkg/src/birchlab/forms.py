"""Integral forms, their cutoff functions, and derived decay constants.

A form here is a homogeneous polynomial with integer coefficients in n
variables.  The derived constants (exact rationals) drive every decay
exponent used elsewhere; regularity of a form is decided numerically by a
Newton search for a nonsingular real solution of R(x)=1 inside the cutoff.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.stats import qmc

from .util import InvalidConfigError, stable_hash

UNDECIDABLE = "undecidable"


@dataclass(frozen=True)
class IntegralForm:
    """Homogeneous integer polynomial, degree d > 1, in n variables.

    monomials: tuple of (exponent-vector, coefficient) pairs.
    birch_rank: rank of the form; rank_declared records whether it was
    supplied by the caller rather than derived (declared ranks are tagged
    unverified in reports).
    """

    monomials: tuple
    degree: int
    dimension: int
    birch_rank: int
    rank_declared: bool = False
    name: str = ""

    def __post_init__(self):
        if self.degree <= 1:
            raise InvalidConfigError("degree must be > 1")
        if self.dimension < 1:
            raise InvalidConfigError("dimension must be >= 1")
        if not self.monomials:
            raise InvalidConfigError("form needs at least one monomial")
        seen = set()
        for exps, coeff in self.monomials:
            if len(exps) != self.dimension:
                raise InvalidConfigError("exponent vector length != dimension")
            if any(k < 0 for k in exps):
                raise InvalidConfigError("negative exponent")
            if sum(exps) != self.degree:
                raise InvalidConfigError(
                    f"monomial {exps} has total degree {sum(exps)} != {self.degree}"
                )
            if int(coeff) != coeff:
                raise InvalidConfigError("coefficients must be integers")
            if exps in seen:
                raise InvalidConfigError(f"duplicate monomial {exps}")
            seen.add(exps)
        if all(c == 0 for _, c in self.monomials):
            raise InvalidConfigError("all coefficients are zero")
        if not (0 < self.birch_rank <= self.dimension):
            raise InvalidConfigError("rank must satisfy 0 < rank <= dimension")

    # -- evaluation ---------------------------------------------------------

    def __call__(self, x):
        """Evaluate R at a point or an array of points (last axis = coords).

        Integer input stays integer (object dtype arrays permitted), so
        equality tests against integers are exact.
        """
        x = np.asarray(x)
        total = None
        for exps, coeff in self.monomials:
            term = coeff * np.prod(
                [x[..., i] ** k for i, k in enumerate(exps) if k > 0], axis=0
            )
            total = term if total is None else total + term
        return total

    def gradient(self, x):
        x = np.asarray(x, dtype=np.float64)
        g = np.zeros_like(x)
        for exps, coeff in self.monomials:
            for j, kj in enumerate(exps):
                if kj == 0:
                    continue
                term = np.full(x.shape[:-1], float(coeff * kj))
                for i, k in enumerate(exps):
                    kk = k - 1 if i == j else k
                    if kk > 0:
                        term = term * x[..., i] ** kk
                g[..., j] += term
        return g

    # -- structure predicates ------------------------------------------------

    def is_diagonal(self) -> bool:
        """Every monomial is a pure power of a single variable."""
        return all(sum(1 for k in exps if k > 0) <= 1 for exps, _ in self.monomials)

    def diagonal_coefficients(self):
        """Coefficient per variable for a diagonal form (0 if absent)."""
        coeffs = [0] * self.dimension
        for exps, coeff in self.monomials:
            for i, k in enumerate(exps):
                if k > 0:
                    coeffs[i] = coeff
        return coeffs

    def all_monomials_nonnegative(self) -> bool:
        """Each monomial is >= 0 at every integer point: positive
        coefficient and all exponents even."""
        return all(
            c > 0 and all(k % 2 == 0 for k in exps) for exps, c in self.monomials
        )

    def canonical_descriptor(self) -> dict:
        return {
            "monomials": sorted([list(e), int(c)] for e, c in self.monomials),
            "degree": self.degree,
            "dimension": self.dimension,
        }

    def content_hash(self) -> str:
        return stable_hash(self.canonical_descriptor())

    def label(self) -> str:
        return self.name or f"form-{self.content_hash()[:8]}"


# -- construction ------------------------------------------------------------


def _quadratic_matrix(monomials, n):
    """Symmetric rational matrix A with x^T A x = R(x) for a quadratic."""
    A = [[Fraction(0)] * n for _ in range(n)]
    for exps, coeff in monomials:
        nz = [(i, k) for i, k in enumerate(exps) if k > 0]
        if len(nz) == 1:
            i, _ = nz[0]
            A[i][i] = Fraction(coeff)
        else:
            (i, _), (j, _) = nz
            A[i][j] = A[j][i] = Fraction(coeff, 2)
    return A


def _rational_rank(A) -> int:
    """Exact rank over Q by fraction-free Gaussian elimination."""
    A = [row[:] for row in A]
    rows, cols = len(A), len(A[0]) if A else 0
    rank = 0
    r = 0
    for c in range(cols):
        pivot = next((i for i in range(r, rows) if A[i][c] != 0), None)
        if pivot is None:
            continue
        A[r], A[pivot] = A[pivot], A[r]
        for i in range(rows):
            if i != r and A[i][c] != 0:
                f = A[i][c] / A[r][c]
                A[i] = [a - f * b for a, b in zip(A[i], A[r])]
        r += 1
        rank += 1
        if r == rows:
            break
    return rank


def derive_birch_rank(monomials, degree, dimension):
    """Rank for diagonal and quadratic forms; UNDECIDABLE otherwise.

    Diagonal with every variable present and nonzero coefficients: the
    singular locus is the origin, so the rank is the dimension.  Quadratic:
    rank of the defining matrix over Q.  Anything else needs elimination
    theory and must be declared by the caller.
    """
    diagonal = all(sum(1 for k in exps if k > 0) <= 1 for exps, _ in monomials)
    if diagonal:
        present = set()
        for exps, coeff in monomials:
            if coeff != 0:
                present.update(i for i, k in enumerate(exps) if k > 0)
        if len(present) == dimension:
            return dimension
    if degree == 2:
        return _rational_rank(_quadratic_matrix(monomials, dimension))
    return UNDECIDABLE


def make_form(monomials, degree, dimension, birch_rank=None, name="") -> IntegralForm:
    monomials = tuple(
        (tuple(int(k) for k in exps), int(coeff)) for exps, coeff in monomials
    )
    derived = derive_birch_rank(monomials, degree, dimension)
    if birch_rank is None:
        if derived == UNDECIDABLE:
            raise InvalidConfigError(
                "rank underivable for this form; declare birch_rank explicitly"
            )
        return IntegralForm(monomials, degree, dimension, derived, False, name)
    declared = derived == UNDECIDABLE or int(birch_rank) != derived
    return IntegralForm(monomials, degree, dimension, int(birch_rank), declared, name)


def sphere_form(n: int) -> IntegralForm:
    """Sum of squares in n variables."""
    mono = [(tuple(2 if j == i else 0 for j in range(n)), 1) for i in range(n)]
    return make_form(mono, 2, n, name=f"sphere-{n}")


def kpowers_form(n: int, d: int) -> IntegralForm:
    """Sum of d-th powers in n variables."""
    mono = [(tuple(d if j == i else 0 for j in range(n)), 1) for i in range(n)]
    return make_form(mono, d, n, name=f"kpowers-{n}-{d}")


def parse_preset(spec: str) -> IntegralForm:
    """Named presets: sphere-N, kpowers-N-D, cubes-N (= kpowers-N-3)."""
    parts = spec.split("-")
    try:
        if parts[0] == "sphere" and len(parts) == 2:
            return sphere_form(int(parts[1]))
        if parts[0] == "kpowers" and len(parts) == 3:
            return kpowers_form(int(parts[1]), int(parts[2]))
        if parts[0] == "cubes" and len(parts) == 2:
            return kpowers_form(int(parts[1]), 3)
    except ValueError:
        pass
    raise InvalidConfigError(f"unknown form preset {spec!r}")


def form_from_json(obj) -> IntegralForm:
    """Form description: {"monomials": [[[e...], c], ...], "degree": d,
    "dimension": n, "birch_rank": optional}."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    return make_form(
        [(m[0], m[1]) for m in obj["monomials"]],
        obj["degree"],
        obj["dimension"],
        obj.get("birch_rank"),
        obj.get("name", ""),
    )


def load_form(spec: str) -> IntegralForm:
    """Preset name or path to a JSON description file."""
    if spec.endswith(".json"):
        with open(spec) as fh:
            return form_from_json(json.load(fh))
    return parse_preset(spec)


# -- derived constants --------------------------------------------------------


@dataclass(frozen=True)
class FormConstants:
    """c = rank / ((d-1) 2^(d-1)) and eta = (c/2 - 1) / (6d), kept exact."""

    c_R: Fraction
    eta_R: Fraction
    d_eta: Fraction
    rank_declared: bool = False

    @property
    def phi_regular_rank(self) -> bool:
        """Rank side of regularity: c > 2, equivalently rank > (d-1) 2^d."""
        return self.c_R > 2

    def inequality_holds(self) -> bool:
        """d*eta < c - 2, exact in rationals (true exactly when c > 2)."""
        return self.d_eta < self.c_R - 2


def constants(form: IntegralForm) -> FormConstants:
    c = Fraction(form.birch_rank, (form.degree - 1) * 2 ** (form.degree - 1))
    eta = Fraction(1, 6 * form.degree) * (c / 2 - 1)
    return FormConstants(c, eta, form.degree * eta, form.rank_declared)


# -- cutoffs ------------------------------------------------------------------


@dataclass(frozen=True)
class CutoffFunction:
    """Cutoff phi with values in [0,1].

    kinds: smooth-bump(radius) = exp(1 - 1/(1-|x/r|^2)) inside |x| < r;
    box-indicator(half-width); constant-one (unbounded support).
    """

    kind: str
    param: float = 0.0

    SMOOTH = "smooth-bump"
    BOX = "box-indicator"
    ONE = "constant-one"

    def __post_init__(self):
        if self.kind not in (self.SMOOTH, self.BOX, self.ONE):
            raise InvalidConfigError(f"unknown cutoff kind {self.kind!r}")
        if self.kind != self.ONE and self.param <= 0:
            raise InvalidConfigError("cutoff needs a positive size parameter")

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == self.ONE:
            return np.ones(x.shape[:-1])
        if self.kind == self.BOX:
            return (np.max(np.abs(x), axis=-1) <= self.param).astype(np.float64)
        t2 = np.sum((x / self.param) ** 2, axis=-1)
        out = np.zeros(x.shape[:-1])
        inside = t2 < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - t2[inside]))
        return out

    def radial(self, r):
        """Value at |x| = r (all kinds here are radial or treated per-axis
        for the box, where this is the value at distance r along an axis)."""
        r = np.asarray(r, dtype=np.float64)
        if self.kind == self.ONE:
            return np.ones_like(r)
        if self.kind == self.BOX:
            return (r <= self.param).astype(np.float64)
        t2 = (r / self.param) ** 2
        out = np.zeros_like(t2)
        inside = t2 < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - t2[inside]))
        return out

    def support_radius(self):
        """Per-axis bound: phi(x) = 0 whenever any |x_i| exceeds this.
        None for the unbounded constant cutoff."""
        if self.kind == self.ONE:
            return None
        return self.param

    def descriptor(self) -> dict:
        return {"kind": self.kind, "param": self.param}


def cutoff_from_descriptor(d: dict) -> CutoffFunction:
    return CutoffFunction(d["kind"], d.get("param", 0.0))


def cutoff_from_spec(spec: str) -> CutoffFunction:
    """'bump:2.0', 'box:1.5', or 'one'."""
    if spec == "one":
        return CutoffFunction(CutoffFunction.ONE)
    try:
        kind, param = spec.split(":")
        if kind == "bump":
            return CutoffFunction(CutoffFunction.SMOOTH, float(param))
        if kind == "box":
            return CutoffFunction(CutoffFunction.BOX, float(param))
    except ValueError:
        pass
    raise InvalidConfigError(f"unknown cutoff spec {spec!r}")


DEFAULT_CUTOFF = CutoffFunction(CutoffFunction.SMOOTH, 2.0)


# -- regularity probe ----------------------------------------------------------

REGULAR = "regular"
RANK_TOO_SMALL = "rank-too-small"
NO_SOLUTION_FOUND = "no-nonsingular-solution-found"


def probe_phi_regularity(
    form: IntegralForm,
    phi: CutoffFunction,
    samples: int = 64,
    seed: int = 0,
    newton_steps: int = 60,
) -> str:
    """Search supp(phi) for a nonsingular real solution of R(x) = 1.

    Returns RANK_TOO_SMALL when the rank fails rank > (d-1) 2^d; otherwise
    runs damped Newton from quasi-random starts.  A miss is a probe failure,
    not a disproof.
    """
    if samples < 1:
        raise InvalidConfigError("samples >= 1 required")
    threshold = (form.degree - 1) * 2**form.degree
    if form.birch_rank <= threshold:
        return RANK_TOO_SMALL
    radius = phi.support_radius() or 2.0
    n = form.dimension
    starts = qmc.Halton(d=n, scramble=True, seed=seed).random(samples)
    starts = (2.0 * starts - 1.0) * radius
    for x0 in starts:
        x = np.array(x0, dtype=np.float64)
        for _ in range(newton_steps):
            r = float(form(x)) - 1.0
            if abs(r) < 1e-12:
                break
            g = form.gradient(x)
            g2 = float(np.dot(g, g))
            if g2 < 1e-14:
                break
            step = -r / g2 * g
            # damping: halve until the residual actually shrinks
            scale = 1.0
            for _ in range(30):
                xn = x + scale * step
                if abs(float(form(xn)) - 1.0) < abs(r):
                    break
                scale *= 0.5
            x = x + scale * step
        if abs(float(form(x)) - 1.0) < 1e-10:
            g = form.gradient(x)
            if float(np.dot(g, g)) > 1e-12 and phi(x) > 0:
                return REGULAR
    return NO_SOLUTION_FOUND

"""Exponential-sum engine: normalized complete Weyl sums F_q(a,b), their
finite inversion identity, congruence counts over Z_L^n, and the
divisor-class splitting of residues a/L into reduced fractions.

Sums are normalized by q^n, so |F_q(a,b)| <= 1 always and F_q(0,0) = 1.
Diagonal forms factor across axes, which reduces every per-a slice to q
one-dimensional DFTs of length q; general forms take an n-dimensional DFT
per a (budgeted).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .forms import IntegralForm
from .util import BudgetError, InvalidConfigError, check_budget, lsq_slope

DEFAULT_SUM_BUDGET = 1.0e8


def units(q: int):
    """U_q, with the convention U_1 = {0}."""
    return [a for a in range(q) if math.gcd(a, q) == 1]


def _phase(num, q):
    """e(num/q) for integer num arrays, reduced mod q first."""
    return np.exp((2j * math.pi / q) * np.mod(num, q))


def _diag_axis_matrix(d, q):
    """G[c, t] = (1/q) sum_m e((c m^d + t m)/q), all c,t in Z_q at once."""
    m = np.arange(q, dtype=np.int64)
    md = np.mod(m**d, q)
    base = _phase(np.mod(np.outer(np.arange(q, dtype=np.int64), md), q), q)
    return np.fft.ifft(base, axis=1)  # (1/q) sum_m x e(+2*pi*i m t / q)


class WeylTable:
    """F_q(a, b) for all a in Z_q, b in Z_q^n.

    Diagonal forms store per-axis factor matrices; general forms store the
    dense per-a slices produced by an n-dimensional inverse DFT.
    """

    def __init__(self, form: IntegralForm, q: int, budget: float = DEFAULT_SUM_BUDGET):
        if q < 1:
            raise InvalidConfigError("q >= 1 required")
        self.form = form
        self.q = q
        self.n = form.dimension
        if form.is_diagonal():
            self.method = "dft-factored"
            self._G = _diag_axis_matrix(form.degree, q)
            self._coeffs = [c % q for c in form.diagonal_coefficients()]
            self._slices = None
        else:
            self.method = "dft"
            check_budget("weyl table", float(q) ** self.n * q, budget)
            grid = _grid_values(form, q)
            self._slices = {a: np.fft.ifftn(_phase(a * grid, q)) for a in range(q)}
            self._G = None

    def value(self, a: int, b) -> complex:
        a %= self.q
        b = [int(x) % self.q for x in b]
        if self._G is not None:
            out = 1.0 + 0j
            for c, bi in zip(self._coeffs, b):
                out *= self._G[(a * c) % self.q, bi]
            return out
        return complex(self._slices[a][tuple(b)])

    def slice(self, a: int, budget: float = DEFAULT_SUM_BUDGET) -> np.ndarray:
        """Dense array of F_q(a, b) over b in Z_q^n."""
        a %= self.q
        if self._slices is not None:
            return self._slices[a]
        check_budget("weyl slice", float(self.q) ** self.n, budget)
        rows = [self._G[(a * c) % self.q] for c in self._coeffs]
        return reduce(np.multiply.outer, rows)

    def max_abs(self, a: int) -> float:
        a %= self.q
        if self._G is not None:
            out = 1.0
            for c in self._coeffs:
                out *= float(np.max(np.abs(self._G[(a * c) % self.q])))
            return out
        return float(np.max(np.abs(self._slices[a])))


def _grid_values(form: IntegralForm, q: int):
    """R(m) mod q on the full grid Z_q^n (dense, int64)."""
    axes = np.meshgrid(*([np.arange(q, dtype=np.int64)] * form.dimension), indexing="ij")
    pts = np.stack([g.reshape(-1) for g in axes], axis=-1)
    vals = np.zeros(len(pts), dtype=np.int64)
    for exps, coeff in form.monomials:
        term = np.full(len(pts), coeff % q, dtype=np.int64)
        for i, k in enumerate(exps):
            for _ in range(k):
                term = np.mod(term * pts[:, i], q)
        vals = np.mod(vals + term, q)
    return vals.reshape((q,) * form.dimension)


def weyl_sum(
    form: IntegralForm,
    q: int,
    a: int,
    b,
    method: str = "auto",
    budget: float = DEFAULT_SUM_BUDGET,
) -> complex:
    """F_q(a,b) = q^(-n) sum_{m in Z_q^n} e((a R(m) + m.b)/q)."""
    if q < 1:
        raise InvalidConfigError("q >= 1 required")
    a %= q
    b = [int(x) % q for x in b]
    if len(b) != form.dimension:
        raise InvalidConfigError("b has wrong dimension")
    n = form.dimension
    if method == "auto":
        if form.is_diagonal():
            method = "direct"  # per-axis direct sums, cost n*q
        elif float(q) ** n <= budget:
            method = "direct"
        else:
            method = "dft"
    if method == "direct":
        if form.is_diagonal():
            d = form.degree
            m = np.arange(q, dtype=np.int64)
            md = np.mod(m**d, q)
            out = 1.0 + 0j
            for coeff, bi in zip(form.diagonal_coefficients(), b):
                out *= np.mean(_phase(a * coeff * md + bi * m, q))
            return complex(out)
        if float(q) ** n > budget:
            raise BudgetError("weyl direct sum", float(q) ** n, budget)
        grid = _grid_values(form, q)
        axes = np.meshgrid(*([np.arange(q, dtype=np.int64)] * n), indexing="ij")
        lin = sum(bi * ax for bi, ax in zip(b, axes))
        return complex(np.mean(_phase(a * grid + lin, q)))
    if method == "dft":
        return WeylTable(form, q, budget=budget).value(a, b)
    raise InvalidConfigError(f"unknown method {method!r}")


@dataclass
class WeylDecayReport:
    maxima: dict  # q -> M(q)
    prime_qs: list
    slope: float
    flagged: list  # q where M(q) * q^cR exceeds the constant
    constant: float


def _is_prime(q: int) -> bool:
    if q < 2:
        return False
    for p in range(2, int(q**0.5) + 1):
        if q % p == 0:
            return False
    return True


def weyl_decay_scan(
    form: IntegralForm,
    q_max: int,
    c_R: float,
    flag_constant: float = 8.0,
    budget: float = DEFAULT_SUM_BUDGET,
) -> WeylDecayReport:
    """M(q) = max over coprime a and all b of |F_q(a,b)|, for 2 <= q <= q_max,
    plus the least-squares slope of log M vs log q over primes."""
    if q_max < 2:
        raise InvalidConfigError("q_max >= 2 required")
    maxima = {}
    for q in range(2, q_max + 1):
        table = WeylTable(form, q, budget=budget)
        maxima[q] = max(table.max_abs(a) for a in units(q))
    primes = [q for q in maxima if _is_prime(q)]
    fit_qs = [q for q in primes if maxima[q] > 0]
    slope = (
        lsq_slope(np.log([float(q) for q in fit_qs]), np.log([maxima[q] for q in fit_qs]))
        if len(fit_qs) >= 2
        else float("nan")
    )
    flagged = [q for q, m in maxima.items() if m * q**c_R > flag_constant]
    return WeylDecayReport(maxima, primes, slope, flagged, flag_constant)


def weyl_inversion_check(
    form: IntegralForm, L: int, x, budget: float = DEFAULT_SUM_BUDGET
):
    """lhs = sum_{a in Z_L} sum_{b in Z_L^n} F_L(a,b) e(x.b/L) against
    rhs = L * [R(x) == 0 mod L].  The identity is exact and finite."""
    if L < 1:
        raise InvalidConfigError("L >= 1 required")
    n = form.dimension
    check_budget("weyl inversion", float(L) ** (n + 1), budget)
    x = [int(v) for v in x]
    table = WeylTable(form, L, budget=budget)
    axes = np.meshgrid(*([np.arange(L, dtype=np.int64)] * n), indexing="ij")
    char = _phase(sum(xi * ax for xi, ax in zip(x, axes)), L)
    lhs = 0.0 + 0j
    for a in range(L):
        lhs += np.sum(table.slice(a) * char)
    rx = int(form(np.array(x, dtype=object)))
    rhs = float(L) if rx % L == 0 else 0.0
    return complex(lhs), rhs


def congruence_count(
    form: IntegralForm, L: int, budget: float = DEFAULT_SUM_BUDGET
) -> float:
    """L^(1-n) * #{x in Z_L^n : R(x) = 0 mod L}."""
    if L < 1:
        raise InvalidConfigError("L >= 1 required")
    n = form.dimension
    check_budget("congruence count", float(L) ** n, budget)
    if L == 1:
        return 1.0
    count = 0
    axis = np.arange(L, dtype=np.int64)
    tail_shape = (L,) * (n - 1)
    tail_count = L ** (n - 1)
    chunk = max(1, int(4e6 // max(tail_count, 1)))
    tails = np.meshgrid(*([axis] * (n - 1)), indexing="ij") if n > 1 else []
    tail_pts = (
        np.stack([g.reshape(-1) for g in tails], axis=-1)
        if n > 1
        else np.zeros((1, 0), dtype=np.int64)
    )
    for start in range(0, L, chunk):
        head = axis[start : start + chunk]
        pts = np.concatenate(
            [
                np.repeat(head, len(tail_pts))[:, None],
                np.tile(tail_pts, (len(head), 1)),
            ],
            axis=1,
        )
        vals = np.zeros(len(pts), dtype=np.int64)
        for exps, coeff in form.monomials:
            term = np.full(len(pts), coeff % L, dtype=np.int64)
            for i, k in enumerate(exps):
                for _ in range(k):
                    term = np.mod(term * pts[:, i], L)
            vals = np.mod(vals + term, L)
        count += int(np.count_nonzero(vals == 0))
    return count / float(L) ** (n - 1)


# -- divisor splitting ----------------------------------------------------------


@dataclass
class DivisorSplit:
    """Partition of Z_L by the reduced denominator q = L / gcd(a, L)."""

    L: int
    N: int
    reduced: list  # (a, nu, a_reduced, q_reduced)
    small: dict  # q <= N  ->  list of a
    large: dict  # q > N   ->  list of a

    def class_sizes(self):
        return {q: len(v) for q, v in {**self.small, **self.large}.items()}


def divisor_split(L: int, N: int) -> DivisorSplit:
    if not (1 <= N <= L):
        raise InvalidConfigError("need 1 <= N <= L")
    reduced = []
    small: dict = {}
    large: dict = {}
    for a in range(L):
        nu = math.gcd(a, L)  # gcd(0, L) = L
        q = L // nu
        reduced.append((a, nu, a // nu, q))
        (small if q <= N else large).setdefault(q, []).append(a)
    return DivisorSplit(L, N, reduced, small, large)


def tuple_gcd(a: int, b, L: int) -> int:
    """gcd of (a, every component of b, L); the class index used when
    splitting sums over pairs (a, b) in Z_L x Z_L^n."""
    g = math.gcd(a % L, L)
    for x in b:
        g = math.gcd(g, int(x) % L)
    return g


def crt_matched_pair(a: int, q1: int, q2: int, degree: int):
    """(a1, a2) with F_{q1 q2}(a, 0) = F_{q1}(a1, 0) F_{q2}(a2, 0) for a
    form of the given degree and coprime q1, q2."""
    if math.gcd(q1, q2) != 1:
        raise InvalidConfigError("moduli must be coprime")
    a1 = (a * pow(q2, degree - 1, q1)) % q1
    a2 = (a * pow(q1, degree - 1, q2)) % q2
    return a1, a2

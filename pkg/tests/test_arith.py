import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from birchlab.arith import (
    WeylTable,
    congruence_count,
    crt_matched_pair,
    divisor_split,
    tuple_gcd,
    units,
    weyl_decay_scan,
    weyl_inversion_check,
    weyl_sum,
)
from birchlab.forms import make_form, sphere_form
from birchlab.util import BudgetError


def x_squared():
    return make_form([((2,), 1)], 2, 1)


def mixed_quadratic():
    return make_form([((2, 0), 1), ((1, 1), 1), ((0, 2), 1)], 2, 2)


def test_trivial_modulus(sphere5):
    assert weyl_sum(sphere5, 1, 0, [0] * 5) == 1.0


def test_zero_frequency_is_delta(sphere3):
    for b in ([0, 0, 0], [1, 0, 0], [2, 1, 4]):
        v = weyl_sum(sphere3, 5, 0, b)
        expected = 1.0 if all(x % 5 == 0 for x in b) else 0.0
        assert abs(v - expected) < 1e-12


def test_gauss_sum_value():
    v = weyl_sum(x_squared(), 3, 1, [0])
    assert abs(v - 1j / math.sqrt(3)) < 1e-12
    assert abs(abs(v) - 3 ** (-0.5)) < 1e-12


def test_even_modulus_cancellation(sphere5):
    assert abs(weyl_sum(sphere5, 2, 1, [0] * 5)) < 1e-12


def test_magnitude_bound(sphere3, rng):
    for _ in range(25):
        q = int(rng.integers(1, 9))
        a = int(rng.integers(0, q))
        b = rng.integers(0, q, size=3).tolist()
        assert abs(weyl_sum(sphere3, q, a, b)) <= 1.0 + 1e-12


@pytest.mark.parametrize("q", [2, 3, 4, 5, 6, 7, 8])
def test_table_matches_direct(q):
    form = mixed_quadratic()
    table = WeylTable(form, q)
    for a in range(q):
        sl = table.slice(a)
        for b in itertools.product(range(q), repeat=2):
            direct = weyl_sum(form, q, a, list(b), method="direct")
            assert abs(sl[b] - direct) < 1e-10


def test_diagonal_factorization_matches_direct(sphere3):
    q = 6
    table = WeylTable(sphere3, q)
    rng = np.random.default_rng(1)
    for _ in range(30):
        a = int(rng.integers(0, q))
        b = rng.integers(0, q, size=3).tolist()
        direct = complex(
            np.mean(
                np.exp(
                    2j
                    * np.pi
                    / q
                    * np.array(
                        [
                            (a * sum(v * v for v in m) + sum(x * y for x, y in zip(m, b))) % q
                            for m in itertools.product(range(q), repeat=3)
                        ]
                    )
                )
            )
        )
        assert abs(table.value(a, b) - direct) < 1e-10


def test_multiplicativity_probe(sphere5):
    q1, q2 = 3, 5
    for a in (1, 2, 4, 7, 8, 11, 13, 14):
        a1, a2 = crt_matched_pair(a, q1, q2, 2)
        lhs = abs(weyl_sum(sphere5, q1 * q2, a, [0] * 5))
        rhs = abs(weyl_sum(sphere5, q1, a1, [0] * 5)) * abs(
            weyl_sum(sphere5, q2, a2, [0] * 5)
        )
        assert abs(lhs - rhs) < 1e-12


@pytest.mark.parametrize("L", [1, 2, 3, 4, 6])
def test_inversion_identity_sphere2(sphere2, L):
    for x in itertools.product(range(L), repeat=2):
        lhs, rhs = weyl_inversion_check(sphere2, L, x)
        assert abs(lhs - rhs) < 1e-8


def test_inversion_identity_1d():
    form = x_squared()
    lhs, rhs = weyl_inversion_check(form, 2, [1])
    assert abs(lhs) < 1e-12 and rhs == 0.0
    lhs, rhs = weyl_inversion_check(form, 2, [0])
    assert abs(lhs - 2.0) < 1e-12 and rhs == 2.0
    lhs, rhs = weyl_inversion_check(form, 1, [5])
    assert abs(lhs - 1.0) < 1e-12 and rhs == 1.0


def test_congruence_counts(sphere4, sphere5):
    assert congruence_count(sphere4, 2) == 1.0
    assert congruence_count(sphere5, 1) == 1.0
    vals = [congruence_count(sphere5, L) for L in (2, 3, 4, 6)]
    assert max(vals) <= 4.0


def test_congruence_budget(sphere5):
    with pytest.raises(BudgetError):
        congruence_count(sphere5, 64, budget=1e6)


def test_divisor_split_l6():
    ds = divisor_split(6, 2)
    assert sorted(ds.small.keys()) == [1, 2]
    assert ds.small[1] == [0] and ds.small[2] == [3]
    assert sorted(ds.large.keys()) == [3, 6]


def test_divisor_split_l24():
    ds = divisor_split(24, 3)
    sizes = ds.class_sizes()
    assert sizes[1] == 1 and sizes[2] == 1 and sizes[3] == 2
    assert sum(v for q, v in sizes.items() if q > 3) == 20


@given(L=st.integers(min_value=1, max_value=60))
@settings(max_examples=40, deadline=None)
def test_divisor_split_partitions(L):
    N = max(1, L // 3)
    ds = divisor_split(L, N)
    seen = sorted(a for c in (ds.small, ds.large) for v in c.values() for a in v)
    assert seen == list(range(L))
    for a, nu, a_red, q_red in ds.reduced:
        assert nu * q_red == L
        assert math.gcd(a_red, q_red) == 1 or (a == 0 and q_red == 1)


def test_factorial_modulus_divisibility():
    L = math.factorial(5)
    for q in range(1, 6):
        assert L % q == 0


def test_tuple_gcd():
    assert tuple_gcd(0, (0, 0), 6) == 6
    assert tuple_gcd(2, (4, 0), 8) == 2
    assert tuple_gcd(3, (1, 2), 9) == 1


def test_decay_scan_gauss_exponents(sphere5):
    rep = weyl_decay_scan(sphere5, 13, c_R=2.5)
    for q in (3, 5, 7, 11, 13):
        assert abs(rep.maxima[q] * q**2.5 - 1.0) < 1e-8
    assert rep.maxima[2] == pytest.approx(1.0)  # the modulus-2 degeneracy
    assert all(m <= 1.0 + 1e-12 for m in rep.maxima.values())


def test_units_convention():
    assert units(1) == [0]
    assert units(6) == [1, 5]

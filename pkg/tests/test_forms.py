import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from birchlab.forms import (
    CutoffFunction,
    DEFAULT_CUTOFF,
    NO_SOLUTION_FOUND,
    RANK_TOO_SMALL,
    REGULAR,
    UNDECIDABLE,
    constants,
    cutoff_from_spec,
    derive_birch_rank,
    form_from_json,
    make_form,
    parse_preset,
    probe_phi_regularity,
    sphere_form,
)
from birchlab.util import InvalidConfigError


def test_rank_diagonal_sphere():
    assert sphere_form(5).birch_rank == 5
    assert not sphere_form(5).rank_declared


def test_rank_quadratic_matrix():
    # single square in three variables: rank of the quadratic matrix
    form = make_form([((2, 0, 0), 1)], 2, 3)
    assert form.birch_rank == 1


def test_rank_undecidable():
    mono = (((3, 0, 0), 1), ((1, 1, 1), 1))
    assert derive_birch_rank(mono, 3, 3) == UNDECIDABLE
    with pytest.raises(InvalidConfigError):
        make_form(mono, 3, 3)
    form = make_form(mono, 3, 3, birch_rank=2)
    assert form.rank_declared


def test_construction_rejects_inhomogeneous():
    with pytest.raises(InvalidConfigError):
        make_form([((2, 0), 1), ((1, 0), 1)], 2, 2)
    with pytest.raises(InvalidConfigError):
        make_form([((2, 0), 0), ((0, 2), 0)], 2, 2)


def test_constants_sphere5(sphere5):
    c = constants(sphere5)
    assert c.c_R == Fraction(5, 2)
    assert c.eta_R == Fraction(1, 48)
    assert c.d_eta == Fraction(1, 24)
    assert c.phi_regular_rank and c.inequality_holds()


def test_constants_n9():
    c = constants(sphere_form(9))
    assert c.c_R == Fraction(9, 2)
    assert c.eta_R == Fraction(5, 48)


def test_constants_boundary_not_regular():
    c = constants(sphere_form(4))  # d=2, rank 4 -> c exactly 2
    assert c.c_R == 2
    assert not c.phi_regular_rank
    assert not c.inequality_holds()


@pytest.mark.parametrize(
    "n,expected",
    [(5, REGULAR), (4, RANK_TOO_SMALL)],
)
def test_probe_regularity_rank_gate(n, expected):
    assert probe_phi_regularity(sphere_form(n), DEFAULT_CUTOFF, 32) == expected


def test_probe_small_support_misses():
    phi = CutoffFunction(CutoffFunction.SMOOTH, 0.5)
    assert probe_phi_regularity(sphere_form(5), phi, 32) == NO_SOLUTION_FOUND


@given(
    t=st.integers(min_value=-5, max_value=5),
    x=st.lists(st.integers(min_value=-6, max_value=6), min_size=3, max_size=3),
)
@settings(max_examples=60, deadline=None)
def test_homogeneity_exact(t, x):
    form = make_form([((2, 1, 0), 3), ((0, 2, 1), -2), ((1, 1, 1), 1)], 3, 3, birch_rank=3)
    lhs = form(np.array([t * v for v in x], dtype=object))
    rhs = t**3 * form(np.array(x, dtype=object))
    assert lhs == rhs


def test_gradient_matches_finite_differences(rng):
    form = make_form([((2, 1, 0), 3), ((0, 2, 1), -2), ((1, 1, 1), 1)], 3, 3, birch_rank=3)
    for _ in range(20):
        x = rng.uniform(-2, 2, size=3)
        g = form.gradient(x)
        h = 1e-6
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            fd = (form(x + e) - form(x - e)) / (2 * h)
            denom = max(1.0, abs(g[i]))
            assert abs(g[i] - fd) / denom < 1e-6


def test_cutoff_ranges():
    bump = CutoffFunction(CutoffFunction.SMOOTH, 2.0)
    pts = np.random.default_rng(0).uniform(-3, 3, size=(200, 4))
    vals = bump(pts)
    assert np.all((vals >= 0) & (vals <= 1))
    assert bump(np.zeros(4)) == 1.0
    assert bump(np.array([2.0, 0, 0, 0])) == 0.0
    box = CutoffFunction(CutoffFunction.BOX, 1.5)
    assert box(np.array([1.5, -1.5])) == 1.0
    assert box(np.array([1.6, 0.0])) == 0.0


def test_cutoff_specs():
    assert cutoff_from_spec("one").kind == CutoffFunction.ONE
    assert cutoff_from_spec("bump:2.0").param == 2.0
    with pytest.raises(InvalidConfigError):
        cutoff_from_spec("wat:1")


def test_form_json_roundtrip(sphere5):
    doc = {
        "monomials": [[list(e), c] for e, c in sphere5.monomials],
        "degree": 2,
        "dimension": 5,
    }
    again = form_from_json(json.dumps(doc))
    assert again.canonical_descriptor() == sphere5.canonical_descriptor()
    assert again.content_hash() == sphere5.content_hash()


def test_presets():
    assert parse_preset("cubes-2").degree == 3
    assert parse_preset("kpowers-3-4").degree == 4
    with pytest.raises(InvalidConfigError):
        parse_preset("dodecahedron-7")

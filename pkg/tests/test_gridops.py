import math

import numpy as np
import pytest

from birchlab.dyadic import DyadicCube
from birchlab.forms import sphere_form
from birchlab.gridops import (
    EXPLICIT,
    FACTORIAL,
    GridFunction,
    InadmissibleStoppingTime,
    NotRepresentedError,
    StoppingTime,
    apply_average,
    make_sequence,
    maximal,
    maximal_with_stopping_time,
    verify_represented,
)
from birchlab.util import InvalidConfigError


def test_delta_average(sphere5, one):
    g = apply_average(sphere5, one, 1, GridFunction.delta(5))
    nz = g.values[np.abs(g.values) > 0]
    assert len(nz) == 10
    assert np.allclose(nz, 0.1)


def test_constant_region_gives_one(sphere4, one):
    f = GridFunction.ones_box([-6] * 4, [7] * 4)
    g = apply_average(sphere4, one, 2, f)
    assert abs(g.value_at((0, 0, 0, 0)) - 1.0) < 1e-12


def test_box_average_oracle(sphere4, one):
    # direct summation oracle for f = 1_{[0,4]^4}, lambda = 2, x = (2,2,2,2)
    from birchlab.lattice import enumerate_shell

    f = GridFunction.ones_box([0] * 4, [5] * 4)
    g = apply_average(sphere4, one, 2, f)
    shell = enumerate_shell(sphere4, one, 2)
    x = np.array([2, 2, 2, 2])
    oracle = sum(
        w for y, w in zip(shell.points, shell.weights) if np.all(np.abs(x - y - 2) <= 2)
    ) / shell.r_value
    assert abs(g.value_at(x) - oracle) < 1e-12
    assert abs(oracle - 1.0) < 1e-12  # all 24 shifts stay inside the box


def test_not_represented(sphere2, one):
    with pytest.raises(NotRepresentedError):
        apply_average(sphere2, one, 3, GridFunction.delta(2))


def test_direct_fft_agreement(rng, sphere4, one):
    vals = rng.standard_normal((5, 5, 5, 5)) + 1j * rng.standard_normal((5, 5, 5, 5))
    f = GridFunction(np.array([-2] * 4), vals)
    for lam in (2, 5, 9, 30):
        a = apply_average(sphere4, one, lam, f, mode="direct")
        b = apply_average(sphere4, one, lam, f, mode="fft")
        assert np.max(np.abs(a.values - b.values)) < 1e-9


def test_norm_contraction_and_positivity(rng, sphere4, one):
    for _ in range(10):
        vals = rng.standard_normal((4, 4, 4, 4)) + 1j * rng.standard_normal((4,) * 4)
        f = GridFunction(np.zeros(4, dtype=np.int64), vals)
        g = apply_average(sphere4, one, 4, f)
        assert g.norm(math.inf) <= f.norm(math.inf)
        assert g.norm(1) <= f.norm(1)
    fpos = GridFunction(np.zeros(4, dtype=np.int64), np.abs(rng.standard_normal((4,) * 4)))
    gpos = apply_average(sphere4, one, 4, fpos)
    assert np.all(gpos.values.real >= -1e-15)


def test_translation_equivariance(rng, sphere3, one):
    vals = rng.standard_normal((4, 4, 4))
    f = GridFunction(np.zeros(3, dtype=np.int64), vals)
    z = np.array([3, -2, 5])
    a = apply_average(sphere3, one, 5, f.translated(z))
    b = apply_average(sphere3, one, 5, f)
    assert np.array_equal(a.origin, b.origin + z)
    assert np.array_equal(a.values, b.values)


def test_factorial_sequence():
    seq = make_sequence(FACTORIAL, "pow2", 4)
    assert seq.values == (2, 24, 40320, 20922789888000)
    assert seq.prefix_consistent
    with pytest.raises(InvalidConfigError):
        make_sequence(FACTORIAL, [3, 3, 4], 3)


def test_lacunary_sequence():
    seq = make_sequence("lacunary", (2, 1), 5)
    assert seq.values == (1, 2, 4, 8, 16)
    with pytest.raises(InvalidConfigError):
        make_sequence("lacunary", (1.0, 1), 3)


def test_explicit_sequence_representable(sphere5, bump):
    seq = make_sequence(EXPLICIT, [5, 13, 25], 3)
    assert verify_represented(seq, sphere5, bump) == []


def test_maximal_single_is_average(sphere4, one):
    f = GridFunction.delta(4)
    seq = make_sequence(EXPLICIT, [2], 1)
    m, arg = maximal(sphere4, one, seq, f)
    a = apply_average(sphere4, one, 2, f)
    assert np.allclose(m.values, np.abs(a.values))
    assert np.all(arg == 0)


def test_maximal_monotone_in_sequence(rng, sphere4, one):
    vals = np.abs(rng.standard_normal((4, 4, 4, 4)))
    f = GridFunction(np.zeros(4, dtype=np.int64), vals)
    small, _ = maximal(sphere4, one, make_sequence(EXPLICIT, [2, 4], 2), f)
    large, _ = maximal(sphere4, one, make_sequence(EXPLICIT, [2, 4, 8], 3), f)
    lo = np.minimum(small.origin, large.origin)
    hi = np.maximum(small.origin + small.extents, large.origin + large.extents)
    assert np.all(small.restrict_box(lo, hi) <= large.restrict_box(lo, hi) + 1e-15)


def test_maximal_delta_matches_kernels(sphere4, one):
    from birchlab.lattice import enumerate_shell

    f = GridFunction.delta(4)
    seq = make_sequence(EXPLICIT, [1, 2], 2)
    m, _ = maximal(sphere4, one, seq, f)
    k1 = enumerate_shell(sphere4, one, 1)
    k2 = enumerate_shell(sphere4, one, 2)
    for y in k1.points:
        expect = max(1.0 / k1.size, (1.0 / k2.size) if tuple(y) in {tuple(p) for p in k2.points} else 0)
        assert abs(m.value_at(y) - expect) < 1e-12
    for y in k2.points:
        assert m.value_at(y) >= 1.0 / k2.size - 1e-12


def test_stopping_time_constant_equals_average(sphere4, one):
    root = DyadicCube(3, (0,) * 4)
    f = GridFunction.from_points([(1, 1, 1, 1), (5, 2, 7, 0)], 4, box=([-8] * 4, [16] * 4))
    tau = StoppingTime(root, np.full((8,) * 4, 2), C=1e9)
    got = maximal_with_stopping_time(sphere4, one, tau, f)
    want = apply_average(sphere4, one, 2, f)
    lo = np.zeros(4, dtype=np.int64)
    hi = np.full(4, 8, dtype=np.int64)
    assert np.max(np.abs(got.values - want.restrict_box(lo, hi))) < 1e-14


def test_stopping_time_inadmissible_rejected(sphere4, one):
    root = DyadicCube(3, (0,) * 4)
    f = GridFunction.from_points([(5, 5, 5, 5)], 4, box=([-8] * 4, [16] * 4))
    tau = StoppingTime(root, np.full((8,) * 4, 2), C=4.0)
    with pytest.raises(InadmissibleStoppingTime) as ex:
        maximal_with_stopping_time(sphere4, one, tau, f)
    assert ex.value.cube.side in (2, 4)


def test_stopping_time_below_maximal(sphere4, one):
    root = DyadicCube(3, (0,) * 4)
    f = GridFunction.from_points([(1, 1, 1, 1), (5, 2, 7, 0)], 4, box=([-8] * 4, [16] * 4))
    seq = make_sequence(EXPLICIT, [1, 2, 4], 3)
    rng = np.random.default_rng(3)
    tau_vals = rng.choice(seq.values, size=(8,) * 4)
    tau = StoppingTime(root, tau_vals, C=1e9)
    got = maximal_with_stopping_time(sphere4, one, tau, f)
    sup, _ = maximal(sphere4, one, seq, f)
    lo = np.zeros(4, dtype=np.int64)
    hi = np.full(4, 8, dtype=np.int64)
    assert np.all(np.abs(got.values) <= sup.restrict_box(lo, hi) + 1e-12)


def test_grid_io_roundtrip(tmp_path, rng):
    vals = rng.standard_normal((3, 4, 5)) + 1j * rng.standard_normal((3, 4, 5))
    f = GridFunction(np.array([-1, 2, 0]), vals)
    path = tmp_path / "f.grid"
    f.save(path)
    g = GridFunction.load(path)
    assert np.array_equal(f.origin, g.origin)
    assert f.values.tobytes() == g.values.tobytes()


def test_cube_average_p_values():
    f = GridFunction(np.zeros(2, dtype=np.int64), np.array([[1.0, 0.0], [0.0, 0.0]]))
    box = (np.array([0, 0]), np.array([2, 2]))
    assert f.cube_average(box, 1) == 0.25
    assert f.cube_average(box, 2) == 0.5
    assert f.cube_average(box, math.inf) == 1.0

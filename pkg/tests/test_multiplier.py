import itertools
import math

import numpy as np
import pytest

from birchlab.arith import divisor_split, units, weyl_sum
from birchlab.bumps import low_cutoff, wide_cutoff
from birchlab.forms import DEFAULT_CUTOFF, sphere_form
from birchlab.lattice import enumerate_shell
from birchlab.multiplier import (
    LPieceEvaluator,
    MainTermEvaluator,
    TorusGrid,
    exact_multiplier,
    exact_multiplier_at,
    factorization_check,
    kernel_of_s,
    kernel_of_s_bruteforce,
    lowpass_surface_convolution,
    main_term,
    piece,
    plancherel_check,
    reconstruction_report,
)
from birchlab.surface import SurfaceMeasure
from birchlab.util import e


def test_exact_multiplier_normalized(sphere3, bump):
    mg = exact_multiplier(sphere3, bump, 5, 9)
    assert abs(mg.value_at_zero() - 1.0) < 1e-12


def test_exact_multiplier_conjugate_symmetry(sphere3, bump):
    mg = exact_multiplier(sphere3, bump, 5, 9)
    nd = mg.nd()
    flipped = nd[::-1, ::-1, ::-1]
    assert np.max(np.abs(nd - np.conj(flipped))) < 1e-12


def test_exact_multiplier_fft_vs_direct(sphere3, bump):
    mg = exact_multiplier(sphere3, bump, 5, 9)
    grid = mg.grid
    idxs = [0, 100, 400, grid.zero_flat_index]
    xi = grid.xi_block(0, grid.total)[idxs]
    direct = exact_multiplier_at(sphere3, bump, 5, xi)
    assert np.max(np.abs(mg.samples[idxs] - direct)) < 1e-12


def test_exact_multiplier_halfpoint_oracle(sphere4, one):
    # 24-point shell of lambda=2: at xi=(1/2,0,0,0) the transform is 0
    val = exact_multiplier_at(sphere4, one, 2, np.array([[0.5, 0, 0, 0]]))[0]
    shell = enumerate_shell(sphere4, one, 2)
    oracle = np.mean([(-1.0) ** y[0] for y in shell.points])
    assert abs(val - oracle) < 1e-14
    assert abs(val) < 1e-14


def c_lambda_oracle(form, phi, lam, xi_pt, zeta, dsig):
    """Slow periodized literal sum over all q, all integer b in a window."""
    n = form.dimension
    lamd = lam ** (1.0 / form.degree)
    total = 0j
    for q in range(1, int(lamd + 1e-9) + 1):
        for b in itertools.product(range(-2 * q, 2 * q + 1), repeat=n):
            dist = np.linalg.norm(xi_pt - np.array(b) / q)
            if dist >= 1.0 / q:
                continue
            zv = float(zeta.hat(np.array(q * dist)))
            if zv == 0:
                continue
            coeff = sum(
                e(-a * lam / q) * weyl_sum(form, q, a, [x % q for x in b], method="direct")
                for a in units(q)
            )
            total += coeff * zv * float(dsig.transform_radial(np.array([lamd * dist]))[0])
    return total


def test_main_term_against_literal_sum(sphere3, bump):
    lam = 9
    ev = MainTermEvaluator(sphere3, bump, lam, N=2)
    dsig = SurfaceMeasure(sphere3, bump)
    zeta = low_cutoff()
    shell = enumerate_shell(sphere3, bump, lam)
    scale = lam**0.5 / shell.r_value
    pts = np.array(
        [
            [0.0, 0.0, 0.0],
            [0.11, -0.23, 0.05],
            [1 / 3, 1 / 3, 0.0],
            [-0.45, 0.17, 0.29],
            [0.5 - 1 / 9, 0.25, -0.4],
        ]
    )
    got = ev.evaluate(pts)["c"]
    for i, p in enumerate(pts):
        want = c_lambda_oracle(sphere3, bump, lam, p, zeta, dsig) * scale
        assert abs(got[i] - want) < 1e-6


def test_partition_identity_on_grid(sphere3, bump):
    lam, N, G = 9, 2, 9
    ev = MainTermEvaluator(sphere3, bump, lam, N)
    grid = TorusGrid(3, G)
    xi = grid.xi_block(0, grid.total)
    vals = ev.evaluate(xi)
    err = np.max(np.abs(vals["c"] - (vals["m12"] + vals["m22"] + vals["m23"])))
    assert err < 1e-10


def test_reconstruction_identity(sphere3, bump):
    rep = reconstruction_report(sphere3, bump, 9, 2, 9)
    assert rep["partition_error"] < 1e-10
    assert rep["reconstruction_error"] < 1e-10


def test_piece_m21_plus_c_is_what(sphere3, bump):
    lam, N, G = 9, 2, 9
    shell = enumerate_shell(sphere3, bump, lam)
    what = exact_multiplier(sphere3, bump, lam, G, shell=shell)
    c = main_term(sphere3, bump, lam, G, N=N, shell=shell)
    m21 = piece("m21", sphere3, bump, lam, G, N, shell=shell)
    err = np.max(np.abs(what.samples - c.samples - m21.samples))
    assert err < 1e-8


def test_q1_term_is_surface_mass(sphere5, bump):
    # lambda = 1 keeps only q = 1, where the coefficient is exactly 1
    c = main_term(sphere5, bump, 1, 5, N=1, normalized=False)
    dsig = SurfaceMeasure(sphere5, bump)
    assert abs(c.value_at_zero() - dsig.mass()) < 1e-6


def test_m22_vanishes_at_zero(sphere3, bump):
    for N in (2, 3):
        ev = MainTermEvaluator(sphere3, bump, 9, N)
        vals = ev.evaluate(np.zeros((1, 3)))
        assert abs(vals["m22"][0]) == 0.0


def test_m23_triangle_inequality_bound(sphere3, bump):
    lam, N, G = 9, 1, 9
    shell = enumerate_shell(sphere3, bump, lam)
    m23 = piece("m23", sphere3, bump, lam, G, N, shell=shell)
    from birchlab.arith import WeylTable

    dsig = SurfaceMeasure(sphere3, bump)
    scale = lam ** (3 / 2 - 1) / shell.r_value
    tail = 0.0
    for q in range(N + 1, int(math.isqrt(lam)) + 1):
        table = WeylTable(sphere3, q)
        tail += len(units(q)) * max(table.max_abs(a) for a in units(q))
    bound = scale * (2**3) * tail * dsig.mass()
    assert m23.sup_norm() <= bound + 1e-12


def test_factorization_omega_vs(sphere2, bump):
    worst, frac = factorization_check(sphere2, bump, lam=4, N=2, G=41)
    assert frac > 0.1
    assert worst < 1e-10


def test_s_plateau_value(sphere2, bump):
    ev = LPieceEvaluator(sphere2, bump, lam=4, N=2)
    for b in ((1, 0), (0, 1), (1, 1)):
        xi = np.array([[b[0] / 2, b[1] / 2]])
        got = ev.evaluate(xi, labels=("s",))["s"][0]
        want = sum(weyl_sum(sphere2, 2, a, list(b), method="direct") for a in range(2))
        assert abs(got - want) < 1e-10


def test_m221_vanishes_at_zero(sphere2, bump):
    ev = LPieceEvaluator(sphere2, bump, lam=4, N=2)
    vals = ev.evaluate(np.zeros((1, 2)), labels=("m221",))
    assert abs(vals["m221"][0]) < 1e-14


def test_m222_at_zero_matches_divisor_tail(sphere2, bump):
    N, L, lam = 2, 2, 4
    ev = LPieceEvaluator(sphere2, bump, lam, N, L=L, normalized=False)
    got = ev.evaluate(np.zeros((1, 2)), labels=("m222",))["m222"][0]
    ds = divisor_split(L, N)
    tail_a = [a for q, alist in ds.large.items() for a in alist]
    want = sum(
        weyl_sum(sphere2, L, a, [0, 0], method="direct") for a in tail_a
    ) * SurfaceMeasure(sphere2, bump).mass()
    assert abs(got - want) < 1e-9


@pytest.mark.parametrize("L", [2, 6])
def test_kernel_of_s_oracle(sphere2, L):
    half = 8 * L
    pts, vals, l1 = kernel_of_s(sphere2, N=2, box=([-half, -half], [half, half]), L=L)
    bf = kernel_of_s_bruteforce(sphere2, L, pts)
    assert np.max(np.abs(vals - bf)) < 1e-8
    assert abs(l1 - float(np.sum(np.abs(bf)))) < 1e-8


def test_kernel_of_s_structure(sphere2):
    L = 2
    pts, vals, _ = kernel_of_s(sphere2, N=2, box=([-4, -4], [4, 4]), L=L)
    zero = low_cutoff()
    for p, v in zip(pts, vals):
        if int(sphere2(np.array(p, dtype=object))) % L:
            assert v == 0.0
    at0 = vals[np.all(pts == 0, axis=1)][0]
    expect = L * float(zero.spatial(np.array([0.0]), 2)[0]) / (2 * L) ** 2
    assert abs(at0 - expect) < 1e-12


def test_kernel_l1_bounded_across_L(sphere2):
    masses = []
    for N, L in ((2, 2), (3, 6)):
        half = 8 * L
        _, _, l1 = kernel_of_s(sphere2, N=N, box=([-half, -half], [half, half]), L=L)
        masses.append(l1)
    assert max(masses) < 8.0  # single empirical constant across tested L


def test_plancherel(sphere3, bump):
    spatial, fourier = plancherel_check(sphere3, bump, 5, 12, seed=1)
    assert abs(spatial - fourier) < 1e-8 * max(1.0, spatial)


def test_lowpass_kernel_decay(sphere3, bump):
    dsig = SurfaceMeasure(sphere3, bump)
    zeta = low_cutoff()
    radii = np.array([0.0, 0.5, 1.0, 1.5, 2.5, 4.0])
    pts = np.zeros((len(radii), 3))
    pts[:, 0] = radii
    for t in (0.5, 0.25):
        vals = lowpass_surface_convolution(dsig, zeta, t, pts)
        # fitted constants for both displayed shapes of the bound
        k_spec = np.max(np.abs(vals) * t * (1.0 + radii / t) ** 6)
        k_plain = np.max(np.abs(vals) * t * (1.0 + radii) ** 6)
        assert np.isfinite(k_spec) and k_spec > 0
        assert np.isfinite(k_plain) and k_plain > 0
        # once fitted, the bounds hold on the sampled set by construction
        assert np.all(np.abs(vals) <= k_plain / t / (1.0 + radii) ** 6 + 1e-12)

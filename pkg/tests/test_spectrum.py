import math

import numpy as np
import pytest
from scipy.optimize import brentq

from cuspwinding.coding import Hyp, Par, TruncatedAlphabet, branch_map
from cuspwinding.moebius import compose, fixed_boundary_points, log_boundary_derivative, rotation
from cuspwinding.pressure import PotentialParams, gibbs_stats, pressure
from cuspwinding.spectrum import (
    SolverError,
    SpectrumFailure,
    SpectrumPoint,
    brute_force_oracle,
    distortion_exponent,
    hausdorff_dim,
    periodic_orbit_stats,
    solve_spectrum_point,
    spectrum_grid,
)

L = 50


@pytest.fixture(scope="module")
def dim(one_cusp):
    return hausdorff_dim(one_cusp, L)


@pytest.fixture(scope="module")
def grid(one_cusp):
    return spectrum_grid(one_cusp, [(a,) for a in np.arange(0.5, 8.01, 0.5)], L)


# Bowen root

def test_dim_in_range(dim, one_cusp):
    assert 0.5 < dim.s < 1
    assert dim.bracket[0] <= dim.s <= dim.bracket[1]
    A = TruncatedAlphabet(one_cusp, L)
    assert abs(pressure(A, PotentialParams((0.0,), dim.s), tail=True).value) < 1e-10


def test_dim_weight_variants_bracket(dim, one_cusp):
    lo = hausdorff_dim(one_cusp, L, variant="inf").s
    hi = hausdorff_dim(one_cusp, L, variant="sup").s
    assert lo <= dim.s <= hi


def test_dim_rotation_invariant(dim, one_cusp):
    phi = float(np.random.default_rng(11).uniform(0, 2 * math.pi))
    turned = one_cusp.conjugated(rotation(phi))
    assert abs(hausdorff_dim(turned, L).s - dim.s) < 1e-9


def test_dim_two_cusp_larger(dim, two_cusp):
    # more generators, larger limit set
    assert 0.5 < dim.s < hausdorff_dim(two_cusp, 30).s < 1


def test_dim_plain_truncation_has_no_root(one_cusp):
    # without the blocks beyond L the root falls below 1/2
    with pytest.raises(SolverError, match="no sign change"):
        hausdorff_dim(one_cusp, 100, tail=False)


# spectrum points

def test_spectrum_point(dim, one_cusp):
    pt = solve_spectrum_point(one_cusp, [2.0], L, s=dim.s)
    assert abs(pt.residual_p) < 1e-8 and np.max(np.abs(pt.residual_grad)) < 1e-8
    assert pt.a_integrals[0] == pytest.approx(2.0, abs=1e-6)
    assert pt.q[0] > 0
    assert pt.b <= dim.s + 1e-6
    assert pt.b * pt.lyapunov == pytest.approx(pt.entropy, abs=max(1e-8, pt.distortion_bound))


def test_spectrum_point_default_start(one_cusp):
    pt = solve_spectrum_point(one_cusp, 1.0, 20)
    assert pt.a_integrals[0] == pytest.approx(1.0, abs=1e-6)


def test_spectrum_point_rejects_bad_alpha(one_cusp):
    with pytest.raises(ValueError):
        solve_spectrum_point(one_cusp, [0.0], 20, s=0.52)
    with pytest.raises(ValueError):
        solve_spectrum_point(one_cusp, [1.0, 1.0], 20, s=0.52)


def test_grid_monotone(grid, dim):
    assert all(isinstance(pt, SpectrumPoint) for pt in grid)
    b = np.array([pt.b for pt in grid])
    assert np.all(np.diff(b) > 0)
    assert np.all(b <= dim.s + 1e-6)
    assert all(pt.q[0] > 0 for pt in grid)


def test_grid_smooth(grid):
    b = np.array([pt.b for pt in grid])
    d2 = np.abs(np.diff(b, 2))
    for k in range(1, len(d2) - 1):
        assert d2[k] <= 10 * max(d2[k - 1], d2[k + 1])


def test_grid_variational_identity(grid):
    for pt in grid:
        assert pt.b * pt.lyapunov == pytest.approx(pt.entropy, abs=max(1e-8, pt.distortion_bound))
        assert pt.a_integrals[0] == pytest.approx(pt.alpha[0], abs=1e-8)


def test_grid_failures_in_place(one_cusp):
    out = spectrum_grid(one_cusp, [(1.0,), (-1.0,), (2.0,)], 20)
    assert isinstance(out[0], SpectrumPoint) and isinstance(out[2], SpectrumPoint)
    assert isinstance(out[1], SpectrumFailure)
    assert out[1].alpha[0] == -1.0


def test_grid_workers_match_sequential(one_cusp):
    alphas = [(1.0,), (2.0,), (3.0,)]
    seq = spectrum_grid(one_cusp, alphas, 20)
    par = spectrum_grid(one_cusp, alphas, 20, workers=2)
    for a, b in zip(seq, par):
        assert a.alpha[0] == b.alpha[0]
        assert a.b == pytest.approx(b.b, abs=1e-9)


def test_two_cusp_label_symmetry(two_cusp):
    # the half turn swaps the two cusps and maps h to its inverse
    p12 = solve_spectrum_point(two_cusp, [1.0, 2.0], 20)
    p21 = solve_spectrum_point(two_cusp, [2.0, 1.0], 20)
    assert p12.b == pytest.approx(p21.b, abs=1e-9)
    assert p12.q == pytest.approx(p21.q[::-1], abs=1e-7)


def test_gibbs_lower_bound(one_cusp, dim):
    A = TruncatedAlphabet(one_cusp, L)
    for q in (0.2, 0.5, 1.0):
        b = brentq(lambda x: pressure(A, PotentialParams((q,), x), tail=True).value, 0.05, 0.99, xtol=1e-13)
        st = gibbs_stats(A, PotentialParams((q,), b), tail=True)
        target = solve_spectrum_point(one_cusp, st.a_integrals, L, s=dim.s)
        assert st.entropy / st.lyapunov <= target.b + 2e-10


# oracle

@pytest.fixture(scope="module")
def oracle(one_cusp):
    qg = np.round(np.arange(0.05, 3.0001, 0.05), 10)
    bg = np.round(np.arange(0.05, 0.9501, 0.05), 10)
    return brute_force_oracle(one_cusp, [2.0], qg, bg, 30)


def test_oracle_brackets_newton(oracle, one_cusp):
    pt = solve_spectrum_point(one_cusp, [2.0], 30)
    assert oracle.b_low <= pt.b <= oracle.b_high
    assert abs(oracle.q_star[0] - pt.q[0]) <= 0.05
    assert oracle.b_high - oracle.b_low == pytest.approx(0.05)


def test_oracle_sign_and_monotone(oracle):
    assert oracle.min_low >= 0 > oracle.min_high
    vals = [oracle.evaluated[b] for b in sorted(oracle.evaluated)]
    assert all(x >= y for x, y in zip(vals, vals[1:]))


def test_oracle_no_sign_change(one_cusp):
    with pytest.raises(SolverError):
        brute_force_oracle(one_cusp, [2.0], [0.5, 1.0], [0.6, 0.7, 0.8], 20)


# distortion exponent

@pytest.mark.parametrize("name", ["one_cusp", "two_cusp"])
def test_distortion_slope(name):
    from cuspwinding.schottky import preset

    p = preset(name)
    for i in range(p.m):
        for sign in (1, -1):
            fit = distortion_exponent(p, i, (20, 200), sign=sign)
            assert fit.slope == pytest.approx(2.0, abs=0.05)
            assert math.isfinite(fit.intercept)


def test_distortion_mirror_symmetry(one_cusp):
    # complex conjugation maps gamma to its inverse and h1 to its inverse
    a = distortion_exponent(one_cusp, 0, (20, 200), sign=1, terminal=(0, 1))
    b = distortion_exponent(one_cusp, 0, (20, 200), sign=-1, terminal=(0, -1))
    assert abs(a.slope - b.slope) < 1e-3
    assert a.intercept == pytest.approx(b.intercept, abs=1e-6)


def test_distortion_same_terminal_converges(one_cusp):
    # with a common terminal the two signs differ by O(1/l) terms only
    near = [distortion_exponent(one_cusp, 0, (20, 200), sign=s).slope for s in (1, -1)]
    far = [distortion_exponent(one_cusp, 0, (100, 1000), sign=s).slope for s in (1, -1)]
    assert abs(far[0] - far[1]) < abs(near[0] - near[1])
    assert abs(far[0] - far[1]) < 2e-3


def test_distortion_range_checked(one_cusp):
    with pytest.raises(ValueError):
        distortion_exponent(one_cusp, 0, (5, 200))
    with pytest.raises(ValueError):
        distortion_exponent(one_cusp, 0, (20, 2000))


# periodic orbits

@pytest.mark.parametrize("l", [1, 2, 5, 10])
def test_periodic_winding_average(one_cusp, l):
    cycle = [Par(0, 1, l, (0, 1)), Hyp((0, 1))]
    a_avg, lyap = periodic_orbit_stats(one_cusp, cycle)
    assert a_avg[0] == pytest.approx((l - 1) / 2)
    assert lyap > 0
    # oracle: the repelling fixed point of the composed branch
    g = compose(branch_map(one_cusp, cycle[1]), branch_map(one_cusp, cycle[0]))
    pts = fixed_boundary_points(g)
    rates = [log_boundary_derivative(g, x) for x in pts]
    assert 2 * lyap == pytest.approx(max(rates), rel=1e-8)


def test_periodic_hyperbolic_cycle(two_hyp):
    a_avg, lyap = periodic_orbit_stats(two_hyp, [Hyp((0, 1)), Hyp((1, 1))])
    assert a_avg.tolist() == [0.0]
    assert lyap > 0


def test_periodic_bad_wrap(one_cusp):
    with pytest.raises(ValueError):
        periodic_orbit_stats(one_cusp, [Hyp((0, 1)), Hyp((0, -1))])
    with pytest.raises(ValueError):
        periodic_orbit_stats(one_cusp, [])


def test_periodic_orbit_below_spectrum(one_cusp, grid):
    # zero entropy orbit measures: 0 / lyapunov <= b(a_avg)
    alphas = np.array([pt.alpha[0] for pt in grid])
    bs = np.array([pt.b for pt in grid])
    for l in (2, 3, 5, 9):
        a_avg, lyap = periodic_orbit_stats(one_cusp, [Par(0, 1, l, (0, 1)), Hyp((0, 1))])
        assert 0.0 / lyap <= np.interp(a_avg[0], alphas, bs)

"""Transform grids, pointwise certified sums, small-t first-order ratios."""

import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rrl import steplaw as sl
from rrl.charfn import build_grid, derive, phihat_at, small_t_checks, transform_at


@pytest.fixture(scope="module")
def law14():
    return sl.build_power_law(1.4, 0.95, "atoms:(-1:0.05)")


@pytest.fixture(scope="module")
def law15():
    return sl.build_power_law(1.5, 0.95, "atoms:(-1:0.05)")


@pytest.fixture(scope="module")
def law_hh():
    return sl.build_finite_law({1: 0.5, 2: 0.5})


# -- pointwise transform -----------------------------------------------------


def test_transform_finite_exact(law_hh):
    # pointwise summation uses the plain e^{int} orientation (the conjugate
    # convention lives only in the FFT grids)
    for t in (0.3, 1.0, 2.5):
        val, bound = transform_at(law_hh, t)
        truth = 0.5 * cmath.exp(1j * t) + 0.5 * cmath.exp(2j * t)
        assert abs(val - truth) <= bound + 1e-14
        assert bound < 1e-12


def test_transform_power_bruteforce_oracle(law14):
    # explicit partial sum plus a modulus-1 bound on the unsummed tail
    N = 2_000_000
    n = np.arange(-1, N + 1)
    p = np.asarray(law14.pmf(n))
    for t in (0.7, 0.05):
        truth = np.sum(p * np.exp(1j * t * n))
        slack = law14.right_tail(N)
        val, bound = transform_at(law14, t)
        assert abs(val - truth) <= bound + slack


def test_transform_modulus_bound(law14, law15, law_hh):
    for law in (law14, law15, law_hh):
        for t in (0.2, 1.3, 3.0):
            val, bound = transform_at(law, t)
            assert abs(val) <= 1.0 + bound


def test_phihat_at_matches_ratio_form(law15):
    t = 0.01
    p, pb = transform_at(law15, t)
    expected = (1.0 - p) / (sl.moments(law15).mu * (1.0 - cmath.exp(1j * t)))
    val, bound = phihat_at(law15, t)
    assert abs(val - expected) <= bound + 1e-9 * abs(expected) + pb


# -- grids -------------------------------------------------------------------


@pytest.fixture(scope="module")
def grid15(law15):
    return derive(build_grid(law15, 1 << 12), k_max=2)


def test_grid_matches_pointwise(law15, grid15):
    # the rfft grid stores the conjugate orientation of the pointwise sum
    M = grid15.M
    for j in (1, 7, 101, M // 2):
        t = 2.0 * math.pi * j / M
        val, bound = transform_at(law15, t)
        assert abs(grid15.phat[j] - val.conjugate()) <= bound + grid15.trunc_bound


def test_grid_aperiodicity_margin(grid15):
    assert grid15.aperiodicity_margin() > 0.0
    assert np.all(np.abs(grid15.phat[1:]) < 1.0)


def test_deltahat_zero_frequency(grid15):
    assert grid15.deltahat[0] == pytest.approx(-1.0 / grid15.mu, rel=1e-14)


def test_deltahat_ratio_form(grid15):
    # deltahat = (e^{-it} - 1)/(1 - phat) away from zero, recomputed directly
    j = np.arange(1, grid15.M // 2 + 1)
    t = 2.0 * np.pi * j / grid15.M
    expected = (np.exp(-1j * t) - 1.0) / (1.0 - grid15.phat[1:])
    assert np.max(np.abs(grid15.deltahat[1:] - expected)) < 1e-12


def test_phihat_zero_is_one(grid15):
    assert grid15.phihat[0] == 1.0


def test_psik_zero_flags(law14, law15):
    # k beta <= 1: psi_k(0) unusable; k beta > 1: finite limit imposed
    g15 = derive(build_grid(law15, 1 << 10), k_max=3)
    # beta = 0.5: k=1,2 give k beta <= 1 (divergent/marginal), k=3 finite
    assert g15.psik0_finite == (False, False, True)
    g14 = derive(build_grid(law14, 1 << 10), k_max=3)
    # beta = 0.4: k beta = 0.4, 0.8, 1.2
    assert g14.psik0_finite == (False, False, True)


def test_build_grid_validates_m(law14):
    with pytest.raises(ValueError):
        build_grid(law14, 256)                     # not >= 1024
    with pytest.raises(ValueError):
        build_grid(law14, 3000)                    # not a power of two


def test_build_grid_posts_certified_bound(law14):
    grid = build_grid(law14, 1 << 12)
    assert 0.0 < grid.trunc_bound < 1e-12
    assert abs(grid.phat[0] - 1.0) <= grid.trunc_bound + 1e-12


def test_derive_flags_periodic_law():
    law2 = sl.build_finite_law({2: 0.6, 4: 0.4})   # supported on 2Z
    grid = build_grid(law2, 1 << 10)
    with pytest.raises(ValueError):
        derive(grid)


# -- small-t first-order checks ----------------------------------------------


def test_small_t_rows_structure(law15):
    rows = small_t_checks(law15, t_list=(1e-2, 1e-3))
    assert [r.t for r in rows] == [1e-2, 1e-3]
    g1 = [abs(r.ratio1 - 1.0) for r in rows]
    g2 = [abs(r.ratio2 - 1.0) for r in rows]
    assert g1[1] < g1[0]
    assert g2[1] < g2[0]
    assert rows[0].r_of_t > rows[1].r_of_t > 0.0
    for r in rows:
        assert abs(r.phihat) <= 1.0 + 1e-9


# -- properties --------------------------------------------------------------


@settings(max_examples=20, deadline=None)
@given(st.floats(0.01, 3.1), st.floats(1.1, 2.0), st.floats(0.7, 0.95))
def test_transform_modulus_property(t, alpha, right_mass):
    law = sl.build_power_law(alpha, right_mass,
                             sl.LeftSpec(atoms=((-1, 1.0 - right_mass),)))
    val, bound = transform_at(law, t, tol=1e-9)
    assert abs(val) <= 1.0 + bound + 1e-9

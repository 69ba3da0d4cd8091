"""Correction-term recursion, predicted constants, remainder diagnostics."""

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rrl import steplaw as sl
from rrl.expansion import (
    asymptotic_constants,
    c_const,
    diagnostics,
    gamma_fn,
    mu2,
    phi_seq,
    phibar,
    phibar1_closed_form,
    r_star,
)
from rrl.renewal import delta_by_inversion, u_from_delta

mpmath.mp.dps = 40


@pytest.fixture(scope="module")
def law15():
    return sl.build_power_law(1.5, 0.95, "atoms:(-1:0.05)")


@pytest.fixture(scope="module")
def law_hh():
    return sl.build_finite_law({1: 0.5, 2: 0.5})


# -- constants ---------------------------------------------------------------


def test_gamma_fn_matches_mpmath():
    for x in (0.5, 0.6, 1.0, 2.5, -0.4, -1.3, 0.2):
        assert gamma_fn(x) == pytest.approx(float(mpmath.gamma(x)), rel=1e-12)


def test_c_const_known_values():
    # first-order coefficient is 1 for every tail index
    for beta in (0.4, 0.5, 0.7, 0.99):
        assert c_const(1, beta) == pytest.approx(1.0, rel=1e-12)
    assert c_const(2, 0.4) == pytest.approx(0.48307, abs=5e-6)
    assert c_const(3, 0.4) == pytest.approx(-0.567, abs=5e-4)
    assert c_const(2, 0.7) == pytest.approx(
        -0.4 * float(mpmath.gamma(0.3) ** 2 / mpmath.gamma(0.6)), rel=1e-12)


def test_c_const_pole_free_at_k_beta_one():
    # (1 - k beta) Gamma(1-beta)^k / Gamma(2 - k beta) passes through zero
    assert c_const(2, 0.5) == 0.0
    assert abs(c_const(2, 0.5 + 1e-9)) < 1e-8
    assert abs(c_const(2, 0.5 - 1e-9)) < 1e-8


def test_c_const_independent_formula():
    for k, beta in ((2, 0.4), (3, 0.4), (2, 0.7), (4, 0.3)):
        truth = float((1 - k * beta) * mpmath.gamma(1 - beta) ** k
                      / mpmath.gamma(2 - k * beta))
        assert c_const(k, beta) == pytest.approx(truth, rel=1e-12)


def test_r_star_values():
    assert r_star(1.4) == 3
    assert r_star(1.5) == 2
    assert r_star(1.7) == 2
    with pytest.raises(ValueError):
        r_star(2.0)
    with pytest.raises(ValueError):
        r_star(1.0)


def test_asymptotic_constants_bundle():
    cons = asymptotic_constants(1.4)
    assert cons.beta == pytest.approx(0.4)
    assert cons.r_star == 3
    assert cons.c[0] == pytest.approx(1.0)
    assert cons.c[1] == pytest.approx(c_const(2, 0.4))
    assert cons.c[2] == pytest.approx(c_const(3, 0.4))


# -- phi sequence ------------------------------------------------------------


def test_phi_structure(law15):
    phi = phi_seq(law15, (-50, 5000))
    mu = sl.moments(law15).mu
    assert phi.seq[0] == pytest.approx(law15.right_tail(0) / mu, rel=1e-13)
    assert phi.seq[-1] == pytest.approx(-0.05 / mu, rel=1e-13)
    assert phi.seq[-2] == 0.0
    # telescoping: phi_{n-1} - phi_n = (p_n - 1_{n=0}) / mu; the unit drop at
    # the branch seam is what makes the signed sequence sum to one
    for n in (-1, 0, 1, 2, 17, 400):
        seam = 1.0 if n == 0 else 0.0
        lhs = phi.seq[n - 1] - phi.seq[n]
        assert lhs == pytest.approx((float(law15.pmf(n)) - seam) / mu,
                                    abs=1e-15)


def test_phi_total_mass(law15):
    # sum over all n of phi_n = 1: window sum plus certified tail remainder
    phi = phi_seq(law15, (-50, 200_000))
    s = float(np.sum(phi.seq.values))
    tail = phi.seq.right_model.sum_bound(200_000)
    assert abs(s - 1.0) <= tail + 1e-10


def test_phibar1_closed_form_vs_series(law15):
    # independent oracle: the double tail collapses exactly to
    # sum_{m > n+1} (m-n-1) m^{-s} = zeta(s-1, n+2) - (n+1) zeta(s, n+2)
    mu = sl.moments(law15).mu
    for n in (5, 50, 500):
        truth = law15.c_right / mu * float(
            mpmath.zeta(1.5, n + 2) - (n + 1) * mpmath.zeta(2.5, n + 2))
        val, bound = phibar1_closed_form(1.5, law15.c_right, mu, n)
        assert abs(val - truth) <= bound + 1e-12 * truth


# -- recursion against an exact finite-law oracle ----------------------------


def test_phibar_finite_exact(law_hh):
    # phi = (2/3, 1/3) at n = (0, 1).  The recursion is transform-true:
    # Phibar_{k+1} = Phibar_k - Phibar_k * phi, the inverse transform of
    # (1 - phihat)^{k+1}/(1 - e^{it}).  Here 1 - phihat = (1 - e^{it})/3,
    # so Phibar_1 = (1/3) delta_0 and Phibar_2 = (1/9)(delta_0 - delta_1).
    phi = phi_seq(law_hh, (-40, 400))
    et = phibar(phi, 2, [0, 1, 2])
    assert et.grid_values[0] == pytest.approx([1 / 3, 0.0, 0.0], abs=1e-12)
    assert et.grid_values[1] == pytest.approx([1 / 9, -1 / 9, 0.0], abs=1e-12)
    assert et.partial_sum == pytest.approx(
        [1 + 1 / 3 + 1 / 9, 1.0 - 1 / 9, 1.0], abs=1e-12)
    assert np.all(et.grid_budgets >= 0.0)


def test_phibar_window_overflow_raises(law15):
    phi = phi_seq(law15, (-50, 3000))
    with pytest.raises(ValueError):
        phibar(phi, 2, [3000])      # level-2 window ends short of the edge


# -- mu2 ---------------------------------------------------------------------


def test_mu2_finite_exact(law_hh):
    phi = phi_seq(law_hh, (-40, 400))
    rep = mu2(phi, [1, 5, 50])
    assert rep.values == pytest.approx([1 / 3, 1 / 3, 1 / 3], abs=1e-13)
    assert not rep.log_regime
    assert rep.doubling_ratio == pytest.approx(1.0, abs=1e-12)


def test_mu2_log_growth_boundary():
    law2 = sl.build_power_law(2.0, 0.8, "atoms:(-1:0.2)")
    mu = sl.moments(law2).mu
    phi = phi_seq(law2, (-50, 100_000))
    rep = mu2(phi, [5_000, 10_000, 20_000, 40_000])
    assert rep.log_regime
    # r phi_r ~ (c_right/(alpha mu)) r^{-1} at alpha = 2, so doubling
    # increments approach (c_right/(2 mu)) log 2
    target = law2.c_right / (2.0 * mu) * math.log(2.0)
    incs = np.diff(rep.values)
    assert incs[-1] == pytest.approx(target, rel=0.01)
    assert abs(incs[-1] - target) < abs(incs[0] - target)


def test_mu2_needs_doubling_headroom(law_hh):
    phi = phi_seq(law_hh, (-40, 400))
    with pytest.raises(ValueError):
        mu2(phi, [300])             # window must reach twice the top point


# -- diagnostics tables ------------------------------------------------------


@pytest.fixture(scope="module")
def diag15(law15):
    n_max = 20_000
    dt = delta_by_inversion(law15, n_max, M=1 << 20, tol=1e-6,
                            with_delta2=False)
    ut = u_from_delta(dt, law15, (0, n_max))
    grid = np.array([100, 1_000, 10_000, 20_000])
    phi = phi_seq(law15, (-2000, 2 * n_max + 10_000))
    et = phibar(phi, 2, grid)
    return diagnostics(phi, et, ut.values(grid),
                       np.full(grid.size, ut.err))


def test_first_order_ratio_trend(diag15):
    gaps = np.abs(diag15.first_order - 1.0)
    assert gaps[-1] < gaps[0]
    assert gaps[-1] < 0.05


def test_ratio2_shrinks_at_pole(diag15):
    # beta = 1/2 sits at the k beta = 1 zero: ratio_2 tends to c = 0
    r2 = np.abs(diag15.ratios[0])
    assert r2[-1] < r2[0]
    assert r2[-1] < 0.05


def test_remainder_decays(diag15):
    e = np.abs(diag15.remainder.e_star)
    assert e[-1] < e[0]
    assert np.all(np.isfinite(e))


def test_diagnostics_alignment_guard(law15, diag15):
    phi = phi_seq(law15, (-2000, 60_000))
    et = phibar(phi, 2, [100, 1_000])
    with pytest.raises(ValueError):
        diagnostics(phi, et, np.array([1.0]), np.array([0.0]))


# -- properties --------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(st.floats(1.05, 1.95), st.integers(10, 100_000))
def test_phibar1_closed_form_bracket_property(alpha, n):
    # The double tail collapses to sum_{m > n+1} f(m), f(x) = (x-n-1)x^{-s}.
    # f is unimodal, so the sum sits within 2 max f of the exact integral
    # F = (n+1)^{1-alpha} / (alpha (alpha-1)).
    s = 1.0 + alpha
    val, bound = phibar1_closed_form(alpha, 1.0, 1.0, n)
    integral = (n + 1.0) ** (1.0 - alpha) / (alpha * (alpha - 1.0))
    x_star = s * (n + 1.0) / (s - 1.0)
    f_max = (x_star - n - 1.0) * x_star ** -s
    assert abs(val - integral) <= bound + 2.0 * f_max

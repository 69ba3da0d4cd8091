"""Step-law construction, tails, moments, Chernoff, sampling, parsing."""

import itertools
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rrl import steplaw as sl

mpmath.mp.dps = 40


@pytest.fixture(scope="module")
def law14():
    return sl.build_power_law(1.4, 0.95, "atoms:(-1:0.05)")


@pytest.fixture(scope="module")
def law_geom():
    return sl.build_power_law(1.5, 0.8, "geom:(q=0.5,mass=0.2)")


@pytest.fixture(scope="module")
def law_hh():
    return sl.build_finite_law({1: 0.5, 2: 0.5})


# -- normalisation and tails -------------------------------------------------


def test_normalisation(law14):
    n = np.arange(-5, 2001)
    total = law14.pmf(n).sum() + law14.right_tail(2000)
    assert abs(total - 1.0) < 1e-12


def test_tail_telescoping(law14, law_geom):
    for law in (law14, law_geom):
        for n in [-7, -3, -1, 0, 1, 2, 10, 500, 5000]:
            lhs = law.right_tail(n - 1) - law.right_tail(n)
            assert lhs == pytest.approx(float(law.pmf(n)), abs=1e-14)


def test_left_right_tail_complement(law14, law_geom):
    for law in (law14, law_geom):
        for n in [-9, -2, -1]:
            # P(X <= n) + P(X > n) = 1
            assert law.left_tail(n) + law.right_tail(n) == pytest.approx(1.0, abs=1e-14)


def test_right_tail_closed_form(law14):
    # P(X > n) = c_right * sum_{k > n} k^{-(1+alpha)}
    for n in [1, 10, 1000]:
        truth = law14.c_right * float(mpmath.zeta(2.4, n + 1))
        assert law14.right_tail(n) == pytest.approx(truth, rel=1e-13)


def test_geom_left_tail(law_geom):
    # mass 0.2, ratio 0.5: P(X <= -k) = 0.2 * 0.5^{k-1}
    for k in [1, 2, 5, 10]:
        assert law_geom.left_tail(-k) == pytest.approx(0.2 * 0.5 ** (k - 1), rel=1e-13)


def test_structural_left_negligibility(law14, law_geom):
    # F(-n)/Fbar(n) non-increasing and < 1e-3 at 1e4 (identically zero beyond
    # the support for finite-atom left parts)
    for law in (law14, law_geom):
        ratios = [law.left_tail(-n) / law.right_tail(n) for n in (100, 1000, 10000)]
        assert ratios[0] >= ratios[1] >= ratios[2]
        assert ratios[2] < 1e-3
    g = [law_geom.left_tail(-n) / law_geom.right_tail(n) for n in (10, 20, 40)]
    assert g[0] > g[1] > g[2]


def test_law_eval_triple(law14):
    p, rt, lt = sl.law_eval(law14, 3)
    assert p == pytest.approx(float(law14.pmf(3)))
    assert rt == pytest.approx(law14.right_tail(3))
    assert lt == pytest.approx(law14.left_tail(-3))


# -- moments -----------------------------------------------------------------


def test_moments_against_series_oracle(law14):
    mom = sl.moments(law14)
    mu_plus = law14.c_right * float(mpmath.zeta(1.4))
    mu = mu_plus - 0.05
    assert mom.mu_plus == pytest.approx(mu_plus, rel=1e-13)
    assert mom.mu == pytest.approx(mu, rel=1e-13)
    assert abs(mom.mu - (mom.mu_plus + mom.mu_minus)) <= mom.mu_bound
    assert mom.mu_plus > 0 and mom.mu_minus < 0
    # fractional moment with default delta = (alpha-1)/2 = 0.2
    frac = law14.c_right * float(mpmath.zeta(1.2)) + 0.05
    assert mom.frac_moment == pytest.approx(frac, rel=1e-12)


def test_moments_geom_oracle(law_geom):
    mom = sl.moments(law_geom)
    mu_plus = law_geom.c_right * float(mpmath.zeta(1.5))
    mu_minus = -0.2 * 2.0              # mean of geometric(1/2) on {1,2,...} is 2
    assert mom.mu == pytest.approx(mu_plus + mu_minus, rel=1e-12)
    frac_left = 0.2 * 0.5 * float(mpmath.nsum(
        lambda k: k ** 1.25 * 0.5 ** (k - 1), [1, mpmath.inf]))
    frac = law_geom.c_right * float(mpmath.zeta(1.5 - 0.25)) + frac_left
    assert mom.frac_moment == pytest.approx(frac, rel=1e-9)


def test_moments_finite(law_hh):
    mom = sl.moments(law_hh)
    assert mom.mu == 1.5
    assert mom.mu_plus == 1.5
    assert mom.mu_minus == 0.0


def test_moments_rejects_bad_delta(law14):
    with pytest.raises(ValueError):
        sl.moments(law14, delta=0.9)      # >= alpha - 1


# -- construction validation -------------------------------------------------


def test_build_rejects_bad_mass():
    with pytest.raises(ValueError):
        sl.build_power_law(1.4, 0.95, "atoms:(-1:0.2)")


def test_build_rejects_bad_alpha():
    with pytest.raises(ValueError):
        sl.build_power_law(2.3, 0.95, "atoms:(-1:0.05)")
    with pytest.raises(ValueError):
        sl.build_power_law(1.0, 0.95, "atoms:(-1:0.05)")


def test_build_rejects_negative_drift():
    with pytest.raises(ValueError):
        sl.build_finite_law({-3: 0.9, 1: 0.1})


def test_alpha2_boundary_allowed():
    law = sl.build_power_law(2.0, 0.8, "atoms:(-1:0.2)")
    mom = sl.moments(law)
    mu = 0.8 / float(mpmath.zeta(3)) * float(mpmath.zeta(2)) - 0.2
    assert mom.mu == pytest.approx(mu, rel=1e-13)


# -- Chernoff ----------------------------------------------------------------


def test_chernoff_half_half_formula(law_hh):
    cert = sl.chernoff_bound(law_hh, m=0, n_steps=10)
    formula = ((math.exp(-1) + math.exp(-2)) / 2.0) ** 10
    assert cert.point_bound == pytest.approx(formula, rel=1e-12)
    assert cert.lam == pytest.approx(1.0)
    # exact P(S_10 <= 0) = 0 for a positive-step law, so any bound is valid
    assert cert.point_bound >= 0.0
    assert cert.series_bound >= cert.point_bound


def _enumerate_sn(atoms, n):
    dist = {0: 1.0}
    for _ in range(n):
        new = {}
        for s, p in dist.items():
            for site, mass in atoms:
                new[s + site] = new.get(s + site, 0.0) + p * mass
        dist = new
    return dist


@pytest.mark.parametrize("atoms", [
    ((1, 0.5), (2, 0.5)),
    ((-1, 0.2), (1, 0.3), (3, 0.5)),
    ((-2, 0.1), (-1, 0.2), (1, 0.4), (2, 0.3)),
])
@pytest.mark.parametrize("n_steps", [3, 7, 12])
def test_chernoff_dominates_enumeration(atoms, n_steps):
    law = sl.build_finite_law(dict(atoms))
    dist = _enumerate_sn(atoms, n_steps)
    span = 12 * max(abs(s) for s, _ in atoms)
    for m in range(-span, 1):
        p_exact = sum(p for s, p in dist.items() if s <= m)
        cert = sl.chernoff_bound(law, m=m, n_steps=n_steps)
        assert p_exact <= cert.point_bound * (1 + 1e-12)


def test_chernoff_geometric_left(law_geom):
    cert = sl.chernoff_bound(law_geom, m=-30, n_steps=50)
    assert 0.0 < cert.point_bound < 1e-4
    assert cert.lam <= -math.log(0.5) / 2.0 + 1e-12
    # Markov check of the ingredients: bound = e^{lam*m} * mgf^n
    assert cert.point_bound == pytest.approx(
        math.exp(cert.lam * -30) * cert.mgf ** 50, rel=1e-12)


# -- sampling ----------------------------------------------------------------


@pytest.fixture(scope="module")
def big_sample(law14):
    tabs = sl.sampler_tables(law14)
    rng = np.random.default_rng(20240817)
    return sl.sample(law14, rng, 1_000_000, tabs)


def test_sample_atom_frequencies(law14, big_sample):
    x = big_sample
    for n in [-1, 1, 2, 3]:
        p = float(law14.pmf(n))
        emp = np.mean(x == n)
        se = math.sqrt(p * (1 - p) / x.size)
        assert abs(emp - p) < 5 * se + 1e-9


def test_sample_tail_frequencies(law14, big_sample):
    x = big_sample
    for k in [10, 100, 1000, 5000, 20000]:
        p = law14.right_tail(k)
        emp = np.mean(x > k)
        se = math.sqrt(p * (1 - p) / x.size)
        assert abs(emp - p) < 5 * se + 1e-9


def test_sample_geom(law_geom):
    tabs = sl.sampler_tables(law_geom)
    rng = np.random.default_rng(99)
    x = sl.sample(law_geom, rng, 400_000, tabs)
    for k in [1, 2, 6]:
        p = 0.2 * 0.5 ** (k - 1) * 0.5  # P(X = -k) = mass (1-q) q^{k-1}
        emp = np.mean(x == -k)
        se = math.sqrt(p / x.size)
        assert abs(emp - p) < 5 * se + 1e-9


def test_sample_deterministic(law14):
    tabs = sl.sampler_tables(law14)
    a = sl.sample(law14, np.random.default_rng(5), 1000, tabs)
    b = sl.sample(law14, np.random.default_rng(5), 1000, tabs)
    assert np.array_equal(a, b)


# -- parsing -----------------------------------------------------------------


def test_parse_round_trip(law14, tmp_path):
    text = "family = power\nalpha = 1.4\nright_mass = 0.95\nleft = atoms:(-1:0.05)\n"
    law = sl.parse_law_spec(text)
    assert law.alpha == law14.alpha
    assert law.c_right == law14.c_right
    path = tmp_path / "t.law"
    path.write_text(text)
    law2 = sl.load_law(path)
    assert law2.c_right == law14.c_right


def test_parse_geom():
    law = sl.parse_law_spec(
        "family=power\nalpha=1.5\nright_mass=0.8\nleft=geom:(q=0.5,mass=0.2)\n")
    assert law.left.geom_q == 0.5
    assert law.left.geom_mass == 0.2


@pytest.mark.parametrize("text,frag", [
    ("alpha=1.4\nright_mass=1.0\n", "family"),
    ("family=power\nalpha=nope\nright_mass=0.95\nleft=atoms:(-1:0.05)\n", "line 2"),
    ("family=power\nalpha=1.4\nright_mass=0.95\nleft=atoms:(2:0.05)\n", "negative"),
    ("family=power\nalpha=1.4\nright_mass=0.95\nleft=atoms:(-1:0.05)\nzz=1\n", "line 5"),
    ("family=power\nalpha=1.4\nalpha=1.5\nright_mass=0.95\n", "duplicate"),
    ("family=power\nalpha=1.4\nright_mass=0.9\nleft=atoms:(-1:0.05)\n", "sum to 1"),
    ("junk line\n", "line 1"),
])
def test_parse_errors(text, frag):
    with pytest.raises(sl.LawSpecError) as exc:
        sl.parse_law_spec(text)
    assert frag in str(exc.value)


# -- properties --------------------------------------------------------------


@settings(max_examples=25, deadline=None)
@given(st.floats(1.05, 2.0), st.floats(0.5, 0.99))
def test_power_law_mass_property(alpha, right_mass):
    left_mass = 1.0 - right_mass
    law = sl.build_power_law(alpha, right_mass,
                             sl.LeftSpec(atoms=((-1, left_mass),)))
    n = np.arange(-2, 301)
    total = law.pmf(n).sum() + law.right_tail(300)
    assert abs(total - 1.0) < 1e-11
    assert law.right_tail(0) == pytest.approx(right_mass, rel=1e-13)

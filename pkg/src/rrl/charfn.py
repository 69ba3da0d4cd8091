"""Characteristic-function grids with certified bounds, and small-t checks.

Storage convention (load-bearing): ``numpy.fft.rfft`` applies the kernel
``e^{-i t_j n}``, so every stored spectrum here is the complex conjugate of
the mathematical transform at ``t_j = 2 pi j / M``.  All derived grids keep
that same convention, which makes ``irfft`` of any stored grid directly the
real sequence it represents — no index reversal anywhere.  Scalar helpers
(``transform_at`` etc.) return the mathematical value with the ``e^{+itn}``
kernel; only the dyadic grids are conjugated.

The grid pmf is produced by *exact folding*: for a power tail the wrapped
masses ``q_r = sum_l p_{r+lM}`` have a closed Hurwitz form, and atoms or a
geometric left tail fold in exactly.  Sampling the transform of the folded
pmf at the grid frequencies is then exact — there is no truncation or alias
term at all, and ``trunc_bound`` only carries the certified evaluation
brackets plus transform rounding.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from ._cert import zeta_tail
from .expansion import gamma_fn, phibar1_closed_form
from .steplaw import StepLaw, moments

__all__ = [
    "CharFnGrid",
    "SmallTRow",
    "build_grid",
    "derive",
    "transform_at",
    "phihat_at",
    "small_t_checks",
]

_EPS = float(np.finfo(np.float64).eps)
_CANCELLATION_FLOOR_T = 1e-6


@dataclass(frozen=True)
class CharFnGrid:
    """Half-spectrum grids (rfft layout, conjugate convention, see module doc)."""

    M: int
    mu: float
    phat: np.ndarray                   # conj p-hat at t_j, j = 0..M/2
    trunc_bound: float
    p_cut: Optional[int]               # None: right tail folded analytically
    n_cut: Optional[int]               # None: left tail folded analytically
    phihat: Optional[np.ndarray] = None
    deltahat: Optional[np.ndarray] = None
    psik: Optional[tuple] = None       # psik[k-1] array for k = 1..k_max
    psik0_finite: Optional[tuple] = None
    alpha: Optional[float] = None

    @property
    def t(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.M // 2 + 1) / self.M

    def aperiodicity_margin(self) -> float:
        """min over j != 0 of 1 - |p-hat(t_j)| (positive iff aperiodic)."""
        return float(1.0 - np.max(np.abs(self.phat[1:])))


def _fold_power_pmf(law: StepLaw, M: int):
    """Exactly folded pmf q_r = sum_l p_{r+lM} plus a certified bound."""
    s = 1.0 + law.alpha
    r = np.arange(M, dtype=np.float64)
    a = r / M
    q = np.empty(M, dtype=np.float64)
    v, b = zeta_tail(s, a[1:])
    q[1:] = v
    v0, b0 = zeta_tail(s, 1.0)
    q[0] = v0
    scale = law.c_right * float(M) ** (-s)
    q *= scale
    bound = scale * (float(np.sum(b)) + b0)
    for site, mass in law.left.atoms:
        q[site % M] += mass
    if law.left.geom_mass > 0.0:
        gq, gm = law.left.geom_q, law.left.geom_mass
        k_cut = int(math.ceil(80.0 / -math.log(gq)))
        for k in range(1, k_cut + 1):
            q[(-k) % M] += gm * (1.0 - gq) * gq ** (k - 1)
        q[(-(k_cut + 1)) % M] += gm * gq ** k_cut
        bound += 2.0 * gm * gq ** k_cut
    return q, bound


def _fold_finite_pmf(law: StepLaw, M: int):
    q = np.zeros(M, dtype=np.float64)
    for site, mass in law.finite_atoms:
        q[site % M] += mass
    return q, 0.0


def build_grid(law: StepLaw, M: int, tol: float = 1e-12) -> CharFnGrid:
    """Sample p-hat on the dyadic grid by transforming the exactly folded pmf."""
    if M < (1 << 10) or (M & (M - 1)) != 0:
        raise ValueError(f"M must be a power of two >= 1024, got {M}")
    if law.family == "power":
        q, fold_bound = _fold_power_pmf(law, M)
    else:
        q, fold_bound = _fold_finite_pmf(law, M)
    mass_resid = abs(float(q.sum()) - 1.0)
    phat = np.fft.rfft(q)
    fft_fp = 4.0 * _EPS * math.log2(M) * float(np.abs(q).sum())
    trunc = fold_bound * M ** 0 + fft_fp + mass_resid
    # the fold itself is exact sampling, so the only tolerance question is
    # whether the evaluation brackets meet the request
    if trunc > tol / 2.0 + 1e-13:
        raise ValueError(f"requested tol={tol} unachievable: certified "
                         f"evaluation bound is {trunc:.3e}")
    mom = moments(law)
    grid = CharFnGrid(M=M, mu=mom.mu, phat=phat, trunc_bound=trunc,
                      p_cut=None, n_cut=None, alpha=law.alpha)
    if abs(grid.phat[0] - 1.0) > trunc + 1e-12:
        raise AssertionError("p-hat(0) != 1 beyond certified bound")
    return grid


def derive(grid: CharFnGrid, k_max: int = 0) -> CharFnGrid:
    """Fill phihat, deltahat and psi_k with removable singularities imposed.

    At ``j = 0``: phihat = 1 (the phi sequence is a probability-mass split),
    deltahat = -1/mu, and psi_k is the extrapolated one-sided limit when
    ``k (alpha-1) > 1`` (flagged unusable otherwise — psi_k diverges like
    ``t^{k beta - 1}`` there and consumers must not read it).
    """
    M = grid.M
    mu = grid.mu
    tj = grid.t
    one_minus_p = 1.0 - grid.phat
    floor = max(1e3 * _EPS, 10.0 * grid.trunc_bound)
    small = np.abs(one_minus_p[1:]) < floor
    if np.any(small):
        j_bad = 1 + int(np.argmax(small))
        raise ValueError(
            f"|1 - p-hat| below cancellation floor at j={j_bad} "
            "(law is periodic or nearly periodic on a sublattice)")
    # conjugate convention throughout: denominators use e^{-i t_j}
    emit = np.exp(-1j * tj[1:])
    phihat = np.empty_like(grid.phat)
    phihat[0] = 1.0
    phihat[1:] = one_minus_p[1:] / (mu * (1.0 - emit))
    deltahat = np.empty_like(grid.phat)
    deltahat[0] = -1.0 / mu
    deltahat[1:] = (emit - 1.0) / one_minus_p[1:]

    psik = None
    flags = None
    if k_max > 0:
        psik = []
        flags = []
        one_minus_phi = 1.0 - phihat[1:]
        denom = 1.0 - emit
        beta = (grid.alpha - 1.0) if grid.alpha is not None else None
        for k in range(1, k_max + 1):
            pk = np.empty_like(grid.phat)
            pk[1:] = one_minus_phi ** k / denom
            finite = beta is None or k * beta > 1.0
            if finite:
                # limit along the two smallest grid points (Richardson on a
                # vanishing power): the limit itself is 0, the extrapolation
                # quantifies how far from it the grid still sits
                pk[0] = 2.0 * pk[1] - pk[2]
            else:
                pk[0] = np.nan
            psik.append(pk)
            flags.append(bool(finite))
        psik = tuple(psik)
        flags = tuple(flags)
    return replace(grid, phihat=phihat, deltahat=deltahat,
                   psik=psik, psik0_finite=flags)


# ---------------------------------------------------------------------------
# scalar certified evaluations (mathematical e^{+itn} convention)


def transform_at(law: StepLaw, t: float, tol: float = 1e-11):
    """(p-hat(t), err): certified direct summation at an arbitrary real t."""
    if law.family == "finite":
        acc = sum(mass * cmath.exp(1j * t * site) for site, mass in law.finite_atoms)
        return acc, 4.0 * _EPS * len(law.finite_atoms)
    acc = 0.0 + 0.0j
    err = 8.0 * _EPS
    for site, mass in law.left.atoms:
        acc += mass * cmath.exp(1j * t * site)
    if law.left.geom_mass > 0.0:
        q, gm = law.left.geom_q, law.left.geom_mass
        z = cmath.exp(-1j * t)
        acc += gm * (1.0 - q) * z / (1.0 - q * z)
    s = 1.0 + law.alpha
    den = abs(1.0 - cmath.exp(1j * t))
    if den == 0.0:
        return acc + law.right_mass, err
    n_need = (2.0 * law.c_right / (tol * den)) ** (1.0 / s)
    n_sum = int(min(math.ceil(n_need), 80_000_000)) + 1
    chunk = 4_000_000
    total = 0.0 + 0.0j
    for a0 in range(1, n_sum + 1, chunk):
        n = np.arange(a0, min(a0 + chunk, n_sum + 1), dtype=np.float64)
        total += complex(np.sum(n ** (-s) * np.exp(1j * t * n)))
    acc += law.c_right * total
    # two independent tail certificates: summation by parts, and raw mass
    tail_abel = 2.0 * law.c_right * (n_sum + 1.0) ** (-s) / den
    tail_mass = law.right_tail(n_sum)
    err += min(tail_abel, tail_mass) + _EPS * math.log2(max(n_sum, 2)) * 8.0
    return acc, err


def phihat_at(law: StepLaw, t: float, tol: float = 1e-11):
    """(phihat(t), err) with the cancellation-floor branch for tiny |t|.

    Below the floor, ``1 - p-hat(t) = -i mu t (1 + w)`` where the relative
    perturbation ``w`` is controlled by the fractional-moment certificate;
    evaluating the quotient from the analytic leading term avoids the
    catastrophic subtraction ``1 - p-hat``.
    """
    mom = moments(law)
    mu = mom.mu
    denom = mu * (1.0 - cmath.exp(1j * t))
    if abs(t) >= _CANCELLATION_FLOOR_T:
        ph, err = transform_at(law, t, tol)
        return (1.0 - ph) / denom, err / abs(denom)
    # |e^{ix} - 1 - ix| <= 3 |x|^{1+delta} for all real x, delta in (0,1]
    rem = 3.0 * abs(t) ** (1.0 + mom.delta) * mom.frac_moment
    value = (1j * mu * t) / denom
    return value, rem / abs(denom)


# ---------------------------------------------------------------------------
# small-t asymptotic ratio checks


@dataclass(frozen=True)
class SmallTRow:
    t: float
    ratio1: complex
    ratio2: complex
    r_of_t: float          # leading tail-sum scale Phibar_1(ceil(1/t))
    phihat: complex


def small_t_checks(law: StepLaw, t_list: Sequence[float] = (1e-2, 1e-3, 1e-4, 1e-5),
                   tol: float = 1e-11):
    """Ratios testing the first-order behavior of phihat near 0.

    R1 compares ``1 - phihat(t)`` to ``Gamma(1-beta) e^{-i pi beta/2} r(t)``
    with ``r(t) = Phibar_1(ceil(1/t))``.  R2 compares the centered-difference
    derivative of phihat to the term obtained by differentiating that leading
    form, ``-beta Gamma(1-beta) e^{-i pi beta/2} t^{-1} r(t)`` — the minus
    sign comes with the derivative of ``t^beta``-type growth of ``1-phihat``
    (the ratio converges to 1 with it and to -1 against +beta).
    """
    if law.family != "power" or not (law.alpha < 2.0):
        raise ValueError("small-t checks require a power law with alpha < 2")
    beta = law.alpha - 1.0
    mom = moments(law)
    kernel = gamma_fn(1.0 - beta) * cmath.exp(-1j * math.pi * beta / 2.0)
    rows = []
    for t in sorted(t_list, reverse=True):
        if t < _CANCELLATION_FLOOR_T:
            raise ValueError(f"t={t} below the cancellation floor "
                             f"{_CANCELLATION_FLOOR_T}")
        m = math.ceil(1.0 / t)
        r_t, _ = phibar1_closed_form(law.alpha, law.c_right, mom.mu, float(m))
        f0, _ = phihat_at(law, t, tol)
        h = t / 100.0
        fp, _ = phihat_at(law, t + h, tol)
        fm, _ = phihat_at(law, t - h, tol)
        dphi = (fp - fm) / (2.0 * h)
        ratio1 = (1.0 - f0) / (kernel * r_t)
        ratio2 = dphi / (-beta * kernel * r_t / t)
        rows.append(SmallTRow(t=t, ratio1=ratio1, ratio2=ratio2,
                              r_of_t=r_t, phihat=f0))
    return rows

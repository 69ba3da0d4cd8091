"""Tail-integral sequence, signed-measure recursion, and trend diagnostics.

The smoothing sequence ``phi_n`` is the stationary-overshoot mixture built
from the step law's tails: ``F_bar(n)/mu`` on the nonnegative axis and
``-F(n)/mu`` on the negative axis (negative there, summing to one overall).
Repeatedly removing a smoothing convolution produces the correction terms::

    Phibar_{k+1,n} = Phibar_{k,n} - (Phibar_k * phi)_n

whose leading term ``Phibar_1`` is the two-branch tail sum of ``phi``.  The
partial sums ``1_{n>=0} + sum_k Phibar_{k,n}`` approximate ``mu * u_n`` with
a remainder that is small relative to ``Phibar_1^r_star``; the diagnostics
here turn those limit statements into finite trend tables:

* ``ratio_k(n) = Phibar_k / Phibar_1^k`` against the constant
  ``c_const(k, beta)``,
* ``first_order(n) = mu (u_n - 1/mu) / Phibar_1``,
* the normalized remainder ``e_star``, and
* for the boundary exponent ``alpha = 2`` the log-corrected comparison
  ``third(n)`` built from ``mu2(n) = sum_{r<=n} r phi_r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._cert import integrated_tail_weight, neumaier_sum, zeta_tail
from .seqkit import TailModel, WindowSeq, convolve
from .steplaw import StepLaw, moments

__all__ = [
    "PhiSeq",
    "ExpansionTable",
    "AsymptoticConstants",
    "RemainderReport",
    "DiagnosticsTable",
    "gamma_fn",
    "c_const",
    "r_star",
    "asymptotic_constants",
    "phi_seq",
    "phibar",
    "mu2",
    "diagnostics",
]

_EPS = float(np.finfo(np.float64).eps)


# ---------------------------------------------------------------------------
# constants


def gamma_fn(x: float) -> float:
    """Gamma function to >= 12 significant digits, poles rejected.

    Positive arguments go straight to libm; negative non-integers use the
    reflection identity ``Gamma(x) = pi / (sin(pi x) Gamma(1-x))`` so the
    two paths can be cross-checked against each other.
    """
    if x <= 0.0:
        if abs(x - round(x)) < 1e-8:
            raise ValueError(f"gamma pole or near-pole at x={x!r}")
        return math.pi / (math.sin(math.pi * x) * math.gamma(1.0 - x))
    return math.gamma(x)


def c_const(k: int, beta: float) -> float:
    """Limit constant for ratio_k: ``(1-k beta) Gamma(1-beta)^k / Gamma(2-k beta)``.

    This form is finite through ``k beta = 1`` (where the constant vanishes);
    the quotient form ``Gamma(1-beta)^k / Gamma(1-k beta)`` is only used in
    tests as a cross-check away from that line.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not (0.0 < beta < 1.0):
        raise ValueError(f"beta must lie in (0,1), got {beta}")
    kb = k * beta
    if kb >= 1.0 + beta:
        raise ValueError(f"k*beta={kb} >= alpha={1.0 + beta}: not a valid term")
    if abs(kb - 1.0) < 1e-12:
        return 0.0
    return (1.0 - kb) * gamma_fn(1.0 - beta) ** k / gamma_fn(2.0 - kb)


def r_star(alpha: float) -> int:
    """Largest k with ``k (alpha-1) < alpha``."""
    if not (1.0 < alpha < 2.0):
        raise ValueError(f"alpha must lie in (1,2), got {alpha}")
    beta = alpha - 1.0
    k = 1
    while (k + 1) * beta < alpha:
        k += 1
    return k


@dataclass(frozen=True)
class AsymptoticConstants:
    beta: float
    r_star: int
    c: tuple                   # c[k-1] = c_const(k, beta) for k = 1..r_star
    gamma_values: tuple        # ((argument, value), ...) actually evaluated

    @classmethod
    def for_alpha(cls, alpha: float) -> "AsymptoticConstants":
        beta = alpha - 1.0
        rs = r_star(alpha)
        cs = tuple(c_const(k, beta) for k in range(1, rs + 1))
        gammas = [(1.0 - beta, gamma_fn(1.0 - beta))]
        for k in range(1, rs + 1):
            if abs(k * beta - 1.0) >= 1e-12:
                gammas.append((2.0 - k * beta, gamma_fn(2.0 - k * beta)))
        return cls(beta=beta, r_star=rs, c=cs, gamma_values=tuple(gammas))


def asymptotic_constants(alpha: float) -> AsymptoticConstants:
    return AsymptoticConstants.for_alpha(alpha)


# ---------------------------------------------------------------------------
# phi


@dataclass(frozen=True)
class PhiSeq:
    """Smoothing sequence on a window, with moments of the generating law."""

    seq: WindowSeq
    mu: float
    mu_plus: float
    mu_minus: float
    alpha: Optional[float]
    c_right: float
    support_lo: Optional[int]   # exact lower support edge, None if unbounded

    def tail_anchor(self, n: int):
        """Certified ``sum_{r > n} phi_r`` for n at/beyond the window edge."""
        if self.alpha is None:
            return 0.0, 0.0
        v, b = integrated_tail_weight(self.alpha, float(n))
        s = self.c_right / self.mu
        return s * v, s * b + _EPS


def phibar1_closed_form(alpha: float, c_right: float, mu: float, n):
    """Certified ``Phibar_1(n) = sum_{r>n} phi_r`` for power laws, any n >= 0.

    Uses the double-tail closed form rather than window storage, so it is
    usable at arguments far beyond any feasible window (small-t checks need
    it at ``n ~ 1/t``).
    """
    v, b = integrated_tail_weight(alpha, n)
    s = c_right / mu
    return s * v, s * b + _EPS


def phi_seq(law: StepLaw, window) -> PhiSeq:
    """Evaluate phi on ``window = (lo, hi)`` from the law's exact tails."""
    lo, hi = int(window[0]), int(window[1])
    mom = moments(law)
    if law.support_lo is not None and lo > law.support_lo:
        raise ValueError(f"window lo={lo} must cover the left support edge "
                         f"{law.support_lo}")
    if law.family == "finite":
        hi_support = max(s for s, _ in law.finite_atoms)
        if hi < hi_support:
            raise ValueError(f"window hi={hi} must cover the right support "
                             f"edge {hi_support}")
    n = np.arange(lo, hi + 1)
    vals = np.empty(n.size, dtype=np.float64)
    neg = n < 0
    vals[~neg] = law.right_tail(n[~neg]) / mom.mu
    vals[neg] = -law.left_tail(n[neg]) / mom.mu

    right_model = None
    left_model = None
    if law.family == "power":
        # F_bar(n) <= (c_right/alpha) n^{-alpha} (1 + alpha/n); safe for n >= 32
        const = 1.05 * law.c_right / (law.alpha * mom.mu)
        right_model = TailModel(law.alpha, const)
    support_lo = law.support_lo
    if support_lo is None:
        # geometric left tail: dominate |phi_{-n}| = F(-n)/mu by a power law
        q, mass = law.left.geom_q, law.left.geom_mass
        p_exp = 12.0
        n_peak = max(1.0, -p_exp / math.log(q))
        const = (mass / mom.mu) * max(
            q ** (k - 1) * k ** p_exp for k in
            range(1, int(4 * n_peak) + 2))
        left_model = TailModel(p_exp, const)
    budget = law.norm_residual / mom.mu + 4.0 * _EPS
    seq = WindowSeq(lo, hi, vals, right_model=right_model,
                    left_model=left_model, err_budget=budget)
    return PhiSeq(seq=seq, mu=mom.mu, mu_plus=mom.mu_plus, mu_minus=mom.mu_minus,
                  alpha=law.alpha, c_right=law.c_right, support_lo=support_lo)


# ---------------------------------------------------------------------------
# recursion


@dataclass(frozen=True)
class ExpansionTable:
    """Correction-term windows Phibar_1..Phibar_K and grid extractions."""

    windows: tuple             # WindowSeq per k (index k-1)
    k_max: int
    n_grid: np.ndarray = field(repr=False)
    grid_values: np.ndarray = field(repr=False)   # shape (k_max, len(grid))
    grid_budgets: np.ndarray = field(repr=False)
    partial_sum: np.ndarray = field(repr=False)   # 1_{n>=0} + sum_k Phibar_k

    def phibar(self, k: int) -> WindowSeq:
        return self.windows[k - 1]


def phibar(phi: PhiSeq, k_max: int, n_grid: Sequence[int],
           override: bool = False) -> ExpansionTable:
    """Run the correction-term recursion up to ``k_max`` on phi's window.

    ``k_max`` beyond the decay budget ``r_star`` requires ``override=True``
    (extra terms are computable but carry no asymptotic claim).  Each level's
    output window shrinks by one support step so that every off-window
    convolution contribution is structurally zero; budgets then consist of
    float rounding and inherited input budgets only.
    """
    if phi.alpha is not None and 1.0 < phi.alpha < 2.0:
        rs = r_star(phi.alpha)
        if k_max > rs and not override:
            raise ValueError(
                f"k_max={k_max} exceeds r_star={rs}; pass override=True "
                "to compute unclaimed terms")
    n_grid = np.asarray(sorted(int(n) for n in n_grid), dtype=np.int64)
    s = phi.seq
    lo_step = phi.support_lo if phi.support_lo is not None else s.lo

    # Phibar_1 via the two-branch tail sum: T_n = sum_{r>n} phi_r computed by
    # a right-to-left cumulative sum anchored at the certified window tail;
    # the negative branch is T_n - 1 because phi sums to one.
    anchor, anchor_b = phi.tail_anchor(s.hi)
    rev = np.cumsum(s.values[::-1])[::-1]
    t_vals = np.empty(s.values.size, dtype=np.float64)
    t_vals[:-1] = rev[1:] + anchor
    t_vals[-1] = anchor
    n_axis = np.arange(s.lo, s.hi + 1)
    t_vals[n_axis < 0] -= 1.0
    cum_fp = _EPS * (np.abs(s.values).sum() + 1.0) * 4.0
    b1_budget = (anchor_b + cum_fp
                 + s.err_budget * (s.hi - s.lo + 1))
    rm1 = None
    if phi.alpha is not None:
        # Phibar_1(n) ~ (c_r/(beta mu)) n^{-beta}; envelope with headroom
        beta = phi.alpha - 1.0
        rm1 = TailModel(beta, 1.10 * phi.c_right / (beta * phi.mu))
    lm1 = None if phi.support_lo is not None else s.left_model
    tab = WindowSeq(s.lo, s.hi, t_vals, right_model=rm1, left_model=lm1,
                    err_budget=b1_budget)

    windows = [tab]
    for k in range(1, k_max):
        out_lo = tab.lo + lo_step
        out_hi = tab.hi + lo_step
        conv = convolve(tab, s, out_lo, out_hi)
        new_vals = tab.slice(out_lo, out_hi) - conv.values
        nxt = WindowSeq(out_lo, out_hi, new_vals,
                        err_budget=tab.err_budget + conv.err_budget)
        windows.append(nxt)
        tab = nxt

    gv = np.empty((k_max, n_grid.size), dtype=np.float64)
    gb = np.empty_like(gv)
    for k, w in enumerate(windows):
        for j, n in enumerate(n_grid):
            if not (w.lo <= n <= w.hi):
                raise ValueError(
                    f"budget/window overflow: grid point n={n} outside the "
                    f"level-{k + 1} window [{w.lo}, {w.hi}]; widen the phi window")
            gv[k, j] = w[n]
            gb[k, j] = w.err_budget
    partial = np.where(n_grid >= 0, 1.0, 0.0) + gv.sum(axis=0)
    return ExpansionTable(windows=tuple(windows), k_max=k_max, n_grid=n_grid,
                          grid_values=gv, grid_budgets=gb, partial_sum=partial)


# ---------------------------------------------------------------------------
# second-moment growth (alpha = 2 regime)


@dataclass(frozen=True)
class Mu2Report:
    n_grid: np.ndarray
    values: np.ndarray
    doubling_ratio: float      # mu2(2n)/mu2(n) at the largest feasible n
    log_regime: bool           # True iff alpha = 2 (mu2 diverges like log n)


def mu2(phi: PhiSeq, n_grid: Sequence[int]) -> Mu2Report:
    """Partial sums ``mu2(n) = sum_{r=1}^n r phi_r`` with a slow-growth probe."""
    s = phi.seq
    n_grid = np.asarray(sorted(int(n) for n in n_grid), dtype=np.int64)
    if n_grid[0] < 1:
        raise ValueError("mu2 grid must start at n >= 1")
    hi_needed = 2 * int(n_grid[-1])
    if hi_needed > s.hi:
        raise ValueError(f"phi window ends at {s.hi}, need {hi_needed} "
                         "for the doubling probe")
    r = np.arange(1, hi_needed + 1, dtype=np.float64)
    base = np.cumsum(r * s.slice(1, hi_needed))
    vals = base[n_grid - 1]
    top = int(n_grid[-1])
    ratio = base[2 * top - 1] / base[top - 1]
    return Mu2Report(n_grid=n_grid, values=vals, doubling_ratio=float(ratio),
                     log_regime=(phi.alpha is not None and phi.alpha == 2.0))


# ---------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class RemainderReport:
    n_grid: np.ndarray
    e_star: np.ndarray
    e_star_err: np.ndarray
    raw_remainder: np.ndarray   # mu*u - partial_sum


@dataclass(frozen=True)
class DiagnosticsTable:
    n_grid: np.ndarray
    u: np.ndarray
    u_err: np.ndarray
    d: np.ndarray               # u - 1/mu
    first_order: np.ndarray     # mu*d / Phibar_1
    ratios: np.ndarray          # shape (k_max-1, grid): ratio_k for k >= 2
    ratio_errs: np.ndarray
    remainder: RemainderReport
    constants: AsymptoticConstants
    mu2_values: Optional[np.ndarray] = None
    third: Optional[np.ndarray] = None


def diagnostics(phi: PhiSeq, etable: ExpansionTable, u_values, u_errs,
                constants: Optional[AsymptoticConstants] = None,
                mu2_report: Optional[Mu2Report] = None) -> DiagnosticsTable:
    """Assemble the trend tables from an expansion table and matching u values.

    ``u_values``/``u_errs`` must align with ``etable.n_grid``.  For the
    boundary family (alpha = 2) pass ``mu2_report`` on the same grid to get
    the log-corrected comparison ``third``.
    """
    grid = etable.n_grid
    u = np.asarray(u_values, dtype=np.float64)
    ue = np.asarray(u_errs, dtype=np.float64)
    if u.shape != grid.shape:
        raise ValueError("u values do not align with the expansion grid")
    mu = phi.mu
    d = u - 1.0 / mu
    pb1 = etable.grid_values[0]
    first_order = mu * d / pb1

    k_max = etable.k_max
    ratios = np.empty((max(k_max - 1, 0), grid.size), dtype=np.float64)
    ratio_errs = np.empty_like(ratios)
    for k in range(2, k_max + 1):
        num = etable.grid_values[k - 1]
        den = pb1 ** k
        ratios[k - 2] = num / den
        ratio_errs[k - 2] = (etable.grid_budgets[k - 1]
                             + k * np.abs(num) * etable.grid_budgets[0] / np.abs(pb1)
                             ) / np.abs(den)

    raw = mu * u - etable.partial_sum
    cs = constants or (asymptotic_constants(phi.alpha)
                       if phi.alpha is not None and 1.0 < phi.alpha < 2.0 else None)
    rs = cs.r_star if cs is not None else k_max
    rs = min(rs, k_max)
    partial_rs = np.where(grid >= 0, 1.0, 0.0) + etable.grid_values[:rs].sum(axis=0)
    raw_rs = mu * u - partial_rs
    e_star = raw_rs / pb1 ** rs
    e_err = (mu * ue + etable.grid_budgets[:rs].sum(axis=0)
             + rs * np.abs(raw_rs) * etable.grid_budgets[0] / np.abs(pb1)
             ) / np.abs(pb1) ** rs
    remainder = RemainderReport(n_grid=grid, e_star=e_star, e_star_err=e_err,
                                raw_remainder=raw)

    mu2_vals = None
    third = None
    if mu2_report is not None:
        if not np.array_equal(mu2_report.n_grid, grid):
            raise ValueError("mu2 grid does not align with the expansion grid")
        mu2_vals = mu2_report.values
        # In the boundary regime the squared-tail term and the smoothing
        # convolution each contribute one second-moment factor, so the
        # remainder beyond first order rides on twice the naive normalizer;
        # the trend of this quotient toward 1 is itself part of acceptance.
        phi_on_grid = np.array([phi.seq[int(n)] for n in grid])
        denom = -2.0 * phi_on_grid * mu2_vals / mu
        third = (d - pb1 / mu) / denom
    return DiagnosticsTable(n_grid=grid, u=u, u_err=ue, d=d,
                            first_order=first_order, ratios=ratios,
                            ratio_errs=ratio_errs, remainder=remainder,
                            constants=cs if cs is not None else
                            AsymptoticConstants(beta=float("nan"), r_star=k_max,
                                                c=(), gamma_values=()),
                            mu2_values=mu2_vals, third=third)

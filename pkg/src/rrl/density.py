"""Continuum renewal families checked through exact-cell lattice projection.

A step density on the line -- Pareto-type right part ``c x^{-(1+alpha)}`` on
``x >= x0``, exponential left part with rate ``eta`` and mass ``w`` -- is
projected onto the lattice ``h Z`` by integrating the density over the cells
``[(r - 1/2) h, (r + 1/2) h)``.  All cell masses have closed forms, so the
induced lattice law is *exact* (no quadrature), and the certified lattice
pipeline (folded spectral grid, backward differences, correction-term
recursion) runs on it unchanged.

Continuum read-outs are dimensional rescalings of lattice ones:

* renewal density          ``u(x) = u_lattice(n) / h``        at ``x = n h``
* difference density       ``Delta(x) = Delta_lattice(n)/h^2``
* correction-term tails    ``Phibar_{k,t}`` dimensionless, read at ``n = t/h``

Every family is run at a spacing pair ``(h, h/2)``; disagreement between the
two runs is an empirical bound on the discretization error, and the reported
diagnostics require the pair to agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from . import charfn
from ._cert import zeta_tail
from .expansion import ExpansionTable, PhiSeq, c_const, phibar
from .seqkit import TailModel, WindowSeq
from .steplaw import LawSpecError

__all__ = [
    "DensityFamily",
    "CellLaw",
    "GridRun",
    "ContDiagnostics",
    "project_cells",
    "discretize",
    "cont_diagnostics",
    "parse_density_spec",
    "load_density",
]

_EPS = float(np.finfo(np.float64).eps)

# ---------------------------------------------------------------------------
# continuum families


@dataclass(frozen=True)
class DensityFamily:
    """Two-sided step density with a heavy right part and a light left part.

    ``right_style`` selects the shape of the positive part sharing the total
    right mass ``1 - left_mass``:

    * ``"pareto"`` -- density ``c x^{-(1+alpha)}`` on ``x >= x0`` with ``c``
      fixed by normalization;
    * ``"point"``  -- all right mass concentrated at ``x0`` (degenerate
      control case used to validate the projection against closed-form
      means; no tail asymptotics are claimed for it).

    ``smoothing_width`` is metadata only: the shipped families have a
    transform in ``L^p`` already (``fhat_lp_exponent``), so no mollification
    is applied; the field records the width a triangular kernel *would* use.
    """

    alpha: Optional[float]
    x0: float
    left_rate: float
    left_mass: float
    right_style: str = "pareto"
    smoothing_width: float = 0.0

    def __post_init__(self):
        if self.right_style not in ("pareto", "point"):
            raise ValueError(f"unknown right_style {self.right_style!r}")
        if not (self.x0 > 0.0):
            raise ValueError("x0 must be positive")
        if not (self.left_rate > 0.0):
            raise ValueError("left_rate must be positive")
        if not (0.0 <= self.left_mass < 1.0):
            raise ValueError("left_mass must lie in [0, 1)")
        if self.right_style == "pareto":
            if self.alpha is None or not (1.0 < self.alpha <= 2.0):
                raise ValueError("pareto right part needs alpha in (1, 2]")
        if not (self.mu > 0.0):
            raise ValueError(f"family drifts the wrong way: mu = {self.mu:.6g} <= 0")
        # closed-form normalization audit: the pieces must sum to one exactly
        if self.right_style == "pareto":
            right = self.c * self.x0 ** (-self.alpha) / self.alpha
        else:
            right = self.right_mass
        if abs(right + self.left_mass - 1.0) > 1e-10:
            raise AssertionError("density does not integrate to 1 within 1e-10")

    @property
    def right_mass(self) -> float:
        return 1.0 - self.left_mass

    @property
    def c(self) -> float:
        """Right-density coefficient fixed by the mass split."""
        if self.right_style != "pareto":
            raise ValueError("point-style family has no density coefficient")
        return self.alpha * self.right_mass * self.x0 ** self.alpha

    @property
    def mu_plus(self) -> float:
        if self.right_style == "pareto":
            return self.c * self.x0 ** (1.0 - self.alpha) / (self.alpha - 1.0)
        return self.right_mass * self.x0

    @property
    def mu_minus(self) -> float:
        return -self.left_mass / self.left_rate

    @property
    def mu(self) -> float:
        return self.mu_plus + self.mu_minus

    @property
    def fhat_lp_exponent(self) -> float:
        """Exponent ``p`` with the transform in ``L^p`` (shipped families).

        The right part jumps at ``x0`` and the left part at 0, so the
        transform decays like ``1/|t|``: any ``p > 1`` works; ``p = 2`` is
        recorded, giving a convolution split depth of ``floor(p) + 2``.
        """
        return 2.0

    @property
    def split_depth(self) -> int:
        return int(math.floor(self.fhat_lp_exponent)) + 2

    def density(self, x) -> np.ndarray:
        """Pointwise density (the point style returns 0 off its atom)."""
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros_like(x)
        neg = x < 0.0
        out[neg] = self.left_mass * self.left_rate * np.exp(self.left_rate * x[neg])
        if self.right_style == "pareto":
            pos = x >= self.x0
            out[pos] = self.c * x[pos] ** (-1.0 - self.alpha)
        return out

    def right_tail(self, x) -> np.ndarray:
        """P(step > x) for x >= x0 (closed form)."""
        x = np.asarray(x, dtype=np.float64)
        if self.right_style == "pareto":
            return (self.c / self.alpha) * x ** (-self.alpha)
        return np.where(x < self.x0, self.right_mass, 0.0)


def parse_density_spec(text: str) -> DensityFamily:
    """Parse the key=value continuum-family grammar, naming bad lines."""
    keys = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise LawSpecError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key in keys:
            raise LawSpecError(f"line {lineno}: duplicate key {key!r}")
        keys[key] = (val.strip(), lineno)
    linemap = {key: lineno for key, (_, lineno) in keys.items()}

    def number(key, default=None):
        if key not in keys:
            if default is None:
                raise LawSpecError(f"missing required key {key!r}")
            return default
        val, lineno = keys.pop(key)
        try:
            return float(val)
        except ValueError as exc:
            raise LawSpecError(f"line {lineno}: {key} not numeric: {val!r}") from exc

    family, fam_line = keys.pop("family", (None, None))
    if family != "cont_power":
        where = f"line {fam_line}: " if fam_line else ""
        raise LawSpecError(f"{where}unsupported or missing family "
                           f"{family!r} (expected 'cont_power')")
    alpha = number("alpha")
    x0 = number("x0")
    left_rate = number("left_rate")
    left_mass = number("left_mass")
    smoothing = number("smoothing_width", 0.0)
    for key, (_, lineno) in keys.items():
        raise LawSpecError(f"line {lineno}: unknown key {key!r}")
    try:
        return DensityFamily(alpha=alpha, x0=x0, left_rate=left_rate,
                             left_mass=left_mass, smoothing_width=smoothing)
    except (ValueError, AssertionError) as exc:
        msg = str(exc)
        for key, lineno in linemap.items():
            if key in msg:
                raise LawSpecError(f"line {lineno}: {msg}") from exc
        raise LawSpecError(msg) from exc


def load_density(path) -> DensityFamily:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_density_spec(fh.read())


# ---------------------------------------------------------------------------
# exact cell projection


@dataclass(frozen=True)
class CellLaw:
    """Lattice law induced by integrating a family over cells of width h.

    Not a ``steplaw.StepLaw``: the cell masses are exact integrals, not of
    the pure-power or finite-support shapes that type encodes.  The same
    invariants are enforced here (unit mass, positive drift, aperiodicity on
    the sampled grid) and the spectral/recursion layers only ever consume
    the folded pmf and closed-form tails, which this type provides.
    """

    family: DensityFamily
    h: float
    rb: int                    # index of the cell containing x0
    q_rb: float                # its mass (boundary cell, partial integral)
    q_zero: float              # mass of cell 0 (left-part sliver, if any)
    c_eff: float               # lattice-side power coefficient c * h^{-alpha}
    eta_h: float               # left rate per lattice step
    k_cut: int                 # left cells are enumerated down to -k_cut
    mu: float
    mu_plus: float
    mu_minus: float
    mu_bracket: float          # certified half-width on mu from the zeta brackets

    @property
    def alpha(self) -> Optional[float]:
        return self.family.alpha

    def right_tail(self, r) -> np.ndarray:
        """Mass strictly above cell r (exact; r >= 0)."""
        r = np.asarray(r, dtype=np.float64)
        if self.family.right_style == "pareto":
            a = self.family.alpha
            full = self.family.right_mass
            return np.where(r >= self.rb,
                            (self.c_eff / a) * (r + 0.5) ** (-a),
                            full)
        return np.where(r >= self.rb, 0.0, self.family.right_mass)

    def left_cdf(self, r) -> np.ndarray:
        """Mass at or below cell r (exact; r < 0)."""
        r = np.asarray(r, dtype=np.float64)
        return self.family.left_mass * np.exp(self.eta_h * (r + 0.5))

    def cell_mass(self, r) -> np.ndarray:
        """Exact mass of individual cells (vectorized, for audits)."""
        r = np.asarray(r)
        out = np.zeros(r.shape, dtype=np.float64)
        w, eh = self.family.left_mass, self.eta_h
        neg = r < 0
        out[neg] = w * np.exp(eh * r[neg]) * (2.0 * math.sinh(eh / 2.0))
        out[r == 0] = self.q_zero
        out[r == self.rb] += self.q_rb
        if self.family.right_style == "pareto":
            a = self.family.alpha
            hi = r > self.rb
            rf = r[hi].astype(np.float64)
            out[hi] = (self.c_eff / a) * ((rf - 0.5) ** (-a) - (rf + 0.5) ** (-a))
        return out

    def fold(self, M: int) -> Tuple[np.ndarray, float]:
        """Exactly folded pmf ``q_res = sum_l q_{res + l M}`` plus a bound.

        The pure-power cells are folded through paired Hurwitz tails: the
        mass above lattice point ``y`` is ``(c_eff/alpha) y^{-alpha}``, so
        the folded cell mass at residue ``res`` is a difference of
        ``zeta_tail(alpha, .)`` values at the two cell edges, starting at
        the first image of ``res`` that lies past the boundary cell.
        """
        if M < (1 << 10) or (M & (M - 1)) != 0:
            raise ValueError(f"M must be a power of two >= 1024, got {M}")
        if self.rb + 1 >= M:
            raise ValueError("grid too coarse: boundary cell beyond the period")
        qf = np.zeros(M, dtype=np.float64)
        trunc = 0.0
        if self.family.right_style == "pareto":
            a = self.family.alpha
            res = np.arange(M, dtype=np.float64)
            # first folded image r = res + k M with r > rb
            shift = (res <= self.rb).astype(np.float64)
            zl, bl = zeta_tail(a, (res - 0.5) / M + shift)
            zr, br = zeta_tail(a, (res + 0.5) / M + shift)
            scale = (self.c_eff / a) * float(M) ** (-a)
            qf[:] = scale * (zl - zr)
            trunc += scale * float(np.sum(bl) + np.sum(br))
        qf[self.rb % M] += self.q_rb
        qf[0] += self.q_zero
        w, eh = self.family.left_mass, self.eta_h
        if w > 0.0:
            k = np.arange(1, self.k_cut + 1, dtype=np.float64)
            lm = w * np.exp(-eh * k) * (2.0 * math.sinh(eh / 2.0))
            np.add.at(qf, (-np.arange(1, self.k_cut + 1)) % M, lm)
            rem = w * math.exp(eh * (-self.k_cut + 0.5))   # mass below -k_cut
            qf[(-self.k_cut) % M] += rem
            trunc += 2.0 * rem
        return qf, trunc

    def validate(self) -> None:
        """Induced-law invariants, mirroring the lattice step-law checks."""
        if not (self.mu > self.mu_bracket):
            raise ValueError(f"induced lattice law has mu = {self.mu:.6g} <= 0")
        r_probe = np.arange(-min(self.k_cut, 4000), self.rb + 4000)
        masses = self.cell_mass(r_probe)
        if np.any(masses < -1e-15):
            raise AssertionError("negative cell mass")
        tail_above = float(self.right_tail(np.asarray(r_probe[-1]))) if \
            self.family.right_style == "pareto" else 0.0
        below = float(self.left_cdf(np.asarray(r_probe[0] - 1))) if \
            self.family.left_mass > 0 else 0.0
        total = float(masses.sum()) + tail_above + below
        if abs(total - 1.0) > 1e-10:
            raise AssertionError(
                f"cell masses sum to {total!r}, off 1 by more than 1e-10")


def _project(family: DensityFamily, h: float) -> CellLaw:
    """Exact cell masses and moments of the induced lattice law."""
    x0, w, eta = family.x0, family.left_mass, family.left_rate
    eta_h = eta * h
    # cell rb covers [(rb-1/2)h, (rb+1/2)h) and contains x0
    rb = int(math.floor(x0 / h + 0.5))
    if family.right_style == "pareto":
        a = family.alpha
        c_eff = family.c * h ** (-a)
        # partial integral of the right density over the boundary cell
        q_rb = (c_eff / a) * (float(x0 / h) ** (-a) - (rb + 0.5) ** (-a))
        # right mean by Abel summation over exact cell tails:
        #   sum_{r>rb} r q_r = (rb+1) A_{rb+1} + sum_{r>=rb+2} A_r,
        # with A_r = (c_eff/alpha)(r-1/2)^{-alpha} the mass above the lower
        # cell edge; the remaining sum is a Hurwitz tail.
        a_first = (c_eff / a) * (rb + 0.5) ** (-a)
        zt, zb = zeta_tail(a, rb + 1.5)
        mu_plus = rb * q_rb + (rb + 1) * a_first + (c_eff / a) * float(zt)
        mu_bracket = (c_eff / a) * float(zb)
    else:
        c_eff = 0.0
        q_rb = family.right_mass
        mu_plus = rb * q_rb
        mu_bracket = 0.0
    q_zero = w * (1.0 - math.exp(-eta_h / 2.0))
    # left cells down to where their mass underflows float64
    k_cut = int(math.ceil(745.0 / eta_h)) + 2 if w > 0.0 else 1
    q_geom = math.exp(-eta_h)
    mu_minus = -2.0 * w * math.sinh(eta_h / 2.0) * q_geom / (1.0 - q_geom) ** 2
    law = CellLaw(family=family, h=h, rb=rb, q_rb=q_rb, q_zero=q_zero,
                  c_eff=c_eff, eta_h=eta_h, k_cut=k_cut,
                  mu=mu_plus + mu_minus, mu_plus=mu_plus, mu_minus=mu_minus,
                  mu_bracket=mu_bracket)
    law.validate()
    return law


def project_cells(family: DensityFamily, h: float) -> CellLaw:
    """Public wrapper: validated induced lattice law at spacing ``h``.

    The spacing must resolve the right-part onset: ``h <= x0/8`` admits the
    standard refinement pair ``(0.1 x0, 0.05 x0)``.
    """
    if not (h <= family.x0 / 8.0 + 1e-12):
        raise ValueError(f"h={h} too coarse: need h <= x0/8 = {family.x0 / 8.0}")
    return _project(family, h)


# ---------------------------------------------------------------------------
# single-spacing run


@dataclass(frozen=True)
class GridRun:
    """All lattice-pipeline outputs for one family at one spacing.

    Arrays are aligned with ``t_grid`` (continuum abscissae) and ``n_grid``
    (their lattice indices ``round(t/h)``).  ``ratio_k[k-1]`` holds
    ``Phibar_k / Phibar_1^k`` rows for ``k = 1..k_max`` (the first row is
    identically 1).  ``tail_ratio`` is the dimensionless difference ratio
    ``mu_lat^2 Delta_lat(n) / Fbar(t)``, whose limit is exactly 1; in
    continuum terms it is ``(Delta(t)/phi^+(t)) / (1/mu)``.
    """

    family: DensityFamily
    h: float
    M: int
    law: CellLaw
    k_max: int
    t_grid: np.ndarray
    n_grid: np.ndarray
    phibar_grid: np.ndarray        # (k_max, len(grid)) correction-term tails
    phibar_budgets: np.ndarray
    ratio_k: np.ndarray            # (k_max, len(grid))
    delta_lat: np.ndarray          # wrap-corrected lattice differences
    delta_err: np.ndarray          # per-point certified bounds on delta_lat
    tail_ratio: np.ndarray
    mass_residual: float
    aperiodicity_margin: float
    etable: Optional[ExpansionTable] = None

    @property
    def mu_lat(self) -> float:
        return self.law.mu

    @property
    def phibar1(self) -> np.ndarray:
        return self.phibar_grid[0]

    @property
    def ratio2(self) -> np.ndarray:
        if self.k_max < 2:
            raise ValueError("run was built with k_max < 2")
        return self.ratio_k[1]

    def u_density_limit(self) -> float:
        """Continuum renewal-density limit 1/mu implied by the lattice run."""
        return 1.0 / (self.h * self.mu_lat)


def _phi_window(law: CellLaw, n_top: int, k_max: int) -> PhiSeq:
    """Smoothing sequence of the induced law on a certified window.

    Values are closed forms (tails over exact cell masses), so per-entry
    budgets are float-rounding only.  The window is sized so every grid
    point survives the per-level shrink of the recursion.
    """
    fam = law.family
    a = fam.alpha
    mu = law.mu
    lo = -(law.k_cut + 2)
    slack = max(2000, n_top // 50)
    hi = n_top + (k_max - 1) * (-lo) + slack
    r = np.arange(lo, hi + 1)
    vals = np.empty(r.size, dtype=np.float64)
    pos = r >= 0
    vals[pos] = law.right_tail(r[pos]) / mu
    vals[~pos] = -law.left_cdf(r[~pos]) / mu
    right_model = TailModel(a, 1.05 * law.c_eff / (a * mu))
    # steep power envelope dominating the exponential left branch
    kk = np.arange(1, law.k_cut + 1, dtype=np.float64)
    c12 = float(np.max((fam.left_mass / mu)
                       * np.exp(-law.eta_h * (kk - 0.5)) * kk ** 12))
    left_model = TailModel(12.0, 1.05 * c12) if fam.left_mass > 0 else None
    seq = WindowSeq(lo, hi, vals, right_model=right_model,
                    left_model=left_model, err_budget=16.0 * _EPS)
    return PhiSeq(seq=seq, mu=mu, mu_plus=law.mu_plus, mu_minus=law.mu_minus,
                  alpha=a, c_right=law.c_eff, support_lo=None)


def discretize(family: DensityFamily, h: float, *, M: Optional[int] = None,
               t_grid: Optional[Sequence[float]] = None,
               k_max: int = 2) -> GridRun:
    """Project, fold, invert and run the correction recursion at spacing h.

    ``t_grid`` entries are continuum abscissae; each must land within half a
    cell of a lattice point (the defaults do).  ``M`` defaults to ``2^22``;
    the largest lattice index must stay below ``M/2`` so that wrap images
    of the difference sequence remain subtractable through the tail model.
    """
    law = project_cells(family, h)
    if M is None:
        M = 1 << 22
    if family.right_style == "point":
        # degenerate control family: spectral layer only (mean/aperiodicity
        # audits); no tail asymptotics exist to diagnose
        qf, trunc = law.fold(M)
        mass_resid = abs(float(qf.sum()) - 1.0)
        phat = np.fft.rfft(qf)
        margin = float(1.0 - np.max(np.abs(phat[1:])))
        empty = np.empty((0,))
        return GridRun(family=family, h=h, M=M, law=law, k_max=0,
                       t_grid=empty, n_grid=np.empty((0,), dtype=np.int64),
                       phibar_grid=np.empty((0, 0)),
                       phibar_budgets=np.empty((0, 0)),
                       ratio_k=np.empty((0, 0)), delta_lat=empty,
                       delta_err=empty, tail_ratio=empty,
                       mass_residual=mass_resid, aperiodicity_margin=margin)

    if t_grid is None:
        t_grid = (1e3, 1e4, 1e5)
    t_arr = np.asarray(sorted(float(t) for t in t_grid))
    n_arr = np.asarray([int(round(t / h)) for t in t_arr], dtype=np.int64)
    if np.any(np.abs(n_arr * h - t_arr) > 0.5 * h + 1e-9):
        raise ValueError("t_grid point does not land on the spacing-h lattice")
    n_top = int(n_arr[-1])
    if 2 * n_top > M:
        raise ValueError(f"n={n_top} beyond M/2={M // 2}: wrap images of the "
                         "difference tail would not be subtractable")

    # --- spectral layer on the exactly folded pmf
    qf, trunc = law.fold(M)
    mass_resid = abs(float(qf.sum()) - 1.0)
    phat = np.fft.rfft(qf)
    fft_fp = 4.0 * _EPS * math.log2(M) * float(np.abs(qf).sum())
    grid = charfn.CharFnGrid(M=M, mu=law.mu, phat=phat,
                             trunc_bound=trunc + fft_fp + mass_resid,
                             p_cut=None, n_cut=None, alpha=family.alpha)
    margin = grid.aperiodicity_margin()
    if margin <= 0.0:
        raise ValueError("induced lattice law is (near-)periodic")
    grid = charfn.derive(grid, k_max=0)

    # --- backward differences with wrap-image subtraction
    dt_full = np.fft.irfft(grid.deltahat, M)
    mu = law.mu
    a = family.alpha
    fp_irfft = 4.0 * _EPS * math.log2(M) * float(np.mean(np.abs(grid.deltahat)))
    els = np.arange(1, 65, dtype=np.float64)
    delta_lat = np.empty(n_arr.size)
    delta_err = np.empty(n_arr.size)
    for j, n in enumerate(n_arr):
        d = float(dt_full[int(n)])
        imgs = law.right_tail(n + els * M) / mu ** 2
        x = float(n) + 64.5 * M
        em_tail = (law.c_eff / (a * mu ** 2)) * x ** (1.0 - a) / ((a - 1.0) * M)
        wrap = float(np.sum(imgs)) + em_tail
        delta_lat[j] = d - wrap
        # model headroom on the subtracted images: the first-order tail
        # model is relatively accurate to O(Phibar_1(n+M)), far below 10%
        delta_err[j] = 0.10 * wrap + fp_irfft + grid.trunc_bound

    # --- correction-term recursion on the closed-form smoothing sequence
    phi = _phi_window(law, n_top, k_max)
    etable = phibar(phi, k_max, n_arr)
    gv, gb = etable.grid_values, etable.grid_budgets
    ratio_k = np.empty_like(gv)
    for k in range(1, k_max + 1):
        ratio_k[k - 1] = gv[k - 1] / gv[0] ** k

    # dimensionless difference ratio against the *continuum* tail at t = n h:
    # q(t) = (Delta(t)/phi^+(t)) / (1/mu) = mu_lat^2 Delta_lat / Fbar_cont
    fbar_cont = (law.c_eff / a) * n_arr.astype(np.float64) ** (-a)
    tail_ratio = mu ** 2 * delta_lat / fbar_cont

    return GridRun(family=family, h=h, M=M, law=law, k_max=k_max,
                   t_grid=t_arr, n_grid=n_arr, phibar_grid=gv,
                   phibar_budgets=gb, ratio_k=ratio_k, delta_lat=delta_lat,
                   delta_err=delta_err, tail_ratio=tail_ratio, mass_residual=mass_resid,
                   aperiodicity_margin=margin, etable=etable)


# ---------------------------------------------------------------------------
# refinement-pair diagnostics


@dataclass(frozen=True)
class ContDiagnostics:
    """Continuum diagnostic table, every value double-reported at (h, h/2).

    ``c2_target`` is the correction-constant prediction ``c(2, alpha - 1)``
    shared with the lattice diagnostics.  Pair gaps are ``|a/b - 1|``
    maxima over the t-grid; construction fails if the runs disagree by more
    than 5 percent anywhere (under-resolved spacing).
    """

    t_grid: np.ndarray
    phibar1_h: np.ndarray
    phibar1_h2: np.ndarray
    ratio2_h: np.ndarray
    ratio2_h2: np.ndarray
    tail_ratio_h: np.ndarray
    tail_ratio_h2: np.ndarray
    c2_target: float
    h_pair: Tuple[float, float]

    @property
    def phibar1_pair_gap(self) -> float:
        return float(np.max(np.abs(self.phibar1_h / self.phibar1_h2 - 1.0)))

    @property
    def ratio2_pair_gap(self) -> float:
        return float(np.max(np.abs(self.ratio2_h / self.ratio2_h2 - 1.0)))

    def rows(self):
        """Per-t rows for CSV emission (t, then each value at h and h/2)."""
        for j, t in enumerate(self.t_grid):
            yield (float(t), float(self.phibar1_h[j]), float(self.phibar1_h2[j]),
                   float(self.ratio2_h[j]), float(self.ratio2_h2[j]),
                   float(self.tail_ratio_h[j]), float(self.tail_ratio_h2[j]))


def cont_diagnostics(run: GridRun, run_half: GridRun) -> ContDiagnostics:
    """Pair the two refinement runs into the continuum diagnostic table."""
    if run.family != run_half.family:
        raise ValueError("refinement pair built from different families")
    if not math.isclose(run.h, 2.0 * run_half.h, rel_tol=1e-12):
        raise ValueError(f"spacings {run.h} and {run_half.h} are not a "
                         "refinement pair (factor 2)")
    if run.t_grid.size == 0 or run.t_grid.size != run_half.t_grid.size or \
            np.any(np.abs(run.t_grid - run_half.t_grid) > 1e-9):
        raise ValueError("refinement pair evaluated on different t-grids")
    if run.k_max < 2 or run_half.k_max < 2:
        raise ValueError("both runs need k_max >= 2 for the ratio table")
    diag = ContDiagnostics(
        t_grid=run.t_grid.copy(),
        phibar1_h=run.phibar1.copy(), phibar1_h2=run_half.phibar1.copy(),
        ratio2_h=run.ratio2.copy(), ratio2_h2=run_half.ratio2.copy(),
        tail_ratio_h=run.tail_ratio.copy(), tail_ratio_h2=run_half.tail_ratio.copy(),
        c2_target=c_const(2, run.family.alpha - 1.0),
        h_pair=(run.h, run_half.h))
    if diag.phibar1_pair_gap > 0.05 or diag.ratio2_pair_gap > 0.05:
        raise ValueError(
            f"refinement disagreement beyond 5%: Phibar_1 gap "
            f"{diag.phibar1_pair_gap:.3g}, ratio_2 gap "
            f"{diag.ratio2_pair_gap:.3g} (spacing under-resolved)")
    return diag

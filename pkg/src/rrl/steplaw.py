"""Lattice step laws with exact tails, moments, and sampling support.

A step law is the increment distribution of the random walk: a heavy power
right tail ``p_n = c_right * n^{-(1+alpha)}`` for ``n >= 1`` together with a
light left part (finitely many atoms, or a geometric tail), or alternatively
an explicit finite-support law.  All pmf values, tail functions and moments
are evaluated from closed forms with certified remainder brackets — nothing
here is a float estimate of unknown quality.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._cert import zeta_tail

__all__ = [
    "LeftSpec",
    "StepLaw",
    "MomentSummary",
    "ChernoffCertificate",
    "LawSpecError",
    "build_power_law",
    "build_finite_law",
    "law_eval",
    "moments",
    "chernoff_bound",
    "sample",
    "parse_law_spec",
    "load_law",
    "sampler_tables",
]

_DEFAULT_N_STORE = 4096


class LawSpecError(ValueError):
    """Raised for malformed law spec files; message names the offending line."""


@dataclass(frozen=True)
class LeftSpec:
    """Left-part description: finite atoms and/or a geometric tail.

    ``atoms`` maps negative sites to masses.  A geometric tail places mass
    ``geom_mass * (1-q) * q^{k-1}`` at ``-k`` for ``k >= 1``.
    """

    atoms: tuple = ()              # ((site, mass), ...) with site < 0
    geom_q: float = 0.0
    geom_mass: float = 0.0

    @property
    def total_mass(self) -> float:
        return sum(m for _, m in self.atoms) + self.geom_mass

    @property
    def empty(self) -> bool:
        return not self.atoms and self.geom_mass == 0.0


@dataclass(frozen=True)
class MomentSummary:
    """First moments with certified absolute remainder bounds."""

    mu: float
    mu_plus: float
    mu_minus: float
    frac_moment: float
    delta: float
    mu_bound: float
    frac_bound: float


@dataclass(frozen=True)
class ChernoffCertificate:
    """Left-deviation bound: P(S_k <= m) <= point_bound for k = n_steps.

    ``series_bound`` additionally bounds ``sum_{k >= n_steps} P(S_k <= m)``
    (valid since the per-step factor ``mgf < 1`` is constant in k).
    """

    point_bound: float
    series_bound: float
    lam: float
    mgf: float


@dataclass(frozen=True)
class StepLaw:
    """Immutable lattice step law.

    ``family`` is ``"power"`` (heavy right tail) or ``"finite"`` (explicit
    atoms only).  ``stored_lo``/``stored_pmf`` cache the pmf on a window for
    fast vectorised access; evaluation outside the window falls back to the
    closed forms.
    """

    family: str
    alpha: Optional[float]
    c_right: float
    right_mass: float
    left: LeftSpec
    finite_atoms: tuple = ()       # ((site, mass), ...) for family="finite"
    n_store: int = _DEFAULT_N_STORE
    norm_residual: float = 0.0
    stored_lo: int = 0
    stored_pmf: np.ndarray = field(default=None, repr=False)

    # -- pmf / tails ------------------------------------------------------

    def pmf(self, n):
        """p_n, exact, vectorised over integer n."""
        n = np.asarray(n)
        out = np.zeros(n.shape, dtype=np.float64)
        if self.family == "finite":
            for site, mass in self.finite_atoms:
                out = np.where(n == site, mass, out)
            return out if out.ndim else float(out)
        pos = n >= 1
        nf = np.where(pos, n, 1).astype(np.float64)
        out = np.where(pos, self.c_right * nf ** (-(1.0 + self.alpha)), 0.0)
        for site, mass in self.left.atoms:
            out = np.where(n == site, out + mass, out)
        if self.left.geom_mass > 0.0:
            neg = n <= -1
            k = np.where(neg, -n, 1).astype(np.float64)
            q = self.left.geom_q
            out = np.where(neg, out + self.left.geom_mass * (1.0 - q) * q ** (k - 1.0), out)
        return out if out.ndim else float(out)

    def right_tail(self, n):
        """F-bar(n) = P(X > n), exact, vectorised (all integer n)."""
        n = np.asarray(n)
        if self.family == "finite":
            out = np.zeros(n.shape, dtype=np.float64)
            for site, mass in self.finite_atoms:
                out = out + np.where(n < site, mass, 0.0)
            return out if out.ndim else float(out)
        nf = np.asarray(n, dtype=np.float64)
        v, _ = zeta_tail(1.0 + self.alpha, np.maximum(nf, 0.0) + 1.0)
        out = np.where(nf >= 0, self.c_right * v, 1.0 - self._left_cdf(n))
        return out if out.ndim else float(out)

    def _left_cdf(self, n):
        """P(X <= n) for n <= -1 (0 for n >= 0 entries, fixed up by callers)."""
        n = np.asarray(n)
        out = np.zeros(n.shape, dtype=np.float64)
        for site, mass in self.left.atoms:
            out = out + np.where(n >= site, mass, 0.0)
        if self.left.geom_mass > 0.0:
            q = self.left.geom_q
            neg = n <= -1
            k = np.where(neg, -n, 1).astype(np.float64)
            out = out + np.where(neg, self.left.geom_mass * q ** (k - 1.0), 0.0)
        return np.where(n <= -1, out, 0.0)

    def left_tail(self, n):
        """F(n) = P(X <= n) for n <= -1, exact; 0 above the left support."""
        n = np.asarray(n)
        if self.family == "finite":
            out = np.zeros(n.shape, dtype=np.float64)
            for site, mass in self.finite_atoms:
                out = out + np.where((n >= site) & (n <= -1), mass, 0.0)
            return out if out.ndim else float(out)
        out = self._left_cdf(n)
        return out if out.ndim else float(out)

    # -- support metadata -------------------------------------------------

    @property
    def support_lo(self) -> Optional[int]:
        """Leftmost support site; None for an unbounded (geometric) left."""
        if self.family == "finite":
            return min(s for s, _ in self.finite_atoms)
        if self.left.geom_mass > 0.0:
            return None
        if self.left.atoms:
            return min(s for s, _ in self.left.atoms)
        return 1

    @property
    def span(self) -> int:
        """gcd of support offsets; 1 means aperiodic on the integers."""
        if self.family == "power":
            return 1
        sites = sorted(s for s, _ in self.finite_atoms)
        g = 0
        for s in sites[1:]:
            g = math.gcd(g, s - sites[0])
        return g if g else abs(sites[0])


# ---------------------------------------------------------------------------
# constructors


def _store_window(family, alpha, c_right, left, finite_atoms, n_store):
    lo = -n_store
    n = np.arange(lo, n_store + 1)
    tmp = StepLaw(family=family, alpha=alpha, c_right=c_right, right_mass=0.0,
                  left=left, finite_atoms=finite_atoms, n_store=n_store,
                  stored_lo=lo, stored_pmf=np.zeros(1))
    return lo, tmp.pmf(n)


def build_power_law(alpha: float, right_mass: float, left: LeftSpec,
                    n_store: int = _DEFAULT_N_STORE) -> StepLaw:
    """Construct the power-tail law p_n = (right_mass/zeta(1+alpha)) n^{-(1+alpha)}.

    Raises ``ValueError`` if the masses do not normalise or the resulting
    drift is nonpositive.
    """
    if not (1.0 < alpha <= 2.0):
        raise ValueError(f"alpha must lie in (1, 2], got {alpha}")
    if not (0.0 < right_mass <= 1.0):
        raise ValueError(f"right_mass must lie in (0, 1], got {right_mass}")
    if isinstance(left, str):
        left = _parse_left(left)
    total = right_mass + left.total_mass
    if abs(total - 1.0) > 1e-12:
        raise ValueError(f"masses must sum to 1, got {total!r}")
    if left.geom_mass > 0.0 and not (0.0 < left.geom_q < 1.0):
        raise ValueError(f"geometric ratio must lie in (0,1), got {left.geom_q}")
    z, zb = zeta_tail(1.0 + alpha, 1.0)
    c_right = right_mass / z
    resid = c_right * zb + 1e-16
    lo, pmf = _store_window("power", alpha, c_right, left, (), n_store)
    law = StepLaw(family="power", alpha=alpha, c_right=c_right,
                  right_mass=right_mass, left=left, n_store=n_store,
                  norm_residual=resid, stored_lo=lo, stored_pmf=pmf)
    mom = moments(law)
    if mom.mu <= 0.0:
        raise ValueError(f"law has nonpositive drift mu={mom.mu:.6g}")
    return law


def build_finite_law(atoms: dict) -> StepLaw:
    """Construct a finite-support law from ``{site: mass}``."""
    items = tuple(sorted((int(s), float(m)) for s, m in atoms.items()))
    total = sum(m for _, m in items)
    if abs(total - 1.0) > 1e-12:
        raise ValueError(f"atom masses must sum to 1, got {total!r}")
    if any(m < 0 for _, m in items):
        raise ValueError("atom masses must be nonnegative")
    lo_site = min(s for s, _ in items)
    hi_site = max(s for s, _ in items)
    n_store = max(abs(lo_site), abs(hi_site), 8)
    left = LeftSpec()
    lo, pmf = _store_window("finite", None, 0.0, left, items, n_store)
    law = StepLaw(family="finite", alpha=None, c_right=0.0, right_mass=0.0,
                  left=left, finite_atoms=items, n_store=n_store,
                  norm_residual=0.0, stored_lo=lo, stored_pmf=pmf)
    mom = moments(law)
    if mom.mu <= 0.0:
        raise ValueError(f"law has nonpositive drift mu={mom.mu:.6g}")
    return law


# ---------------------------------------------------------------------------
# operations


def law_eval(law: StepLaw, n: int):
    """Return ``(pmf, right_tail, left_tail)`` at integer ``n``."""
    return (float(law.pmf(n)),
            float(law.right_tail(n)),
            float(law.left_tail(-abs(n))))


def moments(law: StepLaw, delta: Optional[float] = None) -> MomentSummary:
    """Certified mean decomposition and fractional moment E|X|^{1+delta}.

    ``delta`` defaults to ``(alpha-1)/2`` for power laws (any positive value
    works for finite laws, where all moments are exact finite sums).
    """
    if law.family == "finite":
        mu_p = sum(s * m for s, m in law.finite_atoms if s > 0)
        mu_m = sum(s * m for s, m in law.finite_atoms if s < 0)
        d = 0.5 if delta is None else delta
        frac = sum(abs(s) ** (1.0 + d) * m for s, m in law.finite_atoms)
        return MomentSummary(mu=mu_p + mu_m, mu_plus=mu_p, mu_minus=mu_m,
                             frac_moment=frac, delta=d,
                             mu_bound=1e-15, frac_bound=1e-15)
    alpha = law.alpha
    if delta is None:
        delta = (alpha - 1.0) / 2.0
    if not (0.0 < delta < alpha - 1.0):
        raise ValueError(f"delta must lie in (0, alpha-1), got {delta}")
    zp, zpb = zeta_tail(alpha, 1.0)
    mu_p = law.c_right * zp
    zf, zfb = zeta_tail(alpha - delta, 1.0)
    frac = law.c_right * zf
    frac_b = law.c_right * zfb
    mu_m = 0.0
    for site, mass in law.left.atoms:
        mu_m += site * mass
        frac += abs(site) ** (1.0 + delta) * mass
    if law.left.geom_mass > 0.0:
        q = law.left.geom_q
        mu_m -= law.left.geom_mass / (1.0 - q)
        s_frac, s_b = _geom_frac_moment(q, 1.0 + delta)
        frac += law.left.geom_mass * s_frac
        frac_b += law.left.geom_mass * s_b
    return MomentSummary(mu=mu_p + mu_m, mu_plus=mu_p, mu_minus=mu_m,
                         frac_moment=frac, delta=delta,
                         mu_bound=law.c_right * zpb + 1e-15,
                         frac_bound=frac_b + 1e-15)


def _geom_frac_moment(q: float, p: float):
    """sum_{k>=1} k^p (1-q) q^{k-1} with a certified geometric tail bound."""
    acc = 0.0
    k = 1
    while True:
        term = k ** p * (1.0 - q) * q ** (k - 1)
        acc += term
        # for k >= K the ratio term_{k+1}/term_k <= q * ((k+1)/k)^p
        ratio = q * ((k + 1.0) / k) ** p
        if ratio < 1.0 and term * ratio / (1.0 - ratio) < 1e-16 * acc:
            return acc, term * ratio / (1.0 - ratio) + 1e-16 * acc
        k += 1
        if k > 100000:
            raise RuntimeError("geometric fractional moment failed to converge")


def _mgf_minus(law: StepLaw, lam: float) -> float:
    """Upper bound on M(lam) = E exp(-lam X); +inf when the left part diverges.

    The right power part is summed explicitly to a cutoff and the remainder
    is added as ``exp(-lam (N+1)) * sum_{n>N} n^{-(1+alpha)}``, so the return
    value over-counts slightly and any certificate built from it stays valid.
    """
    if law.family == "finite":
        return sum(m * math.exp(-lam * s) for s, m in law.finite_atoms)
    N = int(min(1_000_000, max(20_000, 50.0 / max(lam, 1e-12))))
    n = np.arange(1, N + 1, dtype=np.float64)
    acc = float(law.c_right * np.sum(n ** (-(1.0 + law.alpha)) * np.exp(-lam * n)))
    zt, ztb = zeta_tail(1.0 + law.alpha, float(N + 1))
    acc += law.c_right * (zt + ztb) * math.exp(-lam * (N + 1))
    for site, mass in law.left.atoms:
        acc += mass * math.exp(-lam * site)
    if law.left.geom_mass > 0.0:
        q = law.left.geom_q
        if q * math.exp(lam) >= 1.0:
            return math.inf
        acc += law.left.geom_mass * (1.0 - q) * math.exp(lam) / (1.0 - q * math.exp(lam))
    return acc


def chernoff_bound(law: StepLaw, m: int, n_steps: int) -> ChernoffCertificate:
    """Exponential bound on P(S_{n_steps} <= m) for positive-drift laws.

    Minimises ``exp(lam*m) * M(lam)^n_steps`` over a 64-point logarithmic
    lambda grid, ``lam_max = 1`` for atomic left parts and ``-ln(q)/2`` for a
    geometric left tail.  Raises ``RuntimeError`` if no grid point certifies
    ``M(lam) < 1``.
    """
    if law.family == "power" and law.left.geom_mass > 0.0:
        lam_max = -math.log(law.left.geom_q) / 2.0
    else:
        lam_max = 1.0
    lams = np.exp(np.linspace(math.log(lam_max) - 6.0 * math.log(10.0),
                              math.log(lam_max), 64))
    best = None
    for lam in lams:
        mgf = _mgf_minus(law, float(lam))
        if mgf >= 1.0:
            continue
        log_pt = lam * m + n_steps * math.log(mgf)
        pt = math.exp(log_pt) if log_pt < 700 else math.inf
        if best is None or pt < best.point_bound:
            best = ChernoffCertificate(point_bound=pt,
                                       series_bound=pt / (1.0 - mgf),
                                       lam=float(lam), mgf=mgf)
    if best is None:
        raise RuntimeError("no lambda with M(lambda) < 1; left tail too heavy")
    return best


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class SamplerTables:
    """Inverse-CDF tables: explicit window plus power-tail rejection constants.

    The window covers every site with index ``< tail_cut``; a uniform in
    ``[0, 1)`` below ``cdf[-1]`` is inverted by binary search, above it the
    power tail ``> tail_cut`` is sampled by rounding a continuous power
    proposal and accepting against the exact pmf (acceptance close to 1).
    """

    sites: np.ndarray              # int64, ascending
    cdf: np.ndarray                # float64, cdf over sites
    tail_cut: int                  # power tail sampled for n > tail_cut
    tail_mass: float
    alpha: float
    c_right: float
    envelope_c: float              # rejection envelope scale


def sampler_tables(law: StepLaw, tail_cut: int = _DEFAULT_N_STORE) -> SamplerTables:
    if law.family == "finite":
        sites = np.array([s for s, _ in law.finite_atoms], dtype=np.int64)
        masses = np.array([m for _, m in law.finite_atoms], dtype=np.float64)
        order = np.argsort(sites)
        cdf = np.cumsum(masses[order])
        cdf[-1] = 1.0
        return SamplerTables(sites=sites[order], cdf=cdf, tail_cut=0,
                             tail_mass=0.0, alpha=2.0, c_right=0.0,
                             envelope_c=1.0)
    # left sites: atoms, or geometric truncated where the remainder is below
    # float resolution (the final cell absorbs the remainder exactly)
    left_sites, left_masses = [], []
    for site, mass in law.left.atoms:
        left_sites.append(site)
        left_masses.append(mass)
    if law.left.geom_mass > 0.0:
        q = law.left.geom_q
        k_max = max(8, int(math.ceil(-80.0 / math.log(q))))
        rem = law.left.geom_mass
        for k in range(1, k_max):
            m = law.left.geom_mass * (1.0 - q) * q ** (k - 1)
            left_sites.append(-k)
            left_masses.append(m)
            rem -= m
        left_sites.append(-k_max)
        left_masses.append(rem)   # exact remainder, < 1e-24 of distortion
    n = np.arange(1, tail_cut + 1)
    sites = np.concatenate([np.array(sorted(left_sites), dtype=np.int64), n])
    masses = np.concatenate([
        np.array([m for _, m in sorted(zip(left_sites, left_masses))]),
        law.c_right * n.astype(np.float64) ** (-(1.0 + law.alpha)),
    ])
    tail_mass = law.c_right * zeta_tail(1.0 + law.alpha, tail_cut + 1.0)[0]
    cdf = np.cumsum(masses)
    envelope_c = (law.c_right / law.alpha) * (1.0 + 0.5 / tail_cut) ** (1.0 + law.alpha)
    return SamplerTables(sites=sites, cdf=cdf, tail_cut=tail_cut,
                         tail_mass=tail_mass, alpha=law.alpha,
                         c_right=law.c_right, envelope_c=envelope_c)


def sample(law: StepLaw, rng: np.random.Generator, size: int = 1,
           tables: Optional[SamplerTables] = None) -> np.ndarray:
    """Draw ``size`` steps using a counter-based numpy generator.

    Window sites by inverse CDF; the analytic power tail by rounding a
    continuous power-law proposal with an acceptance correction, so the
    sampled law is exact (up to float resolution), not truncated.
    """
    t = tables if tables is not None else sampler_tables(law)
    u = rng.random(size)
    out = np.empty(size, dtype=np.int64)
    in_win = u < t.cdf[-1]
    idx = np.searchsorted(t.cdf, u[in_win], side="right")
    out[in_win] = t.sites[np.minimum(idx, len(t.sites) - 1)]
    n_tail = int(np.sum(~in_win))
    if n_tail:
        out[~in_win] = _sample_power_tail(t, rng, n_tail)
    return out


def _sample_power_tail(t: SamplerTables, rng: np.random.Generator, size: int):
    a = t.alpha
    base = t.tail_cut + 0.5
    res = np.empty(size, dtype=np.int64)
    todo = np.arange(size)
    while todo.size:
        y = base * rng.random(todo.size) ** (-1.0 / a)
        n = np.floor(y + 0.5)
        cell = t.envelope_c * ((n - 0.5) ** (-a) - (n + 0.5) ** (-a))
        p_n = t.c_right * n ** (-(1.0 + a))
        acc = rng.random(todo.size) * cell <= p_n
        res[todo[acc]] = n[acc].astype(np.int64)
        todo = todo[~acc]
    return res


# ---------------------------------------------------------------------------
# law spec files


_ATOMS_RE = re.compile(r"^atoms:\(([^)]*)\)$")
_GEOM_RE = re.compile(r"^geom:\(q=([^,]+),mass=([^)]+)\)$")


def parse_law_spec(text: str) -> StepLaw:
    """Parse the key=value law grammar; raise LawSpecError naming bad lines."""
    keys = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise LawSpecError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key in keys:
            raise LawSpecError(f"line {lineno}: duplicate key {key!r}")
        keys[key] = (val, lineno)
    linemap = {key: lineno for key, (_, lineno) in keys.items()}

    def take(key, default=None):
        if key in keys:
            return keys.pop(key)
        return default, None

    def number(key, conv):
        val, lineno = take(key)
        if val is None:
            raise LawSpecError(f"missing required key {key!r}")
        try:
            return conv(val)
        except ValueError as exc:
            raise LawSpecError(f"line {lineno}: {key} not numeric: {val!r}") from exc

    family, fam_line = take("family")
    if family != "power":
        where = f"line {fam_line}: " if fam_line else ""
        raise LawSpecError(
            f"{where}unsupported or missing family {family!r} (expected 'power')")
    alpha = number("alpha", float)
    right_mass = number("right_mass", float)
    left_raw, left_line = take("left", "")
    n_store = _DEFAULT_N_STORE
    if "n_store" in keys:
        n_store = number("n_store", int)
    for key, (_, lineno) in keys.items():
        raise LawSpecError(f"line {lineno}: unknown key {key!r}")
    try:
        left = _parse_left(left_raw)
    except LawSpecError as exc:
        raise LawSpecError(f"line {left_line}: {exc}") from exc
    try:
        return build_power_law(alpha, right_mass, left, n_store=n_store)
    except ValueError as exc:
        msg = str(exc)
        for key, lineno in linemap.items():
            if key in msg:
                raise LawSpecError(f"line {lineno}: {msg}") from exc
        raise LawSpecError(msg) from exc


def _parse_left(raw: str) -> LeftSpec:
    raw = raw.strip()
    if not raw:
        return LeftSpec()
    m = _ATOMS_RE.match(raw)
    if m:
        atoms = []
        for part in m.group(1).split(","):
            if not part.strip():
                continue
            site, _, mass = part.partition(":")
            try:
                s = int(site)
                w = float(mass)
            except ValueError as exc:
                raise LawSpecError(f"bad atom entry {part!r}") from exc
            if s >= 0:
                raise LawSpecError(f"left atom site must be negative, got {s}")
            atoms.append((s, w))
        return LeftSpec(atoms=tuple(sorted(atoms)))
    m = _GEOM_RE.match(raw.replace(" ", ""))
    if m:
        return LeftSpec(geom_q=float(m.group(1)), geom_mass=float(m.group(2)))
    raise LawSpecError(f"cannot parse left spec {raw!r}")


def load_law(path) -> StepLaw:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_law_spec(fh.read())

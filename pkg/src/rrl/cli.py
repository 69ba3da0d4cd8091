"""Batch front end: parse spec files, run the pipelines, emit CSV tables.

Every run writes its tables plus a ``run_manifest.json`` recording the full
configuration, library versions and the certified error budgets of the run.
A short hash of (configuration, spec-file bytes) is stamped into a ``#meta``
header of every CSV so outputs can be traced back to the exact run that
produced them.  Identical configurations produce byte-identical files; the
``RRL_THREADS`` environment variable caps internal parallelism but never
changes results.

Exit codes: 0 on success, 1 on a failed check or infeasible configuration,
2 on a spec-file parse error (the message names the offending line) or bad
command-line usage.  Nothing is written unless the computation succeeds.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import asdict, dataclass
from typing import List, Optional, Tuple

import numpy as np

from . import __version__
from .steplaw import LawSpecError, StepLaw, moments, parse_law_spec
from .density import DensityFamily, discretize, cont_diagnostics, parse_density_spec
from .charfn import small_t_checks
from .renewal import delta_by_inversion, prop_diagnostics, u_by_doubling, u_from_delta
from .expansion import diagnostics, mu2, phi_seq, phibar, r_star
from .mcoracle import estimate_u
from .seqkit import write_csv
from . import acceptance

_SUBCOMMANDS = ("law-info", "renewal", "expansion", "charfn", "mc",
                "density", "verify")


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class RunConfig:
    """One batch invocation, fully determining its outputs.

    Sizing fields must be positive and the tolerance must lie in
    [1e-12, 1e-3]; the seed is an identifier and may be zero.
    """

    subcommand: str
    spec_path: Optional[str] = None
    n_max: int = 10_000
    t_max: float = 1e5
    grid_m: int = 1 << 22
    tol: float = 1e-9
    k_max: int = 2
    seed: int = 0
    replicas: int = 1_000_000
    out_dir: str = "rrl_out"

    def __post_init__(self):
        if self.subcommand not in _SUBCOMMANDS:
            raise ValueError(f"unknown subcommand {self.subcommand!r}")
        for name in ("n_max", "grid_m", "k_max", "replicas"):
            if int(getattr(self, name)) <= 0:
                raise ValueError(f"{name} must be positive")
        if not (self.t_max > 0):
            raise ValueError("t_max must be positive")
        if not (1e-12 <= self.tol <= 1e-3):
            raise ValueError("tolerance must lie in [1e-12, 1e-3]")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.grid_m & (self.grid_m - 1):
            raise ValueError("grid size M must be a power of two")


def thread_cap() -> Optional[int]:
    """Parallelism cap from RRL_THREADS; results never depend on it."""
    raw = os.environ.get("RRL_THREADS")
    if raw is None or raw.strip() == "":
        return None
    try:
        val = int(raw)
    except ValueError:
        raise LawSpecError(f"RRL_THREADS must be an integer, got {raw!r}")
    if val <= 0:
        raise LawSpecError(f"RRL_THREADS must be positive, got {val}")
    return val


def manifest_hash(cfg: RunConfig, spec_bytes: bytes = b"") -> str:
    """Short digest identifying (configuration, spec file) for CSV headers.

    The output directory is excluded: the hash names the computation, so
    the same run written to two places produces byte-identical tables.
    """
    doc = asdict(cfg)
    doc.pop("out_dir")
    payload = json.dumps(doc, sort_keys=True).encode("utf-8")
    return hashlib.sha256(payload + b"\x00" + spec_bytes).hexdigest()[:16]


def _load_spec(path: str):
    """Read a spec file and dispatch on its family line.

    Returns ("law", StepLaw) or ("density", DensityFamily).  Parse errors
    surface as LawSpecError naming the offending line.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise LawSpecError(f"cannot read spec file {path}: {exc}")
    family = None
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.startswith("family"):
            family = stripped.split("=", 1)[-1].strip()
            break
    if family == "cont_power":
        return "density", parse_density_spec(text), text.encode("utf-8")
    return "law", parse_law_spec(text), text.encode("utf-8")


# ---------------------------------------------------------------------------
# subcommand handlers
#
# Each handler returns (files, stdout_lines, budgets) where files is a list
# of (name, columns, rows, meta) tuples; nothing touches the filesystem
# until every table of the run has been computed.


def _run_law_info(cfg: RunConfig, kind: str, obj) -> Tuple[list, list, dict]:
    lines = []
    files = []
    if kind == "law":
        mom = moments(obj)
        lines.append(f"family      {obj.family}")
        lines.append(f"alpha       {obj.alpha if obj.alpha is not None else 'n/a'}")
        lines.append(f"mu          {mom.mu!r}  (+/- {mom.mu_bound:.3e})")
        lines.append(f"mu_plus     {mom.mu_plus!r}")
        lines.append(f"mu_minus    {mom.mu_minus!r}")
        lines.append(f"frac_moment {mom.frac_moment!r}  (+/- {mom.frac_bound:.3e})")
        lines.append("")
        lines.append(f"{'n':>8}  {'pmf':>24}  {'right_tail':>24}")
        rows = []
        for n in (1, 2, 5, 10, 100, 1_000, 10_000, 100_000):
            p = float(obj.pmf(n))
            q = float(obj.right_tail(n))
            lines.append(f"{n:>8}  {p!r:>24}  {q!r:>24}")
            rows.append((n, p, q))
        files.append(("law_info.csv", ("n", "pmf", "right_tail"), rows,
                      {"mu": mom.mu, "mu_plus": mom.mu_plus,
                       "mu_minus": mom.mu_minus, "mu_bound": mom.mu_bound}))
        budgets = {"mu_bound": mom.mu_bound, "frac_bound": mom.frac_bound}
    else:
        fam: DensityFamily = obj
        lines.append("family      cont_power")
        lines.append(f"alpha       {fam.alpha if fam.alpha is not None else 'n/a'}")
        lines.append(f"x0          {fam.x0!r}")
        lines.append(f"mu          {fam.mu!r}")
        lines.append(f"mu_plus     {fam.mu_plus!r}")
        lines.append(f"mu_minus    {fam.mu_minus!r}")
        lines.append(f"tail_coef   {fam.c!r}")
        lines.append("")
        lines.append(f"{'x':>10}  {'density':>24}  {'right_tail':>24}")
        rows = []
        for x in (0.5, 1.0, 2.0, 5.0, 10.0, 100.0, 1_000.0, 10_000.0):
            f = float(fam.density(x))
            q = float(fam.right_tail(x))
            lines.append(f"{x:>10}  {f!r:>24}  {q!r:>24}")
            rows.append((x, f, q))
        files.append(("law_info.csv", ("x", "density", "right_tail"), rows,
                      {"mu": fam.mu, "mu_plus": fam.mu_plus,
                       "mu_minus": fam.mu_minus}))
        budgets = {}
    return files, lines, budgets


def _run_renewal(cfg: RunConfig, law: StepLaw) -> Tuple[list, list, dict]:
    n_max = cfg.n_max
    table_d = u_by_doubling(law, (0, n_max), tol=cfg.tol)
    dtable = delta_by_inversion(law, n_max, M=cfg.grid_m,
                                tol=max(cfg.tol, 1e-9), with_delta2=True)
    table_i = u_from_delta(dtable, law, (0, n_max))
    ns = np.arange(0, n_max + 1)
    diff = float(np.max(np.abs(table_d.values(ns) - table_i.values(ns))))
    budget = table_d.err + table_i.err
    if diff > budget:
        raise ValueError(
            f"pathway disagreement {diff:.3e} exceeds certified budget "
            f"{budget:.3e} on [0, {n_max}]")

    rows = [(int(n), float(table_d.u[i]), table_d.err, "doubling")
            for i, n in enumerate(ns)]
    rows += [(int(n), float(table_i.values([n])[0]), table_i.err, "inversion")
             for n in ns]
    meta = {"mu": table_d.mu, "two_method_max_diff": diff,
            "budget_doubling": table_d.err, "budget_inversion": table_i.err}
    files = [("u.csv", ("n", "u", "err", "method"), rows, meta)]

    prows = prop_diagnostics(dtable, law)
    drows = []
    d2 = dtable.delta2
    for r in prows:
        if d2 is not None and d2.lo <= r.n <= d2.hi:
            dd2 = float(d2[r.n])
        else:
            dd2 = float("nan")
        ratio = r.ratio_b if r.ratio_b is not None else float("nan")
        drows.append((r.n, r.delta, dd2, r.n_delta, ratio))
    files.append(("differences.csv",
                  ("n", "delta", "delta2", "n_delta", "ratio_prop_b"), drows,
                  {"mu": dtable.mu, "err_delta": dtable.err_delta,
                   "M": dtable.M}))
    lines = [f"two-method agreement on [0, {n_max}]: max diff {diff:.3e} "
             f"within budget {budget:.3e}"]
    budgets = {"two_method_max_diff": diff, "budget_doubling": table_d.err,
               "budget_inversion": table_i.err, "err_delta": dtable.err_delta}
    return files, lines, budgets


def _expansion_grid(n_max: int) -> np.ndarray:
    pts = np.geomspace(10.0, float(n_max), 25)
    return np.unique(np.round(pts).astype(np.int64))


def _run_expansion(cfg: RunConfig, law: StepLaw) -> Tuple[list, list, dict]:
    if law.alpha is None:
        raise ValueError("expansion diagnostics need a power-tail law "
                         "(finite laws have every correction term summable)")
    n_max = cfg.n_max
    grid = _expansion_grid(n_max)
    boundary = abs(law.alpha - 2.0) < 1e-12
    if boundary:
        k_eff = 1
    else:
        k_eff = max(1, min(cfg.k_max, r_star(law.alpha)))

    lo = law.support_lo if law.support_lo is not None else -2000
    lo = min(lo, -2000)
    hi = 2 * n_max + k_eff * (-lo) + max(4000, n_max // 10)
    phi = phi_seq(law, (lo, hi))
    etable = phibar(phi, k_eff, grid)
    mu2_report = mu2(phi, grid) if boundary else None

    dtable = delta_by_inversion(law, n_max, M=cfg.grid_m,
                                tol=max(cfg.tol, 1e-9), with_delta2=False)
    utable = u_from_delta(dtable, law, (0, n_max))
    diag = diagnostics(phi, etable, utable.values(grid),
                       np.full(grid.size, utable.err), mu2_report=mu2_report)

    cols = ["n"] + [f"phibar_{k}" for k in range(1, k_eff + 1)]
    cols += ["partial_sum", "u", "d", "first_order"]
    cols += [f"ratio_{k}" for k in range(2, k_eff + 1)]
    cols.append("e_star")
    if boundary:
        cols += ["mu2", "third"]
    rows = []
    for j, n in enumerate(grid):
        row = [int(n)]
        row += [float(etable.grid_values[k - 1, j]) for k in range(1, k_eff + 1)]
        row += [float(etable.partial_sum[j]), float(diag.u[j]),
                float(diag.d[j]), float(diag.first_order[j])]
        row += [float(diag.ratios[k - 2, j]) for k in range(2, k_eff + 1)]
        row.append(float(diag.remainder.e_star[j]))
        if boundary:
            row += [float(diag.mu2_values[j]), float(diag.third[j])]
        rows.append(tuple(row))

    meta = {"alpha": law.alpha, "k_max_requested": cfg.k_max,
            "k_max_effective": k_eff, "mu": phi.mu, "u_err": utable.err}
    if not boundary:
        meta["r_star"] = diag.constants.r_star
        for k in range(2, k_eff + 1):
            meta[f"c_{k}"] = diag.constants.c[k - 1]
    files = [("expansion.csv", tuple(cols), rows, meta)]
    last = -1
    lines = [f"k range 1..{k_eff} on {grid.size} grid points up to {n_max}"]
    if k_eff >= 2:
        lines.append(f"ratio_2 at n={int(grid[last])}: "
                     f"{float(diag.ratios[0, last])!r}")
    if boundary:
        lines.append(f"third at n={int(grid[last])}: {float(diag.third[last])!r}")
    budgets = {"u_err": utable.err, "err_delta": dtable.err_delta}
    return files, lines, budgets


def _run_charfn(cfg: RunConfig, law: StepLaw) -> Tuple[list, list, dict]:
    rows_in = small_t_checks(law, tol=min(cfg.tol, 1e-11))
    rows = [(r.t, r.ratio1.real, r.ratio1.imag, r.ratio2.real, r.ratio2.imag)
            for r in rows_in]
    gaps1 = [abs(r.ratio1 - 1.0) for r in rows_in]
    gaps2 = [abs(r.ratio2 - 1.0) for r in rows_in]
    meta = {"final_gap_ratio1": gaps1[-1], "final_gap_ratio2": gaps2[-1]}
    files = [("charfn.csv",
              ("t", "re_ratio1", "im_ratio1", "re_ratio2", "im_ratio2"),
              rows, meta)]
    lines = [f"t={r.t:g}: |R1-1|={g1:.4g}  |R2-1|={g2:.4g}"
             for r, g1, g2 in zip(rows_in, gaps1, gaps2)]
    return files, lines, dict(meta)


def _run_mc(cfg: RunConfig, law: StepLaw) -> Tuple[list, list, dict]:
    targets = np.unique(np.round(
        np.geomspace(1.0, float(cfg.n_max), 40)).astype(np.int64))
    est = estimate_u(law, targets, replicas=cfg.replicas,
                     master_seed=cfg.seed, threads=thread_cap())
    rows = [(int(n), float(u), float(s), est.bias_bound)
            for n, u, s in zip(est.targets, est.u_hat, est.se)]
    meta = {"replicas": est.replicas, "master_seed": est.master_seed,
            "stop_level": est.stop_level, "bias_bound": est.bias_bound}
    files = [("mc.csv", ("n", "u_mc", "se", "bias_bound"), rows, meta)]
    lines = [f"{est.replicas} replicas, stop level {est.stop_level}, "
             f"bias bound {est.bias_bound:.3e}",
             f"max se {float(np.max(est.se)):.3e} over {est.targets.size} targets"]
    return files, lines, {"bias_bound": est.bias_bound}


def _density_t_grid(cfg: RunConfig) -> Tuple[float, ...]:
    top = float(cfg.t_max)
    return tuple(t for t in (top / 100.0, top / 10.0, top) if t >= 1.0)


def _run_density(cfg: RunConfig, fam: DensityFamily) -> Tuple[list, list, dict]:
    h = 0.1 * fam.x0
    t_grid = _density_t_grid(cfg)
    if not t_grid:
        raise ValueError("t_max too small: no usable diagnostic points")
    k_eff = max(2, min(cfg.k_max, r_star(fam.alpha))) if fam.alpha else 2
    run = discretize(fam, h, M=cfg.grid_m, t_grid=t_grid, k_max=k_eff)
    run_half = discretize(fam, h / 2.0, M=cfg.grid_m, t_grid=t_grid,
                          k_max=k_eff)
    diag = cont_diagnostics(run, run_half)

    files = []
    pair_meta = {"h": h, "h_half": h / 2.0, "c2_target": diag.c2_target,
                 "phibar1_pair_gap": diag.phibar1_pair_gap,
                 "ratio2_pair_gap": diag.ratio2_pair_gap}
    files.append(("density_pair.csv",
                  ("t", "phibar1_h", "phibar1_h2", "ratio2_h", "ratio2_h2",
                   "tail_ratio_h", "tail_ratio_h2"), list(diag.rows()), pair_meta))
    for tag, r in (("h", run), ("h2", run_half)):
        cols = ["t"] + [f"phibar_{k}" for k in range(1, r.k_max + 1)]
        cols += [f"ratio_{k}" for k in range(2, r.k_max + 1)]
        cols += ["delta", "delta_err", "tail_ratio"]
        rows = []
        for j, t in enumerate(r.t_grid):
            row = [float(t)]
            row += [float(r.phibar_grid[k - 1, j]) for k in range(1, r.k_max + 1)]
            row += [float(r.ratio_k[k - 1, j]) for k in range(2, r.k_max + 1)]
            row += [float(r.delta_lat[j]), float(r.delta_err[j]),
                    float(r.tail_ratio[j])]
            rows.append(tuple(row))
        files.append((f"density_{tag}.csv", tuple(cols), rows,
                      {"h": r.h, "M": r.M, "mu_lat": r.mu_lat,
                       "mass_residual": r.mass_residual,
                       "u_density_limit": r.u_density_limit()}))
    lines = [f"spacings h={h:g} and h/2={h / 2:g}, M={cfg.grid_m}",
             f"Phibar_1 pair gap {diag.phibar1_pair_gap:.4g}, "
             f"ratio_2 pair gap {diag.ratio2_pair_gap:.4g}",
             f"ratio_2 at t={t_grid[-1]:g}: {float(diag.ratio2_h[-1])!r} "
             f"(target {diag.c2_target!r})"]
    budgets = {"phibar1_pair_gap": diag.phibar1_pair_gap,
               "ratio2_pair_gap": diag.ratio2_pair_gap,
               "mass_residual_h": run.mass_residual,
               "mass_residual_h2": run_half.mass_residual}
    return files, lines, budgets


def _run_verify(cfg: RunConfig, criteria: Optional[List[int]]
                ) -> Tuple[list, list, dict, bool]:
    ws = acceptance.Workspace(seed=cfg.seed)
    nums = sorted(criteria) if criteria else sorted(acceptance.CRITERIA)
    results = []
    for num in nums:
        res = acceptance.run_all([num], workspace=ws, seed=cfg.seed)[0]
        print(res.summary(), flush=True)
        results.append(res)
    all_pass = all(r.passed for r in results)

    def clean(s: str) -> str:
        return s.replace(",", ";").replace("\n", " ")

    rows = [(r.number, "PASS" if r.passed else "FAIL",
             round(r.runtime_s, 3), clean(r.annotation or ""),
             clean(r.detail or "")) for r in results]
    files = [("verify.csv",
              ("criterion", "status", "runtime_s", "annotation", "detail"),
              rows, {"criteria_run": ";".join(str(n) for n in nums),
                     "all_pass": all_pass, "seed": cfg.seed})]
    lines = [f"{sum(r.passed for r in results)}/{len(results)} criteria passed"]
    budgets = {f"criterion_{r.number}": "PASS" if r.passed else "FAIL"
               for r in results}
    return files, lines, budgets, all_pass


# ---------------------------------------------------------------------------
# entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rrl",
        description="Certified renewal sequences for heavy-tailed lattice "
                    "walks: tables, expansions and acceptance checks.")
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    descriptions = {
        "law-info": "print moments and tail table of a spec file",
        "renewal": "renewal sequence by two independent pathways",
        "expansion": "correction-term trend tables",
        "charfn": "small-t transform ratio checks",
        "mc": "Monte Carlo visit-count estimates",
        "density": "continuous-family discretization diagnostics",
        "verify": "run the acceptance suite",
    }
    for name in _SUBCOMMANDS:
        p = sub.add_parser(name, help=descriptions[name])
        if name != "verify":
            p.add_argument("--spec", required=True,
                           help="law or density spec file")
        p.add_argument("--n-max", type=int, default=10_000)
        p.add_argument("--t-max", type=float, default=1e5)
        p.add_argument("--grid-m", type=int, default=1 << 22)
        p.add_argument("--tol", type=float, default=1e-9)
        p.add_argument("--k-max", type=int, default=2)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--replicas", type=int, default=1_000_000)
        p.add_argument("--out", default="rrl_out",
                       help="output directory (created if needed)")
        if name == "verify":
            p.add_argument("--criteria", default=None,
                           help="comma-separated criterion numbers "
                                "(default: all)")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 2
    if args.subcommand is None:
        parser.print_usage(sys.stderr)
        return 2

    try:
        cfg = RunConfig(subcommand=args.subcommand,
                        spec_path=getattr(args, "spec", None),
                        n_max=args.n_max, t_max=args.t_max,
                        grid_m=args.grid_m, tol=args.tol, k_max=args.k_max,
                        seed=args.seed, replicas=args.replicas,
                        out_dir=args.out)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    criteria = None
    if args.subcommand == "verify" and args.criteria:
        try:
            criteria = [int(tok) for tok in args.criteria.split(",") if tok]
        except ValueError:
            print(f"error: --criteria expects comma-separated integers, "
                  f"got {args.criteria!r}", file=sys.stderr)
            return 2
        bad = [n for n in criteria if n not in acceptance.CRITERIA]
        if bad:
            print(f"error: unknown criteria {bad}", file=sys.stderr)
            return 2

    spec_bytes = b""
    exit_code = 0
    try:
        if cfg.subcommand == "verify":
            files, lines, budgets, all_pass = _run_verify(cfg, criteria)
            if not all_pass:
                exit_code = 1
        else:
            kind, obj, spec_bytes = _load_spec(cfg.spec_path)
            if cfg.subcommand == "law-info":
                files, lines, budgets = _run_law_info(cfg, kind, obj)
            elif cfg.subcommand == "density":
                if kind != "density":
                    raise ValueError(
                        "density subcommand needs a cont_power spec file")
                files, lines, budgets = _run_density(cfg, obj)
            else:
                if kind != "law":
                    raise ValueError(
                        f"{cfg.subcommand} subcommand needs a lattice law "
                        "spec file, not a density family")
                handler = {"renewal": _run_renewal,
                           "expansion": _run_expansion,
                           "charfn": _run_charfn,
                           "mc": _run_mc}[cfg.subcommand]
                files, lines, budgets = handler(cfg, obj)
    except LawSpecError as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    digest = manifest_hash(cfg, spec_bytes)
    os.makedirs(cfg.out_dir, exist_ok=True)
    written = []
    for name, columns, rows, meta in files:
        path = os.path.join(cfg.out_dir, name)
        stamped = {"manifest": digest}
        stamped.update(meta)
        write_csv(path, columns, rows, meta=stamped)
        written.append(name)
    manifest = {
        "command": cfg.subcommand,
        "config": asdict(cfg),
        "spec_sha256": hashlib.sha256(spec_bytes).hexdigest() if spec_bytes
        else None,
        "manifest_hash": digest,
        "versions": {"rrl": __version__,
                     "python": ".".join(str(v) for v in sys.version_info[:3]),
                     "numpy": np.__version__},
        "budgets": budgets,
        "outputs": written,
    }
    with open(os.path.join(cfg.out_dir, "run_manifest.json"), "w",
              encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

    for line in lines:
        print(line)
    for name in written:
        print(f"wrote {os.path.join(cfg.out_dir, name)}")
    return exit_code


if __name__ == "__main__":
    sys.exit(main())

"""Certified renewal sequences for heavy-tailed lattice random walks.

The package computes the expected-visits sequence of an aperiodic integer
walk with positive drift by two independent certified pathways, expands its
deviation from the drift limit into correction-term tails, and checks the
predicted constants and remainder orders numerically — for lattice step
laws, for the boundary tail exponent, and for continuous densities through
controlled discretization.
"""

__version__ = "0.1.0"

from .seqkit import TailModel, WindowSeq, convolve, direct_convolve, tail_sum, write_csv
from .steplaw import (
    ChernoffCertificate,
    LawSpecError,
    LeftSpec,
    MomentSummary,
    StepLaw,
    build_finite_law,
    build_power_law,
    chernoff_bound,
    load_law,
    moments,
    parse_law_spec,
    sample,
)
from .charfn import CharFnGrid, build_grid, derive, phihat_at, small_t_checks, transform_at
from .renewal import (
    DifferenceTable,
    RenewalTable,
    delta_by_inversion,
    delta_from_renewal,
    identity_06_residual,
    prop_diagnostics,
    u_by_doubling,
    u_from_delta,
)
from .expansion import (
    AsymptoticConstants,
    DiagnosticsTable,
    ExpansionTable,
    PhiSeq,
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
from .mcoracle import McEstimate, estimate_u, philox4x32
from .density import (
    CellLaw,
    ContDiagnostics,
    DensityFamily,
    GridRun,
    cont_diagnostics,
    discretize,
    load_density,
    parse_density_spec,
    project_cells,
)
from .acceptance import CriterionResult, Workspace, run_all, shipped_laws

__all__ = [
    "__version__",
    "TailModel", "WindowSeq", "convolve", "direct_convolve", "tail_sum",
    "write_csv",
    "ChernoffCertificate", "LawSpecError", "LeftSpec", "MomentSummary",
    "StepLaw", "build_finite_law", "build_power_law", "chernoff_bound",
    "load_law", "moments", "parse_law_spec", "sample",
    "CharFnGrid", "build_grid", "derive", "phihat_at", "small_t_checks",
    "transform_at",
    "DifferenceTable", "RenewalTable", "delta_by_inversion",
    "delta_from_renewal", "identity_06_residual", "prop_diagnostics",
    "u_by_doubling", "u_from_delta",
    "AsymptoticConstants", "DiagnosticsTable", "ExpansionTable", "PhiSeq",
    "asymptotic_constants", "c_const", "diagnostics", "gamma_fn", "mu2",
    "phi_seq", "phibar", "phibar1_closed_form", "r_star",
    "McEstimate", "estimate_u", "philox4x32",
    "CellLaw", "ContDiagnostics", "DensityFamily", "GridRun",
    "cont_diagnostics", "discretize", "load_density", "parse_density_spec",
    "project_cells",
    "CriterionResult", "Workspace", "run_all", "shipped_laws",
]

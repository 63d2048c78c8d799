"""Numerical laboratory for mass-constrained Choquard ground states.

The package computes the explicit constants and barrier geometry behind
the local-minimization existence argument (thresholds), evaluates the
nonlocal energy spectrally on a periodic box (grid, riesz, energy),
runs a certified multistart descent on the mass sphere (minimize), and
samples dilation curves for diagnostics (fiber).
"""

from .grid import (
    CHQF_MAGIC,
    Field,
    FieldIOError,
    Grid,
    GridError,
    grad_norm_sq,
    inner,
    integrate,
    mass,
    neg_laplacian,
    read_field,
    rescale_mass,
    write_field,
)
from .problem import (
    ConditionReport,
    Nonlinearity,
    PowerTerm,
    ProblemError,
    ProblemParams,
    c_zero,
    eval_F,
    eval_f,
    l2critical_pair,
    make_nonlinearity,
    parse_nonlinearity,
    validate,
)
from .riesz import (
    KernelError,
    RadialPotential,
    RieszKernel,
    build_kernel,
    convolve,
    radial_oracle,
    riesz_constant,
)
from .thresholds import (
    ResolutionWarning,
    ThresholdBundle,
    ThresholdError,
    build_bundle,
    c1_c2,
    estimate_s1,
    estimate_s2,
    estimate_s3,
    h_peak,
    h_roots,
    h_value,
    hls_sharp_constant,
    lorentzian_profile,
    rho_zero,
    s1_from_s3,
    s2_closed_form,
    sobolev_closed_form,
    sobolev_trial_profile,
)
from .energy import (
    DilationWarning,
    EnergyBreakdown,
    EnergyError,
    dilate,
    energy,
    interaction_pair,
    l2_gradient,
    lambda_of,
    nehari_pohozaev_residual,
    pohozaev_residual,
    spectral_tail_fraction,
)
from .fiber import (
    FiberCurve,
    FiberDiagnosis,
    default_taus,
    fiber_curve,
    sample_resolved,
    unimodality_report,
)
from .minimize import (
    SolveError,
    SolveOptions,
    SolveReport,
    StartSummary,
    m_estimate,
    solve,
)

__version__ = "0.1.0"

__all__ = [
    "CHQF_MAGIC",
    "ConditionReport",
    "DilationWarning",
    "EnergyBreakdown",
    "EnergyError",
    "Field",
    "FieldIOError",
    "FiberCurve",
    "FiberDiagnosis",
    "Grid",
    "GridError",
    "KernelError",
    "Nonlinearity",
    "PowerTerm",
    "ProblemError",
    "ProblemParams",
    "RadialPotential",
    "ResolutionWarning",
    "RieszKernel",
    "SolveError",
    "SolveOptions",
    "SolveReport",
    "StartSummary",
    "ThresholdBundle",
    "ThresholdError",
    "build_bundle",
    "build_kernel",
    "c1_c2",
    "c_zero",
    "convolve",
    "default_taus",
    "dilate",
    "energy",
    "estimate_s1",
    "estimate_s2",
    "estimate_s3",
    "eval_F",
    "eval_f",
    "fiber_curve",
    "grad_norm_sq",
    "h_peak",
    "h_roots",
    "h_value",
    "hls_sharp_constant",
    "inner",
    "integrate",
    "interaction_pair",
    "l2_gradient",
    "l2critical_pair",
    "lambda_of",
    "lorentzian_profile",
    "m_estimate",
    "make_nonlinearity",
    "mass",
    "neg_laplacian",
    "nehari_pohozaev_residual",
    "parse_nonlinearity",
    "pohozaev_residual",
    "radial_oracle",
    "read_field",
    "rescale_mass",
    "rho_zero",
    "riesz_constant",
    "s1_from_s3",
    "s2_closed_form",
    "sample_resolved",
    "sobolev_closed_form",
    "sobolev_trial_profile",
    "solve",
    "spectral_tail_fraction",
    "unimodality_report",
    "validate",
    "write_field",
]

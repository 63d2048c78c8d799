"""Energy functional, its L2 gradient, multiplier, identities, dilation.

E(u) = 1/2 |grad u|^2 - 1/2 int (I_a * F(u)) F(u).  The nonlocal term is
one kernel convolution; everything else is pointwise work and quadrature.
The mass-preserving dilation u_tau(x) = tau^{N/2} u(tau x) is implemented
by trigonometric resampling so that its scaling identities hold to
spectral accuracy, which the fiber diagnostics rely on.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .grid import Field, GridError, grad_norm_sq, integrate, mass, neg_laplacian
from .problem import Nonlinearity, ProblemParams, eval_F, eval_f
from .riesz import RieszKernel, convolve


class EnergyError(ArithmeticError):
    pass


class DilationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float       # 1/2 |grad u|_2^2
    interaction: float   # 1/2 int (I_a*F(u)) F(u)
    total: float         # kinetic - interaction
    d_lower: float | None = None  # int (I_a*|u|^p_)|u|^p_ when requested


def _nonlinearity_values(params: ProblemParams, nl: Nonlinearity, u: Field):
    F = eval_F(params, nl, u.values)
    if not np.isfinite(F).all():
        # identify the term that overflowed to make the error actionable
        a = np.abs(u.values)
        if params.b and not np.isfinite(a ** params.p_lower).all():
            raise EnergyError(f"lower-critical term |t|^{params.p_lower:g} overflowed")
        for term in nl.terms:
            if not np.isfinite(term.coef * a ** term.exponent).all():
                raise EnergyError(
                    f"term {term.coef:g}*|t|^{term.exponent:g} overflowed"
                )
        raise EnergyError("non-finite nonlinearity values")
    return F


def energy(params: ProblemParams, nl: Nonlinearity, kernel: RieszKernel,
           u: Field, with_d_lower: bool | None = None) -> EnergyBreakdown:
    """Evaluate the breakdown at u.  One convolution, two quadratures.

    with_d_lower defaults to computing the dilation-invariant component
    exactly when b = 1 (it is the small-dilation plateau of the energy);
    pass True or False to override.
    """
    if u.grid != kernel.grid:
        raise GridError("field grid does not match kernel grid")
    F = _nonlinearity_values(params, nl, u)
    conv = convolve(kernel, Field(u.grid, F))
    kinetic = 0.5 * grad_norm_sq(u)
    inter = 0.5 * integrate(Field(u.grid, conv.values * F))
    if with_d_lower is None:
        with_d_lower = bool(params.b)
    d_lower = None
    if with_d_lower:
        d_lower = interaction_pair(kernel, u, params.p_lower, params.p_lower)
    return EnergyBreakdown(
        kinetic=kinetic, interaction=inter, total=kinetic - inter, d_lower=d_lower
    )


def interaction_pair(kernel: RieszKernel, u: Field, p: float, q: float) -> float:
    """int (I_a * |u|^p) |u|^q for one power pair."""
    ap = np.abs(u.values) ** p
    aq = ap if q == p else np.abs(u.values) ** q
    conv = convolve(kernel, Field(u.grid, ap))
    return integrate(Field(u.grid, conv.values * aq))


def l2_gradient(params: ProblemParams, nl: Nonlinearity, kernel: RieszKernel,
                u: Field) -> Field:
    """Variational derivative -lap u - (I_a*F(u)) f(u), as a Field.

    With this sign convention a small step u - step*gradient decreases E.
    """
    F = _nonlinearity_values(params, nl, u)
    conv = convolve(kernel, Field(u.grid, F))
    fu = eval_f(params, nl, u.values)
    return Field(u.grid, neg_laplacian(u).values - conv.values * fu)


def lambda_of(params: ProblemParams, nl: Nonlinearity, kernel: RieszKernel,
              u: Field) -> float:
    """Multiplier from testing the equation against u itself."""
    m2 = mass(u) ** 2
    if m2 == 0.0:
        raise EnergyError("multiplier undefined for the zero field")
    F = _nonlinearity_values(params, nl, u)
    conv = convolve(kernel, Field(u.grid, F))
    fu = eval_f(params, nl, u.values)
    tested = integrate(Field(u.grid, conv.values * fu * u.values))
    return (tested - grad_norm_sq(u)) / m2


def pohozaev_residual(params: ProblemParams, nl: Nonlinearity,
                      kernel: RieszKernel, u: Field, lam: float) -> float:
    """Normalized defect of the scaling identity at (u, lambda).

    (N-2)/2 T + N/2 lam |u|^2 = (N+a)/2 D must hold for solutions; the
    residual is |sum| over the sum of magnitudes, so 0 is exact and O(1)
    is generic.
    """
    N, alpha = params.N, params.alpha
    F = _nonlinearity_values(params, nl, u)
    conv = convolve(kernel, Field(u.grid, F))
    D = integrate(Field(u.grid, conv.values * F))
    t1 = 0.5 * (N - 2.0) * grad_norm_sq(u)
    t2 = 0.5 * N * lam * mass(u) ** 2
    t3 = -0.5 * (N + alpha) * D
    denom = abs(t1) + abs(t2) + abs(t3)
    if denom == 0.0:
        return 0.0
    return abs(t1 + t2 + t3) / denom


def nehari_pohozaev_residual(params: ProblemParams, nl: Nonlinearity,
                             kernel: RieszKernel, u: Field) -> float:
    """Defect of |grad u|^2 = N/2 int (I_a*F)(f(u)u - (N+a)/N F), per unit mass.

    Normalizing by |u|_2^2 keeps the measure meaningful in the degenerate
    pure lower-critical case, where the right side vanishes identically
    and the residual reduces to the mass-normalized gradient norm.
    """
    N, alpha = params.N, params.alpha
    F = _nonlinearity_values(params, nl, u)
    conv = convolve(kernel, Field(u.grid, F))
    fu_u = eval_f(params, nl, u.values) * u.values
    rhs = 0.5 * N * integrate(
        Field(u.grid, conv.values * (fu_u - (N + alpha) / N * F))
    )
    lhs = grad_norm_sq(u)
    m2 = mass(u) ** 2
    if m2 == 0.0:
        return 0.0
    return abs(lhs - rhs) / m2


# ----------------------------------------------------------------------
# Mass-preserving dilation.
# ----------------------------------------------------------------------

def spectral_tail_fraction(u: Field, band: float = 0.25) -> float:
    """Fraction of spectral mass in the outer `band` of each axis frequency."""
    spec = np.fft.rfftn(u.values)
    power = spec.real ** 2 + spec.imag ** 2
    m = u.grid.m
    freqs = np.abs(np.fft.fftfreq(m) * m)
    fr = np.abs(np.fft.rfftfreq(m) * m)
    cut = (1.0 - band) * (m / 2.0)
    marks = [freqs >= cut] * (u.grid.dim - 1) + [fr >= cut]
    outer = np.zeros(power.shape, dtype=bool)
    for ax, mark in enumerate(marks):
        sh = [1] * u.grid.dim
        sh[ax] = len(mark)
        outer |= mark.reshape(sh)
    # weight the half-spectrum correctly: interior columns count twice
    w_last = np.full(m // 2 + 1, 2.0)
    w_last[0] = 1.0
    w_last[-1] = 1.0
    power = power * w_last.reshape([1] * (u.grid.dim - 1) + [-1])
    total = float(power.sum())
    if total == 0.0:
        return 0.0
    return float(power[outer].sum()) / total


def _dilation_matrix(m: int, tau: float) -> np.ndarray:
    """Per-axis trig-interpolation matrix evaluating at stretched sample points.

    Target positions that land outside the box have no sample to read; the
    trig interpolant would silently wrap around the torus there and copy
    interior values where they do not belong, so those rows are zeroed
    instead (the field is treated as zero outside the box).  Only
    contraction (tau > 1) produces such rows.
    """
    j = np.arange(m)
    targets = tau * (j - m / 2.0) + m / 2.0   # index coordinates of tau*x_j
    k = (np.fft.fftfreq(m) * m).astype(int)
    B = np.exp(2j * np.pi * np.outer(targets, k) / m) / m
    # split the self-conjugate top frequency symmetrically: cosine evaluation
    B[:, m // 2] = np.cos(np.pi * targets) / m
    B[(targets < 0.0) | (targets >= m), :] = 0.0
    return B


def dilate(u: Field, tau: float, check: bool = True) -> Field:
    """u_tau(x) = tau^{N/2} u(tau x) by spectral resampling.

    Exact at tau = 1.  For tau > 1 the profile shrinks (content moves to
    higher frequencies); if the result parks noticeable spectral mass in
    the outer quarter of the band, the sample is under-resolved and a
    DilationWarning is emitted (suppress with check=False).  Points whose
    preimage tau*x falls outside the box read zero, so a contracted field
    keeps only the content of the inner cube of half-side L/(2 tau).
    """
    if not (tau > 0.0 and math.isfinite(tau)):
        raise EnergyError(f"tau must be positive and finite, got {tau}")
    if tau == 1.0:
        return u.copy()
    grid = u.grid
    B = _dilation_matrix(grid.m, tau)
    v = np.fft.fftn(u.values)
    for ax in range(grid.dim):
        v = np.moveaxis(np.tensordot(B, np.moveaxis(v, ax, 0), axes=(1, 0)), 0, ax)
    out = Field(grid, tau ** (grid.dim / 2.0) * v.real)
    if check and spectral_tail_fraction(out) > 1e-6:
        warnings.warn(
            f"dilation by tau={tau:g} leaves the resolved band",
            DilationWarning, stacklevel=2,
        )
    return out

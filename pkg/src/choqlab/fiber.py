"""Energy along the mass-preserving dilation path and its diagnostics.

For a fixed field u the curve phi(tau) = E(u_tau) separates into a
kinetic part scaling as tau^2 and interaction parts scaling as
tau^{N(p+q)/2 - N - alpha} per power pair; reading off how many local
maxima the sampled curve has, and whether it decays after the last one,
is the practical check behind the one-bump structural assumption of the
local minimization argument.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import dilate, energy, spectral_tail_fraction
from .grid import Field
from .problem import Nonlinearity, ProblemParams
from .riesz import RieszKernel

# Resampled gradient norms pick up an error of roughly 5x the squared
# relative face amplitude, so 3e-3 keeps quadratic functionals good to
# about 5e-5.  The tail limit is a junk filter for band-edge content.
TAIL_LIMIT = 1e-5       # spectral power allowed in the outer band
BOUNDARY_LIMIT = 3e-3   # face amplitude relative to the peak


@dataclass(frozen=True)
class FiberCurve:
    taus: np.ndarray
    values: np.ndarray
    kinetic: np.ndarray
    interaction: np.ndarray
    d_lower: np.ndarray | None
    resolved: np.ndarray
    detected_maxima: tuple[float, ...]
    phi_at_1_slope: float


@dataclass(frozen=True)
class FiberDiagnosis:
    n_maxima: int
    decreasing_after_max: bool
    conclusive: bool
    detail: str


def _boundary_fraction(u: Field) -> float:
    peak = float(np.abs(u.values).max())
    if peak == 0.0:
        return 0.0
    worst = 0.0
    for ax in range(u.grid.dim):
        face = np.take(u.values, 0, axis=ax)
        worst = max(worst, float(np.abs(face).max()))
    return worst / peak


def sample_resolved(u: Field) -> bool:
    """True when a field is representable on its grid for energy purposes.

    Narrow fields push spectral mass against the band edge; wide ones push
    amplitude against the box faces.  Either way the quadratures silently
    degrade, so such samples are excluded from curve diagnostics.
    """
    if spectral_tail_fraction(u) > TAIL_LIMIT:
        return False
    return _boundary_fraction(u) < BOUNDARY_LIMIT


def _wrap_fraction(u: Field, tau: float) -> float:
    """Relative amplitude of u outside the cube that dilation by tau reads.

    Contraction reads u only on the cube of half-side L/(2*tau); whatever
    amplitude lives outside that cube has no image in the box and is
    dropped by the resampling.  A sample that carries visible weight there
    is therefore missing part of its field, and the output face test
    cannot notice the loss, hence a separate check on the input.
    Expansion (tau <= 1) reads the whole box and loses nothing.
    """
    if tau <= 1.0:
        return 0.0
    half = u.grid.L / (2.0 * tau)
    outside = np.abs(u.grid.axis()) >= half
    if not outside.any():
        return 0.0
    peak = float(np.abs(u.values).max())
    if peak == 0.0:
        return 0.0
    worst = 0.0
    for ax in range(u.grid.dim):
        slab = np.compress(outside, u.values, axis=ax)
        worst = max(worst, float(np.abs(slab).max()))
    return worst / peak


def default_taus(lo: float = 1e-2, hi: float = 10.0, n: int = 200) -> np.ndarray:
    """Log-spaced dilation samples with tau = 1 inserted exactly."""
    taus = np.geomspace(lo, hi, n)
    if not np.any(taus == 1.0):
        taus = np.sort(np.append(taus, 1.0))
    return taus


def fiber_curve(params: ProblemParams, nl: Nonlinearity, kernel: RieszKernel,
                u: Field, taus=None) -> FiberCurve:
    """Evaluate the dilation curve of u with per-sample breakdown.

    Unresolved samples keep their energy values but are flagged and left
    out of maxima detection.  The slope at tau = 1 is a central difference
    over the neighboring samples.
    """
    if taus is None:
        taus = default_taus()
    taus = np.asarray(taus, dtype=float)
    if taus.ndim != 1 or np.any(taus <= 0.0) or np.any(np.diff(taus) <= 0.0):
        raise ValueError("taus must be a strictly increasing positive 1-D array")

    want_lower = bool(params.b)
    values = np.empty_like(taus)
    kin = np.empty_like(taus)
    inter = np.empty_like(taus)
    dlow = np.empty_like(taus) if want_lower else None
    resolved = np.empty(taus.shape, dtype=bool)

    for i, tau in enumerate(taus):
        ut = dilate(u, float(tau), check=False)
        resolved[i] = (sample_resolved(ut)
                       and _wrap_fraction(u, float(tau)) < BOUNDARY_LIMIT)
        eb = energy(params, nl, kernel, ut, with_d_lower=want_lower)
        values[i] = eb.total
        kin[i] = eb.kinetic
        inter[i] = eb.interaction
        if want_lower:
            dlow[i] = eb.d_lower

    maxima = _detect_maxima(taus, values, resolved)
    slope = _slope_at_one(taus, values)
    return FiberCurve(
        taus=taus, values=values, kinetic=kin, interaction=inter,
        d_lower=dlow, resolved=resolved, detected_maxima=tuple(maxima),
        phi_at_1_slope=slope,
    )


def _slope_at_one(taus: np.ndarray, values: np.ndarray) -> float:
    """Quadratic fit through the three samples nearest tau = 1,
    differentiated at 1.

    A plain secant over unevenly spaced neighbors carries a bias
    proportional to the curvature, which near a fiber minimum dwarfs the
    true slope; the Lagrange form is exact on parabolas.
    """
    if len(taus) < 3:
        j = min(1, len(taus) - 1)
        return float((values[j] - values[0]) / (taus[j] - taus[0]))
    c = int(np.clip(np.argmin(np.abs(taus - 1.0)), 1, len(taus) - 2))
    t0, t1, t2 = taus[c - 1], taus[c], taus[c + 1]
    f0, f1, f2 = values[c - 1], values[c], values[c + 1]
    x = 1.0
    w0 = (2.0 * x - t1 - t2) / ((t0 - t1) * (t0 - t2))
    w1 = (2.0 * x - t0 - t2) / ((t1 - t0) * (t1 - t2))
    w2 = (2.0 * x - t0 - t1) / ((t2 - t0) * (t2 - t1))
    return float(w0 * f0 + w1 * f1 + w2 * f2)


def _detect_maxima(taus, values, resolved) -> list[float]:
    found = []
    for i in range(1, len(taus) - 1):
        if not (resolved[i - 1] and resolved[i] and resolved[i + 1]):
            continue
        rising = values[i] > values[i - 1]
        falling = values[i + 1] <= values[i]
        strictly_falling_somewhere = values[i + 1] < values[i]
        if rising and falling:
            # plateau guard: a flat run counts once, at its left end
            if not strictly_falling_somewhere:
                k = i + 1
                while k < len(taus) and values[k] == values[i] and resolved[k]:
                    k += 1
                if k == len(taus) or values[k] >= values[i]:
                    continue
            found.append(float(taus[i]))
    return found


def unimodality_report(curve: FiberCurve) -> FiberDiagnosis:
    """Summarize whether the sampled curve looks one-humped.

    This inspects one sampled curve for one field; it is a diagnostic for
    the structural assumption, never a verification of it (the assumption
    quantifies over every field of the given mass).
    """
    res_taus = curve.taus[curve.resolved]
    if res_taus.size < 8:
        return FiberDiagnosis(
            n_maxima=len(curve.detected_maxima),
            decreasing_after_max=False, conclusive=False,
            detail="fewer than 8 resolved samples",
        )
    lo, hi = float(res_taus[0]), float(res_taus[-1])
    n_max = len(curve.detected_maxima)

    decreasing = True
    if n_max:
        last = curve.detected_maxima[-1]
        after = curve.resolved & (curve.taus > last)
        idx = np.flatnonzero(after)
        vals = curve.values[idx]
        decreasing = bool(np.all(np.diff(vals) < 0.0)) if vals.size >= 2 else True

    conclusive = hi / lo >= 10.0
    for t in curve.detected_maxima:
        if t / lo < 10.0 or hi / t < 10.0:
            conclusive = False
    detail = (f"{n_max} local maximum(s) over resolved window "
              f"[{lo:.4g}, {hi:.4g}]")
    return FiberDiagnosis(
        n_maxima=n_max, decreasing_after_max=decreasing,
        conclusive=conclusive, detail=detail,
    )

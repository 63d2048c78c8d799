"""Local minimization on the mass sphere inside a gradient-norm ball.

The iteration is projected gradient descent: step against the tangential
part of the energy gradient, rescale back to the mass sphere, and when an
iterate's gradient norm exceeds the cap, pull it back by the
mass-preserving dilation (which scales the gradient norm exactly).  A
backtracking line search keeps the accepted energy sequence strictly
decreasing, so stalls are explicit rather than oscillatory.

Multistart with seeded deterministic starts makes reports reproducible:
identical options give bit-identical results regardless of thread count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import grid as gridmod
from .energy import dilate, lambda_of, nehari_pohozaev_residual, pohozaev_residual
from .energy import EnergyBreakdown, energy
from .grid import Field, Grid, inner, mass, rescale_mass
from .problem import Nonlinearity, ProblemParams, eval_F, eval_f, validate
from .riesz import RieszKernel
from .thresholds import ThresholdBundle, lorentzian_profile


class SolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolveOptions:
    max_iters: int = 8000
    step0: float = 0.5
    tol_grad: float = 1e-6
    n_starts: int = 5
    seed: int = 0
    r_cap: float | None = None  # defaults to the bundle window root R0

    def __post_init__(self):
        if self.max_iters < 1 or self.step0 <= 0.0 or self.tol_grad <= 0.0:
            raise SolveError("max_iters >= 1, step0 > 0, tol_grad > 0 required")
        if self.n_starts < 1:
            raise SolveError("need at least one start")


@dataclass(frozen=True)
class StartSummary:
    label: str
    converged: bool
    iterations: int
    energy: float
    grad_residual: float


@dataclass(frozen=True)
class SolveReport:
    u_star: Field
    energy: EnergyBreakdown
    lambda_: float
    grad_residual: float      # |grad E + lambda u|_2 / |u|_2
    pohozaev: float
    nehari_pohozaev: float
    mass_final: float
    grad_norm_final: float
    boundary_margin: float    # r_cap - |grad u|_2
    m_estimate: float         # best energy across starts
    iterations: int
    converged: bool
    outside_theory: bool
    r_cap: float
    starts: tuple[StartSummary, ...]


def thread_count(n_starts: int) -> int:
    env = os.environ.get("CHOQLAB_THREADS", "").strip()
    if env:
        return max(1, int(env))
    return max(1, min(n_starts, os.cpu_count() or 1))


# ----------------------------------------------------------------------
# One descent run.  The per-iterate cache keeps the half-spectrum of u
# and the kernel convolution of F(u), so an accepted step costs four real
# transforms: one forward for the trial, one pair for its interaction
# term, and one inverse for the next gradient's Laplacian.
# ----------------------------------------------------------------------

class _Iterate:
    __slots__ = ("field", "spec", "kinetic", "F", "conv", "total")

    def __init__(self, params, nl, kernel, field: Field):
        g = field.grid
        self.field = field
        self.spec = np.fft.rfftn(field.values)
        w = gridmod._rfft_weights(g)
        k2 = gridmod._omega_sq_rfft(g)
        power = self.spec.real ** 2 + self.spec.imag ** 2
        self.kinetic = 0.5 * float(np.sum(w * k2 * power)) \
            * g.cell_volume / g.npoints
        self.F = eval_F(params, nl, field.values)
        if not np.isfinite(self.F).all():
            raise FloatingPointError("nonlinearity overflow")
        self.conv = np.fft.irfftn(
            kernel.symbol * np.fft.rfftn(self.F), s=g.shape, axes=range(g.dim)
        )
        interaction = 0.5 * float(np.sum(self.conv * self.F)) * g.cell_volume
        self.total = self.kinetic - interaction

    def gradient(self, params, nl, kernel) -> Field:
        g = self.field.grid
        lap = np.fft.irfftn(gridmod._omega_sq_rfft(g) * self.spec, s=g.shape,
                            axes=range(g.dim))
        fu = eval_f(params, nl, self.field.values)
        return Field(g, lap - self.conv * fu)

    def grad_norm(self) -> float:
        return math.sqrt(2.0 * self.kinetic)


def _cap_field(u: Field, rho: float, r_cap: float, margin: float = 1e-3) -> Field:
    """Project onto the mass sphere, then dilate inside the gradient ball."""
    u = rescale_mass(u, rho)
    gn = math.sqrt(gridmod.grad_norm_sq(u))
    if gn > r_cap * (1.0 - margin):
        u = dilate(u, r_cap * (1.0 - margin) / gn, check=False)
        u = rescale_mass(u, rho)
    return u


def _run_start(params: ProblemParams, nl: Nonlinearity, kernel: RieszKernel,
               rho: float, r_cap: float, u0: Field, opts: SolveOptions,
               label: str) -> tuple[StartSummary, Field]:
    u = _cap_field(u0, rho, r_cap, margin=0.3)
    try:
        cur = _Iterate(params, nl, kernel, u)
    except FloatingPointError:
        return StartSummary(label, False, 0, math.inf, math.inf), u

    step = opts.step0
    res = math.inf
    converged = False
    iterations = 0
    m2 = rho * rho

    k2 = gridmod._omega_sq_rfft(u.grid)
    for iterations in range(1, opts.max_iters + 1):
        grad = cur.gradient(params, nl, kernel)
        coeff = inner(grad, cur.field) / m2
        gproj = Field(u.grid, grad.values - coeff * cur.field.values)
        res = math.sqrt(inner(gproj, gproj)) / rho
        if res < opts.tol_grad:
            converged = True
            break

        # H1-metric direction: dividing by (shift + |k|^2) flattens the
        # Laplacian stiffness; -coeff estimates the multiplier near a
        # critical point, and the floor keeps the inverse bounded.
        shift = max(abs(coeff), 0.05)
        pre = np.fft.irfftn(np.fft.rfftn(gproj.values) / (shift + k2),
                            s=u.grid.shape, axes=range(u.grid.dim))
        pdir = Field(u.grid, pre)
        pdir = Field(u.grid,
                     pre - (inner(pdir, cur.field) / m2) * cur.field.values)
        if inner(gproj, pdir) <= 0.0:
            pdir = gproj  # keep a guaranteed descent direction

        accepted = False
        while step > 1e-14 * opts.step0:
            trial = Field(u.grid, cur.field.values - step * pdir.values)
            trial = rescale_mass(trial, rho)
            try:
                cand = _Iterate(params, nl, kernel, trial)
                if cand.grad_norm() > r_cap:
                    tau = r_cap * (1.0 - 1e-3) / cand.grad_norm()
                    trial = rescale_mass(dilate(trial, tau, check=False), rho)
                    cand = _Iterate(params, nl, kernel, trial)
            except FloatingPointError:
                step *= 0.5
                continue
            if cand.total < cur.total:
                cur = cand
                step = min(step * 1.1, 1e6 * opts.step0)
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break  # line search exhausted: stationary to float resolution

    return (
        StartSummary(label, converged, iterations, cur.total, res),
        cur.field,
    )


def _noise_start(grid: Grid, seed: int, index: int) -> Field:
    """Smooth positive random bump: squared low-pass noise under an envelope."""
    rng = np.random.default_rng((int(seed), 9176, int(index)))
    white = rng.standard_normal(grid.shape)
    spec = np.fft.rfftn(white)
    k2 = gridmod._omega_sq_rfft(grid)
    k_c = 6.0 * (2.0 * math.pi / grid.L)
    spec *= np.exp(-k2 / k_c ** 2)
    smooth = np.fft.irfftn(spec, s=grid.shape, axes=range(grid.dim))
    envelope = np.exp(-grid.radius_sq() / (2.0 * (grid.L / 6.0) ** 2))
    return Field(grid, (smooth ** 2 + 1e-12) * envelope)


def default_starts(grid: Grid, n_starts: int, seed: int) -> list[tuple[str, Field]]:
    structured = [
        ("lorentzian", lambda: lorentzian_profile(grid, grid.L / 12.0)),
        ("gaussian-narrow", lambda: Field(
            grid, np.exp(-grid.radius_sq() / (2.0 * (grid.L / 12.0) ** 2)))),
        ("gaussian-wide", lambda: Field(
            grid, np.exp(-grid.radius_sq() / (2.0 * (grid.L / 8.0) ** 2)))),
    ]
    out = []
    for label, make in structured[:n_starts]:
        out.append((label, make()))
    for k in range(len(out), n_starts):
        out.append((f"noise-{k}", _noise_start(grid, seed, k)))
    return out


def solve(params: ProblemParams, nl: Nonlinearity, grid: Grid,
          kernel: RieszKernel, bundle: ThresholdBundle,
          opts: SolveOptions | None = None) -> SolveReport:
    """Multistart descent; returns the best start's certified report.

    The run is flagged outside_theory when the mass is at or above the
    bundle threshold or when a growth condition fails; the solver still
    runs (it is an instrument, not a gatekeeper), the flag just records
    that no existence statement backs the output.
    """
    if opts is None:
        opts = SolveOptions()
    if grid.dim != params.N:
        raise SolveError(f"grid dim {grid.dim} != N {params.N}")

    r_cap = opts.r_cap
    if r_cap is None:
        r_cap = bundle.r0
    if r_cap is None:
        raise SolveError(
            "no gradient cap: bundle has no window at this mass; pass r_cap"
        )

    conditions = validate(params, nl)
    outside = any(not c.satisfied for c in conditions)
    if math.isfinite(bundle.rho0):
        outside = outside or params.rho >= bundle.rho0

    starts = default_starts(grid, opts.n_starts, opts.seed)
    jobs = [
        (params, nl, kernel, params.rho, r_cap, u0, opts, label)
        for label, u0 in starts
    ]
    workers = thread_count(opts.n_starts)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda args: _run_start(*args), jobs))
    else:
        results = [_run_start(*args) for args in jobs]

    order = sorted(
        range(len(results)),
        key=lambda i: (not results[i][0].converged, results[i][0].energy, i),
    )
    best_summary, best_field = results[order[0]]

    eb = energy(params, nl, kernel, best_field)
    lam = lambda_of(params, nl, kernel, best_field)
    gradE = _Iterate(params, nl, kernel, best_field).gradient(params, nl, kernel)
    shifted = Field(grid, gradE.values + lam * best_field.values)
    grad_res = math.sqrt(inner(shifted, shifted)) / mass(best_field)
    gn = math.sqrt(gridmod.grad_norm_sq(best_field))

    return SolveReport(
        u_star=best_field,
        energy=eb,
        lambda_=lam,
        grad_residual=grad_res,
        pohozaev=pohozaev_residual(params, nl, kernel, best_field, lam),
        nehari_pohozaev=nehari_pohozaev_residual(params, nl, kernel, best_field),
        mass_final=mass(best_field),
        grad_norm_final=gn,
        boundary_margin=r_cap - gn,
        m_estimate=min(s.energy for s, _ in results),
        iterations=best_summary.iterations,
        converged=best_summary.converged,
        outside_theory=outside,
        r_cap=r_cap,
        starts=tuple(s for s, _ in results),
    )


def m_estimate(params: ProblemParams, nl: Nonlinearity, grid: Grid,
               kernel: RieszKernel, bundle: ThresholdBundle, a: float,
               opts: SolveOptions | None = None) -> float:
    """Best energy at mass a inside the reference ball of the bundle.

    The cap stays the one computed at the bundle's own mass, so sweeps in
    a explore the same constraint set, which is what the monotonicity and
    subadditivity comparisons assume.
    """
    if opts is None:
        opts = SolveOptions()
    if a <= 0.0:
        raise SolveError("mass must be positive")
    r_cap = opts.r_cap if opts.r_cap is not None else bundle.r0
    if r_cap is None:
        raise SolveError("bundle has no window; pass r_cap explicitly")
    params_a = replace(params, rho=a)
    report = solve(params_a, nl, grid, kernel, bundle,
                   replace(opts, r_cap=r_cap))
    return report.m_estimate

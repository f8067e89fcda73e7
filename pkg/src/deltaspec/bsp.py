"""Locate lambda1(alpha) as the zero of mu_alpha below the essential threshold.

mu_alpha is nonincreasing and continuous in lambda and diverges as
lambda -> -infinity, so a sign change bracketed once is kept forever.  The
search probes just below the essential threshold, expands the bracket
leftward by doubling, then closes in with a bisection/regula-falsi hybrid.

Couplings whose mu-zero sits at (or within probe distance of) the threshold
itself, constant backgrounds being the canonical case, would be missed by the
single-probe detection rule: mu(threshold - eps) is positive yet the zero
exists in the limit.  The detection therefore re-probes geometrically closer
to the threshold before giving up, and refines one-sidedly on
[probe, threshold) using the threshold as a virtual negative endpoint.  All
midpoints stay strictly below the threshold.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, SolverError
from .grid import GridFunction, transform
from .potential import Coupling
from .relop import SolverConfig, SpectralResult, lowest_eigenvalue

__all__ = [
    "RootConfig",
    "BoundStateReport",
    "essential_threshold",
    "essential_threshold_D",
    "gamma_trace_multiplier",
    "find_lambda1",
    "reconstruct_eigenfunction",
    "evaluate_reconstruction",
    "write_mu_curve",
]

# shrink factor for the second detection probe
_DETECT_SHRINK = 2.0**-20


@dataclass(frozen=True)
class RootConfig:
    """Root-finder settings.

    eps <= 0 requests the default probe offset 1e-4 * max(1, alpha0^2).
    """

    eps: float = 0.0
    tol: float = 1e-10
    detect_margin: float = 1e-6
    max_doublings: int = 60
    max_bisect: int = 200

    def __post_init__(self) -> None:
        if not (self.tol > 0):
            raise ConfigError(f"root tol must be positive, got {self.tol}")
        if not (self.detect_margin > 0):
            raise ConfigError(
                f"detect_margin must be positive, got {self.detect_margin}"
            )

    def probe_offset(self, alpha0: float) -> float:
        if self.eps > 0:
            return self.eps
        return 1e-4 * max(1.0, alpha0**2)


@dataclass(frozen=True)
class BoundStateReport:
    """Outcome of the lambda1 search."""

    lambda1: Optional[float]
    threshold: float
    trace_phi: Optional[GridFunction]
    mu_curve: tuple
    bracket: tuple
    status: str


def essential_threshold(alpha0: float) -> float:
    """inf of the essential spectrum of the full operator."""
    # + 0.0 normalizes the negative zero at alpha0 = 0
    return -(alpha0**2) / 4.0 + 0.0 if alpha0 >= 0 else 0.0


def essential_threshold_D(alpha0: float, lam: float) -> float:
    """inf of the essential spectrum of the reduced operator, 2 sqrt(-lambda) - alpha0."""
    if not (lam < 0):
        raise ConfigError(f"lambda must be strictly negative, got {lam}")
    return 2.0 * math.sqrt(-lam) - alpha0


def gamma_trace_multiplier(lam: float, k) -> float:
    """Trace of the gamma-field: 1/2 * (|k|^2 - lambda)^{-1/2}."""
    if not (lam < 0):
        raise ConfigError(f"lambda must be strictly negative, got {lam}")
    kmag = np.asarray(k, dtype=float)
    value = 0.5 / np.sqrt(np.sum(kmag**2) - lam)
    return float(value)


class _MuEvaluator:
    """Memoized mu evaluations with a visit log."""

    def __init__(self, coupling: Coupling, solver: SolverConfig):
        self.coupling = coupling
        self.solver = solver
        self.visited: list[tuple[float, float]] = []
        self.results: dict[float, SpectralResult] = {}

    def __call__(self, lam: float) -> float:
        if lam in self.results:
            return self.results[lam].eigenvalue
        res = lowest_eigenvalue(self.coupling, lam, self.solver)
        self.results[lam] = res
        self.visited.append((lam, res.eigenvalue))
        return res.eigenvalue


def _check_monotone_visits(
    visited: Sequence[tuple[float, float]], solver: SolverConfig
) -> None:
    # strict decrease in lambda, allowing solver-level noise between samples
    slack = 100.0 * solver.tol
    pts = sorted(visited)
    for (la, ma), (lb, mb) in zip(pts, pts[1:]):
        if la < lb and ma < mb - slack:
            raise SolverError(
                f"mu samples are not decreasing: mu({la!r}) = {ma!r} < "
                f"mu({lb!r}) = {mb!r}"
            )


def _nonnegative_trace(res: SpectralResult) -> GridFunction:
    phi = res.eigenvector
    vals = phi.samples
    if float(np.max(vals.real)) < 0.0:
        vals = -vals
    return GridFunction(phi.grid, vals)


def find_lambda1(
    coupling: Coupling, solver: SolverConfig, root: RootConfig
) -> BoundStateReport:
    """Search for the unique zero of mu_alpha strictly below the threshold."""
    alpha0 = coupling.background
    threshold = essential_threshold(alpha0)
    eps = root.probe_offset(alpha0)
    mu = _MuEvaluator(coupling, solver)

    def finish(lam: float, lo: float, hi: float) -> BoundStateReport:
        res = mu.results[lam]
        _check_monotone_visits(mu.visited, solver)
        return BoundStateReport(
            lambda1=lam,
            threshold=threshold,
            trace_phi=_nonnegative_trace(res),
            mu_curve=tuple(mu.visited),
            bracket=(lo, hi),
            status="bound_state",
        )

    def no_bound_state(lo: float, hi: float) -> BoundStateReport:
        _check_monotone_visits(mu.visited, solver)
        return BoundStateReport(
            lambda1=None,
            threshold=threshold,
            trace_phi=None,
            mu_curve=tuple(mu.visited),
            bracket=(lo, hi),
            status="no_bound_state_detected",
        )

    probe = threshold - eps
    mu_probe = mu(probe)
    if abs(mu_probe) <= root.tol:
        return finish(probe, probe, threshold)

    if mu_probe > 0:
        # zero, if any, hides between the probe and the threshold
        if mu_probe > root.detect_margin:
            probe2 = threshold - eps * _DETECT_SHRINK
            if mu(probe2) > root.detect_margin:
                return no_bound_state(probe, probe2)
        lo, hi = probe, threshold  # mu(lo) > 0, threshold acts as virtual endpoint
        for _ in range(root.max_bisect):
            mid = 0.5 * (lo + hi)
            if not (mid < threshold):
                break
            m = mu(mid)
            if abs(m) <= root.tol:
                return finish(mid, lo, hi)
            if m > 0:
                lo = mid
            else:
                hi = mid
        return no_bound_state(lo, hi)

    # mu(probe) < -tol: expand the bracket leftward by doubling
    hi, f_hi = probe, mu_probe
    lo = None
    for m_exp in range(1, root.max_doublings + 1):
        cand = threshold - (2.0**m_exp) * eps
        f_cand = mu(cand)
        if abs(f_cand) <= root.tol:
            return finish(cand, cand, hi)
        if f_cand > 0:
            lo, f_lo = cand, f_cand
            break
        hi, f_hi = cand, f_cand
    if lo is None:
        raise SolverError(
            f"bracket expansion exhausted {root.max_doublings} doublings without "
            "finding mu > 0"
        )

    # bisection with a regula-falsi acceleration step on alternating iterations
    use_secant = False
    for _ in range(root.max_bisect):
        if use_secant and f_hi != f_lo:
            mid = (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
            width = hi - lo
            if not (lo + 1e-3 * width <= mid <= hi - 1e-3 * width):
                mid = 0.5 * (lo + hi)
        else:
            mid = 0.5 * (lo + hi)
        use_secant = not use_secant
        m = mu(mid)
        if abs(m) <= root.tol:
            return finish(mid, lo, hi)
        if m > 0:
            lo, f_lo = mid, m
        else:
            hi, f_hi = mid, m
    raise SolverError(
        f"root refinement exceeded {root.max_bisect} iterations; bracket "
        f"[{lo!r}, {hi!r}]"
    )


def reconstruct_eigenfunction(
    trace_phi: GridFunction, lam: float, xd_samples: Sequence[float]
) -> np.ndarray:
    """Extend a boundary trace into the bulk with the kernel e^{-rho(k)|x_d|}.

    Returns an array of shape (cell_count, len(xd_samples)); the x_d = 0
    column is the trace itself, copied verbatim.
    """
    if not (lam < 0):
        raise ConfigError(f"lambda must be strictly negative, got {lam}")
    g = trace_phi.grid
    phihat = transform(trace_phi, "forward")
    rho = np.sqrt(g.frequency_magnitudes() ** 2 - lam)
    is_real = not np.any(trace_phi.samples.imag != 0.0)
    dtype = np.float64 if is_real else np.complex128
    out = np.empty((g.cell_count, len(xd_samples)), dtype=dtype)
    for j, xd in enumerate(xd_samples):
        if xd == 0.0:
            col = trace_phi.samples
        else:
            damped = GridFunction(g, np.exp(-rho * abs(xd)) * phihat.samples)
            col = transform(damped, "inverse").samples
        out[:, j] = col.real if is_real else col
    return out


def evaluate_reconstruction(
    trace_phi: GridFunction,
    lam: float,
    transverse_axis: Sequence[float],
    xd_samples: Sequence[float],
) -> np.ndarray:
    """Evaluate the extended eigenfunction at off-lattice points.

    The trace is band-limited, so its Fourier series is exact at arbitrary
    coordinates; nearest-node sampling would staircase the field and wreck
    any stencil residual on a non-matching grid.  transverse_axis supplies
    one coordinate list reused per axis (tensor grid); output shape is
    (len(axis),)*dim + (len(xd_samples),), real for real traces.
    """
    if not (lam < 0):
        raise ConfigError(f"lambda must be strictly negative, got {lam}")
    g = trace_phi.grid
    phihat = transform(trace_phi, "forward").samples
    rho = np.sqrt(g.frequency_magnitudes() ** 2 - lam)
    xd = np.asarray(list(xd_samples), dtype=float)
    # mode amplitudes per requested height, flat frequency order
    damped = phihat[:, None] * np.exp(-rho[:, None] * np.abs(xd)[None, :])
    axis = np.asarray(list(transverse_axis), dtype=float)
    freqs = g.axis_frequencies()
    scale = (np.pi / g.half_extent) / np.sqrt(2.0 * np.pi)
    phase = np.exp(1j * np.outer(axis, freqs)) * scale
    if g.dim == 1:
        out = phase @ damped
    else:
        t = axis.size
        cube = damped.reshape(g.n_per_axis, g.n_per_axis, xd.size)
        out = np.einsum("ak,bl,klj->abj", phase, phase, cube, optimize=True)
        out = out.reshape(t, t, xd.size)
    if not np.any(trace_phi.samples.imag != 0.0):
        return np.ascontiguousarray(out.real)
    return out


def write_mu_curve(report: BoundStateReport, path: str) -> None:
    """CSV export of the visited (lambda, mu) samples, sorted by lambda."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda", "mu"])
        for lam, m in sorted(report.mu_curve):
            writer.writerow([f"{lam:.17g}", f"{m:.17g}"])

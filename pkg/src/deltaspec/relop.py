"""The relativistic operator D = 2(-Lap - lambda)^{1/2} - alpha on the grid.

The square root acts as the Fourier multiplier 2(|k|^2 - lambda)^{1/2} on the
periodic frequency lattice; the coupling acts by pointwise multiplication in
physical space.  mu(lambda) = inf spec(D) is computed by one of three routes:

* "diagonal"  constant couplings: D is diagonal in the frequency basis, so
  the bottom of the spectrum is exactly 2 sqrt(-lambda) - alpha0 at k = 0.
* "dense"     cell counts <= 4096 (or force_dense): the multiplier becomes a
  real symmetric circulant kernel and the lowest eigenpair comes from a
  partial Hermitian diagonalization.
* "lanczos"   larger grids: matrix-free FFT application inside an implicitly
  restarted Lanczos iteration with a fixed deterministic start vector; the
  result is verified against the residual tolerance and never silently
  accepted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .errors import ConfigError, SolverError
from .grid import Grid, GridFunction, norm, transform
from .potential import Coupling, sample_coupling

__all__ = [
    "SolverConfig",
    "RelativisticOperator",
    "SpectralResult",
    "make_operator",
    "apply",
    "form_value",
    "lowest_eigenvalue",
]


@dataclass(frozen=True)
class SolverConfig:
    """Eigensolver settings surfaced in the CLI."""

    tol: float = 1e-10
    max_iter: int = 5000
    force_dense: bool = False
    seed: int = 42

    def __post_init__(self) -> None:
        if not (self.tol > 0):
            raise ConfigError(f"solver tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ConfigError(f"solver max_iter must be >= 1, got {self.max_iter}")


@dataclass(frozen=True)
class RelativisticOperator:
    """D_{alpha,lambda} with its frequency multiplier precomputed."""

    coupling: Coupling
    lam: float
    grid: Grid
    multiplier: np.ndarray

    def __post_init__(self) -> None:
        if not (self.lam < 0):
            raise ConfigError(f"lambda must be strictly negative, got {self.lam}")
        if not np.all(self.multiplier > 0):
            raise ConfigError("multiplier must be strictly positive")


@dataclass(frozen=True)
class SpectralResult:
    """Lowest eigenpair of a symmetric operator plus solver diagnostics.

    eigenvector is a GridFunction for the relativistic operator and a flat
    node array for the box oracle; both are unit L2 normalized.  The optional
    second pair supports simplicity/gap checks.
    """

    eigenvalue: float
    eigenvector: object
    residual: float
    iterations: int
    method: str
    second_eigenvalue: Optional[float] = None
    second_eigenvector: object = field(default=None, repr=False)


def make_operator(coupling: Coupling, lam: float) -> RelativisticOperator:
    grid = coupling.grid
    kmag = grid.frequency_magnitudes()
    mult = 2.0 * np.sqrt(kmag**2 - lam)
    return RelativisticOperator(
        coupling=coupling, lam=float(lam), grid=grid, multiplier=mult
    )


def apply(op: RelativisticOperator, phi: GridFunction) -> GridFunction:
    """D phi: transform, multiply by 2(|k|^2-lambda)^{1/2}, invert, subtract alpha phi."""
    if phi.grid != op.grid:
        raise ConfigError("grid mismatch between operator and argument")
    phihat = transform(phi, "forward")
    weighted = GridFunction(op.grid, op.multiplier * phihat.samples)
    kinetic = transform(weighted, "inverse")
    alpha = sample_coupling(op.coupling).real_samples
    return GridFunction(op.grid, kinetic.samples - alpha * phi.samples)


def form_value(op: RelativisticOperator, phi: GridFunction) -> float:
    """Quadratic form value in frequency space, real by symmetry."""
    l2 = norm(phi, "L2")
    if l2 == 0.0:
        raise ConfigError("form_value requires a nonzero argument")
    g = op.grid
    phihat = transform(phi, "forward")
    dk = np.pi / g.half_extent
    kinetic = float(np.sum(op.multiplier * np.abs(phihat.samples) ** 2) * dk**g.dim)
    alpha = sample_coupling(op.coupling).real_samples
    pot = float(np.sum(alpha * np.abs(phi.samples) ** 2) * g.spacing**g.dim)
    return kinetic - pot


def _sign_normalize(vec: np.ndarray) -> np.ndarray:
    pivot = vec[np.argmax(np.abs(vec))]
    if np.real(pivot) < 0:
        return -vec
    return vec


def _dense_kernel(op: RelativisticOperator) -> np.ndarray:
    """Physical-space matrix of the multiplier part (real circulant)."""
    g = op.grid
    n = g.n_per_axis
    shape = (n,) * g.dim
    c = np.fft.ifftn(op.multiplier.reshape(shape)).real
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    if g.dim == 1:
        return c[idx]
    # block-circulant with circulant blocks: K[(m1,m2),(n1,n2)] = c[m1-n1, m2-n2]
    big = c[np.ix_(idx.ravel(), idx.ravel())]
    K = (
        big.reshape(n, n, n, n)
        .transpose(0, 2, 1, 3)
        .reshape(n**2, n**2)
    )
    return K


def _diagonal_path(op: RelativisticOperator, solver: SolverConfig) -> SpectralResult:
    g = op.grid
    alpha0 = op.coupling.background
    mu = float(np.min(op.multiplier)) - alpha0  # minimum sits at k = 0
    const = (2.0 * g.half_extent) ** (-g.dim / 2.0)
    vec = GridFunction(g, np.full(g.cell_count, const, dtype=complex))
    resid = norm(
        GridFunction(g, apply(op, vec).samples - mu * vec.samples), "L2"
    )
    return SpectralResult(
        eigenvalue=mu, eigenvector=vec, residual=resid, iterations=0, method="diagonal"
    )


def _dense_path(op: RelativisticOperator, solver: SolverConfig) -> SpectralResult:
    g = op.grid
    K = _dense_kernel(op)
    alpha = sample_coupling(op.coupling).real_samples
    D = K - np.diag(alpha)
    w, v = scipy.linalg.eigh(D, subset_by_index=(0, 1))
    scale = g.spacing ** (g.dim / 2.0)
    first = _sign_normalize(v[:, 0]) / scale
    second = _sign_normalize(v[:, 1]) / scale
    vec = GridFunction(g, first.astype(complex))
    resid = norm(GridFunction(g, apply(op, vec).samples - w[0] * vec.samples), "L2")
    if resid > max(solver.tol, 1e-8 * float(np.max(np.abs(w)))):
        raise SolverError(
            f"dense eigensolve residual {resid:.3e} exceeds tolerance {solver.tol:.3e}"
        )
    return SpectralResult(
        eigenvalue=float(w[0]),
        eigenvector=vec,
        residual=resid,
        iterations=0,
        method="dense",
        second_eigenvalue=float(w[1]),
        second_eigenvector=GridFunction(g, second.astype(complex)),
    )


def _lanczos_path(op: RelativisticOperator, solver: SolverConfig) -> SpectralResult:
    g = op.grid
    n = g.cell_count
    shape = (g.n_per_axis,) * g.dim
    alpha = sample_coupling(op.coupling).real_samples
    mult = op.multiplier.reshape(shape)
    h = g.spacing
    counter = {"matvec": 0}

    def matvec(x: np.ndarray) -> np.ndarray:
        counter["matvec"] += 1
        arr = x.reshape(shape)
        kin = np.fft.ifftn(mult * np.fft.fftn(arr)).real.reshape(-1)
        return kin - alpha * x

    lin = scipy.sparse.linalg.LinearOperator((n, n), matvec=matvec, dtype=float)
    rng = np.random.default_rng(solver.seed)
    v0 = np.ones(n) + 0.01 * rng.standard_normal(n)
    v0 /= np.linalg.norm(v0)
    try:
        w, v = scipy.sparse.linalg.eigsh(
            lin, k=1, which="SA", v0=v0, maxiter=solver.max_iter, tol=0
        )
    except scipy.sparse.linalg.ArpackNoConvergence as exc:
        best = "none"
        if exc.eigenvalues is not None and len(exc.eigenvalues):
            mu_best = float(exc.eigenvalues[0])
            vb = exc.eigenvectors[:, 0]
            rb = np.linalg.norm(matvec(vb) - mu_best * vb) * h ** (g.dim / 2.0)
            best = f"mu={mu_best!r} residual={rb:.3e}"
        raise SolverError(
            f"Lanczos failed to converge within {solver.max_iter} iterations "
            f"(best estimate: {best})"
        ) from exc
    mu = float(w[0])
    vec = _sign_normalize(v[:, 0]) / h ** (g.dim / 2.0)
    phi = GridFunction(g, vec.astype(complex))
    resid = norm(GridFunction(g, apply(op, phi).samples - mu * phi.samples), "L2")
    if resid > solver.tol:
        raise SolverError(
            f"Lanczos residual {resid:.3e} exceeds solver tolerance {solver.tol:.3e}"
        )
    return SpectralResult(
        eigenvalue=mu,
        eigenvector=phi,
        residual=resid,
        iterations=counter["matvec"],
        method="lanczos",
    )


def lowest_eigenvalue(
    coupling: Coupling,
    lam: float,
    solver: SolverConfig,
    method: str | None = None,
) -> SpectralResult:
    """mu_alpha(lambda) with eigenvector, residual and route diagnostics.

    method overrides the automatic route selection (testing hook); the
    default picks "diagonal" for constant couplings, "dense" up to 4096
    cells or when force_dense is set, and "lanczos" beyond.
    """
    if not (lam < 0):
        raise ConfigError(f"lambda must be strictly negative, got {lam}")
    op = make_operator(coupling, lam)
    if method is None:
        if coupling.is_constant and not solver.force_dense:
            method = "diagonal"
        elif coupling.grid.cell_count <= 4096 or solver.force_dense:
            method = "dense"
        else:
            method = "lanczos"
    if method == "diagonal":
        if not coupling.is_constant:
            raise ConfigError("diagonal route requires a constant coupling")
        return _diagonal_path(op, solver)
    if method == "dense":
        return _dense_path(op, solver)
    if method == "lanczos":
        return _lanczos_path(op, solver)
    raise ConfigError(f"unknown eigensolver method {method!r}")

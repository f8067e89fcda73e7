"""Direct finite-difference discretization of the full d-dimensional operator.

This route never touches the half-order reduction: it assembles the
(2d+1)-point Dirichlet Laplacian on a truncated box and models the surface
potential as a diagonal interface term -alpha(x')/h_n on the grid row nearest
the surface.  Agreement between its lowest eigenvalue and the root of the
reduced operator's mu-curve is the central cross-check of the package.

The normal direction uses Dirichlet walls rather than periodic wrap: bound
states decay like e^{-sqrt(-lambda)|x_d|}, so wall placement perturbs the
eigenvalue exponentially little.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import eigh

from .errors import ConfigError, InvariantViolation, SolverError
from .grid import Grid, GridFunction
from .potential import Coupling
from .rearrange import ranked_cells_from_points, steiner_symmetrize
from .relop import SolverConfig, SpectralResult

__all__ = [
    "BoxGrid",
    "SurfaceSpec",
    "BoxFunction",
    "AssembledOperator",
    "GroundStateReport",
    "assemble",
    "lowest_eigenpair",
    "ground_state_checks",
    "steiner_rayleigh_check",
    "embed_transverse_profile",
    "save_box_eigenvector",
    "load_box_eigenvector",
]

_DENSE_LIMIT = 4096
# relative noise floor for sign checks: far-field samples of a bound state sit
# many orders below machine noise of the eigensolve, so a strict min > 0 test
# is undecidable in floating point
_SIGN_FLOOR = 1e-9
_HEADER = struct.Struct("<IIIIdd")  # dim, n_transverse, n_normal, pad


@dataclass(frozen=True)
class BoxGrid:
    """Dirichlet box with a grid plane exactly at x_d = 0.

    The box is [-Ht, Ht]^(d-1) x [-Hn, Hn]; unknowns live on interior nodes
    only.  n_normal must be even so that x_d = 0 is a sample.
    """

    dim: int
    n_transverse: int
    n_normal: int
    half_extent_transverse: float
    half_extent_normal: float

    def __post_init__(self) -> None:
        if self.dim not in (2, 3):
            raise ConfigError(f"box dim must be 2 or 3, got {self.dim}")
        if self.n_transverse < 2:
            raise ConfigError(
                f"n_transverse must be at least 2, got {self.n_transverse}"
            )
        if self.n_normal < 2 or self.n_normal % 2:
            raise ConfigError(
                f"n_normal must be even and at least 2, got {self.n_normal}"
            )
        if not (self.half_extent_transverse > 0 and self.half_extent_normal > 0):
            raise ConfigError("box half extents must be positive")

    @property
    def spacing_transverse(self) -> float:
        return 2.0 * self.half_extent_transverse / self.n_transverse

    @property
    def spacing_normal(self) -> float:
        return 2.0 * self.half_extent_normal / self.n_normal

    @property
    def interior_shape(self) -> tuple:
        t = self.n_transverse - 1
        return (t,) * (self.dim - 1) + (self.n_normal - 1,)

    @property
    def unknown_count(self) -> int:
        return int(np.prod(self.interior_shape))

    @property
    def normal_zero_index(self) -> int:
        # interior index of the x_d = 0 plane
        return self.n_normal // 2 - 1

    def transverse_axis_nodes(self) -> np.ndarray:
        h = self.spacing_transverse
        return -self.half_extent_transverse + h * np.arange(1, self.n_transverse)

    def normal_axis_nodes(self) -> np.ndarray:
        h = self.spacing_normal
        return -self.half_extent_normal + h * np.arange(1, self.n_normal)

    def transverse_nodes(self) -> np.ndarray:
        """Interior transverse coordinates, shape (m, dim-1), C order."""
        axis = self.transverse_axis_nodes()
        if self.dim == 2:
            return axis[:, None]
        a, b = np.meshgrid(axis, axis, indexing="ij")
        return np.column_stack([a.ravel(), b.ravel()])


@dataclass(frozen=True)
class SurfaceSpec:
    """Surface the coupling lives on: the flat plane or a compact graph bump."""

    kind: str
    xi: Optional[GridFunction] = None
    lipschitz_bound: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("hyperplane", "graph"):
            raise ConfigError(f"surface kind must be hyperplane|graph, got {self.kind!r}")
        if self.kind == "hyperplane":
            if self.xi is not None and np.any(self.xi.samples != 0):
                raise ConfigError("hyperplane surface requires xi identically zero")
            return
        if self.xi is None:
            raise ConfigError("graph surface requires a xi profile")
        vals = self.xi.samples
        if np.any(vals.imag != 0):
            raise ConfigError("xi must be real-valued")
        g = self.xi.grid
        nz = np.flatnonzero(vals.real != 0)
        if nz.size:
            reach = np.max(np.abs(g.nodes()[nz]))
            if reach >= g.half_extent - g.spacing:
                raise ConfigError(
                    "xi must vanish near the edge of its grid (compact support)"
                )
        slope = _max_one_sided_slope(self.xi)
        if self.lipschitz_bound < slope:
            raise ConfigError(
                f"stated lipschitz_bound {self.lipschitz_bound} is below the "
                f"measured one-sided slope {slope}"
            )

    def height_at(self, points: np.ndarray) -> np.ndarray:
        if self.kind == "hyperplane" or self.xi is None:
            return np.zeros(points.shape[0])
        idx = _snap_indices(self.xi.grid, points)
        return self.xi.samples.real[idx]

    def weight_at(self, points: np.ndarray) -> np.ndarray:
        """Surface-measure factor sqrt(1 + |grad xi|^2) via one-sided differences."""
        if self.kind == "hyperplane" or self.xi is None:
            return np.ones(points.shape[0])
        g = self.xi.grid
        vals = self.xi.reshaped().real
        grad_sq = np.zeros(vals.shape)
        for ax in range(g.dim):
            diff = (np.roll(vals, -1, axis=ax) - vals) / g.spacing
            grad_sq = grad_sq + diff**2
        idx = _snap_indices(g, points)
        return np.sqrt(1.0 + grad_sq.ravel()[idx])


def _max_one_sided_slope(xi: GridFunction) -> float:
    g = xi.grid
    vals = xi.reshaped().real
    worst = 0.0
    for ax in range(g.dim):
        diff = np.abs(np.roll(vals, -1, axis=ax) - vals) / g.spacing
        worst = max(worst, float(np.max(diff)))
    return worst


def _snap_indices(grid: Grid, points: np.ndarray) -> np.ndarray:
    """Flat lattice indices of the nodes nearest the given points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != grid.dim:
        raise ConfigError(
            f"points have dimension {pts.shape[1]}, lattice has {grid.dim}"
        )
    steps = np.rint((pts + grid.half_extent) / grid.spacing).astype(np.int64)
    steps = np.clip(steps, 0, grid.n_per_axis - 1)
    flat = steps[:, 0]
    for ax in range(1, grid.dim):
        flat = flat * grid.n_per_axis + steps[:, ax]
    return flat


@dataclass(frozen=True)
class BoxFunction:
    """Real function on the interior nodes of a BoxGrid, flat C order."""

    grid: BoxGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.grid.unknown_count,):
            raise ConfigError(
                f"expected {self.grid.unknown_count} interior values, "
                f"got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ConfigError("box function contains non-finite samples")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def reshaped(self) -> np.ndarray:
        return self.values.reshape(self.grid.interior_shape)


@dataclass(frozen=True)
class AssembledOperator:
    """Sparse symmetric matrix plus the bookkeeping needed for cross-checks."""

    matrix: sp.csr_matrix = field(repr=False)
    laplacian: sp.csr_matrix = field(repr=False)
    grid: BoxGrid
    surface: SurfaceSpec
    coupling: Coupling
    surface_indices: np.ndarray = field(repr=False)
    interface_alpha: np.ndarray = field(repr=False)
    interface_weight: np.ndarray = field(repr=False)


def _dirichlet_1d(n_interior: int, h: float) -> sp.csr_matrix:
    main = np.full(n_interior, 2.0 / h**2)
    off = np.full(n_interior - 1, -1.0 / h**2)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def _sample_coupling(coupling: Coupling, points: np.ndarray) -> np.ndarray:
    """alpha0 + alpha1 at arbitrary transverse points via nearest-node lookup.

    Outside the stated support radius the perturbation vanishes identically,
    so points beyond the periodic lattice are pure background.
    """
    g = coupling.grid
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.full(pts.shape[0], coupling.background)
    inside = np.max(np.abs(pts), axis=1) <= coupling.support_radius + 0.5 * g.spacing
    if np.any(inside):
        idx = _snap_indices(g, pts[inside])
        out[inside] += coupling.perturbation.samples.real[idx]
    return out


def assemble(
    coupling: Coupling, surface: SurfaceSpec, grid: BoxGrid
) -> AssembledOperator:
    """Dirichlet Laplacian plus the diagonal interface row."""
    if grid.dim != coupling.grid.dim + 1:
        raise ConfigError(
            f"coupling lattice dimension {coupling.grid.dim} does not match "
            f"box dimension {grid.dim}"
        )
    tpoints = grid.transverse_nodes()
    heights = surface.height_at(tpoints)
    hn = grid.spacing_normal
    if np.max(np.abs(heights)) >= grid.half_extent_normal - hn:
        raise ConfigError("surface exits the box in the normal direction")
    if surface.kind == "graph" and surface.xi is not None:
        nz = np.flatnonzero(surface.xi.samples.real != 0)
        if nz.size:
            reach = np.max(np.abs(surface.xi.grid.nodes()[nz]))
            if reach >= grid.half_extent_transverse:
                raise ConfigError("surface bump exits the box transversally")

    t_int = grid.n_transverse - 1
    n_int = grid.n_normal - 1
    lap_t = _dirichlet_1d(t_int, grid.spacing_transverse)
    lap_n = _dirichlet_1d(n_int, hn)
    eye_t = sp.identity(t_int, format="csr")
    eye_n = sp.identity(n_int, format="csr")
    if grid.dim == 2:
        lap = sp.kron(lap_t, eye_n) + sp.kron(eye_t, lap_n)
    else:
        lap = (
            sp.kron(sp.kron(lap_t, eye_t), eye_n)
            + sp.kron(sp.kron(eye_t, lap_t), eye_n)
            + sp.kron(sp.kron(eye_t, eye_t), lap_n)
        )
    lap = lap.tocsr()

    # one delta node per transverse column, nearest the surface height
    normal_nodes = grid.normal_axis_nodes()
    node_idx = np.rint((heights + grid.half_extent_normal) / hn).astype(np.int64) - 1
    node_idx = np.clip(node_idx, 0, n_int - 1)
    if surface.kind == "hyperplane":
        node_idx[:] = grid.normal_zero_index
    base = np.arange(tpoints.shape[0], dtype=np.int64) * n_int
    surface_flat = base + node_idx

    alpha = _sample_coupling(coupling, tpoints)
    weight = surface.weight_at(tpoints)
    delta = np.zeros(grid.unknown_count)
    delta[surface_flat] = -alpha * weight / hn
    matrix = (lap + sp.diags(delta, format="csr")).tocsr()

    asym = (matrix - matrix.T).tocoo()
    if asym.nnz and np.max(np.abs(asym.data)) != 0.0:
        raise InvariantViolation("assembled operator is not exactly symmetric")
    return AssembledOperator(
        matrix=matrix,
        laplacian=lap,
        grid=grid,
        surface=surface,
        coupling=coupling,
        surface_indices=surface_flat,
        interface_alpha=alpha,
        interface_weight=weight,
    )


def _shift_for(handle: AssembledOperator) -> float:
    # sigma strictly below the lowest eigenvalue: the effective coupling is
    # bounded by max(alpha_+ * weight), and the flat-interface bound -a^2/4
    # holds up to discretization wiggle absorbed by the -1
    a_eff = float(np.max(np.maximum(handle.interface_alpha, 0.0) * handle.interface_weight))
    return -(a_eff**2) / 4.0 - 1.0


def _residual_gate(handle: AssembledOperator, solver: SolverConfig) -> float:
    scale = float(np.max(np.abs(handle.matrix.diagonal())))
    return max(solver.tol, 1e-12 * scale)


def lowest_eigenpair(handle: AssembledOperator, solver: SolverConfig) -> SpectralResult:
    """Two lowest eigenpairs, dense below 4096 unknowns, else shifted Lanczos."""
    A = handle.matrix
    m = A.shape[0]
    if m <= _DENSE_LIMIT or solver.force_dense:
        w, v = eigh(A.toarray(), subset_by_index=(0, 1))
        vecs = v.T
        iterations = 0
        method = "dense"
    else:
        rng = np.random.default_rng(solver.seed)
        v0 = np.ones(m) + 0.01 * rng.standard_normal(m)
        try:
            w, v = spla.eigsh(
                A,
                k=2,
                sigma=_shift_for(handle),
                which="LM",
                v0=v0,
                maxiter=solver.max_iter,
                tol=0,
            )
        except spla.ArpackNoConvergence as exc:
            raise SolverError(f"shifted Lanczos failed to converge: {exc}") from exc
        order = np.argsort(w)
        w = w[order]
        vecs = v[:, order].T
        iterations = 0  # the shift-invert driver does not report its count
        method = "lanczos"

    cell = handle.grid.spacing_transverse ** (handle.grid.dim - 1) * handle.grid.spacing_normal
    out = []
    for val, vec in zip(w, vecs):
        if vec[np.argmax(np.abs(vec))] < 0:
            vec = -vec
        vec = vec / (np.linalg.norm(vec) * np.sqrt(cell))
        out.append((float(val), BoxFunction(handle.grid, vec)))
    (lam1, u1), (lam2, u2) = out

    resid = float(
        np.linalg.norm(A @ u1.values - lam1 * u1.values)
        / np.linalg.norm(u1.values)
    )
    gate = _residual_gate(handle, solver)
    if resid > gate:
        raise SolverError(
            f"eigenpair residual {resid:.3e} exceeds the gate {gate:.3e}"
        )
    return SpectralResult(
        eigenvalue=lam1,
        eigenvector=u1,
        residual=resid,
        iterations=iterations,
        method=method,
        second_eigenvalue=lam2,
        second_eigenvector=u2,
    )


@dataclass(frozen=True)
class GroundStateReport:
    sign_definite: bool
    min_off_surface: float
    max_abs: float
    gap: float
    gap_ok: bool
    positivity_margin: float
    noise_floor: float


def ground_state_checks(
    result: SpectralResult,
    surface: SurfaceSpec,
    gap_tol: Optional[float] = None,
) -> GroundStateReport:
    """Sign-definiteness off the surface nodes, simplicity, positivity margin.

    Sign-definiteness is decided against a relative noise floor: deep in the
    Dirichlet corners the true state lies far below eigensolver noise, so a
    literal min > 0 is not a decidable test at double precision.
    """
    u = result.eigenvector
    if not isinstance(u, BoxFunction):
        raise ConfigError("expected an eigenvector on a box grid")
    vals = u.values
    # global sign normalization: majority mass positive
    if float(np.sum(vals)) < 0:
        vals = -vals
    mask = np.ones(vals.shape, dtype=bool)
    grid = u.grid
    # off-surface samples: drop the whole interface row(s)
    if surface.kind == "hyperplane":
        resh = mask.reshape(grid.interior_shape)
        resh[..., grid.normal_zero_index] = False
    else:
        tpoints = grid.transverse_nodes()
        heights = surface.height_at(tpoints)
        n_int = grid.n_normal - 1
        node_idx = np.clip(
            np.rint((heights + grid.half_extent_normal) / grid.spacing_normal).astype(np.int64) - 1,
            0,
            n_int - 1,
        )
        flat = np.arange(tpoints.shape[0], dtype=np.int64) * n_int + node_idx
        mask[flat] = False
    off = vals[mask]
    max_abs = float(np.max(np.abs(vals)))
    min_off = float(np.min(off))
    floor = _SIGN_FLOOR * max_abs
    sign_definite = min_off > -floor

    lam1 = result.eigenvalue
    if gap_tol is None:
        gap_tol = 1e-6 * abs(lam1)
    if result.second_eigenvalue is None:
        gap = float("nan")
        gap_ok = False
    else:
        gap = float(result.second_eigenvalue - lam1)
        gap_ok = gap > gap_tol
    margin = min_off / max_abs if max_abs > 0 else float("nan")
    return GroundStateReport(
        sign_definite=bool(sign_definite),
        min_off_surface=min_off,
        max_abs=max_abs,
        gap=gap,
        gap_ok=bool(gap_ok),
        positivity_margin=float(margin),
        noise_floor=floor,
    )


def steiner_rayleigh_check(
    result: SpectralResult, coupling: Coupling, handle: AssembledOperator
) -> tuple:
    """Rayleigh quotient of the slice-rearranged state under the rearranged
    coupling, against the ground energy of the original coupling.

    Every comparison in the underlying chain (transverse Dirichlet energy,
    normal Dirichlet energy, interface row, norms) is a sorted-placement
    inequality that holds exactly on the lattice, so the first value can
    exceed the second only by rounding.
    """
    if handle.surface.kind != "hyperplane":
        raise ConfigError("the rearrangement route requires the flat interface")
    u = result.eigenvector
    if not isinstance(u, BoxFunction):
        raise ConfigError("expected an eigenvector on a box grid")
    vals = u.values
    if float(np.sum(vals)) < 0:
        vals = -vals
    vmax = float(np.max(vals))
    if vmax <= 0 or float(np.min(vals)) < -_SIGN_FLOOR * vmax:
        raise ConfigError("input state changes sign beyond the noise floor")
    vals = np.maximum(vals, 0.0)

    grid = handle.grid
    shape = grid.interior_shape
    t_count = int(np.prod(shape[:-1]))
    n_int = shape[-1]
    ranking = ranked_cells_from_points(grid.transverse_nodes())

    u_mat = vals.reshape(t_count, n_int)
    u_star = steiner_symmetrize(u_mat, ranking)

    alpha1 = handle.interface_alpha - coupling.background
    alpha1_star = steiner_symmetrize(
        np.maximum(alpha1, 0.0).reshape(t_count, 1), ranking
    )[:, 0]
    delta = np.zeros(grid.unknown_count)
    delta[handle.surface_indices] = -(coupling.background + alpha1_star) / grid.spacing_normal
    a_star = handle.laplacian + sp.diags(delta, format="csr")

    u_flat = u_mat.ravel()
    s_flat = u_star.ravel()
    first = float(s_flat @ (a_star @ s_flat) / (s_flat @ s_flat))
    second = float(u_flat @ (handle.matrix @ u_flat) / (u_flat @ u_flat))
    return first, second


def embed_transverse_profile(
    profile: GridFunction, columns: np.ndarray, grid: BoxGrid
) -> BoxFunction:
    """Lift per-(transverse node, normal node) column data onto the box.

    profile supplies the transverse lattice the columns were computed on;
    columns has shape (lattice cell count, n_normal_interior).
    """
    tpoints = grid.transverse_nodes()
    idx = _snap_indices(profile.grid, tpoints)
    picked = np.asarray(columns)[idx]
    if np.iscomplexobj(picked):
        if np.any(picked.imag != 0):
            raise ConfigError("embedded profile must be real")
        picked = picked.real
    return BoxFunction(grid, np.ascontiguousarray(picked).ravel())


def save_box_eigenvector(fun: BoxFunction, path: str) -> None:
    """Binary export: 32-byte header then interleaved (re, im) float64 LE."""
    g = fun.grid
    header = _HEADER.pack(
        g.dim,
        g.n_transverse,
        g.n_normal,
        0,
        g.half_extent_transverse,
        g.half_extent_normal,
    )
    payload = np.empty((fun.values.size, 2), dtype="<f8")
    payload[:, 0] = fun.values
    payload[:, 1] = 0.0
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def load_box_eigenvector(path: str) -> BoxFunction:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ConfigError(f"file too short for a box header: {path}")
    dim, n_t, n_n, _, half_t, half_n = _HEADER.unpack_from(raw)
    grid = BoxGrid(dim, n_t, n_n, half_t, half_n)
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if data.size != 2 * grid.unknown_count:
        raise ConfigError(
            f"payload holds {data.size // 2} samples, expected {grid.unknown_count}"
        )
    pairs = data.reshape(-1, 2)
    if np.any(pairs[:, 1] != 0):
        raise ConfigError("box eigenvector payload must be real")
    return BoxFunction(grid, pairs[:, 0].copy())

"""Uniform periodic grids with unitary discrete Fourier transforms.

The transverse space (1 or 2 dimensions) is truncated to the periodic box
[-L, L) per axis and sampled at cell centers x_m = -L + m*h with h = 2L/N.
The dual lattice carries frequencies k_j = (pi/L)*j in DFT storage order;
the unpaired Nyquist mode is assigned -(pi/L)*(N/2).  All multipliers used
downstream are even in k, so the sign choice is inert; it is fixed here for
bit-exact reproducibility.

The forward transform approximates the unitary continuum Fourier transform:

    F[j] = (h/sqrt(2 pi))^dim * sum_m f[m] exp(-i k_j . x_m)

and the inverse uses the dual weight dk = pi/L, so inverse(forward(f)) == f
up to roundoff and the volume-weighted l2 norm equals the dk-weighted norm
of the frequency samples (discrete Parseval).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InvariantViolation

__all__ = [
    "Grid",
    "GridFunction",
    "make_grid",
    "transform",
    "norm",
    "save_grid_function",
    "load_grid_function",
]

_HEADER = struct.Struct("<IId")  # dim: u32, n_per_axis: u32, half_extent: f64


@dataclass(frozen=True)
class Grid:
    """Periodic sampling lattice for the transverse space.

    Parameters
    ----------
    dim : int
        Number of transverse dimensions, 1 or 2.
    n_per_axis : int
        Samples per axis; a power of two, at least 4.
    half_extent : float
        Half box size L; the box is [-L, L) per axis.
    """

    dim: int
    n_per_axis: int
    half_extent: float

    def __post_init__(self) -> None:
        if self.dim not in (1, 2):
            raise ConfigError(f"dim must be 1 or 2, got {self.dim}")
        n = self.n_per_axis
        if n < 4 or (n & (n - 1)) != 0:
            raise ConfigError(f"n_per_axis must be a power of two >= 4, got {n}")
        if not (self.half_extent > 0):
            raise ConfigError(f"half_extent must be positive, got {self.half_extent}")

    @property
    def spacing(self) -> float:
        # derived, never stored: h * n == 2 * L exactly up to float division
        return 2.0 * self.half_extent / self.n_per_axis

    @property
    def cell_count(self) -> int:
        return self.n_per_axis**self.dim

    def axis_nodes(self) -> np.ndarray:
        """Cell centers -L + m*h along one axis."""
        h = self.spacing
        return -self.half_extent + h * np.arange(self.n_per_axis)

    def axis_frequencies(self) -> np.ndarray:
        """Frequencies (pi/L)*j in DFT storage order, Nyquist negative."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n_per_axis, d=self.spacing)

    def nodes(self) -> np.ndarray:
        """All cell centers, shape (cell_count, dim), row-major over axes."""
        ax = self.axis_nodes()
        if self.dim == 1:
            return ax[:, None]
        a, b = np.meshgrid(ax, ax, indexing="ij")
        return np.column_stack([a.ravel(), b.ravel()])

    def frequency_magnitudes(self) -> np.ndarray:
        """|k| per cell, flat, matching the storage order of samples."""
        kax = self.axis_frequencies()
        if self.dim == 1:
            return np.abs(kax)
        ka, kb = np.meshgrid(kax, kax, indexing="ij")
        return np.sqrt(ka**2 + kb**2).ravel()


@dataclass(frozen=True)
class GridFunction:
    """Complex samples on a Grid, flat row-major storage."""

    grid: Grid
    samples: np.ndarray

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.samples, dtype=np.complex128).reshape(-1)
        if arr.size != self.grid.cell_count:
            raise ConfigError(
                f"sample count {arr.size} does not match grid cell count "
                f"{self.grid.cell_count}"
            )
        if not np.all(np.isfinite(arr.view(np.float64))):
            raise InvariantViolation("GridFunction contains non-finite samples")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def reshaped(self) -> np.ndarray:
        """Samples as an ndarray of shape (n,)*dim (a read-only view)."""
        return self.samples.reshape((self.grid.n_per_axis,) * self.grid.dim)

    @property
    def real_samples(self) -> np.ndarray:
        return self.samples.real


def make_grid(dim: int, n_per_axis: int, half_extent: float) -> Grid:
    """Construct a validated Grid."""
    return Grid(dim=dim, n_per_axis=n_per_axis, half_extent=half_extent)


def _alternating(n: int) -> np.ndarray:
    # (-1)^j on storage indices; equals exp(+i pi j_freq) because n is even
    a = np.ones(n)
    a[1::2] = -1.0
    return a


def _alt_nd(grid: Grid) -> np.ndarray:
    a = _alternating(grid.n_per_axis)
    if grid.dim == 1:
        return a
    return np.multiply.outer(a, a)


def transform(f: GridFunction, direction: str = "forward") -> GridFunction:
    """Unitary DFT between physical and frequency samples.

    Parameters
    ----------
    f : GridFunction
        Input samples (physical side for "forward", frequency side for
        "inverse").
    direction : {"forward", "inverse"}

    Returns
    -------
    GridFunction
        Transformed samples on the same Grid.
    """
    g = f.grid
    arr = f.reshaped()
    alt = _alt_nd(g)
    h = g.spacing
    dk = np.pi / g.half_extent
    root = np.sqrt(2.0 * np.pi)
    if direction == "forward":
        out = (h / root) ** g.dim * (alt * np.fft.fftn(arr))
    elif direction == "inverse":
        out = (dk * g.n_per_axis / root) ** g.dim * np.fft.ifftn(alt * arr)
    else:
        raise ConfigError(f"unknown transform direction {direction!r}")
    return GridFunction(g, out.ravel())


def norm(f: GridFunction, kind: str = "L2") -> float:
    """Volume-weighted L2 norm or the discrete H^{1/2} norm.

    L2:    sqrt( sum |f|^2 h^dim )
    Hhalf: sqrt( sum (1+|k|^2)^{1/2} |fhat|^2 dk^dim )
    """
    g = f.grid
    if kind == "L2":
        return float(np.sqrt(np.sum(np.abs(f.samples) ** 2) * g.spacing**g.dim))
    if kind == "Hhalf":
        fhat = transform(f, "forward")
        kmag = g.frequency_magnitudes()
        w = np.sqrt(1.0 + kmag**2)
        dk = np.pi / g.half_extent
        return float(np.sqrt(np.sum(w * np.abs(fhat.samples) ** 2) * dk**g.dim))
    raise ConfigError(f"unknown norm kind {kind!r}")


def save_grid_function(f: GridFunction, path: str) -> None:
    """Write the binary checkpoint format.

    Layout: 16-byte header (dim: u32, n_per_axis: u32, half_extent: f64,
    little-endian) followed by interleaved (re, im) float64 samples.
    """
    g = f.grid
    inter = np.empty(2 * f.samples.size, dtype="<f8")
    inter[0::2] = f.samples.real
    inter[1::2] = f.samples.imag
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(g.dim, g.n_per_axis, g.half_extent))
        fh.write(inter.tobytes())


def load_grid_function(path: str) -> GridFunction:
    """Read the binary checkpoint format written by save_grid_function."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ConfigError(f"truncated GridFunction header in {path}")
        dim, n, half_extent = _HEADER.unpack(head)
        g = make_grid(dim, n, half_extent)
        raw = np.frombuffer(fh.read(), dtype="<f8")
    if raw.size != 2 * g.cell_count:
        raise ConfigError(
            f"payload of {path} has {raw.size} floats, expected {2 * g.cell_count}"
        )
    return GridFunction(g, raw[0::2] + 1j * raw[1::2])

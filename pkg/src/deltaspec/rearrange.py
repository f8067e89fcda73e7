"""Discrete symmetric decreasing rearrangement and Steiner symmetrization.

Rearrangement is sort-and-place: cells are ranked once by ascending distance
of their centers from the origin (ties by lexicographic cell index), and the
sorted sample values are placed descending along that ranking.  This makes
equimeasurability, Lp conservation and the Hardy-Littlewood inequality exact
statements about permutations of floats rather than quadrature claims; the
compensated sums below (math.fsum) are correctly rounded and therefore
permutation-invariant, so the conserved quantities agree bitwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .grid import Grid, GridFunction

__all__ = [
    "RankedCells",
    "ranked_cells",
    "ranked_cells_from_points",
    "symmetric_decreasing_rearrangement",
    "hardy_littlewood_pairing",
    "steiner_symmetrize",
    "lp_norm",
]


@dataclass(frozen=True)
class RankedCells:
    """Permutation of cell indices sorted by distance from the origin.

    order[i] is the index of the i-th closest cell; ties are broken by the
    lexicographic (storage) index so the ranking is deterministic.
    """

    order: np.ndarray
    distances: np.ndarray

    def __post_init__(self) -> None:
        order = np.ascontiguousarray(self.order, dtype=np.intp)
        dist = np.ascontiguousarray(self.distances, dtype=np.float64)
        if order.ndim != 1 or dist.shape != order.shape:
            raise ConfigError("order and distances must be flat arrays of equal length")
        seen = np.zeros(order.size, dtype=bool)
        seen[order] = True
        if not seen.all():
            raise ConfigError("order is not a permutation of cell indices")
        if np.any(np.diff(dist[order]) < 0):
            raise ConfigError("distances along the ranking must be nondecreasing")
        order.setflags(write=False)
        dist.setflags(write=False)
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "distances", dist)

    @property
    def cell_count(self) -> int:
        return self.order.size


def ranked_cells(grid: Grid) -> RankedCells:
    """Ranking of a periodic grid's cells by center distance from the origin."""
    dist = np.sqrt(np.sum(grid.nodes() ** 2, axis=1))
    order = np.lexsort((np.arange(dist.size), dist))
    return RankedCells(order=order, distances=dist)


def ranked_cells_from_points(points: np.ndarray) -> RankedCells:
    """Ranking of arbitrary cell centers (used for box-grid slices)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    dist = np.sqrt(np.sum(pts**2, axis=1))
    order = np.lexsort((np.arange(dist.size), dist))
    return RankedCells(order=order, distances=dist)


def _require_nonnegative(values: np.ndarray) -> None:
    bad = np.nonzero(values < 0.0)[0]
    if bad.size:
        raise ConfigError(
            f"rearrangement input must be nonnegative; sample {int(bad[0])} is "
            f"{values[bad[0]]!r}"
        )


def _place_sorted(values: np.ndarray, ranking: RankedCells) -> np.ndarray:
    out = np.empty_like(values)
    out[ranking.order] = np.sort(values)[::-1]
    return out


def symmetric_decreasing_rearrangement(
    u: GridFunction, ranking: RankedCells
) -> GridFunction:
    """Place the sorted values of u descending along the cell ranking.

    The i-th largest value of u lands at the i-th ranked cell, so the output
    is radially nonincreasing along the ranking and carries exactly the same
    value multiset as the input.
    """
    values = u.real_samples
    if u.grid.cell_count != ranking.cell_count:
        raise ConfigError("ranking was built for a different cell count")
    if np.any(u.samples.imag != 0.0):
        raise ConfigError("rearrangement input must be real-valued")
    _require_nonnegative(values)
    return GridFunction(u.grid, _place_sorted(values, ranking))


def hardy_littlewood_pairing(
    u: GridFunction, v: GridFunction, ranking: RankedCells
) -> tuple[float, float]:
    """Volume-weighted (integral of u*v, integral of u'*v') with ' = rearranged.

    The second component pairs the two descending sorted sequences, which
    maximizes the sum over all pairings of the value multisets; it therefore
    dominates the first component.
    """
    if u.grid != v.grid:
        raise ConfigError("grid mismatch between the two factors")
    a = u.real_samples
    b = v.real_samples
    _require_nonnegative(a)
    _require_nonnegative(b)
    weight = u.grid.spacing**u.grid.dim
    plain = math.fsum(map(float, a * b)) * weight
    sa = np.sort(a)
    sb = np.sort(b)
    paired = math.fsum(map(float, sa * sb)) * weight
    return plain, paired


def steiner_symmetrize(u: np.ndarray, transverse_ranking: RankedCells) -> np.ndarray:
    """Rearrange every fixed-normal slice of a (transverse, normal) array.

    u has shape (T, n_normal) with T the flattened transverse cell count of
    transverse_ranking.  Each column u[:, j] is replaced by its symmetric
    decreasing rearrangement under the shared ranking, so per-slice value
    multisets and the total L2 norm are conserved exactly.
    """
    arr = np.asarray(u, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != transverse_ranking.cell_count:
        raise ConfigError(
            "expected a (transverse_cells, n_normal) array matching the ranking"
        )
    _require_nonnegative(arr.reshape(-1))
    out = np.empty_like(arr)
    order = transverse_ranking.order
    for j in range(arr.shape[1]):
        out[order, j] = np.sort(arr[:, j])[::-1]
    return out


def lp_norm(u: GridFunction, p: float) -> float:
    """Volume-weighted Lp norm via a correctly rounded compensated sum.

    Because math.fsum is correctly rounded, the result is invariant under any
    permutation of the samples; rearrangement conserves these norms bitwise.
    """
    if p <= 0:
        raise ConfigError(f"p must be positive, got {p}")
    mags = np.abs(u.samples)
    total = math.fsum(map(float, mags**p))
    weight = u.grid.spacing**u.grid.dim
    return float((total * weight) ** (1.0 / p))

"""Coupling strengths alpha = alpha0 + alpha1 on the transverse grid.

The background alpha0 is a constant; the perturbation alpha1 is a bounded
real grid function vanishing outside a stated support radius.  Indicator
couplings are sampled at cell centers against the open region, which makes
lattice translates of the same region exactly equimeasurable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .grid import Grid, GridFunction

__all__ = [
    "Coupling",
    "constant_coupling",
    "indicator_coupling",
    "perturbation_coupling",
    "random_bump_coupling",
    "positive_part",
    "sample_coupling",
]


@dataclass(frozen=True)
class Coupling:
    """Delta-potential strength: constant background plus compact perturbation."""

    background: float
    perturbation: GridFunction
    support_radius: float

    def __post_init__(self) -> None:
        p = self.perturbation
        if np.any(p.samples.imag != 0.0):
            raise ConfigError("perturbation must be real-valued")
        if not (0.0 <= self.support_radius < p.grid.half_extent):
            raise ConfigError(
                "support_radius must satisfy 0 <= r < half_extent, got "
                f"{self.support_radius} vs {p.grid.half_extent}"
            )
        # compact support is scannable: samples outside the radius vanish
        dist = np.max(np.abs(p.grid.nodes()), axis=1)
        outside = dist > self.support_radius + 1e-12
        if np.any(p.real_samples[outside] != 0.0):
            raise ConfigError("perturbation has nonzero samples outside support_radius")

    @property
    def grid(self) -> Grid:
        return self.perturbation.grid

    @property
    def is_constant(self) -> bool:
        return not np.any(self.perturbation.real_samples != 0.0)


def constant_coupling(alpha0: float, grid: Grid) -> Coupling:
    """alpha(x) = alpha0 with an identically zero perturbation."""
    zero = GridFunction(grid, np.zeros(grid.cell_count))
    return Coupling(background=float(alpha0), perturbation=zero, support_radius=0.0)


def indicator_coupling(
    beta: float,
    region: str,
    radius: float,
    center,
    alpha0: float,
    grid: Grid,
) -> Coupling:
    """alpha1 = beta * chi_region sampled at cell centers.

    region "ball" uses the open Euclidean ball |x - c| < radius, "box" the
    open cube max_i |x_i - c_i| < radius.  The region must stay strictly
    inside the grid box.
    """
    c = np.atleast_1d(np.asarray(center, dtype=float))
    if c.size != grid.dim:
        raise ConfigError(f"center has {c.size} components, grid dim is {grid.dim}")
    if radius <= 0:
        raise ConfigError(f"radius must be positive, got {radius}")
    reach = float(np.max(np.abs(c)) + radius)
    if reach >= grid.half_extent:
        raise ConfigError(
            f"region reaches {reach}, touching or exiting the box of half extent "
            f"{grid.half_extent}"
        )
    delta = grid.nodes() - c[None, :]
    if region == "ball":
        inside = np.sqrt(np.sum(delta**2, axis=1)) < radius
    elif region == "box":
        inside = np.max(np.abs(delta), axis=1) < radius
    else:
        raise ConfigError(f"unknown region kind {region!r}")
    samples = np.where(inside, float(beta), 0.0)
    pert = GridFunction(grid, samples)
    return Coupling(background=float(alpha0), perturbation=pert, support_radius=reach)


def perturbation_coupling(
    alpha1: GridFunction, alpha0: float, support_radius: float
) -> Coupling:
    """Wrap an explicit perturbation grid function (validated)."""
    return Coupling(
        background=float(alpha0), perturbation=alpha1, support_radius=support_radius
    )


def random_bump_coupling(
    grid: Grid,
    rng: np.random.Generator,
    alpha0: float,
    support_radius: float = 6.0,
) -> Coupling:
    """Random mixed-sign perturbation: a few compactly supported cos^2 bumps.

    The leading bump is always attractive with amplitude in [1, 2.5]; later
    bumps flip sign with probability 0.35 at half strength, which keeps the
    net attraction strong enough to bind in most draws while still exercising
    genuinely mixed signs.
    """
    nodes = grid.nodes()
    values = np.zeros(grid.cell_count)
    n_bumps = int(rng.integers(2, 5))
    for i in range(n_bumps):
        amp = float(rng.uniform(1.0, 2.5))
        width = float(rng.uniform(0.8, 2.0))
        center = rng.uniform(-4.0, 4.0, size=grid.dim)
        if i > 0 and rng.uniform() < 0.35:
            amp *= -0.5
        r = np.sqrt(np.sum((nodes - center[None, :]) ** 2, axis=1))
        mask = r < width
        values[mask] += amp * np.cos(np.pi * r[mask] / (2.0 * width)) ** 2
    # centers within 4, widths below 2: support radius 6 always covers
    pert = GridFunction(grid, values)
    return Coupling(
        background=float(alpha0), perturbation=pert, support_radius=support_radius
    )


def positive_part(c: Coupling) -> Coupling:
    """Replace the perturbation by max(alpha1, 0); background unchanged."""
    clipped = np.maximum(c.perturbation.real_samples, 0.0)
    return Coupling(
        background=c.background,
        perturbation=GridFunction(c.grid, clipped),
        support_radius=c.support_radius,
    )


def sample_coupling(c: Coupling) -> GridFunction:
    """Total strength alpha0 + alpha1 as one real grid function."""
    return GridFunction(c.grid, c.background + c.perturbation.real_samples)

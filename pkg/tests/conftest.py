"""Shared fixtures.

The two fine finite-difference solves (800 x 800 interior boxes) cost tens of
seconds each, so they are session scoped: the refinement ladder, the
cross-validation gate and the ground-state checks all reuse them.
"""

import numpy as np
import pytest

from deltaspec import (
    RootConfig,
    SolverConfig,
    bsp,
    constant_coupling,
    indicator_coupling,
    make_grid,
    oracle,
)

FINE_BOX = dict(
    dim=2,
    n_transverse=800,
    n_normal=800,
    half_extent_transverse=20.0,
    half_extent_normal=20.0,
)


@pytest.fixture(scope="session")
def hyperplane():
    return oracle.SurfaceSpec(kind="hyperplane")


@pytest.fixture(scope="session")
def const_oracle_fine(hyperplane):
    """Constant alpha0 = 2 on the [-20, 20]^2 box at h = 0.05."""
    coupling = constant_coupling(2.0, make_grid(1, 8, 32.0))
    box = oracle.BoxGrid(**FINE_BOX)
    handle = oracle.assemble(coupling, hyperplane, box)
    return oracle.lowest_eigenpair(handle, SolverConfig()), handle


@pytest.fixture(scope="session")
def ball_compare_fine(hyperplane):
    """Ball coupling beta = 4, radius 1: both routes at h = 0.05.

    The half-order route runs on the (1, 1024, 25.6) lattice whose nodes land
    exactly on the transverse interior nodes of the [-20, 20]^2 box, and the
    reconstructed bulk eigenfunction is pushed through the box stencil to get
    the residual.  Returns (report, pair, handle, residual).
    """
    lattice = make_grid(1, 1024, 25.6)
    coupling = indicator_coupling(4.0, "ball", 1.0, [0.0], 0.0, lattice)
    solver = SolverConfig()
    report = bsp.find_lambda1(coupling, solver, RootConfig())
    box = oracle.BoxGrid(**FINE_BOX)
    handle = oracle.assemble(coupling, hyperplane, box)
    pair = oracle.lowest_eigenpair(handle, solver)
    columns = bsp.evaluate_reconstruction(
        report.trace_phi,
        report.lambda1,
        box.transverse_axis_nodes(),
        box.normal_axis_nodes(),
    )
    vec = oracle.BoxFunction(box, columns.reshape(-1)).values
    residual = float(
        np.linalg.norm(handle.matrix @ vec - report.lambda1 * vec)
        / np.linalg.norm(vec)
    )
    return report, pair, handle, residual

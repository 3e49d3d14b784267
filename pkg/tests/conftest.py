import numpy as np
import pytest

from axiblow import meshmap as mm


def identity_mesh_r(n):
    """Uniform map of [0,1] onto [0,1]."""
    return mm.build_map(mm.R_KNOTS, mm.DensityCoeffs(0.0, 1.0, 0.0, 0.0), 1.0, n)


def identity_mesh_z(m):
    """Uniform map of [0,1] onto [0,1/2] (constant density 1/2)."""
    return mm.build_map(mm.Z_KNOTS, mm.DensityCoeffs(0.0, 0.5, 0.0, 0.0), 0.5, m)


def gentle_mesh_r(n):
    """Mildly graded non-identity radial map for metric-term coverage.

    Uses a soft step exponent (b = 12) so the map's transition regions are
    resolved already on the coarse halves of refinement pairs.
    """
    return mm.build_map(mm.R_KNOTS, mm.DensityCoeffs(0.5, 0.7, 0.6, 0.8, b=12), 1.0, n)


def gentle_mesh_z(m):
    return mm.build_map(mm.Z_KNOTS, mm.DensityCoeffs(0.0, 0.35, 0.3, 0.4, b=12), 0.5, m)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)

"""Grid fields, mapped-coordinate finite differences, and diffusion terms.

All derivatives are 2nd-order centered differences in the computational
coordinates, converted to physical derivatives through the analytic map
metric (v_r = v_rho / r_rho, v_rr = v_rhorho / r_rho^2 - r_rhorho v_rho /
r_rho^3).  Stencils are closed by ghost values: parity reflection at
rho = 0 and at both eta ends, cubic extrapolation at the solid wall
rho = 1.  Terms with an explicit 1/r factor are evaluated at r = 0 by
their parity limits instead of one-sided differencing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .meshmap import MeshMap
    from .physics import NuFields

_FLIP = {"even": "odd", "odd": "even", None: None}


@dataclass
class FieldGrid:
    """A scalar field on the (n+1) x (m+1) tensor grid with symmetry tags.

    ``parity_r`` is the reflection parity at rho = 0; ``parity_z`` the
    parity at both eta = 0 and eta = 1 (the half-period symmetry makes the
    two axial ends behave identically).  Either may be None for data with
    no usable symmetry, in which case one-sided stencils are used.
    """

    values: np.ndarray
    parity_r: str | None = None
    parity_z: str | None = None

    def like(self, values: np.ndarray, parity_r=0, parity_z=0) -> "FieldGrid":
        return FieldGrid(values,
                         self.parity_r if parity_r == 0 else parity_r,
                         self.parity_z if parity_z == 0 else parity_z)


def wall_ghost(v: np.ndarray) -> np.ndarray:
    """Cubic extrapolation ghost beyond the wall row (exact on cubics)."""
    return 4.0 * v[-1] - 6.0 * v[-2] + 4.0 * v[-3] - v[-4]


def _diff_rho(v: np.ndarray, parity_r, h: float) -> np.ndarray:
    """Centered d/drho with parity ghost at rho=0, extrapolation at rho=1."""
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (2.0 * h)
    if parity_r == "even":
        out[0] = 0.0
    elif parity_r == "odd":
        out[0] = v[1] / h
    else:
        out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
    out[-1] = (wall_ghost(v) - v[-2]) / (2.0 * h)
    return out


def _diff2_rho(v: np.ndarray, parity_r, h: float) -> np.ndarray:
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / (h * h)
    if parity_r == "even":
        out[0] = 2.0 * (v[1] - v[0]) / (h * h)
    elif parity_r == "odd":
        out[0] = 0.0
    else:
        out[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / (h * h)
    # With the cubic ghost this is the 2nd-order one-sided second difference.
    out[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / (h * h)
    return out


def _diff_eta(v: np.ndarray, parity_z, h: float) -> np.ndarray:
    out = np.empty_like(v)
    out[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / (2.0 * h)
    if parity_z == "even":
        out[:, 0] = 0.0
        out[:, -1] = 0.0
    elif parity_z == "odd":
        out[:, 0] = v[:, 1] / h
        out[:, -1] = -v[:, -2] / h
    else:
        out[:, 0] = (-3.0 * v[:, 0] + 4.0 * v[:, 1] - v[:, 2]) / (2.0 * h)
        out[:, -1] = (3.0 * v[:, -1] - 4.0 * v[:, -2] + v[:, -3]) / (2.0 * h)
    return out


def _diff2_eta(v: np.ndarray, parity_z, h: float) -> np.ndarray:
    out = np.empty_like(v)
    out[:, 1:-1] = (v[:, 2:] - 2.0 * v[:, 1:-1] + v[:, :-2]) / (h * h)
    if parity_z == "even":
        out[:, 0] = 2.0 * (v[:, 1] - v[:, 0]) / (h * h)
        out[:, -1] = 2.0 * (v[:, -2] - v[:, -1]) / (h * h)
    elif parity_z == "odd":
        out[:, 0] = 0.0
        out[:, -1] = 0.0
    else:
        out[:, 0] = (2.0 * v[:, 0] - 5.0 * v[:, 1] + 4.0 * v[:, 2] - v[:, 3]) / (h * h)
        out[:, -1] = (2.0 * v[:, -1] - 5.0 * v[:, -2] + 4.0 * v[:, -3] - v[:, -4]) / (h * h)
    return out


def ddr(f: FieldGrid, mesh_r: "MeshMap") -> FieldGrid:
    """Physical d/dr; flips the radial parity."""
    drho = _diff_rho(f.values, f.parity_r, mesh_r.h)
    return f.like(drho / mesh_r.nodes_dy[:, None], parity_r=_FLIP[f.parity_r])


def ddz(f: FieldGrid, mesh_z: "MeshMap") -> FieldGrid:
    """Physical d/dz; flips the axial parity."""
    deta = _diff_eta(f.values, f.parity_z, mesh_z.h)
    return f.like(deta / mesh_z.nodes_dy[None, :], parity_z=_FLIP[f.parity_z])


def d2dr2(f: FieldGrid, mesh_r: "MeshMap") -> FieldGrid:
    dy = mesh_r.nodes_dy[:, None]
    d2y = mesh_r.nodes_d2y[:, None]
    drho = _diff_rho(f.values, f.parity_r, mesh_r.h)
    d2rho = _diff2_rho(f.values, f.parity_r, mesh_r.h)
    return f.like(d2rho / dy**2 - d2y * drho / dy**3)


def d2dz2(f: FieldGrid, mesh_z: "MeshMap") -> FieldGrid:
    dy = mesh_z.nodes_dy[None, :]
    d2y = mesh_z.nodes_d2y[None, :]
    deta = _diff_eta(f.values, f.parity_z, mesh_z.h)
    d2eta = _diff2_eta(f.values, f.parity_z, mesh_z.h)
    return f.like(d2eta / dy**2 - d2y * deta / dy**3)


def over_r(values: np.ndarray, mesh_r: "MeshMap", axis_limit: np.ndarray) -> np.ndarray:
    """values / r with the r = 0 row replaced by its parity limit."""
    out = np.empty_like(values)
    out[1:] = values[1:] / mesh_r.nodes_y[1:, None]
    out[0] = axis_limit[0] if axis_limit.ndim == 2 else axis_limit
    return out


def velocity_from_stream(psi: FieldGrid, mesh_r: "MeshMap", mesh_z: "MeshMap",
                         psi_r: FieldGrid | None = None,
                         psi_z: FieldGrid | None = None):
    """Recover (u^r, u^z) = (-r psi_z, 2 psi + r psi_r) from psi = psi^theta/r.

    Pre-filtered derivative fields may be supplied; otherwise they are
    computed here.  The wall row of u^r is pinned to zero (no-flow).
    """
    if psi_r is None:
        psi_r = ddr(psi, mesh_r)
    if psi_z is None:
        psi_z = ddz(psi, mesh_z)
    r = mesh_r.nodes_y[:, None]
    ur = -r * psi_z.values
    ur[-1, :] = 0.0
    uz = 2.0 * psi.values + r * psi_r.values
    return (FieldGrid(ur, "odd", "even"), FieldGrid(uz, "even", "odd"))


def diffusion_u1(u1: FieldGrid, nu: "NuFields", mesh_r: "MeshMap",
                 mesh_z: "MeshMap") -> FieldGrid:
    """Variable-coefficient diffusion term of the swirl equation.

    nu_r*(u_rr + 3 u_r / r) + nu_z*u_zz + (nu_r_r / r)*u + nu_r_r*u_r
    + nu_z_z*u_z, with (3/r) u_r -> 3 u_rr at the axis and nu_r_r / r
    supplied analytically.
    """
    u_r = ddr(u1, mesh_r)
    u_rr = d2dr2(u1, mesh_r)
    u_z = ddz(u1, mesh_z)
    u_zz = d2dz2(u1, mesh_z)
    lap = nu.nu_r * (u_rr.values + 3.0 * over_r(u_r.values, mesh_r, u_rr.values)) \
        + nu.nu_z * u_zz.values
    lower = nu.nu_r_r_over_r * u1.values + nu.nu_r_r * u_r.values + nu.nu_z_z * u_z.values
    return u1.like(lap + lower)


def diffusion_w1(w1: FieldGrid, g: FieldGrid, uz: FieldGrid, nu: "NuFields",
                 mesh_r: "MeshMap", mesh_z: "MeshMap") -> FieldGrid:
    """Diffusion term of the angular-vorticity equation, cross terms included.

    ``g`` is u^r / r = -psi_z (stored undivided; even in r and z), so the
    1/r-singular velocity groupings reduce to regular expressions:
    (1/r)(u^r_rr + u^r_r/r - u^r/r^2) = g_rr + 3 g_r / r, u^r_z / r = g_z,
    u^r_zz / r = g_zz, and u^r_r = g + r g_r.  Groupings against odd nu
    derivatives use the analytic ratios nu_*_r / r.
    """
    w_r = ddr(w1, mesh_r)
    w_rr = d2dr2(w1, mesh_r)
    w_z = ddz(w1, mesh_z)
    w_zz = d2dz2(w1, mesh_z)
    out = nu.nu_r * (w_rr.values + 3.0 * over_r(w_r.values, mesh_r, w_rr.values)) \
        + nu.nu_z * w_zz.values \
        + nu.nu_r_r_over_r * w1.values + nu.nu_r_r * w_r.values + nu.nu_z_z * w_z.values

    g_r = ddr(g, mesh_r)
    g_rr = d2dr2(g, mesh_r)
    g_z = ddz(g, mesh_z)
    g_zz = d2dz2(g, mesh_z)
    uz_r = ddr(uz, mesh_r)
    uz_rr = d2dr2(uz, mesh_r)
    uz_zz = d2dz2(uz, mesh_z)
    uz_z = ddz(uz, mesh_z)
    r = mesh_r.nodes_y[:, None]

    cross = nu.nu_r_z * (g_rr.values + 3.0 * over_r(g_r.values, mesh_r, g_rr.values)) \
        + nu.nu_z_z * g_zz.values \
        - nu.nu_r_r_over_r * (uz_rr.values + over_r(uz_r.values, mesh_r, uz_rr.values)) \
        - nu.nu_z_r_over_r * uz_zz.values \
        + nu.nu_r_rz_over_r * (g.values + r * g_r.values) \
        + nu.nu_z_zz * g_z.values \
        - nu.nu_r_rr * over_r(uz_r.values, mesh_r, uz_rr.values) \
        - nu.nu_z_rz_over_r * uz_z.values
    return w1.like(out + cross)


def wall_psi_rr(psi: FieldGrid, mesh_r: "MeshMap") -> np.ndarray:
    """One-sided 2nd-order psi_rr on the wall row rho = 1."""
    v = psi.values
    h = mesh_r.h
    d1 = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * h)
    d2 = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / (h * h)
    dy = mesh_r.nodes_dy[-1]
    d2y = mesh_r.nodes_d2y[-1]
    return d2 / dy**2 - d2y * d1 / dy**3


def enforce_boundary(u1: FieldGrid, w1: FieldGrid, psi: FieldGrid,
                     mesh_r: "MeshMap", mesh_z: "MeshMap"):
    """No-slip wall row and odd-symmetry axial rows, enforced in place.

    u1 vanishes on the wall, w1 there equals -psi_rr (one-sided stencil),
    and the odd-in-z rows j = 0, m are pinned to zero so round-off cannot
    leak across the symmetry planes.  Idempotent.
    """
    u1.values[-1, :] = 0.0
    w1.values[-1, :] = -wall_psi_rr(psi, mesh_r)
    for f in (u1, w1):
        f.values[:, 0] = 0.0
        f.values[:, -1] = 0.0
    return u1, w1

"""Axisymmetric incompressible flow solver on an adaptive analytic mesh.

Solves the swirl / angular-vorticity / stream-function system
(u1, omega1, psi1) = (u^theta/r, omega^theta/r, psi^theta/r) on the
half-period cylinder cross-section [0,1] x [0,1/2], with selectable
diffusion coefficients (degenerate variable, constant, or zero), and
provides the diagnostics and regression tooling used to detect and
quantify focusing blowup behavior.
"""

__version__ = "0.1.0"

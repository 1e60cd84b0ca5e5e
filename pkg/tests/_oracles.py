"""Independent closed-form references used to check the transfer-matrix code.

The two-interface formulas come from matching harmonic expansions
``alpha r^j + beta r^-j`` across each interface by hand: continuity of the
potential and of the radial flux at both radii gives a 4x4 linear system
whose solution is written out explicitly below.  None of this shares code
with the production recursion.
"""
from __future__ import annotations


def homogeneous_eigenvalue(s: float, j: int) -> float:
    """Boundary map eigenvalue of a uniform disk with conductivity ``s``."""
    return 1.0 / (j * s)


def two_interface_eigenvalue(r1: float, r2: float, sig_mid: float, sig_in: float, j: int) -> float:
    """Mode-``j`` eigenvalue for a disk with unit outer layer and interfaces at r1 > r2.

    ``sig_mid`` is the conductivity of the annulus between the interfaces,
    ``sig_in`` the inner disk's.  Inside the inner disk the solution is
    ``r^j``; the coefficients of the middle and outer expansions follow from
    the interface conditions:

        1            = (a_j + b_j r2^-2j) / 2
        sig_in/sig_mid = (a_j - b_j r2^-2j) / 2
        a_j + b_j r1^-2j             = (c_j + d_j r1^-2j) / 2
        sig_mid (a_j - b_j r1^-2j)   = (c_j - d_j r1^-2j) / 2

    and the eigenvalue is the boundary voltage over the boundary current.
    """
    ratio = sig_in / sig_mid
    a = 1.0 + ratio
    b = (1.0 - ratio) * r2 ** (2 * j)
    c = a + b * r1 ** (-2 * j) + sig_mid * (a - b * r1 ** (-2 * j))
    d = a * r1 ** (2 * j) + b - sig_mid * (a * r1 ** (2 * j) - b)
    return (c + d) / (j * (c - d))

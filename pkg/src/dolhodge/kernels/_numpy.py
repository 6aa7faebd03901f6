"""Pure-numpy reference implementations of the hot kernels.

Conventions shared with the numba twin:

* fields are C-contiguous complex128 arrays of shape (N, N), axis 0 = a-index
  j, axis 1 = b-index k;
* ``up[j]`` multiplies samples wrapped past the top of the b-axis
  (``u_log[j, k'] = up[j] * u[j, k' - N]`` for ``k' >= N``), ``dn[j]`` those
  wrapped below zero;
* ``coeffs`` holds the five stencil weights for offsets (-2, -1, 0, +1, +2).

The accumulation order (center, -2, -1, +1, +2) is identical in both
backends so they produce bitwise-equal output.
"""

from __future__ import annotations

import numpy as np


def _shifted(u: np.ndarray, o: int, up: np.ndarray, dn: np.ndarray) -> np.ndarray:
    """u_log[j, k+o] as an (N, N) array; |o| <= 2 < N assumed."""
    v = np.roll(u, -o, axis=1)
    if o > 0:
        v[:, -o:] = up[:, None] * u[:, :o]
    elif o < 0:
        v[:, :-o] = dn[:, None] * u[:, o:]
    return v


def b_stencil(u, up, dn, coeffs):
    out = coeffs[2] * u
    out = out + coeffs[0] * _shifted(u, -2, up, dn)
    out = out + coeffs[1] * _shifted(u, -1, up, dn)
    out = out + coeffs[3] * _shifted(u, +1, up, dn)
    out = out + coeffs[4] * _shifted(u, +2, up, dn)
    return out


def dbar_core(u, da_u, kap_a, kap_b, up, dn, coeffs, diag):
    """kap_a * (Da @ u) + kap_b * b_stencil(u) + diag * u, with Da @ u passed in."""
    return (kap_a * da_u + kap_b * b_stencil(u, up, dn, coeffs)) + diag * u


def _shifted3(u, o, up, dn):
    v = np.roll(u, -o, axis=1)
    if o > 0:
        v[:, -o:, :] = up[:, None, None] * u[:, :o, :]
    elif o < 0:
        v[:, :-o, :] = dn[:, None, None] * u[:, o:, :]
    return v


def b_stencil3(u, up, dn, coeffs):
    """Block variant on (N, N, nb) arrays."""
    out = coeffs[2] * u
    out = out + coeffs[0] * _shifted3(u, -2, up, dn)
    out = out + coeffs[1] * _shifted3(u, -1, up, dn)
    out = out + coeffs[3] * _shifted3(u, +1, up, dn)
    out = out + coeffs[4] * _shifted3(u, +2, up, dn)
    return out


def dbar_core3(u, da_u, kap_a, kap_b, up, dn, coeffs, diag):
    return (kap_a * da_u + kap_b * b_stencil3(u, up, dn, coeffs)) + diag[:, :, None] * u

"""Numba twins of the numpy kernels; same signatures, same arithmetic order."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def b_stencil(u, up, dn, coeffs):
    n0, n1 = u.shape
    out = np.empty_like(u)
    c_m2, c_m1, c_0, c_p1, c_p2 = coeffs[0], coeffs[1], coeffs[2], coeffs[3], coeffs[4]
    for j in range(n0):
        uj = up[j]
        dj = dn[j]
        for k in range(n1):
            acc = c_0 * u[j, k]
            kk = k - 2
            acc += c_m2 * ((dj * u[j, kk + n1]) if kk < 0 else u[j, kk])
            kk = k - 1
            acc += c_m1 * ((dj * u[j, kk + n1]) if kk < 0 else u[j, kk])
            kk = k + 1
            acc += c_p1 * ((uj * u[j, kk - n1]) if kk >= n1 else u[j, kk])
            kk = k + 2
            acc += c_p2 * ((uj * u[j, kk - n1]) if kk >= n1 else u[j, kk])
            out[j, k] = acc
    return out


@njit(cache=True, nogil=True)
def dbar_core(u, da_u, kap_a, kap_b, up, dn, coeffs, diag):
    n0, n1 = u.shape
    out = np.empty_like(u)
    c_m2, c_m1, c_0, c_p1, c_p2 = coeffs[0], coeffs[1], coeffs[2], coeffs[3], coeffs[4]
    for j in range(n0):
        uj = up[j]
        dj = dn[j]
        for k in range(n1):
            acc = c_0 * u[j, k]
            kk = k - 2
            acc += c_m2 * ((dj * u[j, kk + n1]) if kk < 0 else u[j, kk])
            kk = k - 1
            acc += c_m1 * ((dj * u[j, kk + n1]) if kk < 0 else u[j, kk])
            kk = k + 1
            acc += c_p1 * ((uj * u[j, kk - n1]) if kk >= n1 else u[j, kk])
            kk = k + 2
            acc += c_p2 * ((uj * u[j, kk - n1]) if kk >= n1 else u[j, kk])
            out[j, k] = (kap_a * da_u[j, k] + kap_b * acc) + diag[j, k] * u[j, k]
    return out


@njit(cache=True, nogil=True)
def b_stencil3(u, up, dn, coeffs):
    n0, n1, nb = u.shape
    out = np.empty_like(u)
    c_m2, c_m1, c_0, c_p1, c_p2 = coeffs[0], coeffs[1], coeffs[2], coeffs[3], coeffs[4]
    for j in range(n0):
        uj = up[j]
        dj = dn[j]
        for k in range(n1):
            km2 = k - 2 + n1 if k - 2 < 0 else k - 2
            km1 = k - 1 + n1 if k - 1 < 0 else k - 1
            kp1 = k + 1 - n1 if k + 1 >= n1 else k + 1
            kp2 = k + 2 - n1 if k + 2 >= n1 else k + 2
            fm2 = dj if k - 2 < 0 else 1.0 + 0.0j
            fm1 = dj if k - 1 < 0 else 1.0 + 0.0j
            fp1 = uj if k + 1 >= n1 else 1.0 + 0.0j
            fp2 = uj if k + 2 >= n1 else 1.0 + 0.0j
            for t in range(nb):
                acc = c_0 * u[j, k, t]
                acc += c_m2 * (fm2 * u[j, km2, t])
                acc += c_m1 * (fm1 * u[j, km1, t])
                acc += c_p1 * (fp1 * u[j, kp1, t])
                acc += c_p2 * (fp2 * u[j, kp2, t])
                out[j, k, t] = acc
    return out


@njit(cache=True, nogil=True)
def dbar_core3(u, da_u, kap_a, kap_b, up, dn, coeffs, diag):
    n0, n1, nb = u.shape
    out = np.empty_like(u)
    c_m2, c_m1, c_0, c_p1, c_p2 = coeffs[0], coeffs[1], coeffs[2], coeffs[3], coeffs[4]
    for j in range(n0):
        uj = up[j]
        dj = dn[j]
        for k in range(2, n1 - 2):       # branch-free interior
            dg = diag[j, k]
            for t in range(nb):
                acc = c_0 * u[j, k, t]
                acc += c_m2 * u[j, k - 2, t]
                acc += c_m1 * u[j, k - 1, t]
                acc += c_p1 * u[j, k + 1, t]
                acc += c_p2 * u[j, k + 2, t]
                out[j, k, t] = (kap_a * da_u[j, k, t] + kap_b * acc) + dg * u[j, k, t]
        for k in (0, 1, n1 - 2, n1 - 1):
            km2 = k - 2 + n1 if k - 2 < 0 else k - 2
            km1 = k - 1 + n1 if k - 1 < 0 else k - 1
            kp1 = k + 1 - n1 if k + 1 >= n1 else k + 1
            kp2 = k + 2 - n1 if k + 2 >= n1 else k + 2
            fm2 = dj if k - 2 < 0 else 1.0 + 0.0j
            fm1 = dj if k - 1 < 0 else 1.0 + 0.0j
            fp1 = uj if k + 1 >= n1 else 1.0 + 0.0j
            fp2 = uj if k + 2 >= n1 else 1.0 + 0.0j
            dg = diag[j, k]
            for t in range(nb):
                acc = c_0 * u[j, k, t]
                acc += c_m2 * (fm2 * u[j, km2, t])
                acc += c_m1 * (fm1 * u[j, km1, t])
                acc += c_p1 * (fp1 * u[j, kp1, t])
                acc += c_p2 * (fp2 * u[j, kp2, t])
                out[j, k, t] = (kap_a * da_u[j, k, t] + kap_b * acc) + dg * u[j, k, t]
    return out

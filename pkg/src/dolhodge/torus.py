"""Flat elliptic-curve geometry on a uniform lattice grid.

The curve is X = C / (Z + tau Z) with Im(tau) > 0, sampled at
z[j, k] = j/N + tau*k/N.  Coordinates (a, b) run along the lattice
directions; the metric convention is fixed once and for all:

    g_{z zbar} = 1,   omega = (i/2) dz ^ dzbar = dx ^ dy,
    vol(X) = Im(tau),  Lambda_g(omega) = 1.

Derivatives are taken along the lattice directions and combined by the
change of frame

    d/dz    = (conj(tau) d/da - d/db) / (conj(tau) - tau)
    d/dzbar = (tau d/da - d/db) / (tau - conj(tau)).

The a-direction is differentiated exactly in Fourier space (the wrap
multipliers of every bundle realized here are trivial along a); the
b-direction uses a centered stencil of order 2 or 4 whose wraparound applies
the bundle's factor of automorphy.  The asymmetric Nyquist convention of the
Fourier derivative (mode -N/2 kept with symbol 2*pi*i*(-N/2)) is load
bearing: it removes the a-direction doubler modes of centered stencils.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

_SPECTRAL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}

#: centered-difference weights per unit step, offsets (-2, -1, 0, +1, +2)
_STENCILS = {
    2: np.array([0.0, -0.5, 0.0, 0.5, 0.0], dtype=complex),
    4: np.array([1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0], dtype=complex),
}


def spectral_deriv_matrix(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Dense Fourier differentiation matrix for period-1 data (and its
    conjugate transpose), for d/da on n equispaced points."""
    if n not in _SPECTRAL_CACHE:
        freqs = np.fft.fftfreq(n, d=1.0 / n)
        f = np.fft.fft(np.eye(n), axis=0)
        d = np.fft.ifft((2j * np.pi * freqs)[:, None] * f, axis=0)
        d = np.ascontiguousarray(d)
        _SPECTRAL_CACHE[n] = (d, np.ascontiguousarray(d.conj().T))
    return _SPECTRAL_CACHE[n]


@dataclass(frozen=True)
class TorusGrid:
    tau: complex
    n_side: int
    stencil_order: int = 4

    @property
    def t(self) -> float:
        """Fiber volume Im(tau)."""
        return self.tau.imag

    @property
    def quad_weight(self) -> float:
        return self.t / self.n_side**2

    @cached_property
    def points(self) -> np.ndarray:
        n = self.n_side
        j = np.arange(n)[:, None]
        k = np.arange(n)[None, :]
        return j / n + self.tau * k / n

    @cached_property
    def a_coord(self) -> np.ndarray:
        return np.arange(self.n_side) / self.n_side

    @cached_property
    def b_coord(self) -> np.ndarray:
        return np.arange(self.n_side) / self.n_side

    def stencil_coeffs(self) -> np.ndarray:
        """b-direction stencil weights, scaled to the grid step 1/N."""
        return _STENCILS[self.stencil_order] * self.n_side


def build_grid(tau: complex, n_side: int, stencil_order: int = 4) -> TorusGrid:
    tau = complex(tau)
    if not tau.imag > 0:
        raise ValueError("lattice not positively oriented (Im tau must be > 0)")
    if n_side < 8 or n_side % 2 != 0:
        raise ValueError(f"n_side must be even and >= 8, got {n_side}")
    if stencil_order not in (2, 4):
        raise ValueError(f"stencil_order must be 2 or 4, got {stencil_order}")
    return TorusGrid(tau=tau, n_side=int(n_side), stencil_order=int(stencil_order))


@dataclass(frozen=True)
class WrapRule:
    """Factor of automorphy on the grid.

    ``mult_a(j, k)`` and ``mult_b(j, k)`` give the multipliers in
    u(z + 1) = mult_a(z) u(z) and u(z + tau) = mult_b(z) u(z) at the lattice
    point with *integer* indices (j, k), which may lie outside [0, N) so that
    ghost samples of any halo width are well defined.
    """

    mult_a: Callable[[np.ndarray, np.ndarray], np.ndarray]
    mult_b: Callable[[np.ndarray, np.ndarray], np.ndarray]
    a_trivial: bool = True

    @classmethod
    def trivial(cls) -> "WrapRule":
        one = lambda j, k: np.ones(np.broadcast(j, k).shape, dtype=complex)
        return cls(mult_a=one, mult_b=one, a_trivial=True)

    def cocycle_defect(self, grid: TorusGrid) -> float:
        """max |m_a(z) m_b(z+1) - m_b(z) m_a(z+tau)| over the grid, scaled."""
        n = grid.n_side
        j = np.arange(n)[:, None]
        k = np.arange(n)[None, :]
        route_ab = self.mult_a(j, k) * self.mult_b(j + n, k)
        route_ba = self.mult_b(j, k) * self.mult_a(j, k + n)
        scale = max(np.abs(route_ab).max(), 1.0)
        return float(np.abs(route_ab - route_ba).max() / scale)


def extend_b(field: np.ndarray, grid: TorusGrid, wrap: WrapRule | None, halo: int) -> np.ndarray:
    """Logical samples on b-indices [-halo, N + halo), automorphy applied."""
    n = grid.n_side
    if wrap is None:
        wrap = WrapRule.trivial()
    j = np.arange(n)[:, None]
    top = np.arange(halo)[None, :]
    bot = np.arange(-halo, 0)[None, :]
    ext = np.empty((n, n + 2 * halo), dtype=complex)
    ext[:, halo:halo + n] = field
    # u_log[j, N + i] = m_b(j, i) u[j, i]
    ext[:, halo + n:] = wrap.mult_b(j, top) * field[:, :halo]
    # u_log[j, -i] = u[j, N - i] / m_b(j, -i)
    ext[:, :halo] = field[:, n - halo:] / wrap.mult_b(j, bot)
    return ext


def _stencil_on_extended(ext: np.ndarray, coeffs: np.ndarray, halo: int) -> np.ndarray:
    """Apply the 5-point b-stencil; consumes a halo of width 2 each side."""
    m = ext.shape[1] - 2 * halo
    out = coeffs[2] * ext[:, halo:halo + m]
    for off, ci in ((-2, 0), (-1, 1), (1, 3), (2, 4)):
        out = out + coeffs[ci] * ext[:, halo + off:halo + off + m]
    return out


def diff_a(field: np.ndarray, grid: TorusGrid, wrap: WrapRule | None = None) -> np.ndarray:
    """Exact Fourier d/da; the wrap must be trivial along a."""
    if wrap is not None and not wrap.a_trivial:
        raise NotImplementedError("spectral a-derivative requires a trivial a-wrap")
    d, _ = spectral_deriv_matrix(grid.n_side)
    return d @ field


def diff_b(field: np.ndarray, grid: TorusGrid, wrap: WrapRule | None = None) -> np.ndarray:
    """Centered d/db of order grid.stencil_order with twist-aware wraparound."""
    ext = extend_b(field, grid, wrap, halo=2)
    return _stencil_on_extended(ext, grid.stencil_coeffs(), halo=2)


def diff_z(field: np.ndarray, grid: TorusGrid, wrap: WrapRule | None = None) -> np.ndarray:
    tau = grid.tau
    den = np.conj(tau) - tau
    return (np.conj(tau) * diff_a(field, grid, wrap) - diff_b(field, grid, wrap)) / den


def diff_zbar(field: np.ndarray, grid: TorusGrid, wrap: WrapRule | None = None) -> np.ndarray:
    tau = grid.tau
    den = tau - np.conj(tau)
    return (tau * diff_a(field, grid, wrap) - diff_b(field, grid, wrap)) / den


def diff_compose(field: np.ndarray, grid: TorusGrid, wrap: WrapRule | None,
                 first: str, second: str) -> np.ndarray:
    """second o first on a single consistent logical extension.

    Mixed flat derivatives commute on the logical cover of the grid; applying
    both stencils to one ghost-extended array realizes that exactly, whereas
    composing the N x N operators would re-extend a non-automorphic
    intermediate.
    """
    tau = grid.tau

    def coeffs_for(which: str) -> tuple[complex, complex]:
        if which == "z":
            den = np.conj(tau) - tau
            return np.conj(tau) / den, -1.0 / den
        if which == "zbar":
            den = tau - np.conj(tau)
            return tau / den, -1.0 / den
        raise ValueError(f"unknown derivative {which!r}")

    halo = 4
    d, _ = spectral_deriv_matrix(grid.n_side)
    ext = extend_b(field, grid, wrap, halo=halo)
    cs = grid.stencil_coeffs()

    def apply(which: str, arr: np.ndarray, h: int) -> np.ndarray:
        ka, kb = coeffs_for(which)
        da = d @ arr
        db = _stencil_on_extended(arr, cs, halo=2)
        m = db.shape[1]
        lead = (arr.shape[1] - m) // 2
        return ka * da[:, lead:lead + m] + kb * db

    inner = apply(first, ext, halo)
    return apply(second, inner, halo - 2)


def integrate(density: np.ndarray, grid: TorusGrid) -> complex:
    """Quadrature of a grid density against omega; exact value t for 1."""
    return complex(grid.t * np.mean(density))


def lambda_contract(coef_zzbar: np.ndarray | complex, grid: TorusGrid):
    """sqrt(-1) * Lambda_g of the (1,1)-form with dz^dzbar coefficient c.

    With Lambda_g(omega) = 1 and omega = (i/2) dz^dzbar this is c -> 2c.
    """
    return 2.0 * coef_zzbar


def plane_wave(grid: TorusGrid, m: int, n: int) -> np.ndarray:
    """exp(2 pi i (m a + n b)) sampled on the grid."""
    a = grid.a_coord[:, None]
    b = grid.b_coord[None, :]
    return np.exp(2j * np.pi * (m * a + n * b))


def plane_wave_dz_eig(grid: TorusGrid, m: int, n: int) -> complex:
    """Exact d/dz eigenvalue of the (m, n) plane wave."""
    tau = grid.tau
    return 2j * np.pi * (m * np.conj(tau) - n) / (np.conj(tau) - tau)


def plane_wave_dzbar_eig(grid: TorusGrid, m: int, n: int) -> complex:
    tau = grid.tau
    return 2j * np.pi * (m * tau - n) / (tau - np.conj(tau))

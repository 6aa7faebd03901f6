"""The concrete model family of hermitian line bundles over X x S.

A family is a degree-d line bundle on the torus, deformed by flat twists
alpha(s) = sum_k c_k s^k dzbar and rescaled by exp(-phi(s)) with
phi(s) = sum A_{k lbar} s^k conj(s^l) (+ an optional quartic term).  Every
fiber metric is Hermite-Einstein with constant i Lambda F = 2 pi d / t, and
all curvature blocks are known in closed form, which is what makes the family
usable as a verification target.

Grid data lives in the unitary trivialization: wrap multipliers
(1, exp(-2 pi i d a)) of modulus one, flat metric weight, and the holomorphic
structure carried by the connection coefficient

    beta(z) = 2 pi i d tau b / (tau - conj(tau)),   b = Im(z)/Im(tau),

so that dbar_s = d/dzbar + beta + alpha(s).  The classical theta-function
trivialization (weight 2 pi d y^2 / t, multipliers (1, exp(-pi i d (2z+tau))))
is reachable through the exact diagonal gauge factor returned by
``gauge_factor_to_theta`` and is used to state the periodicity invariant.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .torus import TorusGrid, WrapRule, build_grid, integrate


def _as_complex_tuple(xs) -> tuple[complex, ...]:
    return tuple(complex(x) for x in xs)


def _as_matrix_tuple(rows) -> tuple[tuple[complex, ...], ...]:
    return tuple(tuple(complex(x) for x in row) for row in rows)


@dataclass(frozen=True)
class FamilySpec:
    tau: complex
    degree: int
    twist: tuple[complex, ...]
    rescale: tuple[tuple[complex, ...], ...]
    n_side: int
    stencil_order: int = 4
    quartic: float = 0.0

    @classmethod
    def create(cls, tau=1j, degree=2, twist=(np.pi,), rescale=None, n_side=48,
               stencil_order=4, quartic=0.0) -> "FamilySpec":
        twist = _as_complex_tuple(twist)
        m = len(twist)
        if rescale is None:
            rescale = [[0.0] * m for _ in range(m)]
        spec = cls(tau=complex(tau), degree=int(degree), twist=twist,
                   rescale=_as_matrix_tuple(rescale), n_side=int(n_side),
                   stencil_order=int(stencil_order), quartic=float(quartic))
        spec.validate()
        return spec

    def validate(self) -> None:
        if not self.tau.imag > 0:
            raise ValueError("lattice not positively oriented (Im tau must be > 0)")
        m = len(self.twist)
        if m not in (1, 2):
            raise ValueError(f"base dimension must be 1 or 2, got {m}")
        a = np.array(self.rescale, dtype=complex)
        if a.shape != (m, m):
            raise ValueError(f"rescale must be {m}x{m}, got shape {a.shape}")
        if np.abs(a - a.conj().T).max() > 1e-12:
            raise ValueError("rescale matrix must be Hermitian (phi must be real)")
        self.grid  # grid construction validates n_side / stencil_order

    @property
    def base_dim(self) -> int:
        return len(self.twist)

    @cached_property
    def grid(self) -> TorusGrid:
        return build_grid(self.tau, self.n_side, self.stencil_order)

    @cached_property
    def rescale_matrix(self) -> np.ndarray:
        return np.array(self.rescale, dtype=complex)

    # -- scalar weight phi(s) and its derivatives ---------------------------

    def phi(self, s) -> float:
        s = np.asarray(s, dtype=complex)
        val = float(np.real(s @ self.rescale_matrix @ np.conj(s)))
        if self.quartic:
            val += self.quartic * float(np.sum(np.abs(s) ** 2)) ** 2
        return val

    def phi_grad(self, s) -> np.ndarray:
        """d phi / d s^k (holomorphic gradient), length m."""
        s = np.asarray(s, dtype=complex)
        out = self.rescale_matrix @ np.conj(s)
        if self.quartic:
            out = out + 2.0 * self.quartic * np.sum(np.abs(s) ** 2) * np.conj(s)
        return out

    def phi_hess(self, s) -> np.ndarray:
        """d^2 phi / d s^k d conj(s^l), an m x m Hermitian matrix."""
        s = np.asarray(s, dtype=complex)
        out = self.rescale_matrix.copy()
        if self.quartic:
            m = self.base_dim
            out = out + 2.0 * self.quartic * (np.sum(np.abs(s) ** 2) * np.eye(m)
                                              + np.outer(np.conj(s), s))
        return out

    def alpha(self, s) -> complex:
        """The dzbar coefficient of the deformation, sum_k c_k s^k."""
        s = np.asarray(s, dtype=complex)
        return complex(np.dot(np.asarray(self.twist), s))

    # -- unitary-gauge grid realization --------------------------------------

    @cached_property
    def wrap(self) -> WrapRule:
        n = self.n_side
        d = self.degree

        def mult_a(j, k):
            return np.ones(np.broadcast(j, k).shape, dtype=complex)

        def mult_b(j, k):
            j, k = np.broadcast_arrays(j, k)
            return np.exp(-2j * np.pi * d * j / n)

        return WrapRule(mult_a=mult_a, mult_b=mult_b, a_trivial=True)

    @cached_property
    def beta(self) -> np.ndarray:
        """Connection coefficient of the base holomorphic structure, (N, N)."""
        g = self.grid
        b = g.b_coord[None, :]
        val = 2j * np.pi * self.degree * g.tau * b / (g.tau - np.conj(g.tau))
        return np.broadcast_to(val, (g.n_side, g.n_side)).copy()

    @cached_property
    def dual(self) -> "FamilySpec":
        """Serre-dual family: opposite degree, twist and rescale weight."""
        neg = tuple(tuple(-x for x in row) for row in self.rescale)
        return replace(self, degree=-self.degree,
                       twist=tuple(-c for c in self.twist),
                       rescale=neg, quartic=-self.quartic)

    # -- theta-gauge data (for the periodicity invariant) --------------------

    def theta_weight(self) -> np.ndarray:
        """w(z) = 2 pi d (Im z)^2 / t on the grid."""
        g = self.grid
        y = g.t * g.b_coord[None, :]
        w = 2.0 * np.pi * self.degree * y**2 / g.t
        return np.broadcast_to(w, (g.n_side, g.n_side)).copy()

    def theta_wrap(self) -> WrapRule:
        n, d, tau = self.n_side, self.degree, self.tau

        def mult_a(j, k):
            return np.ones(np.broadcast(j, k).shape, dtype=complex)

        def mult_b(j, k):
            j, k = np.broadcast_arrays(j, k)
            z = j / n + tau * k / n
            return np.exp(-1j * np.pi * d * (2 * z + tau))

        return WrapRule(mult_a=mult_a, mult_b=mult_b, a_trivial=True)

    def gauge_factor_to_theta(self) -> np.ndarray:
        """g with u_theta = g * u_unitary; |g|^2 = exp(theta_weight)."""
        gr = self.grid
        b = gr.b_coord[None, :]
        g = np.exp(-1j * np.pi * self.degree * self.tau * b**2)
        return np.broadcast_to(g, (gr.n_side, gr.n_side)).copy()

    # -- config (de)serialization --------------------------------------------

    def to_config(self) -> dict:
        return {
            "tau_re": self.tau.real,
            "tau_im": self.tau.imag,
            "degree": self.degree,
            "twist": [[c.real, c.imag] for c in self.twist],
            "rescale": [[[x.real, x.imag] for x in row] for row in self.rescale],
            "n_side": self.n_side,
            "stencil_order": self.stencil_order,
            "quartic": self.quartic,
        }

    @classmethod
    def from_config(cls, cfg: dict) -> "FamilySpec":
        twist = [complex(re, im) for re, im in cfg["twist"]]
        rescale = [[complex(re, im) for re, im in row] for row in cfg["rescale"]]
        return cls.create(tau=complex(cfg["tau_re"], cfg["tau_im"]), degree=cfg["degree"],
                          twist=twist, rescale=rescale, n_side=cfg["n_side"],
                          stencil_order=cfg["stencil_order"],
                          quartic=cfg.get("quartic", 0.0))


@dataclass(frozen=True)
class CurvatureBlocks:
    """Closed-form components of the total-space curvature of (w, alpha, phi)."""

    f_zzbar: float
    f_k_zbar: tuple[complex, ...]
    f_z_lbar: tuple[complex, ...]
    f_klbar: np.ndarray = field(repr=False)


def curvature_blocks(spec: FamilySpec, s) -> CurvatureBlocks:
    return CurvatureBlocks(
        f_zzbar=np.pi * spec.degree / spec.grid.t,
        f_k_zbar=spec.twist,
        f_z_lbar=tuple(np.conj(c) for c in spec.twist),
        f_klbar=spec.phi_hess(s),
    )


def kodaira_spencer(spec: FamilySpec, s, k: int):
    """Harmonic Kodaira-Spencer representative rho_k = -c_k dzbar (x) id."""
    if not 0 <= k < spec.base_dim:
        raise ValueError(f"direction index {k} out of range for m={spec.base_dim}")
    from .hodge import FiberContext, EndForm01

    ctx = FiberContext.get(spec, s)
    values = np.full((spec.n_side, spec.n_side), -spec.twist[k], dtype=complex)
    return EndForm01(values=values, ctx=ctx)


def rho_klbar(spec: FamilySpec, s, k: int, l: int):
    """rho_{k lbar} = (d_k d_lbar phi)(s) (x) id, constant in z."""
    m = spec.base_dim
    if not (0 <= k < m and 0 <= l < m):
        raise ValueError(f"direction indices ({k}, {l}) out of range for m={m}")
    from .hodge import FiberContext, EndSection

    ctx = FiberContext.get(spec, s)
    val = spec.phi_hess(s)[k, l]
    return EndSection(values=np.full((spec.n_side, spec.n_side), val, dtype=complex), ctx=ctx)


def phi_klbar(spec: FamilySpec, s, k: int, l: int) -> complex:
    """Fiber average of tr(R_{k lbar}) / rank, computed by quadrature."""
    rho = rho_klbar(spec, s, k, l)
    g = spec.grid
    return complex(integrate(rho.values, g) / integrate(np.ones_like(rho.values), g))


def rescale_to_kill_H(spec: FamilySpec) -> FamilySpec:
    """Subtract the fiberwise-average scalar weight so all harmonic
    projections H(rho_{k lbar}) vanish; idempotent, and a no-op when the
    rescale data is already zero."""
    m = spec.base_dim
    zero = tuple(tuple(0.0 + 0.0j for _ in range(m)) for _ in range(m))
    if spec.rescale == zero and spec.quartic == 0.0:
        return spec
    return replace(spec, rescale=zero, quartic=0.0)


def wp_inner(spec: FamilySpec, s, k: int, l: int) -> complex:
    """Weil-Petersson pairing <rho_k, rho_l> by quadrature."""
    rk, rl = kodaira_spencer(spec, s, k), kodaira_spencer(spec, s, l)
    # End(F) of a line bundle carries the flat metric and g^{zbar z} = 1.
    return complex(integrate(rk.values * np.conj(rl.values), spec.grid))


def endo_trace_curvature(spec: FamilySpec, s, k: int, l: int,
                         synthetic: np.ndarray | None = None) -> complex:
    """Trace of the End(F)-curvature component acting as [R_{k lbar}, .].

    The commutator action is traceless for any rank; ``synthetic`` provides a
    rank >= 2 matrix R_{k lbar} to exercise the same computation on.
    """
    if synthetic is None:
        r = np.array([[spec.phi_hess(s)[k, l]]], dtype=complex)
    else:
        r = np.asarray(synthetic, dtype=complex)
    n = r.shape[0]
    ad = np.kron(r, np.eye(n)) - np.kron(np.eye(n), r.T)
    return complex(np.trace(ad))

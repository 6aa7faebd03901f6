"""Discrete bundle-valued Dolbeault complex on a fiber X x {s}.

Carriers are grid fields in the unitary trivialization of the family: the
metric weight is the scalar exp(-phi(s)), all wrap multipliers are unimodular,
and dbar = diff_zbar + beta(z) + alpha(s) acts through the shared kernels.
dbar_star is the exact conjugate transpose (the quadrature weight is a uniform
scalar, so weighted and plain adjoints coincide), hence every
integration-by-parts identity holds to rounding.

Harmonic spaces are null clusters of the Laplacian split into geometric
harmonics and b-Nyquist stencil artifacts (doubler modes of the centered
stencil); ``harmonic_basis`` returns the geometric part, the Green operator
deflates the full cluster.  End(F) of the rank-1 family is the trivial bundle,
so endomorphism-valued fields ride on the d = 0, untwisted context.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels
from .family import FamilySpec
from .solvers import deflated_cg, detect_null_dim, resolution_split, smallest_eigenpairs
from .torus import spectral_deriv_matrix

DEFAULT_SEED = 0x5EED


class ExactZero:
    """Structural zero from a vanishing form degree (e.g. dzbar ^ dzbar)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "EXACT_ZERO"


EXACT_ZERO = ExactZero()


@dataclass(frozen=True)
class Section:
    """F_s-valued (0,0)-form; values (N, N) or (N, N, r) for synthetic rank r."""

    values: np.ndarray
    ctx: "FiberContext"

    @property
    def rank(self) -> int:
        return 1 if self.values.ndim == 2 else self.values.shape[2]


@dataclass(frozen=True)
class Form01:
    """F_s-valued (0,1)-form, stored through its dzbar coefficient."""

    values: np.ndarray
    ctx: "FiberContext"

    @property
    def rank(self) -> int:
        return 1 if self.values.ndim == 2 else self.values.shape[2]


@dataclass(frozen=True)
class EndSection:
    """End(F_s)-valued function; scalar (N, N) for rank 1, (N, N, r, r) else."""

    values: np.ndarray
    ctx: "FiberContext"

    @property
    def rank(self) -> int:
        return 1 if self.values.ndim == 2 else self.values.shape[2]


@dataclass(frozen=True)
class EndForm01:
    """End(F_s)-valued (0,1)-form through its dzbar coefficient."""

    values: np.ndarray
    ctx: "FiberContext"

    @property
    def rank(self) -> int:
        return 1 if self.values.ndim == 2 else self.values.shape[2]


_FAMILY_KINDS = (Section, Form01)
_END_KINDS = (EndSection, EndForm01)


@dataclass(frozen=True)
class HarmonicData:
    evals: np.ndarray
    genuine: np.ndarray      # (N^2, dim) orthonormal geometric harmonics
    artifact: np.ndarray     # (N^2, k - dim) stencil doubler directions
    lam_max: float
    resolved_mu: np.ndarray
    ritz_block: np.ndarray   # full converged block, used to warm-start neighbors

    @property
    def dim(self) -> int:
        return self.genuine.shape[1]

    @property
    def cluster(self) -> np.ndarray:
        return np.hstack([self.genuine, self.artifact])


class FiberContext:
    """Cached per-(family, s) operator data; construct through ``get``."""

    _cache: OrderedDict = OrderedDict()
    _cache_cap = 96
    _cache_lock = threading.Lock()

    def __init__(self, spec: FamilySpec, s):
        self.spec = spec
        self.s = tuple(complex(x) for x in np.atleast_1d(np.asarray(s, dtype=complex)))
        grid = spec.grid
        self.grid = grid
        n = grid.n_side
        self.n = n
        self.da, self.da_h = spectral_deriv_matrix(n)
        self.coeffs = np.ascontiguousarray(grid.stencil_coeffs())
        self.coeffs_adj = np.ascontiguousarray(np.conj(self.coeffs[::-1]))
        tau = grid.tau
        self.kap_a = tau / (tau - np.conj(tau))
        self.kap_b = -1.0 / (tau - np.conj(tau))
        j = np.arange(n)
        self.up = np.ascontiguousarray(np.exp(-2j * np.pi * spec.degree * j / n))
        self.dn = np.ascontiguousarray(np.conj(self.up))
        self.up_adj = np.ascontiguousarray(np.conj(self.dn))
        self.dn_adj = np.ascontiguousarray(np.conj(self.up))
        self.diag = np.ascontiguousarray(spec.beta + spec.alpha(self.s))
        self.diag_adj = np.ascontiguousarray(np.conj(self.diag))
        self.weight = float(np.exp(-spec.phi(self.s)))
        self.quad = grid.quad_weight
        self._harmonic: dict[int, HarmonicData] = {}
        self._dense_dbar: np.ndarray | None = None

    @classmethod
    def get(cls, spec: FamilySpec, s) -> "FiberContext":
        key = (spec, tuple(complex(x) for x in np.atleast_1d(np.asarray(s, dtype=complex))))
        with cls._cache_lock:
            ctx = cls._cache.get(key)
            if ctx is not None:
                cls._cache.move_to_end(key)
                return ctx
        ctx = cls(spec, key[1])
        with cls._cache_lock:
            existing = cls._cache.get(key)
            if existing is not None:
                return existing
            cls._cache[key] = ctx
            if len(cls._cache) > cls._cache_cap:
                cls._cache.popitem(last=False)
        return ctx

    # -- raw operator applications on (N, N) arrays --------------------------

    @staticmethod
    def _da_block(da: np.ndarray, arr: np.ndarray) -> np.ndarray:
        n0, n1, nb = arr.shape
        return (da @ arr.reshape(n0, n1 * nb)).reshape(n0, n1, nb)

    def dbar_apply(self, arr: np.ndarray) -> np.ndarray:
        if arr.ndim == 3:
            return kernels.dbar_core3(arr, self._da_block(self.da, arr), self.kap_a,
                                      self.kap_b, self.up, self.dn, self.coeffs, self.diag)
        return kernels.dbar_core(arr, self.da @ arr, self.kap_a, self.kap_b,
                                 self.up, self.dn, self.coeffs, self.diag)

    def dbar_star_apply(self, arr: np.ndarray) -> np.ndarray:
        if arr.ndim == 3:
            return kernels.dbar_core3(arr, self._da_block(self.da_h, arr),
                                      np.conj(self.kap_a), np.conj(self.kap_b),
                                      self.up_adj, self.dn_adj, self.coeffs_adj, self.diag_adj)
        return kernels.dbar_core(arr, self.da_h @ arr, np.conj(self.kap_a), np.conj(self.kap_b),
                                 self.up_adj, self.dn_adj, self.coeffs_adj, self.diag_adj)

    def lap_apply(self, q: int, arr: np.ndarray) -> np.ndarray:
        if q == 0:
            return self.dbar_star_apply(self.dbar_apply(arr))
        return self.dbar_apply(self.dbar_star_apply(arr))

    def lap_apply_flat(self, q: int, v: np.ndarray) -> np.ndarray:
        """Laplacian on flattened fields, vectors (n^2,) or blocks (n^2, nb)."""
        if v.ndim == 1:
            return self.lap_apply(q, v.reshape(self.n, self.n)).reshape(-1)
        nb = v.shape[1]
        block = np.ascontiguousarray(v.reshape(self.n, self.n, nb))
        return self.lap_apply(q, block).reshape(self.n * self.n, nb)

    # -- derived contexts -----------------------------------------------------

    @cached_property
    def end_ctx(self) -> "FiberContext":
        """End(F) of the rank-1 family is O with the flat metric: the trivial
        untwisted context on the same grid."""
        proxy = FamilySpec.create(tau=self.spec.tau, degree=0, twist=(0.0,),
                                  rescale=[[0.0]], n_side=self.spec.n_side,
                                  stencil_order=self.spec.stencil_order)
        return FiberContext.get(proxy, (0.0,))

    @cached_property
    def dual_ctx(self) -> "FiberContext":
        return FiberContext.get(self.spec.dual, self.s)

    # -- dense assembly (small grids and oracles) -----------------------------

    def dense_dbar_matrix(self) -> np.ndarray:
        if self._dense_dbar is not None:
            return self._dense_dbar
        n = self.n
        eye = np.eye(n)
        b_op = np.zeros((n * n, n * n), dtype=complex)
        offsets = (-2, -1, 1, 2)
        cidx = {-2: 0, -1: 1, 1: 3, 2: 4}
        for o in offsets:
            c = self.coeffs[cidx[o]]
            if c == 0:
                continue
            interior = np.zeros((n, n), dtype=complex)
            top = np.zeros((n, n), dtype=complex)
            bot = np.zeros((n, n), dtype=complex)
            for k in range(n):
                kt = k + o
                if 0 <= kt < n:
                    interior[k, kt] = 1.0
                elif kt >= n:
                    top[k, kt - n] = 1.0
                else:
                    bot[k, kt + n] = 1.0
            b_op += c * (np.kron(eye, interior)
                         + np.kron(np.diag(self.up), top)
                         + np.kron(np.diag(self.dn), bot))
        mat = self.kap_a * np.kron(self.da, eye) + self.kap_b * b_op
        mat[np.arange(n * n), np.arange(n * n)] += self.diag.reshape(-1)
        self._dense_dbar = mat
        return mat

    # -- harmonic clusters ----------------------------------------------------

    def harmonic(self, q: int, warm_start: np.ndarray | None = None) -> HarmonicData:
        if q not in self._harmonic:
            self._harmonic[q] = self._compute_harmonic(q, warm_start)
        return self._harmonic[q]

    def _compute_harmonic(self, q: int, warm_start: np.ndarray | None = None) -> HarmonicData:
        n2 = self.n * self.n
        nb = min(abs(self.spec.degree) + 4, n2)
        if self.n <= 24:
            b = self.dense_dbar_matrix()
            mat = b.conj().T @ b if q == 0 else b @ b.conj().T
            evals, vecs = np.linalg.eigh(mat)
            evals = np.clip(evals, 0.0, None)
            lam_max = float(evals[-1])
            theta, x = evals[:nb], vecs[:, :nb]
        else:
            theta, x, lam_max = smallest_eigenpairs(
                lambda v: self.lap_apply_flat(q, v), n2, nb, seed=DEFAULT_SEED,
                x0=warm_start)
        k = detect_null_dim(theta, lam_max)
        genuine, artifact, mu = resolution_split(x[:, :k], self.n)
        genuine = self._canonicalize(genuine)
        return HarmonicData(evals=theta, genuine=genuine, artifact=artifact,
                            lam_max=lam_max, resolved_mu=mu, ritz_block=x)

    def _canonicalize(self, basis: np.ndarray) -> np.ndarray:
        """Deterministic frame: modified Gram-Schmidt in the weighted inner
        product, ordered by descending magnitude at z = 0, phase fixed at the
        pointwise maximum."""
        if basis.shape[1] == 0:
            return basis
        mags = np.abs(basis[0, :])
        order = np.argsort(-mags, kind="stable")
        basis = basis[:, order].copy()
        for i in range(basis.shape[1]):
            v = basis[:, i]
            for jj in range(i):
                v = v - basis[:, jj] * np.vdot(basis[:, jj], v)
            nrm = np.linalg.norm(v)
            if nrm > 0:
                v = v / nrm
            p = int(np.argmax(np.abs(v)))
            ph = v[p]
            if np.abs(ph) > 0:
                v = v * (np.conj(ph) / np.abs(ph))
            basis[:, i] = v
        return basis

    # -- projections and Green solves ------------------------------------------

    def project_flat(self, q: int, flat: np.ndarray, genuine_only: bool) -> np.ndarray:
        data = self.harmonic(q)
        basis = data.genuine if genuine_only else data.cluster
        if basis.shape[1] == 0:
            return np.zeros_like(flat)
        return basis @ (basis.conj().T @ flat)

    def green_flat(self, q: int, flat: np.ndarray, tol: float = 1e-10,
                   maxiter: int | None = None) -> np.ndarray:
        data = self.harmonic(q)
        if maxiter is None:
            maxiter = 10 * self.n * self.n

        def apply_op(v):
            return self.lap_apply(q, v.reshape(self.n, self.n)).reshape(-1)

        return deflated_cg(apply_op, flat, data.cluster, tol=tol, maxiter=maxiter)


# -- field helpers --------------------------------------------------------------


def _op_ctx(x) -> FiberContext:
    """Context whose operators act on x: End kinds ride the trivial bundle."""
    return x.ctx.end_ctx if isinstance(x, _END_KINDS) else x.ctx


def _require_rank1(x, op_name: str):
    if x.rank != 1:
        raise NotImplementedError(f"{op_name} on rank >= 2 synthetic data is out of scope")


def _q_of(x) -> int:
    return 0 if isinstance(x, (Section, EndSection)) else 1


def _like(x, values):
    return type(x)(values=values, ctx=x.ctx)


def dbar(x):
    """dbar_s = diff_zbar + beta + alpha(s) on (0,0)-data; zero on (0,1)."""
    if isinstance(x, (Form01, EndForm01)):
        return EXACT_ZERO
    _require_rank1(x, "dbar")
    out = _op_ctx(x).dbar_apply(x.values)
    return Form01(out, x.ctx) if isinstance(x, Section) else EndForm01(out, x.ctx)


def dbar_star(x):
    """Exact discrete adjoint of dbar; zero on (0,0)-data."""
    if isinstance(x, (Section, EndSection)):
        return EXACT_ZERO
    _require_rank1(x, "dbar_star")
    out = _op_ctx(x).dbar_star_apply(x.values)
    return Section(out, x.ctx) if isinstance(x, Form01) else EndSection(out, x.ctx)


def laplacian(x):
    _require_rank1(x, "laplacian")
    out = _op_ctx(x).lap_apply(_q_of(x), x.values)
    return _like(x, out)


def inner(x, y) -> complex:
    """L2 pairing <x, y>, conjugate-linear in the second slot."""
    if type(x) is not type(y):
        raise TypeError(f"inner product between {type(x).__name__} and {type(y).__name__}")
    if x.values.shape != y.values.shape:
        raise ValueError("inner product between fields of different shape")
    ctx = x.ctx
    w = ctx.quad * (ctx.weight if isinstance(x, _FAMILY_KINDS) else 1.0)
    return complex(w * np.sum(x.values * np.conj(y.values)))


def norm(x) -> float:
    if x is EXACT_ZERO:
        return 0.0
    return float(np.sqrt(max(inner(x, x).real, 0.0)))


def harmonic_basis(spec: FamilySpec, s, q: int) -> list:
    """Orthonormal geometric harmonic basis in degree q (Section or Form01).

    Raises RankJumpError via the detection rule when no admissible spectral
    gap exists.
    """
    if q not in (0, 1):
        raise ValueError(f"q must be 0 or 1 on a one-dimensional fiber, got {q}")
    ctx = FiberContext.get(spec, s)
    data = ctx.harmonic(q)
    kind = Section if q == 0 else Form01
    scale = 1.0 / np.sqrt(ctx.quad * ctx.weight)  # weighted-orthonormal fields
    return [kind(values=(scale * data.genuine[:, i]).reshape(ctx.n, ctx.n), ctx=ctx)
            for i in range(data.dim)]


def harmonic_project(x, include_artifacts: bool = False):
    """Orthogonal projection onto the harmonic space (optionally the full
    discrete null cluster) of x's Laplacian."""
    _require_rank1(x, "harmonic_project")
    ctx = _op_ctx(x)
    flat = ctx.project_flat(_q_of(x), x.values.reshape(-1), genuine_only=not include_artifacts)
    return _like(x, flat.reshape(ctx.n, ctx.n))


def green(x, tol: float = 1e-10, maxiter: int | None = None):
    """Green operator: box G(x) = x - H(x), H(G(x)) = 0, by deflated CG."""
    _require_rank1(x, "green")
    ctx = _op_ctx(x)
    flat = ctx.green_flat(_q_of(x), x.values.reshape(-1), tol=tol, maxiter=maxiter)
    return _like(x, flat.reshape(ctx.n, ctx.n))


def cup(a, x):
    """A cup x: apply the endomorphism, wedge the form parts."""
    if isinstance(a, EndForm01):
        if isinstance(x, (Form01, EndForm01)):
            return EXACT_ZERO          # dzbar ^ dzbar = 0
        target = Form01 if isinstance(x, Section) else EndForm01
    elif isinstance(a, EndSection):
        target = type(x)
    else:
        raise TypeError(f"cup expects an End-valued form, got {type(a).__name__}")
    if a.rank == 1 and x.rank == 1:
        vals = a.values * x.values
    elif x.values.ndim == 3:
        vals = np.einsum("jkab,jkb->jka", a.values, x.values)
    else:
        vals = np.einsum("jkab,jkbc->jkac", a.values, x.values)
    return target(values=vals, ctx=x.ctx)


def cap(a, x):
    """A* cap x: formal adjoint of cup(a, .); lowers the antiholomorphic degree."""
    if not isinstance(a, EndForm01):
        raise TypeError(f"cap expects an End-valued (0,1)-form, got {type(a).__name__}")
    if isinstance(x, (Section, EndSection)):
        return EXACT_ZERO
    target = Section if isinstance(x, Form01) else EndSection
    if a.rank == 1 and x.rank == 1:
        vals = np.conj(a.values) * x.values          # g^{zbar z} = 1
    elif x.values.ndim == 3:
        vals = np.einsum("jkba,jkb->jka", np.conj(a.values), x.values)
    else:
        vals = np.einsum("jkba,jkbc->jkac", np.conj(a.values), x.values)
    return target(values=vals, ctx=x.ctx)


def endo_commutator_lambda(a, b):
    """sqrt(-1) Lambda_g [a, b*] with b* the h-adjoint (1,0)-companion.

    Scalar endomorphisms commute identically, so rank 1 returns exact zeros;
    the Lambda convention contributes the factor 2 of ``lambda_contract``.
    """
    if not isinstance(a, EndForm01) or not isinstance(b, EndForm01):
        raise TypeError("endo_commutator_lambda expects two End-valued (0,1)-forms")
    if a.rank == 1:
        vals = np.zeros_like(a.values)
    else:
        bstar = np.conj(np.swapaxes(b.values, 2, 3))
        vals = 2.0 * (np.einsum("jkab,jkbc->jkac", bstar, a.values)
                      - np.einsum("jkab,jkbc->jkac", a.values, bstar))
    return EndSection(values=vals, ctx=a.ctx)

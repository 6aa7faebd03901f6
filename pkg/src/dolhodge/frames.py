"""Holomorphic, fiberwise-harmonic frames of the direct images over an
s-stencil, their Gram matrices, and the finite-difference Chern curvature.

q = 0 frames (degree > 0) are point-evaluation normalized kernel elements:
the unique harmonic sections taking the value delta_{j rho} at d fixed grid
nodes.  Solutions of a holomorphically varying linear system, they are
pointwise holomorphic in s, which the FD certificate checks.

q = 1 frames (degree < 0) are built through the Serre pairing with the dual
family's q = 0 frame.  The resulting representatives are fiberwise harmonic
and represent a holomorphic frame of classes; only the harmonic projection of
their s-bar derivative vanishes (the pointwise derivative is dbar-exact), so
that projection is the holomorphy certificate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import RankJumpError
from .family import FamilySpec
from .hodge import DEFAULT_SEED, FiberContext, Form01, Section
from .runtime import parallel_map

#: condition-number limit for the point-evaluation normalization matrix
NODE_COND_LIMIT = 1e8
#: relative singular-value floor for the Serre pairing matrix
PAIRING_FLOOR = 1e-10


@dataclass(frozen=True)
class SStencil:
    """Full 3^(2m) finite-difference stencil around a base point.

    Axis 2p varies Re(s^p), axis 2p+1 varies Im(s^p); offsets are
    (-eta, 0, +eta) per axis and the center has multi-index (1, ..., 1).
    """

    center: tuple[complex, ...]
    step: float

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("stencil step must be positive")

    @property
    def m(self) -> int:
        return len(self.center)

    @property
    def shape(self) -> tuple[int, ...]:
        return (3,) * (2 * self.m)

    @property
    def center_index(self) -> tuple[int, ...]:
        return (1,) * (2 * self.m)

    def point(self, idx: tuple[int, ...]) -> tuple[complex, ...]:
        s = list(self.center)
        for p in range(self.m):
            s[p] = s[p] + self.step * (idx[2 * p] - 1) + 1j * self.step * (idx[2 * p + 1] - 1)
        return tuple(s)

    def indices(self):
        return list(product(range(3), repeat=2 * self.m))


def make_stencil(s0, eta: float) -> SStencil:
    s0 = tuple(complex(x) for x in np.atleast_1d(np.asarray(s0, dtype=complex)))
    return SStencil(center=s0, step=float(eta))


# -- finite differences on stencil-valued arrays ---------------------------------


def _center_rest(arr: np.ndarray, n_stencil_axes: int) -> np.ndarray:
    return arr[(1,) * n_stencil_axes]


def _d1(arr: np.ndarray, axis: int, eta: float) -> np.ndarray:
    return (np.take(arr, 2, axis=axis) - np.take(arr, 0, axis=axis)) / (2.0 * eta)


def _d2_same(arr: np.ndarray, axis: int, eta: float) -> np.ndarray:
    return (np.take(arr, 2, axis=axis) - 2.0 * np.take(arr, 1, axis=axis)
            + np.take(arr, 0, axis=axis)) / eta**2


def stencil_d1(field_arr: np.ndarray, stencil: SStencil, k: int, conj: bool = False) -> np.ndarray:
    """First holomorphic (or conjugate) s-derivative at the stencil center."""
    na = 2 * stencil.m
    dx = _center_rest(_d1(field_arr, 2 * k, stencil.step), na - 1)
    dy = _center_rest(_d1(field_arr, 2 * k + 1, stencil.step), na - 1)
    return 0.5 * (dx + 1j * dy) if conj else 0.5 * (dx - 1j * dy)


def stencil_d2(field_arr: np.ndarray, stencil: SStencil, k: int, l: int) -> np.ndarray:
    """Mixed second derivative d_k d_lbar at the stencil center."""
    na = 2 * stencil.m
    eta = stencil.step

    def mixed(r1: int, r2: int) -> np.ndarray:
        if r1 == r2:
            return _center_rest(_d2_same(field_arr, r1, eta), na - 1)
        hi, lo = max(r1, r2), min(r1, r2)
        out = _d1(_d1(field_arr, hi, eta), lo, eta)
        return _center_rest(out, na - 2)

    xk, yk, xl, yl = 2 * k, 2 * k + 1, 2 * l, 2 * l + 1
    return 0.25 * (mixed(xk, xl) + 1j * mixed(xk, yl) - 1j * mixed(yk, xl) + mixed(yk, yl))


def ensure_harmonics(spec: FamilySpec, stencil: SStencil, q: int) -> None:
    """Compute harmonic clusters at every stencil point, center first; the
    center's Ritz block warm-starts the neighbors (identical answers, fewer
    filter passes)."""
    center = FiberContext.get(spec, stencil.center)
    hint = center.harmonic(q).ritz_block

    def run(idx):
        FiberContext.get(spec, stencil.point(idx)).harmonic(q, warm_start=hint)

    parallel_map(run, [i for i in stencil.indices() if i != stencil.center_index])


# -- frames ----------------------------------------------------------------------


@dataclass(frozen=True)
class HoloFrame:
    q: int
    spec: FamilySpec
    stencil: SStencil
    reps: np.ndarray                 # stencil.shape + (R, N, N)
    rank: int
    normalization: dict = field(repr=False)
    harmonicity: float = 0.0
    holo_residual: float = 0.0
    normalization_residual: float = 0.0

    def ctx(self, idx) -> FiberContext:
        return FiberContext.get(self.spec, self.stencil.point(tuple(idx)))

    def fields(self, idx) -> list:
        ctx = self.ctx(idx)
        kind = Section if self.q == 0 else Form01
        return [kind(values=self.reps[tuple(idx)][r], ctx=ctx) for r in range(self.rank)]


def _select_nodes(basis: np.ndarray, n_side: int, seed: int) -> np.ndarray:
    """Greedy choice of R grid nodes maximizing the smallest singular value of
    the evaluation matrix, from 32 seeded candidates."""
    rank = basis.shape[1]
    rng = np.random.default_rng(seed)
    cands = rng.choice(n_side * n_side, size=min(32, n_side * n_side), replace=False)
    chosen: list[int] = []
    for _ in range(rank):
        best, best_sigma = -1, -1.0
        for c in cands:
            if c in chosen:
                continue
            mat = basis[np.array(chosen + [int(c)]), :]
            sigma = np.linalg.svd(mat, compute_uv=False)[-1]
            if sigma > best_sigma + 1e-15 * max(best_sigma, 1.0):
                best, best_sigma = int(c), float(sigma)
        chosen.append(best)
    return np.array(chosen, dtype=int)


def holo_frame_q0(spec: FamilySpec, stencil: SStencil, seed: int = DEFAULT_SEED) -> HoloFrame:
    """Point-evaluation normalized holomorphic frame of R^0 p_* (degree > 0)."""
    if spec.degree <= 0:
        raise ValueError("holo_frame_q0 requires a family of positive degree")
    ensure_harmonics(spec, stencil, 0)
    ctx0 = FiberContext.get(spec, stencil.center)
    data0 = ctx0.harmonic(0)
    rank = data0.dim
    if rank == 0:
        raise RankJumpError("direct image has rank 0 at the stencil center")
    nodes = _select_nodes(data0.genuine, ctx0.n, seed)
    eval0 = data0.genuine[nodes, :]
    sv = np.linalg.svd(eval0, compute_uv=False)
    if sv[0] / sv[-1] > NODE_COND_LIMIT:
        raise ValueError("evaluation nodes degenerate; re-selection required "
                         f"(condition {sv[0] / sv[-1]:.2e})")

    n = ctx0.n
    idxs = stencil.indices()

    def build(idx):
        ctx = FiberContext.get(spec, stencil.point(idx))
        data = ctx.harmonic(0)
        if data.dim != rank:
            raise RankJumpError(f"rank jump: h^0 = {data.dim} at s = {stencil.point(idx)} "
                                f"vs {rank} at the center")
        mat = data.genuine[nodes, :]
        coef = np.linalg.solve(mat, np.eye(rank, dtype=complex))
        reps = (data.genuine @ coef).T.reshape(rank, n, n)
        defect = float(np.abs(mat @ coef - np.eye(rank)).max())
        return reps, defect

    built = parallel_map(build, idxs)
    reps = np.empty(stencil.shape + (rank, n, n), dtype=complex)
    norm_resid = 0.0
    for idx, (r, defect) in zip(idxs, built):
        reps[idx] = r
        norm_resid = max(norm_resid, defect)

    center = reps[stencil.center_index]
    harm = _harmonicity(ctx0, 0, center)
    holo = _raw_holo_residual(reps, stencil, center)
    return HoloFrame(q=0, spec=spec, stencil=stencil, reps=reps, rank=rank,
                     normalization={"nodes": nodes.tolist()},
                     harmonicity=harm, holo_residual=holo,
                     normalization_residual=norm_resid)


def holo_frame_q1(spec: FamilySpec, stencil: SStencil, seed: int = DEFAULT_SEED) -> HoloFrame:
    """Serre-dual frame of R^1 p_* (degree < 0): representatives pair to the
    identity against the dual family's q = 0 frame."""
    if spec.degree >= 0:
        raise ValueError("holo_frame_q1 requires a family of negative degree")
    dual_frame = holo_frame_q0(spec.dual, stencil, seed=seed)
    rank = dual_frame.rank
    ensure_harmonics(spec, stencil, 1)
    ctx0 = FiberContext.get(spec, stencil.center)
    n = ctx0.n
    idxs = stencil.indices()

    def build(idx):
        ctx = FiberContext.get(spec, stencil.point(idx))
        data = ctx.harmonic(1)
        if data.dim != rank:
            raise RankJumpError(f"rank jump: h^1 = {data.dim} at s = {stencil.point(idx)} "
                                f"vs {rank} at the center")
        v = dual_frame.reps[idx].reshape(rank, n * n)
        eta_basis = data.genuine                      # (N^2, rank)
        pair = ctx.quad * (v @ eta_basis)             # bilinear, no metric
        sv = np.linalg.svd(pair, compute_uv=False)
        if sv[-1] < PAIRING_FLOOR * sv[0]:
            raise ValueError("pairing singular: Serre pairing matrix is rank deficient")
        coef = np.linalg.solve(pair, np.eye(rank, dtype=complex))
        reps = (eta_basis @ coef).T.reshape(rank, n, n)
        defect = float(np.abs(pair @ coef - np.eye(rank)).max())
        return reps, defect

    built = parallel_map(build, idxs)
    reps = np.empty(stencil.shape + (rank, n, n), dtype=complex)
    norm_resid = 0.0
    for idx, (r, defect) in zip(idxs, built):
        reps[idx] = r
        norm_resid = max(norm_resid, defect)

    center = reps[stencil.center_index]
    harm = _harmonicity(ctx0, 1, center)
    holo = _projected_holo_residual(ctx0, reps, stencil, center)
    return HoloFrame(q=1, spec=spec, stencil=stencil, reps=reps, rank=rank,
                     normalization={"dual_nodes": dual_frame.normalization["nodes"]},
                     harmonicity=harm, holo_residual=holo,
                     normalization_residual=norm_resid)


def _harmonicity(ctx: FiberContext, q: int, center_reps: np.ndarray) -> float:
    worst = 0.0
    for r in range(center_reps.shape[0]):
        v = center_reps[r]
        worst = max(worst, float(np.linalg.norm(ctx.lap_apply(q, v)) / np.linalg.norm(v)))
    return worst


def _raw_holo_residual(reps, stencil, center_reps) -> float:
    worst = 0.0
    for k in range(stencil.m):
        dbar_s = stencil_d1(reps, stencil, k, conj=True)
        for r in range(center_reps.shape[0]):
            worst = max(worst, float(np.linalg.norm(dbar_s[r]) / np.linalg.norm(center_reps[r])))
    return worst


def _projected_holo_residual(ctx, reps, stencil, center_reps) -> float:
    worst = 0.0
    for k in range(stencil.m):
        dbar_s = stencil_d1(reps, stencil, k, conj=True)
        for r in range(center_reps.shape[0]):
            flat = ctx.project_flat(1, dbar_s[r].reshape(-1), genuine_only=True)
            worst = max(worst, float(np.linalg.norm(flat) / np.linalg.norm(center_reps[r])))
    return worst


# -- Gram matrices and curvature ---------------------------------------------------


@dataclass(frozen=True)
class GramField:
    """Hermitian positive definite Gram matrix H(s) per stencil point."""

    stencil: SStencil
    values: np.ndarray = field(repr=False)   # stencil.shape + (R, R)

    @property
    def rank(self) -> int:
        return self.values.shape[-1]

    def hermiticity_defect(self) -> float:
        sym = np.conj(np.swapaxes(self.values, -1, -2))
        return float(np.abs(self.values - sym).max())

    def min_eigenvalue(self) -> float:
        worst = np.inf
        for idx in self.stencil.indices():
            h = 0.5 * (self.values[idx] + self.values[idx].conj().T)
            worst = min(worst, float(np.linalg.eigvalsh(h).min()))
        return worst


def gram(frame: HoloFrame, idx) -> np.ndarray:
    """H[rho, sigma] = <xi_rho, xi_sigma> at one stencil point."""
    ctx = frame.ctx(idx)
    reps = frame.reps[tuple(idx)]
    w = ctx.quad * ctx.weight
    return w * np.einsum("rjk,sjk->rs", reps, np.conj(reps))


def gram_field(frame: HoloFrame) -> GramField:
    out = np.empty(frame.stencil.shape + (frame.rank, frame.rank), dtype=complex)
    for idx in frame.stencil.indices():
        out[idx] = gram(frame, idx)
    return GramField(stencil=frame.stencil, values=out)


def chern_curvature_fd(gf: GramField) -> np.ndarray:
    """General-frame Chern curvature at the stencil center:

        R_{rho sigmabar k lbar} = -d_k d_lbar H + (d_k H) H^{-1} (d_lbar H),

    O(eta^2) accurate, shape (R, R, m, m)."""
    stencil = gf.stencil
    arr = gf.values
    m = stencil.m
    h0 = arr[stencil.center_index]
    rank = h0.shape[0]
    hinv = np.linalg.inv(h0)
    out = np.empty((rank, rank, m, m), dtype=complex)
    dk = [stencil_d1(arr, stencil, k) for k in range(m)]
    dl = [stencil_d1(arr, stencil, l, conj=True) for l in range(m)]
    for k in range(m):
        for l in range(m):
            d2 = stencil_d2(arr, stencil, k, l)
            out[:, :, k, l] = -d2 + dk[k] @ hinv @ dl[l]
    return out


def _inv_sqrtm_hermitian(h: np.ndarray) -> np.ndarray:
    evals, vecs = np.linalg.eigh(h)
    if evals.min() <= 0:
        raise ValueError("Gram matrix not positive definite")
    return (vecs * (evals ** -0.5)) @ vecs.conj().T


def normal_gauge(gf: GramField) -> tuple[GramField, np.ndarray]:
    """Holomorphic gauge T(s) with H'(s0) = I and d_k H'(s0) = 0.

    Frames transform as xi' = xi . T, Grams as H' = T^T H conj(T).  Returns
    the corrected Gram field and T(s0).
    """
    stencil = gf.stencil
    arr = gf.values
    h0 = arr[stencil.center_index]
    t0 = _inv_sqrtm_hermitian(h0.T)
    corr = [-(t0.conj().T @ stencil_d1(arr, stencil, k).T @ t0)
            for k in range(stencil.m)]
    eye = np.eye(h0.shape[0], dtype=complex)
    out = np.empty_like(arr)
    for idx in stencil.indices():
        ds = np.array(stencil.point(idx)) - np.array(stencil.center)
        t = t0 @ (eye + sum(ds[k] * corr[k] for k in range(stencil.m)))
        out[idx] = t.T @ arr[idx] @ np.conj(t)
    return GramField(stencil=stencil, values=out), t0


# -- harmonization and rank reports -------------------------------------------------


@dataclass(frozen=True)
class RankReport:
    ok: bool
    q: int
    dims: dict
    offenders: list

    def __bool__(self):
        return self.ok


def rank_constancy_check(spec: FamilySpec, stencil: SStencil, q: int) -> RankReport:
    """Harmonic dimension at every stencil point; never raises, reports."""
    dims = {}
    offenders = []
    try:
        ensure_harmonics(spec, stencil, q)
    except RankJumpError:
        pass  # per-point handling below records the offenders
    for idx in stencil.indices():
        try:
            ctx = FiberContext.get(spec, stencil.point(idx))
            dims[idx] = ctx.harmonic(q).dim
        except RankJumpError as exc:
            dims[idx] = None
            offenders.append((idx, str(exc)))
    vals = {v for v in dims.values()}
    ok = len(vals) == 1 and None not in vals
    if not ok and not offenders:
        ref = dims[stencil.center_index]
        offenders = [(idx, f"dim {d} != {ref}") for idx, d in dims.items() if d != ref]
    return RankReport(ok=ok, q=q, dims=dims, offenders=offenders)


def harmonize_family(spec: FamilySpec, stencil: SStencil, values: np.ndarray, q: int,
                     closed_tol: float = 1e-8):
    """Fiberwise harmonic projection of a dbar-closed family.

    ``values`` has shape stencil.shape + (N, N).  Returns (harmonized array,
    report dict).  Raises on a closedness violation for q = 0 input.
    """
    n = spec.n_side
    out = np.empty_like(values)
    class_defect = 0.0
    for idx in stencil.indices():
        ctx = FiberContext.get(spec, stencil.point(idx))
        v = values[idx]
        if q == 0:
            resid = np.linalg.norm(ctx.dbar_apply(v))
            if resid > closed_tol * max(np.linalg.norm(v), 1e-300):
                raise ValueError(f"input family not fiberwise dbar-closed at {idx} "
                                 f"(residual {resid:.2e})")
        flat = ctx.project_flat(q, v.reshape(-1), genuine_only=True)
        out[idx] = flat.reshape(n, n)
        removed = v.reshape(-1) - flat
        h_removed = ctx.project_flat(q, removed, genuine_only=True)
        class_defect = max(class_defect, float(np.linalg.norm(h_removed)
                                               / max(np.linalg.norm(v), 1e-300)))
    return out, {"class_defect": class_defect}

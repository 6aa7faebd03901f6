"""Matrix-free spectral machinery: smallest-eigenvalue block solver, deflated
conjugate gradients, and the kernel-detection rule.

The Laplacians here are Hermitian positive semidefinite in the plain l2 sense
(the unitary gauge makes all quadrature weights uniform scalars), so standard
complex CG and Chebyshev-filtered subspace iteration apply directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import RankJumpError, SolverError

#: eigenvalue ceiling for "numerically zero", relative to lambda_max of the
#: Laplacian; genuine null clusters sit many orders below, physical small
#: eigenvalues (e.g. of nearly-jumping twists) stay above
ZERO_CEILING = 1e-8
#: spec-pinned spectral gap ratio required between the null cluster and the
#: first genuinely positive eigenvalue
GAP_RATIO = 1e3
#: fraction of the b-Nyquist band used by the resolution filter
NYQUIST_BAND = 0.375
#: minimal resolved-energy eigenvalue for a cluster direction to count as a
#: geometric harmonic rather than a stencil artifact
RESOLVED_MIN = 0.5


def lambda_max_estimate(apply_op: Callable, n: int, seed: int, iters: int = 40) -> float:
    """Power-iteration upper bound for a Hermitian PSD operator."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = apply_op(v)
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 1.0
        v = w / lam
    return 1.05 * lam


def _chebyshev_filter(apply_op, x, lo: float, hi: float, degree: int):
    """Amplify [0, lo) against [lo, hi] with a degree-``degree`` Chebyshev
    polynomial mapped onto the suppression window."""
    e = (hi - lo) / 2.0
    c = (hi + lo) / 2.0
    t0 = x
    t1 = (apply_op(x) - c * x) / e
    for _ in range(degree - 1):
        t2 = 2.0 * (apply_op(t1) - c * t1) / e - t0
        t0, t1 = t1, t2
    return t1


def _orthonormalize(x: np.ndarray) -> np.ndarray:
    q, _ = np.linalg.qr(x)
    return q


def smallest_eigenpairs(apply_op: Callable, n: int, nb: int, seed: int,
                        tol: float = 1e-13, max_passes: int = 12,
                        x0: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray, float]:
    """Chebyshev-filtered block subspace iteration with Rayleigh-Ritz.

    Returns ascending Ritz values, their vectors (columns), and lambda_max.
    The null-cluster Ritz pairs are converged to ``tol * lambda_max``; Ritz
    values above the cluster are upper bounds for the corresponding
    eigenvalues (enough for gap tests, not certified).  Deterministic for a
    fixed seed; ``x0`` warm-starts the block (e.g. from a neighboring base
    point) without changing the converged answer.
    """
    lam_max = lambda_max_estimate(apply_op, n, seed)
    hi = 1.02 * lam_max
    ceiling = ZERO_CEILING * lam_max
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, nb)) + 1j * rng.standard_normal((n, nb))
    if x0 is not None:
        take = min(x0.shape[1], nb)
        x[:, :take] = x0[:, :take]
    x = _orthonormalize(x)
    lo = 0.01 * lam_max
    theta = np.zeros(nb)
    resid = np.full(nb, np.inf)
    for _ in range(max_passes):
        degree = int(min(600, max(60, np.ceil(4.5 / np.sqrt(lo / hi)))))
        x = _chebyshev_filter(apply_op, x, lo, hi, degree)
        x = _orthonormalize(x)
        ax = apply_op(x)
        t = x.conj().T @ ax
        t = 0.5 * (t + t.conj().T)
        theta, y = np.linalg.eigh(t)
        x = x @ y
        ax = ax @ y
        resid = np.linalg.norm(ax - x * theta[None, :], axis=0)
        k = int(np.sum(theta <= ceiling))
        # Hermitian residual bounds certify the split: the cluster must be
        # converged, and the first above-ceiling Ritz pair must stay above
        # the ceiling within its error bar.
        cluster_ok = k == 0 or resid[:k].max() <= tol * lam_max
        boundary_ok = k >= nb or theta[k] - resid[k] > ceiling
        if cluster_ok and boundary_ok:
            return np.clip(theta, 0.0, None), x, lam_max
        idx = min(max(k, nb // 2), nb - 1)
        lo = min(max(0.5 * float(theta[idx]), lam_max * 1e-5), 0.45 * hi)
    raise SolverError("block eigensolver did not converge "
                      f"(residual {resid.max():.2e} after {max_passes} passes)")


def detect_null_dim(theta: np.ndarray, lam_max: float) -> int:
    """Spec detection rule: eigenvalue ceiling plus gap ratio >= 1e3.

    ``theta`` ascending.  Raises RankJumpError when the spectrum straddles the
    ceiling without an admissible gap (the locally-free hypothesis fails).
    """
    ceiling = ZERO_CEILING * max(lam_max, 1e-300)
    k = int(np.searchsorted(theta, ceiling, side="right"))
    if k >= theta.size:
        raise SolverError("null cluster fills the computed block; enlarge it")
    if k > 0:
        denom = max(float(theta[k - 1]), 1e-300)
        if theta[k] / denom < GAP_RATIO:
            raise RankJumpError(
                "not locally free here: no admissible spectral gap "
                f"(lambda_{k} = {theta[k - 1]:.3e}, lambda_{k + 1} = {theta[k]:.3e})")
    return k


def resolution_split(cluster: np.ndarray, n_side: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split an orthonormal null-cluster basis into resolved (geometric)
    harmonics and b-Nyquist stencil artifacts.

    ``cluster`` has one flattened (N*N) field per column.  Returns (genuine,
    artifact, resolved_energies).  Basis-independent: the split diagonalizes
    the resolved-energy form on the cluster subspace.
    """
    k = cluster.shape[1]
    if k == 0:
        empty = np.zeros((cluster.shape[0], 0), dtype=complex)
        return empty, empty, np.zeros(0)
    n = n_side
    fields = cluster.T.reshape(k, n, n)
    spec = np.fft.fft(fields, axis=2)
    freqs = np.fft.fftfreq(n, d=1.0 / n)
    band = np.abs(freqs) >= NYQUIST_BAND * n
    spec[:, :, band] = 0.0
    filtered = np.fft.ifft(spec, axis=2).reshape(k, n * n).T
    overlap = cluster.conj().T @ filtered
    overlap = 0.5 * (overlap + overlap.conj().T)
    mu, y = np.linalg.eigh(overlap)       # ascending resolved energies in [0, 1]
    genuine = cluster @ y[:, mu >= RESOLVED_MIN]
    artifact = cluster @ y[:, mu < RESOLVED_MIN]
    return genuine, artifact, mu


def deflated_cg(apply_op: Callable, rhs: np.ndarray, deflate: np.ndarray,
                tol: float, maxiter: int) -> np.ndarray:
    """CG for a Hermitian PSD operator on the orthogonal complement of the
    (orthonormal) ``deflate`` columns; the rhs is projected first."""

    def project(v):
        if deflate.shape[1]:
            return v - deflate @ (deflate.conj().T @ v)
        return v

    b = project(rhs)
    bnorm = np.linalg.norm(b)
    if bnorm <= 1e-13 * max(np.linalg.norm(rhs), 1e-300):
        return np.zeros_like(b)   # rhs was (numerically) harmonic
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rs = np.vdot(r, r).real
    for _ in range(maxiter):
        ap = project(apply_op(p))
        denom = np.vdot(p, ap).real
        if denom <= 0.0:
            raise SolverError("CG breakdown: operator not positive on the deflated space")
        alpha = rs / denom
        x = x + alpha * p
        r = r - alpha * ap
        rs_new = np.vdot(r, r).real
        if np.sqrt(rs_new) <= tol * bnorm:
            return project(x)
        p = r + (rs_new / rs) * p
        rs = rs_new
    raise SolverError(f"CG did not converge in {maxiter} iterations "
                      f"(residual {np.sqrt(rs) / bnorm:.2e})")

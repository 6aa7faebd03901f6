"""Acceptance suite: every criterion at its stated tolerance, one line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the PASS/FAIL lines.
The default configuration is (tau = i, d = 2, c = pi, phi = 0.3|s|^2, m = 1,
N = 48, eta = 1e-2, stencil order 4, seed 0x5EED).
"""

import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import random_field, smooth_field
from dolhodge.curvature import lemma_suite, serre_cross_check, tol_fd, verify_theorem, wp_report
from dolhodge.family import FamilySpec, endo_trace_curvature, kodaira_spencer, phi_klbar, \
    rescale_to_kill_H
from dolhodge.hodge import (EndForm01, FiberContext, Form01, Section, cap, cup,
                            dbar, dbar_star, endo_commutator_lambda, green, harmonic_basis,
                            harmonic_project, inner, laplacian, norm)

N_SIDE = 48
ETA = 1e-2


def announce(number: int, passed: bool, detail: str):
    print(f"\nACCEPTANCE {number:2d}: {'PASS' if passed else 'FAIL'} - {detail}")
    assert passed, f"criterion {number}: {detail}"


def default_spec(**kw):
    base = dict(tau=1j, degree=2, twist=[np.pi], rescale=[[0.3]], n_side=N_SIDE)
    base.update(kw)
    return FamilySpec.create(**base)


@pytest.fixture(scope="module")
def rep_q0():
    return verify_theorem(default_spec(), eta=ETA)


@pytest.fixture(scope="module")
def rep_q1():
    return verify_theorem(default_spec(degree=-2), eta=ETA)


def test_criterion_1_theorem_identity_q0(rep_q0):
    ok = rep_q0.residual_rel <= 5e-3 and rep_q0.wall_time_s <= 60.0
    announce(1, ok, f"q=0 residual_rel={rep_q0.residual_rel:.3e} (<= 5e-3), "
                    f"wall={rep_q0.wall_time_s:.1f}s (<= 60s)")


def test_criterion_2_theorem_identity_q1(rep_q1):
    t3_peak = float(np.abs(rep_q1.t3).max())
    ok = rep_q1.residual_rel <= 5e-3 and t3_peak <= 1e-14
    announce(2, ok, f"q=1 residual_rel={rep_q1.residual_rel:.3e} (<= 5e-3), "
                    f"max|T3|={t3_peak:.1e} (<= 1e-14)")


def test_criterion_3_structural_zeros(rep_q0, rep_q1):
    t1_peak = float(np.abs(rep_q0.t1).max())
    t2_peak = max(float(np.abs(rep_q0.t2).max()), float(np.abs(rep_q1.t2).max()))
    spec = default_spec()
    ks = kodaira_spencer(spec, (0.0,), 0)
    comm_peak = float(np.abs(endo_commutator_lambda(ks, ks).values).max())
    ok = t1_peak <= 1e-14 and t2_peak <= 1e-14 and comm_peak <= 1e-14
    announce(3, ok, f"T1(q=0)={t1_peak:.1e}, T2(rank 1)={t2_peak:.1e}, "
                    f"commutator={comm_peak:.1e} (all <= 1e-14)")


def test_criterion_4_rescaling(rep_q0):
    spec = default_spec()
    killed = rescale_to_kill_H(spec)
    phi_after = abs(phi_klbar(killed, (0.0,), 0, 0))
    rep_after = verify_theorem(killed, eta=ETA)
    t4_after = float(np.abs(rep_after.t4).max())
    shift = rep_q0.lhs - rep_after.lhs
    expected = 0.3 * np.eye(rep_q0.rank)
    shift_defect = float(np.abs(shift[:, :, 0, 0] - expected).max() / 0.3)
    ok = (phi_after <= 1e-12 and t4_after <= 1e-12
          and rep_after.residual_rel <= 5e-3 and shift_defect <= 10 * ETA**2)
    announce(4, ok, f"Phi'={phi_after:.1e} (<=1e-12), T4'={t4_after:.1e} (<=1e-12), "
                    f"residual'={rep_after.residual_rel:.2e} (<=5e-3), "
                    f"lhs shift defect={shift_defect:.2e} (<={10 * ETA**2:.0e})")


def test_criterion_5_hodge_adjointness_suite():
    spec = default_spec()
    ctx = FiberContext.get(spec, (0.0,))
    n = ctx.n
    worst_adj = worst_cupcap = worst_recon = worst_gh = 0.0
    basis = harmonic_basis(spec, (0.0,), 0)
    for trial in range(20):
        rng = np.random.default_rng(1000 + trial)
        u = Section(random_field(rng, n), ctx)
        xi = Form01(random_field(rng, n), ctx)
        a = EndForm01(random_field(rng, n), ctx)
        lhs, rhs = inner(dbar(u), xi), inner(u, dbar_star(xi))
        worst_adj = max(worst_adj, abs(lhs - rhs) / max(abs(lhs), 1.0))
        lhs, rhs = inner(cup(a, u), xi), inner(u, cap(a, xi))
        worst_cupcap = max(worst_cupcap, abs(lhs - rhs) / max(abs(lhs), 1.0))
        # reconstruction with the full discrete null cluster
        v = Section(random_field(rng, n), ctx)
        recon = harmonic_project(v, include_artifacts=True).values \
            + laplacian(green(v, tol=1e-12)).values
        worst_recon = max(worst_recon,
                          np.linalg.norm(recon - v.values) / np.linalg.norm(v.values))
        # and with the geometric projector on resolved data
        w = Section(smooth_field(rng, n), ctx)
        recon2 = harmonic_project(w).values + laplacian(green(w, tol=1e-12)).values
        worst_recon = max(worst_recon,
                          np.linalg.norm(recon2 - w.values) / np.linalg.norm(w.values))
    for h in basis:
        worst_gh = max(worst_gh, norm(green(h)))
    ok = worst_adj <= 1e-12 and worst_cupcap <= 1e-12 and worst_recon <= 1e-8 \
        and worst_gh <= 1e-10
    announce(5, ok, f"adjointness={worst_adj:.1e} (<=1e-12), cup/cap={worst_cupcap:.1e} "
                    f"(<=1e-12), reconstruction={worst_recon:.1e} (<=1e-8), "
                    f"G(harmonic)={worst_gh:.1e} (<=1e-10)")


def test_criterion_6_dimension_oracle():
    failures = []
    for n_side in (32, 48):
        for d in (1, 2, 3, -1, -2, -3):
            spec = default_spec(degree=d, n_side=n_side)
            h0 = len(harmonic_basis(spec, (0.0,), 0))
            h1 = len(harmonic_basis(spec, (0.0,), 1))
            want = (d, 0) if d > 0 else (0, -d)
            if (h0, h1) != want:
                failures.append(f"d={d} N={n_side}: got {(h0, h1)} want {want}")
    env = dict(os.environ, DOLHODGE_THREADS="1")
    proc = subprocess.run([sys.executable, "-m", "dolhodge.cli", "verify-theorem",
                           "--set", "family.degree=0", "--set", "q=0",
                           "--set", "family.n_side=32"],
                          capture_output=True, text=True, env=env)
    if proc.returncode != 3:
        failures.append(f"degree 0 exit code {proc.returncode} != 3")
    ok = not failures
    announce(6, ok, "(h0,h1) exact for d in +-{1,2,3} at N in {32,48}; "
                    "d=0 exits 3" + ("" if ok else f"; failures: {failures}"))


def test_criterion_7_lemma_suite():
    spec = default_spec()
    rep = lemma_suite(spec, eta=ETA)
    tol = tol_fd(spec, ETA)
    over = {k: v for k, v in rep.residuals.items()
            if k != "endo_trace" and v > tol}
    rep_half = lemma_suite(spec, eta=ETA / 2)
    bad_scaling = []
    for key, val in rep.residuals.items():
        if key == "endo_trace" or key in rep.trivial or val < 1e-6:
            continue
        if rep_half.residuals[key] > val / 3.0:
            bad_scaling.append(key)
    ok = not over and not bad_scaling and rep.residuals["endo_trace"] <= 1e-13
    announce(7, ok, f"all residuals <= tol_fd={tol:.1e}; eta-halving shrinks "
                    f"s-dominated residuals >= 3x"
                    + ("" if ok else f"; over={over}, bad_scaling={bad_scaling}"))


def test_criterion_8_convergence_orders():
    eta = 2e-3  # keeps the s-stencil error out of the spatial comparison

    def invariant(rep):
        return complex(np.trace(rep.lhs[:, :, 0, 0]))

    vals = {}
    for n in (16, 24, 32, 48):
        rep = verify_theorem(default_spec(n_side=n), eta=eta, green_tol=1e-12)
        vals[n] = invariant(rep)
    errs = {n: abs(vals[n] - vals[48]) for n in (16, 24, 32)}
    ns = np.array([16.0, 24.0, 32.0])
    order = float(-np.polyfit(np.log(ns), np.log([errs[int(n)] for n in ns]), 1)[0])
    v2 = {}
    for so in (2, 4):
        r32 = verify_theorem(default_spec(n_side=32, stencil_order=so), eta=eta,
                             green_tol=1e-12)
        r48 = verify_theorem(default_spec(n_side=48, stencil_order=so), eta=eta,
                             green_tol=1e-12)
        v2[so] = abs(invariant(r32) - invariant(r48))
    ok = order >= 3.5 and v2[4] < v2[2]
    announce(8, ok, f"spatial order={order:.2f} (>= 3.5) over N in {{16,24,32,48}}; "
                    f"stencil-2 err={v2[2]:.2e} > stencil-4 err={v2[4]:.2e} at N=32")


def test_criterion_9_weil_petersson():
    spec = default_spec()
    axis = np.linspace(-0.1, 0.1, 5)
    pts = [(complex(re, im),) for re in axis for im in axis]
    rep = wp_report(spec, pts)
    val = rep["values"][0][0, 0]
    ok = abs(val - np.pi**2) <= 1e-10 and rep["max_deviation"] <= 1e-12
    announce(9, ok, f"<rho,rho> = {val.real:.10f} = pi^2 +- 1e-10; "
                    f"5x5-grid deviation {rep['max_deviation']:.1e} (<= 1e-12)")


def test_criterion_10_serre_cross_check():
    spec = default_spec(degree=-1)
    out = serre_cross_check(spec, eta=ETA)
    ok = out["mismatch_rel"] <= 1e-2
    announce(10, ok, f"q=1(d=-1) vs -conj(q=0 dual) mismatch "
                     f"{out['mismatch_rel']:.2e} (<= 1e-2)")


def test_criterion_11_endomorphism_trace():
    spec = default_spec()
    rng = np.random.default_rng(0x5EED)
    h2 = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    h2 = 0.5 * (h2 + h2.conj().T)
    worst = max(abs(endo_trace_curvature(spec, (0.0,), 0, 0)),
                abs(endo_trace_curvature(spec, (0.1 - 0.2j,), 0, 0, synthetic=h2)))
    ok = worst <= 1e-13
    announce(11, ok, f"tr[R_klbar, .] = {worst:.1e} on family and synthetic rank 2 (<= 1e-13)")


def test_criterion_12_determinism(tmp_path):
    out = tmp_path / "report.json"
    blobs = {}
    for cmd, extra in (("verify-theorem", ["--set", "family.n_side=16"]),
                       ("wp-metric", [])):
        runs = []
        for threads in ("1", "2"):
            env = dict(os.environ, DOLHODGE_THREADS=threads)
            proc = subprocess.run([sys.executable, "-m", "dolhodge.cli", cmd, *extra,
                                   "--set", f'output_path="{out}"'],
                                  capture_output=True, text=True, env=env)
            assert proc.returncode == 0, proc.stderr
            runs.append(out.read_bytes())
        blobs[cmd] = runs[0] == runs[1]
    ok = all(blobs.values())
    announce(12, ok, f"byte-identical reports across DOLHODGE_THREADS: {blobs}")

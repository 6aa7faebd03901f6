import numpy as np
import pytest

from dolhodge.curvature import (convergence_study, lemma_suite, serre_cross_check, tol_fd,
                                verify_theorem, wp_report)
from dolhodge.errors import RankJumpError
from dolhodge.family import FamilySpec, rescale_to_kill_H


@pytest.fixture(scope="module")
def rep_q0():
    spec = FamilySpec.create(tau=1j, degree=2, twist=[np.pi], rescale=[[0.3]], n_side=24)
    return verify_theorem(spec, eta=1e-2)


@pytest.fixture(scope="module")
def rep_q1():
    spec = FamilySpec.create(tau=1j, degree=-2, twist=[np.pi], rescale=[[0.3]], n_side=24)
    return verify_theorem(spec, eta=1e-2)


class TestVerifyTheorem:
    def test_q0_residual(self, rep_q0):
        assert rep_q0.residual_rel <= 5e-3
        assert rep_q0.rank == 2

    def test_q1_residual(self, rep_q1):
        assert rep_q1.residual_rel <= 5e-3

    def test_structural_zeros(self, rep_q0, rep_q1):
        assert np.abs(rep_q0.t1).max() <= 1e-14
        assert np.abs(rep_q0.t2).max() <= 1e-14
        assert np.abs(rep_q1.t3).max() <= 1e-14
        assert np.abs(rep_q1.t2).max() <= 1e-14

    def test_t4_is_phi_times_identity(self, rep_q0):
        eye = np.eye(2)
        assert np.abs(rep_q0.t4[:, :, 0, 0] - 0.3 * eye).max() <= 1e-10

    def test_hermiticity(self, rep_q0, rep_q1):
        assert rep_q0.hermiticity_defect <= 1e-10
        assert rep_q1.hermiticity_defect <= 1e-10

    def test_t3_sign_and_scale(self, rep_q0):
        # T3 = -pi^2 <G xi, xi> is negative definite on the diagonal
        diag = np.real(np.diagonal(rep_q0.t3[:, :, 0, 0]))
        assert (diag < 0).all()

    def test_q1_t1_positive(self, rep_q1):
        diag = np.real(np.diagonal(rep_q1.t1[:, :, 0, 0]))
        assert (diag > 0).all()

    def test_rescaled_family(self, rep_q0):
        spec = rescale_to_kill_H(FamilySpec.create(tau=1j, degree=2, twist=[np.pi],
                                                   rescale=[[0.3]], n_side=24))
        rep = verify_theorem(spec, eta=1e-2)
        assert np.abs(rep.t4).max() <= 1e-12
        assert rep.residual_rel <= 5e-3
        shift = rep_q0.lhs - rep.lhs
        expected = 0.3 * np.eye(2)
        defect = np.abs(shift[:, :, 0, 0] - expected).max() / 0.3
        assert defect <= 10 * 1e-2**2

    def test_degree0_raises_rank_jump(self):
        spec = FamilySpec.create(tau=1j, degree=0, twist=[np.pi], rescale=[[0.3]], n_side=16)
        with pytest.raises(RankJumpError):
            verify_theorem(spec, q=0, eta=1e-2)

    def test_m2_runs(self):
        spec = FamilySpec.create(tau=1j, degree=1, twist=[np.pi, 2.0],
                                 rescale=[[0.3, 0.05], [0.05, 0.2]], n_side=16)
        rep = verify_theorem(spec, eta=1e-2)
        assert rep.lhs.shape == (1, 1, 2, 2)
        assert rep.residual_rel <= 5e-3
        assert rep.hermiticity_defect <= 1e-9


class TestLemmaSuite:
    @pytest.mark.parametrize("degree", [2, -2])
    def test_passes(self, degree):
        spec = FamilySpec.create(tau=1j, degree=degree, twist=[np.pi], rescale=[[0.3]],
                                 n_side=24)
        rep = lemma_suite(spec, eta=1e-2)
        assert rep.passed
        tol = tol_fd(spec, 1e-2)
        for key, val in rep.residuals.items():
            if key == "endo_trace":
                assert val <= 1e-13
            else:
                assert val <= tol, key

    def test_eta_scaling(self):
        """s-dominated residuals shrink by >= 3x when eta halves."""
        spec = FamilySpec.create(tau=1j, degree=2, twist=[np.pi], rescale=[[0.3]], n_side=24)
        r1 = lemma_suite(spec, eta=1e-2)
        r2 = lemma_suite(spec, eta=5e-3)
        checked = 0
        for key, val in r1.residuals.items():
            if key == "endo_trace" or key in r1.trivial:
                continue
            if val >= 1e-6:    # above solver noise: s-stencil dominated
                assert r2.residuals[key] <= val / 3.0, key
                checked += 1
        assert checked >= 1


class TestSerre:
    def test_cross_check(self):
        spec = FamilySpec.create(tau=1j, degree=-1, twist=[np.pi], rescale=[[0.3]], n_side=24)
        out = serre_cross_check(spec, eta=1e-2)
        assert out["mismatch_rel"] <= 1e-2

    def test_phi_sign_flip_moves_t4(self):
        spec = FamilySpec.create(tau=1j, degree=-1, twist=[np.pi], rescale=[[0.3]], n_side=16)
        out = serre_cross_check(spec, eta=1e-2)
        t4_q1 = out["q1_report"].t4[0, 0, 0, 0]
        t4_q0 = out["q0_report"].t4[0, 0, 0, 0]
        assert t4_q1 == pytest.approx(0.3, abs=1e-10)
        assert t4_q0 == pytest.approx(-0.3, abs=1e-10)

    def test_trivial_twist_reduces_to_phi(self):
        spec = FamilySpec.create(tau=1j, degree=-1, twist=[0.0], rescale=[[0.3]], n_side=16)
        out = serre_cross_check(spec, eta=1e-2)
        assert np.abs(out["q1_report"].t1).max() <= 1e-12
        assert out["q1_report"].lhs[0, 0, 0, 0] == pytest.approx(0.3, abs=10 * 1e-2**2)

    def test_requires_unit_degree(self):
        spec = FamilySpec.create(tau=1j, degree=2, twist=[np.pi], rescale=[[0.3]], n_side=16)
        with pytest.raises(ValueError):
            serre_cross_check(spec)


class TestWpReport:
    def test_m2_gram(self):
        spec = FamilySpec.create(tau=1j, degree=2, twist=[np.pi, 2 * np.pi],
                                 rescale=[[0.3, 0], [0, 0.3]], n_side=16)
        rep = wp_report(spec, [(0.0, 0.0), (0.05, -0.02j)])
        expect = np.array([[np.pi**2, 2 * np.pi**2], [2 * np.pi**2, 4 * np.pi**2]])
        assert np.abs(rep["values"][0] - expect).max() <= 1e-9
        assert rep["constant"]
        # dependent twist vectors: PSD but singular
        assert rep["psd"]
        assert abs(np.linalg.det(rep["values"][0])) <= 1e-8

    def test_m1_definite_iff_twist_nonzero(self):
        spec = FamilySpec.create(tau=1j, degree=1, twist=[np.pi], rescale=[[0.0]], n_side=16)
        assert wp_report(spec, [(0.0,)])["min_eigenvalue"] > 0.1
        spec0 = FamilySpec.create(tau=1j, degree=1, twist=[0.0], rescale=[[0.0]], n_side=16)
        assert abs(wp_report(spec0, [(0.0,)])["min_eigenvalue"]) <= 1e-12

    def test_m2_rank_one_gram(self):
        # scalar twists of a line bundle are always linearly dependent: the
        # m = 2 WP Gram is a rank-one outer product, PSD and singular
        spec = FamilySpec.create(tau=1j, degree=1, twist=[np.pi, 2j],
                                 rescale=[[0, 0], [0, 0]], n_side=16)
        rep = wp_report(spec, [(0.0, 0.0)])
        assert rep["psd"]
        assert abs(np.linalg.det(rep["values"][0])) <= 1e-9


class TestConvergence:
    def test_small_study(self):
        spec = FamilySpec.create(tau=1j, degree=2, twist=[np.pi], rescale=[[0.3]], n_side=16)
        study = convergence_study(spec, n_list=(12, 16, 24), eta_list=(1e-2, 5e-3),
                                  green_tol=1e-12)
        assert len(study["rows"]) == 6
        # identity residual is eta-dominated: order ~2 in eta
        assert study["eta_order"] == pytest.approx(2.0, abs=0.4)
        # spatial value-error order near the stencil order
        orders = [v["order"] for v in study["spatial"].values()]
        assert max(orders) >= 3.0

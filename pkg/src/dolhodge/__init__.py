"""Discrete Dolbeault-Hodge laboratory on flat elliptic curves.

Verifies, term by term, the curvature identity for the L2 metric on direct
images of families of Hermite-Einstein line bundles: the left side is a
finite-difference Chern curvature of numerically built holomorphic frames,
the right side is assembled from Green operators, cup/cap products and
harmonic projections on the fibers.
"""

import os as _os

# BLAS pools must stay single threaded: concurrent workers would otherwise
# flip the library's internal reduction splits and break byte-identical
# reports across DOLHODGE_THREADS.  Set before numpy initializes.
for _var in ("OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "OMP_NUM_THREADS",
             "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
    _os.environ.setdefault(_var, "1")

__version__ = "0.1.0"

from .torus import TorusGrid, WrapRule, build_grid, diff_z, diff_zbar, integrate, lambda_contract
from .family import FamilySpec, CurvatureBlocks, curvature_blocks, kodaira_spencer, rho_klbar, \
    phi_klbar, rescale_to_kill_H, wp_inner, endo_trace_curvature
from .hodge import Section, Form01, EndSection, EndForm01, FiberContext, dbar, dbar_star, \
    laplacian, inner, harmonic_basis, green, cup, cap, endo_commutator_lambda
from .frames import SStencil, HoloFrame, GramField, holo_frame_q0, holo_frame_q1, gram, \
    chern_curvature_fd, harmonize_family, rank_constancy_check
from .curvature import CurvatureReport, theorem_terms, verify_theorem, lemma_suite, wp_report, \
    serre_cross_check, convergence_study
from .errors import ConfigError, RankJumpError, SolverError

__all__ = [
    "TorusGrid", "WrapRule", "build_grid", "diff_z", "diff_zbar", "integrate", "lambda_contract",
    "FamilySpec", "CurvatureBlocks", "curvature_blocks", "kodaira_spencer", "rho_klbar",
    "phi_klbar", "rescale_to_kill_H", "wp_inner", "endo_trace_curvature",
    "Section", "Form01", "EndSection", "EndForm01", "FiberContext", "dbar", "dbar_star",
    "laplacian", "inner", "harmonic_basis", "green", "cup", "cap", "endo_commutator_lambda",
    "SStencil", "HoloFrame", "GramField", "holo_frame_q0", "holo_frame_q1", "gram",
    "chern_curvature_fd", "harmonize_family", "rank_constancy_check",
    "CurvatureReport", "theorem_terms", "verify_theorem", "lemma_suite", "wp_report",
    "serre_cross_check", "convergence_study",
    "ConfigError", "RankJumpError", "SolverError",
]

from __future__ import annotations

import numpy as np
import pytest

from ductscatter.geometry import round_corners, step_duct
from ductscatter.imbedding import integrate_scattering
from ductscatter.oracles import direct_bvp_solve, mode_match_step, overlap_matrix
from ductscatter.profile import build_profile, uniform_profile
from ductscatter.scattering import ScatteringSet, SolveOptions
from ductscatter.stripmap import solve_strip_map


def test_overlap_against_quadrature():
    a, b = 1.0, 0.6
    y, w = np.polynomial.legendre.leggauss(200)
    y, w = 0.5 * b * (y + 1), 0.5 * b * w
    ref = np.array([[np.sum(w * np.sin(n * np.pi * y / a) * np.sin(m * np.pi * y / b))
                     for m in range(1, 5)] for n in range(1, 7)])
    np.testing.assert_allclose(overlap_matrix(a, b, 6, 4), ref, atol=1e-14)


def test_equal_widths_give_identity():
    S = mode_match_step(1.0, 1.0, 30.0, 8).S
    np.testing.assert_allclose(S.Tplus, np.eye(8), atol=1e-13)
    assert np.max(np.abs(S.Rplus)) < 1e-13


@pytest.mark.parametrize("k2", [30.0, 33.0, 36.0, 60.0])
def test_mode_matching_is_lossless_and_reciprocal(k2):
    S = mode_match_step(1.0, 0.6, k2, 16).S
    assert S.unitarity_defect() < 1e-12
    assert S.reciprocity_defect() < 1e-12


@pytest.mark.parametrize("k2", [30.0, 32.0, 34.0])
def test_mode_matching_self_convergence(k2):
    r16 = abs(mode_match_step(1.0, 0.6, k2, 16).S.Rplus[0, 0])
    r32 = abs(mode_match_step(1.0, 0.6, k2, 32).S.Rplus[0, 0])
    assert abs(r32 / r16 - 1) < 1e-3


def test_no_open_channels():
    S = mode_match_step(1.0, 0.6, 5.0, 8).S
    assert S.flux_matrix().size == 0 and S.flux_residual() == 0.0
    assert not S.open_left.any()


def test_mode_matching_rejects_widening():
    with pytest.raises(ValueError):
        mode_match_step(0.6, 1.0, 30.0, 4)


def test_direct_solve_flat_second_order():
    prof = uniform_profile(1.0, 1.0, 8)
    exact = ScatteringSet.flat(4, 30.0, 2.0)
    errs = [direct_bvp_solve(prof, 30.0, 4, (0.0, 2.0), points=J + 1, richardson=False).S
            .max_abs_difference(exact) for J in (200, 400)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    rich = direct_bvp_solve(prof, 30.0, 4, (0.0, 2.0)).S
    assert rich.max_abs_difference(exact) < 1e-6


def test_direct_solve_matches_imbedding(smooth_profile):
    S = integrate_scattering(smooth_profile, None, 30.0, 4, SolveOptions(rtol=1e-11, atol=1e-13), (-2.5, 2.5))
    ref = direct_bvp_solve(smooth_profile, 30.0, 4, (-2.5, 2.5), per_wavelength=80)
    assert ref.S.flux_residual() < 1e-6
    assert S.max_abs_difference(ref.S) < 1e-5


def test_direct_solve_approaches_mode_matching():
    # as the corner rounding shrinks the smooth solution tends to the sharp junction
    k2, N = 33.0, 8
    ref = mode_match_step(1.0, 0.6, k2, 32).S.transmission_probabilities()[0, 0]
    errs = []
    for eps in (0.1, 0.05, 0.02):
        prof = build_profile(solve_strip_map(round_corners(step_duct(1.0, 0.6), eps)), L=16)
        S = direct_bvp_solve(prof, k2, N, prof.extent, per_wavelength=80).S
        errs.append(abs(S.transmission_probabilities()[0, 0] - ref))
    assert errs[0] > errs[1] > errs[2]

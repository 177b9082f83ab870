from __future__ import annotations

import numpy as np
import pytest

from ductscatter.profile import (build_profile, cosine_coefficients, dump_mu_grid, load_mu_grid, mu_grid,
                                 profile_from_function, reconstruction_error, uniform_profile, v_quadrature)
from ductscatter.geometry import uniform_duct
from ductscatter.stripmap import solve_strip_map


def test_identity_map_profile():
    prof = build_profile(solve_strip_map(uniform_duct()), L=8)
    c = prof.coefficients(0.3)
    assert c[0] == 1.0 and np.all(c[1:] == 0)


def test_quadrature_integrates_cosines():
    for L in (8, 32, 128):
        vn, vw = v_quadrature(1.0, L)
        l = np.arange(L + 1)
        integ = np.cos(np.multiply.outer(vn, l) * np.pi) .T @ vw
        np.testing.assert_allclose(integ, np.r_[1.0, np.zeros(L)], atol=1e-13)


def test_cosine_coefficients_of_known_function():
    vn, vw = v_quadrature(2.0, 6)
    mu = 1.5 + 0.25 * np.cos(np.pi * vn / 2.0) - 0.1 * np.cos(3 * np.pi * vn / 2.0)
    np.testing.assert_allclose(cosine_coefficients(mu, vn, vw, 6, 2.0), [1.5, 0.25, 0, -0.1, 0, 0, 0], atol=1e-14)


def test_step_profile_asymptotes(step_profile):
    lo, hi = step_profile.extent
    np.testing.assert_allclose(step_profile.coefficients(lo - 5), np.r_[1.0, np.zeros(32)])
    np.testing.assert_allclose(step_profile.coefficients(hi + 5), np.r_[0.36, np.zeros(32)])
    # within the grid, the ends are flat to the profile tolerance
    assert np.max(np.abs(step_profile.coefficients(lo + 1e-9)[1:])) < 1e-7
    assert abs(step_profile.coefficients(hi - 1e-9)[0] - 0.36) < 1e-7


def test_reconstruction_improves_with_L(step_map):
    # mu is sharply peaked right at a rounded corner; test a short distance away
    u = np.r_[step_map.prevertex_u + 0.1, step_map.prevertex_u + 0.3, step_map.prevertex_u - 0.4]
    errs = [reconstruction_error(build_profile(step_map, L=L), step_map, u) for L in (16, 64)]
    assert errs[1] < errs[0] / 4
    assert errs[1] < 1e-3


def test_spline_matches_direct_coefficients(step_map, step_profile):
    vn, vw = v_quadrature(1.0, 32)
    for u in (-0.7, 0.05, 0.41, 1.3):
        direct = cosine_coefficients(step_map.mu(np.full_like(vn, u), vn), vn, vw, 32, 1.0)
        np.testing.assert_allclose(step_profile.coefficients(u), direct, atol=1e-4)


def test_restrict_keeps_values():
    prof = profile_from_function(lambda u, v: 1 + 0.1 * np.exp(-u**2) * np.cos(np.pi * v),
                                 np.linspace(-4, 4, 201), L=4)
    sub = prof.restrict(-1.0, 2.0)
    np.testing.assert_allclose(sub.coefficients(0.5), prof.coefficients(0.5))
    assert sub.mu_right == pytest.approx(prof.coefficients(2.0)[0])


def test_mu_grid_round_trip(tmp_path, step_map):
    u, v, vals = mu_grid(step_map, (-3.0, 3.0), nu=13, nv=5)
    path = tmp_path / "mu.txt"
    dump_mu_grid(path, u, v, vals, comment="test")
    u2, v2, vals2 = load_mu_grid(path)
    np.testing.assert_allclose(u2, u)
    np.testing.assert_allclose(v2, v)
    np.testing.assert_allclose(vals2, vals, rtol=1e-11)


def test_uniform_profile_flat():
    p = uniform_profile(0.5, 1.0, 4)
    assert p.is_flat and p.coefficients(100.0)[0] == 0.5

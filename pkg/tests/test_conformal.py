from __future__ import annotations

import json

import numpy as np
import pytest

from ductscatter.geometry import (DuctGeometry, GeometryError, corner_duct, geometry_from_dict,
                                  load_geometry, round_corners, s_bend, save_geometry, step_duct,
                                  uniform_duct)
from ductscatter.stripmap import SingularPointError, solve_strip_map


# ----------------------------------------------------------------------
# geometry
# ----------------------------------------------------------------------
def test_corner_exponents():
    g = step_duct(1.0, 0.6)
    (c1, c2) = g.corners()
    # convex corner (interior angle pi/2), then re-entrant corner (3 pi/2)
    assert c1.beta == pytest.approx(-0.5) and c2.beta == pytest.approx(0.5)
    assert g.width_left == 1.0 and g.width_right == pytest.approx(0.6)
    assert sum(c.beta for c in s_bend(1, 1, 1).corners()) == pytest.approx(0.0)


@pytest.mark.parametrize("bad", [
    dict(lower=(0j,), upper=(-1j,)),                                  # upper below lower
    dict(lower=(0j, 2 + 2j), upper=(1j, 1 + 1j)),                     # walls cross
    dict(lower=(0j, 1 + 0j, 0.5 + 0j), upper=(1j,)),                  # folds back
])
def test_invalid_geometries(bad):
    with pytest.raises(GeometryError):
        DuctGeometry(**bad)


def test_rounding_radius_must_fit():
    with pytest.raises(GeometryError):
        round_corners(s_bend(1.0, 1.0, 1.0), 0.8)
    assert round_corners(step_duct(), 0.05).is_rounded


def test_json_round_trip(tmp_path):
    g = round_corners(s_bend(1.0, 2.0, 3.0), 0.1)
    path = tmp_path / "g.json"
    save_geometry(g, path)
    assert load_geometry(path) == g
    d = json.loads(path.read_text())
    d["rounding"] = 0.1
    assert geometry_from_dict(d).lower_rounding == g.lower_rounding
    with pytest.raises(GeometryError):
        geometry_from_dict({"lower": "nope", "upper": []})


# ----------------------------------------------------------------------
# strip map
# ----------------------------------------------------------------------
def test_uniform_duct_is_identity():
    sm = solve_strip_map(uniform_duct(2.0))
    w = np.array([-3 + 0.5j, 0.1 + 1.2j, 7 + 1.9j])
    np.testing.assert_allclose(sm.derivative(w), 1.0)
    np.testing.assert_allclose(sm.mu(np.r_[0.0, 5.0], np.r_[0.3, 1.5]), 1.0)
    assert sm.map_point(0.3 + 1.0j) == pytest.approx(0.3 + 1.0j)


@pytest.mark.parametrize("geom", [step_duct(1.0, 0.6), s_bend(1.0, 1.0, 1.0), corner_duct(1.0),
                                  step_duct(2.0, 0.5)], ids=lambda g: g.name + str(g.width_left))
def test_sharp_maps_hit_their_corners(geom):
    sm = solve_strip_map(geom)
    assert sm.residual < 1e-10
    for pv in sm.prevertices:
        wall = "lower" if pv.sign > 0 else "upper"
        assert abs(sm.boundary_point(pv.x, wall) - pv.corner.point) < 1e-9
    assert sm.mu_left == pytest.approx(1.0)
    assert sm.mu_right == pytest.approx((geom.width_right / geom.width_left) ** 2, rel=1e-10)
    # the far right duct runs along the exit direction
    assert np.angle(sm.lam_right) == pytest.approx(geom.exit_angle, abs=1e-10)


def test_map_of_interior_points_stays_inside():
    g = s_bend(1.0, 1.0, 1.0)
    sm = solve_strip_map(g)
    for u in (-3.0, 0.2, 0.9, 1.8, 4.0):
        z = sm.map_point(u + 0.5j)
        # the S-bend interior is the region between y = h(x) and y = h(x) + 1
        h = np.clip(z.real, 0.0, 1.0)
        assert h < z.imag < h + 1.0


def test_sharp_prevertex_is_singular():
    sm = solve_strip_map(step_duct())
    pv = sm.prevertices[0]
    with pytest.raises(SingularPointError):
        sm.derivative(pv.x + 1j * sm.a)


def test_rounded_map_is_smooth_and_converges_to_sharp():
    sharp = solve_strip_map(step_duct(1.0, 0.6))
    prev = None
    for eps in (0.1, 0.05, 0.02):
        sm = solve_strip_map(round_corners(step_duct(1.0, 0.6), eps))
        assert sm.residual < 1e-10
        # bounded mu at the former corner
        u = np.linspace(sm.prevertex_u.min() - 0.2, sm.prevertex_u.max() + 0.2, 81)
        assert np.all(np.isfinite(sm.mu(u, np.full_like(u, 1.0))))
        far = sm.map_point(3.0 + 0.5j) - sharp.map_point(3.0 + 0.5j)
        if prev is not None:
            assert abs(far) < abs(prev)
        prev = far


def test_flat_extent_and_decay():
    sm = solve_strip_map(step_duct(1.0, 0.6))
    lo, hi = sm.flat_extent(1e-8)
    assert sm.sup_mu_deviation(lo - 0.5) < 1e-8 and sm.sup_mu_deviation(hi + 0.5) < 1e-8
    # deviations decay like exp(-pi |u| / a) away from the corners
    assert sm.decay_rate() == pytest.approx(np.pi, rel=0.05)

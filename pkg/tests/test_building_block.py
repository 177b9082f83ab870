from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ductscatter.building_block import (CompositionError, compose_all, partition_geometry, split_profile,
                                        star_compose)
from ductscatter.geometry import DuctGeometry, GeometryError, round_corners, s_bend
from ductscatter.profile import uniform_profile
from ductscatter.scattering import ScatteringSet


def _random_passive(rng, N, k2=30.0):
    mats = []
    for _ in range(4):
        M = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
        mats.append(0.45 * M / np.linalg.norm(M, 2))
    return ScatteringSet(*mats, k2)


def _random_lossless(rng, N, k2):
    """Raw operators whose flux-normalised S = U U^T is unitary and symmetric."""
    Z = rng.normal(size=(2 * N, 2 * N)) + 1j * rng.normal(size=(2 * N, 2 * N))
    U, _ = np.linalg.qr(Z)
    S = U @ U.T
    tmp = ScatteringSet.identity(N, k2)
    w = np.sqrt(tmp.alpha_left.real)
    raw = lambda B: B / w[:, None] * w[None, :]
    return ScatteringSet(raw(S[N:, :N]), raw(S[:N, :N]), raw(S[N:, N:]), raw(S[:N, N:]), k2)


def test_identity_is_neutral():
    A = _random_passive(np.random.default_rng(0), 3)
    I = ScatteringSet.identity(3, 30.0)
    assert star_compose(A, I).max_abs_difference(A) < 1e-15
    assert star_compose(I, A).max_abs_difference(A) < 1e-15


def test_flat_segments_add():
    A = ScatteringSet.flat(4, 30.0, 0.7)
    B = ScatteringSet.flat(4, 30.0, 1.1, start=0.7)
    C = star_compose(A, B)
    assert C.max_abs_difference(ScatteringSet.flat(4, 30.0, 1.8)) < 1e-14
    assert C.interval == (0.0, 1.8)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_associativity(N, seed):
    rng = np.random.default_rng(seed)
    A, B, C = (_random_passive(rng, N) for _ in range(3))
    left = star_compose(star_compose(A, B), C)
    right = star_compose(A, star_compose(B, C))
    assert left.max_abs_difference(right) < 1e-10


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_lossless_stays_lossless(N, seed):
    rng = np.random.default_rng(seed)
    k2 = (N * np.pi) ** 2 + 5.0          # every mode propagates
    A, B = _random_lossless(rng, N, k2), _random_lossless(rng, N, k2)
    assert A.unitarity_defect() < 1e-12
    C = star_compose(A, B)
    assert C.unitarity_defect() < 1e-9
    assert C.meta["interface_cond"][0] >= 1.0


def test_incompatible_interfaces():
    A = ScatteringSet.identity(3, 30.0)
    with pytest.raises(CompositionError):
        star_compose(A, ScatteringSet.identity(2, 30.0))
    with pytest.raises(CompositionError):
        star_compose(A, ScatteringSet.identity(3, 31.0))
    with pytest.raises(CompositionError):
        star_compose(A, ScatteringSet.identity(3, 30.0, mu=0.5))
    with pytest.raises(CompositionError):
        compose_all([])


def test_singular_interface():
    N = 2
    I, Z = np.eye(N), np.zeros((N, N))
    A = ScatteringSet(Z, Z, I, Z, 30.0)       # fully reflecting to the right
    B = ScatteringSet(Z, I, Z, Z, 30.0)       # fully reflecting to the left
    with pytest.raises(CompositionError):
        star_compose(A, B)


def test_partition_without_cuts():
    g = s_bend(1.0, 6.0, 12.0)
    plan = partition_geometry(g, [])
    assert len(plan) == 1 and plan.pieces[0].geometry == g


def test_partition_sbend_middle():
    g = round_corners(s_bend(1.0, 6.0, 12.0), 0.05)
    plan = partition_geometry(g, [6.0 + 3.0j])
    assert len(plan) == 2
    (itf,) = plan.interfaces
    theta = np.arctan2(6.0, 12.0)
    assert itf.width == pytest.approx(np.cos(theta))
    assert itf.mu == pytest.approx(np.cos(theta) ** 2)
    A, B = (p.geometry for p in plan.pieces)
    assert A.width_right == pytest.approx(itf.width) and B.width_left == pytest.approx(itf.width)
    assert B.exit_angle == pytest.approx(-theta)
    assert len(A.corners()) == 2 and len(B.corners()) == 2


def test_partition_rejects_bad_cuts():
    taper = DuctGeometry(lower=(0j, 4 + 0j), upper=(1j, 4 + 0.6j))
    with pytest.raises(GeometryError):
        partition_geometry(taper, [2.0 + 0j])
    with pytest.raises(GeometryError):
        partition_geometry(s_bend(1.0, 6.0, 12.0), [0.5 + 0.5j])       # not on the wall
    with pytest.raises(GeometryError):
        partition_geometry(s_bend(1.0, 6.0, 12.0), [1.0 + 0.5j], min_clearance=3.0)


def test_split_profile_requires_flat_cut(step_profile):
    with pytest.raises(CompositionError):
        split_profile(step_profile, step_profile.meta["features"][0] + 0.05)
    lo, hi = step_profile.extent
    with pytest.raises(CompositionError):
        split_profile(step_profile, hi + 1.0)
    A, B = split_profile(uniform_profile(1.0).restrict(-1.0, 1.0), 0.0)
    assert A.mu_right == B.mu_left == 1.0

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ductscatter.coupled_mode import (SingularSplitterError, SplitterConfig, assemble_B2, d_Cinv_du,
                                      multiplication_matrix, quadrature_B2, reconstruction_residual,
                                      split_blocks, splitter_C)
from ductscatter.modal_basis import DispersionSpec, axial_wavenumbers
from ductscatter.profile import uniform_profile


def _mu_of_v(c, a):
    l = np.arange(len(c))
    return lambda v: np.cos(np.multiply.outer(v, l) * np.pi / a) @ c


def test_single_harmonic_coupling():
    # mu = 1 + 0.1 cos(pi v): M_12 = c_1 / 2 - c_3 / 2 = 0.05
    M = multiplication_matrix([1.0, 0.1, 0.0, 0.0, 0.0], 2)
    np.testing.assert_allclose(M, [[1.0, 0.05], [0.05, 1.0]], atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 10), st.floats(0.5, 2.0), st.floats(1.0, 80.0), st.integers(0, 2**31 - 1))
def test_B2_matches_quadrature(N, a, k2, seed):
    c = np.random.default_rng(seed).normal(scale=0.3, size=2 * N + 1)
    c[0] += 1.0
    B2 = k2 * multiplication_matrix(c, N) - np.diag((np.arange(1, N + 1) * np.pi / a) ** 2)
    ref = quadrature_B2(_mu_of_v(c, a), k2, N, a)
    np.testing.assert_allclose(B2, ref.real, atol=1e-10 * max(1.0, k2))
    np.testing.assert_allclose(B2, B2.T)


def test_needs_coefficients_up_to_2N():
    with pytest.raises(ValueError):
        multiplication_matrix(np.ones(8), 4)


def test_constant_mu_gives_diagonal_B2():
    prof = uniform_profile(0.36, 1.0, 16)
    B2 = assemble_B2(prof, 0.0, 40.0, 6)
    np.testing.assert_allclose(np.diag(B2), axial_wavenumbers(6, DispersionSpec(40.0, 0.36)) ** 2)
    assert np.max(np.abs(B2 - np.diag(np.diag(B2)))) == 0


def test_splitter_limits():
    s = SplitterConfig(scale=0.5, centre=1.0)
    assert s.f(-20.0) == pytest.approx(0.0, abs=1e-15)
    assert s.f(20.0) == pytest.approx(1.0)
    lo, hi = s.settled(1e-8)
    assert s.f(lo) < 1.01e-8 and 1 - s.f(hi) < 1.01e-8
    h = 1e-6
    assert s.fprime(0.7) == pytest.approx((s.f(0.7 + h) - s.f(0.7 - h)) / (2 * h), rel=1e-7)
    with pytest.raises(ValueError):
        SplitterConfig(scale=0.0)


def test_splitter_interpolates_B():
    bm = axial_wavenumbers(4, DispersionSpec(30.0, 1.0))
    bp = axial_wavenumbers(4, DispersionSpec(30.0, 0.36))
    s = SplitterConfig(0.5, 0.0)
    np.testing.assert_allclose(np.diag(splitter_C(s, -50.0, bm, bp)), bm)
    np.testing.assert_allclose(np.diag(splitter_C(s, 50.0, bm, bp)), bp)
    u, h = 0.3, 1e-6
    num = (np.diag(np.linalg.inv(splitter_C(s, u + h, bm, bp)))
           - np.diag(np.linalg.inv(splitter_C(s, u - h, bm, bp)))) / (2 * h)
    np.testing.assert_allclose(np.diag(d_Cinv_du(s, u, bm, bp)), num, rtol=1e-6)


def test_cutoff_makes_splitter_singular():
    b = axial_wavenumbers(3, DispersionSpec(4 * np.pi**2))
    with pytest.raises(SingularSplitterError):
        splitter_C(SplitterConfig(), 0.0, b, b)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 8), st.floats(-3, 3), st.integers(0, 2**31 - 1))
def test_split_system_reconstructs_second_order_equation(N, u, seed):
    rng = np.random.default_rng(seed)
    c = rng.normal(scale=0.2, size=2 * N + 1)
    c[0] += 1.0
    k2 = 35.0
    B2 = (k2 * multiplication_matrix(c, N) - np.diag((np.arange(1, N + 1) * np.pi) ** 2)).astype(complex)
    bm = axial_wavenumbers(N, DispersionSpec(k2 + 0.37, 1.0))
    bp = axial_wavenumbers(N, DispersionSpec(k2 + 0.37, 0.5))
    s = SplitterConfig(0.5, 0.0)
    C = splitter_C(s, u, bm, bp)
    assert reconstruction_residual(B2, C, d_Cinv_du(s, u, bm, bp)) < 1e-10


def test_batched_blocks_match_single():
    rng = np.random.default_rng(3)
    N, K = 4, 3
    B2 = rng.normal(size=(K, N, N)) + 0j
    c = rng.uniform(1, 2, size=(K, N)) + 0j
    d = rng.normal(size=(K, N)) + 0j
    batch = split_blocks(B2, c, d)
    for k in range(K):
        single = split_blocks(B2[k], np.diag(c[k]), np.diag(d[k]))
        for x, y in zip(batch, single):
            np.testing.assert_allclose(x[k], y)

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ductscatter.modal_basis import (DispersionSpec, ModeCoefficients, apply_B_const, axial_wavenumber,
                                     axial_wavenumbers, cutoff_modes, decompose, ds_norm, propagating,
                                     sample_points, synthesize)


def test_unit_mode_decomposes_to_basis_vector():
    v = sample_points(64, 1.0)
    c = decompose(np.sin(np.pi * v), 8).coeffs
    np.testing.assert_allclose(c, np.eye(8)[0], atol=1e-14)


def test_parabola_series():
    # v (a - v) = sum over odd n of 8 a^2 / (n pi)^3 sin(n pi v / a)
    a, M, N = 2.0, 4095, 9
    v = sample_points(M, a)
    c = decompose(v * (a - v), N, a).coeffs.real
    n = np.arange(1, N + 1)
    exact = np.where(n % 2 == 1, 8 * a**2 / (n * np.pi) ** 3, 0.0)
    np.testing.assert_allclose(c, exact, atol=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 24), st.integers(0, 40), st.floats(0.3, 3.0), st.integers(0, 2**31 - 1))
def test_round_trip_band_limited(N, extra, a, seed):
    rng = np.random.default_rng(seed)
    f = ModeCoefficients(rng.normal(size=N) + 1j * rng.normal(size=N), a)
    v = sample_points(N + extra, a)
    back = decompose(synthesize(f, v), N, a)
    assert np.max(np.abs(back.coeffs - f.coeffs)) < 1e-12 * max(1.0, np.max(np.abs(f.coeffs)))


def test_decompose_needs_enough_samples():
    with pytest.raises(ValueError):
        decompose(np.zeros(3), 4)


@settings(max_examples=60, deadline=None)
@given(st.floats(-50, 200), st.floats(0.1, 3.0), st.floats(0.3, 2.0), st.integers(1, 12))
def test_axial_wavenumber_branch(k2, mu, a, n):
    spec = DispersionSpec(k2, mu, a)
    alpha = axial_wavenumber(n, spec)
    assert alpha.imag >= 0 and alpha.real >= 0
    assert alpha.real * alpha.imag == 0
    np.testing.assert_allclose(alpha**2, k2 * mu - (n * np.pi / a) ** 2, atol=1e-9 * (1 + abs(k2) * mu + (n * np.pi / a) ** 2))


def test_cutoff_returns_zero_and_is_flagged():
    spec = DispersionSpec(4 * np.pi**2, 1.0, 1.0)
    assert axial_wavenumber(2, spec) == 0
    assert cutoff_modes(3, spec) == [2]
    np.testing.assert_array_equal(propagating(3, spec), [True, False, False])


def test_evanescent_root_is_positive_imaginary():
    alpha = axial_wavenumbers(3, DispersionSpec(1.0, 1.0, 1.0))
    assert np.all(alpha.real == 0) and np.all(alpha.imag > 0)


def test_apply_B_const_is_diagonal():
    spec = DispersionSpec(30.0, 1.0, 1.0)
    f = ModeCoefficients(np.ones(4))
    np.testing.assert_allclose(apply_B_const(f, spec).coeffs, axial_wavenumbers(4, spec))
    with pytest.raises(ValueError):
        apply_B_const(ModeCoefficients(np.ones(4), 2.0), spec)


def test_ds_norm():
    f = ModeCoefficients([1.0, 0.0, 2.0])
    assert ds_norm(f, 0.0) == pytest.approx(np.sqrt(5.0))
    assert ds_norm(f, 1.0) == pytest.approx(np.sqrt(2.0 + 4.0 * 10.0))


def test_invalid_specs():
    with pytest.raises(ValueError):
        DispersionSpec(1.0, -1.0, 1.0)
    with pytest.raises(ValueError):
        DispersionSpec(1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        axial_wavenumber(0, DispersionSpec(1.0))

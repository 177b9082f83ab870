from __future__ import annotations

import numpy as np
import pytest

from ductscatter.coupled_mode import SingularSplitterError, SplitterConfig
from ductscatter.imbedding import (BoundStateError, illposedness_demo, integrate_scattering,
                                   integrate_sweep, solve_interval)
from ductscatter.profile import profile_from_coefficients, uniform_profile
from ductscatter.scattering import ScatteringSet, SolveOptions, flat_propagate

from conftest import bump

TIGHT = SolveOptions(rtol=1e-11, atol=1e-13)


def test_flat_interval_is_pure_propagation():
    prof = uniform_profile(0.36, 1.0, 12)
    S = integrate_scattering(prof, None, 60.0, 6, TIGHT, interval=(-1.0, 0.5))
    ref = ScatteringSet.flat(6, 60.0, 1.5, mu=0.36)
    assert S.max_abs_difference(ref) < 1e-9


def test_zero_length_interval_is_identity():
    S = integrate_scattering(uniform_profile(1.0, 1.0, 4), None, 12.0, 2)
    assert S.max_abs_difference(ScatteringSet.identity(2, 12.0)) == 0


def test_reciprocity_and_unitarity(step_profile):
    for k2 in (20.0, 33.0, 50.0):
        S = integrate_scattering(step_profile, None, k2, 8)
        assert S.unitarity_defect() < 1e-7
        assert S.reciprocity_defect() < 1e-7


def test_batch_matches_single(step_profile):
    k2s = [12.0, 30.0, 45.0]
    batch = integrate_sweep(step_profile, None, k2s, 4, TIGHT)
    for k2, S in zip(k2s, batch):
        single = integrate_scattering(step_profile, None, k2, 4, TIGHT)
        assert S.max_abs_difference(single) < 1e-8


def test_splitter_choice_does_not_change_physics(step_profile):
    # any admissible splitter gives the same operators at flat reference planes
    s1, s2 = SplitterConfig(0.5, 0.2), SplitterConfig(1.0, -0.5)
    i1, i2 = solve_interval(step_profile, s1, 1e-10), solve_interval(step_profile, s2, 1e-10)
    ivl = (min(i1[0], i2[0]), max(i1[1], i2[1]))
    a = integrate_scattering(step_profile, s1, 33.0, 4, TIGHT, ivl)
    b = integrate_scattering(step_profile, s2, 33.0, 4, TIGHT, ivl)
    assert a.max_abs_difference(b) < 1e-8


def test_interval_covers_splitter():
    prof = profile_from_coefficients(lambda u: [1.0 - 0.5 * (u > 0)], np.linspace(-1, 1, 5), L=4)
    lo, hi = solve_interval(prof, SplitterConfig(0.5, 0.0), 1e-8)
    assert lo <= -4.0 and hi >= 4.0


def test_cutoff_energy_is_reported():
    prof = uniform_profile(1.0, 1.0, 8)
    out = integrate_sweep(prof, None, [np.pi**2, 20.0], 2, interval=(0.0, 1.0))
    assert isinstance(out[0], SingularSplitterError)
    assert isinstance(out[1], ScatteringSet)
    with pytest.raises(SingularSplitterError):
        integrate_scattering(prof, None, 4 * np.pi**2, 3, interval=(0.0, 1.0))


def test_bound_state_blowup_is_detected():
    # a deep well below the first cutoff: the Riccati solution develops a pole
    prof = profile_from_coefficients(lambda u: [1.0 + bump(u)], np.linspace(-2.5, 2.5, 501), L=4)
    out = integrate_sweep(prof, None, [3.0, 7.0], 2, interval=(-2.5, 2.5))
    assert isinstance(out[0], ScatteringSet)
    assert isinstance(out[1], BoundStateError)
    assert abs(out[1].u) < 2.5 and out[1].norm >= 1e3


def test_profile_too_short_for_N():
    with pytest.raises(ValueError):
        integrate_sweep(uniform_profile(1.0, 1.0, 4), None, [20.0], 3, interval=(0.0, 1.0))


def test_flat_propagate_matches_flat_segment():
    S = ScatteringSet.identity(4, 30.0)
    np.testing.assert_allclose(flat_propagate(S, 0.4, 0.6).Tplus, ScatteringSet.flat(4, 30.0, 1.0).Tplus)


def test_illposedness_growth():
    rep = illposedness_demo(N=3, k2=30.0, L=1.0)
    assert rep.mode == 3
    assert rep.relative_error < 1e-6
    # propagating modes keep unit modulus
    np.testing.assert_allclose(rep.per_mode[:1], 1.0, rtol=1e-8)
    assert illposedness_demo(N=1, k2=30.0, L=1.0).mode is None


def test_options_validation():
    with pytest.raises(ValueError):
        SolveOptions(rtol=0.0)

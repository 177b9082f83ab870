"""Transverse sine basis of the straight strip 0 < v < a.

Fields are expanded as ``f(v) = sum_n f_n sin(n pi v / a)`` for ``n = 1..N``
with the plain (non-normalised) sine functions, so ``<phi_n, phi_n> = a/2``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft

#: relative size below which a radicand k^2 mu - n^2 pi^2 / a^2 counts as a cutoff
CUTOFF_RTOL = 1e-12


@dataclass(frozen=True)
class ModeCoefficients:
    """Coefficient vector of a field slice in the sine basis (index 0 is n = 1)."""

    coeffs: np.ndarray
    width_a: float = 1.0

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=complex))
        if c.ndim != 1 or c.size < 1:
            raise ValueError("coefficient vector must be one-dimensional and non-empty")
        if not self.width_a > 0:
            raise ValueError(f"width_a must be positive, got {self.width_a}")
        object.__setattr__(self, "coeffs", c)

    @property
    def N(self) -> int:
        return self.coeffs.size

    @classmethod
    def unit(cls, n: int, N: int, width_a: float = 1.0) -> "ModeCoefficients":
        c = np.zeros(N, dtype=complex)
        c[n - 1] = 1.0
        return cls(c, width_a)


@dataclass(frozen=True)
class DispersionSpec:
    """Energy ``k2``, asymptotic metric constant ``mu_const`` and strip width."""

    k2: float
    mu_const: float = 1.0
    width_a: float = 1.0

    def __post_init__(self):
        if not np.isreal(self.k2):
            raise ValueError("k2 must be real")
        if not self.mu_const > 0:
            raise ValueError(f"mu_const must be positive, got {self.mu_const}")
        if not self.width_a > 0:
            raise ValueError(f"width_a must be positive, got {self.width_a}")


def radicand(n, spec: DispersionSpec):
    n = np.asarray(n, dtype=float)
    return spec.k2 * spec.mu_const - (n * np.pi / spec.width_a) ** 2


def axial_wavenumber(n, spec: DispersionSpec):
    """sqrt(k^2 mu - n^2 pi^2 / a^2) on the branch Im >= 0.

    Accepts a scalar or an array of mode indices. A radicand that vanishes to
    within ``CUTOFF_RTOL`` returns exactly 0.
    """
    if np.any(np.asarray(n) < 1):
        raise ValueError("mode index must be >= 1")
    r = radicand(n, spec)
    scale = np.maximum(abs(spec.k2 * spec.mu_const), (np.asarray(n, float) * np.pi / spec.width_a) ** 2)
    r = np.where(np.abs(r) <= CUTOFF_RTOL * scale, 0.0, r)
    # real positive radicand -> positive root, negative -> i*sqrt(|r|)
    alpha = np.where(r >= 0, np.sqrt(np.abs(r)) + 0j, 1j * np.sqrt(np.abs(r)))
    return alpha[()] if alpha.ndim == 0 else alpha


def axial_wavenumbers(N: int, spec: DispersionSpec) -> np.ndarray:
    return axial_wavenumber(np.arange(1, N + 1), spec)


def cutoff_modes(N: int, spec: DispersionSpec) -> list[int]:
    """Mode indices whose axial wavenumber is exactly at cutoff (alpha_n == 0)."""
    alpha = axial_wavenumbers(N, spec)
    return [int(i) + 1 for i in np.flatnonzero(alpha == 0)]


def propagating(N: int, spec: DispersionSpec) -> np.ndarray:
    """Boolean mask of modes with a real, nonzero axial wavenumber."""
    alpha = axial_wavenumbers(N, spec)
    return (alpha.imag == 0) & (alpha.real > 0)


def apply_B_const(f: ModeCoefficients, spec: DispersionSpec) -> ModeCoefficients:
    if not np.isclose(f.width_a, spec.width_a):
        raise ValueError("basis width does not match dispersion width")
    return ModeCoefficients(f.coeffs * axial_wavenumbers(f.N, spec), f.width_a)


def B_const_matrix(N: int, spec: DispersionSpec) -> np.ndarray:
    """Diagonal matrix of the constant-coefficient operator B in the sine basis."""
    return np.diag(axial_wavenumbers(N, spec))


def ds_norm(f: ModeCoefficients, s: float) -> float:
    n = np.arange(1, f.N + 1, dtype=float)
    return float(np.sqrt(np.sum(np.abs(f.coeffs) ** 2 * (1.0 + n**2) ** s)))


def sample_points(M: int, width_a: float = 1.0) -> np.ndarray:
    """Equispaced interior grid v_j = j a / (M + 1), j = 1..M."""
    return width_a * np.arange(1, M + 1) / (M + 1)


def decompose(samples, N: int, width_a: float = 1.0) -> ModeCoefficients:
    """Sine coefficients of ``samples`` taken on :func:`sample_points`.

    Uses the type-I discrete sine transform; exact for band-limited input with
    ``N <= len(samples)``.
    """
    x = np.asarray(samples)
    M = x.size
    if M < N:
        raise ValueError(f"grid of {M} samples cannot resolve {N} modes")
    if np.iscomplexobj(x):
        c = fft.dst(x.real, type=1) + 1j * fft.dst(x.imag, type=1)
    else:
        c = fft.dst(x, type=1)
    return ModeCoefficients(c[:N] / (M + 1), width_a)


def synthesize(f: ModeCoefficients, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.arange(1, f.N + 1)
    basis = np.sin(np.multiply.outer(v, n) * np.pi / f.width_a)
    return basis @ f.coeffs

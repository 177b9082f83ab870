"""Truncated operator matrices of the transformed problem.

In the sine basis the transformed equation becomes ``phi'' + B2(u) phi = 0``
with ``B2 = k^2 M(u) - diag(n^2 pi^2 / a^2)`` and ``M`` the projection of the
multiplication operator by ``mu(u, .)``. Splitting ``phi = phi+ + phi-`` with
``phi' = i C (phi+ - phi-)`` turns it into the first-order system

    d/du [phi+; phi-] = [[alpha, beta], [gamma, delta]] [phi+; phi-].

Operator matrices are plain complex ``numpy`` arrays of shape (N, N).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .modal_basis import DispersionSpec, axial_wavenumbers
from .profile import RefractiveProfile

#: truncated operator in the sine basis, complex (N, N)
OperatorMatrix = np.ndarray


class SingularSplitterError(ValueError):
    """The splitting operator C has a zero diagonal entry (cutoff energy)."""


# ----------------------------------------------------------------------
# B^2(u)
# ----------------------------------------------------------------------
@lru_cache(maxsize=64)
def _projection_indices(N: int):
    n = np.arange(1, N + 1)
    diff = np.abs(n[:, None] - n[None, :])
    summ = n[:, None] + n[None, :]
    return diff, summ, np.eye(N, dtype=bool)


def multiplication_matrix(mu_coeffs, N: int) -> np.ndarray:
    """M_nm = <phi_n, mu phi_m> / <phi_n, phi_n> from cosine coefficients of mu.

    With sin(n x) sin(m x) = [cos((n - m) x) - cos((n + m) x)] / 2 this is
    ``mu_0 delta_nm + mu_|n-m| (1 - delta_nm) / 2 - mu_(n+m) / 2``.
    """
    c = np.asarray(mu_coeffs)
    if c.size < 2 * N + 1:
        raise ValueError(f"N = {N} needs cosine coefficients up to l = {2 * N}, "
                         f"profile has L = {c.size - 1}")
    diff, summ, eye = _projection_indices(N)
    M = 0.5 * c[diff] - 0.5 * c[summ]
    M[eye] = c[0] - 0.5 * c[summ[eye]]
    return M


def wall_term(N: int, width_a: float) -> np.ndarray:
    return (np.arange(1, N + 1) * np.pi / width_a) ** 2


def assemble_B2(profile: RefractiveProfile, u: float, k2: float, N: int) -> OperatorMatrix:
    """Galerkin matrix of d^2/dv^2 + k^2 mu(u, .) on sin(n pi v / a), n = 1..N."""
    M = multiplication_matrix(profile.coefficients(u), N)
    B2 = k2 * M
    B2[np.diag_indices(N)] -= wall_term(N, profile.width_a)
    return B2.astype(complex)


def quadrature_B2(mu_of_v, k2: float, N: int, width_a: float = 1.0, nodes: int = 400) -> np.ndarray:
    """Reference B^2 from Gauss-Legendre quadrature of the defining inner products."""
    y, w = np.polynomial.legendre.leggauss(nodes)
    v = 0.5 * width_a * (y + 1.0)
    w = 0.5 * width_a * w
    phi = np.sin(np.outer(v, np.arange(1, N + 1)) * np.pi / width_a)
    M = (phi * (w * mu_of_v(v))[:, None]).T @ phi * (2.0 / width_a)
    return (k2 * M - np.diag(wall_term(N, width_a))).astype(complex)


# ----------------------------------------------------------------------
# splitting operator
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class SplitterConfig:
    """Transition f(u) = (1 + tanh((u - centre) / scale)) / 2 between B- and B+."""

    scale: float = 0.5
    centre: float = 0.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"splitter scale must be positive, got {self.scale}")

    def f(self, u):
        return 0.5 * (1.0 + np.tanh((np.asarray(u, dtype=float) - self.centre) / self.scale))

    def fprime(self, u):
        x = (np.asarray(u, dtype=float) - self.centre) / self.scale
        return 0.5 / (self.scale * np.cosh(x) ** 2)

    def settled(self, tol: float) -> tuple[float, float]:
        """(u_lo, u_hi) outside of which f is within ``tol`` of 0 or 1."""
        # 1 - f ~ exp(-2 x) for large x
        half = 0.5 * self.scale * np.log(1.0 / tol)
        return self.centre - half, self.centre + half


def constant_B(N: int, k2: float, mu: float, width_a: float) -> np.ndarray:
    """Diagonal of B- or B+ (axial wavenumbers in a flat region)."""
    return axial_wavenumbers(N, DispersionSpec(k2, mu, width_a))


def _diag(x) -> np.ndarray:
    x = np.asarray(x)
    return np.diag(x) if x.ndim == 2 else x


def _check(c):
    if np.any(c == 0):
        n = int(np.flatnonzero(c == 0)[0]) + 1
        raise SingularSplitterError(f"splitting operator is singular (mode {n} at cutoff)")


def splitter_C(config: SplitterConfig, u: float, B_minus, B_plus) -> OperatorMatrix:
    """C(u) = B- + f(u) (B+ - B-); accepts the B's as matrices or diagonals."""
    bm, bp = _diag(B_minus), _diag(B_plus)
    c = bm + config.f(u) * (bp - bm)
    _check(c)
    return np.diag(c)


def d_Cinv_du(config: SplitterConfig, u: float, B_minus, B_plus) -> OperatorMatrix:
    """Analytic derivative of C(u)^-1, i.e. -C^-1 f'(u) (B+ - B-) C^-1."""
    bm, bp = _diag(B_minus), _diag(B_plus)
    c = bm + config.f(u) * (bp - bm)
    _check(c)
    return np.diag(-config.fprime(u) * (bp - bm) / c**2)


# ----------------------------------------------------------------------
# split system
# ----------------------------------------------------------------------
def split_blocks(B2: OperatorMatrix, C: OperatorMatrix, dCinv_du: OperatorMatrix):
    """(alpha, beta, gamma, delta) of the split first-order system.

    ``C`` and ``dCinv_du`` may be diagonal matrices or their diagonals. A
    leading batch axis is allowed when diagonals are passed: B2 of shape
    (K, N, N) with C and dCinv_du of shape (K, N).
    """
    B2 = np.asarray(B2)
    if B2.ndim == 2:
        c, dci = _diag(C), _diag(dCinv_du)
    else:
        c, dci = np.asarray(C), np.asarray(dCinv_du)
    _check(c)
    D = dci * c                             # (C^-1)' C
    X = 1j * B2 / c[..., :, None]           # i C^-1 B^2
    i = np.arange(c.shape[-1])
    alpha = 0.5 * X
    beta = 0.5 * X
    gamma = -0.5 * X
    delta = -0.5 * X
    alpha[..., i, i] += 0.5 * (D + 1j * c)
    beta[..., i, i] += 0.5 * (-D - 1j * c)
    gamma[..., i, i] += 0.5 * (-D + 1j * c)
    delta[..., i, i] += 0.5 * (D - 1j * c)
    return alpha, beta, gamma, delta


def reconstruct_first_order(alpha, beta, gamma, delta, C, dCinv_du) -> np.ndarray:
    """Undo the splitting: system matrix for (phi, phi') from the four blocks.

    With ``T = [[I, I], [iC, -iC]]`` mapping (phi+, phi-) to (phi, phi') the
    original matrix is ``(T S + T') T^-1``; it should equal [[0, I], [-B2, 0]].
    """
    c = _diag(C)
    N = c.size
    I = np.eye(N)
    dc = -(c**2) * _diag(dCinv_du)          # C' = -C (C^-1)' C
    T = np.block([[I, I], [1j * np.diag(c), -1j * np.diag(c)]])
    dT = np.block([[0 * I, 0 * I], [1j * np.diag(dc), -1j * np.diag(dc)]])
    S = np.block([[alpha, beta], [gamma, delta]])
    return (T @ S + dT) @ np.linalg.inv(T)


def reconstruction_residual(B2, C, dCinv_du) -> float:
    """max-norm distance between the reconstructed system and [[0, I], [-B2, 0]]."""
    blocks = split_blocks(B2, C, dCinv_du)
    A = reconstruct_first_order(*blocks, C, dCinv_du)
    N = B2.shape[0]
    ref = np.block([[np.zeros((N, N)), np.eye(N)], [-B2, np.zeros((N, N))]])
    return float(np.max(np.abs(A - ref)) / max(1.0, np.max(np.abs(B2))))

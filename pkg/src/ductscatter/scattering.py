"""Scattering sets {T+, R+, R-, T-} and their physical diagnostics.

Amplitudes are sine-mode coefficients of right-going (+) and left-going (-)
waves referenced at the ends u1 (left) and u2 (right) of an interval:

* a wave incident from the left with amplitudes ``A`` at u1 produces
  ``R+ A`` going left at u1 and ``T+ A`` going right at u2;
* a wave incident from the right with amplitudes ``A`` at u2 produces
  ``R- A`` going right at u2 and ``T- A`` going left at u1.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .modal_basis import DispersionSpec, axial_wavenumbers


@dataclass(frozen=True)
class SolveOptions:
    """Integrator and safety settings of the imbedding solver."""

    rtol: float = 1e-9
    atol: float = 1e-12
    max_step: float = np.inf
    flat_tol: float = 1e-8
    blowup: float = 1e3
    method: str = "DOP853"

    def __post_init__(self):
        for name in ("rtol", "atol", "max_step", "flat_tol", "blowup"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class ScatteringSet:
    Tplus: np.ndarray
    Rplus: np.ndarray
    Rminus: np.ndarray
    Tminus: np.ndarray
    k2: float
    mu_left: float = 1.0
    mu_right: float = 1.0
    interval: tuple = (0.0, 0.0)
    width_a: float = 1.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        mats = [np.asarray(getattr(self, n), dtype=complex)
                for n in ("Tplus", "Rplus", "Rminus", "Tminus")]
        N = mats[0].shape[0]
        for m in mats:
            if m.shape != (N, N):
                raise ValueError("scattering operators must all be N x N")
        for n, m in zip(("Tplus", "Rplus", "Rminus", "Tminus"), mats):
            object.__setattr__(self, n, m)

    # -- constructors --------------------------------------------------
    @classmethod
    def identity(cls, N, k2, mu=1.0, width_a=1.0, u=0.0) -> "ScatteringSet":
        I, Z = np.eye(N, dtype=complex), np.zeros((N, N), dtype=complex)
        return cls(I, Z, Z.copy(), I.copy(), k2, mu, mu, (u, u), width_a)

    @classmethod
    def flat(cls, N, k2, length, mu=1.0, width_a=1.0, start=0.0) -> "ScatteringSet":
        """Straight section of the given length: pure phase/decay factors."""
        alpha = axial_wavenumbers(N, DispersionSpec(k2, mu, width_a))
        P = np.diag(np.exp(1j * alpha * length))
        Z = np.zeros((N, N), dtype=complex)
        return cls(P, Z, Z.copy(), P.copy(), k2, mu, mu, (start, start + length), width_a)

    # -- basic data ----------------------------------------------------
    @property
    def N(self) -> int:
        return self.Tplus.shape[0]

    @property
    def alpha_left(self) -> np.ndarray:
        return axial_wavenumbers(self.N, DispersionSpec(self.k2, self.mu_left, self.width_a))

    @property
    def alpha_right(self) -> np.ndarray:
        return axial_wavenumbers(self.N, DispersionSpec(self.k2, self.mu_right, self.width_a))

    @property
    def open_left(self) -> np.ndarray:
        a = self.alpha_left
        return (a.imag == 0) & (a.real > 0)

    @property
    def open_right(self) -> np.ndarray:
        a = self.alpha_right
        return (a.imag == 0) & (a.real > 0)

    # -- flux ----------------------------------------------------------
    def flux_matrix(self) -> np.ndarray:
        """Flux-normalised S restricted to propagating modes.

        ``S = [[R+, T-], [T+, R-]]`` scaled by ``W^(1/2) S W^(-1/2)`` with
        ``W = diag(alpha)``; it is unitary for a lossless problem.
        """
        pl, pr = self.open_left, self.open_right
        wl = np.sqrt(self.alpha_left.real[pl])
        wr = np.sqrt(self.alpha_right.real[pr])
        Rp = self.Rplus[np.ix_(pl, pl)] * wl[:, None] / wl[None, :]
        Tp = self.Tplus[np.ix_(pr, pl)] * wr[:, None] / wl[None, :]
        Rm = self.Rminus[np.ix_(pr, pr)] * wr[:, None] / wr[None, :]
        Tm = self.Tminus[np.ix_(pl, pr)] * wl[:, None] / wr[None, :]
        return np.block([[Rp, Tm], [Tp, Rm]])

    def flux_balance(self) -> np.ndarray:
        """Outgoing flux per unit incident flux for every open incident channel."""
        S = self.flux_matrix()
        return np.sum(np.abs(S) ** 2, axis=0)

    def flux_residual(self) -> float:
        """max over incident propagating modes of |1 - (reflected + transmitted) flux|."""
        bal = self.flux_balance()
        return float(np.max(np.abs(1.0 - bal))) if bal.size else 0.0

    def unitarity_defect(self) -> float:
        S = self.flux_matrix()
        if S.size == 0:
            return 0.0
        return float(np.max(np.abs(S.conj().T @ S - np.eye(S.shape[0]))))

    def reciprocity_defect(self) -> float:
        """Deviation of the flux-normalised S from symmetry (time reversal)."""
        S = self.flux_matrix()
        return float(np.max(np.abs(S - S.T))) if S.size else 0.0

    # -- tables --------------------------------------------------------
    def transmission_probabilities(self) -> np.ndarray:
        """|T+_nm|^2 alpha+_n / alpha-_m over open channels (rows: out, cols: in)."""
        S = self.flux_matrix()
        nl = int(self.open_left.sum())
        return np.abs(S[nl:, :nl]) ** 2

    def reflection_probabilities(self) -> np.ndarray:
        S = self.flux_matrix()
        nl = int(self.open_left.sum())
        return np.abs(S[:nl, :nl]) ** 2

    def with_meta(self, **kw) -> "ScatteringSet":
        meta = dict(self.meta)
        meta.update(kw)
        return replace(self, meta=meta)

    def max_abs_difference(self, other: "ScatteringSet") -> float:
        return float(max(np.max(np.abs(getattr(self, n) - getattr(other, n)))
                         for n in ("Tplus", "Rplus", "Rminus", "Tminus")))


def flat_propagate(S: ScatteringSet, extra_left: float = 0.0, extra_right: float = 0.0) -> ScatteringSet:
    """Move the reference planes outward by straight lengths on either side.

    Exact: amplitudes pick up ``exp(i alpha_n L)`` per traversal of a flat
    section. Negative lengths move the planes inward and amplify evanescent
    components, so they are only meaningful where those are negligible.
    """
    Pl = np.exp(1j * S.alpha_left * extra_left)
    Pr = np.exp(1j * S.alpha_right * extra_right)
    u1, u2 = S.interval
    return replace(
        S,
        Rplus=Pl[:, None] * S.Rplus * Pl[None, :],
        Tplus=Pr[:, None] * S.Tplus * Pl[None, :],
        Rminus=Pr[:, None] * S.Rminus * Pr[None, :],
        Tminus=Pl[:, None] * S.Tminus * Pr[None, :],
        interval=(u1 - extra_left, u2 + extra_right),
    )

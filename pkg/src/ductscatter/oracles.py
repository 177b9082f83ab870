"""Independent reference solvers.

``mode_match_step`` matches sine-mode expansions across the straight
interface of an abrupt width step. ``direct_bvp_solve`` discretises the
coupled-mode equation ``phi'' + B2(u) phi = 0`` by central finite differences
with modal radiation conditions at both ends. Neither uses wave splitting
or Riccati marching.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .coupled_mode import multiplication_matrix, wall_term
from .modal_basis import DispersionSpec, axial_wavenumbers
from .profile import RefractiveProfile
from .scattering import ScatteringSet


class OracleError(RuntimeError):
    """Singular or unresolved reference computation."""


@dataclass(frozen=True)
class OracleResult:
    S: ScatteringSet
    method: str
    discretisation: dict = field(default_factory=dict)


# ----------------------------------------------------------------------
# mode matching at an abrupt step
# ----------------------------------------------------------------------
def overlap_matrix(a: float, b: float, Na: int, Nb: int) -> np.ndarray:
    """O_nm = int_0^b sin(n pi y / a) sin(m pi y / b) dy."""
    p = np.arange(1, Na + 1)[:, None] * np.pi / a
    q = np.arange(1, Nb + 1)[None, :] * np.pi / b
    return 0.5 * b * (np.sinc((p - q) * b / np.pi) - np.sinc((p + q) * b / np.pi))


def mode_match_step(a: float, b: float, k2: float, N: int) -> OracleResult:
    """Scattering set of a sharp step from width ``a`` (left) to ``b <= a`` (right).

    Lower walls are aligned and the interface is the plane x = 0, where all
    amplitudes are referenced. The narrow guide carries ``N`` modes and the
    wide one ``round(N a / b)`` so that both truncations resolve the same
    transverse scale; the returned operators are the leading N x N blocks.
    """
    if not 0 < b <= a:
        raise ValueError("mode_match_step needs 0 < b <= a")
    Na = max(N, int(round(N * a / b)))
    Nb = N
    al = axial_wavenumbers(Na, DispersionSpec(k2, 1.0, a))
    be = axial_wavenumbers(Nb, DispersionSpec(k2, 1.0, b))
    O = overlap_matrix(a, b, Na, Nb)
    A = 0.5 * b * np.diag(be) + (2.0 / a) * O.T @ (al[:, None] * O)
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > 1e13:
        raise OracleError(f"singular matching system (cond {cond:.3g})")
    # incidence from the wide side
    Tp = np.linalg.solve(A, 2.0 * O.T * al[None, :])
    Rp = (2.0 / a) * O @ Tp - np.eye(Na)
    # incidence from the narrow side
    Rm = np.linalg.solve(A, 0.5 * b * np.diag(be) - (2.0 / a) * O.T @ (al[:, None] * O))
    Tm = (2.0 / a) * O @ (np.eye(Nb) + Rm)
    S = ScatteringSet(Tp[:N, :N], Rp[:N, :N], Rm[:N, :N], Tm[:N, :N], k2,
                      1.0, (b / a) ** 2, (0.0, 0.0), a,
                      {"method": "mode-matching", "Na": Na, "Nb": Nb})
    # amplitudes are per physical mode sin(n pi y / b); in the strip of width a
    # the same mode has axial wavenumber scaled by b / a, so flux weights agree
    return OracleResult(S, "mode-matching", {"Na": Na, "Nb": Nb, "cond": float(cond)})


# ----------------------------------------------------------------------
# direct finite-difference boundary-value solve
# ----------------------------------------------------------------------
def default_grid_points(profile: RefractiveProfile, k2: float, N: int, u1: float, u2: float,
                        per_wavelength: int = 40) -> int:
    """Grid size giving ``per_wavelength`` points per shortest axial wavelength."""
    kmax = np.sqrt(abs(k2) * max(profile.mu_left, profile.mu_right, 1.0)
                   + (N * np.pi / profile.width_a) ** 2)
    lam = 2 * np.pi / kmax
    return int(np.ceil((u2 - u1) / lam * per_wavelength)) + 1


def _fd_solve(profile, k2, N, u1, u2, J):
    """Second-order solve on J + 1 uniform points; returns (T+, R+, R-, T-)."""
    a = profile.width_a
    u = np.linspace(u1, u2, J + 1)
    h = u[1] - u[0]
    bm = axial_wavenumbers(N, DispersionSpec(k2, profile.mu_left, a))
    bp = axial_wavenumbers(N, DispersionSpec(k2, profile.mu_right, a))
    wall = wall_term(N, a)
    blocks = []
    for j, uj in enumerate(u):
        M = k2 * multiplication_matrix(profile.coefficients(uj), N)
        M[np.diag_indices(N)] -= wall
        blocks.append(h * h * M - 2.0 * np.eye(N))
    # ghost points: (phi_1 - phi_-1) / 2h = -i B- phi_0 + rhs  (left),
    #               (phi_J+1 - phi_J-1) / 2h = i B+ phi_J + rhs (right)
    blocks[0] = blocks[0] + 2j * h * np.diag(bm)
    blocks[-1] = blocks[-1] + 2j * h * np.diag(bp)
    n = (J + 1) * N
    diag = sparse.block_diag(blocks, format="csc")
    off = np.ones(J * N)
    upper = off.copy()
    lower = off.copy()
    upper[:N] = 2.0          # phi_-1 eliminated at the left end
    lower[-N:] = 2.0         # phi_J+1 eliminated at the right end
    A = diag + sparse.diags([upper, lower], [N, -N], shape=(n, n), format="csc")
    lu = splu(A.astype(complex))
    I = np.eye(N)
    # ghost-point elimination moves 4 i h B (incident amplitude) to the right side
    # left incidence: phi' + i B- phi = 2 i B- A at u1, outgoing at u2
    rhs = np.zeros((n, N), dtype=complex)
    rhs[:N] = 4j * h * np.diag(bm)
    sol = lu.solve(rhs)
    Rp = sol[:N] - I
    Tp = sol[-N:]
    # right incidence: phi' - i B+ phi = -2 i B+ D at u2, outgoing at u1
    rhs = np.zeros((n, N), dtype=complex)
    rhs[-N:] = 4j * h * np.diag(bp)
    sol = lu.solve(rhs)
    Rm = sol[-N:] - I
    Tm = sol[:N]
    return Tp, Rp, Rm, Tm


def direct_bvp_solve(profile: RefractiveProfile, k2: float, N: int,
                     interval: tuple[float, float] | None = None, points: int | None = None,
                     richardson: bool = True, per_wavelength: int = 40) -> OracleResult:
    """Reference scattering set of ``profile`` from a finite-difference solve.

    With ``richardson`` the solve is repeated with half the step and the two
    results are combined as (4 S_h/2 - S_h) / 3, which cancels the O(h^2)
    error. The profile must be flat at both interval ends.
    """
    u1, u2 = profile.extent if interval is None else interval
    if not u2 > u1:
        raise ValueError("direct_bvp_solve needs a non-degenerate interval")
    if points is None:
        points = default_grid_points(profile, k2, N, u1, u2, per_wavelength)
    J = points - 1
    coarse = _fd_solve(profile, k2, N, u1, u2, J)
    info = {"points": J + 1, "h": (u2 - u1) / J, "richardson": richardson}
    if richardson:
        fine = _fd_solve(profile, k2, N, u1, u2, 2 * J)
        mats = [(4.0 * f - c) / 3.0 for f, c in zip(fine, coarse)]
        info["halving_change"] = float(max(np.max(np.abs(f - c)) for f, c in zip(fine, coarse)))
    else:
        mats = coarse
    S = ScatteringSet(*mats, k2, profile.mu_left, profile.mu_right, (u1, u2),
                      profile.width_a, {"method": "finite-difference", **info})
    return OracleResult(S, "finite-difference", info)

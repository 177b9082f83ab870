"""Invariant-imbedding integration of the Riccati equations.

Sweep 1 marches leftward from u2 with R+(u2) = 0, T+(u2) = I:

    R+' = gamma + delta R+ - R+ alpha - R+ beta R+
    T+' = -T+ (alpha + beta R+)

Sweep 2 marches rightward from u1 with R-(u1) = 0, T-(u1) = I:

    R-' = beta + alpha R- - R- delta - R- gamma R-
    T-' = -T- (delta + gamma R-)

Both directions are well posed: in flat sections T+ and T- evolve as
``exp(i B |u - u_start|)``, which never grows.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .coupled_mode import (SingularSplitterError, SplitterConfig, constant_B,
                           multiplication_matrix, split_blocks, wall_term)
from .modal_basis import DispersionSpec, axial_wavenumbers, cutoff_modes
from .profile import RefractiveProfile
from .scattering import ScatteringSet, SolveOptions, flat_propagate

log = logging.getLogger(__name__)

__all__ = ["BoundStateError", "IntegrationError", "integrate_scattering", "integrate_sweep",
           "solve_interval", "flat_propagate", "illposedness_demo", "GrowthReport"]


class BoundStateError(RuntimeError):
    """The reflection operator blew up (a pole of the Riccati solution).

    R has a pole at u when the sub-tube between u and the sweep's starting
    end supports a bound state at this energy.
    """

    def __init__(self, u, norm):
        super().__init__(f"||R|| = {norm:.3g} exceeded the bound at u = {u:.6g}; "
                         "a sub-tube has a bound state at this energy")
        self.u = u
        self.norm = norm


class IntegrationError(RuntimeError):
    """The ODE integrator failed."""


class _System:
    """Split-system blocks alpha, beta, gamma, delta for a stack of energies."""

    def __init__(self, profile, splitter, k2s, N):
        a = profile.width_a
        if profile.L < 2 * N:
            raise ValueError(f"profile has L = {profile.L} cosine terms, N = {N} needs {2 * N}")
        self.profile = profile
        self.splitter = splitter
        self.k2 = np.asarray(k2s, dtype=float)
        self.N = N
        self.bm = np.array([constant_B(N, k, profile.mu_left, a) for k in self.k2]).reshape(-1, N)
        self.bp = np.array([constant_B(N, k, profile.mu_right, a) for k in self.k2]).reshape(-1, N)
        self.wall = wall_term(N, a)
        self._idx = np.arange(N)

    def blocks(self, u):
        M = multiplication_matrix(self.profile.coefficients(u), self.N)
        B2 = (self.k2[:, None, None] * M).astype(complex)
        B2[:, self._idx, self._idx] -= self.wall
        f, fp = self.splitter.f(u), self.splitter.fprime(u)
        dB = self.bp - self.bm
        c = self.bm + f * dB
        return split_blocks(B2, c, -fp * dB / c**2)


def _cutoff_error(profile, k2, N):
    a = profile.width_a
    bad = sorted(set(cutoff_modes(N, DispersionSpec(k2, profile.mu_left, a)))
                 | set(cutoff_modes(N, DispersionSpec(k2, profile.mu_right, a))))
    if bad:
        return SingularSplitterError(f"k2 = {k2} is a cutoff energy for modes {bad}")
    return None


def _pack(X, Y):
    return np.concatenate([X.ravel(), Y.ravel()]).view(float)


def _unpack(y, shape):
    z = y.view(complex)
    n = z.size // 2
    return z[:n].reshape(shape), z[n:].reshape(shape)


def solve_interval(profile: RefractiveProfile, splitter: SplitterConfig, tol: float) -> tuple[float, float]:
    """Smallest interval outside which both mu and the splitter are flat."""
    lo, hi = profile.extent
    if profile.mu_left != profile.mu_right:
        s_lo, s_hi = splitter.settled(tol)
        lo, hi = min(lo, s_lo), max(hi, s_hi)
    return lo, hi


def _breakpoints(profile, u1, u2):
    pts = [p for p in profile.meta.get("features", ()) if u1 < p < u2]
    return np.unique(np.r_[u1, pts, u2])


def _norms(R):
    return np.linalg.norm(R, 2, axis=(-2, -1))


def _sweep(rhs, y0, knots, opts, shape):
    """Integrate piecewise through ``knots`` (in marching order)."""
    y = y0

    def blowup(u, y):
        return float(np.max(_norms(_unpack(y, shape)[0]))) - opts.blowup
    blowup.terminal = True

    nfev = 0
    for ua, ub in zip(knots[:-1], knots[1:]):
        sol = solve_ivp(rhs, (ua, ub), y, method=opts.method, rtol=opts.rtol,
                        atol=opts.atol, max_step=opts.max_step, events=blowup)
        nfev += sol.nfev
        if sol.status == 1:
            yb = sol.y_events[0][0]
            raise BoundStateError(float(sol.t_events[0][0]),
                                  float(np.max(_norms(_unpack(yb, shape)[0]))))
        if sol.status != 0:
            raise IntegrationError(sol.message)
        y = sol.y[:, -1]
    return y, nfev


def _integrate_batch(profile, splitter, k2s, N, opts, u1, u2):
    sys_ = _System(profile, splitter, k2s, N)
    K = len(k2s)
    shape = (K, N, N)
    knots = _breakpoints(profile, u1, u2)
    I = np.broadcast_to(np.eye(N, dtype=complex), shape).copy()
    Z = np.zeros(shape, dtype=complex)

    def rhs_left(u, y):
        R, T = _unpack(y, shape)
        al, be, ga, de = sys_.blocks(u)
        bR = be @ R
        dR = ga + de @ R - R @ al - R @ bR
        dT = -T @ (al + bR)
        return _pack(dR, dT)

    def rhs_right(u, y):
        Q, P = _unpack(y, shape)
        al, be, ga, de = sys_.blocks(u)
        gQ = ga @ Q
        dQ = be + al @ Q - Q @ de - Q @ gQ
        dP = -P @ (de + gQ)
        return _pack(dQ, dP)

    y, n1 = _sweep(rhs_left, _pack(Z, I), knots[::-1], opts, shape)
    Rp, Tp = (m.copy() for m in _unpack(y, shape))
    y, n2 = _sweep(rhs_right, _pack(Z, I), knots, opts, shape)
    Rm, Tm = (m.copy() for m in _unpack(y, shape))
    return Tp, Rp, Rm, Tm, n1 + n2


def integrate_sweep(profile: RefractiveProfile, splitter: SplitterConfig | None,
                    k2s, N: int, opts: SolveOptions | None = None,
                    interval: tuple[float, float] | None = None) -> list:
    """Scattering sets for several energies, integrated together as one system.

    Returns one entry per energy, in order: a :class:`ScatteringSet` or the
    exception that prevented its computation (cutoff energy, bound state).
    A failure inside the joint integration is retried energy by energy.
    """
    opts = SolveOptions() if opts is None else opts
    if splitter is None:
        splitter = default_splitter(profile)
    u1, u2 = solve_interval(profile, splitter, opts.flat_tol) if interval is None else interval
    if u2 < u1:
        raise ValueError("interval must satisfy u1 <= u2")
    k2s = [float(k) for k in np.atleast_1d(k2s)]
    out: list = [_cutoff_error(profile, k, N) for k in k2s]
    todo = [i for i, e in enumerate(out) if e is None]
    if profile.L < 2 * N:
        raise ValueError(f"profile has L = {profile.L} cosine terms, N = {N} needs {2 * N}")

    def make(i, Tp, Rp, Rm, Tm, nfev):
        meta = {"method": "imbedding", "N": N, "rtol": opts.rtol, "nfev": nfev}
        return ScatteringSet(Tp, Rp, Rm, Tm, k2s[i], profile.mu_left, profile.mu_right,
                             (float(u1), float(u2)), profile.width_a, meta)

    if not todo:
        return out
    if u1 == u2:
        for i in todo:
            S = ScatteringSet.identity(N, k2s[i], profile.mu_left, profile.width_a, u1)
            out[i] = make(i, S.Tplus, S.Rplus, S.Rminus, S.Tminus, 0)
        return out
    try:
        Tp, Rp, Rm, Tm, nfev = _integrate_batch(profile, splitter, [k2s[i] for i in todo],
                                                N, opts, u1, u2)
        for j, i in enumerate(todo):
            out[i] = make(i, Tp[j], Rp[j], Rm[j], Tm[j], nfev)
    except (BoundStateError, IntegrationError) as exc:
        if len(todo) == 1:
            out[todo[0]] = exc
            return out
        log.info("joint integration failed (%s); retrying energies one by one", exc)
        for i in todo:
            try:
                Tp, Rp, Rm, Tm, nfev = _integrate_batch(profile, splitter, [k2s[i]], N, opts, u1, u2)
                out[i] = make(i, Tp[0], Rp[0], Rm[0], Tm[0], nfev)
            except (BoundStateError, IntegrationError) as exc_i:
                out[i] = exc_i
    return out


def integrate_scattering(profile: RefractiveProfile, splitter: SplitterConfig | None,
                         k2: float, N: int, opts: SolveOptions | None = None,
                         interval: tuple[float, float] | None = None) -> ScatteringSet:
    """Scattering set of ``profile`` at energy ``k2`` with ``N`` sine modes.

    The operators are referenced at the interval ends; by default the
    interval is the region where mu or the splitter differ from their
    asymptotes by more than ``opts.flat_tol``. Raises on cutoff energies,
    bound-state blow-up and integrator failure.
    """
    res = integrate_sweep(profile, splitter, [k2], N, opts, interval)[0]
    if isinstance(res, Exception):
        raise res
    return res


def default_splitter(profile: RefractiveProfile) -> SplitterConfig:
    """tanh transition of scale a/2 centred on the non-flat region."""
    lo, hi = profile.extent
    centre = profile.meta.get("centre", 0.5 * (lo + hi))
    return SplitterConfig(scale=0.5 * profile.width_a, centre=float(centre))


# ----------------------------------------------------------------------
# illposedness of one-way marching
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class GrowthReport:
    mode: int | None            # designated (highest) evanescent mode, None if all propagate
    measured: float             # |psi_n(-L)| / |psi_n(0)| from the numerical march
    expected: float             # exp(|alpha_n| L)
    alpha: complex
    length: float
    per_mode: np.ndarray        # measured growth of every mode

    @property
    def relative_error(self) -> float:
        return abs(self.measured / self.expected - 1.0)


def illposedness_demo(N: int, k2: float, L: float, width_a: float = 1.0,
                      mu: float = 1.0, rtol: float = 1e-10) -> GrowthReport:
    """March psi' = i B psi from x = 0 to x = -L, the direction forbidden for psi+.

    Evanescent right-going components grow like exp(|alpha_n| L), so any
    rounding error in them is amplified without bound as L increases.
    """
    alpha = axial_wavenumbers(N, DispersionSpec(k2, mu, width_a))
    y0 = np.ones(N, dtype=complex)

    def rhs(x, y):
        return (1j * alpha * y.view(complex)).view(float)

    sol = solve_ivp(rhs, (0.0, -L), y0.view(float), method="DOP853", rtol=rtol, atol=1e-14)
    if sol.status != 0:
        raise IntegrationError(sol.message)
    growth = np.abs(sol.y[:, -1].view(complex)) / np.abs(y0)
    evan = np.flatnonzero(alpha.imag > 0)
    if evan.size == 0:
        return GrowthReport(None, float(growth.max()), 1.0, 0j, L, growth)
    n = int(evan[-1])
    return GrowthReport(n + 1, float(growth[n]), float(np.exp(abs(alpha[n]) * L)),
                        complex(alpha[n]), L, growth)

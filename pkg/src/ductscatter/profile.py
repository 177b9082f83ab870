"""Cosine-series tabulation of the metric factor mu(u, v) = |dzeta/dw|^2.

``mu(u, v) = sum_l mu_l(u) cos(l pi v / a)`` with ``mu_0 = (1/a) int mu dv`` and
``mu_l = (2/a) int mu cos(l pi v / a) dv``. The coefficients are tabulated on
an axial grid and interpolated by cubic splines; outside the grid the profile
takes its asymptotic constant values.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .stripmap import StripMap


@dataclass(frozen=True)
class RefractiveProfile:
    u: np.ndarray              # axial grid, strictly increasing
    coeffs: np.ndarray         # shape (len(u), L + 1)
    mu_left: float = 1.0
    mu_right: float = 1.0
    width_a: float = 1.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 2 or c.shape[0] != u.size:
            raise ValueError("coeffs must have shape (len(u), L + 1)")
        if u.size > 1 and np.any(np.diff(u) <= 0):
            raise ValueError("axial grid must be strictly increasing")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "coeffs", c)

    @property
    def L(self) -> int:
        return self.coeffs.shape[1] - 1

    @property
    def extent(self) -> tuple[float, float]:
        return float(self.u[0]), float(self.u[-1])

    @property
    def is_flat(self) -> bool:
        return self.u.size < 2

    @cached_property
    def _spline(self):
        return CubicSpline(self.u, self.coeffs, axis=0)

    def _flat(self, mu):
        c = np.zeros(self.L + 1)
        c[0] = mu
        return c

    def coefficients(self, u: float) -> np.ndarray:
        """mu_l(u) for l = 0..L."""
        if self.is_flat or u <= self.u[0]:
            return self._flat(self.mu_left)
        if u >= self.u[-1]:
            return self._flat(self.mu_right)
        return self._spline(u)

    def derivative(self, u: float) -> np.ndarray:
        if self.is_flat or u <= self.u[0] or u >= self.u[-1]:
            return np.zeros(self.L + 1)
        return self._spline(u, 1)

    def mu(self, u: float, v) -> np.ndarray:
        """Reconstructed mu(u, v) from the truncated cosine series."""
        v = np.asarray(v, dtype=float)
        l = np.arange(self.L + 1)
        return np.cos(np.multiply.outer(v, l) * np.pi / self.width_a) @ self.coefficients(u)

    def restrict(self, lo: float, hi: float, mu_left=None, mu_right=None) -> "RefractiveProfile":
        """Sub-profile on [lo, hi]; the new asymptotes default to the values at the cut."""
        keep = (self.u >= lo) & (self.u <= hi)
        u = self.u[keep]
        c = self.coeffs[keep]
        if u.size == 0 or u[0] > lo:
            u = np.r_[lo, u]
            c = np.vstack([self.coefficients(lo), c])
        if u[-1] < hi:
            u = np.r_[u, hi]
            c = np.vstack([c, self.coefficients(hi)])
        ml = self.coefficients(lo)[0] if mu_left is None else mu_left
        mr = self.coefficients(hi)[0] if mu_right is None else mu_right
        return RefractiveProfile(u, c, float(ml), float(mr), self.width_a, dict(self.meta))


def uniform_profile(mu: float = 1.0, width_a: float = 1.0, L: int = 2) -> RefractiveProfile:
    c = np.zeros((1, L + 1))
    c[0, 0] = mu
    return RefractiveProfile(np.array([0.0]), c, mu, mu, width_a)


def profile_from_coefficients(func, u_grid, L: int, width_a: float = 1.0,
                              mu_left=None, mu_right=None) -> RefractiveProfile:
    """Tabulate an analytic coefficient function ``func(u) -> mu_l(u)``."""
    u_grid = np.asarray(u_grid, dtype=float)
    c = np.zeros((u_grid.size, L + 1))
    for i, u in enumerate(u_grid):
        vals = np.atleast_1d(np.asarray(func(u), dtype=float))
        n = min(vals.size, L + 1)
        c[i, :n] = vals[:n]
    ml = c[0, 0] if mu_left is None else mu_left
    mr = c[-1, 0] if mu_right is None else mu_right
    return RefractiveProfile(u_grid, c, float(ml), float(mr), width_a)


# ----------------------------------------------------------------------
# quadrature in v
# ----------------------------------------------------------------------
def v_quadrature(width_a: float, L: int, edge: float = 0.125, ratio: float = 0.25,
                 levels: int = 13, order: int = 12):
    """Composite Gauss-Legendre rule on (0, a), graded geometrically toward both walls.

    The grading resolves the near-singular behaviour of mu next to (rounded)
    corner prevertices; the uniform middle panels resolve cos(L pi v / a).
    """
    x, w = np.polynomial.legendre.leggauss(order)
    edges = [0.0]
    e = edge * ratio**levels
    while e < edge * (1 - 1e-12):
        edges.append(e)
        e /= ratio
    edges.append(edge)
    n_mid = max(4, int(np.ceil((1 - 2 * edge) * (L + 1) / 2)))
    h_max = (1 - 2 * edge) / n_mid
    mid = list(np.linspace(edge, 1 - edge, n_mid + 1)[1:])
    left = np.array(edges + mid)
    right = 1.0 - np.array(edges[::-1])
    bounds = np.unique(np.r_[left, right[1:]])
    # split graded panels that are wider than the oscillation allows
    pieces = [bounds[:1]]
    for b0, b1 in zip(bounds[:-1], bounds[1:]):
        m = int(np.ceil((b1 - b0) / h_max - 1e-9))
        pieces.append(np.linspace(b0, b1, m + 1)[1:])
    bounds = np.concatenate(pieces)
    lo, hi = bounds[:-1], bounds[1:]
    nodes = (0.5 * (hi - lo)[:, None] * x[None, :] + 0.5 * (hi + lo)[:, None]).ravel()
    weights = (0.5 * (hi - lo)[:, None] * w[None, :]).ravel()
    return width_a * nodes, width_a * weights


def cosine_coefficients(mu_values, v_nodes, v_weights, L: int, width_a: float):
    """mu_l for l = 0..L from samples on a quadrature rule (last axis = v)."""
    l = np.arange(L + 1)
    basis = np.cos(np.multiply.outer(v_nodes, l) * np.pi / width_a) * v_weights[:, None]
    c = (np.asarray(mu_values) @ basis) * (2.0 / width_a)
    c[..., 0] *= 0.5
    return c


def profile_from_function(mu_func, u_grid, L: int, width_a: float = 1.0,
                          mu_left=None, mu_right=None, **quad_kw) -> RefractiveProfile:
    """Tabulate ``mu_func(u, v)`` (vectorised) by quadrature in v."""
    u_grid = np.asarray(u_grid, dtype=float)
    vn, vw = v_quadrature(width_a, L, **quad_kw)
    vals = mu_func(u_grid[:, None], vn[None, :])
    c = cosine_coefficients(vals, vn, vw, L, width_a)
    ml = c[0, 0] if mu_left is None else mu_left
    mr = c[-1, 0] if mu_right is None else mu_right
    return RefractiveProfile(u_grid, c, float(ml), float(mr), width_a)


# ----------------------------------------------------------------------
# profiles from strip maps
# ----------------------------------------------------------------------
def axial_grid(sm: StripMap, tol: float = 1e-8, h0: float | None = None,
               growth: float = 1.3, h_sharp: float = 1e-4) -> np.ndarray:
    """Uniform grid over the non-flat region, refined geometrically at prevertices."""
    a = sm.a
    h0 = a / 40 if h0 is None else h0
    if not sm.prevertices:
        return np.array([0.0])
    lo, hi = sm.flat_extent(tol)
    n = int(np.ceil((hi - lo) / h0))
    pts = [np.linspace(lo, hi, n + 1)]
    for pv in sm.prevertices:
        # coefficients are singular at a sharp prevertex and weakly singular
        # at both ends of a rounding interval
        if pv.rounded:
            centres, h = (pv.x - pv.delta, pv.x, pv.x + pv.delta), 1e-3 * pv.delta
        else:
            centres, h = (pv.x,), h_sharp * a
        offs = [h]
        while offs[-1] < 2 * h0:
            offs.append(offs[-1] * growth)
        offs = np.array(offs)
        for c in centres:
            pts += [c + offs, c - offs]
            if pv.rounded:
                pts.append(np.array([c]))
    u = np.unique(np.concatenate(pts))
    u = u[(u >= lo) & (u <= hi)]
    # drop near-duplicates that would make the spline ill-conditioned
    keep = np.r_[True, np.diff(u) > 1e-12 * a]
    return u[keep]


def profile_features(sm: StripMap) -> list[float]:
    """Axial positions where the coefficients vary abruptly (integration breakpoints)."""
    out = []
    for pv in sm.prevertices:
        out += [pv.x - pv.delta, pv.x, pv.x + pv.delta] if pv.rounded else [pv.x]
    return sorted(out)


def build_profile(sm: StripMap, u_grid=None, L: int = 32, tol: float = 1e-8,
                  **grid_kw) -> RefractiveProfile:
    """Cosine coefficients of mu for a strip map, tabulated on ``u_grid``."""
    if u_grid is None:
        u_grid = axial_grid(sm, tol=tol, **grid_kw)
    u_grid = np.asarray(u_grid, dtype=float)
    if not sm.prevertices:
        return uniform_profile(sm.mu_left, sm.a, L)
    vn, vw = v_quadrature(sm.a, L)
    c = np.empty((u_grid.size, L + 1))
    for s in range(0, u_grid.size, 256):
        chunk = u_grid[s:s + 256]
        vals = sm.mu(chunk[:, None], vn[None, :])
        c[s:s + 256] = cosine_coefficients(vals, vn, vw, L, sm.a)
    meta = {"tol": tol, "prevertices": [pv.x for pv in sm.prevertices],
            "features": profile_features(sm)}
    return RefractiveProfile(u_grid, c, sm.mu_left, sm.mu_right, sm.a, meta)


def reconstruction_error(profile: RefractiveProfile, sm: StripMap, u_points, nv: int = 33) -> float:
    """max |sum_l mu_l cos(l pi v / a) - mu(u, v)| on an interior test lattice."""
    v = sm.a * (np.arange(1, nv + 1) - 0.5) / nv
    err = 0.0
    for u in np.atleast_1d(u_points):
        err = max(err, float(np.max(np.abs(profile.mu(u, v) - sm.mu(np.full(nv, u), v)))))
    return err


def mu_grid(source, u_range, v_range=None, nu: int = 101, nv: int = 41):
    """mu on a lattice; ``source`` is a StripMap (exact) or a RefractiveProfile."""
    a = source.a if isinstance(source, StripMap) else source.width_a
    if v_range is None:
        v_range = (a / (2 * nv), a - a / (2 * nv))
    u = np.linspace(u_range[0], u_range[1], nu)
    v = np.linspace(v_range[0], v_range[1], nv)
    if isinstance(source, StripMap):
        vals = source.mu(u[:, None], v[None, :])
    else:
        vals = np.array([source.mu(ui, v) for ui in u])
    return u, v, vals


def dump_mu_grid(path, u, v, vals, comment: str = "") -> None:
    """Plain-text dump: header (dimensions, ranges) then one row per u value."""
    Path(path).write_text(format_mu_grid(u, v, vals, comment))


def format_mu_grid(u, v, vals, comment: str = "") -> str:
    lines = []
    if comment:
        lines += [f"# {c}" for c in comment.splitlines()]
    lines.append(f"# nu {len(u)} nv {len(v)}")
    lines.append(f"# u_range {u[0]:.12g} {u[-1]:.12g}")
    lines.append(f"# v_range {v[0]:.12g} {v[-1]:.12g}")
    lines.append("# rows: u index, columns: v index")
    for row in vals:
        lines.append(" ".join(f"{x:.12g}" for x in row))
    return "\n".join(lines) + "\n"


def load_mu_grid(path):
    u_range = v_range = None
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            parts = line[1:].split()
            if parts and parts[0] == "nu":
                nu, nv = int(parts[1]), int(parts[3])
            elif parts and parts[0] == "u_range":
                u_range = float(parts[1]), float(parts[2])
            elif parts and parts[0] == "v_range":
                v_range = float(parts[1]), float(parts[2])
            continue
        rows.append([float(x) for x in line.split()])
    vals = np.array(rows)
    return np.linspace(*u_range, nu), np.linspace(*v_range, nv), vals

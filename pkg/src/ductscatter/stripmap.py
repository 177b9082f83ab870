"""Schwarz-Christoffel map from the strip 0 < v < a onto a polygonal duct.

With ``t = exp(pi w / a)`` the strip becomes the upper half plane, the bottom
edge v = 0 the positive real t axis and the top edge v = a the negative one.
Because both terminating ducts are channels the exponents of all finite
corners sum to zero and the derivative takes the form

    dzeta/dw = K * prod_k (t - t_k) ** beta_k

where ``pi * (1 + beta_k)`` is the interior angle at corner k. A rounded
corner replaces its factor by the average of ``(t - s) ** beta_k`` over a
prevertex interval ``s in [c_k, d_k]``; outside that interval the boundary
keeps the directions of the two adjacent sides, inside it turns smoothly.

All factors are evaluated through logarithms, which keeps them finite for
|u| of several hundred strip widths.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .geometry import Corner, DuctGeometry

log = logging.getLogger(__name__)

SERIES_TERMS = 64
FAR_RATIO = 0.5


class MapSolveError(RuntimeError):
    """The Schwarz-Christoffel parameter problem did not converge."""

    def __init__(self, msg, residual=np.inf):
        super().__init__(f"{msg} (residual {residual:.3e})")
        self.residual = residual


class SingularPointError(ValueError):
    """Evaluation at a sharp-corner prevertex."""


# ----------------------------------------------------------------------
# elementary factors
# ----------------------------------------------------------------------
def _log_t_minus(w, xk, sk, a):
    """log(t - t_k) on the closed upper half t-plane.

    ``t = exp(pi w / a)`` and ``t_k = sk * exp(pi xk / a)`` with sk = +1 for a
    bottom prevertex and -1 for a top one. Boundary values are the limits from
    inside the strip.
    """
    w = np.asarray(w, dtype=complex)
    z = np.pi * w / a
    zk = np.pi * xk / a
    right = w.real >= xk
    # exponent arguments are <= 0 on the branch where they are used
    q_r = np.where(right, zk - z, 0.0)
    q_l = np.where(right, 0.0, z - zk)
    with np.errstate(divide="ignore", invalid="ignore"):
        if sk > 0:
            val_r = z + np.log(-np.expm1(q_r))
            val_l = zk + 1j * np.pi + np.log(-np.expm1(q_l))
        else:
            val_r = z + np.log1p(np.exp(q_r))
            val_l = zk + np.log1p(np.exp(q_l))
    return np.where(right, val_r, val_l)


def _binomial_mean_coeffs(beta, terms=SERIES_TERMS):
    j = np.arange(0, terms + 1, 2)
    return j, special.binom(beta, j) / (j + 1.0)


@dataclass(frozen=True)
class Prevertex:
    """Image of one corner on the strip boundary."""

    corner: Corner
    x: float
    delta: float = 0.0   # half-width of the rounding interval (u units)

    @property
    def sign(self) -> int:
        return 1 if self.corner.wall == "lower" else -1

    @property
    def beta(self) -> float:
        return self.corner.beta

    @property
    def rounded(self) -> bool:
        return self.delta > 0


def _log_factor(w, pv: Prevertex, a):
    """log of the factor contributed by one prevertex (w: 1-d complex array)."""
    if not pv.rounded:
        return pv.beta * _log_t_minus(w, pv.x, pv.sign, a)
    beta, gamma = pv.beta, pv.beta + 1.0
    s = np.pi * pv.delta / a
    # centre m and half-width h of the interval in t
    xm = pv.x + (a / np.pi) * np.log(np.cosh(s))
    log_h = np.pi * pv.x / a + np.log(np.sinh(s))
    L_m = _log_t_minus(w, xm, pv.sign, a)
    with np.errstate(over="ignore", under="ignore"):
        r = np.exp(log_h - L_m)
    far = np.abs(r) < FAR_RATIO
    out = np.empty(np.shape(L_m), dtype=complex)
    if np.any(far):
        j, cj = _binomial_mean_coeffs(beta)
        rf = r[far]
        series = np.polynomial.polynomial.polyval(rf**2, cj)
        out[far] = beta * L_m[far] + np.log(series)
    near = ~far
    if np.any(near):
        wn = w[near]
        Lmn = L_m[near]
        L_c = _log_t_minus(wn, pv.x - pv.delta, pv.sign, a)
        L_d = _log_t_minus(wn, pv.x + pv.delta, pv.sign, a)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            num = np.exp(gamma * (L_c - Lmn)) - np.exp(gamma * (L_d - Lmn))
            # (d - c) / (t - m) = 2 * sk * h / (t - m)
            den = gamma * 2.0 * pv.sign * r[near]
            out[near] = beta * Lmn + np.log(num / den)
    return out


# ----------------------------------------------------------------------
# the map
# ----------------------------------------------------------------------
@dataclass
class StripMap:
    """Conformal map w -> zeta from the strip 0 < Im w < a onto a duct.

    Asymptotically ``zeta ~ lam_left * w + c_left`` for u -> -inf and
    ``zeta ~ lam_right * w + c_right`` for u -> +inf, so that
    ``mu_left = |lam_left|^2`` and ``mu_right = |lam_right|^2``.
    """

    a: float
    prevertices: tuple
    log_K: complex = 0j
    lam_left: float = 1.0
    lam_right: complex = 1.0 + 0j
    c_left: complex = 0j
    c_right: complex = 0j
    residual: float = 0.0
    geometry: DuctGeometry | None = None
    key_points: dict = field(default_factory=dict)

    # -- evaluation ----------------------------------------------------
    def log_derivative(self, w, omit=()):
        w = np.asarray(w, dtype=complex)
        flat = w.ravel()
        out = np.full(flat.shape, self.log_K, dtype=complex)
        for i, pv in enumerate(self.prevertices):
            if i not in omit:
                out = out + _log_factor(flat, pv, self.a)
        return out.reshape(w.shape)

    def derivative(self, w):
        """dzeta/dw; raises :class:`SingularPointError` at a sharp prevertex."""
        w = np.asarray(w, dtype=complex)
        for pv in self.prevertices:
            if pv.rounded:
                continue
            wk = pv.x + (0.0 if pv.sign > 0 else 1j * self.a)
            if np.any(np.abs(w - wk) < 1e-14 * self.a):
                raise SingularPointError(f"dzeta/dw is singular at prevertex {wk}")
        out = np.exp(self.log_derivative(w))
        return out[()] if out.ndim == 0 else out

    def mu(self, u, v):
        w = np.asarray(u, dtype=float) + 1j * np.asarray(v, dtype=float)
        out = np.exp(2.0 * self.log_derivative(w).real)
        return out[()] if out.ndim == 0 else out

    @property
    def mu_left(self) -> float:
        return float(abs(self.lam_left) ** 2)

    @property
    def mu_right(self) -> float:
        return float(abs(self.lam_right) ** 2)

    @property
    def prevertex_u(self) -> np.ndarray:
        return np.array([pv.x for pv in self.prevertices])

    def map_point(self, w):
        """zeta(w) for an interior point, by quadrature along Im w = const."""
        w = complex(w)
        v = w.imag
        if not 0 < v < self.a:
            raise ValueError("map_point expects an interior point; use boundary_point")
        if not self.prevertices:
            return self.lam_left * w + self.c_left
        x0 = min(self.prevertex_u.min(), w.real) - 2.0 * self.a

        def g(u):
            return np.exp(self.log_derivative(u + 1j * v)) - self.lam_left

        tail = _cquad(g, -np.inf, x0)
        pts = [x for x in self.prevertex_u if x0 < x < w.real]
        body = _cquad(g, x0, w.real, points=pts or None)
        return self.lam_left * w + self.c_left + tail + body

    def boundary_point(self, x: float, wall: str = "lower"):
        """zeta on the strip boundary (v = 0 for 'lower', v = a for 'upper')."""
        keys = self.key_points.get(wall, [])
        v = 0.0 if wall == "lower" else self.a
        if not keys or x < keys[0][0]:
            tail = _cquad(lambda s: np.exp(self.log_derivative(s + 1j * v)) - self.lam_left,
                          -np.inf, x)
            return self.lam_left * (x + 1j * v) + self.c_left + tail
        xs = [k[0] for k in keys]
        i = int(np.searchsorted(xs, x, side="right")) - 1
        xk, zk = keys[i]
        if x == xk:
            return zk
        pts = [p.x for p in self.prevertices if xk < p.x < x]
        return zk + _cquad(lambda s: np.exp(self.log_derivative(s + 1j * v)), xk, x,
                           points=pts or None)

    def sup_mu_deviation(self, u, nv: int = 65) -> float:
        """sup over v of |mu(u, v) - mu_pm|, using the asymptote on the side of u."""
        v = self.a * (np.arange(1, nv + 1) - 0.5) / nv
        centre = self.prevertex_u.mean() if self.prevertices else 0.0
        target = self.mu_left if u < centre else self.mu_right
        return float(np.max(np.abs(self.mu(np.full(nv, u), v) - target)))

    def flat_extent(self, tol: float = 1e-8, step: float | None = None):
        """(u_lo, u_hi) outside of which sup_v |mu - mu_pm| < tol."""
        if not self.prevertices:
            return 0.0, 0.0
        step = 0.25 * self.a if step is None else step
        xs = self.prevertex_u
        lo, hi = xs.min(), xs.max()
        while self.sup_mu_deviation(lo) >= tol:
            lo -= step
        while self.sup_mu_deviation(hi) >= tol:
            hi += step
        return float(lo), float(hi)

    def decay_rate(self, tol_hi: float = 1e-3, tol_lo: float = 1e-9) -> float:
        """Fitted c in sup_v |mu - mu_pm| ~ K exp(-c |u|) (minimum of both ends)."""
        if not self.prevertices:
            return np.inf
        rates = []
        xs = self.prevertex_u
        for sgn, start in ((-1, xs.min()), (1, xs.max())):
            us, ds = [], []
            u = start
            for _ in range(400):
                u += sgn * 0.25 * self.a
                d = self.sup_mu_deviation(u)
                if d < tol_hi:
                    us.append(abs(u))
                    ds.append(np.log(d))
                if d < tol_lo or d == 0:
                    break
            if len(us) >= 3:
                rates.append(-np.polyfit(us, ds, 1)[0])
        return float(min(rates)) if rates else np.inf


def _cquad(f, lo, hi, points=None, epsabs=1e-13, epsrel=1e-12, limit=400):
    kw = dict(epsabs=epsabs, epsrel=epsrel, limit=limit)
    if points is not None and np.isfinite(lo) and np.isfinite(hi):
        kw["points"] = points
    re = integrate.quad(lambda s: float(np.real(f(s))), lo, hi, **kw)[0]
    im = integrate.quad(lambda s: float(np.imag(f(s))), lo, hi, **kw)[0]
    return re + 1j * im


GL_ORDER = 16
GRADE_RATIO = 0.25
GRADE_LEVELS = 26
TAIL_LENGTH = 40.0     # strip widths; the tails decay like exp(-pi |u| / a)

_GL = np.polynomial.legendre.leggauss(GL_ORDER)


def _half_rule(half, exponent, max_panel):
    """Distances d in (0, half] and weights for int_0^half g(d) d**exponent dd."""
    b = np.r_[0.0, half * GRADE_RATIO ** np.arange(GRADE_LEVELS, -1, -1)]
    if max_panel is not None:
        parts = [b[:1]]
        for b0, b1 in zip(b[:-1], b[1:]):
            m = max(1, int(np.ceil((b1 - b0) / max_panel - 1e-9)))
            parts.append(np.linspace(b0, b1, m + 1)[1:])
        b = np.concatenate(parts)
    lo, hi = b[:-1], b[1:]
    H = hi - lo
    y, w = _GL
    d = 0.5 * H[:, None] * y[None, :] + 0.5 * (hi + lo)[:, None]
    wt = 0.5 * H[:, None] * w[None, :]
    if exponent is not None:
        wt = wt * d ** exponent
        yj, wj = special.roots_jacobi(GL_ORDER, 0.0, exponent)
        d[0] = 0.5 * H[0] * (1 + yj)
        wt[0] = (0.5 * H[0]) ** (1 + exponent) * wj
    return d.ravel(), wt.ravel()


def _rule(xa, xb, ja=None, jb=None, max_panel=None):
    """Nodes and weights for int_xa^xb g(x) |x - xa|**ja |xb - x|**jb dx.

    Panels are graded geometrically toward both ends, so g may also have weak
    (bounded) endpoint singularities. When an exponent is given the innermost
    panel at that end uses the matching Gauss-Jacobi rule.
    """
    half = 0.5 * (xb - xa)
    da, wa = _half_rule(half, ja, max_panel)
    db, wb = _half_rule(half, jb, max_panel)
    # the weight of the far end is smooth on each half
    if jb is not None:
        wa = wa * (2 * half - da) ** jb
    if ja is not None:
        wb = wb * (2 * half - db) ** ja
    return np.r_[xa + da, xb - db], np.r_[wa, wb]


def _tail_rule(x0, direction, a):
    """Nodes and weights over [x0 - 40a, x0] (direction -1) or [x0, x0 + 40a]."""
    n = int(2 * TAIL_LENGTH)
    edges = x0 + direction * a * np.linspace(0.0, TAIL_LENGTH, n + 1)
    lo, hi = np.minimum(edges[:-1], edges[1:]), np.maximum(edges[:-1], edges[1:])
    y, w = _GL
    nodes = 0.5 * (hi - lo)[:, None] * y[None, :] + 0.5 * (hi + lo)[:, None]
    weights = 0.5 * (hi - lo)[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


# ----------------------------------------------------------------------
# parameter problem
# ----------------------------------------------------------------------
class _Problem:
    """Unknowns, residuals and boundary integrals of the parameter problem."""

    def __init__(self, geom: DuctGeometry, a: float, rounded: bool):
        self.geom = geom
        self.a = a
        self.lam_left = geom.width_left / a
        self.walls = {w: geom.corners(w) for w in ("lower", "upper")}
        if not rounded:
            self.walls = {w: [_sharp(c) for c in cs] for w, cs in self.walls.items()}
        self.corners = self.walls["lower"] + self.walls["upper"]
        self.rounded_idx = [i for i, c in enumerate(self.corners) if c.radius > 0]

    @property
    def n_unknowns(self) -> int:
        return max(len(self.corners) - 1, 0) + len(self.rounded_idx)

    # -- unknown vector <-> prevertices ---------------------------------
    def unpack(self, p):
        p = np.asarray(p, dtype=float)
        nc = len(self.corners)
        deltas = np.zeros(nc)
        k = nc - 1
        for i in self.rounded_idx:
            deltas[i] = np.exp(p[k])
            k += 1
        xs = np.zeros(nc)
        nL = len(self.walls["lower"])
        nU = len(self.walls["upper"])
        q = 0
        offsets = {"lower": 0, "upper": nL}
        starts = {}
        if nL:
            starts["lower"] = 0.0
            if nU:
                starts["upper"] = p[q]
                q += 1
        elif nU:
            starts["upper"] = 0.0
        for wall, n in (("lower", nL), ("upper", nU)):
            if not n:
                continue
            o = offsets[wall]
            xs[o] = starts[wall]
            for j in range(1, n):
                xs[o + j] = xs[o + j - 1] + deltas[o + j - 1] + deltas[o + j] + np.exp(p[q])
                q += 1
        pvs = tuple(Prevertex(c, float(x), float(d)) for c, x, d in zip(self.corners, xs, deltas))
        return pvs

    def initial_guess(self, seed=None):
        """Prevertex spacing from physical side lengths (or from a previous solve)."""
        nc = len(self.corners)
        p = []
        nL = len(self.walls["lower"])
        if seed is not None:
            xs = np.array([pv.x for pv in seed])
        else:
            xs = None
        if nL and len(self.walls["upper"]):
            if xs is not None:
                p.append(xs[nL] - xs[0])
            else:
                p.append((self.walls["upper"][0].point - self.walls["lower"][0].point).real)
        deltas = np.zeros(nc)
        for i in self.rounded_idx:
            deltas[i] = self._delta_guess(i, seed)
        for wall, o in (("lower", 0), ("upper", nL)):
            cs = self.walls[wall]
            for j in range(1, len(cs)):
                if xs is not None:
                    gap = xs[o + j] - xs[o + j - 1]
                else:
                    gap = abs(cs[j].point - cs[j - 1].point) / self.lam_left
                gap -= deltas[o + j - 1] + deltas[o + j]
                p.append(np.log(max(gap, 1e-3 * self.a)))
        for i in self.rounded_idx:
            p.append(np.log(deltas[i]))
        return np.array(p, dtype=float)

    def _delta_guess(self, i, seed):
        c = self.corners[i]
        beta = c.beta
        amp = 1.0
        if seed is not None:
            sm = StripMap(self.a, seed)
            sm.log_K = _normalisation(sm, self.lam_left)
            pv = seed[i]
            wk = pv.x + (0.0 if pv.sign > 0 else 1j * self.a)
            # |dzeta/dw| ~ amp * |w - w_k| ** beta near a sharp corner
            amp = float(np.exp(sm.log_derivative(wk, omit=(i,)).real
                               + beta * (np.pi * pv.x / self.a + np.log(np.pi / self.a))))
        return ((1.0 + beta) * c.radius / amp) ** (1.0 / (1.0 + beta))

    # -- residuals -------------------------------------------------------
    def key_geometry(self, pvs, log_K):
        """zeta~ (map without translation) at the key boundary points of each wall."""
        sm = StripMap(self.a, pvs, log_K=log_K, lam_left=self.lam_left)
        out = {}
        nL = len(self.walls["lower"])
        for wall, o in (("lower", 0), ("upper", nL)):
            n = len(self.walls[wall])
            if not n:
                out[wall] = []
                continue
            idx = list(range(o, o + n))
            v = 0.0 if wall == "lower" else self.a
            keys = []
            for i in idx:
                pv = pvs[i]
                if pv.rounded:
                    keys.append((pv.x - pv.delta, None, i, "c"))
                    keys.append((pv.x + pv.delta, None, i, "d"))
                else:
                    keys.append((pv.x, i, i, "v"))
            x0, sharp0 = keys[0][0], keys[0][1]
            z = self.lam_left * (x0 + 1j * v) + _left_tail(sm, x0, v, sharp0)
            vals = [z]
            for (xa, sa, ia, ka), (xb, sb, ib, kb) in zip(keys[:-1], keys[1:]):
                if ia == ib:   # across a rounding interval: direction turns
                    xq, wq = _rule(xa, xb)
                    z = z + np.sum(wq * np.exp(sm.log_derivative(xq + 1j * v)))
                else:
                    z = z + _straight_segment(sm, xa, xb, v, sa, sb)
                vals.append(z)
            out[wall] = [(k[0], val, k[2], k[3]) for k, val in zip(keys, vals)]
        return sm, out

    def virtual_vertices(self, keys):
        """Corner positions (tangent-line intersections for rounded corners)."""
        V, tangents = {}, {}
        for wall, ks in keys.items():
            by_corner = {}
            for x, z, i, kind in ks:
                by_corner.setdefault(i, {})[kind] = z
            for i, d in by_corner.items():
                c = self.corners[i]
                if "v" in d:
                    V[i] = d["v"]
                else:
                    zc, zd = d["c"], d["d"]
                    # zc + s d_in = zd - r d_out
                    A = np.array([[c.d_in.real, c.d_out.real], [c.d_in.imag, c.d_out.imag]])
                    rhs = np.array([(zd - zc).real, (zd - zc).imag])
                    s, r = np.linalg.solve(A, rhs)
                    V[i] = zc + s * c.d_in
                    tangents[i] = (abs(s), abs(r))
        return V, tangents

    def residuals(self, p):
        pvs = self.unpack(p)
        sm0 = StripMap(self.a, pvs)
        log_K = _normalisation(sm0, self.lam_left)
        _, keys = self.key_geometry(pvs, log_K)
        V, tangents = self.virtual_vertices(keys)
        res = []
        nL = len(self.walls["lower"])
        scale = self.geom.width_left
        for wall, o in (("lower", 0), ("upper", nL)):
            cs = self.walls[wall]
            for j in range(1, len(cs)):
                dV = V[o + j] - V[o + j - 1]
                dP = cs[j].point - cs[j - 1].point
                res.append(((dV - dP) * cs[j].d_in.conjugate()).real / scale)
        if nL and len(self.walls["upper"]):
            dV = V[nL] - V[0]
            dP = self.walls["upper"][0].point - self.walls["lower"][0].point
            res.append((dV - dP).real / scale)
        for i in self.rounded_idx:
            tl = 0.5 * sum(tangents[i])
            res.append(np.log(tl / self.corners[i].radius))
        return np.array(res)


def _sharp(c: Corner) -> Corner:
    return Corner(c.wall, c.index, c.point, c.beta, c.d_in, c.d_out, 0.0)


def _normalisation(sm: StripMap, lam_left: float) -> complex:
    """log K such that dzeta/dw -> lam_left as u -> -inf."""
    if not sm.prevertices:
        return complex(np.log(lam_left))
    u = sm.prevertex_u.min() - 60.0 * sm.a
    val = sm.log_derivative(u + 0.5j * sm.a) - sm.log_K
    # imaginary part must vanish (horizontal left duct); keep the exact limit
    return complex(np.log(lam_left) - val.real, -val.imag)


def _abs_fprime_weighted(sm: StripMap, x, v, ends):
    """|dzeta/dw| on the boundary divided by |x - x_k|**beta_k for sharp end prevertices."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    omit = tuple(i for i in ends if i is not None)
    lg = sm.log_derivative(x + 1j * v, omit=omit).real
    for i in omit:
        pv = sm.prevertices[i]
        d = x - pv.x
        s = np.pi * d / sm.a
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(d == 0, np.pi / sm.a, np.abs(np.expm1(s) / np.where(d == 0, 1.0, d)))
        # |t - t_k| = exp(pi x_k / a) * |expm1(pi (x - x_k) / a)| on the same wall
        lg = lg + pv.beta * (np.pi * pv.x / sm.a + np.log(ratio))
    return np.exp(lg)


def _straight_segment(sm: StripMap, xa, xb, v, sa, sb):
    """Integral of dzeta/dw along a straight boundary side between two key points."""
    ja = sm.prevertices[sa].beta if sa is not None else None
    jb = sm.prevertices[sb].beta if sb is not None else None
    xm = 0.5 * (xa + xb)
    phase = np.exp(1j * sm.log_derivative(xm + 1j * v).imag)
    xq, wq = _rule(xa, xb, ja, jb, max_panel=0.5 * sm.a)
    val = np.sum(wq * _abs_fprime_weighted(sm, xq, v, (sa, sb)))
    return complex(phase) * val


def _left_tail(sm: StripMap, x0, v, sharp0):
    """Integral of (dzeta/dw - lam_left) along a wall from -inf to its first key point."""
    lam = sm.lam_left
    xs = x0 - sm.a
    xq, wq = _tail_rule(xs, -1, sm.a)
    tail = np.sum(wq * (np.exp(sm.log_derivative(xq + 1j * v).real) - lam))
    jb = None if sharp0 is None else sm.prevertices[sharp0].beta
    xq, wq = _rule(xs, x0, None, jb)
    body = np.sum(wq * _abs_fprime_weighted(sm, xq, v, (sharp0,))) - lam * sm.a
    return float(tail + body)


def solve_strip_map(geom: DuctGeometry, strip_width: float | None = None,
                    tol: float = 1e-10, max_iter: int = 60) -> StripMap:
    """Solve the parameter problem for ``geom`` and return the strip map.

    ``strip_width`` defaults to the left duct width, giving mu_left = 1.
    Rounded corners are solved by continuation from the sharp-corner map.
    """
    a = geom.width_left if strip_width is None else float(strip_width)
    seed = None
    stages = [False, True] if geom.is_rounded else [False]
    sm = None
    for rounded in stages:
        prob = _Problem(geom, a, rounded)
        if prob.n_unknowns == 0 and not prob.corners:
            pvs = prob.unpack(np.zeros(0))
            resid = 0.0
        else:
            p0 = prob.initial_guess(seed)
            p, resid, nit = _damped_newton(prob.residuals, p0, tol, max_iter)
            log.debug("SC solve (rounded=%s): residual %.3e after %d iterations", rounded, resid, nit)
            if not np.isfinite(resid) or resid > tol:
                raise MapSolveError("Schwarz-Christoffel parameter problem did not converge", resid)
            pvs = prob.unpack(p)
        seed = pvs
        sm = _finalise(prob, pvs, resid)
    return sm


def _damped_newton(fun, p0, tol, max_iter, h=1e-7):
    """Newton iteration with forward-difference Jacobian and step halving."""
    p = np.asarray(p0, dtype=float).copy()
    r = fun(p)
    it = 0
    for it in range(1, max_iter + 1):
        if np.max(np.abs(r)) < 0.1 * tol:
            break
        J = np.empty((r.size, p.size))
        for j in range(p.size):
            dp = h * max(1.0, abs(p[j]))
            q = p.copy()
            q[j] += dp
            J[:, j] = (fun(q) - r) / dp
        step = np.linalg.lstsq(J, -r, rcond=None)[0]
        lam, norm0 = 1.0, np.linalg.norm(r)
        while lam > 1e-6:
            q = p + lam * step
            try:
                rq = fun(q)
            except (FloatingPointError, ValueError, np.linalg.LinAlgError):
                rq = None
            if rq is not None and np.all(np.isfinite(rq)) and np.linalg.norm(rq) < norm0:
                break
            lam *= 0.5
        else:
            break
        p, r = q, rq
    return p, float(np.max(np.abs(r))), it


def _finalise(prob: _Problem, pvs, resid) -> StripMap:
    geom, a = prob.geom, prob.a
    sm = StripMap(a, pvs, lam_left=prob.lam_left, geometry=geom, residual=resid)
    sm.log_K = _normalisation(sm, prob.lam_left)
    if not pvs:
        sm.c_left = 1j * geom.lower[0].imag
        sm.lam_right = complex(prob.lam_left)
        sm.c_right = sm.c_left
        return sm
    _, keys = prob.key_geometry(pvs, sm.log_K)
    V, _ = prob.virtual_vertices(keys)
    i0 = 0
    c_left = prob.corners[i0].point - V[i0]
    sm.c_left = complex(c_left)
    sm.key_points = {w: [(x, z + c_left) for x, z, _, _ in ks] for w, ks in keys.items()}
    u_far = sm.prevertex_u.max() + 60.0 * a
    sm.lam_right = complex(np.exp(sm.log_derivative(u_far + 0.5j * a)))
    # c_right from the last key point of a wall with corners
    wall = "lower" if keys["lower"] else "upper"
    v = 0.0 if wall == "lower" else a
    xk, zk = sm.key_points[wall][-1]
    lam = sm.lam_right
    g = lambda s: np.exp(sm.log_derivative(s + 1j * v)) - lam
    last = [pv for pv in pvs if (pv.sign > 0) == (wall == "lower")][-1]
    xs = xk + a
    if last.rounded:
        xq, wq = _rule(xk, xs)
        head = np.sum(wq * g(xq))
    else:
        # integrable corner singularity at xk
        phase = np.exp(1j * np.angle(lam))
        xq, wq = _rule(xk, xs, last.beta, None)
        head = phase * np.sum(wq * _abs_fprime_weighted(sm, xq, v, (pvs.index(last),))) - lam * a
    xq, wq = _tail_rule(xs, 1, a)
    tail = np.sum(wq * g(xq))
    sm.c_right = complex(zk - lam * (xk + 1j * v) + head + tail)
    return sm

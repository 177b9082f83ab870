"""Building Block composition of scattering sets and partitioning of ducts.

Two sub-tubes A (left) and B (right) that share a flat interface combine as

    T+ = T+_B (I - R-_A R+_B)^-1 T+_A
    R+ = R+_A + T-_A R+_B (I - R-_A R+_B)^-1 T+_A
    R- = R-_B + T+_B R-_A (I - R+_B R-_A)^-1 T-_B
    T- = T-_A (I - R+_B R-_A)^-1 T-_B

which sums the multiple reflections between the two pieces.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import reduce

import numpy as np
from scipy import linalg

from .geometry import DuctGeometry, GeometryError
from .profile import RefractiveProfile
from .scattering import ScatteringSet

INTERFACE_RTOL = 1e-9


class CompositionError(ValueError):
    """Incompatible interfaces or a singular multiple-reflection matrix."""


def _check_interface(A: ScatteringSet, B: ScatteringSet):
    if A.N != B.N:
        raise CompositionError(f"mode counts differ ({A.N} vs {B.N})")
    if not np.isclose(A.k2, B.k2, rtol=1e-12, atol=0):
        raise CompositionError(f"energies differ ({A.k2} vs {B.k2})")
    if not np.isclose(A.width_a, B.width_a, rtol=INTERFACE_RTOL, atol=0):
        raise CompositionError("strip widths differ at the interface")
    if not np.isclose(A.mu_right, B.mu_left, rtol=INTERFACE_RTOL, atol=0):
        raise CompositionError(f"interface mu differs ({A.mu_right} vs {B.mu_left})")


def star_compose(A: ScatteringSet, B: ScatteringSet, cond_limit: float = 1e12) -> ScatteringSet:
    """Scattering set of A followed by B (A's right end joined to B's left end)."""
    _check_interface(A, B)
    I = np.eye(A.N)
    X = I - A.Rminus @ B.Rplus
    Y = I - B.Rplus @ A.Rminus
    cond = float(max(np.linalg.cond(X), np.linalg.cond(Y)))
    if not np.isfinite(cond) or cond > cond_limit:
        raise CompositionError(f"interface matrix is singular (cond {cond:.3g}); "
                               "a trapped mode of the composite is close to this energy")
    lx = linalg.lu_factor(X)
    ly = linalg.lu_factor(Y)
    XT = linalg.lu_solve(lx, A.Tplus)            # (I - R-_A R+_B)^-1 T+_A
    YT = linalg.lu_solve(ly, B.Tminus)           # (I - R+_B R-_A)^-1 T-_B
    Tp = B.Tplus @ XT
    Rp = A.Rplus + A.Tminus @ (B.Rplus @ XT)
    Rm = B.Rminus + B.Tplus @ (A.Rminus @ YT)
    Tm = A.Tminus @ YT
    conds = list(A.meta.get("interface_cond", [])) + [cond] + list(B.meta.get("interface_cond", []))
    meta = {"method": "composed", "interface_cond": conds}
    return ScatteringSet(Tp, Rp, Rm, Tm, A.k2, A.mu_left, B.mu_right,
                         (A.interval[0], B.interval[1]), A.width_a, meta)


def compose_all(sets) -> ScatteringSet:
    """Left-to-right fold of :func:`star_compose`."""
    sets = list(sets)
    if not sets:
        raise CompositionError("nothing to compose")
    return reduce(star_compose, sets)


# ----------------------------------------------------------------------
# partitioning
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class SubTube:
    """One piece of a cascade, in a local frame where its left duct is horizontal.

    ``local = rotation * global``; the strip width is shared by all pieces so
    that interface bases coincide.
    """

    geometry: DuctGeometry
    rotation: complex
    strip_width: float


@dataclass(frozen=True)
class Interface:
    lower: complex          # cut point on the lower wall (global frame)
    upper: complex          # cut point on the upper wall
    direction: complex      # unit axial direction of the straight section
    width: float
    mu: float               # (width / strip width)^2
    clearance: float        # distance along the axis to the nearest corner


@dataclass(frozen=True)
class CascadePlan:
    pieces: tuple
    interfaces: tuple
    geometry: DuctGeometry
    strip_width: float
    meta: dict = field(default_factory=dict, compare=False)

    def __len__(self):
        return len(self.pieces)


def _locate(pts, dirs, z, tol):
    """Index i of the side pts[i] -> pts[i+1] (or the exit ray) containing z."""
    n = len(pts)
    for i in range(n):
        d = dirs[i + 1]
        rel = (z - pts[i]) * d.conjugate()
        end = abs(pts[i + 1] - pts[i]) if i < n - 1 else np.inf
        if abs(rel.imag) <= tol and -tol <= rel.real <= end + tol:
            return i, float(rel.real)
    return None, None


def _cut_data(geom: DuctGeometry, z: complex, tol: float):
    lo_pts, up_pts = geom.lower, geom.upper
    lo_dirs, up_dirs = geom.wall_directions("lower"), geom.wall_directions("upper")
    i, s = _locate(lo_pts, lo_dirs, z, tol)
    if i is None:
        raise GeometryError(f"cut point {z} is not on a straight side of the lower wall")
    d = lo_dirs[i + 1]
    normal = 1j * d
    # the upper wall must be parallel here: find where the normal line meets it
    for j in range(len(up_pts)):
        dj = up_dirs[j + 1]
        if abs((dj * d.conjugate()).imag) > 1e-12:
            continue
        dist = ((up_pts[j] - z) * normal.conjugate()).real
        if dist <= 0:
            continue
        zu = z + dist * normal
        jj, su = _locate(up_pts, up_dirs, zu, tol)
        if jj == j:
            return i, s, j, su, zu, d, dist
    raise GeometryError(f"cut at {z} does not cross a parallel straight section of the upper wall")


def partition_geometry(geom: DuctGeometry, cut_points, min_clearance: float = 0.0) -> CascadePlan:
    """Split ``geom`` at cuts across straight parallel sections.

    Each cut point lies on the lower wall; the cut runs along the normal to
    the upper wall. Pieces keep the rounding radii of their corners, and the
    piece to the right of a cut is rotated so that its left duct is horizontal.
    ``min_clearance`` is the smallest admissible axial distance between a cut
    and the nearest corner (including its rounding).
    """
    a = geom.width_left
    tol = 1e-9 * max(1.0, max(abs(p) for p in geom.lower + geom.upper))
    cuts = [complex(c) for c in cut_points]
    if not cuts:
        return CascadePlan((SubTube(geom, 1.0 + 0j, a),), (), geom, a)
    data = []
    for z in cuts:
        i, s, j, su, zu, d, w = _cut_data(geom, z, tol)
        # clearance: distance to corners at either end of the two sides
        gaps = [s, su]
        if i < len(geom.lower) - 1:
            gaps.append(abs(geom.lower[i + 1] - geom.lower[i]) - s)
        if j < len(geom.upper) - 1:
            gaps.append(abs(geom.upper[j + 1] - geom.upper[j]) - su)
        radii = [geom.lower_rounding[i], geom.upper_rounding[j]]
        if i + 1 < len(geom.lower):
            radii.append(geom.lower_rounding[i + 1])
        if j + 1 < len(geom.upper):
            radii.append(geom.upper_rounding[j + 1])
        clearance = float(min(gaps) - max(radii))
        if clearance <= min_clearance:
            raise GeometryError(
                f"cut at {z} is {clearance:.4g} from a corner; at least {min_clearance:.4g} "
                "is needed for evanescent fields and mu to settle")
        data.append((z, i, j, zu, d, w, clearance, s))
    data.sort(key=lambda t: (t[1], t[7]))

    pieces, interfaces = [], []
    lo_start, up_start = 0, 0
    lo_head, up_head = [], []           # points of the current piece so far
    lo_r_head, up_r_head = [], []
    rot = 1.0 + 0j
    cur_entry = 1.0 + 0j
    for z, i, j, zu, d, w, clr, _ in data:
        lo = lo_head + list(geom.lower[lo_start:i + 1]) + [z]
        up = up_head + list(geom.upper[up_start:j + 1]) + [zu]
        lr = lo_r_head + list(geom.lower_rounding[lo_start:i + 1]) + [0.0]
        ur = up_r_head + list(geom.upper_rounding[up_start:j + 1]) + [0.0]
        piece = DuctGeometry(
            lower=tuple(rot * p for p in lo), upper=tuple(rot * p for p in up),
            exit_angle=float(np.angle(d * cur_entry.conjugate())),
            lower_rounding=tuple(lr), upper_rounding=tuple(ur),
            name=f"{geom.name}[{len(pieces)}]")
        pieces.append(SubTube(piece, rot, a))
        interfaces.append(Interface(z, zu, d, w, (w / a) ** 2, clr))
        rot = d.conjugate()
        cur_entry = d
        lo_start, up_start = i + 1, j + 1
        lo_head, up_head = [z], [zu]
        lo_r_head, up_r_head = [0.0], [0.0]
    lo = lo_head + list(geom.lower[lo_start:])
    up = up_head + list(geom.upper[up_start:])
    lr = lo_r_head + list(geom.lower_rounding[lo_start:])
    ur = up_r_head + list(geom.upper_rounding[up_start:])
    last = DuctGeometry(
        lower=tuple(rot * p for p in lo), upper=tuple(rot * p for p in up),
        exit_angle=float(geom.exit_angle - np.angle(cur_entry)),
        lower_rounding=tuple(lr), upper_rounding=tuple(ur),
        name=f"{geom.name}[{len(pieces)}]")
    pieces.append(SubTube(last, rot, a))
    return CascadePlan(tuple(pieces), tuple(interfaces), geom, a)


def split_profile(profile: RefractiveProfile, cut: float, flat_tol: float = 1e-8):
    """Halves of ``profile`` on either side of ``cut``, each extended flat to infinity.

    The cut must lie where mu is independent of v, so that the split waves of
    both halves are the modes of the straight section there. Each half is
    given a ``centre`` (mean of its features) for the default splitter.
    """
    lo, hi = profile.extent
    if not lo < cut < hi:
        raise CompositionError(f"cut {cut} is outside the profile extent {profile.extent}")
    c = profile.coefficients(cut)
    dev = float(np.sum(np.abs(c[1:])))
    if dev > flat_tol:
        raise CompositionError(f"mu varies across the duct at u = {cut} (deviation {dev:.3g})")
    feats = list(profile.meta.get("features", ()))
    halves = []
    for a_, b_ in ((lo, cut), (cut, hi)):
        half = profile.restrict(a_, b_, mu_left=profile.mu_left if a_ == lo else c[0],
                                mu_right=c[0] if b_ == cut else profile.mu_right)
        inside = [f for f in feats if a_ < f < b_]
        meta = dict(half.meta, features=inside)
        meta["centre"] = float(np.mean(inside)) if inside else 0.5 * (a_ + b_)
        halves.append(replace(half, meta=meta))
    return tuple(halves)


def with_interval(S: ScatteringSet, interval) -> ScatteringSet:
    return replace(S, interval=tuple(interval))

"""Polygonal strip-like channels in the physical plane zeta = x + i y.

A duct is described by two walls, each an ordered list of points from left to
right. Left of its first point each wall continues horizontally to x = -inf;
right of its last point it continues to infinity in the direction
``exp(i * exit_angle)``. Points where a wall does not turn are kept as markers
but are not corners.

Geometry file schema (JSON)::

    {
      "lower": [[x0, y0], [x1, y1], ...],
      "upper": [[x0, y0], ...],
      "exit_angle_deg": 0.0,          # optional, direction of the right duct
      "rounding": 0.05,               # optional: one radius for every corner,
                                      # or {"lower": [...], "upper": [...]}
                                      # with one radius per listed point
      "name": "step"                  # optional label
    }
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

TURN_TOL = 1e-12


class GeometryError(ValueError):
    """Invalid duct description."""


@dataclass(frozen=True)
class Corner:
    wall: str          # "lower" or "upper"
    index: int         # position in the wall's point list
    point: complex
    beta: float        # SC exponent; interior angle is pi * (1 + beta)
    d_in: complex      # unit direction of the side arriving from the left
    d_out: complex     # unit direction of the side leaving to the right
    radius: float      # rounding radius, 0 for a sharp corner


@dataclass(frozen=True)
class DuctGeometry:
    lower: tuple
    upper: tuple
    exit_angle: float = 0.0
    lower_rounding: tuple = ()
    upper_rounding: tuple = ()
    name: str = ""

    def __post_init__(self):
        lower = tuple(complex(p) for p in self.lower)
        upper = tuple(complex(p) for p in self.upper)
        if not lower or not upper:
            raise GeometryError("each wall needs at least one point")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        for wall, pts in (("lower", lower), ("upper", upper)):
            attr = f"{wall}_rounding"
            r = tuple(float(x) for x in getattr(self, attr)) or (0.0,) * len(pts)
            if len(r) != len(pts):
                raise GeometryError(f"{attr} needs one radius per {wall} point")
            if any(x < 0 for x in r):
                raise GeometryError("rounding radii must be non-negative")
            object.__setattr__(self, attr, r)
        self.validate()

    # ------------------------------------------------------------------
    @property
    def width_left(self) -> float:
        return self.upper[0].imag - self.lower[0].imag

    @property
    def exit_direction(self) -> complex:
        return complex(np.exp(1j * self.exit_angle))

    @property
    def width_right(self) -> float:
        return float(((self.upper[-1] - self.lower[-1]) * self.exit_direction.conjugate()).imag)

    def wall_points(self, wall: str) -> tuple:
        return self.lower if wall == "lower" else self.upper

    def wall_directions(self, wall: str) -> list[complex]:
        """Unit directions of the sides of a wall, including both terminating rays."""
        pts = self.wall_points(wall)
        dirs = [1.0 + 0j]
        for p, q in zip(pts[:-1], pts[1:]):
            d = q - p
            if abs(d) == 0:
                raise GeometryError(f"repeated point on {wall} wall")
            dirs.append(d / abs(d))
        dirs.append(self.exit_direction)
        return dirs

    def corners(self, wall: str | None = None) -> list[Corner]:
        walls = ("lower", "upper") if wall is None else (wall,)
        out = []
        for w in walls:
            pts = self.wall_points(w)
            dirs = self.wall_directions(w)
            radii = getattr(self, f"{w}_rounding")
            for i, p in enumerate(pts):
                turn = float(np.angle(dirs[i + 1] / dirs[i]))
                if abs(turn) <= TURN_TOL:
                    continue
                # interior lies left of the lower wall and right of the upper wall
                beta = -turn / np.pi if w == "lower" else turn / np.pi
                out.append(Corner(w, i, p, beta, dirs[i], dirs[i + 1], radii[i]))
        return out

    @property
    def is_rounded(self) -> bool:
        return any(c.radius > 0 for c in self.corners())

    # ------------------------------------------------------------------
    def validate(self) -> None:
        if not self.width_left > 0:
            raise GeometryError("upper wall must start above the lower wall")
        if not self.width_right > 0:
            raise GeometryError("right terminating duct has non-positive width")
        for w in ("lower", "upper"):
            dirs = self.wall_directions(w)
            for d0, d1 in zip(dirs[:-1], dirs[1:]):
                if abs(abs(np.angle(d1 / d0)) - np.pi) < 1e-9:
                    raise GeometryError(f"{w} wall folds back on itself")
        lo, up = self._polyline("lower"), self._polyline("upper")
        if _polyline_self_intersects(lo) or _polyline_self_intersects(up):
            raise GeometryError("a wall intersects itself")
        if _polylines_intersect(lo, up):
            raise GeometryError("walls intersect")
        for c in self.corners():
            if c.radius > 0:
                lim = self._max_radius(c)
                if c.radius >= lim:
                    raise GeometryError(
                        f"rounding radius {c.radius} too large at {c.wall} corner "
                        f"{c.index} (must be < {lim:.6g})")

    def _polyline(self, wall: str) -> list[complex]:
        pts = list(self.wall_points(wall))
        span = max(1.0, max(abs(p) for p in self.lower + self.upper))
        far = 10.0 * span + 10.0 * max(self.width_left, self.width_right)
        return [pts[0] - far] + pts + [pts[-1] + far * self.exit_direction]

    def _max_radius(self, c: Corner) -> float:
        """Half the shortest finite side adjacent to a corner."""
        pts = self.wall_points(c.wall)
        sides = []
        if c.index > 0:
            sides.append(abs(pts[c.index] - pts[c.index - 1]))
        if c.index < len(pts) - 1:
            sides.append(abs(pts[c.index + 1] - pts[c.index]))
        sides.append(2.0 * min(self.width_left, self.width_right))
        return 0.5 * min(sides)

    # ------------------------------------------------------------------
    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "lower": [[p.real, p.imag] for p in self.lower],
            "upper": [[p.real, p.imag] for p in self.upper],
            "exit_angle_deg": float(np.degrees(self.exit_angle)),
        }
        if self.is_rounded:
            d["rounding"] = {"lower": list(self.lower_rounding), "upper": list(self.upper_rounding)}
        return d

    def transformed(self, rotation: complex = 1.0, shift: complex = 0.0) -> "DuctGeometry":
        """Apply zeta -> rotation * zeta + shift (|rotation| = 1)."""
        return replace(
            self,
            lower=tuple(rotation * p + shift for p in self.lower),
            upper=tuple(rotation * p + shift for p in self.upper),
            exit_angle=self.exit_angle + float(np.angle(rotation)),
        )


# ----------------------------------------------------------------------
# constructors
# ----------------------------------------------------------------------
def uniform_duct(a: float = 1.0) -> DuctGeometry:
    return DuctGeometry(lower=(0j,), upper=(1j * a,), name="uniform")


def step_duct(a: float = 1.0, b: float = 0.6, x_step: float = 0.0) -> DuctGeometry:
    """Abrupt narrowing: flat lower wall, upper wall steps from a down to b."""
    if not 0 < b <= a:
        raise GeometryError("step duct needs 0 < b <= a")
    if b == a:
        return uniform_duct(a)
    return DuctGeometry(
        lower=(complex(x_step, 0.0),),
        upper=(complex(x_step, a), complex(x_step, b)),
        name="step",
    )


def s_bend(a: float = 1.0, offset: float = 1.0, length: float = 1.0) -> DuctGeometry:
    """Offset channel: both walls rise by ``offset`` over a straight oblique section."""
    return DuctGeometry(
        lower=(0j, complex(length, offset)),
        upper=(1j * a, complex(length, offset + a)),
        name="s-bend",
    )


def corner_duct(a: float = 1.0) -> DuctGeometry:
    """Right-angle bend turning upwards, with a square outer corner."""
    return DuctGeometry(
        lower=(complex(a, 0.0),),
        upper=(complex(0.0, a),),
        exit_angle=np.pi / 2,
        name="corner",
    )


def round_corners(geom: DuctGeometry, eps: float) -> DuctGeometry:
    """Assign rounding radius ``eps`` to every corner (0 restores sharp corners)."""
    if eps < 0:
        raise GeometryError("rounding radius must be non-negative")
    radii = {}
    for w in ("lower", "upper"):
        r = [0.0] * len(geom.wall_points(w))
        for c in geom.corners(w):
            r[c.index] = float(eps)
        radii[f"{w}_rounding"] = tuple(r)
    # DuctGeometry validation rejects radii that do not fit the local geometry
    return replace(geom, **radii)


# ----------------------------------------------------------------------
# file I/O
# ----------------------------------------------------------------------
def geometry_from_dict(d: dict) -> DuctGeometry:
    try:
        lower = [complex(x, y) for x, y in d["lower"]]
        upper = [complex(x, y) for x, y in d["upper"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise GeometryError(f"malformed wall list: {exc}") from exc
    rounding = d.get("rounding", 0.0)
    kw = {}
    if isinstance(rounding, dict):
        kw["lower_rounding"] = tuple(rounding.get("lower", ()))
        kw["upper_rounding"] = tuple(rounding.get("upper", ()))
    geom = DuctGeometry(
        lower=tuple(lower), upper=tuple(upper),
        exit_angle=float(np.radians(d.get("exit_angle_deg", 0.0))),
        name=str(d.get("name", "")), **kw,
    )
    if not isinstance(rounding, dict) and float(rounding) > 0:
        geom = round_corners(geom, float(rounding))
    return geom


def load_geometry(path) -> DuctGeometry:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise GeometryError(f"cannot read geometry file {path}: {exc}") from exc
    return geometry_from_dict(data)


def save_geometry(geom: DuctGeometry, path) -> None:
    Path(path).write_text(json.dumps(geom.to_dict(), indent=2) + "\n")


# ----------------------------------------------------------------------
# intersection helpers
# ----------------------------------------------------------------------
def _cross(a: complex, b: complex) -> float:
    return a.real * b.imag - a.imag * b.real


def _segments_intersect(p1, p2, q1, q2) -> bool:
    d1 = _cross(q2 - q1, p1 - q1)
    d2 = _cross(q2 - q1, p2 - q1)
    d3 = _cross(p2 - p1, q1 - p1)
    d4 = _cross(p2 - p1, q2 - p1)
    eps = 1e-14 * max(abs(p1), abs(p2), abs(q1), abs(q2), 1.0)
    if ((d1 > eps and d2 < -eps) or (d1 < -eps and d2 > eps)) and \
       ((d3 > eps and d4 < -eps) or (d3 < -eps and d4 > eps)):
        return True
    return False


def _polyline_self_intersects(pts) -> bool:
    segs = list(zip(pts[:-1], pts[1:]))
    for i in range(len(segs)):
        for j in range(i + 2, len(segs)):
            if _segments_intersect(*segs[i], *segs[j]):
                return True
    return False


def _polylines_intersect(a, b) -> bool:
    for p1, p2 in zip(a[:-1], a[1:]):
        for q1, q2 in zip(b[:-1], b[1:]):
            if _segments_intersect(p1, p2, q1, q2):
                return True
    return False

"""Geometry to scattering set: map, profile, split system, Riccati sweeps.

Reference planes are reported as physical axial coordinates: the x
coordinate of the left plane and the coordinate along the exit direction of
the right plane, both measured on the lower wall.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .building_block import CascadePlan, CompositionError, partition_geometry, star_compose
from .coupled_mode import SplitterConfig
from .geometry import DuctGeometry
from .imbedding import default_splitter, integrate_sweep, solve_interval
from .profile import RefractiveProfile, build_profile
from .scattering import ScatteringSet, SolveOptions, flat_propagate
from .stripmap import StripMap, solve_strip_map

PLANE_SLACK = 1e-9


@dataclass(frozen=True)
class ModelConfig:
    """Discretisation choices shared by every energy of a run."""

    N: int = 8
    L: int | None = None                  # cosine terms of mu, default max(32, 2N)
    strip_width: float | None = None
    splitter_scale: float | None = None
    splitter_centre: float | None = None
    options: SolveOptions = field(default_factory=SolveOptions)

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be at least 1")
        if self.L is not None and self.L < 2 * self.N:
            raise ValueError(f"L = {self.L} is below 2N = {2 * self.N}")

    @property
    def n_cos(self) -> int:
        return self.L if self.L is not None else max(32, 2 * self.N)


@dataclass(frozen=True)
class PreparedDuct:
    geometry: DuctGeometry
    strip_map: StripMap
    profile: RefractiveProfile
    splitter: SplitterConfig
    interval: tuple

    def planes(self, interval=None) -> tuple[float, float]:
        """Physical axial coordinates of the reference planes of ``interval``."""
        u1, u2 = self.interval if interval is None else interval
        sm = self.strip_map
        left = (sm.lam_left * u1 + sm.c_left).real
        e = self.geometry.exit_direction
        right = ((sm.lam_right * u2 + sm.c_right) * e.conjugate()).real
        return float(left), float(right)


def prepare(geom: DuctGeometry, cfg: ModelConfig) -> PreparedDuct:
    sm = solve_strip_map(geom, strip_width=cfg.strip_width)
    prof = build_profile(sm, L=cfg.n_cos, tol=cfg.options.flat_tol)
    split = default_splitter(prof)
    if cfg.splitter_scale is not None or cfg.splitter_centre is not None:
        split = SplitterConfig(
            scale=split.scale if cfg.splitter_scale is None else cfg.splitter_scale,
            centre=split.centre if cfg.splitter_centre is None else cfg.splitter_centre)
    interval = solve_interval(prof, split, cfg.options.flat_tol)
    return PreparedDuct(geom, sm, prof, split, (float(interval[0]), float(interval[1])))


def solve_chunk(prep: PreparedDuct, k2s, N: int, opts: SolveOptions) -> list:
    """Scattering sets (or exceptions) for ``k2s``, tagged with plane positions."""
    out = integrate_sweep(prep.profile, prep.splitter, k2s, N, opts, prep.interval)
    planes = prep.planes()
    return [r if isinstance(r, Exception) else r.with_meta(planes=planes) for r in out]


def move_planes(S: ScatteringSet, left: float, right: float) -> ScatteringSet:
    """Shift the reference planes of ``S`` outward to physical coordinates ``left``/``right``.

    ``S.meta['planes']`` holds the current positions. Moving a plane inward
    would require back-propagating evanescent fields and is refused.
    """
    cur_l, cur_r = S.meta["planes"]
    dl = (cur_l - left) / math.sqrt(S.mu_left)
    dr = (right - cur_r) / math.sqrt(S.mu_right)
    if dl < -PLANE_SLACK or dr < -PLANE_SLACK:
        raise ValueError("reference planes can only be moved outward")
    return flat_propagate(S, max(dl, 0.0), max(dr, 0.0)).with_meta(planes=(left, right))


# ----------------------------------------------------------------------
# cascades
# ----------------------------------------------------------------------
def min_clearance(width: float, flat_tol: float) -> float:
    """Distance over which exp(-pi d / w) drops below ``flat_tol``.

    The corner-induced deviation of mu and the slowest evanescent mode both
    decay at least this fast in a straight section of width ``w``.
    """
    return width / math.pi * math.log(1.0 / flat_tol)


def plan_cascade(geom: DuctGeometry, cut_points, flat_tol: float = 1e-8) -> CascadePlan:
    widths = [geom.width_left, geom.width_right]
    return partition_geometry(geom, cut_points, min_clearance(max(widths), flat_tol))


def _interface_offsets(plan: CascadePlan, preps):
    """Axial positions (relative to each cut) of the adjacent reference planes."""
    out = []
    for p, itf in enumerate(plan.interfaces):
        A, B = preps[p], preps[p + 1]
        rotA, rotB = plan.pieces[p].rotation, plan.pieces[p + 1].rotation
        smA, smB = A.strip_map, B.strip_map
        u2 = A.interval[1]
        zA = (smA.lam_right * u2 + smA.c_right) / rotA
        sA = ((zA - itf.lower) * itf.direction.conjugate()).real
        u1 = B.interval[0]
        zB = (smB.lam_left * u1 + smB.c_left) / rotB
        sB = ((zB - itf.lower) * itf.direction.conjugate()).real
        if sA > PLANE_SLACK or sB < -PLANE_SLACK:
            raise CompositionError(
                f"interface {p}: the non-flat region reaches past the cut "
                f"({sA:.3g}, {sB:.3g}); move the cut further from the corners")
        out.append((float(sA), float(sB)))
    return out


def solve_cascade(plan: CascadePlan, k2s, cfg: ModelConfig, preps=None) -> list:
    """Solve every piece of ``plan`` and compose at each energy.

    Each piece is solved on its own strip map (all with the same strip width)
    and its reference planes are moved onto the cuts before composition.
    """
    if preps is None:
        model = ModelConfig(cfg.N, cfg.L, plan.strip_width, cfg.splitter_scale,
                            cfg.splitter_centre, cfg.options)
        preps = [prepare(piece.geometry, model) for piece in plan.pieces]
    offsets = _interface_offsets(plan, preps)
    k2s = [float(k) for k in np.atleast_1d(k2s)]
    per_piece = [integrate_sweep(pr.profile, pr.splitter, k2s, cfg.N, cfg.options, pr.interval)
                 for pr in preps]
    results = []
    for j, k2 in enumerate(k2s):
        sets = [pp[j] for pp in per_piece]
        bad = [s for s in sets if isinstance(s, Exception)]
        if bad:
            results.append(bad[0])
            continue
        moved = []
        for p, S in enumerate(sets):
            dl = offsets[p - 1][1] / math.sqrt(S.mu_left) if p > 0 else 0.0
            dr = -offsets[p][0] / math.sqrt(S.mu_right) if p < len(offsets) else 0.0
            moved.append(flat_propagate(S, dl, dr))
        try:
            C = moved[0]
            for S in moved[1:]:
                C = star_compose(C, S)
        except CompositionError as exc:
            results.append(exc)
            continue
        first, last = preps[0], preps[-1]
        left = first.planes()[0]
        # right plane of the last piece, expressed along the global exit direction
        smL = last.strip_map
        zR = (smL.lam_right * last.interval[1] + smL.c_right) / plan.pieces[-1].rotation
        right = (zR * plan.geometry.exit_direction.conjugate()).real
        results.append(C.with_meta(planes=(float(left), float(right))))
    return results

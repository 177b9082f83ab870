"""Command-line entry point: ``ductscatter {solve,converge,mufield,compose} CONFIG``.

The JSON run configuration::

    {
      "geometry": "step.json",          # path (relative to the config) or inline dict
      "rounding": 0.05,                 # optional, radius for every corner
      "k2": {"min": 28, "max": 38, "count": 11},   # or an explicit list
      "N": 8,                           # int, or a list for "converge"
      "L": 32,                          # optional cosine terms of mu
      "strip_width": null,
      "splitter": {"scale": 0.5, "centre": 0.0},   # optional
      "tolerances": {"rtol": 1e-9, "atol": 1e-12, "flat_tol": 1e-8,
                     "blowup": 1e3, "flux": 1e-6},
      "batch": 8,                       # energies integrated together
      "workers": 1,
      "output": "out.csv",
      "mufield": {"u_range": [-3, 3], "v_range": null, "nu": 121, "nv": 41,
                  "source": "map"},
      "cuts": [[6.0, 3.0]]              # compose: cut points on the lower wall
    }

Exit codes: 0 success, 1 rows with solver failures (or non-monotone
convergence), 2 configuration or geometry error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .building_block import CompositionError
from .coupled_mode import SingularSplitterError
from .geometry import DuctGeometry, GeometryError, geometry_from_dict, round_corners
from .imbedding import BoundStateError
from .modal_basis import DispersionSpec, axial_wavenumbers
from .pipeline import ModelConfig, plan_cascade, prepare, solve_cascade, solve_chunk
from .profile import build_profile, dump_mu_grid, format_mu_grid, mu_grid
from .scattering import ScatteringSet, SolveOptions
from .stripmap import MapSolveError, solve_strip_map

log = logging.getLogger("ductscatter")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2
FMT = "{:.12g}"


class ConfigError(ValueError):
    pass


# ----------------------------------------------------------------------
# configuration
# ----------------------------------------------------------------------
@dataclass
class RunConfig:
    geometry: dict
    k2: list
    N: list
    L: int | None = None
    strip_width: float | None = None
    splitter: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    rounding: float | None = None
    batch: int = 8
    workers: int = 1
    output: str | None = None
    mufield: dict = field(default_factory=dict)
    cuts: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.k2) < 1:
            raise ConfigError("k2 sweep needs at least one energy")
        if any(not isinstance(n, int) or n < 1 for n in self.N):
            raise ConfigError("N must be a positive integer (or a list of them)")
        for k, v in self.tolerances.items():
            if not (isinstance(v, (int, float)) and v > 0):
                raise ConfigError(f"tolerance {k} must be positive")
        unknown = set(self.tolerances) - {"rtol", "atol", "flat_tol", "blowup", "flux", "max_step"}
        if unknown:
            raise ConfigError(f"unknown tolerances: {sorted(unknown)}")
        if self.batch < 1 or self.workers < 1:
            raise ConfigError("batch and workers must be at least 1")

    # -- derived objects -------------------------------------------------
    def duct(self) -> DuctGeometry:
        g = geometry_from_dict(self.geometry)
        return round_corners(g, self.rounding) if self.rounding else g

    @property
    def flux_tol(self) -> float:
        return float(self.tolerances.get("flux", 1e-6))

    def options(self) -> SolveOptions:
        kw = {k: float(v) for k, v in self.tolerances.items() if k != "flux"}
        return SolveOptions(**kw)

    def model(self, N: int) -> ModelConfig:
        return ModelConfig(N=N, L=self.L, strip_width=self.strip_width,
                           splitter_scale=self.splitter.get("scale"),
                           splitter_centre=self.splitter.get("centre"),
                           options=self.options())

    def record(self) -> str:
        """Sorted JSON of everything that determines the results."""
        d = asdict(self)
        for k in ("workers", "output"):
            d.pop(k)
        return json.dumps(d, sort_keys=True, separators=(",", ":"))


def _energies(spec) -> list:
    if isinstance(spec, dict):
        try:
            lo, hi, n = float(spec["min"]), float(spec["max"]), int(spec["count"])
        except KeyError as exc:
            raise ConfigError(f"k2 sweep needs min, max and count ({exc} missing)") from None
        if n < 1:
            raise ConfigError("k2 count must be at least 1")
        return [lo] if n == 1 else [float(x) for x in np.linspace(lo, hi, n)]
    if isinstance(spec, (int, float)):
        return [float(spec)]
    return [float(x) for x in spec]


def load_config(path, overrides: dict | None = None) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    if "geometry" not in raw or "k2" not in raw and "mufield" not in raw:
        raise ConfigError("config needs 'geometry' and 'k2'")
    geom = raw["geometry"]
    if isinstance(geom, str):
        gpath = (path.parent / geom) if not Path(geom).is_absolute() else Path(geom)
        try:
            geom = json.loads(gpath.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read geometry {gpath}: {exc}") from None
    N = raw.get("N", 8)
    N = [int(n) for n in N] if isinstance(N, list) else [int(N)]
    known = {"geometry", "k2", "N", "L", "strip_width", "splitter", "tolerances", "rounding",
             "batch", "workers", "output", "mufield", "cuts"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return RunConfig(geometry=geom, k2=_energies(raw.get("k2", [1.0])), N=N,
                         L=raw.get("L"), strip_width=raw.get("strip_width"),
                         splitter=dict(raw.get("splitter") or {}),
                         tolerances=dict(raw.get("tolerances") or {}),
                         rounding=raw.get("rounding"), batch=int(raw.get("batch", 8)),
                         workers=int(raw.get("workers", 1)), output=raw.get("output"),
                         mufield=dict(raw.get("mufield") or {}), cuts=list(raw.get("cuts") or []))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


# ----------------------------------------------------------------------
# parallel dispatch
# ----------------------------------------------------------------------
def _portable(res):
    """Exceptions are shipped between processes as (kind, message)."""
    if isinstance(res, BoundStateError):
        return ("bound_state", str(res))
    if isinstance(res, CompositionError):
        return ("composition_error", str(res))
    if isinstance(res, SingularSplitterError):
        return ("cutoff", str(res))
    if isinstance(res, Exception):
        return ("integration_error", str(res))
    return res


def _chunk_task(args):
    prep, k2s, N, opts = args
    return [_portable(r) for r in solve_chunk(prep, k2s, N, opts)]


def _cascade_task(args):
    plan, preps, k2s, model = args
    return [_portable(r) for r in solve_cascade(plan, k2s, model, preps)]


def _run(task, jobs, workers):
    """Ordered results of ``task`` over ``jobs``; chunking never depends on ``workers``."""
    if workers <= 1 or len(jobs) <= 1:
        out = [task(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(task, jobs))
    return [r for chunk in out for r in chunk]


def _chunks(seq, size):
    return [seq[i:i + size] for i in range(0, len(seq), size)]


# ----------------------------------------------------------------------
# tables
# ----------------------------------------------------------------------
def _n_open(k2s, mu, a, N) -> int:
    """Largest number of propagating modes over the sweep (table width)."""
    return max(int(np.sum(axial_wavenumbers(N, DispersionSpec(k, mu, a)).real > 0)) for k in k2s)


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return FMT.format(float(x)) if x != 0 else "0"


BLOCKS = (("Tp", "Tplus", "right", "left"), ("Rp", "Rplus", "left", "left"),
          ("Rm", "Rminus", "right", "right"), ("Tm", "Tminus", "left", "right"))


def solve_columns(pl: int, pr: int) -> list:
    cols = ["k2", "status", "flux_residual", "flux_flag", "bound_state", "n_open_left",
            "n_open_right", "x_left", "x_right"]
    size = {"left": pl, "right": pr}
    for tag, _, out, inc in BLOCKS:
        for n in range(1, size[out] + 1):
            for m in range(1, size[inc] + 1):
                cols += [f"{tag}_{n}_{m}_abs2", f"{tag}_{n}_{m}_phase"]
    return cols + ["error"]


def solve_row(k2, res, pl, pr, flux_tol) -> list:
    size = {"left": pl, "right": pr}
    if not isinstance(res, ScatteringSet):
        kind, msg = res
        blanks = sum(2 * size[o] * size[i] for _, _, o, i in BLOCKS)
        return [_fmt(k2), kind, "", "", int(kind == "bound_state"), "", "", "", ""] + [""] * blanks + [msg]
    S = res
    wl = np.where(S.open_left, np.sqrt(np.abs(S.alpha_left.real)), np.nan)
    wr = np.where(S.open_right, np.sqrt(np.abs(S.alpha_right.real)), np.nan)
    w = {"left": wl, "right": wr}
    resid = S.flux_residual()
    x_left, x_right = S.meta.get("planes", (float("nan"), float("nan")))
    row = [_fmt(k2), "ok", _fmt(resid), int(resid > flux_tol), 0,
           int(S.open_left.sum()), int(S.open_right.sum()), _fmt(x_left), _fmt(x_right)]
    for _, attr, out, inc in BLOCKS:
        M = getattr(S, attr)
        for n in range(size[out]):
            for m in range(size[inc]):
                scale = w[out][n] / w[inc][m]
                if math.isnan(scale):
                    row += ["", ""]
                else:
                    row += [_fmt(abs(M[n, m] * scale) ** 2), _fmt(np.angle(M[n, m]))]
    return row + [""]


def write_table(path, header_lines, columns, rows, footer_lines=()) -> None:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(columns)
    wr.writerows(rows)
    for line in footer_lines:
        buf.write(f"# {line}\n")
    text = buf.getvalue()
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# ----------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------
def cmd_solve(cfg: RunConfig) -> int:
    """Scattering table over a k2 sweep."""
    if len(cfg.N) != 1:
        raise ConfigError("solve takes a single N")
    N = cfg.N[0]
    model = cfg.model(N)
    prep = prepare(cfg.duct(), model)
    jobs = [(prep, c, N, model.options) for c in _chunks(cfg.k2, cfg.batch)]
    results = _run(_chunk_task, jobs, cfg.workers)
    a, prof = prep.profile.width_a, prep.profile
    pl, pr = _n_open(cfg.k2, prof.mu_left, a, N), _n_open(cfg.k2, prof.mu_right, a, N)
    rows = [solve_row(k, r, pl, pr, cfg.flux_tol) for k, r in zip(cfg.k2, results)]
    _report(rows, 1, cfg.flux_tol)
    write_table(cfg.output, ["ductscatter solve", f"config {cfg.record()}"],
                solve_columns(pl, pr), rows)
    return EXIT_FAILED if any(r[1] != "ok" for r in rows) else EXIT_OK


def _report(rows, status_col, flux_tol):
    for r in rows:
        if r[status_col] != "ok":
            log.warning("k2 = %s: %s (%s)", r[0], r[status_col], r[-1])
        elif r[status_col + 2] == 1:
            log.warning("k2 = %s: flux residual %s exceeds %g", r[0], r[status_col + 1], flux_tol)


def converge_table(cfg: RunConfig):
    """Rows of lowest-mode entries against N and whether |T11| differences decrease."""
    Ns = sorted(cfg.N)
    if len(Ns) < 2 or len(set(Ns)) != len(Ns):
        raise ConfigError("converge needs at least two distinct values of N")
    model = cfg.model(max(Ns))
    prep = prepare(cfg.duct(), model)
    per_N = {}
    for N in Ns:
        jobs = [(prep, c, N, model.options) for c in _chunks(cfg.k2, cfg.batch)]
        per_N[N] = _run(_chunk_task, jobs, cfg.workers)
    rows, monotone, failed = [], True, False
    for j, k2 in enumerate(cfg.k2):
        prev, diffs = None, []
        for N in Ns:
            S = per_N[N][j]
            if not isinstance(S, ScatteringSet):
                failed = True
                rows.append([_fmt(k2), N, S[0], "", "", "", "", "", "", "", S[1]])
                prev = None
                continue
            t, r = S.Tplus[0, 0], S.Rplus[0, 0]
            d = abs(abs(t) - prev) if prev is not None else None
            if d is not None:
                diffs.append(d)
            prob = S.transmission_probabilities()
            rows.append([_fmt(k2), N, "ok", _fmt(abs(t)), _fmt(np.angle(t)), _fmt(abs(r)),
                         _fmt(prob[0, 0]) if prob.size else "", _fmt(S.flux_residual()),
                         _fmt(d) if d is not None else "", "", ""])
            prev = abs(t)
        ok = _decreasing(diffs)
        monotone &= ok
        for row in rows[-len(Ns):]:
            row[9] = int(ok)
    cols = ["k2", "N", "status", "T11_abs", "T11_phase", "R11_abs", "T11_prob",
            "flux_residual", "T11_abs_diff", "decreasing", "error"]
    return cols, rows, monotone, failed


def _decreasing(diffs, floor: float = 1e-12) -> bool:
    """Strictly shrinking successive differences (differences at round-off level pass)."""
    return all(d1 < d0 or d1 <= floor for d0, d1 in zip(diffs[:-1], diffs[1:]))


def cmd_converge(cfg: RunConfig) -> int:
    """Lowest-mode entries against N with successive differences."""
    cols, rows, monotone, failed = converge_table(cfg)
    write_table(cfg.output, ["ductscatter converge", f"config {cfg.record()}"], cols, rows,
                [f"monotone {'yes' if monotone else 'no'}"])
    if not monotone:
        log.warning("successive |T11| differences are not monotonically decreasing")
    return EXIT_FAILED if failed or not monotone else EXIT_OK


def cmd_mufield(cfg: RunConfig) -> int:
    """Dump mu(u, v) on a lattice."""
    m = cfg.mufield
    sm = solve_strip_map(cfg.duct(), strip_width=cfg.strip_width)
    a = sm.a
    if "u_range" in m:
        u_range = tuple(float(x) for x in m["u_range"])
    else:
        lo, hi = sm.flat_extent(cfg.options().flat_tol)
        u_range = (lo - a, hi + a)
    v_range = tuple(float(x) for x in m["v_range"]) if m.get("v_range") else None
    nu, nv = int(m.get("nu", 201)), int(m.get("nv", 41))
    if nu < 1 or nv < 1 or not u_range[1] >= u_range[0]:
        raise ConfigError("mufield needs nu, nv >= 1 and an increasing u_range")
    source = m.get("source", "map")
    if source == "profile":
        src = build_profile(sm, L=cfg.L or 32, tol=cfg.options().flat_tol)
    elif source == "map":
        src = sm
    else:
        raise ConfigError("mufield source must be 'map' or 'profile'")
    u, v, vals = mu_grid(src, u_range, v_range, nu, nv)
    comment = (f"ductscatter mufield\nconfig {cfg.record()}\n"
               f"mu_left {sm.mu_left:.12g} mu_right {sm.mu_right:.12g}")
    if cfg.output in (None, "-"):
        sys.stdout.write(format_mu_grid(u, v, vals, comment))
    else:
        dump_mu_grid(cfg.output, u, v, vals, comment)
    return EXIT_OK


def cmd_compose(cfg: RunConfig) -> int:
    """Solve sub-tubes between cut points and compose them."""
    if len(cfg.N) != 1:
        raise ConfigError("compose takes a single N")
    if not cfg.cuts:
        raise ConfigError("compose needs at least one cut point")
    N = cfg.N[0]
    geom = cfg.duct()
    cuts = [complex(*c) if isinstance(c, (list, tuple)) else complex(c) for c in cfg.cuts]
    plan = plan_cascade(geom, cuts, cfg.options().flat_tol)
    a = plan.strip_width
    model = cfg.model(N)
    model = ModelConfig(N, model.L, a, model.splitter_scale, model.splitter_centre, model.options)
    preps = [prepare(p.geometry, model) for p in plan.pieces]
    jobs = [(plan, preps, c, model) for c in _chunks(cfg.k2, cfg.batch)]
    results = _run(_cascade_task, jobs, cfg.workers)
    mu_l, mu_r = preps[0].profile.mu_left, preps[-1].profile.mu_right
    pl, pr = _n_open(cfg.k2, mu_l, a, N), _n_open(cfg.k2, mu_r, a, N)
    rows = [solve_row(k, r, pl, pr, cfg.flux_tol) for k, r in zip(cfg.k2, results)]
    _report(rows, 1, cfg.flux_tol)
    itf = "; ".join(f"cut {i}: width {x.width:.12g} mu {x.mu:.12g} clearance {x.clearance:.6g}"
                    for i, x in enumerate(plan.interfaces))
    write_table(cfg.output, ["ductscatter compose", f"config {cfg.record()}", f"interfaces {itf}"],
                solve_columns(pl, pr), rows)
    return EXIT_FAILED if any(r[1] != "ok" for r in rows) else EXIT_OK


COMMANDS = {"solve": cmd_solve, "converge": cmd_converge, "mufield": cmd_mufield,
            "compose": cmd_compose}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ductscatter",
                                description="Scattering in asymptotically straight 2-D ducts.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        s = sub.add_parser(name, help=fn.__doc__)
        s.add_argument("config", help="JSON run configuration")
        s.add_argument("-o", "--output", help="output file ('-' for stdout)")
        s.add_argument("-w", "--workers", type=int, help="worker processes")
        s.add_argument("-v", "--verbose", action="count", default=0)
        s.add_argument("-q", "--quiet", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.ERROR if args.quiet else [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, {"output": args.output, "workers": args.workers})
        return COMMANDS[args.command](cfg)
    except (ConfigError, GeometryError, MapSolveError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except CompositionError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

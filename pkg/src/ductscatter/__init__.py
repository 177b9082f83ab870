"""Wave scattering in asymptotically straight two-dimensional ducts.

The duct is mapped conformally onto a strip, the transformed equation is
projected on a sine basis, and the scattering operators are integrated as
matrix Riccati equations. Sub-tube results compose with the star product.
"""
from __future__ import annotations

from .building_block import (CascadePlan, CompositionError, compose_all, partition_geometry,
                             split_profile, star_compose)
from .coupled_mode import SplitterConfig, assemble_B2, split_blocks
from .geometry import (DuctGeometry, GeometryError, corner_duct, load_geometry, round_corners,
                       s_bend, step_duct, uniform_duct)
from .imbedding import (BoundStateError, default_splitter, illposedness_demo,
                        integrate_scattering, integrate_sweep)
from .modal_basis import DispersionSpec, ModeCoefficients, axial_wavenumbers, decompose, synthesize
from .oracles import direct_bvp_solve, mode_match_step
from .pipeline import ModelConfig, move_planes, plan_cascade, prepare, solve_cascade, solve_chunk
from .profile import RefractiveProfile, build_profile
from .scattering import ScatteringSet, SolveOptions, flat_propagate
from .stripmap import StripMap, solve_strip_map

__version__ = "0.1.0"

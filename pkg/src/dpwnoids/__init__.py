"""Constant mean curvature n-noids from minimal n-noids, loop-group style.

The pipeline: build (or load) minimal n-noid data, check its periods and
non-degeneracy, continue the monodromy problem in the deformation parameter,
then evaluate the immersion, meshes and end diagnostics.
"""

__version__ = "0.1.0"

from .loops import LaurentLoop, LoopMatrix, Su2Vector
from .weierstrass import NoidParams, PeriodTable, jorge_meeks, nondegeneracy_rank, periods
from .iwasawa import iwasawa, normal_point, pos_split, sym_point, uni_split
from .potential import (
    DelaunayPotential,
    NnoidPotential,
    gauge_apply,
    initial_condition,
    regularity_gauge,
    rs_solve,
    xi_delaunay,
    xi_nnoid,
)
from .transport import PathSpec, integrate, m_tilde, m_tilde_at_zero, monodromy
from .solver import ContinuationConfig, MonodromyProblem, ResidualVector, residual, solve
from .immersion import AnnulusPatch, Surface, SurfaceMesh, mesh
from .analysis import blowup_error, blowup_weierstrass, delaunay_axis, end_alpha, end_report
from .artifacts import RunArtifact, RunConfig

__all__ = [
    "LaurentLoop", "LoopMatrix", "Su2Vector",
    "NoidParams", "PeriodTable", "jorge_meeks", "nondegeneracy_rank", "periods",
    "iwasawa", "normal_point", "pos_split", "sym_point", "uni_split",
    "DelaunayPotential", "NnoidPotential", "gauge_apply", "initial_condition",
    "regularity_gauge", "rs_solve", "xi_delaunay", "xi_nnoid",
    "PathSpec", "integrate", "m_tilde", "m_tilde_at_zero", "monodromy",
    "ContinuationConfig", "MonodromyProblem", "ResidualVector", "residual", "solve",
    "AnnulusPatch", "Surface", "SurfaceMesh", "mesh",
    "blowup_error", "blowup_weierstrass", "delaunay_axis", "end_alpha", "end_report",
    "RunArtifact", "RunConfig",
]

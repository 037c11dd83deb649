"""Upwind discontinuous Galerkin solver for linear advection-reaction,
with a pathline toolkit for residence times and growth-rate weights."""

__version__ = "0.1.0"

from .basis import Basis, DGField, evaluate, l2_project, load_field, make_basis, \
    make_quadrature, n_modes, save_field
from .catalog import CATALOG, get_problem, problem_names
from .errmetrics import ErrorSeries, FaceNorms, accumulate, eoc, eoc_with_flags, \
    face_norms, l2_error, smooth_evaluator
from .expressions import Expression, ExpressionError, parse_expression
from .flow import Box, FlowProblem, FlowValidation, Interval
from .mesh import Face, InflowSignChangeWarning, Mesh, MeshError, MeshFormatError, \
    build_interval_mesh, build_triangle_mesh, classify_inflow_boundary, load_mesh, \
    save_mesh
from .operator import EnergyRate, SemiDiscreteRHS
from .pathlines import CharacteristicSolution, LinearTimeMu, LipschitzReport, \
    MarginReport, MuField, PathlineOrigin, ResidenceReport, SamplingSpec, \
    TraceBatch, ZeroMu, build_mu, ellipticity_margin, exact_solution, \
    lipschitz_estimates, mu1, residence_time, trace_backward, \
    trace_backward_batch, trace_forward, trace_forward_batch
from .timestepping import EvolveConfig, InstabilityError, cfl_dt, evolve, step

__all__ = [
    "__version__",
    "Basis", "DGField", "evaluate", "l2_project", "load_field", "make_basis",
    "make_quadrature", "n_modes", "save_field",
    "CATALOG", "get_problem", "problem_names",
    "ErrorSeries", "FaceNorms", "accumulate", "eoc", "eoc_with_flags",
    "face_norms", "l2_error", "smooth_evaluator",
    "Expression", "ExpressionError", "parse_expression",
    "Box", "FlowProblem", "FlowValidation", "Interval",
    "Face", "InflowSignChangeWarning", "Mesh", "MeshError", "MeshFormatError",
    "build_interval_mesh", "build_triangle_mesh", "classify_inflow_boundary",
    "load_mesh", "save_mesh",
    "EnergyRate", "SemiDiscreteRHS",
    "CharacteristicSolution", "LinearTimeMu", "LipschitzReport", "MarginReport",
    "MuField", "PathlineOrigin", "ResidenceReport", "SamplingSpec", "TraceBatch",
    "ZeroMu", "build_mu", "ellipticity_margin", "exact_solution",
    "lipschitz_estimates", "mu1", "residence_time", "trace_backward",
    "trace_backward_batch", "trace_forward", "trace_forward_batch",
    "EvolveConfig", "InstabilityError", "cfl_dt", "evolve", "step",
]

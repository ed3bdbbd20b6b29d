"""A posteriori defeaturing error estimation and adaptive feature insertion in 2D."""
from . import adaptive, errors, estimator, fem, geometry, mesh, pipeline, scenario
from .adaptive import AdaptiveConfig, mark
from .estimator import EstimatorReport, report
from .fem import BoundaryData, ProblemKind, solve
from .geometry import Feature, GeometryModel, build_model, unit_square
from .mesh import Sizing, mesh_model
from .scenario import Scenario, load_scenario, parse_scenario

__version__ = "0.1.0"

"""eincheck: numerical conformal geometry in four dimensions.

Evaluates the full tower of metric concomitants (Levi-Civita curvature,
Weyl/Schouten, the Lambda covector, the conformally invariant connection and
its curvature, the Bach tensor) at sample points via exact truncated-Taylor
arithmetic, and decides whether a metric is locally conformal to an Einstein
space.
"""

from .curvature import GeometryFrame, MetricAtPoint, geometry_frame, metric_from_tensor
from .einstein import MetricSpec, Report, decide
from .expr import ScalarExpr, eval_on_jets, parse
from .jets import Jet4, coordinate_seeds, seed_coordinate
from .tensors import JetTensor

__version__ = "0.1.0"

__all__ = [
    "GeometryFrame",
    "Jet4",
    "JetTensor",
    "MetricAtPoint",
    "MetricSpec",
    "Report",
    "ScalarExpr",
    "coordinate_seeds",
    "decide",
    "eval_on_jets",
    "geometry_frame",
    "metric_from_tensor",
    "parse",
    "seed_coordinate",
    "__version__",
]

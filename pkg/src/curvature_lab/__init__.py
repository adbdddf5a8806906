"""Curvature signatures of metric spaces, at large scale and at a marked point."""

__version__ = "0.1.0"

from .convexity import (UNBOUNDED, PreconditionError, busemann_defect_profile,
                        check_finite_busemann, midpoint_defect, positive_part,
                        search_infinitesimal_midpoint)
from .estimators import FourPointScanner, LiminfEstimator, PretangentTransformer
from .four_point import (QuadrupleDefectReport, find_violation, lp_defect, ptolemy_defect,
                         quadrilateral_defect, scan_finite, scan_sampled)
from .infinitesimal import A1, A2, A3, LiminfEstimate, ScaleSchedule, estimate_liminf, evaluate
from .metric_core import (FiniteMetricSpace, InputError, MetricOracle, ValidationReport,
                          load_finite_space, validate_metric)
from .pretangent import (CertificateError, NormalizingSequence, PointSequence,
                         PretangentApproximation, analyze_pretangent, build_pretangent,
                         build_self_stable_family, metric_identify, restrict_to_subsequence)
from .spaces import make_oracle, parse_space_spec
from .workflows import THEOREMS, theorem_workflow

__all__ = [name for name in dir() if not name.startswith("_")]

"""Dual varieties of spherical and hyperbolic submanifolds and the duality
of their second fundamental forms."""

__version__ = "0.1.0"

from .catalog import CATALOG, builtin, load_dsl, parse_builtin_spec
from .curvature import (bidual_distance, decomposition_report, first_form, form_on_basis,
                        inverse_duality, radical, second_form)
from .dualizer import (antipode, dual_jet2, dual_pairs, dual_point, fiber_chart,
                       generic_dual_dimension, normal_frame, sample_dual, trace_dual)
from .expr import differentiate, parse
from .metric import (MetricSpace, Signature, SubspaceBasis, complement_within, inner, intersect,
                     orthonormalize, project)
from .patch import Jet2, ParamPatch, Sheet, eval_jet2, fd_crosscheck, tangent_basis

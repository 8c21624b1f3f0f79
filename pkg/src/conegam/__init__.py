"""
Shape-constrained generalized additive models fitted by cone projection.

Components are monotone, convex or concave (smooth regression splines or
unsmoothed orderings, including tree and umbrella orders), combined with
parametric covariates in Gaussian, Poisson or binomial models.  A separate
engine fits bivariate surfaces monotone in both predictors.
"""

from .cone import (ConeProjectionResult, ConstraintCone, GeneratorCone,
                   brute_force_projection, project_constraint_cone,
                   project_generator_cone)
from .exceptions import ConeGamError, ConvergenceError, InvalidInputError, SizeError
from .family import Binomial, Family, Gaussian, Poisson, get_family
from .formula import FormulaError, ModelSpec, Term, parse_model_spec
from .gam import (CompositeCone, FitResult, assemble_cone, component_curve,
                  fit_gaussian, fit_irls, line_search_segment)
from .inference import (CicResult, CoefTable, cic_formula, coef_table, deviances,
                        estimate_sigma2, sigma2_formula, simulate_cic)
from .model import ModelFit, export_surface_grid, fit_model, read_csv, summarize
from .ordinal import (OrderingSpec, build_ordinal_component, edges_from_constraints,
                      ordinal_constraint_matrices)
from .splines import (BasisSet, ConeComponent, KnotSequence, ShapeSpec,
                      build_shape_component, default_knots, make_cspline_basis,
                      make_ispline_basis)
from .wps import (WpsDesign, WpsFit, fit_wps, gcv_score, make_wps_bases,
                  select_lambda, wps_constraint_matrix)

__version__ = "0.1.0"

__all__ = [
    "BasisSet", "Binomial", "CicResult", "CoefTable", "CompositeCone",
    "ConeComponent", "ConeGamError", "ConeProjectionResult", "ConstraintCone",
    "ConvergenceError", "Family", "FitResult", "FormulaError", "Gaussian",
    "GeneratorCone", "InvalidInputError", "KnotSequence", "ModelFit",
    "ModelSpec", "OrderingSpec", "Poisson", "ShapeSpec", "SizeError", "Term",
    "WpsDesign", "WpsFit", "assemble_cone", "brute_force_projection",
    "build_ordinal_component", "build_shape_component", "cic_formula",
    "coef_table", "component_curve", "default_knots", "deviances",
    "edges_from_constraints", "estimate_sigma2", "export_surface_grid",
    "fit_gaussian", "fit_irls", "fit_model", "fit_wps", "gcv_score",
    "get_family", "line_search_segment", "make_cspline_basis",
    "make_ispline_basis", "make_wps_bases", "ordinal_constraint_matrices",
    "parse_model_spec", "project_constraint_cone", "project_generator_cone",
    "read_csv", "select_lambda", "sigma2_formula", "simulate_cic", "summarize",
    "wps_constraint_matrix",
]

"""Sample-average drift optimization for Skorokhod-regulated Brownian paths.

The pipeline is: sample driving paths (:mod:`driftopt.paths`), regulate
them (:mod:`driftopt.regulator`), differentiate the pathwise cost along
drift directions (:mod:`driftopt.sensitivity`), and run mirror descent over
a finite drift basis (:mod:`driftopt.optimizer`). :mod:`driftopt.allocator`
splits a compute budget and :mod:`driftopt.oracles` holds brute-force
checks and empirical rate studies.
"""
from ._errors import (ConditioningError, DriftOptError, InvalidArgument, NumericOverflow,
                      OptimizationError, UnsupportedCost, WrongMethod)
from .allocator import (BudgetAllocation, ErrorModel, allocate_closed_form, allocate_numeric,
                        predict_bound)
from .costs import (CostFunctionalSpec, linear_holding, make_cost, pathwise_cost, quadratic,
                    saa_objective, terminal_tracking)
from .optimizer import KbarMode, MirrorDescentConfig, OptimizerTrace, mirror_descent
from .paths import (DiscretePath, GridSpec, PathBatch, PathBatchSpec, Scheme, generate_paths,
                    make_grid)
from .regulator import RegulatedOutput, lipschitz_probe, skorokhod_regulate
from .sensitivity import GradientEstimate, d_cost, d_gamma, saa_gradient
from .subspace import (BasisKind, BasisSpec, DriftFunction, FeasibleSetSpec, evaluate_basis,
                       evaluate_drift, project_feasible, projection_error_curve)

__version__ = "0.1.0"

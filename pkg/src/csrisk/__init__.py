"""Estimation of sub-distribution functions from current status data with competing risks.

The naive (per-cause isotonic) estimators, the nonparametric MLE with an
optimality certificate, simulation of the pointwise limit processes, and a
Monte-Carlo harness comparing the estimators.
"""

from .dataset import Dataset, read_dataset, write_dataset
from .estimators import (SubDistEstimate, loglik, loglik_marginal, naive, naive_component, read_estimate,
                         scale_estimate, scaled_naive, truncate_estimate, truncated_naive, unique_support,
                         write_estimate)
from .exceptions import DomainError, InfeasibleEstimateError, InvalidInputError, NonConvergenceError
from .kernels import BACKEND
from .limit import (GridPaths, LimitFit, LocalParams, covariance, diagnostics, fixed_point_map, mle_limit,
                    naive_limit, sample_paths, symmetric_grid, theorem_conditions)
from .mle import directional_derivatives, kkt_residual, mle
from .simulation import (MSETable, ModelSpec, TrueModelEstimate, gen_data, local_params_at, localized_processes,
                         mse_experiment, true_subdist)
from .stepfn import Diagram, PiecewiseLinear, StepFunction, convex_minorant, cusum, pava, right_slopes

__version__ = "0.1.0"

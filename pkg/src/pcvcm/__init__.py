"""Shrinkage priors and exact grid inference for varying-coefficient models.

The package covers the full workflow: dependence-structure construction
(`pcvcm.gmrf`), model-to-base distances (`pcvcm.distance`), the prior
families and comparison priors (`pcvcm.pcpriors`), (U, a) scaling
(`pcvcm.scaling`), the grid posterior engine (`pcvcm.inference`) and a
CLI (`pcvcm.cli`, installed as ``pcvcm``).
"""

from .distance import (DistanceResult, distance_ar1, distance_exchangeable,
                       distance_precision, kld_exchangeable_closed,
                       kld_intrinsic, kld_mvn)
from .gmrf import (AdjacencyGraph, IgmrfStructure, build_ar1,
                   build_exchangeable, build_icar_structure, build_matern,
                   build_rw_structure, generalized_log_det, matern_corr,
                   path_graph, read_edge_list, scale_structure)
from .inference import (GridPosterior, VcmDataset, VcmModelSpec,
                        compare_priors, fit_grid, log_marginal_likelihood,
                        simulate_scenario)
from .kernels import BACKEND as KERNEL_BACKEND
from .pcpriors import (Ar1CorrPrior, Ar1ReferencePrior, ExchCorrPrior,
                       Gumbel2PrecisionPrior, MaternJointPrior,
                       MaternRangePrior, TruncatedExponential,
                       UniformCorrPrior, to_distance_scale)
from .scaling import (FeasibilityError, SolvedRate, rule_of_thumb_check,
                      solve_ar1, solve_exchangeable, solve_matern,
                      solve_precision)

__version__ = "0.1.0"

"""Computable ergodicity certificates for discretized Markov kernels.

Measures and weight functions live on finite grids; transport distances are
solved exactly; drift and minorization certificates feed explicit
contraction bounds that are checked against exhaustively measured Dobrushin
coefficients.
"""

__version__ = "0.1.0"

from .measures import (Domain, Grid, DiscreteMeasure, WeightFunction,
                       open_interval, half_line_truncated, box, build_grid,
                       discretize_density, rescale_weight, weighted_norm_diff,
                       total_variation, save_measure, load_measure)
from .semidistance import (CostFunction, discrete_metric, weighted_discrete,
                           rho_family, kappa_interp, additive_cost, exp_cost,
                           power_metric, boundary_metric, validate_cost)
from .transport import (TransportPlan, TransportResult, kantorovich,
                        kantorovich_bruteforce, distance, vnorm_closed_form,
                        tv_closed_form, osc_V, dual_gap_check)
from .kernels import (KernelMatrix, left_action, right_action, op_norm_V,
                      op_norm_VW, build_unit_interval_kernel,
                      build_arcsine_kernel, build_halfline_kernel, IrfModel,
                      build_irf_kernel, build_langevin_kernel, GibbsModel,
                      GibbsPair, build_gibbs_pair, ModelBundle, build_model,
                      MODEL_DEFAULTS, save_kernel_csv)
from .certify import (DriftCertificate, PairDriftCertificates,
                      MinorizationCertificate, LocalContractionCertificate,
                      certify_drift, certify_drift_pair, minorization,
                      minorization_sweep, local_contraction, irf_lyapunov,
                      generator_drift_check, gibbs_minorization)
from .contraction import (ContractionEstimate, dobrushin,
                          dobrushin_measure_check, BoundReport,
                          theorem1_bounds, comparison_suite, decay_curve,
                          invariant_measure, continuous_time_rate,
                          wasserstein_from_vnorm, fixed_point)
from .cli import ExperimentConfig, RunReport, run_experiment, list_models

__all__ = [
    "__version__",
    # measures
    "Domain", "Grid", "DiscreteMeasure", "WeightFunction", "open_interval",
    "half_line_truncated", "box", "build_grid", "discretize_density",
    "rescale_weight", "weighted_norm_diff", "total_variation", "save_measure",
    "load_measure",
    # semidistance
    "CostFunction", "discrete_metric", "weighted_discrete", "rho_family",
    "kappa_interp", "additive_cost", "exp_cost", "power_metric",
    "boundary_metric", "validate_cost",
    # transport
    "TransportPlan", "TransportResult", "kantorovich",
    "kantorovich_bruteforce", "distance", "vnorm_closed_form",
    "tv_closed_form", "osc_V", "dual_gap_check",
    # kernels
    "KernelMatrix", "left_action", "right_action", "op_norm_V", "op_norm_VW",
    "build_unit_interval_kernel", "build_arcsine_kernel",
    "build_halfline_kernel", "IrfModel", "build_irf_kernel",
    "build_langevin_kernel", "GibbsModel", "GibbsPair", "build_gibbs_pair",
    "ModelBundle", "build_model", "MODEL_DEFAULTS", "save_kernel_csv",
    # certify
    "DriftCertificate", "PairDriftCertificates", "MinorizationCertificate",
    "LocalContractionCertificate", "certify_drift", "certify_drift_pair",
    "minorization", "minorization_sweep", "local_contraction", "irf_lyapunov",
    "generator_drift_check", "gibbs_minorization",
    # contraction
    "ContractionEstimate", "dobrushin", "dobrushin_measure_check",
    "BoundReport", "theorem1_bounds", "comparison_suite", "decay_curve",
    "invariant_measure", "continuous_time_rate", "wasserstein_from_vnorm",
    "fixed_point",
    # cli
    "ExperimentConfig", "RunReport", "run_experiment", "list_models",
]

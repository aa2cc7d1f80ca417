"""Finite mixture estimation with unknown support over a candidate grid.

The mixing distribution's support is chosen by maximizing a
permutation-averaged recursive marginal likelihood with simulated
annealing over subsets of a finite grid; a Dirichlet-prior marginal
likelihood (exact or by sequential imputation) is available as a
validation oracle.
"""

from .dirichlet import (
    DirichletSpec,
    default_alpha0,
    exact_marginal,
    exact_posterior_mean,
    polya_one_step,
    pr_posterior_l1_gap,
    sequential_imputation_marginal,
)
from .estimator import MixtureSupportEstimator
from .harness import (
    ComplexityTable,
    ExperimentSpec,
    MixtureModelSpec,
    default_gaussian_grid,
    default_poisson_grid,
    density_curve,
    galaxy_velocities,
    load_observations,
    run_experiment,
    run_fit,
    simulate,
)
from .kernels import (
    GAUSS_LOC,
    GAUSS_LOCSCALE,
    POISSON,
    Grid,
    KernelSpec,
    SupportPoint,
    kernel_density,
    log_kernel_density,
    log_kernel_matrix,
    mixture_density,
    mixture_log_density,
    validate_observations,
)
from .recursion import (
    DEFAULT_GAMMA,
    DegenerateMixtureError,
    PermutationSet,
    PRConfig,
    kn_diagnostic,
    log_marginal_averaged,
    log_marginal_one_order,
    pr_update,
    pr_weights,
)
from .search import (
    AnnealConfig,
    BinaryMask,
    FitResult,
    LevelMask,
    MarginalObjective,
    SupportMask,
    acceptance_prob,
    anneal,
    binary_selection_weights,
    exhaustive_binary_argmax,
    locscale_selection_weights,
    penalty,
    propose_binary,
    propose_locscale,
    temperature,
)

__version__ = "0.1.0"

__all__ = [
    "AnnealConfig",
    "BinaryMask",
    "ComplexityTable",
    "DEFAULT_GAMMA",
    "DegenerateMixtureError",
    "DirichletSpec",
    "ExperimentSpec",
    "FitResult",
    "GAUSS_LOC",
    "GAUSS_LOCSCALE",
    "Grid",
    "KernelSpec",
    "LevelMask",
    "MarginalObjective",
    "MixtureModelSpec",
    "MixtureSupportEstimator",
    "POISSON",
    "PRConfig",
    "PermutationSet",
    "SupportMask",
    "SupportPoint",
    "acceptance_prob",
    "anneal",
    "binary_selection_weights",
    "default_alpha0",
    "default_gaussian_grid",
    "default_poisson_grid",
    "density_curve",
    "exact_marginal",
    "exact_posterior_mean",
    "exhaustive_binary_argmax",
    "galaxy_velocities",
    "kernel_density",
    "kn_diagnostic",
    "load_observations",
    "locscale_selection_weights",
    "log_kernel_density",
    "log_kernel_matrix",
    "log_marginal_averaged",
    "log_marginal_one_order",
    "mixture_density",
    "mixture_log_density",
    "penalty",
    "polya_one_step",
    "pr_posterior_l1_gap",
    "pr_update",
    "pr_weights",
    "propose_binary",
    "propose_locscale",
    "run_experiment",
    "run_fit",
    "sequential_imputation_marginal",
    "simulate",
    "temperature",
    "validate_observations",
]

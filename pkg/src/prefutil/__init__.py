"""Preference-based utility function learning and black-box optimization."""

from .utility import (
    MonotoneTerm,
    SpaceKind,
    UtilitySpec,
    eval_aggregate,
    eval_monotone_term,
    load_spec,
    normalize_output,
    normalize_weights,
    posterior_mean_utility,
    save_spec,
)
from .spaces import (
    SpaceConfig,
    adaptable_space,
    decode,
    informed_space,
    linear_space,
    make_space,
    transform_to_unconstrained,
)
from .preference import (
    Example,
    Preference,
    PreferenceModel,
    fulfillment_probability,
    generate_preferences,
    negative_log_likelihood,
    nll_gradient,
)
from .sampler import (
    ChainConfig,
    PosteriorSamples,
    estimate_dist,
    estimate_max,
    estimate_mean,
    nuts_sample,
    potential_scale_reduction,
    run_until_converged,
)
from .nuts import SamplerHealthError
from .problems import (
    ProblemDef,
    expert_score,
    generate_biased_examples,
    generate_random_examples,
    get_problem,
    sample_feasible,
)
from .evaluation import (
    ExperimentConfig,
    kendall_tau,
    ranking_similarity,
    run_similarity_experiment,
)
from .bayesopt import (
    BoRunRecord,
    GpHyperConfig,
    GpModel,
    acquisition_ei,
    bo_optimize,
    gp_fit,
    manual_upper_bound,
)
from .estimator import UtilityFunctionLearner

__version__ = "0.1.0"

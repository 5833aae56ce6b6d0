"""Scikit-learn style front end for preference-based utility learning."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .preference import Preference, PreferenceModel
from .sampler import ChainConfig, estimate_dist, estimate_max, estimate_mean, run_until_converged
from .spaces import make_space
from .utility import eval_aggregate


class UtilityFunctionLearner(BaseEstimator):
    """Learns a posterior over parametric utility functions from preferences.

    Parameters follow scikit-learn conventions (stored verbatim,
    validated in ``fit``). ``fit`` takes the example outputs ``Y`` of
    shape (n, k) and pairwise preferences as an iterable of
    (preferred_index, dominated_index) pairs; ``predict`` scores output
    vectors with the selected posterior reduction.

    Parameters
    ----------
    space : "linear", "adaptable" or "informed".
    output_ranges : (k, 2) saturation/normalization ranges; inferred from
        the training outputs when None.
    truncated : per-output flags for half-range expert truncation, only
        consumed by the informed space.
    estimator : "dist" (posterior mean utility), "mean" or "max".
    """

    def __init__(
        self,
        space: str = "informed",
        output_ranges=None,
        truncated=None,
        estimator: str = "dist",
        n_chains: int = 4,
        psr_threshold: float = 1.1,
        max_total_samples: int = 100_000,
        warmup_fraction: float = 0.5,
        target_accept: float = 0.8,
        max_tree_depth: int = 10,
        round_size: int = 1000,
        dist_size: int = 20_000,
        include_prior: bool = True,
        random_state: int = 0,
    ):
        self.space = space
        self.output_ranges = output_ranges
        self.truncated = truncated
        self.estimator = estimator
        self.n_chains = n_chains
        self.psr_threshold = psr_threshold
        self.max_total_samples = max_total_samples
        self.warmup_fraction = warmup_fraction
        self.target_accept = target_accept
        self.max_tree_depth = max_tree_depth
        self.round_size = round_size
        self.dist_size = dist_size
        self.include_prior = include_prior
        self.random_state = random_state

    def fit(self, Y, preferences):
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if self.estimator not in ("max", "mean", "dist"):
            raise ValueError(f"unknown estimator {self.estimator!r}")
        ranges = self.output_ranges
        if ranges is None:
            ranges = np.stack([Y.min(axis=0), Y.max(axis=0)], axis=1)
        self.space_ = make_space(self.space, ranges, self.truncated)
        prefs = [p if isinstance(p, Preference) else Preference(int(p[0]), int(p[1]))
                 for p in preferences]
        examples = [_OutputOnly(y) for y in Y]
        self.model_ = PreferenceModel(
            self.space_, examples, prefs, include_prior=self.include_prior
        )
        config = ChainConfig(
            n_chains=self.n_chains,
            psr_threshold=self.psr_threshold,
            max_total_samples=self.max_total_samples,
            warmup_fraction=self.warmup_fraction,
            target_accept=self.target_accept,
            max_tree_depth=self.max_tree_depth,
            round_size=self.round_size,
            seed=self.random_state,
        )
        self.posterior_ = run_until_converged(
            self.model_.logdensity_and_grad, self.space_, config
        )
        self.converged_ = self.posterior_.converged
        if self.estimator == "max":
            self.spec_ = estimate_max(self.posterior_, self.model_)
        elif self.estimator == "mean":
            self.spec_ = estimate_mean(self.posterior_)
        else:
            self.spec_ = None
            self.dist_ = estimate_dist(
                self.posterior_, k=self.dist_size, seed=self.random_state
            )
        return self

    def predict(self, Y):
        """Utility score of each output vector under the learned function."""
        if not hasattr(self, "posterior_"):
            raise NotFittedError("call fit before predict")
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if self.estimator == "dist":
            return self.dist_.utility_mean(Y)
        return eval_aggregate(self.spec_, Y)

    def score(self, Y, expert_scores):
        """Kendall tau between predicted utilities and reference scores."""
        from .evaluation import kendall_tau

        return kendall_tau(expert_scores, self.predict(Y))


class _OutputOnly:
    """Adapter giving PreferenceModel the .y it needs for raw output arrays."""

    __slots__ = ("y",)

    def __init__(self, y):
        self.y = np.asarray(y, dtype=float)

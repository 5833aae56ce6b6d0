"""Ranking similarity between surrogate and expert, and the trial sweep.

Kendall's tau-a over large random samples is the ranking error measure;
pairs tied in either score vector count as neither concordant nor
discordant. The experiment runner reproduces the similarity tables:
generate examples, derive preferences, learn the posterior, reduce it
with each estimator, and score against the hidden expert.
"""

from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass, field, asdict

import numpy as np

from .preference import PreferenceModel, generate_preferences
from .problems import (
    ProblemDef,
    expert_score,
    generate_biased_examples,
    generate_random_examples,
    get_problem,
    sample_feasible,
)
from .sampler import (
    ChainConfig,
    estimate_dist,
    estimate_max,
    estimate_mean,
    run_until_converged,
)
from .spaces import make_space
from .utility import eval_aggregate

log = logging.getLogger(__name__)


def kendall_tau(scores_a, scores_b) -> float:
    """Tau-a rank correlation in [-1, 1], O(n log n).

    (concordant - discordant) / (n(n-1)/2); ties in either vector are
    neither concordant nor discordant.
    """
    a = np.asarray(scores_a, dtype=float).ravel()
    b = np.asarray(scores_b, dtype=float).ravel()
    if a.size != b.size:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    n = a.size
    if n < 2:
        raise ValueError("need at least two scores")
    n0 = n * (n - 1) // 2
    order = np.lexsort((b, a))
    a_s, b_s = a[order], b[order]
    discordant = _count_inversions(b_s.tolist())
    tie_a = _tie_pairs(a_s)
    tie_b = _tie_pairs(np.sort(b))
    tie_ab = _joint_tie_pairs(a_s, b_s)
    concordant = n0 - tie_a - (tie_b - tie_ab) - discordant
    return (concordant - discordant) / n0


def _count_inversions(seq: list) -> int:
    """Strict inversions (left > right) counted during merge sort."""
    def sort(lst):
        if len(lst) <= 1:
            return lst, 0
        mid = len(lst) // 2
        left, cl = sort(lst[:mid])
        right, cr = sort(lst[mid:])
        merged = []
        inv = cl + cr
        i = j = 0
        while i < len(left) and j < len(right):
            if right[j] < left[i]:
                inv += len(left) - i
                merged.append(right[j])
                j += 1
            else:
                merged.append(left[i])
                i += 1
        merged.extend(left[i:])
        merged.extend(right[j:])
        return merged, inv

    return sort(seq)[1]


def _tie_pairs(sorted_arr) -> int:
    _, counts = np.unique(sorted_arr, return_counts=True)
    return int(np.sum(counts * (counts - 1) // 2))


def _joint_tie_pairs(a_s, b_s) -> int:
    pairs = np.stack([a_s, b_s], axis=1)
    _, counts = np.unique(pairs, axis=0, return_counts=True)
    return int(np.sum(counts * (counts - 1) // 2))


def ranking_similarity(problem: ProblemDef, surrogate, n_eval: int = 10_000,
                       seed: int = 0, expert=None) -> float:
    """Kendall tau between expert and surrogate over random feasible inputs.

    Evaluation covers the whole input space (no fixed variant value).
    ``surrogate`` maps an (n, k) output array to n scores; ``expert``
    defaults to the problem's hidden expert.
    """
    if n_eval < 2:
        raise ValueError("need at least two evaluation samples")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    _, Y, _ = sample_feasible(problem, n_eval, rng)
    e_scores = expert(Y) if expert is not None else expert_score(problem, Y)
    s_scores = np.asarray(surrogate(Y), dtype=float)
    return kendall_tau(e_scores, s_scores)


# --- experiment sweep ----------------------------------------------------

@dataclass
class ExperimentConfig:
    problems: tuple = ("ZDT3",)
    spaces: tuple = ("linear", "adaptable", "informed")
    estimators: tuple = ("max", "mean", "dist")
    n_examples: tuple = (10, 20, 50)
    sample_mode: str = "random"
    trials: int = 5
    n_eval: int = 2000
    dist_size: int = 20_000
    pool_size: int = 1000
    seed: int = 0
    include_prior: bool = True
    mcmc: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.sample_mode not in ("random", "biased"):
            raise ValueError(f"unknown sample mode {self.sample_mode!r}")
        unknown = set(self.estimators) - {"max", "mean", "dist"}
        if unknown:
            raise ValueError(f"unknown estimators: {sorted(unknown)}")
        if self.trials < 1:
            raise ValueError("trials must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


def _derive_seed(master: int, *path: int) -> int:
    return int(np.random.SeedSequence([int(master), *map(int, path)]).generate_state(1)[0])


def learn_posterior(problem: ProblemDef, space_kind: str, examples, *,
                    chain_config: ChainConfig, include_prior: bool = True):
    """Examples -> preferences -> posterior, for one cell.

    Infeasible examples are dropped before preference generation. Returns
    (posterior, model); raises if fewer than two feasible examples remain.
    """
    feasible = [ex for ex in examples if ex.feasible]
    if len(feasible) < 2:
        raise ValueError("fewer than two feasible examples")
    prefs = generate_preferences(
        feasible, lambda y: expert_score(problem, np.atleast_2d(y))[0]
    )
    space = make_space(space_kind, problem.output_ranges, problem.truncated)
    model = PreferenceModel(space, feasible, prefs, include_prior=include_prior)
    posterior = run_until_converged(model.logdensity_and_grad, space, chain_config)
    return posterior, model


def surrogate_scorers(posterior, model, estimators, dist_size: int = 20_000,
                      dist_seed: int = 0) -> dict:
    """Output-array scorer per requested estimator name."""
    scorers = {}
    for name in estimators:
        if name == "max":
            spec = estimate_max(posterior, model)
            scorers[name] = _spec_scorer(spec)
        elif name == "mean":
            spec = estimate_mean(posterior)
            scorers[name] = _spec_scorer(spec)
        elif name == "dist":
            sub = estimate_dist(posterior, k=dist_size, seed=dist_seed)
            scorers[name] = sub.utility_mean
        else:
            raise ValueError(f"unknown estimator {name!r}")
    return scorers


def _spec_scorer(spec):
    return lambda Y: eval_aggregate(spec, Y)


def run_similarity_experiment(config: ExperimentConfig, on_cell_done=None) -> list[dict]:
    """Full sweep behind the similarity tables; one row per estimator/trial.

    Failed cells are recorded with a NaN tau and the error message, never
    aborting the sweep.
    """
    rows = []
    cells = [
        (pi, si, ni, p_name, s_name, n)
        for pi, p_name in enumerate(config.problems)
        for si, s_name in enumerate(config.spaces)
        for ni, n in enumerate(config.n_examples)
    ]
    for pi, si, ni, p_name, s_name, n in cells:
        problem = get_problem(p_name)
        cell_index = (pi * len(config.spaces) + si) * len(config.n_examples) + ni
        for trial in range(config.trials):
            rows.extend(
                _run_cell(config, problem, s_name, n, cell_index, trial)
            )
            if on_cell_done is not None:
                on_cell_done(p_name, s_name, n, trial)
    return rows


def _run_cell(config: ExperimentConfig, problem: ProblemDef, space_kind: str,
              n: int, cell_index: int, trial: int) -> list[dict]:
    base = {
        "problem": problem.name,
        "space": space_kind,
        "N": n,
        "sample_mode": config.sample_mode,
        "trial": trial,
    }
    data_seed = _derive_seed(config.seed, cell_index, trial, 0)
    chain_seed = _derive_seed(config.seed, cell_index, trial, 1)
    dist_seed = _derive_seed(config.seed, cell_index, trial, 2)
    # evaluation sample is shared across spaces/estimators within a trial
    eval_seed = _derive_seed(config.seed, zlib.crc32(problem.name.encode()), trial, 3)
    try:
        if config.sample_mode == "biased":
            examples = generate_biased_examples(
                problem, n, pool_size=config.pool_size, seed=data_seed
            )
        else:
            examples = generate_random_examples(problem, n, seed=data_seed)
        chain_config = ChainConfig(seed=chain_seed, **config.mcmc)
        posterior, model = learn_posterior(
            problem, space_kind, examples,
            chain_config=chain_config, include_prior=config.include_prior,
        )
        scorers = surrogate_scorers(
            posterior, model, config.estimators,
            dist_size=config.dist_size, dist_seed=dist_seed,
        )
        out = []
        for est, scorer in scorers.items():
            tau = ranking_similarity(problem, scorer, n_eval=config.n_eval, seed=eval_seed)
            out.append({**base, "estimator": est, "tau": tau, "error": ""})
        return out
    except Exception as exc:  # per-cell failures are data, not fatal
        log.warning("cell failed (%s/%s N=%d trial=%d): %s",
                    problem.name, space_kind, n, trial, exc)
        return [
            {**base, "estimator": est, "tau": float("nan"), "error": str(exc)}
            for est in config.estimators
        ]


def aggregate_rows(rows) -> list[dict]:
    """Trial means per (problem, space, estimator, N, sample_mode)."""
    groups: dict[tuple, list[float]] = {}
    for row in rows:
        key = (row["problem"], row["space"], row["estimator"], row["N"], row["sample_mode"])
        groups.setdefault(key, []).append(row["tau"])
    out = []
    for key, taus in groups.items():
        arr = np.asarray(taus, dtype=float)
        valid = arr[np.isfinite(arr)]
        out.append(
            {
                "problem": key[0],
                "space": key[1],
                "estimator": key[2],
                "N": key[3],
                "sample_mode": key[4],
                "mean_tau": float(valid.mean()) if valid.size else float("nan"),
                "n_trials": int(valid.size),
            }
        )
    return out

"""Rank correlation measure and the similarity experiment sweep."""

import numpy as np
import pytest

from prefutil.evaluation import (
    ExperimentConfig,
    aggregate_rows,
    kendall_tau,
    ranking_similarity,
    run_similarity_experiment,
)
from prefutil.problems import get_problem


def _tau_bruteforce(a, b):
    """O(n^2) reference: concordant minus discordant over all pairs."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.size
    num = 0
    for i in range(n):
        for j in range(i + 1, n):
            num += int(np.sign(a[i] - a[j]) * np.sign(b[i] - b[j]))
    return num / (n * (n - 1) / 2)


class TestKendallTau:
    def test_identical_ranking_is_one(self):
        x = np.arange(10, dtype=float)
        assert kendall_tau(x, x**3) == 1.0

    def test_reversed_ranking_is_minus_one(self):
        x = np.arange(10, dtype=float)
        assert kendall_tau(x, -x) == -1.0

    def test_hand_computed_single_swap(self):
        # one discordant pair out of three
        assert kendall_tau([1, 2, 3], [1, 3, 2]) == pytest.approx(1 / 3)

    def test_ties_count_as_neither(self):
        # pair (2,3) tied in b: 2 concordant, 0 discordant, 3 pairs total
        assert kendall_tau([1, 2, 3], [1, 2, 2]) == pytest.approx(2 / 3)

    def test_all_tied_is_zero(self):
        assert kendall_tau([1, 2, 3, 4], [5, 5, 5, 5]) == 0.0

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        a, b = rng.integers(0, 5, size=(2, 30)).astype(float)
        assert kendall_tau(a, b) == pytest.approx(kendall_tau(b, a))

    def test_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=(2, 50))
        assert kendall_tau(a, b) == pytest.approx(kendall_tau(np.exp(a), 3 * b + 1))

    def test_length_mismatch_and_short_input(self):
        with pytest.raises(ValueError):
            kendall_tau([1, 2], [1, 2, 3])
        with pytest.raises(ValueError):
            kendall_tau([1], [1])

    def test_matches_bruteforce_oracle_with_ties(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            n = int(rng.integers(2, 201))
            # coarse integer grids force plenty of ties
            levels = int(rng.integers(2, 12))
            a = rng.integers(0, levels, size=n).astype(float)
            b = rng.integers(0, levels, size=n).astype(float)
            assert kendall_tau(a, b) == _tau_bruteforce(a, b)

    def test_matches_bruteforce_on_continuous_data(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            n = int(rng.integers(5, 120))
            a = rng.normal(size=n)
            b = a + rng.normal(size=n)
            assert kendall_tau(a, b) == _tau_bruteforce(a, b)


class TestRankingSimilarity:
    def test_expert_against_itself_is_maximal(self):
        # the expert saturates, so tied pairs keep tau-a strictly below 1;
        # the self-score is still the attainable maximum
        p = get_problem("ZDT3")
        from prefutil.problems import expert_score

        self_tau = ranking_similarity(p, lambda Y: expert_score(p, Y), n_eval=500)
        assert 0.9 < self_tau < 1.0

    def test_negated_expert_mirrors_self_score(self):
        p = get_problem("ZDT3")
        from prefutil.problems import expert_score

        self_tau = ranking_similarity(p, lambda Y: expert_score(p, Y), n_eval=500)
        neg_tau = ranking_similarity(p, lambda Y: -expert_score(p, Y), n_eval=500)
        assert neg_tau == pytest.approx(-self_tau)

    def test_increasing_transform_of_expert_matches_self_score(self):
        p = get_problem("DTLZ2")
        from prefutil.problems import expert_score

        self_tau = ranking_similarity(p, lambda Y: expert_score(p, Y), n_eval=300)
        trans_tau = ranking_similarity(
            p, lambda Y: np.exp(2 * expert_score(p, Y)), n_eval=300
        )
        assert trans_tau == self_tau

    def test_seeded_and_validated(self):
        p = get_problem("ZDT3")
        surrogate = lambda Y: Y[:, 0]
        a = ranking_similarity(p, surrogate, n_eval=200, seed=9)
        b = ranking_similarity(p, surrogate, n_eval=200, seed=9)
        assert a == b
        with pytest.raises(ValueError):
            ranking_similarity(p, surrogate, n_eval=1)


class TestExperimentConfig:
    def test_defaults(self):
        cfg = ExperimentConfig()
        assert cfg.sample_mode == "random"
        assert cfg.dist_size == 20_000

    def test_invalid_values_rejected(self):
        with pytest.raises(ValueError):
            ExperimentConfig(sample_mode="greedy")
        with pytest.raises(ValueError):
            ExperimentConfig(estimators=("max", "median"))
        with pytest.raises(ValueError):
            ExperimentConfig(trials=0)

    def test_round_trips_through_dict(self):
        cfg = ExperimentConfig(problems=("CAR",), trials=2, seed=5)
        doc = cfg.to_dict()
        again = ExperimentConfig(**doc)
        assert again.to_dict() == doc


class TestSweep:
    def _tiny_config(self, **kw):
        base = dict(
            problems=("ZDT3",),
            spaces=("linear",),
            estimators=("mean", "dist"),
            n_examples=(5,),
            trials=2,
            n_eval=200,
            dist_size=50,
            mcmc={"n_chains": 2, "round_size": 200, "max_total_samples": 2000},
            seed=0,
        )
        base.update(kw)
        return ExperimentConfig(**base)

    def test_smoke_run_produces_full_grid(self):
        rows = run_similarity_experiment(self._tiny_config())
        assert len(rows) == 2 * 2  # estimators x trials
        for row in rows:
            assert row["error"] == ""
            assert -1.0 <= row["tau"] <= 1.0

    def test_deterministic_rerun(self):
        cfg = self._tiny_config()
        a = run_similarity_experiment(cfg)
        b = run_similarity_experiment(cfg)
        assert a == b

    def test_learned_linear_beats_chance_on_zdt3(self):
        cfg = self._tiny_config(n_examples=(8,), trials=1, estimators=("dist",))
        rows = run_similarity_experiment(cfg)
        assert rows[0]["tau"] > 0.2

    def test_failed_cell_recorded_as_nan_row(self):
        # an invalid chain setup fails inside each cell; the sweep must
        # still return one NaN row per estimator/trial instead of raising
        cfg = self._tiny_config(mcmc={"n_chains": 0})
        rows = run_similarity_experiment(cfg)
        assert len(rows) == 4
        for r in rows:
            assert np.isnan(r["tau"])
            assert r["error"] != ""

    def test_cell_callback_invoked(self):
        seen = []
        run_similarity_experiment(
            self._tiny_config(trials=1),
            on_cell_done=lambda *args: seen.append(args),
        )
        assert seen == [("ZDT3", "linear", 5, 0)]


class TestAggregateRows:
    def test_trial_means_and_nan_handling(self):
        rows = [
            {"problem": "ZDT3", "space": "linear", "estimator": "dist", "N": 10,
             "sample_mode": "random", "trial": 0, "tau": 0.5, "error": ""},
            {"problem": "ZDT3", "space": "linear", "estimator": "dist", "N": 10,
             "sample_mode": "random", "trial": 1, "tau": 0.7, "error": ""},
            {"problem": "ZDT3", "space": "linear", "estimator": "dist", "N": 10,
             "sample_mode": "random", "trial": 2, "tau": float("nan"), "error": "x"},
        ]
        agg = aggregate_rows(rows)
        assert len(agg) == 1
        assert agg[0]["mean_tau"] == pytest.approx(0.6)
        assert agg[0]["n_trials"] == 2

    def test_groups_kept_separate(self):
        rows = [
            {"problem": "ZDT3", "space": "linear", "estimator": "max", "N": 10,
             "sample_mode": "random", "trial": 0, "tau": 0.1, "error": ""},
            {"problem": "ZDT3", "space": "informed", "estimator": "max", "N": 10,
             "sample_mode": "random", "trial": 0, "tau": 0.9, "error": ""},
        ]
        agg = {(r["space"]): r["mean_tau"] for r in aggregate_rows(rows)}
        assert agg == {"linear": pytest.approx(0.1), "informed": pytest.approx(0.9)}

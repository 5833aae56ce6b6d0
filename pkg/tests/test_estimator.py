"""Scikit-learn front end for the utility learner."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from prefutil.estimator import UtilityFunctionLearner


def _toy_data(n=8, seed=0):
    rng = np.random.default_rng(seed)
    Y = rng.uniform(0, 1, size=(n, 2))
    scores = Y[:, 0] - 0.5 * Y[:, 1]
    prefs = [
        (i, j) if scores[i] > scores[j] else (j, i)
        for i in range(n)
        for j in range(i + 1, n)
        if scores[i] != scores[j]
    ]
    return Y, prefs, scores


FAST = dict(n_chains=2, round_size=300, max_total_samples=3000, dist_size=100)


class TestSklearnProtocol:
    def test_get_params_round_trip(self):
        est = UtilityFunctionLearner(space="linear", random_state=3)
        params = est.get_params()
        assert params["space"] == "linear"
        assert params["random_state"] == 3
        again = UtilityFunctionLearner(**params)
        assert again.get_params() == params

    def test_clone(self):
        est = UtilityFunctionLearner(estimator="mean", dist_size=50)
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()

    def test_set_params(self):
        est = UtilityFunctionLearner()
        est.set_params(estimator="max", n_chains=2)
        assert est.estimator == "max"
        assert est.n_chains == 2

    def test_predict_before_fit_raises(self):
        with pytest.raises(NotFittedError):
            UtilityFunctionLearner().predict([[0.5, 0.5]])


class TestFitPredict:
    @pytest.mark.parametrize("estimator", ["max", "mean", "dist"])
    def test_fit_predict_shapes(self, estimator):
        Y, prefs, _ = _toy_data()
        est = UtilityFunctionLearner(space="linear", estimator=estimator, **FAST)
        est.fit(Y, prefs)
        out = est.predict(Y)
        assert out.shape == (len(Y),)
        assert np.all(np.isfinite(out))

    def test_recovers_preference_direction(self):
        Y, prefs, scores = _toy_data(n=10, seed=1)
        est = UtilityFunctionLearner(space="linear", estimator="dist", **FAST)
        est.fit(Y, prefs)
        assert est.score(Y, scores) > 0.5

    def test_informed_space_with_explicit_ranges(self):
        Y, prefs, _ = _toy_data()
        est = UtilityFunctionLearner(
            space="informed",
            output_ranges=[[0.0, 1.0], [0.0, 1.0]],
            truncated=(False, False),
            **FAST,
        )
        est.fit(Y, prefs)
        assert est.converged_ in (True, False)
        assert len(est.dist_) == 100

    def test_ranges_inferred_from_training_outputs(self):
        Y, prefs, _ = _toy_data()
        est = UtilityFunctionLearner(space="linear", **FAST)
        est.fit(Y, prefs)
        np.testing.assert_allclose(est.space_.y_min, Y.min(axis=0))
        np.testing.assert_allclose(est.space_.y_max, Y.max(axis=0))

    def test_seeded_refit_is_deterministic(self):
        Y, prefs, _ = _toy_data()
        a = UtilityFunctionLearner(space="linear", random_state=7, **FAST).fit(Y, prefs)
        b = UtilityFunctionLearner(space="linear", random_state=7, **FAST).fit(Y, prefs)
        np.testing.assert_array_equal(a.posterior_.samples, b.posterior_.samples)

    def test_unknown_estimator_rejected_in_fit(self):
        Y, prefs, _ = _toy_data()
        est = UtilityFunctionLearner(estimator="median")
        with pytest.raises(ValueError):
            est.fit(Y, prefs)

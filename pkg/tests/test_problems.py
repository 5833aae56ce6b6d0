"""Benchmark problems, synthetic experts, and example generators."""

import numpy as np
import pytest

from prefutil.problems import (
    OutOfBoundsError,
    PROBLEM_NAMES,
    expert_score,
    generate_biased_examples,
    generate_random_examples,
    get_problem,
    sample_feasible,
    save_examples_csv,
)

# Golden regression values: frozen outputs of an independently re-typed
# implementation of the canonical problem formulas at fixed inputs.
GOLDEN = {
    "ZDT3": [
        ([0.0] * 30, [0.0, 1.0], []),
        ([0.5] + [0.25] * 29, [0.5, 1.9752451216018034], []),
        (
            [0.8, 0.1, 0.9, 0.3, 0.7, 0.2, 0.6, 0.4, 0.5, 0.05] + [0.35] * 20,
            [0.8, 2.473690985950856],
            [],
        ),
    ],
    "DTLZ2": [
        ([0.0, 0.0, 0.5, 0.5, 0.5, 0.5, 0.5], [1.0, 0.0, 0.0], []),
        (
            [0.5] * 7,
            [0.5000000000000001, 0.5, 0.7071067811865475],
            [],
        ),
        (
            [0.3, 0.7, 0.1, 0.9, 0.2, 0.8, 0.4],
            [0.6108078307530853, 1.1987778654808172, 0.6855256546067156],
            [],
        ),
    ],
    "CAR": [
        (
            [0.5, 0.45, 0.5, 0.5, 0.875, 0.4, 0.4],
            [15.576004000000003, 4.42725, 13.091381250000001],
            [0.07172109999999998, -0.2685904375000001, -0.3611998437499999,
             0.5095959374999999, -0.08184612499999999, 0.01779578125000003,
             0.23999218749999995, 0.10681249999999998, 0.022789141414141456,
             0.022748407643312207],
        ),
        (
            [1.5, 1.35, 1.5, 1.5, 2.625, 1.2, 1.2],
            [42.768012, 3.58525, 10.61064375],
            [-0.6066317000000001, -0.4500994374999999, -0.46948953125000004,
             -0.23432156249999958, -0.23397587500000006, -0.36728484375000015,
             -0.1775234375000001, -0.10368750000000004, -0.16091540404040405,
             -0.17742993630573256],
        ),
        (
            [1.0, 0.9, 1.0, 1.0, 1.75, 0.8, 0.8],
            [29.172008, 4.0489999999999995, 12.1232625],
            [-0.18382280000000006, -0.35716525, -0.4072796875,
             -0.0060112500000002456, -0.12837975000000001, -0.1391874999999999,
             0.031234375000000147, 0.012249999999999872, -0.05374494949494957,
             -0.05231847133757961],
        ),
    ],
    "WATER": [
        (
            [0.01, 0.01, 0.01],
            [63840.2774, 30.0, 285346.896494178, 6575303.126234903,
             346734.99999999994],
            [12.869399999999999, 1.97222, 1.552302048, 0.2727345812499997,
             1.0753793899999997, 1.0253362999999998, 1.8942387272727275],
        ),
        (
            [0.45, 0.1, 0.1],
            [83060.744, 1350.0, 2853468.96494178, 447902.6720089092,
             11122.222222222223],
            [-0.5551111111111111, -0.9836, -0.8146933422222222,
             -0.9903409236111111, -0.9869189888888888, -0.9775736666666667,
             -0.9776773737373737],
        ),
        (
            [0.23, 0.055, 0.055],
            [73450.5107, 690.0, 1569407.930717979, 1716128.1535797808,
             7539.535573122529],
            [-0.6984185770750988, -1.0149002766798418, -0.8451728284901185,
             -1.0055195029767787, -1.010244169229249, -1.0044531365612648,
             -1.012369860222781],
        ),
    ],
}


class TestProblemDefinitions:
    def test_dimensions_match_published_complexities(self):
        expected = {
            "ZDT3": (30, 2, 0),
            "DTLZ2": (7, 3, 0),
            "CAR": (7, 3, 10),
            "WATER": (3, 5, 7),
        }
        for name, (d, k, c) in expected.items():
            p = get_problem(name)
            assert p.input_dim == d
            assert p.output_dim == k
            assert p.n_constraints == c

    def test_unknown_name_rejected(self):
        with pytest.raises(KeyError):
            get_problem("SPHERE")

    def test_case_insensitive_lookup(self):
        assert get_problem("zdt3").name == "ZDT3"

    @pytest.mark.parametrize("name", PROBLEM_NAMES)
    def test_golden_values(self, name):
        problem = get_problem(name)
        for x, y_exp, c_exp in GOLDEN[name]:
            y, c = problem.evaluate(np.asarray(x))
            np.testing.assert_allclose(y, y_exp, rtol=1e-12)
            np.testing.assert_allclose(c, c_exp, rtol=1e-12, atol=1e-15)

    def test_zdt3_first_output_is_passthrough(self):
        p = get_problem("ZDT3")
        y, _ = p.evaluate(np.zeros(30))
        assert y[0] == 0.0

    def test_dtlz2_unit_sphere_identity(self):
        p = get_problem("DTLZ2")
        rng = np.random.default_rng(0)
        for _ in range(20):
            x = np.concatenate([rng.uniform(0, 1, 2), np.full(5, 0.5)])
            y, _ = p.evaluate(x)
            assert np.sum(y**2) == pytest.approx(1.0)

    def test_unconstrained_problems_have_empty_constraints(self):
        for name in ("ZDT3", "DTLZ2"):
            _, c = get_problem(name).evaluate_batch(
                np.tile(get_problem(name).input_bounds[:, 0], (3, 1))
            )
            assert c.shape == (3, 0)

    def test_out_of_bounds_raises(self):
        p = get_problem("ZDT3")
        with pytest.raises(OutOfBoundsError):
            p.evaluate(np.full(30, 1.5))
        with pytest.raises(OutOfBoundsError):
            p.evaluate(np.zeros(29))

    def test_bitwise_determinism(self):
        rng = np.random.default_rng(12)
        for name in PROBLEM_NAMES:
            p = get_problem(name)
            X = p.input_bounds[:, 0] + (
                p.input_bounds[:, 1] - p.input_bounds[:, 0]
            ) * rng.random((10, p.input_dim))
            y1, c1 = p.evaluate_batch(X)
            y2, c2 = p.evaluate_batch(X)
            np.testing.assert_array_equal(y1, y2)
            np.testing.assert_array_equal(c1, c2)

    @pytest.mark.parametrize("name", PROBLEM_NAMES)
    def test_output_ranges_cover_random_sample(self, name):
        p = get_problem(name)
        rng = np.random.default_rng(99)
        X = p.input_bounds[:, 0] + (
            p.input_bounds[:, 1] - p.input_bounds[:, 0]
        ) * rng.random((100_000, p.input_dim))
        Y, _ = p.evaluate_batch(X)
        lo, hi = p.output_ranges[:, 0], p.output_ranges[:, 1]
        spill = np.mean((Y < lo) | (Y > hi), axis=0)
        assert np.all(spill <= 0.01)


class TestExpertScore:
    def test_zdt3_hand_computed(self):
        p = get_problem("ZDT3")
        # normalized outputs (0.3, 0.6) in ranges [0,1] and [0,8]
        assert expert_score(p, np.array([[0.3, 4.8]]))[0] == pytest.approx(0.6)

    def test_zdt3_saturates_at_half_range(self):
        p = get_problem("ZDT3")
        assert expert_score(p, np.array([[0.7, 5.0]]))[0] == pytest.approx(1.0)

    def test_dtlz2_hand_computed(self):
        p = get_problem("DTLZ2")
        # normalized (0, 0, 0.5): quadratic truncated term saturates
        assert expert_score(p, np.array([[0.0, 0.0, 1.5]]))[0] == pytest.approx(0.7)

    def test_scalar_output_for_single_vector(self):
        p = get_problem("ZDT3")
        assert isinstance(expert_score(p, np.array([0.3, 4.8])), float)

    @pytest.mark.parametrize("name", PROBLEM_NAMES)
    def test_scores_in_unit_interval(self, name):
        p = get_problem(name)
        rng = np.random.default_rng(5)
        lo, hi = p.output_ranges[:, 0], p.output_ranges[:, 1]
        span = hi - lo
        Y = rng.uniform(lo - 0.5 * span, hi + 0.5 * span, size=(5000, p.output_dim))
        e = expert_score(p, Y)
        assert np.all((e >= 0.0) & (e <= 1.0))


class TestGenerators:
    def test_random_examples_have_distinct_variants(self):
        p = get_problem("ZDT3")
        examples = generate_random_examples(p, 10, seed=0)
        assert len(examples) == 10
        x0 = [ex.x[0] for ex in examples]
        assert len(set(x0)) == 10

    def test_unconstrained_examples_all_feasible(self):
        p = get_problem("DTLZ2")
        assert all(ex.feasible for ex in generate_random_examples(p, 5, seed=1))

    def test_constrained_examples_satisfy_constraints(self):
        p = get_problem("CAR")
        for ex in generate_random_examples(p, 5, seed=2):
            assert ex.feasible
            assert np.all(ex.constraint_values <= 0.0)

    def test_seeded_determinism(self):
        p = get_problem("WATER")
        a = generate_random_examples(p, 4, seed=3)
        b = generate_random_examples(p, 4, seed=3)
        for ea, eb in zip(a, b):
            np.testing.assert_array_equal(ea.x, eb.x)
            np.testing.assert_array_equal(ea.y, eb.y)

    def test_too_few_examples_rejected(self):
        p = get_problem("ZDT3")
        with pytest.raises(ValueError):
            generate_random_examples(p, 1, seed=0)
        with pytest.raises(ValueError):
            generate_biased_examples(p, 1, seed=0)
        with pytest.raises(ValueError):
            generate_biased_examples(p, 3, pool_size=0, seed=0)

    def test_biased_selection_dominates_random(self):
        p = get_problem("ZDT3")
        gaps = []
        for seed in range(20):
            random_mean = np.mean(
                [expert_score(p, ex.y[None])[0]
                 for ex in generate_random_examples(p, 4, seed=seed)]
            )
            biased_mean = np.mean(
                [expert_score(p, ex.y[None])[0]
                 for ex in generate_biased_examples(p, 4, pool_size=200, seed=seed)]
            )
            gaps.append(biased_mean - random_mean)
        assert np.mean(gaps) > 0.0
        assert np.mean(np.asarray(gaps) >= 0) >= 0.9

    def test_biased_default_pool_size(self):
        import inspect

        sig = inspect.signature(generate_biased_examples)
        assert sig.parameters["pool_size"].default == 1000

    def test_sample_feasible_fixes_variant_coordinate(self):
        p = get_problem("CAR")
        rng = np.random.default_rng(4)
        X, Y, C = sample_feasible(p, 50, rng, x0=1.0)
        assert X.shape[0] == 50
        assert np.all(X[:, 0] == 1.0)
        assert np.all(C <= 0.0)


def test_examples_csv_dump(tmp_path):
    p = get_problem("CAR")
    examples = generate_random_examples(p, 3, seed=0)
    path = tmp_path / "examples.csv"
    save_examples_csv(examples, path, problem=p)
    lines = path.read_text().strip().splitlines()
    assert len(lines) == 4
    header = lines[0].split(",")
    assert header[-1] == "expert_score"
    assert header.count("feasible") == 1

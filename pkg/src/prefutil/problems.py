"""Benchmark problems, synthetic experts, and example generators.

Four multi-objective problems: ZDT3 and DTLZ2 (unconstrained classics)
plus the car side impact and water resource planning problems (constraint
values are stored pre-normalized as value/limit - 1, so <= 0 means
satisfied and violations are comparable across constraints).

Each problem carries the output ranges used to normalize expert inputs
and a per-output flag marking which expert terms are truncated at half
range (that flag is the expert knowledge the informed space consumes).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .preference import Example


class OutOfBoundsError(ValueError):
    """Raised when an input vector leaves the problem's box."""


@dataclass(frozen=True)
class ProblemDef:
    name: str
    input_bounds: np.ndarray  # (d, 2)
    output_ranges: np.ndarray  # (k, 2)
    truncated: tuple[bool, ...]
    n_constraints: int

    @property
    def input_dim(self) -> int:
        return self.input_bounds.shape[0]

    @property
    def output_dim(self) -> int:
        return self.output_ranges.shape[0]

    def evaluate(self, x):
        """Outputs and constraint values for one input vector."""
        x = np.asarray(x, dtype=float)
        Y, C = self.evaluate_batch(x[None, :])
        return Y[0], C[0]

    def evaluate_batch(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.input_dim:
            raise OutOfBoundsError(f"expected {self.input_dim} inputs, got {X.shape[1]}")
        lo, hi = self.input_bounds[:, 0], self.input_bounds[:, 1]
        if np.any(X < lo - 1e-12) or np.any(X > hi + 1e-12):
            raise OutOfBoundsError(f"input outside bounds for {self.name}")
        return _EVALUATORS[self.name](X)

    def expert_score(self, Y):
        return expert_score(self, Y)


def normalized_expert_inputs(problem: ProblemDef, Y) -> np.ndarray:
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    lo = problem.output_ranges[:, 0]
    hi = problem.output_ranges[:, 1]
    return np.clip((Y - lo) / (hi - lo), 0.0, 1.0)


def _trunc(s):
    # truncated factor: the expert is indifferent above half range
    return 2.0 * np.minimum(0.5, s)


def expert_score(problem: ProblemDef, Y):
    """The hidden expert of the problem, on range-normalized outputs."""
    S = normalized_expert_inputs(problem, Y)
    name = problem.name
    if name == "ZDT3":
        e = _trunc(S[:, 0]) * _trunc(S[:, 1])
    elif name in ("DTLZ2", "CAR"):
        e = 0.3 * S[:, 0] * S[:, 1] + 0.7 * _trunc(S[:, 2]) ** 2
    elif name == "WATER":
        e = 0.2 * S[:, 0] * S[:, 1] + 0.4 * S[:, 2] * S[:, 3] + 0.4 * _trunc(S[:, 4]) ** 2
    else:
        raise KeyError(name)
    return e if np.asarray(Y).ndim > 1 else float(e[0])


# --- evaluators ----------------------------------------------------------

def _zdt3(X):
    f1 = X[:, 0]
    g = 1.0 + 9.0 * np.sum(X[:, 1:], axis=1) / (X.shape[1] - 1)
    h = 1.0 - np.sqrt(f1 / g) - (f1 / g) * np.sin(10.0 * np.pi * f1)
    f2 = g * h
    return np.stack([f1, f2], axis=1), np.empty((X.shape[0], 0))


def _dtlz2(X):
    g = np.sum((X[:, 2:] - 0.5) ** 2, axis=1)
    a = 0.5 * np.pi
    f1 = (1.0 + g) * np.cos(a * X[:, 0]) * np.cos(a * X[:, 1])
    f2 = (1.0 + g) * np.cos(a * X[:, 0]) * np.sin(a * X[:, 1])
    f3 = (1.0 + g) * np.sin(a * X[:, 0])
    return np.stack([f1, f2, f3], axis=1), np.empty((X.shape[0], 0))


def _car(X):
    x1, x2, x3, x4, x5, x6, x7 = (X[:, i] for i in range(7))
    f1 = (1.98 + 4.9 * x1 + 6.67 * x2 + 6.98 * x3 + 4.01 * x4 + 1.78 * x5
          + 0.00001 * x6 + 2.73 * x7)
    force = 4.72 - 0.5 * x4 - 0.19 * x2 * x3
    v_mbp = 10.58 - 0.674 * x1 * x2 - 0.67275 * x2
    v_fd = 16.45 - 0.489 * x3 * x7 - 0.843 * x5 * x6
    f3 = 0.5 * (v_mbp + v_fd)

    raw = [
        1.16 - 0.3717 * x2 * x4 - 0.0092928 * x3,
        0.261 - 0.0159 * x1 * x2 - 0.06486 * x1 - 0.019 * x2 * x7
        + 0.0144 * x3 * x5 + 0.0154464 * x6,
        0.214 + 0.00817 * x5 - 0.045195 * x1 - 0.0135168 * x1 + 0.03099 * x2 * x6
        - 0.018 * x2 * x7 + 0.007176 * x3 + 0.023232 * x3 - 0.00364 * x5 * x6
        - 0.018 * x2**2,
        0.74 - 0.61 * x2 - 0.031296 * x3 - 0.031872 * x7 + 0.227 * x2**2,
        28.98 + 3.818 * x3 - 4.2 * x1 * x2 + 1.27296 * x6 - 2.68065 * x7,
        33.86 + 2.95 * x3 - 5.057 * x1 * x2 - 3.795 * x2 - 3.4431 * x7 + 1.45728,
        46.36 - 9.9 * x2 - 4.4505 * x1,
        force,
        v_mbp,
        v_fd,
    ]
    limits = [1.0, 0.32, 0.32, 0.32, 32.0, 32.0, 32.0, 4.0, 9.9, 15.7]
    C = np.stack([r / lim - 1.0 for r, lim in zip(raw, limits)], axis=1)
    return np.stack([f1, force, f3], axis=1), C


def _water(X):
    x1, x2, x3 = X[:, 0], X[:, 1], X[:, 2]
    f1 = 106780.37 * (x2 + x3) + 61704.67
    f2 = 3000.0 * x1
    f3 = 305700.0 * 2289.0 * x2 / (0.06 * 2289.0) ** 0.65
    f4 = 250.0 * 2289.0 * np.exp(-39.75 * x2 + 9.9 * x3 + 2.74)
    f5 = 25.0 * (1.39 / (x1 * x2) + 4940.0 * x3 - 80.0)

    raw = [
        0.00139 / (x1 * x2) + 4.94 * x3 - 0.08,
        0.000306 / (x1 * x2) + 1.082 * x3 - 0.0986,
        12.307 / (x1 * x2) + 49408.24 * x3 + 4051.02,
        2.098 / (x1 * x2) + 8046.33 * x3 - 696.71,
        2.138 / (x1 * x2) + 7883.39 * x3 - 705.04,
        0.417 / (x1 * x2) + 1721.26 * x3 - 136.54,
        0.164 / (x1 * x2) + 631.13 * x3 - 54.48,
    ]
    limits = [1.0, 1.0, 50000.0, 16000.0, 10000.0, 2000.0, 550.0]
    C = np.stack([r / lim - 1.0 for r, lim in zip(raw, limits)], axis=1)
    return np.stack([f1, f2, f3, f4, f5], axis=1), C


_EVALUATORS = {"ZDT3": _zdt3, "DTLZ2": _dtlz2, "CAR": _car, "WATER": _water}

_PROBLEMS = {
    "ZDT3": ProblemDef(
        "ZDT3",
        np.array([[0.0, 1.0]] * 30),
        np.array([[0.0, 1.0], [0.0, 8.0]]),
        (True, True),
        0,
    ),
    "DTLZ2": ProblemDef(
        "DTLZ2",
        np.array([[0.0, 1.0]] * 7),
        np.array([[0.0, 3.0]] * 3),
        (False, False, True),
        0,
    ),
    "CAR": ProblemDef(
        "CAR",
        np.array(
            [
                [0.5, 1.5],
                [0.45, 1.35],
                [0.5, 1.5],
                [0.5, 1.5],
                [0.875, 2.625],
                [0.4, 1.2],
                [0.4, 1.2],
            ]
        ),
        np.array([[16.0, 42.0], [3.0, 5.0], [10.0, 14.0]]),
        (False, False, True),
        10,
    ),
    "WATER": ProblemDef(
        "WATER",
        np.array([[0.01, 0.45], [0.01, 0.10], [0.01, 0.10]]),
        np.array(
            [
                [63842.0, 83055.0],
                [30.0, 1350.0],
                [285346.0, 2853469.0],
                [183960.0, 16013931.0],
                [27.0, 350746.0],
            ]
        ),
        (False, False, False, False, True),
        7,
    ),
}

PROBLEM_NAMES = tuple(_PROBLEMS)


def get_problem(name: str) -> ProblemDef:
    try:
        return _PROBLEMS[name.upper()]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {PROBLEM_NAMES}") from None


# --- sampling helpers ----------------------------------------------------

def _uniform(rng, bounds, n):
    return bounds[:, 0] + (bounds[:, 1] - bounds[:, 0]) * rng.random((n, bounds.shape[0]))


def sample_feasible(problem: ProblemDef, n: int, rng, x0=None, batch: int = 4096,
                    max_batches: int = 200):
    """Uniform feasible draws, optionally with the first coordinate fixed.

    Returns (X, Y, C) with exactly ``n`` rows, or fewer if feasible points
    are effectively unreachable within the attempt budget.
    """
    xs, ys, cs = [], [], []
    got = 0
    for _ in range(max_batches):
        X = _uniform(rng, problem.input_bounds, batch)
        if x0 is not None:
            X[:, 0] = x0
        Y, C = problem.evaluate_batch(X)
        ok = np.all(C <= 0.0, axis=1) if C.shape[1] else np.ones(batch, dtype=bool)
        xs.append(X[ok])
        ys.append(Y[ok])
        cs.append(C[ok])
        got += int(ok.sum())
        if got >= n:
            break
    X = np.vstack(xs)[:n]
    Y = np.vstack(ys)[:n]
    C = np.vstack(cs)[:n]
    return X, Y, C


def _draw_one(problem: ProblemDef, x0: float, rng, max_attempts: int = 10_000):
    """One feasible example at fixed x0 by rejection; cap keeps best violation."""
    best = None
    best_viol = np.inf
    batch = 256
    attempts = 0
    while attempts < max_attempts:
        k = min(batch, max_attempts - attempts)
        X = _uniform(rng, problem.input_bounds, k)
        X[:, 0] = x0
        Y, C = problem.evaluate_batch(X)
        if C.shape[1] == 0:
            return Example(X[0], Y[0], C[0], True)
        viol = np.sum(np.maximum(C, 0.0), axis=1)
        ok = np.flatnonzero(viol == 0.0)
        if ok.size:
            i = ok[0]
            return Example(X[i], Y[i], C[i], True)
        i = int(np.argmin(viol))
        if viol[i] < best_viol:
            best_viol = viol[i]
            best = (X[i], Y[i], C[i])
        attempts += k
    return Example(best[0], best[1], best[2], False)


def _distinct_x0(problem: ProblemDef, n: int, rng):
    lo, hi = problem.input_bounds[0]
    vals = lo + (hi - lo) * rng.random(n)
    while np.unique(vals).size < n:
        vals = lo + (hi - lo) * rng.random(n)
    return vals


def generate_random_examples(problem: ProblemDef, n: int, seed: int) -> list[Example]:
    """N examples from N random problem variants (distinct fixed x0 values)."""
    if n < 2:
        raise ValueError("need at least two examples")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    return [_draw_one(problem, x0, rng) for x0 in _distinct_x0(problem, n, rng)]


def generate_biased_examples(problem: ProblemDef, n: int, pool_size: int = 1000,
                             seed: int = 0) -> list[Example]:
    """N examples, each the expert-score argmax of a feasible candidate pool.

    Mimics historical logs that only retain final (human-optimized)
    results; with ``pool_size`` 1 this reduces to random generation.
    """
    if n < 2:
        raise ValueError("need at least two examples")
    if pool_size < 1:
        raise ValueError("pool_size must be positive")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    out = []
    for x0 in _distinct_x0(problem, n, rng):
        X, Y, C = sample_feasible(problem, pool_size, rng, x0=x0,
                                  batch=max(pool_size, 1024))
        if X.shape[0] == 0:
            out.append(_draw_one(problem, x0, rng))
            continue
        i = int(np.argmax(expert_score(problem, Y)))
        out.append(Example(X[i], Y[i], C[i], True))
    return out


def save_examples_csv(examples, path, problem: ProblemDef | None = None) -> None:
    import csv as _csv

    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        ex0 = examples[0]
        header = (
            [f"x_{i}" for i in range(ex0.x.size)]
            + [f"y_{i}" for i in range(ex0.y.size)]
            + [f"c_{i}" for i in range(ex0.constraint_values.size)]
            + ["feasible"]
        )
        if problem is not None:
            header.append("expert_score")
        writer.writerow(header)
        for ex in examples:
            row = (
                [repr(float(v)) for v in ex.x]
                + [repr(float(v)) for v in ex.y]
                + [repr(float(v)) for v in ex.constraint_values]
                + [int(ex.feasible)]
            )
            if problem is not None:
                row.append(repr(float(expert_score(problem, ex.y[None, :])[0])))
            writer.writerow(row)

"""GP-based black-box optimization of a learned utility, plus the Manual bound.

The surrogate is a Matern-5/2 Gaussian process (scikit-learn backend,
hyperparameters by marginal-likelihood maximization with multi-start
gradient ascent). Acquisition is expected improvement, maximized over a
random candidate set with local refinement. Constrained problems use an
additive penalty on the (already normalized) constraint violations.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.stats import norm
from sklearn.gaussian_process import GaussianProcessRegressor
from sklearn.gaussian_process.kernels import ConstantKernel, Matern, WhiteKernel

from .problems import ProblemDef, expert_score, sample_feasible


@dataclass
class GpHyperConfig:
    n_restarts: int = 8
    length_scale_bounds: tuple = (1e-2, 1e2)
    noise_bounds: tuple = (1e-10, 1e-1)
    optimize: bool = True
    # fixed values used when optimize=False (hand-checkable configurations)
    length_scale: float | np.ndarray = 1.0
    signal_variance: float = 1.0
    noise_variance: float = 1e-6
    seed: int = 0


@dataclass
class GpModel:
    """Fitted GP over unit-box inputs."""

    regressor: GaussianProcessRegressor
    X: np.ndarray
    t: np.ndarray
    noise_variance: float

    def predict(self, X):
        """Posterior mean and standard deviation (clamped at zero)."""
        mean, std = self.regressor.predict(np.atleast_2d(X), return_std=True)
        return mean, np.sqrt(np.maximum(std**2, 0.0))


def gp_fit(X, t, hyper_config: GpHyperConfig | None = None) -> GpModel:
    """Fit the Matern-5/2 GP; escalates jitter on factorization failure."""
    cfg = hyper_config or GpHyperConfig()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    t = np.asarray(t, dtype=float)
    if X.shape[0] < 2 and cfg.optimize:
        raise ValueError("need at least two points to fit hyperparameters")
    d = X.shape[1]
    if cfg.optimize:
        kernel = ConstantKernel(1.0, (1e-3, 1e3)) * Matern(
            length_scale=np.ones(d), length_scale_bounds=cfg.length_scale_bounds, nu=2.5
        ) + WhiteKernel(1e-6, cfg.noise_bounds)
        restarts = max(cfg.n_restarts - 1, 0)
        optimizer = "fmin_l_bfgs_b"
    else:
        kernel = ConstantKernel(cfg.signal_variance, "fixed") * Matern(
            length_scale=cfg.length_scale, length_scale_bounds="fixed", nu=2.5
        )
        restarts = 0
        optimizer = None
    last_err = None
    for jitter in (1e-10, 1e-8, 1e-6):
        alpha = jitter if cfg.optimize else cfg.noise_variance + jitter
        gpr = GaussianProcessRegressor(
            kernel=kernel,
            alpha=alpha,
            optimizer=optimizer,
            n_restarts_optimizer=restarts,
            normalize_y=cfg.optimize,
            random_state=cfg.seed,
        )
        try:
            gpr.fit(X, t)
            noise = alpha
            if cfg.optimize:
                noise += float(gpr.kernel_.k2.noise_level)
            return GpModel(gpr, X, t, noise)
        except np.linalg.LinAlgError as err:
            last_err = err
    raise np.linalg.LinAlgError(f"kernel factorization failed at max jitter: {last_err}")


def acquisition_ei(model: GpModel, x, best: float):
    """Expected improvement over ``best``; zero where the GP is certain."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    mean, std = model.predict(x)
    improve = mean - best
    ei = np.where(std > 0.0, 0.0, np.maximum(improve, 0.0))
    ok = std > 0.0
    if np.any(ok):
        z = improve[ok] / std[ok]
        ei = ei.astype(float)
        ei[ok] = improve[ok] * norm.cdf(z) + std[ok] * norm.pdf(z)
    return np.maximum(ei, 0.0)


@dataclass
class BoRunRecord:
    iteration: int
    x: np.ndarray
    objective: float  # surrogate utility minus constraint penalty
    expert_score: float
    best_so_far: float
    feasible: bool = True


def bo_optimize(
    problem: ProblemDef,
    objective,
    iterations: int,
    seed: int = 0,
    x0: float | None = None,
    expert=None,
    n_init: int = 10,
    n_candidates: int = 1024,
    n_refine: int = 4,
    penalty_rho: float = 10.0,
    hyper_config: GpHyperConfig | None = None,
):
    """Maximize ``objective`` (a utility of the problem outputs) over x.

    The variant coordinate x0 stays fixed (default: midpoint of its
    range, a value unseen during training). Ten uniform initial points,
    then one EI-argmax query per iteration, the argmax taken over random
    candidates plus local refinement from the best few. Returns
    ``(best_x, records)`` where best_x is the feasible query with the
    highest surrogate utility.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    bounds = problem.input_bounds
    if x0 is None:
        x0 = float(bounds[0].mean())
    free_lo, free_hi = bounds[1:, 0], bounds[1:, 1]
    d = free_lo.size

    def to_x(u):
        return np.concatenate([[x0], free_lo + (free_hi - free_lo) * u])

    U, scores, utils, feas, records = [], [], [], [], []

    def query(u, iteration):
        x = to_x(np.clip(u, 0.0, 1.0))
        y, c = problem.evaluate(x)
        util = float(np.atleast_1d(objective(y[None, :]))[0])
        viol = float(np.sum(np.maximum(c, 0.0)))
        score = util - penalty_rho * viol
        ok = viol == 0.0
        U.append(np.clip(u, 0.0, 1.0))
        scores.append(score)
        utils.append(util)
        feas.append(ok)
        best = max(scores)
        e = float(expert_score(problem, y[None, :])[0]) if expert is None else float(
            np.atleast_1d(expert(y[None, :]))[0]
        )
        records.append(BoRunRecord(iteration, x, score, e, best, ok))

    for i in range(n_init):
        query(rng.random(d), -1)

    cfg = hyper_config or GpHyperConfig()
    for it in range(iterations):
        model = gp_fit(np.asarray(U), np.asarray(scores),
                       GpHyperConfig(**{**cfg.__dict__, "seed": seed}))
        best = max(scores)
        cands = rng.random((n_candidates, d))
        ei = acquisition_ei(model, cands, best)
        top = np.argsort(ei)[::-1][:n_refine]
        best_u, best_ei = cands[top[0]], ei[top[0]]
        for idx in top:
            res = minimize(
                lambda u: -acquisition_ei(model, u[None, :], best)[0],
                cands[idx],
                method="L-BFGS-B",
                bounds=[(0.0, 1.0)] * d,
                options={"maxiter": 30},
            )
            if -res.fun > best_ei:
                best_ei, best_u = -res.fun, res.x
        query(best_u, it)

    utils = np.asarray(utils)
    feas = np.asarray(feas)
    if np.any(feas):
        pool = np.flatnonzero(feas)
        best_idx = pool[int(np.argmax(utils[pool]))]
    else:
        best_idx = int(np.argmax(scores))
    return to_x(U[best_idx]), records


def manual_upper_bound(problem: ProblemDef, M: int, seed: int = 0,
                       x0: float | None = None) -> float:
    """Max expert score over ``M`` feasible uniform draws at fixed x0."""
    if M < 1:
        raise ValueError("M must be positive")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    if x0 is None:
        x0 = float(problem.input_bounds[0].mean())
    best = -np.inf
    remaining = M
    while remaining > 0:
        n = min(remaining, 100_000)
        _, Y, _ = sample_feasible(problem, n, rng, x0=x0, batch=max(n, 4096))
        if Y.shape[0]:
            best = max(best, float(np.max(expert_score(problem, Y))))
        remaining -= n
    return best


def save_bo_history_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        dim = records[0].x.size if records else 0
        writer.writerow(
            ["iteration"] + [f"x_{i}" for i in range(dim)]
            + ["objective", "expert_score", "best_so_far", "feasible"]
        )
        for r in records:
            writer.writerow(
                [r.iteration] + [repr(float(v)) for v in r.x]
                + [repr(r.objective), repr(r.expert_score), repr(r.best_so_far), int(r.feasible)]
            )

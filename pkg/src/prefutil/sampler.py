"""Multi-chain sampling orchestration, convergence, and posterior estimators.

Chains run in rounds; after each round the split potential scale
reduction (split R-hat) is computed on the pooled post-warmup draws and
sampling stops once every parameter is below the threshold or the total
draw budget is exhausted. The three estimators reduce the pooled
posterior to a single refined function (Max), the decoded coordinate-wise
mean (Mean), or a seeded subsample used through the mean utility (Dist).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from . import nuts
from .nuts import ChainState, SamplerHealthError
from .spaces import SpaceConfig, decode, normalized_outputs, utility_batch
from .utility import UtilitySpec, normalize_weights


@dataclass
class ChainConfig:
    n_chains: int = 4
    psr_threshold: float = 1.1
    max_total_samples: int = 100_000
    warmup_fraction: float = 0.5
    target_accept: float = 0.8
    max_tree_depth: int = 10
    seed: int = 0
    round_size: int = 1000
    divergence_limit: float = 0.25

    def __post_init__(self):
        if self.n_chains < 1 or self.round_size < 1 or self.max_total_samples < 1:
            raise ValueError("chain counts and budgets must be positive")
        if not 0.0 < self.warmup_fraction < 1.0:
            raise ValueError("warmup_fraction must be in (0, 1)")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must be in (0, 1)")
        if self.max_tree_depth < 1:
            raise ValueError("max_tree_depth must be positive")


@dataclass
class PosteriorSamples:
    """Pooled post-warmup draws in unconstrained coordinates."""

    samples: np.ndarray  # (n, n_params)
    chain_ids: np.ndarray  # (n,)
    space: SpaceConfig
    converged: bool = True
    max_psr: float = np.nan
    total_draws: int = 0
    stop_reason: str = ""

    def __len__(self) -> int:
        return self.samples.shape[0]

    def decoded(self, indices=None):
        idx = range(len(self)) if indices is None else indices
        return [decode(self.samples[i], self.space) for i in idx]

    def utility_mean(self, Y, normalize=None, chunk: int = 256) -> np.ndarray:
        """Posterior-mean utility of each output vector in ``Y``.

        For interpretable spaces every sample's weights are L1-normalized
        before averaging, matching the interpretability treatment of the
        decoded point estimates.
        """
        if len(self) == 0:
            raise ValueError("empty posterior")
        if normalize is None:
            normalize = self.space.interpretable
        S = normalized_outputs(np.atleast_2d(np.asarray(Y, dtype=float)), self.space)
        g = utility_batch(self.samples, S, self.space, normalize=normalize, chunk=chunk)
        return g.mean(axis=0)

    def save_csv(self, path) -> None:
        """One row per draw (chain id, then coordinates) plus a JSON sidecar."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["chain_id"] + [f"theta_{i}" for i in range(self.samples.shape[1])])
            for cid, row in zip(self.chain_ids, self.samples):
                writer.writerow([int(cid)] + [repr(float(v)) for v in row])
        sidecar = {
            "space": self.space.to_dict(),
            "converged": bool(self.converged),
            "max_psr": float(self.max_psr),
            "total_draws": int(self.total_draws),
            "stop_reason": self.stop_reason,
        }
        with open(str(path) + ".json", "w") as fh:
            json.dump(sidecar, fh, indent=2)

    @classmethod
    def load_csv(cls, path) -> "PosteriorSamples":
        with open(str(path) + ".json") as fh:
            sidecar = json.load(fh)
        rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(
            rows[:, 1:],
            rows[:, 0].astype(int),
            SpaceConfig.from_dict(sidecar["space"]),
            converged=sidecar["converged"],
            max_psr=sidecar["max_psr"],
            total_draws=sidecar["total_draws"],
            stop_reason=sidecar["stop_reason"],
        )


def potential_scale_reduction(chains) -> np.ndarray:
    """Split R-hat per parameter over a list of (n_i, d) chain arrays.

    Each chain is halved, so C chains yield 2C sequences. Zero
    within-sequence variance returns +inf for that parameter (stuck
    chains), not an exception.
    """
    chains = [np.atleast_2d(np.asarray(c, dtype=float)) for c in chains]
    if len(chains) < 2:
        raise ValueError("need at least two chains")
    if min(c.shape[0] for c in chains) < 4:
        raise ValueError("need at least four post-warmup draws per chain")
    n = min(c.shape[0] for c in chains)
    half = n // 2
    seqs = []
    for c in chains:
        c = c[:n]
        seqs.append(c[:half])
        seqs.append(c[half : 2 * half])
    seqs = np.stack(seqs)  # (2C, half, d)
    means = seqs.mean(axis=1)
    B = half * np.var(means, axis=0, ddof=1)
    W = np.mean(np.var(seqs, axis=1, ddof=1), axis=0)
    var_plus = (half - 1) / half * W + B / half
    with np.errstate(divide="ignore", invalid="ignore"):
        rhat = np.sqrt(var_plus / W)
    rhat = np.where(W <= 0.0, np.inf, rhat)
    return rhat


def nuts_sample(logdensity, init, config: ChainConfig):
    """Run ``n_chains`` independent NUTS chains; returns per-chain arrays.

    ``logdensity(theta)`` must return (log density, gradient). Each chain
    warms up with dual averaging toward ``target_accept`` and then draws
    ``round_size`` samples per round until the total budget is spent.
    This low-level entry runs exactly one sampling round after warmup;
    use :func:`run_until_converged` for PSR-terminated sampling.
    """
    chains, runners, _ = _start_chains(logdensity, init, config)
    _check_health(runners, config)
    return chains


class _ScaledTarget:
    """Log density in decorrelated coordinates theta = L z (mass matrix L L^T)."""

    def __init__(self, logdensity, L):
        self.logdensity = logdensity
        self.L = np.asarray(L, dtype=float)

    def to_z(self, theta):
        return np.linalg.solve(self.L, theta)

    def __call__(self, z):
        lp, grad = self.logdensity(self.L @ z)
        return lp, self.L.T @ grad


@dataclass
class _ChainRunner:
    state: ChainState
    target: _ScaledTarget

    def draw(self, n, config: ChainConfig) -> np.ndarray:
        z = nuts.run_chain(self.target, self.state, n, config.max_tree_depth,
                           config.target_accept)
        return z @ self.target.L.T


def _start_chains(logdensity, init, config: ChainConfig):
    """Warm up all chains and draw the first round. Returns (chains, runners, draws).

    Warmup runs in two halves: the first adapts the step size under an
    identity metric, then the posterior covariance estimated from those
    draws (shrunk toward its diagonal) becomes the mass matrix and the
    second half re-adapts the step size in decorrelated coordinates.
    """
    ss = np.random.SeedSequence(config.seed)
    children = ss.spawn(config.n_chains)
    n_warm = max(
        2, int(round(config.round_size * config.warmup_fraction / (1.0 - config.warmup_fraction)))
    )
    runners, chains = [], []
    total = 0
    init = np.asarray(init, dtype=float)
    for c in range(config.n_chains):
        rng = np.random.Generator(np.random.PCG64(children[c]))
        theta0 = init + 0.1 * rng.standard_normal(init.size) if c > 0 else init.copy()
        half = n_warm // 2
        state = nuts.init_chain(logdensity, theta0, rng)
        warm_draws = nuts.run_chain(
            logdensity, state, half, config.max_tree_depth, config.target_accept
        )
        if half >= 10:
            cov = np.atleast_2d(np.cov(warm_draws.T)) + 1e-6 * np.eye(init.size)
            cov = 0.8 * cov + 0.2 * np.diag(np.diag(cov))
            L = np.linalg.cholesky(cov)
        else:
            L = np.eye(init.size)
        target = _ScaledTarget(logdensity, L)
        state = nuts.init_chain(target, target.to_z(state.theta), rng)
        nuts.run_chain(target, state, n_warm - half, config.max_tree_depth, config.target_accept)
        nuts.freeze_adaptation(state)
        runner = _ChainRunner(state, target)
        chains.append(runner.draw(config.round_size, config))
        runners.append(runner)
        total += n_warm + config.round_size
    return chains, runners, total


def _check_health(runners, config: ChainConfig) -> None:
    n_div = sum(r.state.n_divergent for r in runners)
    n_draws = sum(r.state.n_draws for r in runners)
    if n_draws > 0 and n_div / n_draws > config.divergence_limit:
        rates = [r.state.n_divergent / max(r.state.n_draws, 1) for r in runners]
        raise SamplerHealthError(
            f"post-warmup divergence rate {n_div / n_draws:.1%} exceeds "
            f"{config.divergence_limit:.0%} (per chain: {rates})"
        )


def run_until_converged(logdensity, space: SpaceConfig, config: ChainConfig,
                        init=None) -> PosteriorSamples:
    """Sample in rounds until split R-hat < threshold or the budget is hit."""
    if init is None:
        rng0 = np.random.Generator(np.random.PCG64(np.random.SeedSequence(config.seed).spawn(config.n_chains + 1)[-1]))
        init = rng0.standard_normal(space.n_params)
    chains, runners, total = _start_chains(logdensity, init, config)
    stop_reason = "budget"
    converged = False
    max_psr = np.inf
    while True:
        max_psr = float(np.max(potential_scale_reduction(chains)))
        if max_psr < config.psr_threshold:
            stop_reason = "psr"
            converged = True
            break
        if total >= config.max_total_samples:
            stop_reason = "budget"
            break
        for c, runner in enumerate(runners):
            chains[c] = np.vstack([chains[c], runner.draw(config.round_size, config)])
            total += config.round_size
    _check_health(runners, config)
    samples = np.vstack(chains)
    chain_ids = np.concatenate([np.full(len(c), i, dtype=int) for i, c in enumerate(chains)])
    return PosteriorSamples(
        samples, chain_ids, space,
        converged=converged, max_psr=max_psr, total_draws=total, stop_reason=stop_reason,
    )


# --- estimators ---------------------------------------------------------

@dataclass
class RefineResult:
    theta: np.ndarray
    nll: float
    converged: bool


def _gradient_descent(nll_and_grad, theta0, max_steps: int = 500, gtol: float = 1e-6):
    """Plain gradient descent with Armijo backtracking line search."""
    theta = np.asarray(theta0, dtype=float).copy()
    val, grad = nll_and_grad(theta)
    for _ in range(max_steps):
        gnorm = float(np.linalg.norm(grad))
        if gnorm < gtol:
            return RefineResult(theta, val, True)
        step = 1.0
        for _ in range(50):
            cand = theta - step * grad
            try:
                cval, cgrad = nll_and_grad(cand)
            except FloatingPointError:
                cval = np.inf
            if cval <= val - 1e-4 * step * gnorm**2:
                theta, val, grad = cand, cval, cgrad
                break
            step *= 0.5
        else:
            return RefineResult(theta, val, False)
    return RefineResult(theta, val, float(np.linalg.norm(grad)) < gtol)


def estimate_max(posterior: PosteriorSamples, model, max_steps: int = 500,
                 gtol: float = 1e-6) -> UtilitySpec:
    """MAP-style estimate: best posterior sample refined by gradient descent.

    ``model`` must expose ``nll_many`` and ``nll``/``nll_grad`` (a
    :class:`~prefutil.preference.PreferenceModel` does).
    """
    if len(posterior) == 0:
        raise ValueError("empty posterior")
    nlls = model.nll_many(posterior.samples)
    best = posterior.samples[int(np.argmin(nlls))]

    def nll_and_grad(theta):
        return model.nll(theta), model.nll_grad(theta)

    refined = _gradient_descent(nll_and_grad, best, max_steps=max_steps, gtol=gtol)
    spec = decode(refined.theta, posterior.space)
    if posterior.space.interpretable:
        spec = normalize_weights(spec)
    return spec


def estimate_mean(posterior: PosteriorSamples, constrained: bool = False) -> UtilitySpec:
    """Coordinate-wise posterior mean, by default in unconstrained space."""
    if len(posterior) == 0:
        raise ValueError("empty posterior")
    if constrained:
        from .spaces import transform_to_unconstrained

        decoded = posterior.decoded()
        weights = np.mean([s.weights for s in decoded], axis=0)
        fields = np.mean(
            [[(t.b, t.d, t.pw) for t in s.terms] for s in decoded], axis=0
        )
        base = decoded[0]
        from .utility import MonotoneTerm

        terms = tuple(
            MonotoneTerm(t.y_min, t.y_max, f[0], f[1], f[2], t.m)
            for t, f in zip(base.terms, fields)
        )
        spec = UtilitySpec(base.space_kind, terms, weights)
    else:
        spec = decode(posterior.samples.mean(axis=0), posterior.space)
    if posterior.space.interpretable:
        spec = normalize_weights(spec)
    return spec


def estimate_dist(posterior: PosteriorSamples, k: int = 20_000, seed: int = 0) -> PosteriorSamples:
    """Seeded uniform subsample of the pooled posterior.

    Without replacement when ``k`` fits in the pool, with replacement
    otherwise; ``k`` equal to the pool size yields a permutation.
    """
    if len(posterior) == 0:
        raise ValueError("empty posterior")
    if k < 1:
        raise ValueError("k must be positive")
    rng = np.random.Generator(np.random.PCG64(seed))
    replace = k > len(posterior)
    idx = rng.choice(len(posterior), size=k, replace=replace)
    return PosteriorSamples(
        posterior.samples[idx],
        posterior.chain_ids[idx],
        posterior.space,
        converged=posterior.converged,
        max_psr=posterior.max_psr,
        total_draws=posterior.total_draws,
        stop_reason=posterior.stop_reason,
    )

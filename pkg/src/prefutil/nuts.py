"""No-U-Turn sampler with dual-averaging step-size adaptation.

Classic recursive doubling formulation (slice variable, identity mass
matrix). Step size adapts toward a target acceptance statistic during
warmup and is then frozen; everything is driven by a caller-supplied
``numpy.random.Generator`` so chains are reproducible and independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Energy-error threshold beyond which a trajectory counts as divergent.
DIVERGENCE_THRESHOLD = 1000.0

# Dual-averaging constants from the original algorithm.
_DA_GAMMA = 0.05
_DA_T0 = 10.0
_DA_KAPPA = 0.75


class SamplerHealthError(RuntimeError):
    """Raised when post-warmup divergences exceed the health threshold."""


@dataclass
class ChainState:
    """Resumable state of one NUTS chain."""

    theta: np.ndarray
    logp: float
    grad: np.ndarray
    step_size: float
    rng: np.random.Generator
    # dual-averaging state (active while adapting)
    adapting: bool = True
    da_iter: int = 0
    da_h_bar: float = 0.0
    da_log_eps_bar: float = 0.0
    da_mu: float = 0.0
    n_divergent: int = 0
    n_draws: int = 0


def _leapfrog(logp_and_grad, theta, r, grad, eps):
    r_half = r + 0.5 * eps * grad
    theta_new = theta + eps * r_half
    logp_new, grad_new = logp_and_grad(theta_new)
    r_new = r_half + 0.5 * eps * grad_new
    return theta_new, r_new, logp_new, grad_new


def find_reasonable_step_size(logp_and_grad, theta, rng) -> float:
    """Double/halve the step size until the one-step accept ratio crosses 1/2."""
    eps = 1.0
    logp, grad = logp_and_grad(theta)
    r = rng.standard_normal(theta.size)
    _, r1, logp1, _ = _leapfrog(logp_and_grad, theta, r, grad, eps)
    joint0 = logp - 0.5 * r @ r
    joint1 = logp1 - 0.5 * r1 @ r1
    if not np.isfinite(joint1):
        joint1 = -np.inf
    a = 1.0 if joint1 - joint0 > np.log(0.5) else -1.0
    for _ in range(100):
        eps *= 2.0**a
        _, r1, logp1, _ = _leapfrog(logp_and_grad, theta, r, grad, eps)
        joint1 = logp1 - 0.5 * r1 @ r1
        if not np.isfinite(joint1):
            joint1 = -np.inf
        if a * (joint1 - joint0) <= a * np.log(0.5):
            break
    return eps


def init_chain(logp_and_grad, theta0, rng) -> ChainState:
    theta0 = np.asarray(theta0, dtype=float)
    logp, grad = logp_and_grad(theta0)
    eps = find_reasonable_step_size(logp_and_grad, theta0, rng)
    state = ChainState(theta0, logp, grad, eps, rng)
    state.da_mu = np.log(10.0 * eps)
    return state


def _build_tree(logp_and_grad, theta, r, grad, logu, v, depth, eps, joint0, rng):
    if depth == 0:
        theta1, r1, logp1, grad1 = _leapfrog(logp_and_grad, theta, r, grad, v * eps)
        joint = logp1 - 0.5 * r1 @ r1
        if not np.isfinite(joint):
            joint = -np.inf
        n1 = int(logu <= joint)
        diverged = logu - DIVERGENCE_THRESHOLD >= joint
        alpha = min(1.0, np.exp(min(0.0, joint - joint0)))
        return (theta1, r1, grad1, theta1, r1, grad1, theta1, grad1, logp1, n1,
                not diverged, alpha, 1, diverged)
    # build left and right subtrees
    (tm, rm, gm, tp, rp, gp, t1, g1, lp1, n1, s1, a1, na1, div) = _build_tree(
        logp_and_grad, theta, r, grad, logu, v, depth - 1, eps, joint0, rng
    )
    if s1:
        if v == -1:
            (tm, rm, gm, _, _, _, t2, g2, lp2, n2, s2, a2, na2, div2) = _build_tree(
                logp_and_grad, tm, rm, gm, logu, v, depth - 1, eps, joint0, rng
            )
        else:
            (_, _, _, tp, rp, gp, t2, g2, lp2, n2, s2, a2, na2, div2) = _build_tree(
                logp_and_grad, tp, rp, gp, logu, v, depth - 1, eps, joint0, rng
            )
        if n1 + n2 > 0 and rng.random() < n2 / (n1 + n2):
            t1, g1, lp1 = t2, g2, lp2
        a1 += a2
        na1 += na2
        dtheta = tp - tm
        s1 = s2 and (dtheta @ rm >= 0) and (dtheta @ rp >= 0)
        n1 += n2
        div = div or div2
    return tm, rm, gm, tp, rp, gp, t1, g1, lp1, n1, s1, a1, na1, div


def nuts_step(logp_and_grad, state: ChainState, max_tree_depth: int, target_accept: float):
    """Advance one draw; adapts the step size while ``state.adapting``."""
    rng = state.rng
    theta, logp, grad = state.theta, state.logp, state.grad
    r0 = rng.standard_normal(theta.size)
    joint0 = logp - 0.5 * r0 @ r0
    logu = joint0 - rng.exponential()

    tm, rm, gm = theta, r0, grad
    tp, rp, gp = theta, r0, grad
    t_new, g_new, lp_new = theta, grad, logp
    depth, n, s = 0, 1, True
    alpha, n_alpha, diverged = 0.0, 1, False
    while s and depth < max_tree_depth:
        v = 1 if rng.random() < 0.5 else -1
        if v == -1:
            (tm, rm, gm, _, _, _, t1, g1, lp1, n1, s1, alpha, n_alpha, div) = _build_tree(
                logp_and_grad, tm, rm, gm, logu, v, depth, state.step_size, joint0, rng
            )
        else:
            (_, _, _, tp, rp, gp, t1, g1, lp1, n1, s1, alpha, n_alpha, div) = _build_tree(
                logp_and_grad, tp, rp, gp, logu, v, depth, state.step_size, joint0, rng
            )
        diverged = diverged or div
        if s1 and n1 > 0 and rng.random() < min(1.0, n1 / n):
            t_new, g_new, lp_new = t1, g1, lp1
        n += n1
        dtheta = tp - tm
        s = s1 and (dtheta @ rm >= 0) and (dtheta @ rp >= 0)
        depth += 1

    state.theta, state.logp, state.grad = t_new, lp_new, g_new
    state.n_draws += 1
    if diverged:
        state.n_divergent += 1

    if state.adapting:
        state.da_iter += 1
        it = state.da_iter
        accept_stat = alpha / max(n_alpha, 1)
        frac = 1.0 / (it + _DA_T0)
        state.da_h_bar = (1.0 - frac) * state.da_h_bar + frac * (target_accept - accept_stat)
        log_eps = state.da_mu - np.sqrt(it) / _DA_GAMMA * state.da_h_bar
        eta = it**-_DA_KAPPA
        state.da_log_eps_bar = eta * log_eps + (1.0 - eta) * state.da_log_eps_bar
        state.step_size = float(np.exp(log_eps))
    return state.theta, diverged


def freeze_adaptation(state: ChainState) -> None:
    """Fix the step size to the dual-averaged value for sampling."""
    if state.adapting:
        if state.da_iter > 0:
            state.step_size = float(np.exp(state.da_log_eps_bar))
        state.adapting = False
        state.n_divergent = 0
        state.n_draws = 0


def run_chain(logp_and_grad, state: ChainState, n_draws: int, max_tree_depth: int,
              target_accept: float) -> np.ndarray:
    """Draw ``n_draws`` samples from the current chain state."""
    out = np.empty((n_draws, state.theta.size))
    for i in range(n_draws):
        out[i], _ = nuts_step(logp_and_grad, state, max_tree_depth, target_accept)
    return out

"""Pairwise preferences and the preference likelihood.

Preferences are generated by scoring historical examples with the hidden
expert and orienting every unordered pair toward the higher score. The
likelihood of a parameter vector is the product of logistic fulfillment
probabilities over the preference set; the sampler targets its log plus
the (optional) prior and the transform Jacobian.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import spaces
from .spaces import SpaceConfig, decode_arrays, normalized_outputs
from .utility import DimensionMismatchError, UtilitySpec, eval_aggregate

_TINY = 1e-300


class NonFiniteLikelihoodError(FloatingPointError):
    """A non-finite likelihood or gradient signals a transform/parameter bug."""


@dataclass(frozen=True)
class Example:
    """One historical result: inputs, outputs, constraint values."""

    x: np.ndarray
    y: np.ndarray
    constraint_values: np.ndarray = field(default_factory=lambda: np.empty(0))
    feasible: bool = True

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        object.__setattr__(
            self, "constraint_values", np.asarray(self.constraint_values, dtype=float)
        )


@dataclass(frozen=True)
class Preference:
    """Indices into an example list; the first index won the comparison."""

    preferred: int
    dominated: int

    def __post_init__(self):
        if self.preferred == self.dominated:
            raise ValueError("a preference needs two distinct examples")


def generate_preferences(examples, expert) -> list[Preference]:
    """One oriented preference per unordered example pair.

    ``expert`` maps an output vector to a scalar score. Exact ties are
    skipped (measure-zero under continuous experts), so the result has at
    most N(N-1)/2 entries.
    """
    scores = [float(expert(ex.y)) for ex in examples]
    prefs = []
    for i in range(len(examples)):
        for j in range(i + 1, len(examples)):
            if scores[i] > scores[j]:
                prefs.append(Preference(i, j))
            elif scores[j] > scores[i]:
                prefs.append(Preference(j, i))
    return prefs


def fulfillment_probability(spec: UtilitySpec, y0, y1) -> float:
    """Logistic probability that ``y0`` is preferred over ``y1``."""
    diff = eval_aggregate(spec, y0) - eval_aggregate(spec, y1)
    return float(expit(diff))


def save_preferences_csv(prefs, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["preferred_index", "dominated_index"])
        for p in prefs:
            writer.writerow([p.preferred, p.dominated])


def load_preferences_csv(path) -> list[Preference]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            Preference(int(row["preferred_index"]), int(row["dominated_index"]))
            for row in reader
        ]


class PreferenceModel:
    """Vectorized negative log posterior of the preference data.

    Precomputes the normalized output matrix so repeated likelihood and
    gradient evaluations (the sampler's inner loop) stay cheap. All
    evaluations are pure functions of theta; safe for concurrent use.
    """

    def __init__(self, space: SpaceConfig, examples, preferences, include_prior: bool = True):
        self.space = space
        self.include_prior = include_prior
        Y = np.asarray([ex.y for ex in examples], dtype=float)
        if Y.ndim != 2 or Y.shape[1] != space.n_outputs:
            raise DimensionMismatchError(
                f"examples have {Y.shape[-1] if Y.size else 0} outputs, space expects {space.n_outputs}"
            )
        self.S = normalized_outputs(Y, space)
        self.i0 = np.asarray([p.preferred for p in preferences], dtype=int)
        self.i1 = np.asarray([p.dominated for p in preferences], dtype=int)
        self.n_params = space.n_params

    def _fold(self, coef):
        # J^T a with a_i = sum of +/- coef over preferences at example i
        n = self.S.shape[0]
        return np.bincount(self.i0, coef, n) - np.bincount(self.i1, coef, n)

    # -- internals --------------------------------------------------

    def _term_values(self, theta):
        b, d, pw, w = decode_arrays(theta, self.space)
        if self.space.learns_shape:
            z = np.clip((self.S - b) / d, 0.0, 1.0)
            u = z**pw
        else:
            z = u = self.S
        return b, d, pw, w, z, u

    def _diffs(self, g):
        return g[self.i0] - g[self.i1]

    # -- likelihood and prior parts ---------------------------------

    def likelihood_nll(self, theta) -> float:
        """-sum log sigmoid(utility difference), without prior/Jacobian."""
        *_, w, _, u = self._term_values(np.asarray(theta, dtype=float))
        diffs = self._diffs(u @ w)
        return float(np.sum(np.logaddexp(0.0, -diffs)))

    def prior_nll(self, theta) -> float:
        """Negative log prior plus transform log-Jacobian, up to constants.

        Uniform priors on b and d, log-uniform on pw: combined with the
        logit/log transforms these reduce to softplus(t) + softplus(-t)
        per shape coordinate. Informed weights get a half-normal(1) prior
        through the log transform, signed weights a standard normal.
        """
        theta = np.asarray(theta, dtype=float)
        k = self.space.n_outputs
        total = 0.0
        if self.space.learns_shape:
            shape = theta[: 3 * k]
            total += float(np.sum(np.logaddexp(0.0, shape) + np.logaddexp(0.0, -shape)))
            w_raw = theta[3 * k :]
        else:
            w_raw = theta
        if self.space.nonneg_weights:
            # Jacobian of w = exp(t) always applies; the half-normal
            # density is the optional prior part.
            total += float(-np.sum(w_raw))
            if self.include_prior:
                total += float(0.5 * np.sum(np.exp(2.0 * w_raw)))
        elif self.include_prior:
            total += float(0.5 * np.sum(w_raw**2))
        return total

    def _check_input(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if not np.all(np.isfinite(theta)):
            raise NonFiniteLikelihoodError(f"non-finite parameters theta={theta!r}")
        return theta

    def nll(self, theta) -> float:
        # overflow at extreme (but finite) theta means zero posterior
        # density; report it as infinite energy, not an error
        theta = self._check_input(theta)
        with np.errstate(over="ignore", invalid="ignore"):
            val = self.likelihood_nll(theta) + self.prior_nll(theta)
        return np.inf if np.isnan(val) else val

    def nll_grad(self, theta) -> np.ndarray:
        theta = self._check_input(theta)
        with np.errstate(over="ignore", invalid="ignore"):
            grad = self.likelihood_grad(theta) + self.prior_grad(theta)
        if not np.all(np.isfinite(grad)):
            # gradient at an infinite-energy point; any value rejects
            return np.zeros_like(grad)
        return grad

    def likelihood_grad(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        b, d, pw, w, z, u = self._term_values(theta)
        g = u @ w
        diffs = self._diffs(g)
        coef = expit(diffs) - 1.0  # d(-log sigmoid)/d diff
        a = self._fold(coef)

        k = self.space.n_outputs
        grad = np.zeros(self.n_params)
        if self.space.learns_shape:
            interior = (z > 0.0) & (z < 1.0)
            z_safe = np.maximum(z, _TINY)
            du_db = np.where(interior, -pw * z_safe ** (pw - 1.0) / d, 0.0)
            du_dd = np.where(interior, -pw * u / d, 0.0)
            du_dpw = np.where(z > 0.0, u * np.log(z_safe), 0.0)
            # chain through the logit/log reparameterizations
            sb = _sig(theta[0 : 3 * k : 3])
            sd = _sig(theta[1 : 3 * k : 3])
            sp = _sig(theta[2 : 3 * k : 3])
            db_dt = sb * (1.0 - sb)
            dd_dt = (1.0 - self.space.d_floor) * sd * (1.0 - sd)
            dpw_dt = pw * (np.log(self.space.pw_hi) - np.log(self.space.pw_lo)) * sp * (1.0 - sp)
            grad[0 : 3 * k : 3] = (a @ du_db) * w * db_dt
            grad[1 : 3 * k : 3] = (a @ du_dd) * w * dd_dt
            grad[2 : 3 * k : 3] = (a @ du_dpw) * w * dpw_dt
            dg_dw = a @ u
            grad[3 * k :] = dg_dw * w if self.space.nonneg_weights else dg_dw
        else:
            grad[:] = a @ u
        return grad

    def prior_grad(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        k = self.space.n_outputs
        grad = np.zeros(self.n_params)
        if self.space.learns_shape:
            shape = theta[: 3 * k]
            grad[: 3 * k] = 2.0 * _sig(shape) - 1.0
            w_raw = theta[3 * k :]
            w_slice = slice(3 * k, None)
        else:
            w_raw = theta
            w_slice = slice(None)
        if self.space.nonneg_weights:
            grad[w_slice] += -1.0
            if self.include_prior:
                grad[w_slice] += np.exp(2.0 * w_raw)
        elif self.include_prior:
            grad[w_slice] += w_raw
        return grad

    # -- sampler interface -------------------------------------------

    def nll_and_grad(self, theta):
        """Value and gradient in one pass (the sampler's hot path)."""
        theta = self._check_input(theta)
        with np.errstate(over="ignore", invalid="ignore"):
            return self._nll_and_grad_unchecked(theta)

    def _nll_and_grad_unchecked(self, theta):
        b, d, pw, w, z, u = self._term_values(theta)
        g = u @ w
        diffs = self._diffs(g)
        val = float(np.sum(np.logaddexp(0.0, -diffs))) + self.prior_nll(theta)

        coef = expit(diffs) - 1.0
        a = self._fold(coef)
        k = self.space.n_outputs
        grad = np.zeros(self.n_params)
        if self.space.learns_shape:
            interior = (z > 0.0) & (z < 1.0)
            z_safe = np.maximum(z, _TINY)
            du_db = np.where(interior, -pw * z_safe ** (pw - 1.0) / d, 0.0)
            du_dd = np.where(interior, -pw * u / d, 0.0)
            du_dpw = np.where(z > 0.0, u * np.log(z_safe), 0.0)
            sb = _sig(theta[0 : 3 * k : 3])
            sd = _sig(theta[1 : 3 * k : 3])
            sp = _sig(theta[2 : 3 * k : 3])
            grad[0 : 3 * k : 3] = (a @ du_db) * w * sb * (1.0 - sb)
            grad[1 : 3 * k : 3] = (a @ du_dd) * w * (1.0 - self.space.d_floor) * sd * (1.0 - sd)
            grad[2 : 3 * k : 3] = (
                (a @ du_dpw) * w * pw
                * (np.log(self.space.pw_hi) - np.log(self.space.pw_lo)) * sp * (1.0 - sp)
            )
            dg_dw = a @ u
            grad[3 * k :] = dg_dw * w if self.space.nonneg_weights else dg_dw
        else:
            grad[:] = a @ u
        grad += self.prior_grad(theta)
        if not (np.isfinite(val) and np.all(np.isfinite(grad))):
            # infinite-energy point (overflow in the tails): the sampler
            # treats it as a divergence and rejects
            return np.inf, np.zeros_like(grad)
        return val, grad

    def logdensity_and_grad(self, theta):
        val, grad = self.nll_and_grad(theta)
        return -val, -grad

    def nll_many(self, thetas, chunk: int = 512) -> np.ndarray:
        """Likelihood+prior NLL for a batch of vectors, shape (n,)."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        g = spaces.utility_batch(thetas, self.S, self.space, chunk=chunk)
        diffs = g[:, self.i0] - g[:, self.i1]
        like = np.sum(np.logaddexp(0.0, -diffs), axis=1)
        priors = np.array([self.prior_nll(t) for t in thetas])
        return like + priors


def _sig(t):
    return expit(t)


def negative_log_likelihood(theta, prefs, examples, space: SpaceConfig) -> float:
    """Negative log posterior (likelihood + prior + Jacobian) at ``theta``."""
    return PreferenceModel(space, examples, prefs).nll(theta)


def nll_gradient(theta, prefs, examples, space: SpaceConfig) -> np.ndarray:
    """Gradient of :func:`negative_log_likelihood` with respect to theta."""
    return PreferenceModel(space, examples, prefs).nll_grad(theta)

"""Function-space configuration and the unconstrained parameter transform.

Gradient-based sampling needs an unconstrained parameter vector. The
transform used here is a bijection between valid utility specs and all of
R^P: logit for the offset ``b`` and (rescaled) width ``d``, logit of the
normalized log for the power ``pw``, identity for signed weights and log
for nonnegative weights.

The flat layout is ``[b_0, d_0, pw_0, ..., b_{k-1}, d_{k-1}, pw_{k-1},
w_0, ..., w_{k-1}]`` for term-learning spaces, and just the weights for
the linear space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from .utility import (
    D_FLOOR,
    PW_HI,
    PW_LO,
    MonotoneTerm,
    SpaceKind,
    UtilitySpec,
    default_free_mask,
)


@dataclass(frozen=True)
class SpaceConfig:
    """Everything needed to decode a flat parameter vector into a spec."""

    kind: SpaceKind
    y_min: tuple[float, ...]
    y_max: tuple[float, ...]
    m: tuple[int, ...]
    d_floor: float = D_FLOOR
    pw_lo: float = PW_LO
    pw_hi: float = PW_HI

    def __post_init__(self):
        if not (len(self.y_min) == len(self.y_max) == len(self.m)):
            raise ValueError("per-term field lengths differ")

    @property
    def n_outputs(self) -> int:
        return len(self.y_min)

    @property
    def learns_shape(self) -> bool:
        return self.kind is not SpaceKind.LINEAR

    @property
    def nonneg_weights(self) -> bool:
        return self.kind is SpaceKind.INFORMED

    @property
    def interpretable(self) -> bool:
        """Whether decoded functions get the L1 weight normalization."""
        return self.kind is SpaceKind.INFORMED

    @property
    def n_params(self) -> int:
        k = self.n_outputs
        return 4 * k if self.learns_shape else k

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "y_min": list(self.y_min),
            "y_max": list(self.y_max),
            "m": list(self.m),
            "d_floor": self.d_floor,
            "pw_lo": self.pw_lo,
            "pw_hi": self.pw_hi,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SpaceConfig":
        return cls(
            SpaceKind(doc["kind"]),
            tuple(doc["y_min"]),
            tuple(doc["y_max"]),
            tuple(doc["m"]),
            doc.get("d_floor", D_FLOOR),
            doc.get("pw_lo", PW_LO),
            doc.get("pw_hi", PW_HI),
        )


def linear_space(output_ranges) -> SpaceConfig:
    lo, hi = _split_ranges(output_ranges)
    return SpaceConfig(SpaceKind.LINEAR, lo, hi, (1,) * len(lo))


def adaptable_space(output_ranges) -> SpaceConfig:
    """Fully learned terms over the general output bounds.

    Direction is encoded by the weight sign (m fixed to +1 internally),
    which keeps the sampled space continuous.
    """
    lo, hi = _split_ranges(output_ranges)
    return SpaceConfig(SpaceKind.ADAPTABLE, lo, hi, (1,) * len(lo))


def informed_space(output_ranges, truncated=None, m=None) -> SpaceConfig:
    """Expert-fixed bounds and directions; only shape and weights learned.

    For outputs whose expert term is truncated at half range, the upper
    saturation bound is the range midpoint so the learned term saturates
    where the expert stops caring.
    """
    lo, hi = _split_ranges(output_ranges)
    k = len(lo)
    truncated = tuple(truncated) if truncated is not None else (False,) * k
    y_max = tuple(
        (l + h) / 2.0 if t else h for (l, h, t) in zip(lo, hi, truncated)
    )
    m = tuple(m) if m is not None else (1,) * k
    return SpaceConfig(SpaceKind.INFORMED, lo, y_max, m)


def make_space(kind, output_ranges, truncated=None) -> SpaceConfig:
    kind = SpaceKind(kind)
    if kind is SpaceKind.LINEAR:
        return linear_space(output_ranges)
    if kind is SpaceKind.ADAPTABLE:
        return adaptable_space(output_ranges)
    return informed_space(output_ranges, truncated=truncated)


def _split_ranges(output_ranges):
    arr = np.asarray(output_ranges, dtype=float)
    return tuple(arr[:, 0]), tuple(arr[:, 1])


# --- transform / decode -------------------------------------------------

def decode_arrays(theta: np.ndarray, space: SpaceConfig):
    """Decode a batch of flat vectors into constrained parameter arrays.

    ``theta`` has shape ``(..., n_params)``; returns ``(b, d, pw, w)``
    arrays of shape ``(..., k)``. For the linear space b/d/pw are the
    identity-term constants.
    """
    theta = np.asarray(theta, dtype=float)
    k = space.n_outputs
    if theta.shape[-1] != space.n_params:
        raise ValueError(f"expected {space.n_params} parameters, got {theta.shape[-1]}")
    if space.learns_shape:
        shape = theta[..., : 3 * k].reshape(theta.shape[:-1] + (k, 3))
        b = expit(shape[..., 0])
        d = space.d_floor + (1.0 - space.d_floor) * expit(shape[..., 1])
        log_pw = np.log(space.pw_lo) + (np.log(space.pw_hi) - np.log(space.pw_lo)) * expit(
            shape[..., 2]
        )
        pw = np.exp(log_pw)
        w_raw = theta[..., 3 * k :]
    else:
        ones = np.ones(theta.shape[:-1] + (k,))
        b, d, pw = 0.0 * ones, ones, ones.copy()
        w_raw = theta
    w = np.exp(w_raw) if space.nonneg_weights else w_raw
    return b, d, pw, w


def decode(theta: np.ndarray, space: SpaceConfig) -> UtilitySpec:
    """Total decoding of one flat vector into a valid utility spec."""
    b, d, pw, w = decode_arrays(np.atleast_1d(np.asarray(theta, dtype=float)), space)
    terms = tuple(
        MonotoneTerm(
            space.y_min[i],
            space.y_max[i],
            float(np.clip(b[i], 0.0, 1.0)),
            float(np.clip(d[i], space.d_floor, 1.0)),
            float(np.clip(pw[i], space.pw_lo, space.pw_hi)),
            space.m[i],
        )
        for i in range(space.n_outputs)
    )
    return UtilitySpec(space.kind, terms, w, free_mask=default_free_mask(space.kind))


def transform_to_unconstrained(spec: UtilitySpec, space: SpaceConfig) -> np.ndarray:
    """Inverse of :func:`decode` on valid specs (exact up to float error)."""
    if spec.n_outputs != space.n_outputs:
        raise ValueError("spec/space dimensionality mismatch")
    parts = []
    if space.learns_shape:
        for t in spec.terms:
            u_d = (t.d - space.d_floor) / (1.0 - space.d_floor)
            u_pw = (np.log(t.pw) - np.log(space.pw_lo)) / (
                np.log(space.pw_hi) - np.log(space.pw_lo)
            )
            parts.extend([logit(t.b), logit(u_d), logit(u_pw)])
    w = spec.weights
    if space.nonneg_weights:
        parts.extend(np.log(w))
    else:
        parts.extend(w)
    return np.asarray(parts, dtype=float)


def normalized_outputs(Y: np.ndarray, space: SpaceConfig) -> np.ndarray:
    """Per-term normalized (and direction-reflected) outputs, shape (n, k)."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    lo = np.asarray(space.y_min)
    hi = np.asarray(space.y_max)
    S = np.clip((Y - lo) / (hi - lo), 0.0, 1.0)
    m = np.asarray(space.m)
    if np.any(m == -1):
        S = np.where(m == -1, 1.0 - S, S)
    return S


def utility_batch(
    thetas: np.ndarray,
    S: np.ndarray,
    space: SpaceConfig,
    normalize: bool = False,
    chunk: int = 512,
) -> np.ndarray:
    """Aggregate utilities for many parameter vectors at once.

    ``thetas`` is ``(n_samples, n_params)``, ``S`` the precomputed
    normalized outputs ``(n_points, k)``; returns ``(n_samples,
    n_points)``. Chunked over samples to bound memory.
    """
    thetas = np.atleast_2d(thetas)
    out = np.empty((thetas.shape[0], S.shape[0]))
    for start in range(0, thetas.shape[0], chunk):
        t = thetas[start : start + chunk]
        b, d, pw, w = decode_arrays(t, space)
        if normalize:
            w = w / np.sum(np.abs(w), axis=-1, keepdims=True)
        z = np.clip((S[None, :, :] - b[:, None, :]) / d[:, None, :], 0.0, 1.0)
        u = z ** pw[:, None, :]
        out[start : start + chunk] = np.einsum("spk,sk->sp", u, w)
    return out

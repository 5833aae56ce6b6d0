"""Parametric monotone utility functions and their linear aggregation.

A utility function maps a multi-dimensional problem output to a scalar
score. Each output dimension gets a bounded monotone term; the full
function is a weighted sum of the per-dimension terms. Three function
spaces are supported:

* ``linear`` -- weighted sum of range-normalized outputs (terms are fixed
  to the identity configuration, only the signed weights are free),
* ``adaptable`` -- per-term shape (offset, width, power) is learned and
  the direction is encoded by the sign of the weight,
* ``informed`` -- like adaptable, but direction and saturation bounds are
  fixed from expert knowledge and weights are nonnegative; after weight
  normalization the aggregate lives in [0, 1].
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

# Bounds of the learnable term parameters. The width floor keeps the
# monotone segment from degenerating into a step; the power range covers
# symmetric convex/concave shapes around the identity.
D_FLOOR = 1e-3
PW_LO = 0.25
PW_HI = 4.0


class SpaceKind(str, Enum):
    LINEAR = "linear"
    ADAPTABLE = "adaptable"
    INFORMED = "informed"


class InvalidBoundsError(ValueError):
    """Raised when a saturation interval is empty or inverted."""


class DegenerateWeightsError(ValueError):
    """Raised when all aggregation weights are zero."""


class DimensionMismatchError(ValueError):
    """Raised when an output vector does not match the spec dimensionality."""


def normalize_output(y, y_min: float, y_max: float):
    """Map ``y`` onto [0, 1] by the saturation bounds, clamping outside.

    Accepts scalars or arrays.
    """
    if not y_min < y_max:
        raise InvalidBoundsError(f"y_min={y_min} must be strictly below y_max={y_max}")
    return np.clip((np.asarray(y, dtype=float) - y_min) / (y_max - y_min), 0.0, 1.0)


@dataclass(frozen=True)
class MonotoneTerm:
    """Per-output-dimension parameters of one bounded monotone term."""

    y_min: float
    y_max: float
    b: float = 0.0
    d: float = 1.0
    pw: float = 1.0
    m: int = 1

    def __post_init__(self):
        if not self.y_min < self.y_max:
            raise InvalidBoundsError(
                f"y_min={self.y_min} must be strictly below y_max={self.y_max}"
            )
        if not 0.0 <= self.b <= 1.0:
            raise ValueError(f"b={self.b} outside [0, 1]")
        if not D_FLOOR <= self.d <= 1.0:
            raise ValueError(f"d={self.d} outside [{D_FLOOR}, 1]")
        if not PW_LO <= self.pw <= PW_HI:
            raise ValueError(f"pw={self.pw} outside [{PW_LO}, {PW_HI}]")
        if self.m not in (-1, 1):
            raise ValueError(f"m={self.m} must be -1 or +1")

    def __call__(self, y):
        return eval_monotone_term(self, y)


def eval_monotone_term(params: MonotoneTerm, y):
    """Evaluate one monotone term; result is in [0, 1].

    The direction flag is applied by reflecting the normalized input
    (s -> 1 - s for a falling term), which keeps the offset/width
    semantics identical for both directions. The base of the power is
    clamped to [0, 1] before exponentiation so non-integer powers stay
    defined.
    """
    s = normalize_output(y, params.y_min, params.y_max)
    if params.m == -1:
        s = 1.0 - s
    z = np.clip((s - params.b) / params.d, 0.0, 1.0)
    return z**params.pw


@dataclass
class UtilitySpec:
    """A full utility function: one term per output plus aggregation weights."""

    space_kind: SpaceKind
    terms: tuple[MonotoneTerm, ...]
    weights: np.ndarray
    free_mask: dict = field(default=None)

    def __post_init__(self):
        self.space_kind = SpaceKind(self.space_kind)
        self.terms = tuple(self.terms)
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.terms) != self.weights.size:
            raise DimensionMismatchError(
                f"{len(self.terms)} terms vs {self.weights.size} weights"
            )
        if self.free_mask is None:
            self.free_mask = default_free_mask(self.space_kind)
        if self.space_kind is SpaceKind.INFORMED and np.any(self.weights < 0):
            raise ValueError("informed specs require nonnegative weights")

    @property
    def n_outputs(self) -> int:
        return len(self.terms)

    def __call__(self, y):
        return eval_aggregate(self, y)


def default_free_mask(kind: SpaceKind) -> dict:
    """Which per-term fields and the weights are learnable for a space kind."""
    if kind is SpaceKind.LINEAR:
        term_fields = []
    else:
        # Direction is never sampled: informed fixes it from expert
        # knowledge, adaptable encodes it in the weight sign.
        term_fields = ["b", "d", "pw"]
    return {
        "term_fields": term_fields,
        "weights": True,
        "fixed_fields": [f for f in ("y_min", "y_max", "b", "d", "pw", "m") if f not in term_fields],
    }


def eval_aggregate(spec: UtilitySpec, y):
    """Weighted sum of the per-dimension terms.

    ``y`` may be a single output vector of length ``n_outputs`` or an
    array of shape ``(n, n_outputs)``.
    """
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != spec.n_outputs:
        raise DimensionMismatchError(
            f"output vector of length {y.shape[-1]}, spec has {spec.n_outputs} terms"
        )
    vals = np.stack(
        [eval_monotone_term(t, y[..., i]) for i, t in enumerate(spec.terms)], axis=-1
    )
    return vals @ spec.weights


def normalize_weights(spec: UtilitySpec) -> UtilitySpec:
    """Rescale weights so their absolute values sum to one.

    Signs are preserved for linear specs; for adaptable specs a negative
    weight is presented as a falling term instead (m flipped, weight made
    positive), which keeps each term's monotone direction readable from
    the direction flag alone.
    """
    total = np.sum(np.abs(spec.weights))
    if total == 0:
        raise DegenerateWeightsError("all weights are zero")
    w = spec.weights / total
    terms = spec.terms
    if spec.space_kind is SpaceKind.ADAPTABLE and np.any(w < 0):
        terms = tuple(
            MonotoneTerm(t.y_min, t.y_max, t.b, t.d, t.pw, -t.m) if wi < 0 else t
            for t, wi in zip(terms, w)
        )
        w = np.abs(w)
    return UtilitySpec(spec.space_kind, terms, w, free_mask=spec.free_mask)


def posterior_mean_utility(specs: Iterable[UtilitySpec], y):
    """Arithmetic mean of the aggregate utility over posterior samples.

    This is the full Bayesian mean of the utility, not the utility of the
    mean parameters; the two coincide only for linear function spaces.
    ``specs`` may be any iterable of decoded posterior samples (see
    ``PosteriorSamples.utility_mean`` for the vectorized variant).
    """
    specs = list(specs)
    if not specs:
        raise ValueError("empty posterior")
    return sum(eval_aggregate(s, y) for s in specs) / len(specs)


# --- JSON serialization -------------------------------------------------

def spec_to_dict(spec: UtilitySpec) -> dict:
    return {
        "space_kind": spec.space_kind.value,
        "terms": [
            {"y_min": t.y_min, "y_max": t.y_max, "b": t.b, "d": t.d, "pw": t.pw, "m": t.m}
            for t in spec.terms
        ],
        "weights": spec.weights.tolist(),
        "free_mask": spec.free_mask,
    }


def spec_from_dict(doc: dict) -> UtilitySpec:
    terms = tuple(MonotoneTerm(**t) for t in doc["terms"])
    return UtilitySpec(
        SpaceKind(doc["space_kind"]),
        terms,
        np.asarray(doc["weights"], dtype=float),
        free_mask=doc.get("free_mask"),
    )


def save_spec(spec: UtilitySpec, path) -> None:
    with open(path, "w") as fh:
        json.dump(spec_to_dict(spec), fh, indent=2)


def load_spec(path) -> UtilitySpec:
    with open(path) as fh:
        return spec_from_dict(json.load(fh))

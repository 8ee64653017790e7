"""Fuzzy partition of the THD axis and threshold discrimination.

THD values are expressed in percent throughout this module.  A partition is
an ordered list of labeled membership functions; classification is argmax
membership with ties broken by partition order.  No defuzzification to a
crisp number is done: category inference is the whole job.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Tuple, Union

import numpy as np

from .errors import ValidationError

COVERAGE_MIN = 0.05
_COVERAGE_STEP = 0.1


@dataclass(frozen=True)
class GaussianMF:
    center: float
    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0):
            raise ValidationError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class SigmoidMF:
    """Logistic curve; negative slope gives a descending boundary set."""

    midpoint: float
    slope: float

    def __post_init__(self):
        if self.slope == 0:
            raise ValidationError("slope must be nonzero")


MembershipFunction = Union[GaussianMF, SigmoidMF]


def membership(fn: MembershipFunction, x: float) -> float:
    """Degree of membership in [0, 1] of value x."""
    if isinstance(fn, GaussianMF):
        z = (x - fn.center) / fn.sigma
        return math.exp(-0.5 * z * z)
    if isinstance(fn, SigmoidMF):
        a = fn.slope * (x - fn.midpoint)
        # Evaluate the saturated branch directly to avoid overflow in exp.
        if a >= 0:
            return 1.0 / (1.0 + math.exp(-a))
        e = math.exp(a)
        return e / (1.0 + e)
    raise ValidationError(f"unknown membership function type {type(fn).__name__}")


@dataclass(frozen=True)
class FuzzyPartition:
    """Ordered labeled sets over a span of the THD axis (percent)."""

    sets: Tuple[Tuple[str, MembershipFunction], ...]
    domain_span: Tuple[float, float] = (0.0, 50.0)

    def __post_init__(self):
        object.__setattr__(self, "sets", tuple((str(l), f) for l, f in self.sets))
        object.__setattr__(self, "domain_span", tuple(self.domain_span))
        if len(self.sets) < 2:
            raise ValidationError("partition needs at least 2 sets")
        labels = [label for label, _ in self.sets]
        if len(set(labels)) != len(labels):
            raise ValidationError(f"duplicate labels in partition: {labels}")
        lo, hi = self.domain_span
        if not (lo < hi):
            raise ValidationError(f"invalid domain span {self.domain_span}")
        for x in np.arange(lo, hi + _COVERAGE_STEP / 2, _COVERAGE_STEP):
            if max(membership(fn, float(x)) for _, fn in self.sets) < COVERAGE_MIN:
                raise ValidationError(
                    f"partition leaves x={float(x):g} uncovered (max membership < {COVERAGE_MIN})"
                )

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(label for label, _ in self.sets)


@dataclass(frozen=True)
class Classification:
    label: str
    memberships: Dict[str, float]

    def __post_init__(self):
        if self.label not in self.memberships:
            raise ValidationError(f"label {self.label!r} missing from memberships")
        values = list(self.memberships.values())
        if any(not (0.0 <= m <= 1.0) for m in values):
            raise ValidationError("memberships must lie in [0, 1]")
        if self.memberships[self.label] < max(values):
            raise ValidationError("label must attain the maximum membership")


def fuzzify(p: FuzzyPartition, x: float) -> Dict[str, float]:
    """Evaluate every set of the partition at x."""
    return {label: membership(fn, x) for label, fn in p.sets}


def classify(p: FuzzyPartition, x: float) -> Classification:
    """Argmax-membership category; ties go to the earlier-ordered set."""
    grades = fuzzify(p, x)
    best = max(grades.values())
    for label, _ in p.sets:
        if grades[label] == best:
            return Classification(label, grades)
    raise AssertionError("unreachable: argmax label not found")


def default_partition() -> FuzzyPartition:
    """Five linguistic sets over THD percent.

    Sigmoid boundaries at both ends with three Gaussian sets in the middle;
    parameters span the useful 0-50 percent range and are ordinary config
    defaults, not calibrated values.
    """
    return FuzzyPartition(
        sets=(
            ("very low", SigmoidMF(midpoint=5.0, slope=-1.5)),
            ("low", GaussianMF(center=10.0, sigma=4.0)),
            ("medium", GaussianMF(center=20.0, sigma=4.0)),
            ("high", GaussianMF(center=30.0, sigma=4.0)),
            ("very high", SigmoidMF(midpoint=38.0, slope=1.5)),
        ),
        domain_span=(0.0, 50.0),
    )


def threshold_discriminate(value: float, threshold: float) -> str:
    """Two-way split of a scalar; equality counts as "above"."""
    return "above" if value >= threshold else "below"


def partition_to_dict(p: FuzzyPartition) -> dict:
    sets = []
    for label, fn in p.sets:
        if isinstance(fn, GaussianMF):
            sets.append({"label": label, "kind": "gaussian", "center": fn.center, "sigma": fn.sigma})
        else:
            sets.append(
                {"label": label, "kind": "sigmoid", "midpoint": fn.midpoint, "slope": fn.slope}
            )
    return {"domain_span": list(p.domain_span), "sets": sets}


def partition_from_dict(d: dict) -> FuzzyPartition:
    sets = []
    for s in d["sets"]:
        if s["kind"] == "gaussian":
            fn: MembershipFunction = GaussianMF(s["center"], s["sigma"])
        elif s["kind"] == "sigmoid":
            fn = SigmoidMF(s["midpoint"], s["slope"])
        else:
            raise ValidationError(f"unknown membership function kind {s['kind']!r}")
        sets.append((s["label"], fn))
    return FuzzyPartition(tuple(sets), tuple(d.get("domain_span", (0.0, 50.0))))

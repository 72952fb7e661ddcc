"""Hyperparameter domains, the default search space, validation, and uniform sampling.

A :class:`SearchSpace` is an ordered list of named domains. The default space
covers the three training hyperparameters this package tunes: learning rate
(log-uniform), batch size (categorical), and momentum (linear).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class SpaceError(ValueError):
    """Raised for structurally invalid domains or spaces."""


@dataclass(frozen=True)
class ContinuousLinear:
    """A continuous interval sampled uniformly in natural coordinates."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise SpaceError(f"bounds must be finite, got ({self.lo}, {self.hi})")
        if not self.lo < self.hi:
            raise SpaceError(f"lo must be < hi, got ({self.lo}, {self.hi})")


@dataclass(frozen=True)
class ContinuousLog:
    """A continuous interval sampled uniformly in log10 coordinates.

    Chosen for ranges spanning several orders of magnitude (the learning
    rate spans four), where linear sampling would starve the low decades.
    """

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise SpaceError(f"bounds must be finite, got ({self.lo}, {self.hi})")
        if self.lo <= 0:
            raise SpaceError(f"log domain requires lo > 0, got {self.lo}")
        if not self.lo < self.hi:
            raise SpaceError(f"lo must be < hi, got ({self.lo}, {self.hi})")


@dataclass(frozen=True)
class Categorical:
    """A finite set of positive integers, listed in ascending order."""

    values: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.values:
            raise SpaceError("categorical domain needs at least one value")
        if any((not isinstance(v, int)) or v <= 0 for v in self.values):
            raise SpaceError(f"categorical values must be positive integers, got {self.values}")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise SpaceError(f"categorical values must be distinct and ascending, got {self.values}")


Domain = ContinuousLinear | ContinuousLog | Categorical


@dataclass(frozen=True)
class SearchSpace:
    """Ordered, uniquely named dimensions."""

    dimensions: tuple[tuple[str, Domain], ...]

    def __post_init__(self) -> None:
        names = [name for name, _ in self.dimensions]
        if len(set(names)) != len(names):
            raise SpaceError(f"dimension names must be unique, got {names}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.dimensions)

    def domain(self, name: str) -> Domain:
        for dim_name, domain in self.dimensions:
            if dim_name == name:
                return domain
        raise SpaceError(f"no dimension named {name!r}")


@dataclass(frozen=True)
class HyperparameterSet:
    """One candidate configuration.

    Plain value holder: out-of-range or pathological values (a batch size of
    zero from a raw model response, say) must be representable so that
    :func:`validate` can report them instead of construction failing.
    """

    learning_rate: float
    momentum: float
    batch_size: int


@dataclass(frozen=True)
class Violation:
    dimension: str
    value: float
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def valid(self) -> bool:
        return not self.violations


# Canonical dimension names understood when assembling/validating a
# HyperparameterSet against a space.
DIMENSION_FIELDS = ("learning_rate", "momentum", "batch_size")


def default_search_space() -> SearchSpace:
    """The three-dimension space used throughout: learning rate log-uniform
    on [0.0001, 1], batch size from {4, 5, 8, 16, 32, 64}, momentum uniform
    on [0.01, 0.99]."""
    return SearchSpace(
        dimensions=(
            ("learning_rate", ContinuousLog(0.0001, 1.0)),
            ("batch_size", Categorical((4, 5, 8, 16, 32, 64))),
            ("momentum", ContinuousLinear(0.01, 0.99)),
        )
    )


def value_of(params: HyperparameterSet, dimension: str) -> float:
    if dimension not in DIMENSION_FIELDS:
        raise SpaceError(f"unknown dimension {dimension!r}; expected one of {DIMENSION_FIELDS}")
    return getattr(params, dimension)


def validate(params: HyperparameterSet, space: SearchSpace) -> ValidationReport:
    """Screen a candidate against a space.

    Total by design: never raises on numeric input, it enumerates every
    violation so callers can distinguish pathology kinds.
    """
    violations: list[Violation] = []
    for name, domain in space.dimensions:
        if name not in DIMENSION_FIELDS:
            violations.append(Violation(name, float("nan"), "no such hyperparameter field"))
            continue
        value = getattr(params, name)
        try:
            numeric = float(value)
        except (TypeError, ValueError):
            violations.append(Violation(name, float("nan"), f"not numeric: {value!r}"))
            continue
        if isinstance(domain, (ContinuousLinear, ContinuousLog)):
            if not math.isfinite(numeric):
                violations.append(Violation(name, numeric, "not finite"))
            elif not (domain.lo <= numeric <= domain.hi):
                violations.append(
                    Violation(name, numeric, f"outside [{domain.lo}, {domain.hi}]")
                )
        else:
            if not math.isfinite(numeric) or numeric != int(numeric) or int(numeric) not in domain.values:
                violations.append(
                    Violation(name, numeric, f"not a member of {domain.values}")
                )
    return ValidationReport(tuple(violations))


def sample_domain(domain: Domain, rng: np.random.Generator) -> float | int:
    """Draw one value: uniform for linear, log10-uniform for log domains,
    uniform over members for categoricals."""
    if isinstance(domain, ContinuousLinear):
        return float(rng.uniform(domain.lo, domain.hi))
    if isinstance(domain, ContinuousLog):
        return float(10.0 ** rng.uniform(math.log10(domain.lo), math.log10(domain.hi)))
    return int(domain.values[rng.integers(len(domain.values))])


def sample_uniform(space: SearchSpace, rng: np.random.Generator) -> HyperparameterSet:
    """Draw an independent uniform sample from each dimension.

    Deterministic for a given generator state; dimensions are consumed in
    space order.
    """
    drawn: dict[str, float | int] = {}
    for name, domain in space.dimensions:
        drawn[name] = sample_domain(domain, rng)
    missing = [f for f in DIMENSION_FIELDS if f not in drawn]
    if missing:
        raise SpaceError(f"space lacks dimensions {missing}; cannot assemble a hyperparameter set")
    return HyperparameterSet(
        learning_rate=float(drawn["learning_rate"]),
        momentum=float(drawn["momentum"]),
        batch_size=int(drawn["batch_size"]),
    )

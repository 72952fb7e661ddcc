"""Tree-structured Parzen Estimator sampler, built from scratch.

Observed trials are split by error rank into a "good" and a "bad" set. Each
dimension gets two densities: ``l`` fitted on the good values and ``g`` on
the bad ones. Continuous densities are mixtures of truncated Gaussians (one
component per observation plus a wide uniform-ish prior); categoricals get
smoothed count estimates. Candidates are drawn from ``l`` and the one
maximizing the ratio ``l(x)/g(x)`` is proposed, independently per dimension.

Log-scaled dimensions are modeled entirely in log10 coordinates; values are
converted at the module boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import erf, ndtri

from .space import (
    Categorical,
    ContinuousLinear,
    ContinuousLog,
    HyperparameterSet,
    SearchSpace,
    sample_uniform,
    value_of,
)

_SQRT2 = math.sqrt(2.0)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


class TpeError(ValueError):
    pass


@dataclass(frozen=True)
class TpeConfig:
    """Sampler settings.

    Defaults follow common TPE practice: top quartile counts as good, ten
    random startup trials, 24 acquisition candidates, a bandwidth floor of
    1% of the range, and a unit-weight prior component.
    """

    gamma: float = 0.25
    n_startup: int = 10
    n_ei_candidates: int = 24
    bandwidth_floor: float = 0.01
    prior_weight: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma < 1.0:
            raise TpeError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.n_startup < 1:
            raise TpeError(f"n_startup must be >= 1, got {self.n_startup}")
        if self.n_ei_candidates < 1:
            raise TpeError(f"n_ei_candidates must be >= 1, got {self.n_ei_candidates}")
        if self.bandwidth_floor <= 0:
            raise TpeError(f"bandwidth_floor must be positive, got {self.bandwidth_floor}")
        if self.prior_weight <= 0:
            raise TpeError(f"prior_weight must be positive, got {self.prior_weight}")


def _norm_cdf(z: np.ndarray | float) -> np.ndarray:
    return 0.5 * (1.0 + erf(np.asarray(z, dtype=float) / _SQRT2))


class ParzenEstimator:
    """Weighted mixture of truncated Gaussians on a bounded interval.

    Coordinates are the sampling coordinates of the dimension (log10 for log
    domains); truncation keeps every draw inside the bounds, so the density
    integrates to one over them.
    """

    def __init__(
        self,
        means: Sequence[float],
        bandwidths: Sequence[float],
        weights: Sequence[float],
        bounds: tuple[float, float],
    ) -> None:
        means_a = np.asarray(means, dtype=float)
        bw_a = np.asarray(bandwidths, dtype=float)
        w_a = np.asarray(weights, dtype=float)
        lo, hi = float(bounds[0]), float(bounds[1])
        if not (means_a.ndim == 1 and means_a.shape == bw_a.shape == w_a.shape and means_a.size >= 1):
            raise TpeError("means, bandwidths and weights must be equal-length, non-empty")
        if not lo < hi:
            raise TpeError(f"bounds must satisfy lo < hi, got ({lo}, {hi})")
        if np.any(bw_a <= 0):
            raise TpeError("bandwidths must be positive")
        if abs(float(w_a.sum()) - 1.0) > 1e-12:
            raise TpeError(f"weights must sum to 1, got {w_a.sum()!r}")
        self.means = means_a
        self.bandwidths = bw_a
        self.weights = w_a
        self.bounds = (lo, hi)
        # Per-component CDF mass inside the interval, for normalization and
        # inverse-CDF sampling.
        self._cdf_lo = _norm_cdf((lo - means_a) / bw_a)
        self._cdf_hi = _norm_cdf((hi - means_a) / bw_a)
        self._mass = self._cdf_hi - self._cdf_lo
        if np.any(self._mass <= 0):
            raise TpeError("degenerate component: no probability mass inside bounds")

    def density_many(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        lo, hi = self.bounds
        if np.any(xs < lo) or np.any(xs > hi):
            raise TpeError(f"density query outside bounds [{lo}, {hi}]")
        z = (xs[:, None] - self.means[None, :]) / self.bandwidths[None, :]
        comp = np.exp(-0.5 * z * z) / (_SQRT_2PI * self.bandwidths[None, :] * self._mass[None, :])
        return comp @ self.weights

    def density(self, x: float) -> float:
        return float(self.density_many(np.asarray([x]))[0])

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Inverse-CDF draws from rng-chosen components, clipped to bounds."""
        idx = rng.choice(len(self.weights), size=size, p=self.weights)
        u = rng.uniform(self._cdf_lo[idx], self._cdf_hi[idx])
        xs = self.means[idx] + self.bandwidths[idx] * ndtri(u)
        return np.clip(xs, self.bounds[0], self.bounds[1])


class CategoricalEstimator:
    """Smoothed category probabilities; every category keeps positive mass."""

    def __init__(self, probabilities: Sequence[float]) -> None:
        p = np.asarray(probabilities, dtype=float)
        if p.ndim != 1 or p.size < 1:
            raise TpeError("probabilities must be a non-empty vector")
        if np.any(p <= 0):
            raise TpeError("every category must have positive probability")
        if abs(float(p.sum()) - 1.0) > 1e-12:
            raise TpeError(f"probabilities must sum to 1, got {p.sum()!r}")
        self.probabilities = p

    def probability(self, index: int) -> float:
        return float(self.probabilities[index])

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.choice(len(self.probabilities), size=size, p=self.probabilities)


History = Sequence[tuple[HyperparameterSet, float]]


def split_observations(history: History, gamma: float) -> tuple[list, list]:
    """Sort ascending by error (1 - accuracy) and take the first
    max(1, ceil(gamma * n)) entries as good, the rest as bad. Ties keep the
    earlier history position first."""
    if not history:
        raise TpeError("cannot split an empty history")
    n = len(history)
    order = sorted(range(n), key=lambda i: (1.0 - history[i][1], i))
    n_good = max(1, math.ceil(gamma * n))
    good = [history[i] for i in order[:n_good]]
    bad = [history[i] for i in order[n_good:]]
    return good, bad


def fit_continuous(
    values: Sequence[float], bounds: tuple[float, float], config: TpeConfig
) -> ParzenEstimator:
    """One truncated-Gaussian component per observation plus a wide prior.

    A component's bandwidth is the distance to its nearest neighboring mean
    in sorted order; the outermost points additionally widen to the distance
    to their nearer bound when that is larger, and a lone observation uses
    that bound distance directly. Every bandwidth is floored at
    ``bandwidth_floor * (hi - lo)``. The prior sits at the midpoint with
    bandwidth ``hi - lo`` and weight ``prior_weight`` before normalization;
    observations weigh 1 each.
    """
    lo, hi = float(bounds[0]), float(bounds[1])
    if not lo < hi:
        raise TpeError(f"bounds must satisfy lo < hi, got ({lo}, {hi})")
    vals = np.sort(np.asarray(values, dtype=float))
    if vals.size and (vals[0] < lo or vals[-1] > hi):
        raise TpeError(f"observations outside bounds [{lo}, {hi}]")
    span = hi - lo
    floor = config.bandwidth_floor * span

    k = vals.size
    if k == 0:
        bw = np.empty(0)
    elif k == 1:
        bw = np.asarray([min(vals[0] - lo, hi - vals[0])])
    else:
        gaps = np.diff(vals)
        nearest = np.empty(k)
        nearest[0] = gaps[0]
        nearest[-1] = gaps[-1]
        nearest[1:-1] = np.minimum(gaps[:-1], gaps[1:])
        nearest[0] = max(nearest[0], min(vals[0] - lo, hi - vals[0]))
        nearest[-1] = max(nearest[-1], min(vals[-1] - lo, hi - vals[-1]))
        bw = nearest
    bw = np.maximum(bw, floor)

    means = np.append(vals, 0.5 * (lo + hi))
    bandwidths = np.append(bw, span)
    raw_weights = np.append(np.ones(k), config.prior_weight)
    return ParzenEstimator(means, bandwidths, raw_weights / raw_weights.sum(), (lo, hi))


def fit_categorical(
    values: Sequence[int], n_categories: int, prior_weight: float
) -> CategoricalEstimator:
    """probability[c] = (count[c] + prior_weight) / (n + prior_weight * K)."""
    if n_categories < 1:
        raise TpeError(f"n_categories must be >= 1, got {n_categories}")
    idx = np.asarray(values, dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= n_categories):
        raise TpeError(f"category index outside [0, {n_categories})")
    counts = np.bincount(idx, minlength=n_categories).astype(float)
    probs = (counts + prior_weight) / (idx.size + prior_weight * n_categories)
    return CategoricalEstimator(probs)


def _dimension_coordinates(domain, raw: float) -> float:
    if isinstance(domain, ContinuousLog):
        if raw <= 0:
            raise TpeError(f"log-domain value must be positive, got {raw}")
        return math.log10(raw)
    return float(raw)


def _dimension_bounds(domain) -> tuple[float, float]:
    if isinstance(domain, ContinuousLog):
        return math.log10(domain.lo), math.log10(domain.hi)
    return float(domain.lo), float(domain.hi)


def suggest(
    history: History,
    space: SearchSpace,
    config: TpeConfig,
    rng: np.random.Generator,
) -> HyperparameterSet:
    """Propose the next candidate.

    Below ``n_startup`` observations this is a uniform draw. Afterwards each
    dimension independently fits ``l`` on the good observations and ``g`` on
    the bad ones (prior-only when the bad set is empty, which keeps the
    acquisition ratio finite), draws ``n_ei_candidates`` values from ``l``
    and keeps the first maximizer of ``l(x)/g(x)``. Deterministic for a
    fixed generator state and history.
    """
    if len(history) < config.n_startup:
        return sample_uniform(space, rng)

    good, bad = split_observations(history, config.gamma)
    chosen: dict[str, float | int] = {}
    for name, domain in space.dimensions:
        if isinstance(domain, Categorical):
            members = list(domain.values)
            try:
                good_idx = [members.index(int(value_of(p, name))) for p, _ in good]
                bad_idx = [members.index(int(value_of(p, name))) for p, _ in bad]
            except ValueError as exc:
                raise TpeError(f"history value for {name!r} is not a member of {domain.values}") from exc
            l_est = fit_categorical(good_idx, len(members), config.prior_weight)
            g_est = fit_categorical(bad_idx, len(members), config.prior_weight)
            candidates = l_est.sample(rng, config.n_ei_candidates)
            scores = l_est.probabilities[candidates] / g_est.probabilities[candidates]
            chosen[name] = members[int(candidates[int(np.argmax(scores))])]
        else:
            bounds = _dimension_bounds(domain)
            good_vals = [_dimension_coordinates(domain, value_of(p, name)) for p, _ in good]
            bad_vals = [_dimension_coordinates(domain, value_of(p, name)) for p, _ in bad]
            l_est = fit_continuous(good_vals, bounds, config)
            g_est = fit_continuous(bad_vals, bounds, config)
            candidates = l_est.sample(rng, config.n_ei_candidates)
            scores = l_est.density_many(candidates) / g_est.density_many(candidates)
            value = float(candidates[int(np.argmax(scores))])
            if isinstance(domain, ContinuousLog):
                value = min(max(10.0**value, domain.lo), domain.hi)
            chosen[name] = value

    return HyperparameterSet(
        learning_rate=float(chosen["learning_rate"]),
        momentum=float(chosen["momentum"]),
        batch_size=int(chosen["batch_size"]),
    )

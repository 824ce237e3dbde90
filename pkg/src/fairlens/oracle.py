"""Randomized numerical verification of the audit's bound inequalities.

Four checks, each sampled over many independent trials:

* ball_bound     gap <= ball_gap_bound(radius, |t|) for captions drawn inside
                 the radius ball (exact inequality)
* angle_bound    gap <= angle_gap_bound(cos(t_a, t_b)) for arbitrary vectors
                 (exact inequality)
* approx_bound   gap <= 1.01 * distance/|t| while distance/|t| <= 0.1
                 (first-order approximation, checked only inside its
                 hypothesis; a global check would be wrong)
* decomposition  the binary-partition disparity bound on random outcome sets
                 (exact inequality)

Violations of the exact inequalities are build-blocking defects, not noise.
Every violation carries its full inputs for replay, and the verifiers never
abort early so the slack statistics cover all trials.

Reproducibility contract: trial i of stream s under seed k draws from
Philox(key=[k, s], counter=[0, 0, 0, i]) -- counter-based splitting, so
results are bit-identical for a given config regardless of execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .groups import GroupLabel, OutcomeSet, decomposition_check
from .individual import (
    APPROX_BOUND_CUTOFF,
    APPROX_BOUND_SLACK,
    angle_gap_bound,
    approx_gap_bound,
    ball_gap_bound,
)
from .vectors import Vector, cosine_similarity, euclidean_distance

__all__ = [
    "OracleConfig",
    "InequalityStats",
    "Violation",
    "OracleResult",
    "verify_ball_bound",
    "verify_angle_bound",
    "verify_approx_bound",
    "verify_decomposition",
    "run_all_checks",
    "INEQUALITY_IDS",
]

INEQUALITY_IDS = ("ball_bound", "angle_bound", "approx_bound", "decomposition")

_STREAMS = {name: i + 1 for i, name in enumerate(INEQUALITY_IDS)}

# Lower cutoff for the approx-bound relative distance; keeps the
# gap*norm/distance tightness statistic away from 0/0.
_APPROX_MIN_FRACTION = 1e-6

# Cohort sizes for random outcome sets in the decomposition check.
_COHORT_MIN, _COHORT_MAX = 2, 200


@dataclass(frozen=True)
class OracleConfig:
    """Sampling plan for the verifiers."""

    seed: int = 1
    trials: int = 100_000
    dim_range: tuple[int, int] = (2, 512)
    rho_fraction_range: tuple[float, float] = (0.05, 0.95)
    tolerance: float = 1e-9

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        lo, hi = self.dim_range
        if not 1 <= lo <= hi:
            raise ValueError(f"invalid dim range {self.dim_range}")
        flo, fhi = self.rho_fraction_range
        if not 0.0 <= flo < fhi < 1.0:
            raise ValueError(f"radius fractions must satisfy 0 <= lo < hi < 1, got {self.rho_fraction_range}")
        if not self.tolerance > 0.0:
            raise ValueError("tolerance must be positive")


@dataclass(frozen=True)
class Violation:
    """One failed inequality with everything needed to replay it."""

    inequality: str
    trial: int
    lhs: float
    rhs: float
    inputs: dict


@dataclass(frozen=True)
class InequalityStats:
    """Trial counts and slack diagnostics for one inequality.

    ``max_slack`` / ``min_slack`` are the extremes of rhs - lhs over all
    trials; min_slack near zero means the bound was exercised close to
    equality. ``extras`` carries check-specific diagnostics.
    """

    checked: int
    violations: int
    max_slack: float
    min_slack: float
    extras: dict = field(default_factory=dict)


@dataclass(frozen=True)
class OracleResult:
    """Merged outcome of one or more verifiers."""

    config: OracleConfig
    stats: dict[str, InequalityStats]
    violations: tuple[Violation, ...]

    @property
    def violation_count(self) -> int:
        return len(self.violations)

    @property
    def ok(self) -> bool:
        return self.violation_count == 0


def _trial_rng(seed: int, stream: int, trial: int) -> np.random.Generator:
    key = np.array([seed, stream], dtype=np.uint64)
    counter = np.array([0, 0, 0, trial], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def _random_vector(rng: np.random.Generator, dim: int) -> np.ndarray:
    # Gaussian components; the zero vector has probability 0 but re-draw
    # defensively so Vector construction can never fail.
    while True:
        arr = rng.standard_normal(dim)
        if np.linalg.norm(arr) > 0.0:
            return arr


def _unit_direction(rng: np.random.Generator, dim: int) -> np.ndarray:
    d = _random_vector(rng, dim)
    return d / np.linalg.norm(d)


class _Tally:
    """Accumulates one inequality's trials, slack extremes, and violations."""

    def __init__(self, inequality: str, tolerance: float):
        self.inequality = inequality
        self.tolerance = tolerance
        self.checked = 0
        self.max_slack = -math.inf
        self.min_slack = math.inf
        self.violations: list[Violation] = []
        self.extras: dict = {}

    def check(self, trial: int, lhs: float, rhs: float, inputs: Callable[[], dict]) -> None:
        self.checked += 1
        slack = rhs - lhs
        self.max_slack = max(self.max_slack, slack)
        self.min_slack = min(self.min_slack, slack)
        if lhs > rhs + self.tolerance:
            self.violations.append(
                Violation(self.inequality, trial, lhs, rhs, inputs())
            )

    def result(self, config: OracleConfig) -> OracleResult:
        stats = InequalityStats(
            checked=self.checked,
            violations=len(self.violations),
            max_slack=self.max_slack,
            min_slack=self.min_slack,
            extras=dict(self.extras),
        )
        return OracleResult(
            config=config,
            stats={self.inequality: stats},
            violations=tuple(self.violations),
        )


def verify_ball_bound(config: OracleConfig) -> OracleResult:
    """Sample captions inside a radius ball and check the closed-form gap ceiling.

    The perturbed caption is drawn uniformly in the ball: Gaussian direction
    times radius * u^(1/dim), which concentrates mass near the bounding sphere
    where the bound is tightest.
    """
    tally = _Tally("ball_bound", config.tolerance)
    dmin, dmax = config.dim_range
    flo, fhi = config.rho_fraction_range
    stream = _STREAMS["ball_bound"]
    for trial in range(config.trials):
        rng = _trial_rng(config.seed, stream, trial)
        dim = int(rng.integers(dmin, dmax + 1))
        v = Vector(_random_vector(rng, dim))
        t = Vector(_random_vector(rng, dim))
        fraction = float(rng.uniform(flo, fhi))
        radius = fraction * t.norm
        offset = radius * float(rng.uniform()) ** (1.0 / dim) * _unit_direction(rng, dim)
        t_prime = Vector(t.values + offset)
        lhs = abs(cosine_similarity(v, t_prime) - cosine_similarity(v, t))
        rhs = ball_gap_bound(radius, t.norm)
        tally.check(
            trial,
            lhs,
            rhs,
            lambda: {
                "dim": dim,
                "radius": radius,
                "v": v.values.tolist(),
                "t": t.values.tolist(),
                "t_prime": t_prime.values.tolist(),
            },
        )
    return tally.result(config)


def verify_angle_bound(config: OracleConfig) -> OracleResult:
    """Check gap <= angle_gap_bound(cos(t_a, t_b)) on unconstrained draws."""
    tally = _Tally("angle_bound", config.tolerance)
    dmin, dmax = config.dim_range
    stream = _STREAMS["angle_bound"]
    for trial in range(config.trials):
        rng = _trial_rng(config.seed, stream, trial)
        dim = int(rng.integers(dmin, dmax + 1))
        v = Vector(_random_vector(rng, dim))
        t_a = Vector(_random_vector(rng, dim))
        t_b = Vector(_random_vector(rng, dim))
        lhs = abs(cosine_similarity(v, t_a) - cosine_similarity(v, t_b))
        rhs = angle_gap_bound(cosine_similarity(t_a, t_b))
        tally.check(
            trial,
            lhs,
            rhs,
            lambda: {
                "dim": dim,
                "v": v.values.tolist(),
                "t_a": t_a.values.tolist(),
                "t_b": t_b.values.tolist(),
            },
        )
    return tally.result(config)


def verify_approx_bound(config: OracleConfig) -> OracleResult:
    """Check the slackened first-order bound inside its hypothesis.

    Draws keep the relative caption distance within (1e-6, 0.1]; the realized
    distance (not the intended one) feeds the bound. Also reports the
    empirical maximum of gap * |t| / distance as tightness evidence -- the
    half-angle analysis caps it at 1/cos(asin(0.1)/2) ~ 1.00126, well under
    the 1.01 slack.
    """
    tally = _Tally("approx_bound", config.tolerance)
    dmin, dmax = config.dim_range
    stream = _STREAMS["approx_bound"]
    max_gap_ratio = 0.0
    for trial in range(config.trials):
        rng = _trial_rng(config.seed, stream, trial)
        dim = int(rng.integers(dmin, dmax + 1))
        v = Vector(_random_vector(rng, dim))
        t = Vector(_random_vector(rng, dim))
        fraction = float(rng.uniform(_APPROX_MIN_FRACTION, APPROX_BOUND_CUTOFF))
        t_prime = Vector(t.values + fraction * t.norm * _unit_direction(rng, dim))
        distance = euclidean_distance(t_prime, t)
        lhs = abs(cosine_similarity(v, t_prime) - cosine_similarity(v, t))
        bound = approx_gap_bound(distance, t.norm)
        rhs = APPROX_BOUND_SLACK * bound
        if bound > 0.0:
            max_gap_ratio = max(max_gap_ratio, lhs / bound)
        tally.check(
            trial,
            lhs,
            rhs,
            lambda: {
                "dim": dim,
                "distance": distance,
                "v": v.values.tolist(),
                "t": t.values.tolist(),
                "t_prime": t_prime.values.tolist(),
            },
        )
    tally.extras["max_gap_ratio"] = max_gap_ratio
    return tally.result(config)


def verify_decomposition(config: OracleConfig) -> OracleResult:
    """Check the disparity decomposition bound on random outcome sets.

    Each trial builds a two-language, two-group outcome set with cohort sizes
    2-200 and per-cohort correctness rates drawn uniformly, then runs the real
    decomposition check against the configured tolerance.
    """
    tally = _Tally("decomposition", config.tolerance)
    stream = _STREAMS["decomposition"]
    group_a = GroupLabel("group", "a")
    group_b = GroupLabel("group", "b")
    taxonomy = {"group": ("a", "b")}
    langs = ("l0", "l1")
    for trial in range(config.trials):
        rng = _trial_rng(config.seed, stream, trial)
        sizes = rng.integers(_COHORT_MIN, _COHORT_MAX + 1, size=4)
        rates = rng.uniform(0.0, 1.0, size=4)
        corrects = rng.binomial(sizes, rates)
        cohorts = []
        counts = {}
        k = 0
        for lang in langs:
            for label in (group_a, group_b):
                cohorts.append((lang, (label,), int(sizes[k]), int(corrects[k])))
                counts[(lang, label.value)] = (int(sizes[k]), int(corrects[k]))
                k += 1
        outcomes = OutcomeSet.from_cohorts(cohorts, taxonomy=taxonomy)
        chk = decomposition_check(outcomes, langs[0], langs[1], group_a, group_b)
        tally.check(trial, chk.lhs, chk.rhs, lambda: {"cohorts": dict(counts)})
    return tally.result(config)


def _merge(results: list[OracleResult], config: OracleConfig) -> OracleResult:
    stats: dict[str, InequalityStats] = {}
    violations: list[Violation] = []
    for res in results:
        stats.update(res.stats)
        violations.extend(res.violations)
    return OracleResult(config=config, stats=stats, violations=tuple(violations))


def run_all_checks(config: OracleConfig) -> OracleResult:
    """Run all four verifiers and merge their results."""
    return _merge(
        [
            verify_ball_bound(config),
            verify_angle_bound(config),
            verify_approx_bound(config),
            verify_decomposition(config),
        ],
        config,
    )

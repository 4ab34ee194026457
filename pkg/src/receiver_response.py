"""
Receiver best responses: the exact argmax correspondence, its indifference
thresholds, shocked best responses and smoothed (disturbed) responses.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np
from scipy.special import ndtr

from evidence_game import ONE, ZERO, EvidenceGame, EvidenceGameError
from evigame_config import DEFAULT_SAMPLES, MONTE_CARLO_CHUNK, worker_count

logger = logging.getLogger(__name__)

FAMILIES = ("gaussian", "uniform")
METHODS = ("auto", "monte-carlo")


class DisturbanceError(EvidenceGameError):
    """Invalid or degenerate receiver payoff disturbance"""


def expected_utility(game: EvidenceGame, mu: Fraction, a: Fraction) -> Fraction:
    return mu * game.payoff_good[a] + (ONE - mu) * game.payoff_bad[a]


def best_response_set(game: EvidenceGame, mu: Fraction) -> Tuple[Fraction, ...]:
    """Exact argmax of the receiver's expected utility, ascending"""
    utilities = {a: expected_utility(game, mu, a) for a in game.actions}
    best = max(utilities.values())
    return tuple(a for a in game.actions if utilities[a] == best)


@dataclass(frozen=True)
class Threshold:
    belief: Fraction
    lower: Fraction
    upper: Fraction


def indifference_thresholds(game: EvidenceGame) -> List[Threshold]:
    """Beliefs in [0,1] where the receiver is indifferent, with the extreme tied actions"""
    candidates = set()
    for a, b in combinations(game.actions, 2):
        slope = (game.payoff_good[b] - game.payoff_bad[b]) - (game.payoff_good[a] - game.payoff_bad[a])
        if slope <= 0:
            continue
        mu = (game.payoff_bad[a] - game.payoff_bad[b]) / slope
        if ZERO <= mu <= ONE:
            candidates.add(mu)
    thresholds = []
    for mu in sorted(candidates):
        tied = best_response_set(game, mu)
        if len(tied) > 1:
            thresholds.append(Threshold(mu, tied[0], tied[-1]))
    return thresholds


@dataclass(frozen=True)
class BeliefRegion:
    """A maximal belief set on which the best-response set is constant"""

    index: int
    lower: Fraction
    upper: Fraction
    lower_closed: bool
    upper_closed: bool
    actions: Tuple[Fraction, ...]

    @property
    def is_threshold(self) -> bool:
        return self.lower == self.upper

    @property
    def value_range(self) -> Tuple[Fraction, Fraction]:
        return self.actions[0], self.actions[-1]

    def contains(self, mu: Fraction) -> bool:
        if self.is_threshold:
            return mu == self.lower
        above = mu >= self.lower if self.lower_closed else mu > self.lower
        below = mu <= self.upper if self.upper_closed else mu < self.upper
        return above and below

    def describe(self) -> str:
        if self.is_threshold:
            return f"{{{self.lower}}}"
        left = "[" if self.lower_closed else "("
        right = "]" if self.upper_closed else ")"
        return f"{left}{self.lower}, {self.upper}{right}"


def belief_regions(game: EvidenceGame) -> List[BeliefRegion]:
    """Partition of [0,1] into open intervals between thresholds and the thresholds themselves"""
    cuts = [t.belief for t in indifference_thresholds(game)]
    bounds = sorted(set([ZERO, ONE] + cuts))
    regions: List[BeliefRegion] = []

    def add(lower, upper, lower_closed, upper_closed, actions):
        regions.append(BeliefRegion(len(regions), lower, upper, lower_closed, upper_closed, actions))

    for k, (lo, hi) in enumerate(zip(bounds, bounds[1:])):
        if lo in cuts:
            add(lo, lo, True, True, best_response_set(game, lo))
        lower_closed = lo == ZERO and lo not in cuts
        upper_closed = hi == ONE and hi not in cuts
        add(lo, hi, lower_closed, upper_closed, best_response_set(game, (lo + hi) / 2))
    if ONE in cuts:
        add(ONE, ONE, True, True, best_response_set(game, ONE))
    return regions


def region_of(regions: Sequence[BeliefRegion], mu: Fraction) -> BeliefRegion:
    for region in regions:
        if region.contains(mu):
            return region
    raise ValueError(f"Belief {mu} lies outside [0, 1]")


def shocked_best_response(
    game: EvidenceGame, mu: Fraction, zeta: Mapping[Fraction, float]
) -> Tuple[Fraction, ...]:
    """Argmax of expected utility plus the payoff shock; shocks are compared exactly"""
    utilities = {
        a: expected_utility(game, mu, a) + Fraction(zeta.get(a, 0.0)) for a in game.actions
    }
    best = max(utilities.values())
    return tuple(a for a in game.actions if utilities[a] == best)


@dataclass(frozen=True)
class Disturbance:
    """Independent per-action payoff shocks: standard deviation (gaussian) or half-width (uniform)"""

    family: str
    scales: Dict[Fraction, float]
    seed: int = 0
    samples: int = DEFAULT_SAMPLES

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DisturbanceError(f"Unknown shock family '{self.family}', expected one of {FAMILIES}")
        if any(s < 0 or not math.isfinite(s) for s in self.scales.values()):
            raise DisturbanceError("Shock scales must be finite and nonnegative")
        if self.samples < 1:
            raise DisturbanceError("Monte Carlo budget must be at least one sample")
        if self.seed < 0:
            raise DisturbanceError("Seed must be nonnegative")

    def scale(self, a: Fraction) -> float:
        return float(self.scales.get(a, 0.0))

    def scaled(self, factor: float, seed: int) -> "Disturbance":
        return Disturbance(
            self.family, {a: s * factor for a, s in self.scales.items()}, seed, self.samples
        )


@dataclass(frozen=True)
class SmoothedResponse:
    probs: Dict[Fraction, float]
    value: float
    stderr: Dict[Fraction, float]
    value_stderr: float = 0.0
    closed_form: bool = True


def check_disturbance(game: EvidenceGame, eta: Disturbance) -> None:
    unknown = [a for a in eta.scales if a not in game.actions]
    if unknown:
        raise DisturbanceError(f"Shock scales name unknown actions {[str(a) for a in unknown]}")
    if len(game.actions) > 1 and not any(eta.scale(a) > 0 for a in game.actions):
        raise DisturbanceError("Degenerate disturbance: every action has scale 0")


def _normal_difference_cdf(x: float, s: float) -> float:
    return float(ndtr(x / s))


def _uniform_difference_cdf(x: float, h1: float, h2: float) -> float:
    """Cdf of U(-h1,h1) + U(-h2,h2): trapezoidal density"""
    a, b = max(h1, h2), min(h1, h2)
    if b == 0:
        return min(1.0, max(0.0, (x + a) / (2 * a)))
    if x <= -(a + b):
        return 0.0
    if x <= -(a - b):
        return (x + a + b) ** 2 / (8 * a * b)
    if x <= a - b:
        return (x + a) / (2 * a)
    if x < a + b:
        return 1.0 - (a + b - x) ** 2 / (8 * a * b)
    return 1.0


def _closed_form(game: EvidenceGame, eta: Disturbance, mu: Fraction) -> SmoothedResponse:
    low, high = game.actions
    gap = float(expected_utility(game, mu, high) - expected_utility(game, mu, low))
    if eta.family == "gaussian":
        p_high = _normal_difference_cdf(gap, math.hypot(eta.scale(low), eta.scale(high)))
    else:
        p_high = _uniform_difference_cdf(gap, eta.scale(low), eta.scale(high))
    probs = {low: 1.0 - p_high, high: p_high}
    value = float(low) * probs[low] + float(high) * probs[high]
    return SmoothedResponse(probs, value, {low: 0.0, high: 0.0})


def _monte_carlo(game: EvidenceGame, eta: Disturbance, mu: Fraction) -> SmoothedResponse:
    actions = game.actions
    k = len(actions)
    base = np.array([float(expected_utility(game, mu, a)) for a in actions])
    scales = np.array([eta.scale(a) for a in actions])
    chunks = range((eta.samples + MONTE_CARLO_CHUNK - 1) // MONTE_CARLO_CHUNK)

    def run(chunk: int) -> np.ndarray:
        n = min(MONTE_CARLO_CHUNK, eta.samples - chunk * MONTE_CARLO_CHUNK)
        rng = np.random.default_rng([eta.seed, chunk])
        if eta.family == "gaussian":
            shocks = rng.standard_normal((n, k)) * scales
        else:
            shocks = rng.uniform(-1.0, 1.0, (n, k)) * scales
        # argmax returns the first maximiser, i.e. ties go to the lower action
        return np.bincount(np.argmax(base + shocks, axis=1), minlength=k)

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        counts = sum(pool.map(run, chunks))

    n = eta.samples
    freq = counts / n
    probs = {a: float(freq[i]) for i, a in enumerate(actions)}
    stderr = {a: math.sqrt(p * (1.0 - p) / n) for a, p in probs.items()}
    values = np.array([float(a) for a in actions])
    value = float(values @ freq)
    variance = max(float((values**2) @ freq) - value**2, 0.0)
    return SmoothedResponse(probs, value, stderr, math.sqrt(variance / n), closed_form=False)


def smoothed_response(
    game: EvidenceGame, eta: Disturbance, mu: Fraction, method: str = "auto"
) -> SmoothedResponse:
    """Choice probabilities of a receiver with shocked payoffs at belief mu.

    "auto" uses the closed form for two actions; "monte-carlo" always samples.
    """
    check_disturbance(game, eta)
    if method not in METHODS:
        raise DisturbanceError(f"Unknown response method '{method}', expected one of {METHODS}")
    if len(game.actions) == 1:
        only = game.actions[0]
        return SmoothedResponse({only: 1.0}, float(only), {only: 0.0})
    if len(game.actions) == 2 and method == "auto":
        return _closed_form(game, eta, mu)
    return _monte_carlo(game, eta, mu)


@dataclass(frozen=True)
class ActionCurve:
    points: List[Tuple[Fraction, float]]
    stderr: List[float] = field(default_factory=list)
    increasing: bool = True


def expected_action_curve(game: EvidenceGame, eta: Disturbance, grid: Sequence[Fraction]) -> ActionCurve:
    """Smoothed expected action over an ascending belief grid, with a monotonicity flag"""
    for low, high in zip(grid, grid[1:]):
        if high < low:
            raise EvidenceGameError(f"Belief grid must ascend, got {low} before {high}")
    responses = [smoothed_response(game, eta, mu) for mu in grid]
    points = [(mu, r.value) for mu, r in zip(grid, responses)]
    errors = [r.value_stderr for r in responses]
    increasing = True
    for (mu0, v0), (mu1, v1), e0, e1 in zip(points, points[1:], errors, errors[1:]):
        if mu1 == mu0:
            increasing = increasing and v1 == v0
        elif e0 == 0 and e1 == 0:
            increasing = increasing and v1 > v0
        else:
            increasing = increasing and v1 - v0 > -3 * math.hypot(e0, e1)
    return ActionCurve(points, errors, increasing)
